#include "sdlab/guidance.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

namespace sdlab {

void GuidanceConfig::validate() const {
  if (positive.is_none()) throw ConfigError("guidance positive prompt must not be the null prompt");
  if (!std::isfinite(w_g)) throw ConfigError("guidance weight must be finite");
  for (const auto& n : negatives) {
    if (!(n.weight >= 0.0) || !std::isfinite(n.weight)) throw ConfigError("negative weights must be >= 0");
  }
}

ComposedScore perp_neg_compose(const ScoreModel& model, const Vec& x, int t, const GuidanceConfig& config) {
  config.validate();
  ComposedScore out;
  out.eps_uncond = model.eval(x, t, ConditionId::none());
  out.eps_positive = model.eval(x, t, config.positive);
  out.nfe = 2;
  out.delta_positive = out.eps_positive - out.eps_uncond;
  Vec direction = out.delta_positive;
  for (const auto& neg : config.negatives) {
    const Vec delta_neg = model.eval(x, t, neg.condition) - out.eps_uncond;
    ++out.nfe;
    auto p = perp_component(out.delta_positive, delta_neg);
    out.degenerate = out.degenerate || p.degenerate;
    direction -= neg.weight * p.perp;
    out.perp_negatives.push_back(std::move(p.perp));
  }
  out.eps = out.eps_uncond + config.w_g * direction;
  return out;
}

ViewBin view_bin_for(double azimuth, double elevation) {
  constexpr double deg = std::numbers::pi / 180.0;
  if (elevation > 60.0 * deg) return ViewBin::Overhead;
  double a = std::remainder(azimuth, 2.0 * std::numbers::pi);  // (-pi, pi]
  a = std::abs(a);
  if (a <= 45.0 * deg) return ViewBin::Front;
  if (a < 135.0 * deg) return ViewBin::Side;
  return ViewBin::Back;
}

PoseBinding bind_pose(double azimuth, double elevation, double w_c) {
  PoseBinding b;
  b.positive_bin = view_bin_for(azimuth, elevation);
  for (ViewBin v : {ViewBin::Front, ViewBin::Side, ViewBin::Back, ViewBin::Overhead}) {
    if (v != b.positive_bin) b.negative_bins.emplace_back(v, w_c);
  }
  return b;
}

GuidanceConfig guidance_for_binding(const PoseBinding& binding, const std::array<int, 4>& bin_condition,
                                    double w_g) {
  GuidanceConfig g;
  g.w_g = w_g;
  g.positive = ConditionId::of(bin_condition[static_cast<std::size_t>(binding.positive_bin)], binding.positive_bin);
  for (const auto& [bin, w] : binding.negative_bins) {
    g.negatives.push_back({ConditionId::of(bin_condition[static_cast<std::size_t>(bin)], bin), w});
  }
  return g;
}

GuidanceTraceRow trace_row(const ComposedScore& score, int t, const GuidanceConfig& config) {
  GuidanceTraceRow row;
  row.t = t;
  row.positive = config.positive.id;
  for (const auto& n : config.negatives) row.negatives.push_back(n.condition.id);
  row.eps_norm = score.eps.norm();
  row.positive_norm = score.delta_positive.norm();
  for (const auto& p : score.perp_negatives) {
    const double denom = row.positive_norm * p.norm();
    if (denom > 0.0) {
      row.orthogonality_residual =
          std::max(row.orthogonality_residual, std::abs(score.delta_positive.dot(p)) / denom);
    }
  }
  return row;
}

void write_guidance_trace(const std::string& path, const std::vector<GuidanceTraceRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write guidance trace " + path);
  out.precision(17);
  out << "t,positive,negatives,eps_norm,positive_norm,orthogonality_residual\n";
  for (const auto& r : rows) {
    out << r.t << ',' << r.positive << ',';
    for (std::size_t i = 0; i < r.negatives.size(); ++i) out << (i ? ";" : "") << r.negatives[i];
    out << ',' << r.eps_norm << ',' << r.positive_norm << ',' << r.orthogonality_residual << '\n';
  }
}

nlohmann::json guidance_to_json(const GuidanceConfig& config) {
  nlohmann::json negs = nlohmann::json::array();
  for (const auto& n : config.negatives) negs.push_back({{"condition", n.condition.id}, {"w_c", n.weight}});
  return {{"w_g", config.w_g}, {"positive", config.positive.id}, {"negatives", negs}};
}

GuidanceConfig guidance_from_json(const nlohmann::json& j) {
  GuidanceConfig g;
  g.w_g = j.value("w_g", 7.5);
  g.positive = ConditionId::of(j.value("positive", 0));
  if (j.contains("negatives")) {
    for (const auto& n : j.at("negatives")) {
      g.negatives.push_back({ConditionId::of(n.at("condition").get<int>()), n.value("w_c", 0.5)});
    }
  }
  g.validate();
  return g;
}

}  // namespace sdlab
