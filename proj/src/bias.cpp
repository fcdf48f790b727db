#include "sdlab/bias.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "sdlab/parallel.hpp"
#include "sdlab/render.hpp"

namespace sdlab {

std::string objective_label(const ObjectiveSettings& s) {
  if (s.objective != Objective::Pcds) return to_string(s.objective);
  std::string out = "pcds" + std::to_string(s.pcds_steps);
  if (s.inversion == InversionMode::Ddpm) out += "_ddpm";
  return out;
}

ObjectiveSettings objective_from_label(const std::string& label) {
  ObjectiveSettings s;
  if (label.rfind("pcds", 0) == 0 && label.size() > 4) {
    s.objective = Objective::Pcds;
    std::string rest = label.substr(4);
    if (rest.size() >= 5 && rest.substr(rest.size() - 5) == "_ddpm") {
      s.inversion = InversionMode::Ddpm;
      rest = rest.substr(0, rest.size() - 5);
    }
    try {
      s.pcds_steps = std::stoi(rest);
    } catch (const std::exception&) {
      throw ConfigError("bad objective label '" + label + "'");
    }
    if (s.pcds_steps < 1) throw ConfigError("bad objective label '" + label + "'");
    return s;
  }
  s.objective = objective_from_string(label);
  s.inversion = s.objective == Objective::Sds ? InversionMode::Ddpm : InversionMode::Ddim;
  return s;
}

const BiasRow& BiasReport::find(const std::string& objective, int t, int pose_index) const {
  for (const auto& r : rows) {
    if (r.objective == objective && r.t == t && r.pose_index == pose_index) return r;
  }
  throw ParameterError("no bias row for " + objective + " at t=" + std::to_string(t));
}

double cosine_similarity(const Vec& a, const Vec& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 && nb == 0.0) return 1.0;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

namespace {

struct SampleStats {
  std::vector<double> cosine, ratio, residual, relative, nfe;
};

SplatScene jittered(const SplatScene& scene, const BiasConfig& config, std::mt19937_64& rng) {
  if (config.position_jitter == 0.0 && config.color_jitter == 0.0) return scene;
  SplatScene out = scene;
  std::normal_distribution<double> normal;
  for (auto& s : out.splats) {
    for (Eigen::Index k = 0; k < s.position.size(); ++k) s.position[k] += config.position_jitter * normal(rng);
    for (int c = 0; c < 3; ++c) s.color[c] = std::clamp(s.color[c] + config.color_jitter * normal(rng), 0.0, 1.0);
  }
  return out;
}

}  // namespace

BiasReport measure_bias(const ObjectiveContext& ctx, const SplatScene& scene, const BiasConfig& config) {
  ctx.validate();
  if (config.samples < 1) throw ParameterError("measure_bias needs at least one sample");
  const std::size_t n_obj = config.objectives.size();
  BiasReport report;
  for (std::size_t pi = 0; pi < config.poses.size(); ++pi) {
    const CameraPose& pose = config.poses[pi];
    const GuidanceConfig g = ctx.guidance.resolve(pose);
    const std::string bin = to_string(view_bin_for(pose.azimuth, pose.elevation));
    for (int t : config.timesteps) {
      std::vector<SampleStats> slots(static_cast<std::size_t>(config.samples));
      parallel_blocks(config.samples, [&](int k) {
        std::seed_seq seq{static_cast<unsigned long long>(config.seed), static_cast<unsigned long long>(pi),
                          static_cast<unsigned long long>(t), static_cast<unsigned long long>(k)};
        std::mt19937_64 rng(seq);
        const SplatScene sample_scene = jittered(scene, config, rng);
        const Vec x0 = render(sample_scene, pose).pixels;
        Vec noise(x0.size());
        std::normal_distribution<double> normal;
        for (auto& e : noise) e = normal(rng);
        auto to_space = [&](const Vec& pixel_grad) {
          return config.parameter_space ? render_backward(sample_scene, pose, pixel_grad) : pixel_grad;
        };
        const Vec ref = to_space(true_pixels(ctx, g, x0, t).pixel_grad);
        SampleStats& st = slots[static_cast<std::size_t>(k)];
        for (const auto& obj : config.objectives) {
          const PixelEstimate e = estimate_pixels(ctx, obj, g, x0, t, noise);
          const Vec est = to_space(e.pixel_grad);
          st.cosine.push_back(cosine_similarity(est, ref));
          const double nr = ref.norm();
          st.ratio.push_back(nr > 0.0 ? est.norm() / nr : (est.norm() == 0.0 ? 1.0 : 0.0));
          st.residual.push_back((ref - est).norm());
          st.relative.push_back(nr > 0.0 ? (ref - est).norm() / nr : 0.0);
          st.nfe.push_back(static_cast<double>(e.nfe));
        }
      });
      for (std::size_t o = 0; o < n_obj; ++o) {
        BiasRow row;
        row.objective = objective_label(config.objectives[o]);
        row.t = t;
        row.pose_bin = bin;
        row.pose_index = static_cast<int>(pi);
        row.samples = config.samples;
        double c2 = 0.0, r2 = 0.0;
        for (const auto& st : slots) {
          row.cosine += st.cosine[o];
          c2 += st.cosine[o] * st.cosine[o];
          row.mag_ratio += st.ratio[o];
          r2 += st.ratio[o] * st.ratio[o];
          row.eta_residual += st.residual[o];
          row.eta_relative += st.relative[o];
          row.nfe += st.nfe[o];
        }
        const double n = config.samples;
        row.cosine /= n;
        row.mag_ratio /= n;
        row.eta_residual /= n;
        row.eta_relative /= n;
        row.nfe /= n;
        row.cosine_std = std::sqrt(std::max(0.0, c2 / n - row.cosine * row.cosine));
        row.mag_ratio_std = std::sqrt(std::max(0.0, r2 / n - row.mag_ratio * row.mag_ratio));
        report.rows.push_back(row);
      }
    }
  }
  return report;
}

void write_bias_csv(const std::string& path, const BiasReport& report) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out.precision(17);
  out << "objective,t,pose_bin,cosine,mag_ratio,eta_residual,nfe\n";
  for (const auto& r : report.rows) {
    out << r.objective << ',' << r.t << ',' << r.pose_bin << ',' << r.cosine << ',' << r.mag_ratio << ','
        << r.eta_residual << ',' << r.nfe << '\n';
  }
}

nlohmann::json bias_to_json(const BiasReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"objective", r.objective}, {"t", r.t}, {"pose_bin", r.pose_bin}, {"pose_index", r.pose_index},
                    {"cosine", r.cosine}, {"cosine_std", r.cosine_std}, {"mag_ratio", r.mag_ratio},
                    {"mag_ratio_std", r.mag_ratio_std}, {"eta_residual", r.eta_residual},
                    {"eta_relative", r.eta_relative}, {"nfe", r.nfe},
                    {"samples", r.samples}});
  }
  return rows;
}

}  // namespace sdlab
