#include "sdlab/mixture.hpp"

#include <cmath>
#include <limits>

namespace sdlab {

int GaussianMixture::num_conditions() const {
  return condition_map.empty() ? 0 : condition_map.rbegin()->first + 1;
}

std::vector<int> GaussianMixture::subset(const ConditionId& condition) const {
  if (condition.is_none()) {
    std::vector<int> all(components.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    return all;
  }
  auto it = condition_map.find(condition.id);
  if (it == condition_map.end() || it->second.empty()) {
    throw ParameterError("condition " + std::to_string(condition.id) + " selects no components");
  }
  return it->second;
}

void GaussianMixture::validate() const {
  if (components.empty()) throw ConfigError("mixture has no components");
  const auto d = components.front().mean.size();
  for (const auto& c : components) {
    if (c.mean.size() != d) throw ConfigError("mixture component dimensions differ");
    if (!(c.weight > 0.0)) throw ConfigError("mixture weights must be positive");
    if (!(c.sigma > 0.0)) throw ConfigError("mixture sigma must be positive");
  }
  for (const auto& [id, idx] : condition_map) {
    if (id < 0) throw ConfigError("condition ids must be non-negative");
    if (idx.empty()) throw ConfigError("condition " + std::to_string(id) + " has no components");
    for (int i : idx) {
      if (i < 0 || i >= static_cast<int>(components.size())) {
        throw ConfigError("condition " + std::to_string(id) + " references a missing component");
      }
    }
  }
}

namespace {

struct Posterior {
  Vec resp;
  std::vector<double> variance;
};

Posterior posterior(const GaussianMixture& m, const NoiseSchedule& s, const Vec& x, int t,
                    const std::vector<int>& idx) {
  const double a = s.alpha_bar(t);
  const double sa = std::sqrt(a);
  const double d = static_cast<double>(x.size());
  Posterior p;
  p.resp.resize(static_cast<Eigen::Index>(idx.size()));
  p.variance.resize(idx.size());
  double wsum = 0.0;
  for (int i : idx) wsum += m.components[static_cast<std::size_t>(i)].weight;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto& c = m.components[static_cast<std::size_t>(idx[k])];
    const double sigma = std::max(c.sigma, kMinSigma);
    const double v = a * sigma * sigma + (1.0 - a);
    p.variance[k] = v;
    const double sq = (x - sa * c.mean).squaredNorm();
    const double lp = std::log(c.weight / wsum) - 0.5 * sq / v - 0.5 * d * std::log(v);
    p.resp(static_cast<Eigen::Index>(k)) = lp;
    best = std::max(best, lp);
  }
  p.resp = (p.resp.array() - best).exp();
  p.resp /= p.resp.sum();
  return p;
}

}  // namespace

Vec responsibilities(const GaussianMixture& mixture, const NoiseSchedule& schedule, const Vec& x,
                     int t, const ConditionId& condition) {
  return posterior(mixture, schedule, x, t, mixture.subset(condition)).resp;
}

Vec analytic_eps(const GaussianMixture& mixture, const NoiseSchedule& schedule, const Vec& x, int t,
                 const ConditionId& condition) {
  if (x.size() != mixture.dim()) throw ParameterError("analytic_eps: dimension mismatch");
  const auto idx = mixture.subset(condition);
  const Posterior p = posterior(mixture, schedule, x, t, idx);
  const double a = schedule.alpha_bar(t);
  const double sa = std::sqrt(a);
  // -grad log p = sum_k r_k (x - sqrt(a) mu_k) / v_k
  Vec neg_score = Vec::Zero(x.size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const double r = p.resp(static_cast<Eigen::Index>(k));
    if (r == 0.0) continue;
    const auto& c = mixture.components[static_cast<std::size_t>(idx[k])];
    neg_score += (r / p.variance[k]) * (x - sa * c.mean);
  }
  return std::sqrt(1.0 - a) * neg_score;
}

Vec sample_mixture(const GaussianMixture& mixture, const ConditionId& condition,
                   std::mt19937_64& rng) {
  const auto idx = mixture.subset(condition);
  std::vector<double> w;
  for (int i : idx) w.push_back(mixture.components[static_cast<std::size_t>(i)].weight);
  std::discrete_distribution<int> pick(w.begin(), w.end());
  const auto& c = mixture.components[static_cast<std::size_t>(idx[static_cast<std::size_t>(pick(rng))])];
  std::normal_distribution<double> normal;
  Vec x(c.mean.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = c.mean(i) + c.sigma * normal(rng);
  return x;
}

MixtureModel::MixtureModel(GaussianMixture mixture, NoiseSchedule schedule)
    : mixture_(std::move(mixture)), schedule_(std::move(schedule)) {
  mixture_.validate();
}

Vec MixtureModel::predict(const Vec& x, int t, const ConditionId& condition) const {
  return analytic_eps(mixture_, schedule_, x, t, condition);
}

nlohmann::json mixture_to_json(const GaussianMixture& mixture) {
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : mixture.components) {
    comps.push_back({{"weight", c.weight},
                     {"sigma", c.sigma},
                     {"mean", std::vector<double>(c.mean.data(), c.mean.data() + c.mean.size())}});
  }
  nlohmann::json conds = nlohmann::json::object();
  for (const auto& [id, idx] : mixture.condition_map) conds[std::to_string(id)] = idx;
  return {{"schema", kMixtureSchema}, {"components", comps}, {"conditions", conds}};
}

GaussianMixture mixture_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema").get<std::string>() != kMixtureSchema) {
      throw ConfigError("unsupported mixture schema " + j.at("schema").get<std::string>());
    }
    GaussianMixture m;
    for (const auto& c : j.at("components")) {
      const auto mean = c.at("mean").get<std::vector<double>>();
      m.components.push_back({c.at("weight").get<double>(),
                              Eigen::Map<const Vec>(mean.data(), static_cast<Eigen::Index>(mean.size())),
                              c.at("sigma").get<double>()});
    }
    for (const auto& [key, idx] : j.at("conditions").items()) {
      m.condition_map[std::stoi(key)] = idx.get<std::vector<int>>();
    }
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad mixture json: ") + e.what());
  }
}

}  // namespace sdlab
