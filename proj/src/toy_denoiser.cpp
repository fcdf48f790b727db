#include "sdlab/toy_denoiser.hpp"

#include <cmath>
#include <random>

namespace sdlab {

namespace {

std::vector<int> layer_widths(int dim, int time_features, const DenoiserConfig& config) {
  std::vector<int> w{dim + time_features};
  for (int i = 0; i < config.depth; ++i) w.push_back(config.width);
  w.push_back(dim);
  return w;
}

}  // namespace

DenoiserModel::DenoiserModel(int dim, int num_conditions, int T, const DenoiserConfig& config)
    : dim_(dim), num_conditions_(num_conditions), T_(T), time_features_(config.time_features) {
  if (config.time_features % 2 != 0) throw ParameterError("time_features must be even");
  std::mt19937_64 rng(config.seed);
  net_ = Mlp(layer_widths(dim, time_features_, config), num_conditions + 1, rng);
}

DenoiserModel::DenoiserModel(Mlp net, int dim, int num_conditions, int T, int time_features)
    : net_(std::move(net)), dim_(dim), num_conditions_(num_conditions), T_(T), time_features_(time_features) {
  if (net_.widths().front() != dim + time_features || net_.widths().back() != dim) {
    throw ModelError("denoiser network shape does not match its dimension");
  }
}

Mat DenoiserModel::features(const Mat& x, const std::vector<int>& t) const {
  const int half = time_features_ / 2;
  Mat f(dim_ + time_features_, x.cols());
  f.topRows(dim_) = x;
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double tau = 1000.0 * t[static_cast<std::size_t>(c)] / T_;
    for (int k = 0; k < half; ++k) {
      const double freq = std::pow(10000.0, -static_cast<double>(k) / half);
      f(dim_ + k, c) = std::sin(tau * freq);
      f(dim_ + half + k, c) = std::cos(tau * freq);
    }
  }
  return f;
}

Vec DenoiserModel::predict(const Vec& x, int t, const ConditionId& condition) const {
  return net_.forward(features(x, {t}), {embedding_index(condition)}).col(0);
}

DenoiserModel train_toy_denoiser(const Dataset& data, const NoiseSchedule& schedule,
                                 const DenoiserConfig& config, int num_conditions) {
  if (data.size() == 0) throw ParameterError("train_toy_denoiser: empty dataset");
  if (static_cast<int>(data.conditions.size()) != data.size()) {
    throw ParameterError("train_toy_denoiser: one condition label per sample required");
  }
  DenoiserModel model(data.dim(), num_conditions, schedule.steps(), config);
  if (config.iterations <= 0) return model;

  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_int_distribution<int> pick(0, data.size() - 1);
  std::uniform_int_distribution<int> pick_t(1, schedule.steps());
  std::uniform_real_distribution<double> unif;
  std::normal_distribution<double> normal;
  Adam adam(config.learning_rate);
  Vec params = model.net().parameters();
  const int B = config.batch;
  const int D = data.dim();
  for (int it = 0; it < config.iterations; ++it) {
    Mat xt(D, B), eps(D, B);
    std::vector<int> ts(static_cast<std::size_t>(B)), emb(static_cast<std::size_t>(B));
    for (int b = 0; b < B; ++b) {
      const int i = pick(rng);
      const int t = pick_t(rng);
      for (int d = 0; d < D; ++d) eps(d, b) = normal(rng);
      const double a = schedule.alpha_bar(t);
      xt.col(b) = std::sqrt(a) * data.samples.col(i) + std::sqrt(1.0 - a) * eps.col(b);
      ts[static_cast<std::size_t>(b)] = t;
      const int c = data.conditions[static_cast<std::size_t>(i)];
      const bool drop = c < 0 || unif(rng) < config.condition_dropout;
      emb[static_cast<std::size_t>(b)] = drop ? 0 : c + 1;
    }
    Mlp::Cache cache;
    const Mat pred = model.net().forward(model.features(xt, ts), emb, &cache);
    const Mat diff = pred - eps;
    const double loss = diff.squaredNorm() / (static_cast<double>(B) * D);
    if (!std::isfinite(loss)) {
      throw NumericError("denoiser training diverged at iteration " + std::to_string(it));
    }
    const Vec grad = model.net().backward(cache, emb, (2.0 / (static_cast<double>(B) * D)) * diff);
    adam.step(params, grad);
    model.net().set_parameters(params);
  }
  return model;
}

nlohmann::json denoiser_to_json(const DenoiserModel& model) {
  return {{"schema", kDenoiserSchema},
          {"dim", model.dim()},
          {"num_conditions", model.num_conditions()},
          {"T", model.steps()},
          {"time_features", model.time_features()},
          {"network", model.net().to_json()}};
}

DenoiserModel denoiser_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema").get<std::string>() != kDenoiserSchema) {
      throw ModelError("unsupported denoiser schema " + j.at("schema").get<std::string>());
    }
    return DenoiserModel(Mlp::from_json(j.at("network")), j.at("dim").get<int>(),
                         j.at("num_conditions").get<int>(), j.at("T").get<int>(),
                         j.at("time_features").get<int>());
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(std::string("bad denoiser checkpoint: ") + e.what());
  }
}

}  // namespace sdlab
