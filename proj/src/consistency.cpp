#include "sdlab/consistency.hpp"

#include <cmath>
#include <random>

namespace sdlab {

Vec consistency_apply(const ConsistencyFunction& f, const NoiseSchedule& schedule, const Vec& x, int t,
                      const ConditionId& condition, const GuidanceConfig* guidance, ComposedScore* score) {
  schedule.check_timestep(t);
  if (t == 0) return x;
  if (!f.backbone) throw ModelError("consistency function has no backbone");
  Vec eps;
  if (guidance) {
    ComposedScore composed = perp_neg_compose(*f.backbone, x, t, *guidance);
    eps = composed.eps;
    if (score) *score = std::move(composed);
  } else {
    eps = f.backbone->eval(x, t, condition);
  }
  return x / schedule.sqrt_alpha_bar(t) - gamma(schedule, t) * eps;
}

namespace {

DenoiserConfig student_config(const DistillConfig& config) {
  DenoiserConfig c;
  c.width = config.width;
  c.depth = config.depth;
  c.time_features = config.time_features;
  c.seed = config.seed;
  return c;
}

ConditionId label(const Dataset& data, int i) {
  const int c = data.conditions.empty() ? -1 : data.conditions[static_cast<std::size_t>(i)];
  return c < 0 ? ConditionId::none() : ConditionId::of(c);
}

}  // namespace

ValidationSet make_validation_set(const ScoreModel& teacher, const NoiseSchedule& schedule,
                                  const Dataset& data, const DistillConfig& config) {
  ValidationSet v;
  const std::vector<int> grid = inversion_grid(config.t_max, config.solver_stepsize);
  v.timesteps.assign(grid.rbegin(), grid.rend());
  std::mt19937_64 rng(config.seed + 0x5eed);
  std::uniform_int_distribution<int> pick(0, data.size() - 1);
  std::normal_distribution<double> normal;
  for (int n = 0; n < config.validation_size; ++n) {
    const int i = pick(rng);
    Vec noise(data.dim());
    for (auto& e : noise) e = normal(rng);
    LatentSample s = ddpm_forward(schedule, data.samples.col(i), config.t_max, noise);
    std::vector<Vec> states{s.x};
    for (std::size_t k = 1; k < v.timesteps.size(); ++k) {
      const Vec eps = teacher.eval(s.x, s.t, label(data, i));
      s = ddim_step(schedule, s, v.timesteps[k], eps);
      states.push_back(s.x);
    }
    v.states.push_back(std::move(states));
    v.conditions.push_back(label(data, i));
  }
  return v;
}

SelfConsistencyReport self_consistency(const ConsistencyFunction& f, const NoiseSchedule& schedule,
                                       const ValidationSet& validation) {
  SelfConsistencyReport r;
  double sum_ratio = 0.0, sum_res = 0.0;
  for (std::size_t n = 0; n < validation.states.size(); ++n) {
    const auto& traj = validation.states[n];
    const ConditionId cond = n < validation.conditions.size() ? validation.conditions[n] : ConditionId::none();
    std::vector<Vec> out;
    for (std::size_t k = 0; k < traj.size(); ++k) {
      out.push_back(consistency_apply(f, schedule, traj[k], validation.timesteps[k], cond));
    }
    for (std::size_t a = 0; a < out.size(); ++a) {
      const double scale = out[a].norm();
      for (std::size_t b = a + 1; b < out.size(); ++b) {
        const double res = (out[a] - out[b]).norm();
        const double ratio = scale > 0.0 ? res / scale : res;
        sum_ratio += ratio;
        sum_res += res;
        r.max_ratio = std::max(r.max_ratio, ratio);
        r.ratios.push_back(ratio);
        ++r.pairs;
      }
    }
  }
  if (r.pairs > 0) {
    r.mean_ratio = sum_ratio / r.pairs;
    r.mean_residual = sum_res / r.pairs;
  }
  return r;
}

DistillResult consistency_distill(const ScoreModel& teacher, const NoiseSchedule& schedule, const Dataset& data,
                                  const DistillConfig& config) {
  if (data.size() == 0) throw ParameterError("consistency_distill: empty dataset");
  if (data.dim() != teacher.dim()) throw ParameterError("consistency_distill: dataset/teacher dimension mismatch");
  if (config.solver_stepsize < 1) throw ParameterError("consistency_distill: solver stepsize must be >= 1");
  schedule.check_timestep(config.t_max);
  if (config.t_max < 1) throw ParameterError("consistency_distill: t_max must be >= 1");

  DistillResult result;
  auto student = std::make_shared<DenoiserModel>(data.dim(), teacher.num_conditions(), schedule.steps(),
                                                 student_config(config));
  const ValidationSet validation = make_validation_set(teacher, schedule, data, config);
  result.initial = self_consistency({student}, schedule, validation);

  if (config.iterations > 0) {
    DenoiserModel target = *student;
    const std::vector<int> grid = inversion_grid(config.t_max, config.solver_stepsize);
    const int intervals = static_cast<int>(grid.size()) - 1;
    std::mt19937_64 rng(config.seed ^ 0xc0ffee);
    std::uniform_int_distribution<int> pick(0, data.size() - 1);
    std::uniform_int_distribution<int> pick_n(0, intervals - 1);
    std::normal_distribution<double> normal;
    Adam adam(config.learning_rate);
    Vec params = student->net().parameters();
    Vec target_params = params;
    const int B = config.batch;
    const int D = data.dim();
    for (int it = 0; it < config.iterations; ++it) {
      Mat x_hi(D, B), eps_target(D, B);
      std::vector<int> ts(static_cast<std::size_t>(B)), emb(static_cast<std::size_t>(B));
      for (int b = 0; b < B; ++b) {
        const int i = pick(rng);
        const int n = pick_n(rng);
        const int t_hi = grid[static_cast<std::size_t>(n + 1)];
        const int t_lo = grid[static_cast<std::size_t>(n)];
        const ConditionId cond = label(data, i);
        Vec noise(D);
        for (auto& e : noise) e = normal(rng);
        const LatentSample hi = ddpm_forward(schedule, data.samples.col(i), t_hi, noise);
        const LatentSample lo = ddim_step(schedule, hi, t_lo, teacher.eval(hi.x, t_hi, cond));
        const Vec x0 = t_lo == 0 ? lo.x
                                 : Vec(lo.x / schedule.sqrt_alpha_bar(t_lo) -
                                       gamma(schedule, t_lo) * target.eval(lo.x, t_lo, cond));
        x_hi.col(b) = hi.x;
        eps_target.col(b) = (hi.x - schedule.sqrt_alpha_bar(t_hi) * x0) / schedule.sqrt_one_minus_alpha_bar(t_hi);
        ts[static_cast<std::size_t>(b)] = t_hi;
        emb[static_cast<std::size_t>(b)] = DenoiserModel::embedding_index(cond);
      }
      Mlp::Cache cache;
      const Mat pred = student->net().forward(student->features(x_hi, ts), emb, &cache);
      const Mat diff = pred - eps_target;
      const double loss = diff.squaredNorm() / (static_cast<double>(B) * D);
      if (!std::isfinite(loss)) {
        throw NumericError("consistency distillation diverged at iteration " + std::to_string(it));
      }
      result.loss.push_back(loss);
      adam.step(params, student->net().backward(cache, emb, (2.0 / (static_cast<double>(B) * D)) * diff));
      student->net().set_parameters(params);
      target_params = config.ema * target_params + (1.0 - config.ema) * params;
      target.net().set_parameters(target_params);
    }
  }
  result.student = student;
  result.function.backbone = student;
  result.final = self_consistency(result.function, schedule, validation);
  return result;
}

}  // namespace sdlab
