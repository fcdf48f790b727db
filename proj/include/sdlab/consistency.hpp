#pragma once

#include <memory>
#include <vector>

#include "sdlab/guidance.hpp"
#include "sdlab/schedule.hpp"
#include "sdlab/score_model.hpp"
#include "sdlab/toy_denoiser.hpp"

namespace sdlab {

/// Two-branch consistency function: identity at t = 0, otherwise the one-step DDIM
/// clean estimate x / sqrt(a_t) - gamma(t) eps through the backbone.
struct ConsistencyFunction {
  std::shared_ptr<const ScoreModel> backbone;

  static double f_in(int t) { return t == 0 ? 1.0 : 0.0; }
  static double f_out(int t) { return t == 0 ? 0.0 : 1.0; }
};

/// Evaluates f(x, t). With guidance, eps is the composed score for guidance->positive and
/// `condition` is ignored; `score` (optional) receives the composition.
Vec consistency_apply(const ConsistencyFunction& f, const NoiseSchedule& schedule, const Vec& x, int t,
                      const ConditionId& condition, const GuidanceConfig* guidance = nullptr,
                      ComposedScore* score = nullptr);

struct DistillConfig {
  int solver_stepsize = 35;  // teacher DDIM interval between paired points
  int t_max = 700;           // highest timestep distilled and validated
  double ema = 0.95;
  int iterations = 30000;
  int batch = 64;
  double learning_rate = 3e-4;
  int width = 128;
  int depth = 3;
  int time_features = 16;
  int validation_size = 64;
  unsigned long long seed = 0;
};

/// Residuals ||f(x_t, t) - f(x_s, s)|| / ||f(x_t, t)|| over pairs on teacher DDIM trajectories.
struct SelfConsistencyReport {
  double mean_ratio = 0.0;
  double max_ratio = 0.0;
  double mean_residual = 0.0;
  int pairs = 0;
  std::vector<double> ratios;  // one per pair, in trajectory order
};

/// Validation trajectories: x0 noised to t_max, then denoised by the teacher on the solver grid.
struct ValidationSet {
  std::vector<int> timesteps;             // decreasing, ends at 0
  std::vector<std::vector<Vec>> states;   // per trajectory, aligned with timesteps
  std::vector<ConditionId> conditions;    // per trajectory
};

ValidationSet make_validation_set(const ScoreModel& teacher, const NoiseSchedule& schedule,
                                  const Dataset& data, const DistillConfig& config);
SelfConsistencyReport self_consistency(const ConsistencyFunction& f, const NoiseSchedule& schedule,
                                       const ValidationSet& validation);

struct DistillResult {
  std::shared_ptr<DenoiserModel> student;
  ConsistencyFunction function;
  SelfConsistencyReport initial;
  SelfConsistencyReport final;
  std::vector<double> loss;
};

/// Consistency distillation against a frozen teacher with an EMA target network. The student
/// is an epsilon-predictor, so the regression target is expressed in epsilon space.
DistillResult consistency_distill(const ScoreModel& teacher, const NoiseSchedule& schedule, const Dataset& data,
                                  const DistillConfig& config);

}  // namespace sdlab
