#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "sdlab/common.hpp"

namespace sdlab {

class ScoreModel;
struct ConditionId;

enum class ScheduleKind { Linear, Cosine };

std::string to_string(ScheduleKind kind);
ScheduleKind schedule_kind_from_string(const std::string& name);

/// Discrete diffusion schedule. alpha_bar(0) == 1 so that t == 0 is clean data;
/// betas are indexed 1..T (betas()[t - 1] is the beta applied on the way to t).
class NoiseSchedule {
 public:
  NoiseSchedule() = default;

  ScheduleKind kind() const { return kind_; }
  int steps() const { return static_cast<int>(betas_.size()); }
  double beta_start() const { return beta_start_; }
  double beta_end() const { return beta_end_; }
  const std::vector<double>& betas() const { return betas_; }
  const std::vector<double>& alpha_bars() const { return alpha_bars_; }

  double alpha_bar(int t) const;
  double sqrt_alpha_bar(int t) const;
  double sqrt_one_minus_alpha_bar(int t) const;
  void check_timestep(int t) const;

  friend NoiseSchedule build_schedule(ScheduleKind, int, double, double);
  friend NoiseSchedule schedule_from_json(const nlohmann::json&);

 private:
  ScheduleKind kind_ = ScheduleKind::Linear;
  double beta_start_ = 0.0;
  double beta_end_ = 0.0;
  std::vector<double> betas_;
  std::vector<double> alpha_bars_;
};

/// Linear: betas interpolate beta_start..beta_end. Cosine: the squared-cosine
/// alpha_bar curve with betas clipped to [beta_start, beta_end].
NoiseSchedule build_schedule(ScheduleKind kind, int T, double beta_start, double beta_end);

/// The default toy schedule: linear, T = 1000, 1e-4 .. 0.02.
NoiseSchedule default_schedule();

/// sqrt(1 - alpha_bar_t) / sqrt(alpha_bar_t).
double gamma(const NoiseSchedule& schedule, int t);

/// Timestep weight w(t) used by the distillation gradients.
struct TimestepWeight {
  enum class Kind { One, OneMinusAlphaBar, Table };
  Kind kind = Kind::One;
  std::vector<double> table;  // indexed by t, size T + 1 when kind == Table

  double operator()(const NoiseSchedule& schedule, int t) const;

  static TimestepWeight one() { return {}; }
  static TimestepWeight one_minus_alpha_bar() { return {Kind::OneMinusAlphaBar, {}}; }
};

std::string to_string(TimestepWeight::Kind kind);
TimestepWeight::Kind weight_kind_from_string(const std::string& name);

struct LatentSample {
  Vec x;
  int t = 0;
};

struct InversionTrajectory {
  std::vector<int> timesteps;
  std::vector<LatentSample> states;
  int stepsize = 1;

  const LatentSample& final_state() const { return states.back(); }
};

LatentSample ddpm_forward(const NoiseSchedule& schedule, const Vec& x0, int t, const Vec& noise);

/// Deterministic DDIM move from sample.t to t_next using the given epsilon.
/// Works in both directions (inversion when t_next > t).
LatentSample ddim_step(const NoiseSchedule& schedule, const LatentSample& sample, int t_next,
                       const Vec& eps);

/// x0 estimate (x - sqrt(1 - a) eps) / sqrt(a) at timestep t > 0.
Vec predict_x0(const NoiseSchedule& schedule, const Vec& x, int t, const Vec& eps);

/// Unconditional DDIM inversion on the grid {0, d, 2d, ..., t_target}, following the
/// coarse-to-fine loop: t_f = min((j+1) d, t), t_n = j d, eps evaluated at (x, t_n, none).
InversionTrajectory ddim_invert(const NoiseSchedule& schedule, const Vec& x0, int t_target,
                                int stepsize, const ScoreModel& model);

/// Deterministic unconditional DDIM denoising through a decreasing list of timesteps
/// (the first entry is the current timestep of x).
Vec ddim_denoise(const NoiseSchedule& schedule, const Vec& x, const std::vector<int>& timesteps,
                 const ScoreModel& model, const ConditionId& condition);

/// Timesteps {0, d, 2d, ..., t} as visited by ddim_invert.
std::vector<int> inversion_grid(int t_target, int stepsize);

nlohmann::json schedule_to_json(const NoiseSchedule& schedule);
NoiseSchedule schedule_from_json(const nlohmann::json& j);

}  // namespace sdlab
