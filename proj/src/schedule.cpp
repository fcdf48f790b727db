#include "sdlab/schedule.hpp"

#include <cmath>
#include <numbers>

#include "sdlab/score_model.hpp"

namespace sdlab {

std::string to_string(ScheduleKind kind) {
  return kind == ScheduleKind::Linear ? "linear" : "cosine";
}

ScheduleKind schedule_kind_from_string(const std::string& name) {
  if (name == "linear") return ScheduleKind::Linear;
  if (name == "cosine") return ScheduleKind::Cosine;
  throw ConfigError("unknown schedule kind '" + name + "'");
}

double NoiseSchedule::alpha_bar(int t) const {
  check_timestep(t);
  return alpha_bars_[static_cast<std::size_t>(t)];
}

double NoiseSchedule::sqrt_alpha_bar(int t) const { return std::sqrt(alpha_bar(t)); }

double NoiseSchedule::sqrt_one_minus_alpha_bar(int t) const {
  return std::sqrt(1.0 - alpha_bar(t));
}

void NoiseSchedule::check_timestep(int t) const {
  if (t < 0 || t > steps()) {
    throw ParameterError("timestep " + std::to_string(t) + " outside [0, " +
                         std::to_string(steps()) + "]");
  }
}

NoiseSchedule build_schedule(ScheduleKind kind, int T, double beta_start, double beta_end) {
  if (T < 1) throw ParameterError("schedule needs T >= 1");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw ParameterError("schedule needs 0 < beta_start <= beta_end < 1");
  }
  NoiseSchedule s;
  s.kind_ = kind;
  s.beta_start_ = beta_start;
  s.beta_end_ = beta_end;
  s.betas_.resize(static_cast<std::size_t>(T));
  if (kind == ScheduleKind::Linear) {
    for (int i = 0; i < T; ++i) {
      const double frac = T == 1 ? 0.0 : static_cast<double>(i) / (T - 1);
      s.betas_[static_cast<std::size_t>(i)] = beta_start + frac * (beta_end - beta_start);
    }
  } else {
    constexpr double offset = 0.008;
    auto f = [&](int t) {
      const double c = std::cos((t / static_cast<double>(T) + offset) / (1.0 + offset) *
                                std::numbers::pi / 2.0);
      return c * c;
    };
    for (int i = 0; i < T; ++i) {
      const double b = 1.0 - f(i + 1) / f(i);
      s.betas_[static_cast<std::size_t>(i)] = std::clamp(b, beta_start, beta_end);
    }
  }
  s.alpha_bars_.resize(static_cast<std::size_t>(T) + 1);
  s.alpha_bars_[0] = 1.0;
  double prod = 1.0;
  for (int i = 0; i < T; ++i) {
    prod *= 1.0 - s.betas_[static_cast<std::size_t>(i)];
    s.alpha_bars_[static_cast<std::size_t>(i) + 1] = prod;
  }
  return s;
}

NoiseSchedule default_schedule() { return build_schedule(ScheduleKind::Linear, 1000, 1e-4, 0.02); }

double gamma(const NoiseSchedule& schedule, int t) {
  const double a = schedule.alpha_bar(t);
  return std::sqrt(1.0 - a) / std::sqrt(a);
}

double TimestepWeight::operator()(const NoiseSchedule& schedule, int t) const {
  switch (kind) {
    case Kind::One: schedule.check_timestep(t); return 1.0;
    case Kind::OneMinusAlphaBar: return 1.0 - schedule.alpha_bar(t);
    case Kind::Table:
      schedule.check_timestep(t);
      if (table.size() != static_cast<std::size_t>(schedule.steps()) + 1) {
        throw ConfigError("weight table must have T + 1 entries");
      }
      return table[static_cast<std::size_t>(t)];
  }
  return 1.0;
}

std::string to_string(TimestepWeight::Kind kind) {
  switch (kind) {
    case TimestepWeight::Kind::One: return "one";
    case TimestepWeight::Kind::OneMinusAlphaBar: return "one_minus_alpha_bar";
    case TimestepWeight::Kind::Table: return "table";
  }
  return "one";
}

TimestepWeight::Kind weight_kind_from_string(const std::string& name) {
  if (name == "one") return TimestepWeight::Kind::One;
  if (name == "one_minus_alpha_bar") return TimestepWeight::Kind::OneMinusAlphaBar;
  if (name == "table") return TimestepWeight::Kind::Table;
  throw ConfigError("unknown timestep weight '" + name + "'");
}

LatentSample ddpm_forward(const NoiseSchedule& schedule, const Vec& x0, int t, const Vec& noise) {
  if (noise.size() != x0.size()) throw ParameterError("ddpm_forward: noise dimension mismatch");
  if (!x0.allFinite() || !noise.allFinite()) throw NumericError("ddpm_forward: non-finite input");
  const double a = schedule.alpha_bar(t);
  return {std::sqrt(a) * x0 + std::sqrt(1.0 - a) * noise, t};
}

Vec predict_x0(const NoiseSchedule& schedule, const Vec& x, int t, const Vec& eps) {
  const double a = schedule.alpha_bar(t);
  return (x - std::sqrt(1.0 - a) * eps) / std::sqrt(a);
}

LatentSample ddim_step(const NoiseSchedule& schedule, const LatentSample& sample, int t_next,
                       const Vec& eps) {
  schedule.check_timestep(t_next);
  if (eps.size() != sample.x.size()) throw ParameterError("ddim_step: eps dimension mismatch");
  if (t_next == sample.t) return sample;
  const Vec x0_hat = predict_x0(schedule, sample.x, sample.t, eps);
  if (t_next == 0) return {x0_hat, 0};
  const double a_next = schedule.alpha_bar(t_next);
  return {std::sqrt(a_next) * x0_hat + std::sqrt(1.0 - a_next) * eps, t_next};
}

std::vector<int> inversion_grid(int t_target, int stepsize) {
  if (stepsize < 1) throw ParameterError("inversion stepsize must be >= 1");
  if (t_target < 0) throw ParameterError("inversion target must be >= 0");
  std::vector<int> grid{0};
  const int n_inv = (t_target + stepsize - 1) / stepsize;
  for (int j = 0; j < n_inv; ++j) grid.push_back(std::min((j + 1) * stepsize, t_target));
  return grid;
}

InversionTrajectory ddim_invert(const NoiseSchedule& schedule, const Vec& x0, int t_target,
                                int stepsize, const ScoreModel& model) {
  schedule.check_timestep(t_target);
  InversionTrajectory traj;
  traj.stepsize = stepsize;
  traj.timesteps = inversion_grid(t_target, stepsize);
  traj.states.push_back({x0, 0});
  const int n_inv = static_cast<int>(traj.timesteps.size()) - 1;
  for (int j = 0; j < n_inv; ++j) {
    const int t_n = j * stepsize;
    const int t_f = std::min((j + 1) * stepsize, t_target);
    const LatentSample& cur = traj.states.back();
    const Vec eps = model.eval(cur.x, t_n, ConditionId::none());
    LatentSample current{cur.x, t_n};
    traj.states.push_back(ddim_step(schedule, current, t_f, eps));
  }
  return traj;
}

Vec ddim_denoise(const NoiseSchedule& schedule, const Vec& x, const std::vector<int>& timesteps,
                 const ScoreModel& model, const ConditionId& condition) {
  if (timesteps.empty()) return x;
  LatentSample s{x, timesteps.front()};
  for (std::size_t i = 1; i < timesteps.size(); ++i) {
    if (timesteps[i] >= s.t) throw ParameterError("ddim_denoise needs decreasing timesteps");
    const Vec eps = model.eval(s.x, s.t, condition);
    s = ddim_step(schedule, s, timesteps[i], eps);
  }
  return s.x;
}

nlohmann::json schedule_to_json(const NoiseSchedule& schedule) {
  return {{"kind", to_string(schedule.kind())},
          {"T", schedule.steps()},
          {"beta_start", schedule.beta_start()},
          {"beta_end", schedule.beta_end()},
          {"betas", schedule.betas()},
          {"alpha_bars", schedule.alpha_bars()}};
}

NoiseSchedule schedule_from_json(const nlohmann::json& j) {
  try {
    NoiseSchedule s = build_schedule(schedule_kind_from_string(j.at("kind").get<std::string>()),
                                     j.at("T").get<int>(), j.at("beta_start").get<double>(),
                                     j.at("beta_end").get<double>());
    // Stored tables win so that imports are bit-identical to the exporting run.
    if (j.contains("betas") && j.contains("alpha_bars")) {
      auto betas = j.at("betas").get<std::vector<double>>();
      auto bars = j.at("alpha_bars").get<std::vector<double>>();
      if (betas.size() != s.betas_.size() || bars.size() != s.alpha_bars_.size()) {
        throw ConfigError("schedule tables do not match T");
      }
      if (bars.front() != 1.0) throw ConfigError("alpha_bars[0] must be 1");
      s.betas_ = std::move(betas);
      s.alpha_bars_ = std::move(bars);
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad schedule json: ") + e.what());
  }
}

}  // namespace sdlab
