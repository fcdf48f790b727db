#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "sdlab/mixture.hpp"
#include "sdlab/schedule.hpp"
#include "sdlab/benchmark.hpp"

using namespace sdlab;

namespace {

Vec random_vec(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Vec v(n);
  for (auto& e : v) e = nd(rng);
  return v;
}

}  // namespace

TEST_CASE("single-step schedule has the one-factor product") {
  const auto s = build_schedule(ScheduleKind::Linear, 1, 0.1, 0.1);
  REQUIRE(s.alpha_bars().size() == 2);
  CHECK(s.alpha_bars()[0] == 1.0);
  CHECK(s.alpha_bars()[1] == doctest::Approx(0.9).epsilon(1e-15));
}

TEST_CASE("default schedule matches a long-double running product") {
  const auto s = default_schedule();
  REQUIRE(s.steps() == 1000);
  long double prod = 1.0L;
  for (int t = 1; t <= 1000; ++t) {
    const long double beta = 1e-4L + (0.02L - 1e-4L) * (t - 1) / 999.0L;
    prod *= 1.0L - beta;
    CHECK(std::abs(static_cast<long double>(s.alpha_bar(t)) - prod) / prod < 1e-12L);
  }
  CHECK(std::abs(static_cast<long double>(s.alpha_bar(1000)) - prod) / prod < 1e-10L);
}

TEST_CASE("alpha_bar is strictly decreasing and in (0, 1]") {
  for (auto kind : {ScheduleKind::Linear, ScheduleKind::Cosine}) {
    for (int T : {1, 10, 1000}) {
      const auto s = build_schedule(kind, T, 1e-4, 0.02);
      CHECK(s.alpha_bar(0) == 1.0);
      for (int t = 1; t <= T; ++t) {
        CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
        CHECK(s.alpha_bar(t) > 0.0);
      }
    }
  }
}

TEST_CASE("invalid schedules are parameter errors") {
  CHECK_THROWS_AS(build_schedule(ScheduleKind::Linear, 0, 1e-4, 0.02), ParameterError);
  CHECK_THROWS_AS(build_schedule(ScheduleKind::Linear, 10, 0.0, 0.02), ParameterError);
  CHECK_THROWS_AS(build_schedule(ScheduleKind::Linear, 10, 0.02, 1.0), ParameterError);
  CHECK_THROWS_AS(build_schedule(ScheduleKind::Linear, 10, 0.03, 0.02), ParameterError);
}

TEST_CASE("gamma") {
  const auto s = default_schedule();
  CHECK(gamma(s, 0) == 0.0);
  const double a = s.alpha_bar(500);
  CHECK(gamma(s, 500) == doctest::Approx(std::sqrt((1.0 - a) / a)).epsilon(1e-14));
  // alpha_bar = 0.5 gives 1: a one-step schedule with beta = 0.5.
  const auto half = build_schedule(ScheduleKind::Linear, 1, 0.5, 0.5);
  CHECK(gamma(half, 1) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(gamma(s, -1), ParameterError);
  CHECK_THROWS_AS(gamma(s, 1001), ParameterError);
}

TEST_CASE("timestep weights") {
  const auto s = default_schedule();
  CHECK(TimestepWeight::one()(s, 300) == 1.0);
  CHECK(TimestepWeight::one_minus_alpha_bar()(s, 300) == doctest::Approx(1.0 - s.alpha_bar(300)));
  TimestepWeight table{TimestepWeight::Kind::Table, std::vector<double>(1001, 2.5)};
  CHECK(table(s, 10) == 2.5);
  TimestepWeight short_table{TimestepWeight::Kind::Table, {1.0}};
  CHECK_THROWS_AS(short_table(s, 10), ConfigError);
}

TEST_CASE("ddpm_forward") {
  const auto s = default_schedule();
  Vec x0(2);
  x0 << 1.0, 0.0;
  Vec noise(2);
  noise << 0.3, -0.7;
  CHECK(ddpm_forward(s, x0, 0, noise).x == x0);
  CHECK((ddpm_forward(s, x0, 500, Vec::Zero(2)).x - s.sqrt_alpha_bar(500) * x0).norm() < 1e-15);
  const double a = s.alpha_bar(500);
  Vec expect(2);
  expect << std::sqrt(a) + std::sqrt(1.0 - a) * 0.3, std::sqrt(1.0 - a) * -0.7;
  const auto out = ddpm_forward(s, x0, 500, noise);
  CHECK(out.t == 500);
  CHECK((out.x - expect).norm() < 1e-15);
  CHECK_THROWS_AS(ddpm_forward(s, x0, 500, Vec::Zero(3)), ParameterError);
  Vec bad = x0;
  bad[0] = std::nan("");
  CHECK_THROWS(ddpm_forward(s, bad, 10, noise));
}

TEST_CASE("ddim_step edge cases") {
  const auto s = default_schedule();
  std::mt19937_64 rng(1);
  const Vec x = random_vec(4, rng), eps = random_vec(4, rng);
  CHECK(ddim_step(s, {x, 300}, 300, eps).x == x);
  CHECK((ddim_step(s, {x, 300}, 0, eps).x - predict_x0(s, x, 300, eps)).norm() == 0.0);
  const auto up = ddim_step(s, {x, 300}, 420, eps);
  const auto back = ddim_step(s, up, 300, eps);
  CHECK((back.x - x).norm() < 1e-10 * x.norm());
}

TEST_CASE("zero-noise forward equals a zero-eps DDIM step from t = 0") {
  const auto s = default_schedule();
  std::mt19937_64 rng(2);
  const Vec x0 = random_vec(5, rng);
  for (int t : {1, 17, 250, 999, 1000}) {
    const Vec a = ddpm_forward(s, x0, t, Vec::Zero(5)).x;
    const Vec b = ddim_step(s, {x0, 0}, t, Vec::Zero(5)).x;
    CHECK((a - b).norm() <= 1e-14 * x0.norm());
  }
}

TEST_CASE("inversion grid and trajectory shape") {
  const auto s = default_schedule();
  CHECK(inversion_grid(500, 200) == std::vector<int>{0, 200, 400, 500});
  CHECK(inversion_grid(400, 200) == std::vector<int>{0, 200, 400});
  CHECK(inversion_grid(150, 200) == std::vector<int>{0, 150});
  CHECK(inversion_grid(0, 200) == std::vector<int>{0});
  MixtureModel model(unit_gaussian_mixture(3), s);
  std::mt19937_64 rng(3);
  const Vec x0 = random_vec(3, rng);
  const auto traj = ddim_invert(s, x0, 500, 200, model);
  CHECK(traj.timesteps == std::vector<int>{0, 200, 400, 500});
  REQUIRE(traj.states.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(traj.states[i].t == traj.timesteps[i]);
  CHECK(traj.states[0].x == x0);
  CHECK(ddim_invert(s, x0, 100, 200, model).states.size() == 2);
  CHECK(ddim_invert(s, x0, 0, 200, model).states.size() == 1);
  for (int t : {1, 199, 200, 201, 777}) {
    CHECK(static_cast<int>(inversion_grid(t, 200).size()) == (t + 199) / 200 + 1);
  }
}

TEST_CASE("inversion is deterministic") {
  const auto s = default_schedule();
  MixtureModel model(toy_mixture_2d(), s);
  Vec x0(2);
  x0 << 0.2, -0.4;
  const auto a = ddim_invert(s, x0, 640, 25, model);
  const auto b = ddim_invert(s, x0, 640, 25, model);
  REQUIRE(a.states.size() == b.states.size());
  for (std::size_t i = 0; i < a.states.size(); ++i) CHECK(a.states[i].x == b.states[i].x);
}

namespace {

double roundtrip_error(const NoiseSchedule& s, const ScoreModel& model, int stepsize, int samples, int dim,
                       bool relative) {
  std::mt19937_64 rng(11);
  double total = 0.0;
  for (int k = 0; k < samples; ++k) {
    const Vec x0 = random_vec(dim, rng);
    const auto traj = ddim_invert(s, x0, 500, stepsize, model);
    std::vector<int> down(traj.timesteps.rbegin(), traj.timesteps.rend());
    const Vec rec = ddim_denoise(s, traj.final_state().x, down, model, ConditionId::none());
    total += relative ? (rec - x0).norm() / x0.norm() : (rec - x0).norm();
  }
  return total / samples;
}

}  // namespace

TEST_CASE("unit-Gaussian roundtrip recovers x0 at a fine stepsize") {
  const auto s = default_schedule();
  MixtureModel model(unit_gaussian_mixture(4), s);
  CHECK(roundtrip_error(s, model, 1, 20, 4, true) < 1e-2);
}

TEST_CASE("roundtrip error shrinks with the stepsize") {
  const auto s = default_schedule();
  MixtureModel model(unit_gaussian_mixture(4), s);
  double prev = 1e300;
  for (int step : {100, 50, 25, 10, 5, 2, 1}) {
    const double e = roundtrip_error(s, model, step, 100, 4, false);
    CHECK(e < prev);
    prev = e;
  }
}

TEST_CASE("schedule JSON roundtrip") {
  const auto s = build_schedule(ScheduleKind::Cosine, 50, 1e-4, 0.5);
  const auto r = schedule_from_json(schedule_to_json(s));
  CHECK(r.steps() == 50);
  CHECK(r.kind() == ScheduleKind::Cosine);
  for (int t = 0; t <= 50; ++t) CHECK(r.alpha_bar(t) == s.alpha_bar(t));
  CHECK_THROWS_AS(schedule_from_json({{"schema", "wrong"}}), ConfigError);
}
