#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "sdlab/benchmark.hpp"
#include "sdlab/guidance.hpp"
#include "sdlab/mixture.hpp"

using namespace sdlab;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

Vec random_vec(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Vec v(n);
  for (auto& e : v) e = nd(rng);
  return v;
}

// Four well separated 3D components, one per condition.
GaussianMixture four_modes() {
  GaussianMixture m;
  const double pts[4][3] = {{1, 0, 0}, {0, 1.5, 0}, {-1, -0.5, 0.8}, {0.3, 0.2, -1.2}};
  for (int k = 0; k < 4; ++k) {
    m.components.push_back({0.25, Eigen::Vector3d(pts[k][0], pts[k][1], pts[k][2]), 0.4});
    m.condition_map[k] = {k};
  }
  return m;
}

}  // namespace

TEST_CASE("cfg_compose") {
  Vec u(2), c(2);
  u << 0.0, 0.0;
  c << 1.0, 2.0;
  Vec expect(2);
  expect << 7.5, 15.0;
  CHECK(cfg_compose(u, c, 7.5) == expect);
  std::mt19937_64 rng(1);
  const Vec a = random_vec(5, rng), b = random_vec(5, rng);
  CHECK(cfg_compose(a, b, 0.0) == a);
  CHECK((cfg_compose(a, b, 1.0) - b).norm() < 1e-15);
  CHECK_THROWS_AS(cfg_compose(a, Vec(3), 1.0), ParameterError);
  // Works for other scalar types too.
  Eigen::VectorXf uf = Eigen::VectorXf::Zero(2), cf(2);
  cf << 1.0f, 2.0f;
  CHECK(cfg_compose(uf, cf, 2.0f)[1] == 4.0f);
}

TEST_CASE("perp_component") {
  Vec p(2), n(2);
  p << 1.0, 0.0;
  n << 3.0, 4.0;
  const auto r = perp_component(p, n);
  CHECK(!r.degenerate);
  CHECK(r.perp[0] == 0.0);
  CHECK(r.perp[1] == 4.0);
  std::mt19937_64 rng(2);
  const Vec a = random_vec(6, rng);
  CHECK(perp_component(a, Vec(-2.5 * a)).perp.norm() < 1e-14 * a.norm());
  Vec ortho = random_vec(6, rng);
  ortho -= (a.dot(ortho) / a.squaredNorm()) * a;
  CHECK((perp_component(a, ortho).perp - ortho).norm() < 1e-14);
  const auto zero = perp_component(Vec::Zero(6), a);
  CHECK(zero.degenerate);
  CHECK(zero.perp == a);
  CHECK_THROWS_AS(perp_component(a, Vec(2)), ParameterError);
}

TEST_CASE("perp-neg with no negatives is plain classifier-free guidance, bit for bit") {
  const auto s = default_schedule();
  MixtureModel model(four_modes(), s);
  std::mt19937_64 rng(3);
  for (int k = 0; k < 20; ++k) {
    const Vec x = random_vec(3, rng);
    const int t = 20 + 45 * k;
    GuidanceConfig g;
    g.positive = ConditionId::of(k % 4);
    const ComposedScore c = perp_neg_compose(model, x, t, g);
    const Vec ref = cfg_compose(model.eval(x, t, ConditionId::none()), model.eval(x, t, g.positive), g.w_g);
    CHECK(c.eps == ref);
    CHECK(c.nfe == 2);
  }
}

TEST_CASE("zero negative weights reduce to classifier-free guidance, bit for bit") {
  const auto s = default_schedule();
  MixtureModel model(four_modes(), s);
  std::mt19937_64 rng(4);
  const Vec x = random_vec(3, rng);
  GuidanceConfig g;
  g.negatives = {{ConditionId::of(1), 0.0}, {ConditionId::of(2), 0.0}};
  const ComposedScore c = perp_neg_compose(model, x, 321, g);
  CHECK(c.eps == cfg_compose(model.eval(x, 321, ConditionId::none()), model.eval(x, 321, g.positive), g.w_g));
}

TEST_CASE("composition matches a direct re-derivation") {
  const auto s = default_schedule();
  const auto m = four_modes();
  MixtureModel model(m, s);
  std::mt19937_64 rng(5);
  for (int k = 0; k < 25; ++k) {
    const Vec x = random_vec(3, rng);
    const int t = 1 + 37 * k;
    GuidanceConfig g;
    g.w_g = 3.0 + k * 0.2;
    g.positive = ConditionId::of(k % 4);
    for (int j = 1; j < 4; ++j) g.negatives.push_back({ConditionId::of((k + j) % 4), 0.1 * j + 0.2});
    const ComposedScore c = perp_neg_compose(model, x, t, g);

    // eps_u + w (d_pos - sum_i w_i (d_i - <d_i, d_pos>/|d_pos|^2 d_pos)), scalar loops.
    const Vec eu = analytic_eps(m, s, x, t, ConditionId::none());
    const Vec dp = analytic_eps(m, s, x, t, g.positive) - eu;
    double pp = 0.0;
    for (int d = 0; d < 3; ++d) pp += dp[d] * dp[d];
    Vec ref = dp;
    for (const auto& n : g.negatives) {
      const Vec dn = analytic_eps(m, s, x, t, n.condition) - eu;
      double dot = 0.0;
      for (int d = 0; d < 3; ++d) dot += dn[d] * dp[d];
      for (int d = 0; d < 3; ++d) ref[d] -= n.weight * (dn[d] - dot / pp * dp[d]);
    }
    for (int d = 0; d < 3; ++d) ref[d] = eu[d] + g.w_g * ref[d];
    CHECK((c.eps - ref).norm() <= 1e-12 * ref.norm());
  }
}

TEST_CASE("projected negatives are orthogonal to the positive direction") {
  const auto s = default_schedule();
  MixtureModel model(four_modes(), s);
  std::mt19937_64 rng(6);
  for (int k = 0; k < 200; ++k) {
    const Vec x = 2.0 * random_vec(3, rng);
    const int t = 1 + (k * 53) % 1000;
    GuidanceConfig g;
    g.positive = ConditionId::of(k % 4);
    for (int j = 1; j < 4; ++j) g.negatives.push_back({ConditionId::of((k + j) % 4), 0.5});
    const ComposedScore c = perp_neg_compose(model, x, t, g);
    for (std::size_t i = 0; i < c.perp_negatives.size(); ++i) {
      const Vec raw = model.eval(x, t, g.negatives[i].condition) - c.eps_uncond;
      CHECK(std::abs(c.delta_positive.dot(c.perp_negatives[i])) <= 1e-9 * c.delta_positive.norm() * raw.norm());
    }
    // The deviation from plain guidance lies in the span of the projected negatives.
    const Vec plain = cfg_compose(c.eps_uncond, c.eps_positive, g.w_g);
    Mat span(3, static_cast<Eigen::Index>(c.perp_negatives.size()));
    for (std::size_t i = 0; i < c.perp_negatives.size(); ++i) span.col(static_cast<Eigen::Index>(i)) = c.perp_negatives[i];
    const Vec diff = c.eps - plain;
    const Vec fit = span * span.completeOrthogonalDecomposition().solve(diff);
    CHECK((fit - diff).norm() <= 1e-9 * std::max(1.0, diff.norm()));
  }
}

TEST_CASE("evaluation count is negatives + 2 on the model counter") {
  const auto s = default_schedule();
  MixtureModel model(four_modes(), s);
  for (int n = 0; n <= 3; ++n) {
    GuidanceConfig g;
    for (int j = 1; j <= n; ++j) g.negatives.push_back({ConditionId::of(j), 0.5});
    model.reset_nfe();
    const ComposedScore c = perp_neg_compose(model, Vec::Ones(3), 100, g);
    CHECK(model.nfe() == n + 2);
    CHECK(c.nfe == n + 2);
  }
}

TEST_CASE("zero positive direction falls back without NaN") {
  const auto s = default_schedule();
  // Positive condition equal to the whole mixture: eps_pos == eps_uncond.
  GaussianMixture m;
  m.components = {{1.0, Vec::Zero(2), 1.0}};
  m.condition_map[0] = {0};
  m.condition_map[1] = {0};
  MixtureModel model(m, s);
  GuidanceConfig g;
  g.negatives = {{ConditionId::of(1), 0.5}};
  Vec x(2);
  x << 0.3, 0.1;
  const ComposedScore c = perp_neg_compose(model, x, 200, g);
  CHECK(c.degenerate);
  CHECK(c.eps.allFinite());
}

TEST_CASE("invalid guidance configs") {
  const auto s = default_schedule();
  MixtureModel model(four_modes(), s);
  GuidanceConfig g;
  g.positive = ConditionId::none();
  CHECK_THROWS_AS(perp_neg_compose(model, Vec::Ones(3), 10, g), ConfigError);
  g.positive = ConditionId::of(0);
  g.negatives = {{ConditionId::of(1), -0.1}};
  CHECK_THROWS_AS(perp_neg_compose(model, Vec::Ones(3), 10, g), ConfigError);
  g.negatives = {{ConditionId::of(9), 0.5}};
  CHECK_THROWS_AS(perp_neg_compose(model, Vec::Ones(3), 10, g), ModelError);
}

TEST_CASE("pose bins") {
  CHECK(view_bin_for(0.0, 0.0) == ViewBin::Front);
  CHECK(view_bin_for(45.0 * kDeg, 0.0) == ViewBin::Front);
  CHECK(view_bin_for(-44.0 * kDeg, 10.0 * kDeg) == ViewBin::Front);
  CHECK(view_bin_for(90.0 * kDeg, 0.0) == ViewBin::Side);
  CHECK(view_bin_for(-90.0 * kDeg, 0.0) == ViewBin::Side);
  CHECK(view_bin_for(180.0 * kDeg, 0.0) == ViewBin::Back);
  CHECK(view_bin_for(3.0 * std::numbers::pi, 0.0) == ViewBin::Back);
  CHECK(view_bin_for(350.0 * kDeg, 0.0) == ViewBin::Front);
  CHECK(view_bin_for(0.0, 75.0 * kDeg) == ViewBin::Overhead);
  const PoseBinding b = bind_pose(100.0 * kDeg, 0.0, 0.5);
  CHECK(b.positive_bin == ViewBin::Side);
  REQUIRE(b.negative_bins.size() == 3);
  for (const auto& [bin, w] : b.negative_bins) {
    CHECK(bin != ViewBin::Side);
    CHECK(w == 0.5);
  }
  const GuidanceConfig g = guidance_for_binding(b, {10, 11, 12, 13}, 7.5);
  CHECK(g.positive.id == 11);
  CHECK(g.num_negatives() == 3);
  CHECK(g.negatives[0].condition.id == 10);
}

TEST_CASE("guidance trace CSV") {
  const auto s = default_schedule();
  MixtureModel model(four_modes(), s);
  GuidanceConfig g;
  g.negatives = {{ConditionId::of(1), 0.5}, {ConditionId::of(3), 0.25}};
  std::vector<GuidanceTraceRow> rows;
  for (int t : {100, 500}) rows.push_back(trace_row(perp_neg_compose(model, Vec::Ones(3), t, g), t, g));
  CHECK(rows[0].orthogonality_residual < 1e-12);
  const auto path = (std::filesystem::temp_directory_path() / "sdlab_trace_test.csv").string();
  write_guidance_trace(path, rows);
  std::ifstream in(path);
  std::string header, line;
  std::getline(in, header);
  CHECK(header == "t,positive,negatives,eps_norm,positive_norm,orthogonality_residual");
  std::getline(in, line);
  CHECK(line.rfind("100,0,1;3,", 0) == 0);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(write_guidance_trace("/nonexistent-dir/x.csv", rows), IoError);
}

TEST_CASE("guidance JSON roundtrip") {
  GuidanceConfig g;
  g.w_g = 5.0;
  g.positive = ConditionId::of(2);
  g.negatives = {{ConditionId::of(0), 0.3}};
  const GuidanceConfig r = guidance_from_json(guidance_to_json(g));
  CHECK(r.w_g == 5.0);
  CHECK(r.positive.id == 2);
  REQUIRE(r.negatives.size() == 1);
  CHECK(r.negatives[0].weight == 0.3);
}
