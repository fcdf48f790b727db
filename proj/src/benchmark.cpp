#include "sdlab/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "sdlab/render.hpp"

namespace sdlab {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

void paint_disk(Vec& img, int height, int width, double cx, double cy, double r, const Eigen::Vector3d& color) {
  for (int row = 0; row < height; ++row) {
    for (int col = 0; col < width; ++col) {
      const double x = (col + 0.5) / width, y = (row + 0.5) / height;
      if ((x - cx) * (x - cx) + (y - cy) * (y - cy) < r * r) {
        img.segment<3>((static_cast<Eigen::Index>(row) * width + col) * 3) = color;
      }
    }
  }
}

const Eigen::Vector3d kImageBackground(0.15, 0.2, 0.35);

}  // namespace

Vec benchmark_view_image(int bin, int variant, int height, int width) {
  static const Eigen::Vector2d marker[4] = {{0.5, 0.35}, {0.75, 0.5}, {0.5, 0.75}, {0.5, 0.2}};
  static const Eigen::Vector3d palette[4] = {{0.1, 0.8, 0.3}, {0.9, 0.9, 0.2}, {0.2, 0.3, 0.9}, {0.95, 0.95, 0.95}};
  if (bin < 0 || bin > 3) throw ParameterError("view bin out of range");
  Vec img(static_cast<Eigen::Index>(height) * width * 3);
  for (Eigen::Index p = 0; p < img.size() / 3; ++p) img.segment<3>(p * 3) = kImageBackground;
  paint_disk(img, height, width, 0.5, 0.55, 0.3, {0.9, 0.45, 0.2});
  const double phase = variant * std::numbers::pi / 2.0;
  const Eigen::Vector2d c = marker[bin] + 0.08 * Eigen::Vector2d(std::cos(phase), std::sin(phase));
  const Eigen::Vector3d& color = variant > 0 ? palette[(variant + bin) % 4] : palette[bin];
  paint_disk(img, height, width, c.x(), c.y(), 0.1, color);
  return img;
}

namespace {

/// Generic component plus `variants` modes per bin; `mode_mean(bin, v)` supplies the means.
template <typename ModeFn>
GaussianMixture binned_mixture(const BenchmarkSpec& spec, int dim, ModeFn mode_mean) {
  GaussianMixture m;
  m.components.push_back({spec.generic_weight, Vec::Constant(dim, 0.5), spec.generic_sigma});
  const double per_bin = (1.0 - spec.generic_weight) / 4.0;
  for (int bin = 0; bin < 4; ++bin) {
    std::vector<int> idx;
    for (int v = 0; v < spec.variants; ++v) {
      const double share = spec.variants == 1 ? 1.0
                           : v == 0          ? spec.dominant_share
                                             : (1.0 - spec.dominant_share) / (spec.variants - 1);
      m.components.push_back({per_bin * share, mode_mean(bin, v), spec.mode_sigma});
      idx.push_back(static_cast<int>(m.components.size()) - 1);
    }
    m.condition_map[bin] = idx;
  }
  m.validate();
  return m;
}

}  // namespace

GaussianMixture image_mixture(const BenchmarkSpec& spec) {
  return binned_mixture(spec, spec.height * spec.width * 3,
                        [&](int bin, int v) { return benchmark_view_image(bin, v, spec.height, spec.width); });
}

Benchmark image_benchmark(const BenchmarkSpec& spec) {
  Benchmark b;
  b.name = "image";
  b.scene_dim = 2;
  b.schedule = default_schedule();
  b.model = std::make_shared<MixtureModel>(image_mixture(spec), b.schedule);
  b.guidance.fixed.w_g = spec.w_g;
  b.guidance.fixed.positive = ConditionId::of(0, ViewBin::Front);
  b.camera = planar_camera(spec.height, spec.width);
  b.bin_cameras = {b.camera};
  b.background = kImageBackground;
  return b;
}

SplatScene reference_object() {
  SplatScene s;
  s.dim = 3;
  s.background = kImageBackground;
  auto add = [&](Eigen::Vector3d pos, double scale, Eigen::Vector3d color) {
    Splat sp;
    sp.position = pos;
    sp.log_scale = Vec::Constant(3, std::log(scale));
    sp.color = color;
    sp.opacity_logit = 4.0;
    s.splats.push_back(sp);
  };
  // Body: a ring of overlapping blobs around the vertical axis plus a core.
  add({0.0, 0.0, 0.0}, 0.45, {0.9, 0.45, 0.2});
  for (int k = 0; k < 8; ++k) {
    const double a = 2.0 * std::numbers::pi * k / 8.0;
    add({0.45 * std::sin(a), 0.0, 0.45 * std::cos(a)}, 0.3, {0.9, 0.45, 0.2});
  }
  add({0.0, 0.7, 0.0}, 0.18, {0.95, 0.95, 0.95});    // top
  add({0.0, 0.15, 0.75}, 0.15, {0.1, 0.8, 0.3});     // front (+z)
  add({0.75, 0.15, 0.0}, 0.15, {0.9, 0.9, 0.2});     // side (+x)
  add({-0.75, 0.15, 0.0}, 0.15, {0.9, 0.9, 0.2});    // side (-x)
  add({0.0, 0.15, -0.75}, 0.15, {0.2, 0.3, 0.9});    // back (-z)
  return s;
}

namespace {

CameraPose bin_camera(int bin, double offset, const BenchmarkSpec& spec) {
  constexpr double radius = 4.0;
  switch (bin) {
    case 0: return orbit_camera(offset, 0.0, radius, spec.height, spec.width);
    case 1: return orbit_camera(90.0 * kDeg + offset, 0.0, radius, spec.height, spec.width);
    case 2: return orbit_camera(180.0 * kDeg + offset, 0.0, radius, spec.height, spec.width);
    default: return orbit_camera(offset * 4.0, 70.0 * kDeg, radius, spec.height, spec.width);
  }
}

}  // namespace

Benchmark object_benchmark(const BenchmarkSpec& spec) {
  Benchmark b;
  b.name = "object";
  b.scene_dim = 3;
  b.schedule = default_schedule();
  const SplatScene ref = reference_object();
  BenchmarkSpec s = spec;
  s.mode_sigma = std::max(spec.mode_sigma, 0.02);
  const auto mixture = binned_mixture(s, spec.height * spec.width * 3, [&](int bin, int v) {
    const double offset = v == 0 ? 0.0 : (v % 2 == 1 ? 1.0 : -1.0) * 20.0 * kDeg * ((v + 1) / 2);
    return render(ref, bin_camera(bin, offset, spec)).pixels;
  });
  b.model = std::make_shared<MixtureModel>(mixture, b.schedule);
  b.guidance.fixed.w_g = spec.w_g;
  b.guidance.pose_dependent = true;
  b.guidance.w_c = 0.5;
  b.camera = orbit_camera(0.0, 0.0, 4.0, spec.height, spec.width);
  for (int bin = 0; bin < 4; ++bin) b.bin_cameras.push_back(bin_camera(bin, 0.0, spec));
  b.background = kImageBackground;
  return b;
}

Benchmark make_benchmark(const std::string& name, const BenchmarkSpec& spec) {
  if (name == "image") return image_benchmark(spec);
  if (name == "object") return object_benchmark(spec);
  throw ConfigError("unknown benchmark '" + name + "'");
}

double nearest_mode_mse(const GaussianMixture& mixture, const Vec& image, int condition) {
  double best = std::numeric_limits<double>::infinity();
  for (int i : mixture.subset(ConditionId::of(condition))) {
    const auto& c = mixture.components[static_cast<std::size_t>(i)];
    best = std::min(best, (image - c.mean).squaredNorm() / static_cast<double>(image.size()));
  }
  return best;
}

double scene_mse(const Benchmark& bench, const SplatScene& scene) {
  const auto& mixture = bench.model->mixture();
  if (bench.scene_dim == 2) {
    return nearest_mode_mse(mixture, render(scene, bench.camera).pixels, bench.target_condition);
  }
  double sum = 0.0;
  for (std::size_t bin = 0; bin < bench.bin_cameras.size(); ++bin) {
    sum += nearest_mode_mse(mixture, render(scene, bench.bin_cameras[bin]).pixels,
                            bench.guidance.bin_conditions[bin]);
  }
  return sum / static_cast<double>(bench.bin_cameras.size());
}

ObjectiveContext benchmark_context(const Benchmark& bench) {
  ObjectiveContext ctx;
  ctx.schedule = &bench.schedule;
  ctx.model = bench.model.get();
  ctx.consistency.backbone = bench.model;
  ctx.guidance = bench.guidance;
  return ctx;
}

GaussianMixture unit_gaussian_mixture(int dim) {
  GaussianMixture m;
  m.components.push_back({1.0, Vec::Zero(dim), 1.0});
  m.condition_map[0] = {0};
  return m;
}

GaussianMixture toy_mixture_2d() {
  GaussianMixture m;
  Vec a(2), b(2), c(2);
  a << -1.0, 0.5;
  b << 1.2, -0.8;
  c << 0.3, 1.4;
  m.components = {{0.5, a, 0.3}, {0.3, b, 0.5}, {0.2, c, 0.2}};
  m.condition_map[0] = {0};
  m.condition_map[1] = {1, 2};
  return m;
}

Dataset sample_dataset(const GaussianMixture& mixture, int per_condition, unsigned long long seed) {
  std::mt19937_64 rng(seed);
  const int k = std::max(1, mixture.num_conditions());
  Dataset d;
  d.samples.resize(mixture.dim(), static_cast<Eigen::Index>(per_condition) * k);
  int col = 0;
  for (int c = 0; c < k; ++c) {
    const ConditionId cond = mixture.condition_map.empty() ? ConditionId::none() : ConditionId::of(c);
    for (int i = 0; i < per_condition; ++i) {
      d.samples.col(col++) = sample_mixture(mixture, cond, rng);
      d.conditions.push_back(cond.is_none() ? -1 : c);
    }
  }
  return d;
}

}  // namespace sdlab
