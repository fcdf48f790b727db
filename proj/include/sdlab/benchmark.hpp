#pragma once

#include <memory>
#include <string>
#include <vector>

#include "sdlab/camera.hpp"
#include "sdlab/mixture.hpp"
#include "sdlab/objectives.hpp"
#include "sdlab/splat.hpp"
#include "sdlab/toy_denoiser.hpp"

namespace sdlab {

/// Image distribution used by the fitting experiments. Each view bin is one condition whose
/// components are a dominant appearance and a few minor variants; a broad generic component
/// is only reachable through the unconditional prompt.
struct BenchmarkSpec {
  int height = 32;
  int width = 32;
  double mode_sigma = 0.005;
  double generic_sigma = 0.25;
  double generic_weight = 0.4;
  int variants = 4;
  double dominant_share = 0.85;  // remaining share split evenly over the minor variants
  double w_g = 7.5;
};

struct Benchmark {
  std::string name;  // "image" or "object"
  int scene_dim = 2;
  NoiseSchedule schedule;
  std::shared_ptr<MixtureModel> model;
  GuidancePolicy guidance;
  CameraPose camera;                    // base camera (planar for image scenes)
  std::vector<CameraPose> bin_cameras;  // one per view bin, used for evaluation
  Eigen::Vector3d background{0.0, 0.0, 0.0};
  int target_condition = 0;
};

/// Flattened target image for a view bin and variant of the image benchmark.
Vec benchmark_view_image(int bin, int variant, int height, int width);

GaussianMixture image_mixture(const BenchmarkSpec& spec);
/// Image-plane benchmark: planar camera, plain classifier-free guidance on the front bin.
Benchmark image_benchmark(const BenchmarkSpec& spec = {});

/// Reference object for the 3D benchmark: a body with coloured markers on each side and on top.
SplatScene reference_object();
/// 3D benchmark: modes are renders of the reference object near each bin's canonical pose;
/// guidance binds the camera pose to a positive bin with the other bins as Perp-Neg negatives.
Benchmark object_benchmark(const BenchmarkSpec& spec = {});

Benchmark make_benchmark(const std::string& name, const BenchmarkSpec& spec = {});

/// Mean squared error to the closest component mean of a condition.
double nearest_mode_mse(const GaussianMixture& mixture, const Vec& image, int condition);
/// Fit quality of a scene: image scenes use the base camera and the target condition; object
/// scenes average over the bin cameras against each bin's condition.
double scene_mse(const Benchmark& bench, const SplatScene& scene);

ObjectiveContext benchmark_context(const Benchmark& bench);

/// Simple closed-form mixtures used by tests and the CLI.
GaussianMixture unit_gaussian_mixture(int dim);
GaussianMixture toy_mixture_2d();

/// per_condition draws from every condition (or from the whole mixture when it has none).
Dataset sample_dataset(const GaussianMixture& mixture, int per_condition, unsigned long long seed);

}  // namespace sdlab
