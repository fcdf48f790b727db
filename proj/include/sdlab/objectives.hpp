#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "sdlab/camera.hpp"
#include "sdlab/consistency.hpp"
#include "sdlab/guidance.hpp"
#include "sdlab/schedule.hpp"
#include "sdlab/splat.hpp"

namespace sdlab {

enum class Objective { True, Sds, Ism, Pcds };
enum class InversionMode { Ddpm, Ddim };
/// Which epsilon re-noises the consistency estimate between PCDS steps: the raw conditional
/// prediction at the previous point, or the guided composition used for that step.
enum class RenoiseMode { Conditional, Guided };

std::string to_string(Objective o);
Objective objective_from_string(const std::string& name);
std::string to_string(InversionMode m);
InversionMode inversion_from_string(const std::string& name);
std::string to_string(RenoiseMode m);
RenoiseMode renoise_from_string(const std::string& name);

/// Fixed guidance, or a pose-dependent positive/negative set chosen from the camera's view bin.
struct GuidancePolicy {
  GuidanceConfig fixed;
  bool pose_dependent = false;
  std::array<int, 4> bin_conditions{0, 1, 2, 3};
  double w_c = 0.5;

  GuidanceConfig resolve(const CameraPose& pose) const;
};

/// Everything an objective needs besides the scene, pose, timestep and noise.
struct ObjectiveContext {
  const NoiseSchedule* schedule = nullptr;
  const ScoreModel* model = nullptr;  // score model for TRUE, SDS and ISM
  ConsistencyFunction consistency;    // PCDS backbone (often the same model)
  GuidancePolicy guidance;
  TimestepWeight weight;
  int stepsize = 200;        // DDIM inversion stepsize
  int denoise_steps = 50;    // TRUE oracle sampling steps
  RenoiseMode renoise = RenoiseMode::Guided;

  void validate() const;
};

struct ObjectiveSettings {
  Objective objective = Objective::Pcds;
  int pcds_steps = 1;
  InversionMode inversion = InversionMode::Ddim;
};

/// Image-space result of one objective: pixel_grad is the gradient pushed into the renderer,
/// always equal to w(t)/gamma(t) * (x0 - pseudo_gt).
struct PixelEstimate {
  Vec x_t;
  Vec pseudo_gt;
  Vec pixel_grad;
  long long nfe = 0;
  bool degenerate = false;
};

/// Scale w(t)/gamma(t) applied to x0 - pseudo_gt; zero at t = 0.
double residual_weight(const ObjectiveContext& ctx, int t);

/// Pairs (t_f, t_n) visited by an n-step consistency sampler starting at t.
std::vector<std::pair<int, int>> pcds_ladder(int t, int n_steps);
/// Uniform decreasing timesteps t .. 0 used by the oracle sampler.
std::vector<int> denoise_timesteps(int t, int n_steps);

PixelEstimate true_pixels(const ObjectiveContext& ctx, const GuidanceConfig& g, const Vec& x0, int t);
PixelEstimate sds_pixels(const ObjectiveContext& ctx, const GuidanceConfig& g, const Vec& x0, int t,
                         const Vec& noise);
PixelEstimate ism_pixels(const ObjectiveContext& ctx, const GuidanceConfig& g, const Vec& x0, int t);
PixelEstimate pcds_pixels(const ObjectiveContext& ctx, const GuidanceConfig& g, const Vec& x0, int t,
                          int n_steps, InversionMode inversion, const Vec& noise);
/// Dispatches on settings; `noise` is used by SDS and DDPM-inverted PCDS only.
PixelEstimate estimate_pixels(const ObjectiveContext& ctx, const ObjectiveSettings& settings,
                              const GuidanceConfig& g, const Vec& x0, int t, const Vec& noise);

/// Analytic evaluation count of one estimate, for bookkeeping checks.
long long objective_nfe(const ObjectiveSettings& settings, int t, int stepsize, int n_negatives,
                        int denoise_steps = 50);

struct GradientEstimate {
  Objective objective = Objective::Pcds;
  int t = 0;
  CameraPose pose;
  Vec grads;      // scene parameter layout
  Vec rendered;   // x0 = g(theta, c)
  Vec pseudo_gt;
  Vec pixel_grad;
  long long nfe = 0;
  bool degenerate = false;
  double loss = 0.0;  // mean squared (x0 - pseudo_gt)
};

GradientEstimate gradient_estimate(const ObjectiveContext& ctx, const ObjectiveSettings& settings,
                                   const SplatScene& scene, const CameraPose& pose, int t, const Vec& noise);

GradientEstimate true_gradient(const ObjectiveContext& ctx, const SplatScene& scene, const CameraPose& pose, int t);
GradientEstimate sds_gradient(const ObjectiveContext& ctx, const SplatScene& scene, const CameraPose& pose, int t,
                              const Vec& noise);
GradientEstimate ism_gradient(const ObjectiveContext& ctx, const SplatScene& scene, const CameraPose& pose, int t);
GradientEstimate pcds_gradient(const ObjectiveContext& ctx, const SplatScene& scene, const CameraPose& pose, int t,
                               int n_steps, InversionMode inversion, const Vec& noise);

}  // namespace sdlab
