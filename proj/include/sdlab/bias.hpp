#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "sdlab/camera.hpp"
#include "sdlab/objectives.hpp"
#include "sdlab/splat.hpp"

namespace sdlab {

/// Short name such as "sds", "ism", "pcds2" or "pcds1_ddpm".
std::string objective_label(const ObjectiveSettings& settings);
ObjectiveSettings objective_from_label(const std::string& label);

struct BiasConfig {
  std::vector<CameraPose> poses;
  std::vector<int> timesteps;
  std::vector<ObjectiveSettings> objectives;
  int samples = 100;
  unsigned long long seed = 0;
  double position_jitter = 0.0;  // per-sample perturbation of the scene, scene units
  double color_jitter = 0.0;
  bool parameter_space = true;   // compare renderer-parameter gradients (else pixel gradients)
};

struct BiasRow {
  std::string objective;
  int t = 0;
  std::string pose_bin;
  int pose_index = 0;
  double cosine = 0.0;
  double cosine_std = 0.0;
  double mag_ratio = 0.0;
  double mag_ratio_std = 0.0;
  double eta_residual = 0.0;  // mean ||g_true - g_estimate||
  double eta_relative = 0.0;  // mean ||g_true - g_estimate|| / ||g_true||, free of the w(t)/gamma(t) scale
  double nfe = 0.0;           // mean evaluations per estimate
  int samples = 0;
};

struct BiasReport {
  std::vector<BiasRow> rows;
  const BiasRow& find(const std::string& objective, int t, int pose_index = 0) const;
};

/// Runs every objective and the TRUE oracle on identical (scene, pose, t, noise) tuples.
BiasReport measure_bias(const ObjectiveContext& ctx, const SplatScene& scene, const BiasConfig& config);

void write_bias_csv(const std::string& path, const BiasReport& report);
nlohmann::json bias_to_json(const BiasReport& report);

double cosine_similarity(const Vec& a, const Vec& b);

}  // namespace sdlab
