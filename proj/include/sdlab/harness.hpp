#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "sdlab/benchmark.hpp"
#include "sdlab/objectives.hpp"
#include "sdlab/splat.hpp"

namespace sdlab {

struct StepStage {
  int iterations = 0;
  int pcds_steps = 1;
};

struct LearningRates {
  double position = 0.004;
  double scale = 0.01;
  double rotation = 0.01;
  double color = 0.01;
  double opacity = 0.03;
};

struct InitSpec {
  std::string primitive = "grid";  // grid, disk, sphere_shell, annulus
  int count = 64;
  double radius = 0.0;  // 0 picks 0.4 (image scenes) or 1.0 (3D scenes)
  double scale = 0.0;   // initial isotropic std-dev; 0 picks a spacing-based default
  double opacity = 0.7;
};

/// Run configuration. Defaults are the published coarse-to-fine settings.
struct RunConfig {
  std::string benchmark = "image";
  int coarse_iterations = 500;
  int fine_iterations = 2500;
  int stepsize = 200;
  std::pair<int, int> coarse_t{600, 700};
  std::pair<int, int> fine_t{300, 500};
  std::vector<StepStage> pcds_schedule{{1000, 1}, {800, 2}, {700, 3}};
  int batch = 4;
  LearningRates lr;
  unsigned long long seed = 0;
  /// pcds (escalating steps), pcds_fixed1, sds, ism or true.
  std::string objective = "pcds";
  double w_g = 7.5;
  double w_c = 0.5;
  std::optional<bool> pose_dependent;  // unset: the benchmark's default
  std::string weight = "one";
  std::string renoise = "guided";
  int denoise_steps = 50;
  long long nfe_budget = 0;  // > 0: keep iterating (final stage settings) until reached
  int threads = 1;
  int eval_every = 1;
  InitSpec init;
  BenchmarkSpec bench;

  int total_iterations() const { return coarse_iterations + fine_iterations; }
  void validate() const;
};

RunConfig paper_preset();
nlohmann::json run_config_to_json(const RunConfig& config);
/// Fields missing from `j` keep their value in `base`.
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});

/// What one iteration does according to the coarse-to-fine schedule.
struct IterationPlan {
  bool coarse = true;
  int t_min = 0;
  int t_max = 0;
  ObjectiveSettings settings;
};

IterationPlan plan_iteration(const RunConfig& config, int iteration);

SplatScene init_scene(const InitSpec& spec, int dim, unsigned long long seed);

struct IterationRecord {
  int iteration = 0;
  bool coarse = true;
  int pcds_steps = 1;
  InversionMode inversion = InversionMode::Ddim;
  std::vector<int> timesteps;
  double loss = 0.0;
  long long nfe = 0;        // evaluations in this iteration
  long long nfe_total = 0;  // cumulative
  double mse = -1.0;        // fit to the target, when evaluated
};

struct RunArtifacts {
  std::string out_dir;
  std::vector<std::string> files;  // relative to out_dir
  SplatScene final_scene;
  std::vector<IterationRecord> log;
  double initial_mse = 0.0;
  double final_mse = 0.0;
  long long total_nfe = 0;
  long long counter_nfe = 0;   // read from the model's evaluation counter
  long long analytic_nfe = 0;  // sum of the per-iteration formula
  int iterations = 0;
  nlohmann::json manifest;
};

/// Coarse-to-fine optimization. With an empty out_dir nothing is written to disk.
RunArtifacts run_coarse_to_fine(const RunConfig& config, const std::string& out_dir = "");

struct CompareEntry {
  std::string objective;
  std::optional<unsigned long long> seed;
};

struct CompareResult {
  std::vector<RunArtifacts> runs;
  long long budget = 0;
  bool matched = true;  // all runs share one seed
  nlohmann::json manifest;
};

/// The first entry is the reference run; the others stop once they reach its NFE total.
CompareResult compare_objectives(const RunConfig& config, const std::vector<CompareEntry>& entries,
                                 const std::string& out_dir = "");

/// n_frames renders on an azimuth orbit around `base`; writes PNGs when out_dir is set.
std::vector<Vec> render_turntable(const SplatScene& scene, int n_frames, const CameraPose& base,
                                  const std::string& out_dir = "", std::vector<std::string>* files = nullptr);

void write_manifest(const std::string& out_dir, const nlohmann::json& manifest);

}  // namespace sdlab
