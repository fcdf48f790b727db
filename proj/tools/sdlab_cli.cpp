// Command-line front end: denoiser training, consistency distillation, fitting, objective
// comparison, gradient-bias reports and turntable renders. Every command writes under
// --out-dir and finishes with a manifest.json listing its artifacts.

#include <filesystem>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

#include "CLI11.hpp"

#include "sdlab/benchmark.hpp"
#include "sdlab/bias.hpp"
#include "sdlab/consistency.hpp"
#include "sdlab/harness.hpp"
#include "sdlab/parallel.hpp"
#include "sdlab/scene_io.hpp"
#include "sdlab/toy_denoiser.hpp"

namespace fs = std::filesystem;
using namespace sdlab;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct Common {
  unsigned long long seed = 0;
  bool seed_set = false;
  std::string out_dir = "out";
  std::string preset;
  std::string config;
  int threads = 0;
};

std::string path_in(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, sep);) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

/// Preset, then config file, then command-line overrides.
RunConfig load_run_config(const Common& common) {
  RunConfig c;
  if (!common.preset.empty() && common.preset != "paper") throw ConfigError("unknown preset '" + common.preset + "'");
  if (common.preset == "paper") c = paper_preset();
  if (!common.config.empty()) c = run_config_from_json(read_json(common.config), c);
  if (common.seed_set) c.seed = common.seed;
  if (common.threads > 0) c.threads = common.threads;
  return c;
}

/// Built-in mixture name or a mixture JSON file.
GaussianMixture load_mixture(const std::string& spec, const BenchmarkSpec& bench) {
  if (spec == "toy2d") return toy_mixture_2d();
  if (spec == "image") return image_mixture(bench);
  if (spec.rfind("gaussian", 0) == 0) {
    const int dim = spec.size() > 8 ? std::stoi(spec.substr(9)) : 2;
    return unit_gaussian_mixture(dim);
  }
  return mixture_from_json(read_json(spec));
}

nlohmann::json report_json(const SelfConsistencyReport& r) {
  return {{"mean_ratio", r.mean_ratio}, {"max_ratio", r.max_ratio}, {"mean_residual", r.mean_residual},
          {"pairs", r.pairs}};
}

void finish(const std::string& out_dir, nlohmann::json manifest, const std::vector<std::string>& files) {
  manifest["artifacts"] = files;
  write_manifest(out_dir, manifest);
  std::cout << "wrote " << path_in(out_dir, "manifest.json") << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Score-distillation lab: toy diffusion oracles, splat fitting and gradient diagnostics"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--seed", common.seed, "Random seed")->each([&](const std::string&) { common.seed_set = true; });
  app.add_option("--out-dir", common.out_dir, "Output directory")->capture_default_str();
  app.add_option("--preset", common.preset, "Named preset (paper)");
  app.add_option("--config", common.config, "Run configuration JSON file");
  app.add_option("--threads", common.threads, "Worker threads (default from config, 1)");

  // train-denoiser
  auto* train = app.add_subcommand("train-denoiser", "Train the toy epsilon-predictor on a Gaussian mixture");
  std::string train_mixture = "toy2d";
  int train_samples = 2048;
  DenoiserConfig dcfg;
  train->add_option("--mixture", train_mixture, "toy2d, gaussian:<dim>, image or a mixture JSON file")
      ->capture_default_str();
  train->add_option("--samples", train_samples, "Training samples per condition")->capture_default_str();
  train->add_option("--iterations", dcfg.iterations)->capture_default_str();
  train->add_option("--width", dcfg.width)->capture_default_str();
  train->add_option("--depth", dcfg.depth)->capture_default_str();
  train->add_option("--lr", dcfg.learning_rate)->capture_default_str();

  // distill-consistency
  auto* distill = app.add_subcommand("distill-consistency", "Distill a consistency student from a teacher");
  std::string teacher_path;
  std::string distill_mixture = "toy2d";
  int distill_samples = 1024;
  DistillConfig ccfg;
  distill->add_option("--teacher", teacher_path, "Denoiser checkpoint; omitted: the analytic mixture score");
  distill->add_option("--mixture", distill_mixture, "Data distribution (as train-denoiser)")->capture_default_str();
  distill->add_option("--samples", distill_samples, "Data samples per condition")->capture_default_str();
  distill->add_option("--iterations", ccfg.iterations)->capture_default_str();
  distill->add_option("--solver-stepsize", ccfg.solver_stepsize)->capture_default_str();
  distill->add_option("--t-max", ccfg.t_max)->capture_default_str();
  distill->add_option("--ema", ccfg.ema)->capture_default_str();
  distill->add_option("--width", ccfg.width)->capture_default_str();
  distill->add_option("--depth", ccfg.depth)->capture_default_str();
  distill->add_option("--lr", ccfg.learning_rate)->capture_default_str();

  // fit
  auto* fit = app.add_subcommand("fit", "Coarse-to-fine splat optimization");
  std::string fit_objective, fit_benchmark;
  long long fit_budget = -1;
  fit->add_option("--objective", fit_objective, "pcds, pcds_fixed1, sds, ism or true");
  fit->add_option("--benchmark", fit_benchmark, "image or object");
  fit->add_option("--nfe-budget", fit_budget, "Stop at this many evaluations");
  int fit_frames = 0;
  fit->add_option("--turntable", fit_frames, "Render this many orbit frames of the final scene");

  // compare
  auto* compare = app.add_subcommand("compare", "Run several objectives at a matched evaluation budget");
  std::string compare_list = "pcds,sds";
  std::string compare_seeds;
  std::string compare_benchmark;
  compare->add_option("--objectives", compare_list, "Comma separated; the first sets the budget")
      ->capture_default_str();
  compare->add_option("--seeds", compare_seeds, "Comma separated per-objective seeds");
  compare->add_option("--benchmark", compare_benchmark, "image or object");

  // bias
  auto* bias = app.add_subcommand("bias", "Gradient bias of each objective against the TRUE oracle");
  std::string bias_scene, bias_benchmark = "image", bias_timesteps = "300,500,700";
  std::string bias_objectives = "sds,pcds1_ddpm,pcds1,pcds2,pcds3,ism";
  std::string bias_poses;
  BiasConfig bcfg;
  bcfg.samples = 100;
  bool pixel_space = false;
  bias->add_option("--scene", bias_scene, "Scene checkpoint; omitted: the initial grid scene");
  bias->add_option("--benchmark", bias_benchmark)->capture_default_str();
  bias->add_option("--timesteps", bias_timesteps)->capture_default_str();
  bias->add_option("--objectives", bias_objectives)->capture_default_str();
  bias->add_option("--poses", bias_poses, "Comma separated azimuth:elevation pairs in degrees");
  bias->add_option("--samples", bcfg.samples)->capture_default_str();
  bias->add_option("--position-jitter", bcfg.position_jitter)->capture_default_str();
  bias->add_option("--color-jitter", bcfg.color_jitter)->capture_default_str();
  bias->add_flag("--pixel-space", pixel_space, "Compare pixel gradients instead of parameter gradients");

  // render
  auto* rend = app.add_subcommand("render", "Turntable renders of a scene checkpoint");
  std::string render_scene;
  int render_frames = 36;
  double render_elevation = 15.0, render_radius = 4.0;
  int render_size = 64;
  rend->add_option("--scene", render_scene, "Scene checkpoint (.json or .splt)")->required();
  rend->add_option("--frames", render_frames)->capture_default_str();
  rend->add_option("--elevation", render_elevation, "Degrees")->capture_default_str();
  rend->add_option("--radius", render_radius)->capture_default_str();
  rend->add_option("--size", render_size, "Square image side")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorCategory::Config);
  }

  try {
    const std::string& out = common.out_dir;
    fs::create_directories(out);
    if (common.threads > 0) set_num_threads(common.threads);
    nlohmann::json manifest = {{"seed", common.seed}, {"out_dir", out}};

    if (*train) {
      manifest["command"] = "train-denoiser";
      dcfg.seed = common.seed;
      const GaussianMixture mixture = load_mixture(train_mixture, {});
      const Dataset data = sample_dataset(mixture, train_samples, common.seed);
      const DenoiserModel model = train_toy_denoiser(data, default_schedule(), dcfg, mixture.num_conditions());
      write_json(path_in(out, "denoiser.json"), denoiser_to_json(model));
      write_json(path_in(out, "mixture.json"), mixture_to_json(mixture));
      manifest["iterations"] = dcfg.iterations;
      finish(out, manifest, {"denoiser.json", "mixture.json"});
    } else if (*distill) {
      manifest["command"] = "distill-consistency";
      ccfg.seed = common.seed;
      const GaussianMixture mixture = load_mixture(distill_mixture, {});
      const Dataset data = sample_dataset(mixture, distill_samples, common.seed);
      const NoiseSchedule sched = default_schedule();
      std::unique_ptr<ScoreModel> teacher;
      if (teacher_path.empty()) {
        teacher = std::make_unique<MixtureModel>(mixture, sched);
      } else {
        teacher = std::make_unique<DenoiserModel>(denoiser_from_json(read_json(teacher_path)));
      }
      const DistillResult r = consistency_distill(*teacher, sched, data, ccfg);
      write_json(path_in(out, "student.json"), denoiser_to_json(*r.student));
      const nlohmann::json report = {{"initial", report_json(r.initial)}, {"final", report_json(r.final)},
                                     {"loss_first", r.loss.empty() ? 0.0 : r.loss.front()},
                                     {"loss_last", r.loss.empty() ? 0.0 : r.loss.back()}};
      write_json(path_in(out, "self_consistency.json"), report);
      manifest["self_consistency"] = report;
      std::cout << "self-consistency ratio " << r.initial.mean_ratio << " -> " << r.final.mean_ratio << "\n";
      finish(out, manifest, {"student.json", "self_consistency.json"});
    } else if (*fit) {
      RunConfig c = load_run_config(common);
      if (!fit_objective.empty()) c.objective = fit_objective;
      if (!fit_benchmark.empty()) c.benchmark = fit_benchmark;
      if (fit_budget >= 0) c.nfe_budget = fit_budget;
      RunArtifacts art = run_coarse_to_fine(c, out);
      if (fit_frames > 0) {
        const Benchmark bench = make_benchmark(c.benchmark, c.bench);
        std::vector<std::string> frames;
        render_turntable(art.final_scene, fit_frames, bench.bin_cameras.front(), path_in(out, "turntable"), &frames);
        for (const auto& f : frames) art.files.push_back("turntable/" + f);
        art.manifest["artifacts"] = art.files;
        write_manifest(out, art.manifest);
      }
      std::cout << "mse " << art.initial_mse << " -> " << art.final_mse << " after " << art.iterations
                << " iterations, " << art.total_nfe << " evaluations\n";
    } else if (*compare) {
      RunConfig c = load_run_config(common);
      if (!compare_benchmark.empty()) c.benchmark = compare_benchmark;
      const auto names = split(compare_list, ',');
      const auto seeds = split(compare_seeds, ',');
      if (!seeds.empty() && seeds.size() != names.size()) throw ConfigError("--seeds needs one seed per objective");
      std::vector<CompareEntry> entries;
      for (std::size_t k = 0; k < names.size(); ++k) {
        CompareEntry e{names[k], std::nullopt};
        if (!seeds.empty()) e.seed = std::stoull(seeds[k]);
        entries.push_back(e);
      }
      const CompareResult r = compare_objectives(c, entries, out);
      for (std::size_t k = 0; k < r.runs.size(); ++k) {
        std::cout << names[k] << ": mse " << r.runs[k].final_mse << " (" << r.runs[k].iterations << " iterations, "
                  << r.runs[k].total_nfe << " evaluations)\n";
      }
      if (!r.matched) std::cout << "warning: seeds differ, comparison is unmatched\n";
    } else if (*bias) {
      manifest["command"] = "bias";
      RunConfig rc = load_run_config(common);
      const Benchmark bench = make_benchmark(bias_benchmark, rc.bench);
      const ObjectiveContext ctx = benchmark_context(bench);
      SplatScene scene = bias_scene.empty() ? init_scene(rc.init, bench.scene_dim, common.seed) : load_scene(bias_scene);
      if (bias_scene.empty()) scene.background = bench.background;
      for (const auto& t : split(bias_timesteps, ',')) bcfg.timesteps.push_back(std::stoi(t));
      for (const auto& o : split(bias_objectives, ',')) bcfg.objectives.push_back(objective_from_label(o));
      if (bias_poses.empty()) {
        bcfg.poses = bench.scene_dim == 2 ? std::vector<CameraPose>{bench.camera} : bench.bin_cameras;
      } else {
        for (const auto& p : split(bias_poses, ',')) {
          const auto ae = split(p, ':');
          if (ae.size() != 2) throw ConfigError("poses are azimuth:elevation in degrees");
          CameraPose cam = bench.camera;
          cam.azimuth = std::stod(ae[0]) * kDeg;
          cam.elevation = std::stod(ae[1]) * kDeg;
          bcfg.poses.push_back(cam);
        }
      }
      bcfg.seed = common.seed;
      bcfg.parameter_space = !pixel_space;
      const BiasReport report = measure_bias(ctx, scene, bcfg);
      write_bias_csv(path_in(out, "bias.csv"), report);
      write_json(path_in(out, "bias.json"), bias_to_json(report));
      for (const auto& row : report.rows) {
        std::cout << row.objective << " t=" << row.t << " " << row.pose_bin << ": cosine " << row.cosine
                  << ", nfe " << row.nfe << "\n";
      }
      finish(out, manifest, {"bias.csv", "bias.json"});
    } else if (*rend) {
      manifest["command"] = "render";
      const SplatScene scene = load_scene(render_scene);
      const CameraPose base = scene.dim == 2
                                  ? planar_camera(render_size, render_size)
                                  : orbit_camera(0.0, render_elevation * kDeg, render_radius, render_size, render_size);
      std::vector<std::string> files;
      render_turntable(scene, render_frames, base, out, &files);
      write_json(path_in(out, "camera_path.json"), camera_path_to_json(camera_orbit(base, render_frames)));
      files.push_back("camera_path.json");
      manifest["frames"] = render_frames;
      finish(out, manifest, files);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.category());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorCategory::Io);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: bad number in arguments: " << e.what() << "\n";
    return static_cast<int>(ErrorCategory::Config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
