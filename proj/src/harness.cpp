#include "sdlab/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "sdlab/bias.hpp"
#include "sdlab/parallel.hpp"
#include "sdlab/render.hpp"
#include "sdlab/scene_io.hpp"

namespace sdlab {

namespace fs = std::filesystem;

void RunConfig::validate() const {
  if (coarse_iterations < 0 || fine_iterations < 0) throw ConfigError("iteration counts must be >= 0");
  if (stepsize < 1) throw ConfigError("stepsize must be >= 1");
  if (batch < 1) throw ConfigError("batch must be >= 1");
  if (denoise_steps < 1) throw ConfigError("denoise_steps must be >= 1");
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  const int T = default_schedule().steps();
  for (const auto& [lo, hi] : {coarse_t, fine_t}) {
    if (lo < 0 || hi > T || lo > hi) throw ConfigError("timestep ranges must lie within [0, T]");
  }
  int sum = 0;
  for (const auto& s : pcds_schedule) {
    if (s.iterations < 0 || s.pcds_steps < 1) throw ConfigError("bad pcds schedule entry");
    sum += s.iterations;
  }
  if (sum != fine_iterations) {
    throw ConfigError("pcds schedule iterations (" + std::to_string(sum) + ") must equal fine iterations (" +
                      std::to_string(fine_iterations) + ")");
  }
  if (objective != "pcds" && objective != "pcds_fixed1") objective_from_string(objective);
  weight_kind_from_string(weight);
  renoise_from_string(renoise);
  if (init.count < 1) throw ConfigError("init count must be >= 1");
}

RunConfig paper_preset() { return RunConfig{}; }

nlohmann::json run_config_to_json(const RunConfig& c) {
  nlohmann::json sched = nlohmann::json::array();
  for (const auto& s : c.pcds_schedule) sched.push_back({s.iterations, s.pcds_steps});
  nlohmann::json guidance = {{"w_g", c.w_g}, {"w_c", c.w_c}};
  guidance["pose_dependent"] = c.pose_dependent ? nlohmann::json(*c.pose_dependent) : nlohmann::json(nullptr);
  return {
      {"schema", "sdlab.run/1"},
      {"benchmark", c.benchmark},
      {"coarse_iterations", c.coarse_iterations},
      {"fine_iterations", c.fine_iterations},
      {"stepsize", c.stepsize},
      {"coarse_t", {c.coarse_t.first, c.coarse_t.second}},
      {"fine_t", {c.fine_t.first, c.fine_t.second}},
      {"pcds_schedule", sched},
      {"batch", c.batch},
      {"learning_rates",
       {{"position", c.lr.position}, {"scale", c.lr.scale}, {"rotation", c.lr.rotation}, {"color", c.lr.color},
        {"opacity", c.lr.opacity}}},
      {"seed", c.seed},
      {"objective", c.objective},
      {"guidance", guidance},
      {"weight", c.weight},
      {"renoise", c.renoise},
      {"denoise_steps", c.denoise_steps},
      {"nfe_budget", c.nfe_budget},
      {"threads", c.threads},
      {"eval_every", c.eval_every},
      {"init",
       {{"primitive", c.init.primitive}, {"count", c.init.count}, {"radius", c.init.radius},
        {"scale", c.init.scale}, {"opacity", c.init.opacity}}},
      {"image",
       {{"height", c.bench.height}, {"width", c.bench.width}, {"mode_sigma", c.bench.mode_sigma},
        {"variants", c.bench.variants}, {"dominant_share", c.bench.dominant_share}}},
  };
}

namespace {

template <typename T>
void read_if(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

std::pair<int, int> read_range(const nlohmann::json& j) {
  const auto v = j.get<std::vector<int>>();
  if (v.size() != 2) throw ConfigError("timestep ranges need two entries");
  return {v[0], v[1]};
}

}  // namespace

RunConfig run_config_from_json(const nlohmann::json& j, RunConfig c) {
  try {
    if (!j.is_object()) throw ConfigError("run config must be a JSON object");
    static const std::vector<std::string> known = {
        "schema", "benchmark", "coarse_iterations", "fine_iterations", "stepsize", "coarse_t", "fine_t",
        "pcds_schedule", "batch", "learning_rates", "seed", "objective", "guidance", "weight", "renoise",
        "denoise_steps", "nfe_budget", "threads", "eval_every", "init", "image"};
    for (const auto& [key, _] : j.items()) {
      if (std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError("unknown config key '" + key + "'");
    }
    read_if(j, "benchmark", c.benchmark);
    read_if(j, "coarse_iterations", c.coarse_iterations);
    read_if(j, "fine_iterations", c.fine_iterations);
    read_if(j, "stepsize", c.stepsize);
    if (j.contains("coarse_t")) c.coarse_t = read_range(j.at("coarse_t"));
    if (j.contains("fine_t")) c.fine_t = read_range(j.at("fine_t"));
    if (j.contains("pcds_schedule")) {
      c.pcds_schedule.clear();
      for (const auto& e : j.at("pcds_schedule")) {
        const auto v = e.get<std::vector<int>>();
        if (v.size() != 2) throw ConfigError("pcds schedule entries are [iterations, steps]");
        c.pcds_schedule.push_back({v[0], v[1]});
      }
    }
    read_if(j, "batch", c.batch);
    if (j.contains("learning_rates")) {
      const auto& l = j.at("learning_rates");
      read_if(l, "position", c.lr.position);
      read_if(l, "scale", c.lr.scale);
      read_if(l, "rotation", c.lr.rotation);
      read_if(l, "color", c.lr.color);
      read_if(l, "opacity", c.lr.opacity);
    }
    read_if(j, "seed", c.seed);
    read_if(j, "objective", c.objective);
    if (j.contains("guidance")) {
      const auto& g = j.at("guidance");
      read_if(g, "w_g", c.w_g);
      read_if(g, "w_c", c.w_c);
      if (g.contains("pose_dependent") && !g.at("pose_dependent").is_null()) {
        c.pose_dependent = g.at("pose_dependent").get<bool>();
      }
    }
    read_if(j, "weight", c.weight);
    read_if(j, "renoise", c.renoise);
    read_if(j, "denoise_steps", c.denoise_steps);
    read_if(j, "nfe_budget", c.nfe_budget);
    read_if(j, "threads", c.threads);
    read_if(j, "eval_every", c.eval_every);
    if (j.contains("init")) {
      const auto& i = j.at("init");
      read_if(i, "primitive", c.init.primitive);
      read_if(i, "count", c.init.count);
      read_if(i, "radius", c.init.radius);
      read_if(i, "scale", c.init.scale);
      read_if(i, "opacity", c.init.opacity);
    }
    if (j.contains("image")) {
      const auto& b = j.at("image");
      read_if(b, "height", c.bench.height);
      read_if(b, "width", c.bench.width);
      read_if(b, "mode_sigma", c.bench.mode_sigma);
      read_if(b, "variants", c.bench.variants);
      read_if(b, "dominant_share", c.bench.dominant_share);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad run config: ") + e.what());
  }
  c.validate();
  return c;
}

IterationPlan plan_iteration(const RunConfig& config, int iteration) {
  IterationPlan p;
  p.coarse = iteration < config.coarse_iterations;
  const auto& range = p.coarse ? config.coarse_t : config.fine_t;
  p.t_min = range.first;
  p.t_max = range.second;
  const std::string& obj = config.objective;
  if (obj == "pcds" || obj == "pcds_fixed1") {
    p.settings.objective = Objective::Pcds;
    if (p.coarse) {
      p.settings.pcds_steps = 1;
      p.settings.inversion = InversionMode::Ddpm;
    } else {
      p.settings.inversion = InversionMode::Ddim;
      p.settings.pcds_steps = 1;
      if (obj == "pcds") {
        int k = iteration - config.coarse_iterations;
        p.settings.pcds_steps = config.pcds_schedule.empty() ? 1 : config.pcds_schedule.back().pcds_steps;
        for (const auto& s : config.pcds_schedule) {
          if (k < s.iterations) {
            p.settings.pcds_steps = s.pcds_steps;
            break;
          }
          k -= s.iterations;
        }
      }
    }
  } else {
    p.settings = objective_from_label(obj);
  }
  return p;
}

SplatScene init_scene(const InitSpec& spec, int dim, unsigned long long seed) {
  if (dim != 2 && dim != 3) throw ConfigError("scene dimension must be 2 or 3");
  if (spec.count < 1) throw ConfigError("init count must be >= 1");
  if (!(spec.opacity > 0.0 && spec.opacity < 1.0)) throw ConfigError("init opacity must lie in (0, 1)");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif;
  std::normal_distribution<double> normal;
  const int n = spec.count;
  const double radius = spec.radius > 0.0 ? spec.radius : (dim == 2 ? 0.4 : 1.0);
  const Vec centre = dim == 2 ? Vec::Constant(2, 0.5) : Vec::Zero(3);
  std::vector<Vec> positions;
  double spacing = 0.0;
  if (spec.primitive == "grid") {
    const int k = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
    const double extent = dim == 2 ? 1.0 : 2.0 * radius;
    spacing = extent / k;
    for (int i = 0; i < n; ++i) {
      const int r = i / k, c = i % k;
      Vec p = Vec::Zero(dim);
      p[0] = (c + 0.5) * spacing;
      p[1] = (r + 0.5) * spacing;
      if (dim == 3) p.head(2).array() -= radius;
      positions.push_back(p);
    }
  } else if (spec.primitive == "disk" || spec.primitive == "annulus") {
    const double inner = spec.primitive == "annulus" ? 0.6 * radius : 0.0;
    for (int i = 0; i < n; ++i) {
      const double a = 2.0 * std::numbers::pi * unif(rng);
      const double r = std::sqrt(inner * inner + (radius * radius - inner * inner) * unif(rng));
      Vec p = centre;
      p[0] += r * std::cos(a);
      if (dim == 2) {
        p[1] += r * std::sin(a);
      } else {
        p[2] += r * std::sin(a);
      }
      positions.push_back(p);
    }
    spacing = radius * std::sqrt(std::numbers::pi / n);
  } else if (spec.primitive == "sphere_shell") {
    if (dim != 3) throw ConfigError("sphere_shell needs a 3D scene");
    for (int i = 0; i < n; ++i) {
      Eigen::Vector3d d(normal(rng), normal(rng), normal(rng));
      positions.push_back(radius * d.normalized());
    }
    spacing = radius * std::sqrt(4.0 * std::numbers::pi / n);
  } else {
    throw ConfigError("unknown init primitive '" + spec.primitive + "'");
  }
  const double scale = spec.scale > 0.0 ? spec.scale : 0.5 * spacing;
  SplatScene scene;
  scene.dim = dim;
  for (int i = 0; i < n; ++i) {
    Splat s;
    s.position = positions[static_cast<std::size_t>(i)];
    s.log_scale = Vec::Constant(dim, std::log(scale));
    s.color = Eigen::Vector3d::Constant(0.5);
    s.opacity_logit = std::log(spec.opacity / (1.0 - spec.opacity));
    s.depth = static_cast<double>(i) / n;
    scene.splats.push_back(std::move(s));
  }
  return scene;
}

namespace {

/// Adam with one learning rate per scene parameter.
class SceneOptimizer {
 public:
  SceneOptimizer(const SplatScene& scene, const LearningRates& lr) {
    const int p = scene.params_per_splat();
    const int d = scene.dim;
    Vec block(p);
    block.head(d).setConstant(lr.position);
    block.segment(d, d).setConstant(lr.scale);
    if (d == 2) {
      block[4] = lr.rotation;
    } else {
      block.segment(6, 4).setConstant(lr.rotation);
    }
    block.segment(scene.color_offset(), 3).setConstant(lr.color);
    block[scene.opacity_offset()] = lr.opacity;
    lr_ = block.replicate(scene.size(), 1);
    m_ = Vec::Zero(lr_.size());
    v_ = Vec::Zero(lr_.size());
  }

  void step(Vec& theta, const Vec& grad) {
    ++t_;
    m_ = kBeta1 * m_ + (1.0 - kBeta1) * grad;
    v_ = kBeta2 * v_ + (1.0 - kBeta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    theta.array() -= lr_.array() * (m_.array() / c1) / ((v_.array() / c2).sqrt() + 1e-15);
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  Vec lr_, m_, v_;
  long long t_ = 0;
};

void clamp_scene(SplatScene& scene) {
  for (auto& s : scene.splats) {
    s.color = s.color.cwiseMax(0.0).cwiseMin(1.0);
    s.log_scale = s.log_scale.cwiseMax(std::log(1e-3)).cwiseMin(std::log(scene.dim == 2 ? 0.5 : 2.0));
    s.opacity_logit = std::clamp(s.opacity_logit, -12.0, 12.0);
  }
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

CameraPose sample_pose(const Benchmark& bench, std::mt19937_64& rng) {
  if (bench.scene_dim == 2) return bench.camera;
  std::uniform_real_distribution<double> az(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> el(-30.0 * std::numbers::pi / 180.0, 30.0 * std::numbers::pi / 180.0);
  CameraPose c = bench.camera;
  c.azimuth = az(rng);
  c.elevation = el(rng);
  return c;
}

/// Iterations after which a checkpoint is written, with a name.
std::vector<std::pair<int, std::string>> milestones(const RunConfig& config) {
  std::vector<std::pair<int, std::string>> out;
  if (config.coarse_iterations > 0) out.emplace_back(config.coarse_iterations - 1, "coarse");
  if (config.objective == "pcds") {
    int end = config.coarse_iterations;
    for (std::size_t k = 0; k + 1 < config.pcds_schedule.size(); ++k) {
      end += config.pcds_schedule[k].iterations;
      if (config.pcds_schedule[k].iterations > 0) {
        out.emplace_back(end - 1, "np" + std::to_string(config.pcds_schedule[k].pcds_steps));
      }
    }
  }
  return out;
}

void write_metrics(const std::string& path, const std::vector<IterationRecord>& log) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out.precision(17);
  out << "iteration,stage,pcds_steps,inversion,loss,nfe,nfe_total,mse\n";
  for (const auto& r : log) {
    out << r.iteration << ',' << (r.coarse ? "coarse" : "fine") << ',' << r.pcds_steps << ','
        << to_string(r.inversion) << ',' << r.loss << ',' << r.nfe << ',' << r.nfe_total << ',';
    if (r.mse >= 0.0) out << r.mse;
    out << '\n';
  }
}

void write_schedule_log(const std::string& path, const std::vector<IterationRecord>& log) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "iteration,item,stage,t,pcds_steps,inversion\n";
  for (const auto& r : log) {
    for (std::size_t b = 0; b < r.timesteps.size(); ++b) {
      out << r.iteration << ',' << b << ',' << (r.coarse ? "coarse" : "fine") << ',' << r.timesteps[b] << ','
          << r.pcds_steps << ',' << to_string(r.inversion) << '\n';
    }
  }
}

Benchmark configured_benchmark(const RunConfig& config) {
  BenchmarkSpec spec = config.bench;
  spec.w_g = config.w_g;
  Benchmark bench = make_benchmark(config.benchmark, spec);
  if (config.pose_dependent) bench.guidance.pose_dependent = *config.pose_dependent;
  bench.guidance.w_c = config.w_c;
  return bench;
}

}  // namespace

RunArtifacts run_coarse_to_fine(const RunConfig& config, const std::string& out_dir) {
  config.validate();
  set_num_threads(config.threads);
  const Benchmark bench = configured_benchmark(config);
  ObjectiveContext ctx = benchmark_context(bench);
  ctx.stepsize = config.stepsize;
  ctx.denoise_steps = config.denoise_steps;
  ctx.weight.kind = weight_kind_from_string(config.weight);
  ctx.renoise = renoise_from_string(config.renoise);
  const int n_neg = bench.guidance.pose_dependent ? 3 : bench.guidance.fixed.num_negatives();

  RunArtifacts art;
  art.out_dir = out_dir;
  const bool write = !out_dir.empty();
  if (write) ensure_dir(out_dir);

  SplatScene scene = init_scene(config.init, bench.scene_dim, config.seed);
  scene.background = bench.background;
  SceneOptimizer optimizer(scene, config.lr);
  Vec theta = scene.parameters();
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal;
  const int D = bench.model->dim();
  const long long counter_start = bench.model->nfe();
  art.initial_mse = scene_mse(bench, scene);
  const auto stones = milestones(config);

  auto save_checkpoint = [&](const std::string& name) {
    if (!write) return;
    const std::string file = "checkpoint_" + name + ".json";
    save_scene(join(out_dir, file), scene);
    art.files.push_back(file);
  };

  for (int it = 0;; ++it) {
    if (config.nfe_budget > 0 ? art.total_nfe >= config.nfe_budget : it >= config.total_iterations()) break;
    const IterationPlan plan = plan_iteration(config, it);
    std::uniform_int_distribution<int> pick_t(plan.t_min, plan.t_max);
    std::vector<int> ts(static_cast<std::size_t>(config.batch));
    std::vector<CameraPose> poses(static_cast<std::size_t>(config.batch));
    std::vector<Vec> noises(static_cast<std::size_t>(config.batch));
    for (int b = 0; b < config.batch; ++b) {
      ts[static_cast<std::size_t>(b)] = pick_t(rng);
      poses[static_cast<std::size_t>(b)] = sample_pose(bench, rng);
      Vec nz(D);
      for (auto& e : nz) e = normal(rng);
      noises[static_cast<std::size_t>(b)] = std::move(nz);
    }
    std::vector<GradientEstimate> items(static_cast<std::size_t>(config.batch));
    try {
      parallel_blocks(config.batch, [&](int b) {
        const auto k = static_cast<std::size_t>(b);
        items[k] = gradient_estimate(ctx, plan.settings, scene, poses[k], ts[k], noises[k]);
      });
    } catch (const NumericError& e) {
      if (write) {
        write_json(join(out_dir, "diagnostic.json"),
                   {{"iteration", it}, {"error", e.what()}, {"timesteps", ts}, {"scene", scene_to_json(scene)}});
      }
      throw NumericError(std::string(e.what()) + " at iteration " + std::to_string(it));
    }
    IterationRecord rec;
    rec.iteration = it;
    rec.coarse = plan.coarse;
    rec.pcds_steps = plan.settings.pcds_steps;
    rec.inversion = plan.settings.inversion;
    rec.timesteps = ts;
    Vec grad = Vec::Zero(theta.size());
    for (const auto& g : items) {
      grad += g.grads;
      rec.loss += g.loss;
      rec.nfe += g.nfe;
      art.analytic_nfe += objective_nfe(plan.settings, g.t, config.stepsize, n_neg, config.denoise_steps);
    }
    grad /= config.batch;
    rec.loss /= config.batch;
    if (!std::isfinite(rec.loss) || !grad.allFinite()) {
      if (write) {
        write_json(join(out_dir, "diagnostic.json"),
                   {{"iteration", it}, {"error", "non-finite loss"}, {"timesteps", ts}, {"scene", scene_to_json(scene)}});
      }
      throw NumericError("non-finite loss at iteration " + std::to_string(it));
    }
    optimizer.step(theta, grad);
    scene.set_parameters(theta);
    clamp_scene(scene);
    theta = scene.parameters();
    art.total_nfe += rec.nfe;
    rec.nfe_total = art.total_nfe;
    if ((it + 1) % config.eval_every == 0) rec.mse = scene_mse(bench, scene);
    art.log.push_back(std::move(rec));
    for (const auto& [at, name] : stones) {
      if (at == it) save_checkpoint(name);
    }
  }
  art.iterations = static_cast<int>(art.log.size());
  art.counter_nfe = bench.model->nfe() - counter_start;
  art.final_scene = scene;
  art.final_mse = scene_mse(bench, scene);
  if (!art.log.empty()) art.log.back().mse = art.final_mse;

  art.manifest = {{"command", "fit"},
                  {"seed", config.seed},
                  {"objective", config.objective},
                  {"config", run_config_to_json(config)},
                  {"iterations", art.iterations},
                  {"nfe", {{"total", art.total_nfe}, {"counter", art.counter_nfe}, {"analytic", art.analytic_nfe}}},
                  {"initial_mse", art.initial_mse},
                  {"final_mse", art.final_mse}};
  if (write) {
    save_checkpoint("final");
    save_scene(join(out_dir, "checkpoint_final.splt"), scene);
    art.files.push_back("checkpoint_final.splt");
    write_metrics(join(out_dir, "metrics.csv"), art.log);
    art.files.push_back("metrics.csv");
    write_schedule_log(join(out_dir, "schedule.csv"), art.log);
    art.files.push_back("schedule.csv");
    for (std::size_t k = 0; k < bench.bin_cameras.size(); ++k) {
      const std::string name = bench.scene_dim == 2 ? "final.png" : "final_" + to_string(static_cast<ViewBin>(k)) + ".png";
      write_png(join(out_dir, name), render(scene, bench.bin_cameras[k]));
      art.files.push_back(name);
    }
    const auto& target = bench.model->mixture().components[static_cast<std::size_t>(
        bench.model->mixture().subset(ConditionId::of(bench.target_condition)).front())];
    write_png(join(out_dir, "target.png"), target.mean, config.bench.height, config.bench.width);
    art.files.push_back("target.png");
    art.manifest["artifacts"] = art.files;
    write_manifest(out_dir, art.manifest);
  }
  return art;
}

CompareResult compare_objectives(const RunConfig& config, const std::vector<CompareEntry>& entries,
                                 const std::string& out_dir) {
  if (entries.empty()) throw ConfigError("compare needs at least one objective");
  CompareResult result;
  const bool write = !out_dir.empty();
  if (write) ensure_dir(out_dir);
  nlohmann::json runs = nlohmann::json::array();
  std::vector<unsigned long long> seeds;
  for (std::size_t k = 0; k < entries.size(); ++k) {
    RunConfig c = config;
    c.objective = entries[k].objective;
    if (entries[k].seed) c.seed = *entries[k].seed;
    c.nfe_budget = k == 0 ? config.nfe_budget : result.budget;
    seeds.push_back(c.seed);
    const std::string sub = write ? join(out_dir, std::to_string(k) + "_" + c.objective) : "";
    RunArtifacts art = run_coarse_to_fine(c, sub);
    if (k == 0) result.budget = art.total_nfe;
    runs.push_back({{"objective", c.objective}, {"seed", c.seed}, {"iterations", art.iterations},
                    {"nfe", art.total_nfe}, {"initial_mse", art.initial_mse}, {"final_mse", art.final_mse},
                    {"dir", write ? fs::path(sub).filename().string() : ""}});
    result.runs.push_back(std::move(art));
  }
  result.matched = std::all_of(seeds.begin(), seeds.end(), [&](auto s) { return s == seeds.front(); });
  result.manifest = {{"command", "compare"}, {"nfe_budget", result.budget}, {"matched", result.matched},
                     {"seeds", seeds}, {"runs", runs}};
  if (write) {
    std::ofstream csv(join(out_dir, "comparison.csv"));
    if (!csv) throw IoError("cannot write comparison.csv");
    csv.precision(17);
    csv << "objective,seed,iterations,nfe,initial_mse,final_mse\n";
    for (std::size_t k = 0; k < result.runs.size(); ++k) {
      const auto& r = result.runs[k];
      csv << runs[k]["objective"].get<std::string>() << ',' << seeds[k] << ',' << r.iterations << ',' << r.total_nfe
          << ',' << r.initial_mse << ',' << r.final_mse << '\n';
    }
    const Benchmark bench = configured_benchmark(config);
    const int h = bench.camera.height, w = bench.camera.width;
    const int n = static_cast<int>(result.runs.size());
    Vec strip(static_cast<Eigen::Index>(h) * w * n * 3);
    for (int k = 0; k < n; ++k) {
      const Vec img = render(result.runs[static_cast<std::size_t>(k)].final_scene, bench.bin_cameras.front()).pixels;
      for (int r = 0; r < h; ++r) {
        strip.segment((static_cast<Eigen::Index>(r) * w * n + static_cast<Eigen::Index>(k) * w) * 3, w * 3) =
            img.segment(static_cast<Eigen::Index>(r) * w * 3, w * 3);
      }
    }
    write_png(join(out_dir, "side_by_side.png"), strip, h, w * n);
    nlohmann::json files = {"comparison.csv", "side_by_side.png"};
    for (const auto& r : runs) {
      for (const auto& f : result.runs[&r - &runs[0]].files) files.push_back(r["dir"].get<std::string>() + "/" + f);
    }
    result.manifest["artifacts"] = files;
    write_manifest(out_dir, result.manifest);
  }
  return result;
}

std::vector<Vec> render_turntable(const SplatScene& scene, int n_frames, const CameraPose& base,
                                  const std::string& out_dir, std::vector<std::string>* files) {
  const auto path = camera_orbit(base, n_frames, base.azimuth);
  std::vector<Vec> frames;
  if (!out_dir.empty()) ensure_dir(out_dir);
  for (std::size_t k = 0; k < path.size(); ++k) {
    RenderedView v = render(scene, path[k]);
    if (!out_dir.empty()) {
      char name[32];
      std::snprintf(name, sizeof(name), "frame_%03zu.png", k);
      write_png(join(out_dir, name), v);
      if (files) files->push_back(name);
    }
    frames.push_back(std::move(v.pixels));
  }
  return frames;
}

void write_manifest(const std::string& out_dir, const nlohmann::json& manifest) {
  ensure_dir(out_dir);
  nlohmann::json m = manifest;
  m["tool"] = "sdlab";
  write_json(join(out_dir, "manifest.json"), m);
}

}  // namespace sdlab
