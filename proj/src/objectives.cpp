#include "sdlab/objectives.hpp"

#include <algorithm>
#include <cmath>

#include "sdlab/render.hpp"

namespace sdlab {

std::string to_string(Objective o) {
  switch (o) {
    case Objective::True: return "true";
    case Objective::Sds: return "sds";
    case Objective::Ism: return "ism";
    case Objective::Pcds: return "pcds";
  }
  return "pcds";
}

Objective objective_from_string(const std::string& name) {
  if (name == "true" || name == "TRUE") return Objective::True;
  if (name == "sds" || name == "SDS") return Objective::Sds;
  if (name == "ism" || name == "ISM") return Objective::Ism;
  if (name == "pcds" || name == "PCDS") return Objective::Pcds;
  throw ConfigError("unknown objective '" + name + "'");
}

std::string to_string(InversionMode m) { return m == InversionMode::Ddpm ? "ddpm" : "ddim"; }

InversionMode inversion_from_string(const std::string& name) {
  if (name == "ddpm") return InversionMode::Ddpm;
  if (name == "ddim") return InversionMode::Ddim;
  throw ConfigError("unknown inversion mode '" + name + "'");
}

std::string to_string(RenoiseMode m) { return m == RenoiseMode::Guided ? "guided" : "conditional"; }

RenoiseMode renoise_from_string(const std::string& name) {
  if (name == "guided") return RenoiseMode::Guided;
  if (name == "conditional") return RenoiseMode::Conditional;
  throw ConfigError("unknown renoise mode '" + name + "'");
}

GuidanceConfig GuidancePolicy::resolve(const CameraPose& pose) const {
  if (!pose_dependent) return fixed;
  return guidance_for_binding(bind_pose(pose.azimuth, pose.elevation, w_c), bin_conditions, fixed.w_g);
}

void ObjectiveContext::validate() const {
  if (!schedule) throw ParameterError("objective context has no schedule");
  if (!model) throw ParameterError("objective context has no score model");
  if (stepsize < 1) throw ParameterError("inversion stepsize must be >= 1");
  if (denoise_steps < 1) throw ParameterError("oracle denoising steps must be >= 1");
}

double residual_weight(const ObjectiveContext& ctx, int t) {
  if (t == 0) return 0.0;
  return ctx.weight(*ctx.schedule, t) / gamma(*ctx.schedule, t);
}

std::vector<std::pair<int, int>> pcds_ladder(int t, int n_steps) {
  if (n_steps < 1) throw ParameterError("pcds needs at least one step");
  std::vector<std::pair<int, int>> out;
  const double dp = static_cast<double>(t) / n_steps;
  for (int k = n_steps - 1; k >= 1; --k) {
    out.emplace_back(static_cast<int>(std::floor(k * dp)), static_cast<int>(std::floor((k + 1) * dp)));
  }
  return out;
}

std::vector<int> denoise_timesteps(int t, int n_steps) {
  std::vector<int> ts;
  for (int i = n_steps; i >= 0; --i) {
    const int v = static_cast<int>(std::lround(static_cast<double>(t) * i / n_steps));
    if (ts.empty() || v < ts.back()) ts.push_back(v);
  }
  return ts;
}

namespace {

void finish(const ObjectiveContext& ctx, const Vec& x0, int t, PixelEstimate& e) {
  e.pixel_grad = residual_weight(ctx, t) * (x0 - e.pseudo_gt);
}

Vec invert_to(const ObjectiveContext& ctx, const Vec& x0, int t, long long& nfe) {
  if (t == 0) return x0;
  const auto traj = ddim_invert(*ctx.schedule, x0, t, ctx.stepsize, *ctx.model);
  nfe += static_cast<long long>(traj.timesteps.size()) - 1;
  return traj.final_state().x;
}

}  // namespace

PixelEstimate true_pixels(const ObjectiveContext& ctx, const GuidanceConfig& g, const Vec& x0, int t) {
  ctx.validate();
  ctx.schedule->check_timestep(t);
  PixelEstimate e;
  e.x_t = invert_to(ctx, x0, t, e.nfe);
  const std::vector<int> ts = denoise_timesteps(t, ctx.denoise_steps);
  LatentSample s{e.x_t, t};
  for (std::size_t i = 1; i < ts.size(); ++i) {
    const ComposedScore c = perp_neg_compose(*ctx.model, s.x, s.t, g);
    e.nfe += c.nfe;
    e.degenerate = e.degenerate || c.degenerate;
    s = ddim_step(*ctx.schedule, s, ts[i], c.eps);
  }
  e.pseudo_gt = s.x;
  finish(ctx, x0, t, e);
  return e;
}

PixelEstimate sds_pixels(const ObjectiveContext& ctx, const GuidanceConfig& g, const Vec& x0, int t,
                         const Vec& noise) {
  ctx.validate();
  PixelEstimate e;
  e.x_t = ddpm_forward(*ctx.schedule, x0, t, noise).x;
  if (t == 0) {
    e.pseudo_gt = x0;
  } else {
    const ComposedScore c = perp_neg_compose(*ctx.model, e.x_t, t, g);
    e.nfe += c.nfe;
    e.degenerate = c.degenerate;
    e.pseudo_gt = predict_x0(*ctx.schedule, e.x_t, t, c.eps);
  }
  finish(ctx, x0, t, e);
  return e;
}

PixelEstimate ism_pixels(const ObjectiveContext& ctx, const GuidanceConfig& g, const Vec& x0, int t) {
  ctx.validate();
  ctx.schedule->check_timestep(t);
  PixelEstimate e;
  if (t == 0) {
    e.x_t = x0;
    e.pseudo_gt = x0;
    finish(ctx, x0, t, e);
    return e;
  }
  const int s = std::max(0, t - ctx.stepsize);
  const Vec x_s = invert_to(ctx, x0, s, e.nfe);
  const Vec eps_s = ctx.model->eval(x_s, s, ConditionId::none());
  ++e.nfe;
  e.x_t = ddim_step(*ctx.schedule, {x_s, s}, t, eps_s).x;
  const ComposedScore c = perp_neg_compose(*ctx.model, e.x_t, t, g);
  e.nfe += c.nfe;
  e.degenerate = c.degenerate;
  // The interval score w(t) (eps_hat - eps_s) is carried as an equivalent image-space target.
  e.pseudo_gt = x0 - gamma(*ctx.schedule, t) * (c.eps - eps_s);
  e.pixel_grad = ctx.weight(*ctx.schedule, t) * (c.eps - eps_s);
  return e;
}

PixelEstimate pcds_pixels(const ObjectiveContext& ctx, const GuidanceConfig& g, const Vec& x0, int t,
                          int n_steps, InversionMode inversion, const Vec& noise) {
  ctx.validate();
  ctx.schedule->check_timestep(t);
  if (n_steps < 1) throw ParameterError("pcds needs at least one step");
  if (!ctx.consistency.backbone) throw ModelError("pcds needs a consistency function");
  PixelEstimate e;
  if (inversion == InversionMode::Ddpm) {
    e.x_t = ddpm_forward(*ctx.schedule, x0, t, noise).x;
  } else {
    e.x_t = invert_to(ctx, x0, t, e.nfe);
  }
  if (t == 0) {
    e.pseudo_gt = x0;
    finish(ctx, x0, t, e);
    return e;
  }
  ComposedScore c;
  Vec estimate = consistency_apply(ctx.consistency, *ctx.schedule, e.x_t, t, g.positive, &g, &c);
  e.nfe += c.nfe;
  e.degenerate = c.degenerate;
  for (const auto& [t_f, t_n] : pcds_ladder(t, n_steps)) {
    (void)t_n;
    const Vec& eps = ctx.renoise == RenoiseMode::Guided ? c.eps : c.eps_positive;
    const Vec x_f = ctx.schedule->sqrt_alpha_bar(t_f) * estimate + ctx.schedule->sqrt_one_minus_alpha_bar(t_f) * eps;
    if (t_f == 0) {
      estimate = x_f;
      break;
    }
    estimate = consistency_apply(ctx.consistency, *ctx.schedule, x_f, t_f, g.positive, &g, &c);
    e.nfe += c.nfe;
    e.degenerate = e.degenerate || c.degenerate;
  }
  e.pseudo_gt = estimate;
  finish(ctx, x0, t, e);
  return e;
}

PixelEstimate estimate_pixels(const ObjectiveContext& ctx, const ObjectiveSettings& settings,
                              const GuidanceConfig& g, const Vec& x0, int t, const Vec& noise) {
  switch (settings.objective) {
    case Objective::True: return true_pixels(ctx, g, x0, t);
    case Objective::Sds: return sds_pixels(ctx, g, x0, t, noise);
    case Objective::Ism: return ism_pixels(ctx, g, x0, t);
    case Objective::Pcds: return pcds_pixels(ctx, g, x0, t, settings.pcds_steps, settings.inversion, noise);
  }
  throw ParameterError("unknown objective");
}

long long objective_nfe(const ObjectiveSettings& settings, int t, int stepsize, int n_negatives, int denoise_steps) {
  if (t == 0) return 0;
  const long long per = n_negatives + 2;
  const auto inv = [&](int target) { return target == 0 ? 0LL : static_cast<long long>(inversion_grid(target, stepsize).size()) - 1; };
  switch (settings.objective) {
    case Objective::True: return inv(t) + per * (static_cast<long long>(denoise_timesteps(t, denoise_steps).size()) - 1);
    case Objective::Sds: return per;
    case Objective::Ism: return inv(std::max(0, t - stepsize)) + 1 + per;
    case Objective::Pcds: {
      long long n = settings.inversion == InversionMode::Ddim ? inv(t) : 0;
      n += per;
      for (const auto& [t_f, t_n] : pcds_ladder(t, settings.pcds_steps)) {
        (void)t_n;
        if (t_f == 0) break;
        n += per;
      }
      return n;
    }
  }
  return 0;
}

GradientEstimate gradient_estimate(const ObjectiveContext& ctx, const ObjectiveSettings& settings,
                                   const SplatScene& scene, const CameraPose& pose, int t, const Vec& noise) {
  GradientEstimate out;
  out.objective = settings.objective;
  out.t = t;
  out.pose = pose;
  out.rendered = render(scene, pose).pixels;
  const GuidanceConfig g = ctx.guidance.resolve(pose);
  PixelEstimate e = estimate_pixels(ctx, settings, g, out.rendered, t, noise);
  out.pseudo_gt = std::move(e.pseudo_gt);
  out.pixel_grad = std::move(e.pixel_grad);
  out.nfe = e.nfe;
  out.degenerate = e.degenerate;
  out.loss = (out.rendered - out.pseudo_gt).squaredNorm() / static_cast<double>(out.rendered.size());
  out.grads = render_backward(scene, pose, out.pixel_grad);
  if (!out.grads.allFinite()) throw NumericError("non-finite gradient from " + to_string(settings.objective));
  return out;
}

GradientEstimate true_gradient(const ObjectiveContext& ctx, const SplatScene& scene, const CameraPose& pose, int t) {
  return gradient_estimate(ctx, {Objective::True, 1, InversionMode::Ddim}, scene, pose, t, Vec());
}

GradientEstimate sds_gradient(const ObjectiveContext& ctx, const SplatScene& scene, const CameraPose& pose, int t,
                              const Vec& noise) {
  return gradient_estimate(ctx, {Objective::Sds, 1, InversionMode::Ddpm}, scene, pose, t, noise);
}

GradientEstimate ism_gradient(const ObjectiveContext& ctx, const SplatScene& scene, const CameraPose& pose, int t) {
  return gradient_estimate(ctx, {Objective::Ism, 1, InversionMode::Ddim}, scene, pose, t, Vec());
}

GradientEstimate pcds_gradient(const ObjectiveContext& ctx, const SplatScene& scene, const CameraPose& pose, int t,
                               int n_steps, InversionMode inversion, const Vec& noise) {
  return gradient_estimate(ctx, {Objective::Pcds, n_steps, inversion}, scene, pose, t, noise);
}

}  // namespace sdlab
