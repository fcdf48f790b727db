#include "sdlab/render.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "sdlab/parallel.hpp"

namespace sdlab {

namespace {

constexpr int kRowsPerBlock = 8;

ProjectedSplat project_one(const Splat& s, int index, const CameraPose& camera) {
  ProjectedSplat p;
  p.index = index;
  p.alpha = s.opacity();
  const Mat cov = s.covariance();
  p.view = camera.view_rotation();
  if (camera.planar) {
    Mat j = Mat::Zero(2, 2);
    j(0, 0) = camera.width;
    j(1, 1) = camera.height;
    p.jacobian = j;
    const Eigen::Vector2d centre(0.5, 0.5);
    p.mean = j * (p.view * (s.position - centre) + centre);
    p.depth = s.depth;
  } else {
    p.cam = p.view * (s.position - camera.eye());
    const double z = p.cam.z();
    if (z <= kNearPlane) return p;
    const double f = camera.focal();
    Mat j(2, 3);
    j << f / z, 0.0, -f * p.cam.x() / (z * z), 0.0, f / z, -f * p.cam.y() / (z * z);
    p.jacobian = j;
    p.mean = Eigen::Vector2d(f * p.cam.x() / z + 0.5 * camera.width, f * p.cam.y() / z + 0.5 * camera.height);
    p.depth = z;
  }
  p.view_cov = p.view * cov * p.view.transpose();
  p.cov = project_covariance(cov, p.view, p.jacobian);
  p.cov += kCovarianceFloor * Eigen::Matrix2d::Identity();
  p.conic = p.cov.inverse();
  p.visible = p.mean.allFinite() && p.conic.allFinite();
  return p;
}

inline double footprint(const ProjectedSplat& p, double px, double py, Eigen::Vector2d* d_out = nullptr) {
  const Eigen::Vector2d d(px - p.mean.x(), py - p.mean.y());
  if (d_out) *d_out = d;
  return std::exp(-0.5 * d.dot(p.conic * d));
}

}  // namespace

std::vector<ProjectedSplat> project_scene(const SplatScene& scene, const CameraPose& camera) {
  camera.validate();
  if ((scene.dim == 2) != camera.planar) {
    throw ParameterError("image-plane scenes need a planar camera and 3D scenes an orbit camera");
  }
  std::vector<ProjectedSplat> out;
  out.reserve(scene.splats.size());
  for (int i = 0; i < scene.size(); ++i) out.push_back(project_one(scene.splats[static_cast<std::size_t>(i)], i, camera));
  return out;
}

std::vector<int> depth_order(const std::vector<ProjectedSplat>& projected) {
  std::vector<int> order;
  for (const auto& p : projected) {
    if (p.visible) order.push_back(p.index);
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return projected[static_cast<std::size_t>(a)].depth < projected[static_cast<std::size_t>(b)].depth;
  });
  return order;
}

RenderedView render(const SplatScene& scene, const CameraPose& camera) {
  const auto projected = project_scene(scene, camera);
  const auto order = depth_order(projected);
  RenderedView view;
  view.height = camera.height;
  view.width = camera.width;
  view.pixels = Vec::Zero(static_cast<Eigen::Index>(camera.pixels()) * 3);
  view.transmittance = Vec::Ones(camera.pixels());
  const int n_blocks = (camera.height + kRowsPerBlock - 1) / kRowsPerBlock;
  parallel_blocks(n_blocks, [&](int block) {
    const int row_end = std::min(camera.height, (block + 1) * kRowsPerBlock);
    for (int row = block * kRowsPerBlock; row < row_end; ++row) {
      for (int col = 0; col < camera.width; ++col) {
        const double px = col + 0.5, py = row + 0.5;
        Eigen::Vector3d c = Eigen::Vector3d::Zero();
        double T = 1.0;
        for (int idx : order) {
          const ProjectedSplat& p = projected[static_cast<std::size_t>(idx)];
          const double sigma = p.alpha * footprint(p, px, py);
          c += T * sigma * scene.splats[static_cast<std::size_t>(idx)].color;
          T *= 1.0 - sigma;
          if (T < kTransmittanceCutoff) break;
        }
        c += T * scene.background;
        const Eigen::Index pix = static_cast<Eigen::Index>(row) * camera.width + col;
        view.pixels.segment<3>(pix * 3) = c;
        view.transmittance[pix] = T;
      }
    }
  });
  return view;
}

namespace {

/// Screen-space gradient accumulators for one splat.
struct ScreenGrad {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d conic = Eigen::Matrix2d::Zero();
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
  double alpha = 0.0;
};

struct Contribution {
  int idx;
  double g;
  double sigma;
  double T;  // transmittance in front of this splat
  Eigen::Vector2d d;
};

/// dR/dq_k for the rotation of a unit quaternion (w, x, y, z).
std::array<Eigen::Matrix3d, 4> rotation_partials(const Eigen::Vector4d& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  std::array<Eigen::Matrix3d, 4> d;
  d[0] << 0, -z, y, z, 0, -x, -y, x, 0;
  d[1] << 0, y, z, y, -2 * x, -w, z, w, -2 * x;
  d[2] << -2 * y, x, w, x, 0, z, -w, z, -2 * y;
  d[3] << -2 * z, -w, x, w, -2 * z, y, x, y, 0;
  for (auto& m : d) m *= 2.0;
  return d;
}

}  // namespace

Vec render_backward(const SplatScene& scene, const CameraPose& camera, const Vec& grad_pixels) {
  if (grad_pixels.size() != static_cast<Eigen::Index>(camera.pixels()) * 3) {
    throw ParameterError("render_backward: pixel gradient does not match the image size");
  }
  const auto projected = project_scene(scene, camera);
  const auto order = depth_order(projected);
  const int n = scene.size();
  const int n_blocks = (camera.height + kRowsPerBlock - 1) / kRowsPerBlock;
  std::vector<std::vector<ScreenGrad>> block_grads(static_cast<std::size_t>(n_blocks));

  parallel_blocks(n_blocks, [&](int block) {
    auto& acc = block_grads[static_cast<std::size_t>(block)];
    acc.assign(static_cast<std::size_t>(n), ScreenGrad{});
    std::vector<Contribution> list;
    const int row_end = std::min(camera.height, (block + 1) * kRowsPerBlock);
    for (int row = block * kRowsPerBlock; row < row_end; ++row) {
      for (int col = 0; col < camera.width; ++col) {
        const Eigen::Index pix = static_cast<Eigen::Index>(row) * camera.width + col;
        const Eigen::Vector3d dc = grad_pixels.segment<3>(pix * 3);
        if (dc.isZero(0.0)) continue;
        const double px = col + 0.5, py = row + 0.5;
        list.clear();
        double T = 1.0;
        for (int idx : order) {
          const ProjectedSplat& p = projected[static_cast<std::size_t>(idx)];
          Contribution c;
          c.idx = idx;
          c.g = footprint(p, px, py, &c.d);
          c.sigma = p.alpha * c.g;
          c.T = T;
          list.push_back(c);
          T *= 1.0 - c.sigma;
          if (T < kTransmittanceCutoff) break;
        }
        // rest = colour composited behind the current splat, normalized by its transmittance.
        Eigen::Vector3d rest = scene.background;
        for (auto it = list.rbegin(); it != list.rend(); ++it) {
          const ProjectedSplat& p = projected[static_cast<std::size_t>(it->idx)];
          const Eigen::Vector3d& color = scene.splats[static_cast<std::size_t>(it->idx)].color;
          ScreenGrad& g = acc[static_cast<std::size_t>(it->idx)];
          g.color += it->T * it->sigma * dc;
          const double d_sigma = it->T * dc.dot(color - rest);
          g.alpha += d_sigma * it->g;
          const double d_g = d_sigma * p.alpha;
          g.mean += d_g * it->g * (p.conic * it->d);
          g.conic += (-0.5 * d_g * it->g) * (it->d * it->d.transpose());
          rest = it->sigma * color + (1.0 - it->sigma) * rest;
        }
      }
    }
  });

  std::vector<ScreenGrad> total(static_cast<std::size_t>(n));
  for (const auto& blk : block_grads) {
    for (int i = 0; i < n; ++i) {
      const auto& b = blk[static_cast<std::size_t>(i)];
      auto& t = total[static_cast<std::size_t>(i)];
      t.mean += b.mean;
      t.conic += b.conic;
      t.color += b.color;
      t.alpha += b.alpha;
    }
  }

  const int pp = scene.params_per_splat();
  const int dim = scene.dim;
  Vec grad = Vec::Zero(scene.num_parameters());
  for (int i = 0; i < n; ++i) {
    const ProjectedSplat& p = projected[static_cast<std::size_t>(i)];
    if (!p.visible) continue;
    const Splat& s = scene.splats[static_cast<std::size_t>(i)];
    const ScreenGrad& sg = total[static_cast<std::size_t>(i)];
    auto blk = grad.segment(static_cast<Eigen::Index>(i) * pp, pp);

    blk.segment(scene.color_offset(), 3) = sg.color;
    blk[scene.opacity_offset()] = sg.alpha * p.alpha * (1.0 - p.alpha);

    // conic = cov^-1, cov = J M J^T + floor, M = W Sigma W^T
    const Eigen::Matrix2d d_cov2 = -p.conic * sg.conic * p.conic;
    const Mat d_cov2_sym = 0.5 * (d_cov2 + d_cov2.transpose());
    const Mat d_m = p.jacobian.transpose() * d_cov2_sym * p.jacobian;
    const Mat d_sigma = p.view.transpose() * d_m * p.view;

    Vec d_pos;
    if (camera.planar) {
      d_pos = p.view.transpose() * (p.jacobian.transpose() * sg.mean);
    } else {
      const double f = camera.focal();
      const double x = p.cam.x(), y = p.cam.y(), z = p.cam.z();
      Eigen::Vector3d d_cam = p.jacobian.transpose() * sg.mean;
      const Mat d_j = 2.0 * d_cov2_sym * p.jacobian * p.view_cov;
      d_cam.x() += d_j(0, 2) * (-f / (z * z));
      d_cam.y() += d_j(1, 2) * (-f / (z * z));
      d_cam.z() += d_j(0, 0) * (-f / (z * z)) + d_j(0, 2) * (2.0 * f * x / (z * z * z)) +
                   d_j(1, 1) * (-f / (z * z)) + d_j(1, 2) * (2.0 * f * y / (z * z * z));
      d_pos = p.view.transpose() * d_cam;
    }
    blk.head(dim) = d_pos;

    // Sigma = R diag(s^2) R^T
    const Mat r = s.rotation();
    const Vec s2 = (2.0 * s.log_scale.array()).exp().matrix();
    const Mat rt_d_r = r.transpose() * d_sigma * r;
    for (int k = 0; k < dim; ++k) blk[dim + k] = 2.0 * s2[k] * rt_d_r(k, k);
    const Mat d_r = 2.0 * d_sigma * r * s2.asDiagonal();
    if (dim == 2) {
      const double c = std::cos(s.angle), sn = std::sin(s.angle);
      Eigen::Matrix2d dr_dtheta;
      dr_dtheta << -sn, -c, c, -sn;
      blk[4] = (d_r.array() * dr_dtheta.array()).sum();
    } else {
      const double norm = s.quaternion.norm();
      const Eigen::Vector4d q = s.quaternion / norm;
      const auto partials = rotation_partials(q);
      Eigen::Vector4d d_q;
      for (int k = 0; k < 4; ++k) d_q[k] = (d_r.array() * partials[static_cast<std::size_t>(k)].array()).sum();
      blk.segment(6, 4) = (Eigen::Matrix4d::Identity() - q * q.transpose()) * d_q / norm;
    }
  }
  return grad;
}

}  // namespace sdlab
