#pragma once

#include <vector>

#include "sdlab/camera.hpp"
#include "sdlab/splat.hpp"

namespace sdlab {

/// Pixels are stored row-major and channel-interleaved: index (row * width + col) * 3 + c.
struct RenderedView {
  int height = 0;
  int width = 0;
  Vec pixels;
  Vec transmittance;  // final transmittance per pixel

  Eigen::Vector3d pixel(int row, int col) const {
    return pixels.segment<3>((static_cast<Eigen::Index>(row) * width + col) * 3);
  }
};

/// Screen-space footprint of one splat.
struct ProjectedSplat {
  int index = -1;
  bool visible = false;
  Eigen::Vector2d mean;    // pixel coordinates (x = column, y = row)
  Eigen::Matrix2d cov;     // projected covariance including the floor
  Eigen::Matrix2d conic;   // inverse of cov
  Mat jacobian;            // 2 x dim
  Mat view;                // dim x dim
  Mat view_cov;            // view * Sigma * view^T
  Eigen::Vector3d cam;     // camera-space position (3D only)
  double depth = 0.0;
  double alpha = 0.0;
};

inline constexpr double kTransmittanceCutoff = 1e-4;
inline constexpr double kNearPlane = 0.1;

std::vector<ProjectedSplat> project_scene(const SplatScene& scene, const CameraPose& camera);
/// Indices of visible splats, front to back; ties keep scene order.
std::vector<int> depth_order(const std::vector<ProjectedSplat>& projected);

RenderedView render(const SplatScene& scene, const CameraPose& camera);

/// Gradient of sum(grad_pixels .* render(scene, camera).pixels) with respect to the
/// scene parameter vector (SplatScene::parameters layout).
Vec render_backward(const SplatScene& scene, const CameraPose& camera, const Vec& grad_pixels);

}  // namespace sdlab
