#pragma once

#include <vector>

#include "json.hpp"

#include "sdlab/common.hpp"

namespace sdlab {

/// Either an orbit camera looking at the origin (3D scenes) or an in-plane turntable for
/// image-plane scenes, where positions live in [0, 1]^2 and azimuth rotates about the centre.
struct CameraPose {
  double azimuth = 0.0;    // radians
  double elevation = 0.0;  // radians
  double radius = 4.0;
  int height = 32;
  int width = 32;
  double fov_y = 0.7;  // radians, perspective only
  bool planar = false;

  int pixels() const { return height * width; }
  double focal() const;
  /// World-to-camera rotation: rows are right, down, forward (3x3), or the in-plane
  /// rotation (2x2) for planar cameras.
  Mat view_rotation() const;
  Eigen::Vector3d eye() const;
  void validate() const;
};

CameraPose orbit_camera(double azimuth, double elevation, double radius, int height, int width,
                        double fov_y = 0.7);
CameraPose planar_camera(int height, int width, double azimuth = 0.0);

/// n_frames cameras evenly spaced in azimuth starting at `start`.
std::vector<CameraPose> camera_orbit(const CameraPose& base, int n_frames, double start = 0.0);

nlohmann::json camera_to_json(const CameraPose& camera);
CameraPose camera_from_json(const nlohmann::json& j);
nlohmann::json camera_path_to_json(const std::vector<CameraPose>& path);
std::vector<CameraPose> camera_path_from_json(const nlohmann::json& j);

}  // namespace sdlab
