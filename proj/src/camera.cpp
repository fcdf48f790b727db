#include "sdlab/camera.hpp"

#include <cmath>
#include <numbers>

namespace sdlab {

double CameraPose::focal() const { return 0.5 * height / std::tan(0.5 * fov_y); }

Eigen::Vector3d CameraPose::eye() const {
  return radius * Eigen::Vector3d(std::cos(elevation) * std::sin(azimuth), std::sin(elevation),
                                  std::cos(elevation) * std::cos(azimuth));
}

Mat CameraPose::view_rotation() const {
  if (planar) {
    const double c = std::cos(azimuth), s = std::sin(azimuth);
    Mat r(2, 2);
    r << c, -s, s, c;
    return r;
  }
  const Eigen::Vector3d forward = -eye().normalized();
  Eigen::Vector3d up(0.0, 1.0, 0.0);
  if (std::abs(forward.dot(up)) > 0.999) up = Eigen::Vector3d(0.0, 0.0, -1.0);
  const Eigen::Vector3d right = forward.cross(up).normalized();
  const Eigen::Vector3d down = forward.cross(right);
  Mat w(3, 3);
  w.row(0) = right.transpose();
  w.row(1) = down.transpose();
  w.row(2) = forward.transpose();
  return w;
}

void CameraPose::validate() const {
  if (height < 1 || width < 1) throw ParameterError("camera image size must be positive");
  if (!std::isfinite(azimuth) || !std::isfinite(elevation)) throw ParameterError("camera angles must be finite");
  if (!planar) {
    if (!(radius > 0.0)) throw ParameterError("camera radius must be positive");
    if (!(fov_y > 0.0 && fov_y < std::numbers::pi)) throw ParameterError("camera fov must lie in (0, pi)");
  }
}

CameraPose orbit_camera(double azimuth, double elevation, double radius, int height, int width, double fov_y) {
  CameraPose c;
  c.azimuth = azimuth;
  c.elevation = elevation;
  c.radius = radius;
  c.height = height;
  c.width = width;
  c.fov_y = fov_y;
  c.validate();
  return c;
}

CameraPose planar_camera(int height, int width, double azimuth) {
  CameraPose c;
  c.planar = true;
  c.height = height;
  c.width = width;
  c.azimuth = azimuth;
  c.validate();
  return c;
}

std::vector<CameraPose> camera_orbit(const CameraPose& base, int n_frames, double start) {
  if (n_frames < 1) throw ParameterError("orbit needs at least one frame");
  std::vector<CameraPose> out;
  for (int i = 0; i < n_frames; ++i) {
    CameraPose c = base;
    c.azimuth = start + 2.0 * std::numbers::pi * i / n_frames;
    out.push_back(c);
  }
  return out;
}

nlohmann::json camera_to_json(const CameraPose& c) {
  return {{"azimuth", c.azimuth}, {"elevation", c.elevation}, {"radius", c.radius}, {"height", c.height},
          {"width", c.width},     {"fov_y", c.fov_y},         {"planar", c.planar}};
}

CameraPose camera_from_json(const nlohmann::json& j) {
  try {
    CameraPose c;
    c.azimuth = j.value("azimuth", 0.0);
    c.elevation = j.value("elevation", 0.0);
    c.radius = j.value("radius", 4.0);
    c.height = j.value("height", 32);
    c.width = j.value("width", 32);
    c.fov_y = j.value("fov_y", 0.7);
    c.planar = j.value("planar", false);
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad camera: ") + e.what());
  }
}

nlohmann::json camera_path_to_json(const std::vector<CameraPose>& path) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& c : path) a.push_back(camera_to_json(c));
  return a;
}

std::vector<CameraPose> camera_path_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ConfigError("camera path must be a JSON list");
  std::vector<CameraPose> out;
  for (const auto& c : j) out.push_back(camera_from_json(c));
  return out;
}

}  // namespace sdlab
