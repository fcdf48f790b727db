#include "sdlab/splat.hpp"

namespace sdlab {

Eigen::Matrix3d quaternion_rotation(const Eigen::Vector4d& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Eigen::Matrix3d r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
       2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
       2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

Mat Splat::rotation() const {
  if (dim() == 2) {
    const double c = std::cos(angle), s = std::sin(angle);
    Mat r(2, 2);
    r << c, -s, s, c;
    return r;
  }
  return quaternion_rotation(quaternion.normalized());
}

Mat Splat::covariance() const {
  const Mat r = rotation();
  const Vec s2 = (2.0 * log_scale.array()).exp().matrix();
  return r * s2.asDiagonal() * r.transpose();
}

Vec SplatScene::parameters() const {
  const int p = params_per_splat();
  Vec theta(num_parameters());
  for (int i = 0; i < size(); ++i) {
    const Splat& s = splats[static_cast<std::size_t>(i)];
    auto blk = theta.segment(static_cast<Eigen::Index>(i) * p, p);
    blk.head(dim) = s.position;
    blk.segment(dim, dim) = s.log_scale;
    if (dim == 2) {
      blk[4] = s.angle;
    } else {
      blk.segment(6, 4) = s.quaternion;
    }
    blk.segment(color_offset(), 3) = s.color;
    blk[opacity_offset()] = s.opacity_logit;
  }
  return theta;
}

void SplatScene::set_parameters(const Vec& theta) {
  if (theta.size() != num_parameters()) throw ParameterError("scene parameter vector has the wrong size");
  const int p = params_per_splat();
  for (int i = 0; i < size(); ++i) {
    Splat& s = splats[static_cast<std::size_t>(i)];
    const auto blk = theta.segment(static_cast<Eigen::Index>(i) * p, p);
    s.position = blk.head(dim);
    s.log_scale = blk.segment(dim, dim);
    if (dim == 2) {
      s.angle = blk[4];
    } else {
      s.quaternion = blk.segment(6, 4);
    }
    s.color = blk.segment(color_offset(), 3);
    s.opacity_logit = blk[opacity_offset()];
  }
}

void SplatScene::validate() const {
  if (dim != 2 && dim != 3) throw ParameterError("scene dimension must be 2 or 3");
  for (const auto& s : splats) {
    if (s.position.size() != dim || s.log_scale.size() != dim) {
      throw ParameterError("splat fields do not match the scene dimension");
    }
    if (dim == 3 && s.quaternion.norm() == 0.0) throw ParameterError("splat quaternion must be nonzero");
    if (!s.position.allFinite() || !s.log_scale.allFinite() || !s.color.allFinite() ||
        !std::isfinite(s.opacity_logit) || !std::isfinite(s.angle) || !s.quaternion.allFinite()) {
      throw NumericError("splat has non-finite parameters");
    }
  }
}

}  // namespace sdlab
