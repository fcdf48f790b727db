#pragma once

#include <cmath>
#include <vector>

#include "sdlab/common.hpp"

namespace sdlab {

/// Unnormalized Gaussian exp(-1/2 p^T cov^-1 p).
template <typename DerivedC, typename DerivedP>
typename DerivedC::Scalar eval_gaussian(const Eigen::MatrixBase<DerivedC>& cov, const Eigen::MatrixBase<DerivedP>& p) {
  using Scalar = typename DerivedC::Scalar;
  const auto solved = cov.ldlt().solve(p.derived().template cast<Scalar>().eval()).eval();
  return std::exp(Scalar(-0.5) * p.dot(solved));
}

/// J W cov W^T J^T, symmetrized.
template <typename DerivedC, typename DerivedW, typename DerivedJ>
Eigen::Matrix<typename DerivedC::Scalar, Eigen::Dynamic, Eigen::Dynamic> project_covariance(
    const Eigen::MatrixBase<DerivedC>& cov, const Eigen::MatrixBase<DerivedW>& view,
    const Eigen::MatrixBase<DerivedJ>& jacobian) {
  using M = Eigen::Matrix<typename DerivedC::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (cov.rows() != cov.cols() || view.cols() != cov.rows() || jacobian.cols() != view.rows()) {
    throw ParameterError("project_covariance: shapes are not conformable");
  }
  const M jw = jacobian * view;
  const M out = jw * cov * jw.transpose();
  return (0.5 * (out + out.transpose())).eval();
}

inline constexpr double kCovarianceFloor = 1e-6;

/// One Gaussian. 2D splats live in normalized image coordinates [0, 1]^2 and rotate by
/// `angle`; 3D splats live in world units and rotate by the (unnormalized) quaternion.
struct Splat {
  Vec position;
  Vec log_scale;
  double angle = 0.0;
  Eigen::Vector4d quaternion{1.0, 0.0, 0.0, 0.0};  // w, x, y, z
  Eigen::Vector3d color{0.5, 0.5, 0.5};
  double opacity_logit = 0.0;
  double depth = 0.0;  // ordering key for 2D scenes

  int dim() const { return static_cast<int>(position.size()); }
  double opacity() const { return 1.0 / (1.0 + std::exp(-opacity_logit)); }
  Mat rotation() const;
  Mat covariance() const;
};

Eigen::Matrix3d quaternion_rotation(const Eigen::Vector4d& q_unit);

struct SplatScene {
  int dim = 2;
  std::vector<Splat> splats;
  Eigen::Vector3d background{0.0, 0.0, 0.0};

  int size() const { return static_cast<int>(splats.size()); }
  /// 9 values per 2D splat (pos 2, log-scale 2, angle, rgb, opacity logit) and 14 per 3D
  /// splat (pos 3, log-scale 3, quaternion 4, rgb, opacity logit).
  int params_per_splat() const { return dim == 2 ? 9 : 14; }
  Eigen::Index num_parameters() const { return static_cast<Eigen::Index>(size()) * params_per_splat(); }
  Vec parameters() const;
  void set_parameters(const Vec& theta);
  void validate() const;
  /// Offsets inside one splat's parameter block.
  int color_offset() const { return dim == 2 ? 5 : 10; }
  int opacity_offset() const { return color_offset() + 3; }
};

inline double eval_gaussian(const Splat& splat, const Vec& p) { return eval_gaussian(splat.covariance(), p); }

}  // namespace sdlab
