#pragma once

#include <array>
#include <string>
#include <vector>

#include "json.hpp"

#include "sdlab/common.hpp"
#include "sdlab/score_model.hpp"

namespace sdlab {

struct NegativePrompt {
  ConditionId condition;
  double weight = 0.5;
};

struct GuidanceConfig {
  double w_g = 7.5;
  ConditionId positive = ConditionId::of(0);
  std::vector<NegativePrompt> negatives;

  int num_negatives() const { return static_cast<int>(negatives.size()); }
  void validate() const;
};

/// eps_uncond + w (eps_cond - eps_uncond)
template <typename DerivedU, typename DerivedC>
Eigen::Matrix<typename DerivedU::Scalar, Eigen::Dynamic, 1> cfg_compose(
    const Eigen::MatrixBase<DerivedU>& eps_uncond, const Eigen::MatrixBase<DerivedC>& eps_cond,
    typename DerivedU::Scalar w) {
  if (eps_uncond.size() != eps_cond.size()) throw ParameterError("cfg_compose: dimension mismatch");
  return eps_uncond + w * (eps_cond - eps_uncond);
}

template <typename Scalar>
struct PerpResult {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> perp;
  bool degenerate = false;  // eps_pos was zero; eps_neg passed through unchanged
};

/// Component of eps_neg orthogonal to eps_pos.
template <typename DerivedP, typename DerivedN>
PerpResult<typename DerivedP::Scalar> perp_component(const Eigen::MatrixBase<DerivedP>& eps_pos,
                                                     const Eigen::MatrixBase<DerivedN>& eps_neg) {
  using Scalar = typename DerivedP::Scalar;
  if (eps_pos.size() != eps_neg.size()) throw ParameterError("perp_component: dimension mismatch");
  const Scalar nn = eps_pos.squaredNorm();
  if (nn == Scalar(0)) return {eps_neg, true};
  // Second pass removes what cancellation leaves behind when eps_neg is nearly parallel.
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> r = eps_neg - (eps_pos.dot(eps_neg) / nn) * eps_pos;
  r -= (eps_pos.dot(r) / nn) * eps_pos;
  return {r, false};
}

struct ComposedScore {
  Vec eps;          // guided epsilon
  Vec eps_uncond;   // eps(x, t, none)
  Vec eps_positive; // eps(x, t, positive), the raw conditional evaluation
  Vec delta_positive;              // eps_positive - eps_uncond
  std::vector<Vec> perp_negatives; // projected negative deltas
  bool degenerate = false;
  long long nfe = 0;
};

/// Perp-Neg composition: one unconditional, one positive, and one evaluation per negative.
ComposedScore perp_neg_compose(const ScoreModel& model, const Vec& x, int t, const GuidanceConfig& config);

/// Camera pose -> prompt mapping over four azimuth/elevation bins.
struct PoseBinding {
  ViewBin positive_bin = ViewBin::Front;
  std::vector<std::pair<ViewBin, double>> negative_bins;
};

ViewBin view_bin_for(double azimuth, double elevation);
/// Positive bin from the pose; every other bin becomes a negative with weight w_c.
PoseBinding bind_pose(double azimuth, double elevation, double w_c);
GuidanceConfig guidance_for_binding(const PoseBinding& binding, const std::array<int, 4>& bin_condition,
                                    double w_g);

struct GuidanceTraceRow {
  int t = 0;
  int positive = -1;
  std::vector<int> negatives;
  double eps_norm = 0.0;
  double positive_norm = 0.0;
  double orthogonality_residual = 0.0;  // max |<d_pos, perp_i>| / (|d_pos| |perp_i|)
};

GuidanceTraceRow trace_row(const ComposedScore& score, int t, const GuidanceConfig& config);
void write_guidance_trace(const std::string& path, const std::vector<GuidanceTraceRow>& rows);

nlohmann::json guidance_to_json(const GuidanceConfig& config);
GuidanceConfig guidance_from_json(const nlohmann::json& j);

}  // namespace sdlab
