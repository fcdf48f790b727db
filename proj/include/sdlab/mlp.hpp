#pragma once

#include <random>
#include <vector>

#include "json.hpp"

#include "sdlab/common.hpp"

namespace sdlab {

/// Fully connected network with SiLU hidden activations, a linear output layer, and a
/// learned per-condition embedding added to the first hidden pre-activation.
/// Inputs are processed column-wise (one sample per column).
class Mlp {
 public:
  Mlp() = default;
  /// widths = {input, hidden..., output}; n_embeddings rows of condition embedding.
  Mlp(std::vector<int> widths, int n_embeddings, std::mt19937_64& rng);

  struct Cache {
    std::vector<Mat> pre;   // pre-activations per layer
    std::vector<Mat> post;  // activations (post[0] is the input)
  };

  Mat forward(const Mat& input, const std::vector<int>& embedding_index, Cache* cache = nullptr) const;

  /// Gradient of sum(d_output .* output) with respect to the flattened parameters.
  Vec backward(const Cache& cache, const std::vector<int>& embedding_index, const Mat& d_output) const;

  Eigen::Index num_parameters() const;
  Vec parameters() const;
  void set_parameters(const Vec& flat);

  const std::vector<int>& widths() const { return widths_; }
  int num_embeddings() const { return static_cast<int>(embedding_.cols()); }

  nlohmann::json to_json() const;
  static Mlp from_json(const nlohmann::json& j);

 private:
  std::vector<int> widths_;
  std::vector<Mat> weights_;
  std::vector<Vec> biases_;
  Mat embedding_;  // widths_[1] x n_embeddings
};

/// Adam on a flattened parameter vector.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(Vec& params, const Vec& grad);

 private:
  double lr_, beta1_, beta2_, eps_;
  Vec m_, v_;
  long long t_ = 0;
};

}  // namespace sdlab
