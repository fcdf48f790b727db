#pragma once

#include <vector>

#include "json.hpp"

#include "sdlab/mlp.hpp"
#include "sdlab/schedule.hpp"
#include "sdlab/score_model.hpp"

namespace sdlab {

/// Samples (one per column) with an optional condition label each (-1 = unlabelled).
struct Dataset {
  Mat samples;
  std::vector<int> conditions;

  int dim() const { return static_cast<int>(samples.rows()); }
  int size() const { return static_cast<int>(samples.cols()); }
};

struct DenoiserConfig {
  int width = 128;
  int depth = 3;  // hidden layers
  int time_features = 16;
  double learning_rate = 1e-3;
  int iterations = 4000;
  int batch = 128;
  double condition_dropout = 0.15;
  unsigned long long seed = 0;
};

/// Small fully connected epsilon-predictor with sinusoidal time features. Embedding 0 is
/// the null prompt, embedding k + 1 is condition k.
class DenoiserModel final : public ScoreModel {
 public:
  DenoiserModel(int dim, int num_conditions, int T, const DenoiserConfig& config);
  DenoiserModel(Mlp net, int dim, int num_conditions, int T, int time_features);

  int dim() const override { return dim_; }
  int num_conditions() const override { return num_conditions_; }
  int steps() const { return T_; }
  int time_features() const { return time_features_; }

  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }

  /// Column-wise inputs for a batch; used by training code.
  Mat features(const Mat& x, const std::vector<int>& t) const;
  static int embedding_index(const ConditionId& condition) { return condition.is_none() ? 0 : condition.id + 1; }

 protected:
  Vec predict(const Vec& x, int t, const ConditionId& condition) const override;

 private:
  Mlp net_;
  int dim_;
  int num_conditions_;
  int T_;
  int time_features_;
};

/// Trains with the denoising loss ||eps - eps_theta(x_t, t, y)||^2. Deterministic for a seed.
DenoiserModel train_toy_denoiser(const Dataset& data, const NoiseSchedule& schedule,
                                 const DenoiserConfig& config, int num_conditions);

inline constexpr const char* kDenoiserSchema = "sdlab.denoiser/1";

nlohmann::json denoiser_to_json(const DenoiserModel& model);
DenoiserModel denoiser_from_json(const nlohmann::json& j);

}  // namespace sdlab
