#pragma once

#include <map>
#include <random>
#include <vector>

#include "json.hpp"

#include "sdlab/common.hpp"
#include "sdlab/schedule.hpp"
#include "sdlab/score_model.hpp"

namespace sdlab {

struct MixtureComponent {
  double weight = 1.0;
  Vec mean;
  double sigma = 1.0;
};

/// Isotropic Gaussian mixture standing in for the image distribution. Each condition
/// selects a subset of components; the unconditional prompt uses all of them.
struct GaussianMixture {
  std::vector<MixtureComponent> components;
  std::map<int, std::vector<int>> condition_map;

  int dim() const { return components.empty() ? 0 : static_cast<int>(components.front().mean.size()); }
  int num_conditions() const;
  /// Component indices for a condition (all components for the null prompt).
  std::vector<int> subset(const ConditionId& condition) const;
  void validate() const;
};

inline constexpr double kMinSigma = 1e-6;

/// Exact epsilon of the diffused mixture: -sqrt(1 - a_t) * grad log p_t(x), where p_t is
/// the sqrt(a_t)-scaled mixture with component variance a_t sigma^2 + 1 - a_t.
Vec analytic_eps(const GaussianMixture& mixture, const NoiseSchedule& schedule, const Vec& x, int t,
                 const ConditionId& condition);

/// Posterior responsibilities of the condition's components at (x, t).
Vec responsibilities(const GaussianMixture& mixture, const NoiseSchedule& schedule, const Vec& x,
                     int t, const ConditionId& condition);

Vec sample_mixture(const GaussianMixture& mixture, const ConditionId& condition, std::mt19937_64& rng);

class MixtureModel final : public ScoreModel {
 public:
  MixtureModel(GaussianMixture mixture, NoiseSchedule schedule);

  int dim() const override { return mixture_.dim(); }
  int num_conditions() const override { return mixture_.num_conditions(); }
  const GaussianMixture& mixture() const { return mixture_; }
  const NoiseSchedule& schedule() const { return schedule_; }

 protected:
  Vec predict(const Vec& x, int t, const ConditionId& condition) const override;

 private:
  GaussianMixture mixture_;
  NoiseSchedule schedule_;
};

inline constexpr const char* kMixtureSchema = "sdlab.mixture/1";

nlohmann::json mixture_to_json(const GaussianMixture& mixture);
GaussianMixture mixture_from_json(const nlohmann::json& j);

}  // namespace sdlab
