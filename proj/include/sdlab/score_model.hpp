#pragma once

#include <atomic>
#include <string>

#include "sdlab/common.hpp"

namespace sdlab {

enum class ViewBin { Front = 0, Side = 1, Back = 2, Overhead = 3 };

std::string to_string(ViewBin bin);
ViewBin view_bin_from_string(const std::string& name);

/// Discrete prompt stand-in. id < 0 is the unconditional (null) prompt.
struct ConditionId {
  int id = -1;
  ViewBin view = ViewBin::Front;

  static ConditionId none() { return {}; }
  static ConditionId of(int id, ViewBin view = ViewBin::Front) { return {id, view}; }
  bool is_none() const { return id < 0; }

  friend bool operator==(const ConditionId& a, const ConditionId& b) { return a.id == b.id; }
};

/// Epsilon-prediction model. Every call to eval() counts as one function evaluation.
class ScoreModel {
 public:
  ScoreModel() = default;
  ScoreModel(const ScoreModel&) : nfe_(0) {}
  ScoreModel& operator=(const ScoreModel&) { return *this; }
  virtual ~ScoreModel() = default;

  Vec eval(const Vec& x, int t, const ConditionId& condition) const;

  virtual int dim() const = 0;
  /// Number of conditional prompts understood by the model (ids 0..n-1).
  virtual int num_conditions() const = 0;

  long long nfe() const { return nfe_.load(std::memory_order_relaxed); }
  void reset_nfe() const { nfe_.store(0, std::memory_order_relaxed); }

 protected:
  virtual Vec predict(const Vec& x, int t, const ConditionId& condition) const = 0;

 private:
  mutable std::atomic<long long> nfe_{0};
};

}  // namespace sdlab
