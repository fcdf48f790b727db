#include "sdlab/score_model.hpp"

namespace sdlab {

std::string to_string(ViewBin bin) {
  switch (bin) {
    case ViewBin::Front: return "front";
    case ViewBin::Side: return "side";
    case ViewBin::Back: return "back";
    case ViewBin::Overhead: return "overhead";
  }
  return "front";
}

ViewBin view_bin_from_string(const std::string& name) {
  if (name == "front") return ViewBin::Front;
  if (name == "side") return ViewBin::Side;
  if (name == "back") return ViewBin::Back;
  if (name == "overhead") return ViewBin::Overhead;
  throw ConfigError("unknown view bin '" + name + "'");
}

Vec ScoreModel::eval(const Vec& x, int t, const ConditionId& condition) const {
  if (x.size() != dim()) {
    throw ParameterError("score model input has dimension " + std::to_string(x.size()) +
                         ", expected " + std::to_string(dim()));
  }
  if (!condition.is_none() && condition.id >= num_conditions()) {
    throw ModelError("score model does not know condition " + std::to_string(condition.id));
  }
  nfe_.fetch_add(1, std::memory_order_relaxed);
  return predict(x, t, condition);
}

}  // namespace sdlab
