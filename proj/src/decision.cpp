#include "taskcal/decision.hpp"

#include "taskcal/calibrate.hpp"

namespace taskcal {

double bayes_risk(int action, const SimplexPoint& q, const LossMatrix& loss) {
  if (loss.c != q.dim()) throw ValidationError("loss matrix and belief dimensions differ");
  if (action < 0 || action >= loss.c) throw ValidationError("action index out of range");
  double acc = 0.0;
  for (int a = 0; a < loss.c; ++a) acc += q[static_cast<size_t>(a)] * loss.at(a, action);
  return acc;
}

int mbr_decode(const SimplexPoint& q, const LossMatrix& loss) {
  if (loss.c != q.dim()) throw ValidationError("loss matrix and belief dimensions differ");
  int best = 0;
  double best_risk = bayes_risk(0, q, loss);
  for (int b = 1; b < loss.c; ++b) {
    const double r = bayes_risk(b, q, loss);
    if (r < best_risk) {
      best = b;
      best_risk = r;
    }
  }
  return best;
}

int argmax_policy(const SimplexPoint& q) {
  int best = 0;
  for (int i = 1; i < q.dim(); ++i) {
    if (q[static_cast<size_t>(i)] > q[static_cast<size_t>(best)]) best = i;
  }
  return best;
}

int bas_threshold_decide(double p_answer, double t) {
  if (!(p_answer >= 0.0 && p_answer <= 1.0))
    throw ValidationError("answer probability must lie in [0, 1]");
  if (!(t >= 0.0 && t < 1.0)) throw ValidationError("bas threshold must lie in [0, 1)");
  return p_answer >= t ? 0 : 1;
}

int decode_pipeline(const std::vector<int64_t>& counts, int64_t m, const Calibrator& calibrator,
                    const LossMatrix& loss) {
  return mbr_decode(apply(calibrator, estimate_push_forward(counts, m)), loss);
}

std::vector<int> decode_pipeline(const Dataset& data, const Calibrator* calibrator,
                                 const LossMatrix& loss) {
  validate_dataset(data);
  std::vector<int> actions;
  actions.reserve(data.size());
  for (const auto& r : data.records) {
    SimplexPoint q = record_belief(data.space, r);
    if (calibrator != nullptr) q = apply(*calibrator, q);
    actions.push_back(mbr_decode(q, loss));
  }
  return actions;
}

std::map<int, std::vector<size_t>> group_by_mbr_action(const Dataset& data,
                                                       const LossMatrix& loss) {
  validate_dataset(data);
  std::map<int, std::vector<size_t>> groups;
  for (size_t i = 0; i < data.records.size(); ++i) {
    const SimplexPoint q = record_belief(data.space, data.records[i]);
    groups[mbr_decode(q, loss)].push_back(i);
  }
  return groups;
}

}  // namespace taskcal
