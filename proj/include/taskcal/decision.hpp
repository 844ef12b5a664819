#pragma once

#include <cstddef>
#include <map>
#include <vector>

#include "taskcal/core.hpp"
#include "taskcal/losses.hpp"

namespace taskcal {

struct Calibrator;

// Expected loss of taking `action` when the outcome is distributed as `q`:
// sum over classes a of q[a] * loss(a, action).
double bayes_risk(int action, const SimplexPoint& q, const LossMatrix& loss);

// Minimum-Bayes-risk action. Ties resolve to the smallest class index.
int mbr_decode(const SimplexPoint& q, const LossMatrix& loss);

// Most probable class. Ties resolve to the smallest class index.
int argmax_policy(const SimplexPoint& q);

// Answer (class 0) iff p_answer >= t, abstain (class 1) otherwise.
int bas_threshold_decide(double p_answer, double t);

enum class DecisionRule { mbr, argmax, bas_threshold };

struct DecisionRuleOutput {
  DecisionRule rule = DecisionRule::mbr;
  std::vector<int> actions;  // one per record, in dataset order
};

// Composition of push-forward estimation, calibration and MBR decoding for a
// single query's sample counts.
int decode_pipeline(const std::vector<int64_t>& counts, int64_t m, const Calibrator& calibrator,
                    const LossMatrix& loss);

// Per record: belief, optional calibration, then MBR decoding.
// A null calibrator leaves beliefs unchanged.
std::vector<int> decode_pipeline(const Dataset& data, const Calibrator* calibrator,
                                 const LossMatrix& loss);

// Partition of record indices by their uncalibrated MBR action.
std::map<int, std::vector<size_t>> group_by_mbr_action(const Dataset& data,
                                                       const LossMatrix& loss);

}  // namespace taskcal
