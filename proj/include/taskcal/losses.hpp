#pragma once

#include <string>
#include <vector>

#include "taskcal/core.hpp"

namespace taskcal {

enum class LossKind { l1, exact_match, separable_l1, bas };

const char* loss_kind_name(LossKind k);
LossKind loss_kind_from_name(const std::string& name);

struct LossSpec {
  LossKind kind = LossKind::exact_match;
  double t = 0.25;  // bas abstain threshold, used only for kind == bas
};

// Dense task loss: entry(truth, predicted). Rows index the true class.
struct LossMatrix {
  int c = 0;
  std::vector<double> d;  // row-major, size c*c

  double at(int truth, int predicted) const {
    return d[static_cast<size_t>(truth) * static_cast<size_t>(c) +
             static_cast<size_t>(predicted)];
  }
};

// Answer-or-abstain loss entry for classes {0 = answer, 1 = abstain}:
// predicting abstain costs 0, a correct answer scores -1, a wrong answer
// (truth abstain) costs t/(1-t). Requires 0 <= t < 1.
double bas_loss(int truth, int predicted, double t);

// Builds the dense matrix for a loss kind on a compatible space:
//   l1            ordinal values, |v_a - v_b|
//   exact_match   any space, 1[a != b]
//   separable_l1  product space, sum of per-factor absolute differences
//   bas           answer_abstain space
LossMatrix build_loss_matrix(const LatentSpace& space, const LossSpec& spec);

}  // namespace taskcal
