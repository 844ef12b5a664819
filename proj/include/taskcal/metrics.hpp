#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "taskcal/calibrate.hpp"
#include "taskcal/core.hpp"
#include "taskcal/decision.hpp"
#include "taskcal/losses.hpp"

namespace taskcal {

// Bayes risk of the MBR action under the belief itself. Can be negative for
// losses with negative entries.
double generalized_entropy(const SimplexPoint& q, const LossMatrix& loss);

// Regret of acting on q when outcomes follow r:
// bayes_risk(mbr(q), r) - bayes_risk(mbr(r), r). Non-negative.
double divergence(const SimplexPoint& q, const SimplexPoint& r, const LossMatrix& loss);

// Number of cells in the m-fold edgewise subdivision of the (C-1)-simplex.
uint64_t simplex_bin_count(int c, int m);

// Deterministic cell id in [0, m^(C-1)) for the standard simplicial
// (Kuhn/Freudenthal) subdivision with edge subdivision m. All cells have equal
// volume. Boundary points go to the lexicographically smallest containing cell.
uint64_t bin_index(const SimplexPoint& q, int m);

struct TceBinConfig {
  int bins_per_dim = 4;
};

// Binned decision-aware calibration error: records are grouped by simplex
// cell, each cell's conditional outcome distribution is estimated by the mean
// of its one-hot labels, and the mean divergence from belief to cell estimate
// is returned.
double tce_binned(const std::vector<SimplexPoint>& beliefs, const std::vector<int>& labels,
                  const LossMatrix& loss, const TceBinConfig& config = {});
double tce_binned(const Dataset& data, const LossMatrix& loss, const TceBinConfig& config = {});

// Leave-one-out kernel estimate of the conditional outcome distribution at
// each belief. Weights follow a Dirichlet density with concentration
// (q_j + epsilon) / bandwidth + 1 evaluated at q_i.
std::vector<SimplexPoint> kde_conditional(const std::vector<SimplexPoint>& beliefs,
                                          const std::vector<int>& labels, double bandwidth,
                                          double epsilon = 1e-12);

double tce_kde(const std::vector<SimplexPoint>& beliefs, const std::vector<int>& labels,
               const LossMatrix& loss, double bandwidth = 0.01, double epsilon = 1e-12);
double tce_kde(const Dataset& data, const LossMatrix& loss, double bandwidth = 0.01,
               double epsilon = 1e-12);

// Confidence calibration error: equal-width bins on the max-probability
// confidence, weighted mean |accuracy - confidence|.
double ece_confidence(const std::vector<SimplexPoint>& beliefs, const std::vector<int>& labels,
                      int n_bins = 10);
double ece_confidence(const Dataset& data, int n_bins = 10);

// Mean realized loss of per-record actions against the true labels.
double expected_task_loss(const std::vector<int>& labels, const std::vector<int>& actions,
                          const LossMatrix& loss);
double expected_task_loss(const Dataset& data, const DecisionRuleOutput& decisions,
                          const LossMatrix& loss);

// counts[a][b] = number of records whose MBR action moves from a
// (uncalibrated) to b (calibrated).
std::vector<std::vector<int64_t>> action_movement_matrix(const Dataset& data,
                                                         const Calibrator& calibrator,
                                                         const LossMatrix& loss);

struct MetricReport {
  double mean_task_loss = 0.0;
  std::optional<double> bas_score;  // negated mean task loss, bas losses only
  double tce = 0.0;
  double ece = 0.0;
  int64_t n = 0;
};

}  // namespace taskcal
