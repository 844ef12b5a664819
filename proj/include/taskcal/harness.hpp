#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "taskcal/calibrate.hpp"
#include "taskcal/core.hpp"
#include "taskcal/losses.hpp"
#include "taskcal/metrics.hpp"

namespace taskcal {

// Deterministic k-fold partition of {0..n-1}: Fisher-Yates shuffle driven by
// the seed, then contiguous chunks. Fold sizes differ by at most one.
std::vector<std::vector<size_t>> kfold_split(size_t n, int folds, uint64_t seed);

enum class DistortionKind { dirichlet_map, grouping };

// How a synthetic model's reported belief is derived from the true posterior p.
//   dirichlet_map  the reported belief q solves softmax(W log(q+eps) + b) = p,
//                  so a calibrator with those parameters undoes the distortion
//   grouping       classes sharing a group id all report the group mean of p;
//                  the lost information cannot be restored by any recalibration
struct DistortionSpec {
  DistortionKind kind = DistortionKind::dirichlet_map;
  std::vector<double> weight;  // dirichlet_map, row-major c*c
  std::vector<double> bias;    // dirichlet_map, size c
  std::vector<int> group;      // grouping, group id per class, size c
  double epsilon = 1e-12;
};

// Presets: "identity", "overconfident", "underconfident", "grouped".
DistortionSpec preset_distortion(const std::string& name, int c);

// Reported belief for a true posterior. p_star must be interior.
SimplexPoint distort(const DistortionSpec& spec, const SimplexPoint& p_star);

struct SyntheticData {
  Dataset data;                      // records carry the reported beliefs
  std::vector<SimplexPoint> p_star;  // true posterior per record
  DistortionSpec distortion;         // parameters the beliefs were produced with
};

// True posteriors are sampled uniformly from the simplex and pulled slightly
// to the interior, labels are sampled from them, reported beliefs come from
// the distortion. Fully determined by the seed.
SyntheticData generate_synthetic(const LatentSpace& space, size_t n, const DistortionSpec& spec,
                                 uint64_t seed);

struct ExperimentConfig {
  int folds = 5;
  uint64_t seed = 0;
  CalibratorFamily family = CalibratorFamily::dirichlet;
  FitConfig fit;
  TceBinConfig tce;
  int ece_bins = 10;
};

struct FoldResult {
  int64_t n = 0;
  double final_nll = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  MetricReport before;
  MetricReport after;
};

struct AggregateReport {
  MetricReport mean;
  MetricReport stddev;  // population standard deviation across folds
};

struct ExperimentResult {
  ExperimentConfig config;
  LossSpec loss;
  int num_classes = 0;
  int64_t num_records = 0;
  std::vector<FoldResult> folds;
  AggregateReport before;
  AggregateReport after;
  std::vector<std::vector<int64_t>> movement;  // MBR action, raw -> out-of-fold calibrated
  std::optional<double> refinement_before;     // mean divergence to the true posterior
  std::optional<double> refinement_after;
};

// Cross-validated calibration experiment. Each fold's calibrator is fit on
// the remaining folds and applied to the held-out records, so every record
// gets exactly one out-of-fold calibrated belief. tce and ece are computed
// once over all records and repeated in every fold report; task losses are
// per fold. Refinement values are filled when true posteriors are given.
ExperimentResult run_experiment(const Dataset& data, const LossSpec& loss,
                                const ExperimentConfig& config,
                                const std::vector<SimplexPoint>* p_star = nullptr);

// Deterministic JSON report; byte-identical across runs with equal inputs.
std::string emit_report(const ExperimentResult& result);

uint64_t fnv1a64(const std::string& text);

}  // namespace taskcal
