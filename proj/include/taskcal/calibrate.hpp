#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "taskcal/core.hpp"

namespace taskcal {

enum class CalibratorFamily { identity, temperature, dirichlet };

const char* calibrator_family_name(CalibratorFamily f);
CalibratorFamily calibrator_family_from_name(const std::string& name);

// A map from beliefs to beliefs.
//   identity     q -> q
//   temperature  q -> softmax(exp(-log_tau) * log(q + epsilon))
//   dirichlet    q -> softmax(W log(q + epsilon) + b), W row-major C x C
// epsilon also clamps the log in the fitting objective.
struct Calibrator {
  CalibratorFamily family = CalibratorFamily::identity;
  int dimension = 0;
  double epsilon = 1e-12;
  double log_tau = 0.0;        // temperature only
  std::vector<double> weight;  // dirichlet only, row-major dimension^2
  std::vector<double> bias;    // dirichlet only, size dimension
};

Calibrator identity_calibrator(int dimension);
Calibrator temperature_calibrator(int dimension, double log_tau, double epsilon = 1e-12);
Calibrator dirichlet_calibrator(int dimension, std::vector<double> weight,
                                std::vector<double> bias, double epsilon = 1e-12);

void validate_calibrator(const Calibrator& c);

SimplexPoint apply(const Calibrator& c, const SimplexPoint& q);

// Mean negative log-likelihood of the labels under calibrated beliefs:
// mean of -log(apply(c, belief_i)[label_i] + epsilon).
double nll(const Calibrator& c, const Dataset& data);

struct FitConfig {
  int max_iterations = 500;
  double gradient_tolerance = 1e-7;  // L2 norm over all parameters
  double initial_step = 1.0;
  uint64_t seed = 0;        // recorded in reports; the full-batch optimizer is deterministic
  double epsilon = 1e-12;   // log clamp of the fitted map and the objective
};

struct FitResult {
  Calibrator calibrator;
  double final_nll = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Full-batch gradient descent with backtracking (halving) line search under
// the Armijo condition. Deterministic; the objective never increases.
// Initialization is the identity member of the family.
FitResult fit(const Dataset& data, CalibratorFamily family, const FitConfig& config = {});

// Same optimizer started from an explicit parameter point.
FitResult fit_from(const Calibrator& init, const Dataset& data, const FitConfig& config = {});

// JSON round trip. Deserialization restores bit-identical parameters.
std::string serialize_calibrator(const Calibrator& c);
Calibrator deserialize_calibrator(const std::string& text);

}  // namespace taskcal
