#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "taskcal/errors.hpp"

namespace taskcal {

enum class SpaceKind { categorical, ordinal, answer_abstain, product, binary_decision };

const char* space_kind_name(SpaceKind k);
SpaceKind space_kind_from_name(const std::string& name);

// Discrete latent outcome space. Classes are indexed 0..C-1 in label order.
//  - ordinal carries one strictly increasing scalar value per class
//  - product carries per-factor sizes and per-factor value tables; class i
//    decodes to a digit vector with the leftmost factor most significant
//  - answer_abstain is binary with class 0 = answer, class 1 = abstain
//  - binary_decision is binary with class 0 = include, class 1 = exclude
struct LatentSpace {
  SpaceKind kind = SpaceKind::categorical;
  std::vector<std::string> labels;
  std::vector<double> values;                      // ordinal only
  std::vector<int> factor_sizes;                   // product only
  std::vector<std::vector<double>> factor_values;  // product only

  int num_classes() const { return static_cast<int>(labels.size()); }
};

void validate_space(const LatentSpace& s);

LatentSpace categorical_space(std::vector<std::string> labels);
LatentSpace ordinal_space(std::vector<std::string> labels, std::vector<double> values);
LatentSpace answer_abstain_space();
LatentSpace binary_decision_space();
LatentSpace product_space(const std::vector<LatentSpace>& factors);

// Mixed-radix digit decomposition of a product-space class index.
std::vector<int> product_decode(const LatentSpace& s, int index);
int product_encode(const LatentSpace& s, const std::vector<int>& digits);
// Per-factor scalar values for a product-space class.
std::vector<double> product_value(const LatentSpace& s, int index);

// Point on the probability simplex: entries in [0, 1] summing to 1 within 1e-9.
class SimplexPoint {
 public:
  explicit SimplexPoint(std::vector<double> p);
  // Skips validation; for internal producers whose output is normalized by
  // construction.
  static SimplexPoint trusted(std::vector<double> p);

  const std::vector<double>& probs() const { return p_; }
  double operator[](size_t i) const { return p_[i]; }
  int dim() const { return static_cast<int>(p_.size()); }

 private:
  SimplexPoint() = default;
  std::vector<double> p_;
};

// Empirical push-forward from m one-hot samples: counts / m.
SimplexPoint estimate_push_forward(const std::vector<int64_t>& counts, int64_t m);

// One prediction with either raw sample counts or an explicit belief vector,
// plus the realized outcome class. Exactly one of counts/probs is non-empty.
struct PredictionRecord {
  std::string id;
  std::vector<int64_t> counts;
  std::vector<double> probs;
  int label = 0;

  bool has_counts() const { return !counts.empty(); }
};

struct Dataset {
  LatentSpace space;
  std::vector<PredictionRecord> records;

  size_t size() const { return records.size(); }
};

void validate_dataset(const Dataset& d);

// Belief vector of a record: stored probs, or counts normalized by their sum.
SimplexPoint record_belief(const LatentSpace& s, const PredictionRecord& r);

// Input for binary_set_view: a query with candidate answers, the number of
// samples that included each candidate, and whether it is truly correct.
struct AnswerCandidate {
  std::string answer;
  int64_t included_count = 0;
  bool truth_included = false;
};

struct MultiAnswerRecord {
  std::string id;
  int64_t sample_count = 0;
  std::vector<AnswerCandidate> candidates;
};

// Pools every (query, candidate) pair into one binary include/exclude record.
// Output order is lexicographic by (query id, answer).
Dataset binary_set_view(const std::vector<MultiAnswerRecord>& records);

}  // namespace taskcal
