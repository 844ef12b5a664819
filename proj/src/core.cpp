#include "taskcal/core.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

namespace taskcal {

const char* space_kind_name(SpaceKind k) {
  switch (k) {
    case SpaceKind::categorical: return "categorical";
    case SpaceKind::ordinal: return "ordinal";
    case SpaceKind::answer_abstain: return "answer_abstain";
    case SpaceKind::product: return "product";
    case SpaceKind::binary_decision: return "binary_decision";
  }
  return "unknown";
}

SpaceKind space_kind_from_name(const std::string& name) {
  if (name == "categorical") return SpaceKind::categorical;
  if (name == "ordinal") return SpaceKind::ordinal;
  if (name == "answer_abstain") return SpaceKind::answer_abstain;
  if (name == "product") return SpaceKind::product;
  if (name == "binary_decision") return SpaceKind::binary_decision;
  throw ValidationError("unknown space kind: " + name);
}

void validate_space(const LatentSpace& s) {
  const int c = s.num_classes();
  if (c < 2) throw ValidationError("latent space needs at least 2 classes");
  std::set<std::string> seen;
  for (const auto& l : s.labels) {
    if (!seen.insert(l).second) throw ValidationError("duplicate class label: " + l);
  }
  switch (s.kind) {
    case SpaceKind::categorical:
      break;
    case SpaceKind::ordinal: {
      if (static_cast<int>(s.values.size()) != c)
        throw ValidationError("ordinal space needs one value per class");
      for (int i = 0; i + 1 < c; ++i) {
        if (!(s.values[i] < s.values[i + 1]))
          throw ValidationError("ordinal values must be strictly increasing");
      }
      for (double v : s.values) {
        if (!std::isfinite(v)) throw ValidationError("ordinal values must be finite");
      }
      break;
    }
    case SpaceKind::answer_abstain:
      if (c != 2) throw ValidationError("answer_abstain space must have exactly 2 classes");
      break;
    case SpaceKind::binary_decision:
      if (c != 2) throw ValidationError("binary_decision space must have exactly 2 classes");
      break;
    case SpaceKind::product: {
      if (s.factor_sizes.size() < 2)
        throw ValidationError("product space needs at least 2 factors");
      if (s.factor_values.size() != s.factor_sizes.size())
        throw ValidationError("product space needs one value table per factor");
      int64_t prod = 1;
      for (size_t k = 0; k < s.factor_sizes.size(); ++k) {
        const int fk = s.factor_sizes[k];
        if (fk < 2) throw ValidationError("product factors need at least 2 classes");
        if (static_cast<int>(s.factor_values[k].size()) != fk)
          throw ValidationError("factor value table size mismatch");
        for (int i = 0; i + 1 < fk; ++i) {
          if (!(s.factor_values[k][i] < s.factor_values[k][i + 1]))
            throw ValidationError("factor values must be strictly increasing");
        }
        prod *= fk;
        if (prod > (1 << 24)) throw ValidationError("product space too large");
      }
      if (prod != c) throw ValidationError("product space size must equal product of factor sizes");
      break;
    }
  }
}

LatentSpace categorical_space(std::vector<std::string> labels) {
  LatentSpace s;
  s.kind = SpaceKind::categorical;
  s.labels = std::move(labels);
  validate_space(s);
  return s;
}

LatentSpace ordinal_space(std::vector<std::string> labels, std::vector<double> values) {
  LatentSpace s;
  s.kind = SpaceKind::ordinal;
  s.labels = std::move(labels);
  s.values = std::move(values);
  validate_space(s);
  return s;
}

LatentSpace answer_abstain_space() {
  LatentSpace s;
  s.kind = SpaceKind::answer_abstain;
  s.labels = {"answer", "abstain"};
  validate_space(s);
  return s;
}

LatentSpace binary_decision_space() {
  LatentSpace s;
  s.kind = SpaceKind::binary_decision;
  s.labels = {"include", "exclude"};
  validate_space(s);
  return s;
}

LatentSpace product_space(const std::vector<LatentSpace>& factors) {
  if (factors.size() < 2) throw ValidationError("product_space needs at least 2 factors");
  LatentSpace s;
  s.kind = SpaceKind::product;
  for (const auto& f : factors) {
    if (f.kind != SpaceKind::ordinal)
      throw ValidationError("product_space factors must be ordinal");
    validate_space(f);
    s.factor_sizes.push_back(f.num_classes());
    s.factor_values.push_back(f.values);
  }
  int64_t c = 1;
  for (int fk : s.factor_sizes) {
    c *= fk;
    if (c > (1 << 24)) throw ValidationError("product space too large");
  }
  s.labels.reserve(static_cast<size_t>(c));
  for (int64_t i = 0; i < c; ++i) {
    // Decode digits with the leftmost factor most significant.
    std::string label = "(";
    int64_t rest = i;
    std::vector<int> digits(factors.size());
    for (size_t k = factors.size(); k-- > 0;) {
      digits[k] = static_cast<int>(rest % s.factor_sizes[k]);
      rest /= s.factor_sizes[k];
    }
    for (size_t k = 0; k < factors.size(); ++k) {
      if (k) label += ",";
      label += factors[k].labels[static_cast<size_t>(digits[k])];
    }
    label += ")";
    s.labels.push_back(std::move(label));
  }
  validate_space(s);
  return s;
}

std::vector<int> product_decode(const LatentSpace& s, int index) {
  if (s.kind != SpaceKind::product) throw ValidationError("product_decode needs a product space");
  if (index < 0 || index >= s.num_classes()) throw ValidationError("class index out of range");
  std::vector<int> digits(s.factor_sizes.size());
  int rest = index;
  for (size_t k = s.factor_sizes.size(); k-- > 0;) {
    digits[k] = rest % s.factor_sizes[k];
    rest /= s.factor_sizes[k];
  }
  return digits;
}

int product_encode(const LatentSpace& s, const std::vector<int>& digits) {
  if (s.kind != SpaceKind::product) throw ValidationError("product_encode needs a product space");
  if (digits.size() != s.factor_sizes.size())
    throw ValidationError("digit count must match factor count");
  int index = 0;
  for (size_t k = 0; k < digits.size(); ++k) {
    if (digits[k] < 0 || digits[k] >= s.factor_sizes[k])
      throw ValidationError("factor digit out of range");
    index = index * s.factor_sizes[k] + digits[k];
  }
  return index;
}

std::vector<double> product_value(const LatentSpace& s, int index) {
  const std::vector<int> digits = product_decode(s, index);
  std::vector<double> v(digits.size());
  for (size_t k = 0; k < digits.size(); ++k)
    v[k] = s.factor_values[k][static_cast<size_t>(digits[k])];
  return v;
}

SimplexPoint::SimplexPoint(std::vector<double> p) {
  if (p.empty()) throw ValidationError("simplex point must be non-empty");
  double sum = 0.0;
  for (double v : p) {
    if (!std::isfinite(v)) throw ValidationError("simplex entries must be finite");
    if (v < 0.0 || v > 1.0) throw ValidationError("simplex entries must lie in [0, 1]");
    sum += v;
  }
  if (std::fabs(sum - 1.0) > 1e-9)
    throw ValidationError("simplex entries must sum to 1 within 1e-9");
  p_ = std::move(p);
}

SimplexPoint SimplexPoint::trusted(std::vector<double> p) {
  SimplexPoint q;
  q.p_ = std::move(p);
  return q;
}

SimplexPoint estimate_push_forward(const std::vector<int64_t>& counts, int64_t m) {
  if (counts.empty()) throw ValidationError("push-forward needs at least one class count");
  if (m < 1) throw ValidationError("push-forward needs at least one sample");
  int64_t sum = 0;
  for (int64_t c : counts) {
    if (c < 0) throw ValidationError("sample counts must be non-negative");
    sum += c;
  }
  if (sum != m) throw ValidationError("sample counts must sum to the sample total");
  std::vector<double> p(counts.size());
  const double dm = static_cast<double>(m);
  for (size_t i = 0; i < counts.size(); ++i) p[i] = static_cast<double>(counts[i]) / dm;
  return SimplexPoint(std::move(p));
}

void validate_dataset(const Dataset& d) {
  validate_space(d.space);
  const int c = d.space.num_classes();
  for (size_t i = 0; i < d.records.size(); ++i) {
    const auto& r = d.records[i];
    const std::string where = "record " + std::to_string(i) + " (" + r.id + "): ";
    if (r.counts.empty() == r.probs.empty())
      throw ValidationError(where + "exactly one of counts/probs required");
    if (r.label < 0 || r.label >= c) throw ValidationError(where + "label out of range");
    if (r.has_counts()) {
      if (static_cast<int>(r.counts.size()) != c)
        throw ValidationError(where + "counts length must equal class count");
      int64_t sum = 0;
      for (int64_t v : r.counts) {
        if (v < 0) throw ValidationError(where + "counts must be non-negative");
        sum += v;
      }
      if (sum < 1) throw ValidationError(where + "counts must sum to at least 1");
    } else {
      if (static_cast<int>(r.probs.size()) != c)
        throw ValidationError(where + "probs length must equal class count");
      double sum = 0.0;
      for (double v : r.probs) {
        if (!std::isfinite(v) || v < 0.0) throw ValidationError(where + "probs must be finite and non-negative");
        sum += v;
      }
      if (std::fabs(sum - 1.0) > 1e-6)
        throw ValidationError(where + "probs must sum to 1 within 1e-6");
    }
  }
}

SimplexPoint record_belief(const LatentSpace& s, const PredictionRecord& r) {
  const int c = s.num_classes();
  if (r.has_counts()) {
    if (static_cast<int>(r.counts.size()) != c)
      throw ValidationError("record counts length must equal class count");
    int64_t sum = 0;
    for (int64_t v : r.counts) sum += v;
    return estimate_push_forward(r.counts, sum);
  }
  if (static_cast<int>(r.probs.size()) != c)
    throw ValidationError("record probs length must equal class count");
  return SimplexPoint(r.probs);
}

Dataset binary_set_view(const std::vector<MultiAnswerRecord>& records) {
  struct Row {
    std::string query;
    std::string answer;
    int64_t included = 0;
    int64_t total = 0;
    bool truth = false;
  };
  std::vector<Row> rows;
  for (const auto& r : records) {
    if (r.sample_count < 1)
      throw ValidationError("multi-answer record " + r.id + ": sample_count must be >= 1");
    std::set<std::string> seen;
    for (const auto& cand : r.candidates) {
      if (!seen.insert(cand.answer).second)
        throw ValidationError("multi-answer record " + r.id + ": duplicate answer " + cand.answer);
      if (cand.included_count < 0 || cand.included_count > r.sample_count)
        throw ValidationError("multi-answer record " + r.id + ": inclusion count exceeds sample count");
      rows.push_back({r.id, cand.answer, cand.included_count, r.sample_count, cand.truth_included});
    }
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return std::tie(a.query, a.answer) < std::tie(b.query, b.answer);
  });
  Dataset out;
  out.space = binary_decision_space();
  out.records.reserve(rows.size());
  for (const auto& row : rows) {
    PredictionRecord rec;
    rec.id = row.query + "#" + row.answer;
    rec.counts = {row.included, row.total - row.included};
    rec.label = row.truth ? 0 : 1;
    out.records.push_back(std::move(rec));
  }
  return out;
}

}  // namespace taskcal
