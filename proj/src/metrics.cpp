#include "taskcal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "taskcal/decision.hpp"

namespace taskcal {

namespace {

void check_eval_inputs(const std::vector<SimplexPoint>& beliefs, const std::vector<int>& labels,
                       int c) {
  if (beliefs.empty()) throw ValidationError("metric needs at least one record");
  if (beliefs.size() != labels.size())
    throw ValidationError("beliefs and labels must have equal length");
  for (size_t i = 0; i < beliefs.size(); ++i) {
    if (beliefs[i].dim() != c) throw ValidationError("belief dimension mismatch");
    if (labels[i] < 0 || labels[i] >= c) throw ValidationError("label out of range");
  }
}

std::vector<SimplexPoint> dataset_beliefs(const Dataset& data) {
  validate_dataset(data);
  std::vector<SimplexPoint> out;
  out.reserve(data.size());
  for (const auto& r : data.records) out.push_back(record_belief(data.space, r));
  return out;
}

std::vector<int> dataset_labels(const Dataset& data) {
  std::vector<int> out;
  out.reserve(data.size());
  for (const auto& r : data.records) out.push_back(r.label);
  return out;
}

}  // namespace

double generalized_entropy(const SimplexPoint& q, const LossMatrix& loss) {
  return bayes_risk(mbr_decode(q, loss), q, loss);
}

double divergence(const SimplexPoint& q, const SimplexPoint& r, const LossMatrix& loss) {
  if (q.dim() != r.dim()) throw ValidationError("divergence needs equal dimensions");
  const int aq = mbr_decode(q, loss);
  const int ar = mbr_decode(r, loss);
  return bayes_risk(aq, r, loss) - bayes_risk(ar, r, loss);
}

uint64_t simplex_bin_count(int c, int m) {
  if (c < 1) throw ValidationError("simplex dimension must be >= 1");
  if (m < 1) throw ValidationError("bins per dimension must be >= 1");
  uint64_t out = 1;
  for (int i = 0; i + 1 < c; ++i) {
    if (out > UINT64_MAX / static_cast<uint64_t>(m))
      throw ValidationError("bin count overflows 64 bits");
    out *= static_cast<uint64_t>(m);
  }
  return out;
}

// The subdivision works on the cumulative coordinates s_i = m * (q_0+...+q_i),
// i < C-1, which map the simplex onto the region 0 <= s_0 <= ... <= s_{D-1} <= m.
// That region splits into unit-cube pieces cut by fractional-part order, the
// classical edgewise subdivision: a cell is the set of points sharing floor
// vector k and the descending order of the fractional parts. Reading the floor
// values in that descending order gives a word over {0..m-1} that is unique per
// cell, and its base-m value is the cell id. Points on cell boundaries admit
// several (floor, order) readings; the one with the smallest word is used.
uint64_t bin_index(const SimplexPoint& q, int m) {
  const int c = q.dim();
  (void)simplex_bin_count(c, m);
  const int d = c - 1;
  if (m == 1 || d == 0) return 0;

  std::vector<double> s(static_cast<size_t>(d));
  double acc = 0.0;
  for (int i = 0; i < d; ++i) {
    acc += q[static_cast<size_t>(i)];
    double v = static_cast<double>(m) * acc;
    if (v < 0.0) v = 0.0;
    if (v > static_cast<double>(m)) v = static_cast<double>(m);
    if (i > 0 && v < s[static_cast<size_t>(i - 1)]) v = s[static_cast<size_t>(i - 1)];
    s[static_cast<size_t>(i)] = v;
  }

  std::vector<int64_t> kfix(static_cast<size_t>(d));
  std::vector<double> ffix(static_cast<size_t>(d));
  // Coordinates sitting exactly on an interior grid plane can be read as
  // (floor, frac 0) or (floor - 1, frac 1). Group them by floor value; within
  // a group only the number of lowered coordinates matters for the word.
  std::map<int64_t, int> boundary_groups;  // floor value -> coordinate count
  for (int i = 0; i < d; ++i) {
    const double si = s[static_cast<size_t>(i)];
    const double fl = std::floor(si);
    if (si >= static_cast<double>(m)) {
      kfix[static_cast<size_t>(i)] = m - 1;
      ffix[static_cast<size_t>(i)] = 1.0;
    } else if (si == fl && si > 0.0) {
      boundary_groups[static_cast<int64_t>(fl)] += 1;
      kfix[static_cast<size_t>(i)] = static_cast<int64_t>(fl);
      ffix[static_cast<size_t>(i)] = 0.0;
    } else {
      kfix[static_cast<size_t>(i)] = static_cast<int64_t>(fl);
      ffix[static_cast<size_t>(i)] = si - fl;
    }
  }

  std::vector<std::pair<int64_t, int>> groups(boundary_groups.begin(), boundary_groups.end());
  uint64_t combos = 1;
  for (const auto& [value, size] : groups) {
    (void)value;
    combos *= static_cast<uint64_t>(size) + 1;
    if (combos > 4096) break;
  }

  struct Entry {
    double f;
    int64_t k;
    int pos;
  };
  // lowered[g] coordinates of group g are read as (value-1, frac 1).
  auto build_word = [&](const std::vector<int>& lowered) {
    std::vector<Entry> entries;
    entries.reserve(static_cast<size_t>(d));
    std::map<int64_t, int> remaining;
    for (size_t g = 0; g < groups.size(); ++g) remaining[groups[g].first] = lowered[g];
    for (int i = 0; i < d; ++i) {
      int64_t k = kfix[static_cast<size_t>(i)];
      double f = ffix[static_cast<size_t>(i)];
      const double si = s[static_cast<size_t>(i)];
      if (f == 0.0 && si > 0.0 && si < static_cast<double>(m) && si == std::floor(si)) {
        auto it = remaining.find(k);
        if (it != remaining.end() && it->second > 0) {
          it->second -= 1;
          k -= 1;
          f = 1.0;
        }
      }
      entries.push_back({f, k, i});
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
      if (a.f != b.f) return a.f > b.f;
      if (a.k != b.k) return a.k < b.k;
      return a.pos > b.pos;
    });
    std::vector<int64_t> word(static_cast<size_t>(d));
    for (int j = 0; j < d; ++j) word[static_cast<size_t>(j)] = entries[static_cast<size_t>(j)].k;
    return word;
  };

  std::vector<int> lowered(groups.size(), 0);
  std::vector<int64_t> best;
  if (combos > 4096) {
    // Degenerate inputs with very many grid-plane hits: lower everything.
    for (size_t g = 0; g < groups.size(); ++g) lowered[g] = groups[g].second;
    best = build_word(lowered);
  } else {
    bool done = false;
    while (!done) {
      std::vector<int64_t> word = build_word(lowered);
      if (best.empty() || word < best) best = word;
      done = true;
      for (size_t g = 0; g < groups.size(); ++g) {
        if (lowered[g] < groups[g].second) {
          lowered[g] += 1;
          for (size_t h = 0; h < g; ++h) lowered[h] = 0;
          done = false;
          break;
        }
      }
    }
  }

  uint64_t id = 0;
  for (int64_t v : best) id = id * static_cast<uint64_t>(m) + static_cast<uint64_t>(v);
  return id;
}

double tce_binned(const std::vector<SimplexPoint>& beliefs, const std::vector<int>& labels,
                  const LossMatrix& loss, const TceBinConfig& config) {
  check_eval_inputs(beliefs, labels, loss.c);
  const int m = config.bins_per_dim;
  if (m < 1) throw ValidationError("bins per dimension must be >= 1");
  const size_t n = beliefs.size();
  const size_t c = static_cast<size_t>(loss.c);

  std::vector<uint64_t> ids(n);
  struct Bin {
    std::vector<int64_t> label_counts;
    int64_t size = 0;
  };
  std::unordered_map<uint64_t, Bin> bins;
  for (size_t i = 0; i < n; ++i) {
    ids[i] = bin_index(beliefs[i], m);
    Bin& b = bins[ids[i]];
    if (b.label_counts.empty()) b.label_counts.assign(c, 0);
    b.label_counts[static_cast<size_t>(labels[i])] += 1;
    b.size += 1;
  }

  std::unordered_map<uint64_t, SimplexPoint> means;
  means.reserve(bins.size());
  for (const auto& [id, b] : bins) {
    std::vector<double> mean(c);
    for (size_t j = 0; j < c; ++j)
      mean[j] = static_cast<double>(b.label_counts[j]) / static_cast<double>(b.size);
    means.emplace(id, SimplexPoint(std::move(mean)));
  }

  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) acc += divergence(beliefs[i], means.at(ids[i]), loss);
  return acc / static_cast<double>(n);
}

double tce_binned(const Dataset& data, const LossMatrix& loss, const TceBinConfig& config) {
  return tce_binned(dataset_beliefs(data), dataset_labels(data), loss, config);
}

std::vector<SimplexPoint> kde_conditional(const std::vector<SimplexPoint>& beliefs,
                                          const std::vector<int>& labels, double bandwidth,
                                          double epsilon) {
  if (beliefs.size() < 2)
    throw ValidationError("kernel conditional estimate needs at least 2 records");
  if (beliefs.size() != labels.size())
    throw ValidationError("beliefs and labels must have equal length");
  if (!(bandwidth > 0.0)) throw ValidationError("bandwidth must be positive");
  if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
  const size_t n = beliefs.size();
  const size_t c = static_cast<size_t>(beliefs[0].dim());
  for (const auto& q : beliefs)
    if (static_cast<size_t>(q.dim()) != c) throw ValidationError("belief dimension mismatch");

  // Per kernel center j: concentration alpha_j = (q_j + epsilon)/bandwidth + 1,
  // log normalizer lgamma(sum alpha) - sum lgamma(alpha).
  std::vector<std::vector<double>> am1(n, std::vector<double>(c));  // alpha - 1
  std::vector<double> lognorm(n);
  std::vector<std::vector<double>> logq(n, std::vector<double>(c));
  for (size_t j = 0; j < n; ++j) {
    double asum = 0.0;
    double lg = 0.0;
    for (size_t k = 0; k < c; ++k) {
      const double a = (beliefs[j][k] + epsilon) / bandwidth + 1.0;
      am1[j][k] = a - 1.0;
      asum += a;
      lg += std::lgamma(a);
    }
    lognorm[j] = std::lgamma(asum) - lg;
    for (size_t k = 0; k < c; ++k) logq[j][k] = std::log(beliefs[j][k] + epsilon);
  }

  std::vector<SimplexPoint> out;
  out.reserve(n);
  std::vector<double> logw(n);
  for (size_t i = 0; i < n; ++i) {
    double maxlw = -HUGE_VAL;
    for (size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double lw = lognorm[j];
      for (size_t k = 0; k < c; ++k) lw += am1[j][k] * logq[i][k];
      logw[j] = lw;
      if (lw > maxlw) maxlw = lw;
    }
    std::vector<double> sums(c, 0.0);
    double total = 0.0;
    for (size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double w = std::exp(logw[j] - maxlw);
      sums[static_cast<size_t>(labels[j])] += w;
      total += w;
    }
    if (!(total > 0.0) || !std::isfinite(total))
      throw NumericError("kernel weights degenerate at record " + std::to_string(i));
    for (auto& v : sums) v /= total;
    out.push_back(SimplexPoint::trusted(std::move(sums)));
  }
  return out;
}

double tce_kde(const std::vector<SimplexPoint>& beliefs, const std::vector<int>& labels,
               const LossMatrix& loss, double bandwidth, double epsilon) {
  check_eval_inputs(beliefs, labels, loss.c);
  const std::vector<SimplexPoint> cond = kde_conditional(beliefs, labels, bandwidth, epsilon);
  double acc = 0.0;
  for (size_t i = 0; i < beliefs.size(); ++i) acc += divergence(beliefs[i], cond[i], loss);
  return acc / static_cast<double>(beliefs.size());
}

double tce_kde(const Dataset& data, const LossMatrix& loss, double bandwidth, double epsilon) {
  return tce_kde(dataset_beliefs(data), dataset_labels(data), loss, bandwidth, epsilon);
}

double ece_confidence(const std::vector<SimplexPoint>& beliefs, const std::vector<int>& labels,
                      int n_bins) {
  if (beliefs.empty()) throw ValidationError("metric needs at least one record");
  if (beliefs.size() != labels.size())
    throw ValidationError("beliefs and labels must have equal length");
  if (n_bins < 1) throw ValidationError("ece needs at least one bin");
  std::vector<double> conf_sum(static_cast<size_t>(n_bins), 0.0);
  std::vector<double> acc_sum(static_cast<size_t>(n_bins), 0.0);
  for (size_t i = 0; i < beliefs.size(); ++i) {
    const int top = argmax_policy(beliefs[i]);
    const double conf = beliefs[i][static_cast<size_t>(top)];
    int b = static_cast<int>(conf * n_bins);
    if (b >= n_bins) b = n_bins - 1;
    if (b < 0) b = 0;
    conf_sum[static_cast<size_t>(b)] += conf;
    acc_sum[static_cast<size_t>(b)] += (top == labels[i]) ? 1.0 : 0.0;
  }
  double out = 0.0;
  for (int b = 0; b < n_bins; ++b)
    out += std::fabs(acc_sum[static_cast<size_t>(b)] - conf_sum[static_cast<size_t>(b)]);
  return out / static_cast<double>(beliefs.size());
}

double ece_confidence(const Dataset& data, int n_bins) {
  return ece_confidence(dataset_beliefs(data), dataset_labels(data), n_bins);
}

double expected_task_loss(const std::vector<int>& labels, const std::vector<int>& actions,
                          const LossMatrix& loss) {
  if (labels.empty()) throw ValidationError("metric needs at least one record");
  if (labels.size() != actions.size())
    throw ValidationError("labels and actions must have equal length");
  double acc = 0.0;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= loss.c) throw ValidationError("label out of range");
    if (actions[i] < 0 || actions[i] >= loss.c) throw ValidationError("action out of range");
    acc += loss.at(labels[i], actions[i]);
  }
  return acc / static_cast<double>(labels.size());
}

double expected_task_loss(const Dataset& data, const DecisionRuleOutput& decisions,
                          const LossMatrix& loss) {
  validate_dataset(data);
  if (decisions.actions.size() != data.size())
    throw ValidationError("decisions must cover every record");
  std::vector<int> labels;
  labels.reserve(data.size());
  for (const auto& r : data.records) labels.push_back(r.label);
  return expected_task_loss(labels, decisions.actions, loss);
}

std::vector<std::vector<int64_t>> action_movement_matrix(const Dataset& data,
                                                         const Calibrator& calibrator,
                                                         const LossMatrix& loss) {
  validate_dataset(data);
  validate_calibrator(calibrator);
  const int c = data.space.num_classes();
  if (loss.c != c || calibrator.dimension != c)
    throw ValidationError("dimension mismatch between dataset, loss and calibrator");
  std::vector<std::vector<int64_t>> counts(static_cast<size_t>(c),
                                           std::vector<int64_t>(static_cast<size_t>(c), 0));
  for (const auto& r : data.records) {
    const SimplexPoint q = record_belief(data.space, r);
    const int before = mbr_decode(q, loss);
    const int after = mbr_decode(apply(calibrator, q), loss);
    counts[static_cast<size_t>(before)][static_cast<size_t>(after)] += 1;
  }
  return counts;
}

}  // namespace taskcal
