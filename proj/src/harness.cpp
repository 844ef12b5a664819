#include "taskcal/harness.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "taskcal/decision.hpp"
#include "taskcal/rng.hpp"

namespace taskcal {

namespace {

using ordered_json = nlohmann::ordered_json;

// Row-major inverse by Gauss-Jordan elimination with partial pivoting.
std::vector<double> invert_matrix(const std::vector<double>& a, int c) {
  const size_t n = static_cast<size_t>(c);
  std::vector<double> m = a;
  std::vector<double> inv(n * n, 0.0);
  for (size_t i = 0; i < n; ++i) inv[i * n + i] = 1.0;
  for (size_t col = 0; col < n; ++col) {
    size_t pivot = col;
    for (size_t r = col + 1; r < n; ++r)
      if (std::fabs(m[r * n + col]) > std::fabs(m[pivot * n + col])) pivot = r;
    if (std::fabs(m[pivot * n + col]) < 1e-12)
      throw ValidationError("distortion weight matrix is singular");
    if (pivot != col) {
      for (size_t j = 0; j < n; ++j) {
        std::swap(m[pivot * n + j], m[col * n + j]);
        std::swap(inv[pivot * n + j], inv[col * n + j]);
      }
    }
    const double d = m[col * n + col];
    for (size_t j = 0; j < n; ++j) {
      m[col * n + j] /= d;
      inv[col * n + j] /= d;
    }
    for (size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = m[r * n + col];
      if (f == 0.0) continue;
      for (size_t j = 0; j < n; ++j) {
        m[r * n + j] -= f * m[col * n + j];
        inv[r * n + j] -= f * inv[col * n + j];
      }
    }
  }
  return inv;
}

bool is_identity_map(const DistortionSpec& spec, int c) {
  for (int i = 0; i < c; ++i) {
    if (spec.bias[static_cast<size_t>(i)] != 0.0) return false;
    for (int j = 0; j < c; ++j) {
      const double want = (i == j) ? 1.0 : 0.0;
      if (spec.weight[static_cast<size_t>(i * c + j)] != want) return false;
    }
  }
  return true;
}

void validate_distortion(const DistortionSpec& spec, int c) {
  if (c < 2) throw ValidationError("distortion needs at least 2 classes");
  if (!(spec.epsilon > 0.0)) throw ValidationError("distortion epsilon must be positive");
  if (spec.kind == DistortionKind::dirichlet_map) {
    if (spec.weight.size() != static_cast<size_t>(c) * static_cast<size_t>(c))
      throw ValidationError("distortion weight must be a c*c matrix");
    if (spec.bias.size() != static_cast<size_t>(c))
      throw ValidationError("distortion bias must have one entry per class");
    for (double v : spec.weight)
      if (!std::isfinite(v)) throw ValidationError("distortion weight must be finite");
    for (double v : spec.bias)
      if (!std::isfinite(v)) throw ValidationError("distortion bias must be finite");
  } else {
    if (spec.group.size() != static_cast<size_t>(c))
      throw ValidationError("distortion group must have one id per class");
  }
}

MetricReport make_report(double mean_task_loss, bool with_bas, double tce, double ece,
                         int64_t n) {
  MetricReport r;
  r.mean_task_loss = mean_task_loss;
  if (with_bas) r.bas_score = -mean_task_loss;
  r.tce = tce;
  r.ece = ece;
  r.n = n;
  return r;
}

ordered_json metric_json(const MetricReport& r) {
  ordered_json j;
  j["mean_task_loss"] = r.mean_task_loss;
  if (r.bas_score) j["bas_score"] = *r.bas_score;
  j["tce"] = r.tce;
  j["ece"] = r.ece;
  j["n"] = r.n;
  return j;
}

ordered_json config_json(const ExperimentResult& result) {
  const ExperimentConfig& c = result.config;
  ordered_json j;
  j["folds"] = c.folds;
  j["seed"] = c.seed;
  j["family"] = calibrator_family_name(c.family);
  ordered_json fitj;
  fitj["max_iterations"] = c.fit.max_iterations;
  fitj["gradient_tolerance"] = c.fit.gradient_tolerance;
  fitj["initial_step"] = c.fit.initial_step;
  fitj["seed"] = c.fit.seed;
  fitj["epsilon"] = c.fit.epsilon;
  j["fit"] = fitj;
  ordered_json loss;
  loss["kind"] = loss_kind_name(result.loss.kind);
  if (result.loss.kind == LossKind::bas) loss["t"] = result.loss.t;
  j["loss"] = loss;
  j["tce_bins_per_dim"] = c.tce.bins_per_dim;
  j["ece_bins"] = c.ece_bins;
  return j;
}

}  // namespace

uint64_t fnv1a64(const std::string& text) {
  uint64_t h = 14695981039346656037ULL;
  for (unsigned char b : text) {
    h ^= static_cast<uint64_t>(b);
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<std::vector<size_t>> kfold_split(size_t n, int folds, uint64_t seed) {
  if (folds < 2) throw ValidationError("cross validation needs at least 2 folds");
  if (static_cast<size_t>(folds) > n)
    throw ValidationError("cross validation needs at least one record per fold");
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<std::vector<size_t>> out(static_cast<size_t>(folds));
  const size_t base = n / static_cast<size_t>(folds);
  const size_t rem = n % static_cast<size_t>(folds);
  size_t at = 0;
  for (size_t f = 0; f < static_cast<size_t>(folds); ++f) {
    const size_t len = base + (f < rem ? 1 : 0);
    out[f].assign(order.begin() + static_cast<ptrdiff_t>(at),
                  order.begin() + static_cast<ptrdiff_t>(at + len));
    at += len;
  }
  return out;
}

DistortionSpec preset_distortion(const std::string& name, int c) {
  if (c < 2) throw ValidationError("distortion needs at least 2 classes");
  const size_t n = static_cast<size_t>(c);
  DistortionSpec spec;
  auto diagonal = [&](double v) {
    spec.weight.assign(n * n, 0.0);
    for (size_t i = 0; i < n; ++i) spec.weight[i * n + i] = v;
    spec.bias.assign(n, 0.0);
  };
  if (name == "identity") {
    diagonal(1.0);
  } else if (name == "overconfident") {
    // Sharpened beliefs plus a class-dependent tilt, so that raw MBR actions
    // actually differ from the calibrated ones.
    diagonal(0.5);
    for (size_t i = 0; i < n; ++i)
      spec.bias[i] = 0.6 * (1.0 - 2.0 * static_cast<double>(i) / static_cast<double>(c - 1));
  } else if (name == "underconfident") {
    diagonal(2.0);
  } else if (name == "grouped") {
    spec.kind = DistortionKind::grouping;
    spec.group.assign(n, 0);
    for (size_t i = 1; i < n; ++i) spec.group[i] = static_cast<int>(i) - 1;
    if (c == 2) spec.group = {0, 0};
  } else {
    throw ValidationError("unknown distortion preset: " + name);
  }
  return spec;
}

SimplexPoint distort(const DistortionSpec& spec, const SimplexPoint& p_star) {
  const int c = p_star.dim();
  validate_distortion(spec, c);
  const size_t n = static_cast<size_t>(c);

  if (spec.kind == DistortionKind::grouping) {
    std::map<int, double> sum;
    std::map<int, int> count;
    for (size_t i = 0; i < n; ++i) {
      sum[spec.group[i]] += p_star[i];
      count[spec.group[i]] += 1;
    }
    std::vector<double> q(n);
    for (size_t i = 0; i < n; ++i)
      q[i] = sum[spec.group[i]] / static_cast<double>(count[spec.group[i]]);
    return SimplexPoint(std::move(q));
  }

  if (is_identity_map(spec, c)) return p_star;

  for (size_t i = 0; i < n; ++i)
    if (!(p_star[i] > 0.0)) throw ValidationError("distortion needs an interior belief");

  // Want softmax(W log(q+eps) + b) = p. Up to the softmax shift s this means
  // log(q+eps) = Winv (log p - b + s*1), so q_i = exp(u_i + s*w_i) - eps with
  // u = Winv (log p - b) and w = Winv 1. With positive w the total is
  // monotone in s; bisect on sum(q) = 1.
  const std::vector<double> winv = invert_matrix(spec.weight, c);
  std::vector<double> u(n, 0.0);
  std::vector<double> w(n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) {
      u[i] += winv[i * n + j] * (std::log(p_star[j]) - spec.bias[j]);
      w[i] += winv[i * n + j];
    }
  }
  for (size_t i = 0; i < n; ++i)
    if (!(w[i] > 0.0))
      throw ValidationError("distortion weight inverse must have positive row sums");

  const double target = 1.0 + static_cast<double>(c) * spec.epsilon;
  auto total = [&](double s) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const double arg = u[i] + s * w[i];
      if (arg > 700.0) return HUGE_VAL;
      acc += std::exp(arg);
    }
    return acc;
  };

  double lo = 0.0;
  double hi = 0.0;
  int guard = 0;
  while (total(lo) > target) {
    lo = lo * 2.0 - 1.0;
    if (++guard > 200) throw NumericError("distortion shift search failed to bracket");
  }
  guard = 0;
  while (total(hi) < target) {
    hi = hi * 2.0 + 1.0;
    if (++guard > 200) throw NumericError("distortion shift search failed to bracket");
  }
  for (int it = 0; it < 300 && hi - lo > 1e-16 * (1.0 + std::fabs(lo) + std::fabs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (total(mid) < target)
      lo = mid;
    else
      hi = mid;
  }
  const double s = 0.5 * (lo + hi);

  std::vector<double> q(n);
  double qsum = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double v = std::exp(u[i] + s * w[i]) - spec.epsilon;
    if (v < 0.0) v = 0.0;
    if (v > 1.0) v = 1.0;
    q[i] = v;
    qsum += v;
  }
  if (!(qsum > 0.0) || !std::isfinite(qsum))
    throw NumericError("distortion produced a degenerate belief");
  for (auto& v : q) v /= qsum;
  return SimplexPoint(std::move(q));
}

SyntheticData generate_synthetic(const LatentSpace& space, size_t n, const DistortionSpec& spec,
                                 uint64_t seed) {
  validate_space(space);
  if (n < 1) throw ValidationError("synthetic data needs at least one record");
  const int c = space.num_classes();
  validate_distortion(spec, c);

  const double eta = 1e-4;  // interior pull, keeps every log finite
  Rng rng(seed);
  SyntheticData out;
  out.distortion = spec;
  out.data.space = space;
  out.data.records.reserve(n);
  out.p_star.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    std::vector<double> p = rng.dirichlet_uniform(c);
    for (auto& v : p) v = (1.0 - eta) * v + eta / static_cast<double>(c);
    SimplexPoint pstar(std::move(p));
    const int label = rng.categorical(pstar.probs());
    SimplexPoint q = distort(spec, pstar);
    PredictionRecord rec;
    rec.id = "synth-" + std::to_string(i);
    rec.probs = q.probs();
    rec.label = label;
    out.data.records.push_back(std::move(rec));
    out.p_star.push_back(std::move(pstar));
  }
  validate_dataset(out.data);
  return out;
}

ExperimentResult run_experiment(const Dataset& data, const LossSpec& loss,
                                const ExperimentConfig& config,
                                const std::vector<SimplexPoint>* p_star) {
  validate_dataset(data);
  if (config.ece_bins < 1) throw ValidationError("ece needs at least one bin");
  const int c = data.space.num_classes();
  const size_t n = data.size();
  const LossMatrix lossmat = build_loss_matrix(data.space, loss);
  const bool with_bas = loss.kind == LossKind::bas;
  if (p_star) {
    if (p_star->size() != n)
      throw ValidationError("true posteriors must match the dataset length");
    for (const auto& p : *p_star)
      if (p.dim() != c) throw ValidationError("true posterior dimension mismatch");
  }

  std::vector<SimplexPoint> raw;
  std::vector<int> labels;
  raw.reserve(n);
  labels.reserve(n);
  for (const auto& r : data.records) {
    raw.push_back(record_belief(data.space, r));
    labels.push_back(r.label);
  }
  std::vector<int> actions_before(n);
  for (size_t i = 0; i < n; ++i) actions_before[i] = mbr_decode(raw[i], lossmat);

  const std::vector<std::vector<size_t>> splits = kfold_split(n, config.folds, config.seed);

  ExperimentResult result;
  result.config = config;
  result.loss = loss;
  result.num_classes = c;
  result.num_records = static_cast<int64_t>(n);

  std::vector<SimplexPoint> calibrated = raw;  // every slot is overwritten below
  std::vector<char> held(n, 0);
  struct FoldFit {
    double final_nll;
    double gradient_norm;
    int iterations;
    bool converged;
  };
  std::vector<FoldFit> fold_fits;
  fold_fits.reserve(splits.size());
  for (const auto& fold : splits) {
    std::fill(held.begin(), held.end(), 0);
    for (size_t idx : fold) held[idx] = 1;
    Dataset train;
    train.space = data.space;
    train.records.reserve(n - fold.size());
    for (size_t i = 0; i < n; ++i)
      if (!held[i]) train.records.push_back(data.records[i]);
    const FitResult fr = fit(train, config.family, config.fit);
    for (size_t idx : fold) calibrated[idx] = apply(fr.calibrator, raw[idx]);
    fold_fits.push_back({fr.final_nll, fr.gradient_norm, fr.iterations, fr.converged});
  }

  std::vector<int> actions_after(n);
  for (size_t i = 0; i < n; ++i) actions_after[i] = mbr_decode(calibrated[i], lossmat);

  const double tce_before = tce_binned(raw, labels, lossmat, config.tce);
  const double tce_after = tce_binned(calibrated, labels, lossmat, config.tce);
  const double ece_before = ece_confidence(raw, labels, config.ece_bins);
  const double ece_after = ece_confidence(calibrated, labels, config.ece_bins);

  result.folds.reserve(splits.size());
  for (size_t f = 0; f < splits.size(); ++f) {
    const auto& fold = splits[f];
    std::vector<int> fl, fa_before, fa_after;
    fl.reserve(fold.size());
    fa_before.reserve(fold.size());
    fa_after.reserve(fold.size());
    for (size_t idx : fold) {
      fl.push_back(labels[idx]);
      fa_before.push_back(actions_before[idx]);
      fa_after.push_back(actions_after[idx]);
    }
    FoldResult fr;
    fr.n = static_cast<int64_t>(fold.size());
    fr.final_nll = fold_fits[f].final_nll;
    fr.gradient_norm = fold_fits[f].gradient_norm;
    fr.iterations = fold_fits[f].iterations;
    fr.converged = fold_fits[f].converged;
    fr.before = make_report(expected_task_loss(fl, fa_before, lossmat), with_bas, tce_before,
                            ece_before, fr.n);
    fr.after = make_report(expected_task_loss(fl, fa_after, lossmat), with_bas, tce_after,
                           ece_after, fr.n);
    result.folds.push_back(std::move(fr));
  }

  auto aggregate = [&](bool after) {
    AggregateReport agg;
    const size_t k = result.folds.size();
    double sum_loss = 0.0, sum_tce = 0.0, sum_ece = 0.0;
    int64_t sum_n = 0;
    for (const auto& f : result.folds) {
      const MetricReport& m = after ? f.after : f.before;
      sum_loss += m.mean_task_loss;
      sum_tce += m.tce;
      sum_ece += m.ece;
      sum_n += m.n;
    }
    const double kd = static_cast<double>(k);
    agg.mean = make_report(sum_loss / kd, with_bas, sum_tce / kd, sum_ece / kd, sum_n);
    double var_loss = 0.0, var_tce = 0.0, var_ece = 0.0;
    for (const auto& f : result.folds) {
      const MetricReport& m = after ? f.after : f.before;
      var_loss += (m.mean_task_loss - agg.mean.mean_task_loss) *
                  (m.mean_task_loss - agg.mean.mean_task_loss);
      var_tce += (m.tce - agg.mean.tce) * (m.tce - agg.mean.tce);
      var_ece += (m.ece - agg.mean.ece) * (m.ece - agg.mean.ece);
    }
    agg.stddev = make_report(std::sqrt(var_loss / kd), with_bas, std::sqrt(var_tce / kd),
                             std::sqrt(var_ece / kd), sum_n);
    if (agg.stddev.bas_score) agg.stddev.bas_score = std::sqrt(var_loss / kd);
    return agg;
  };
  result.before = aggregate(false);
  result.after = aggregate(true);

  result.movement.assign(static_cast<size_t>(c),
                         std::vector<int64_t>(static_cast<size_t>(c), 0));
  for (size_t i = 0; i < n; ++i)
    result.movement[static_cast<size_t>(actions_before[i])]
                   [static_cast<size_t>(actions_after[i])] += 1;

  if (p_star) {
    double before = 0.0, after = 0.0;
    for (size_t i = 0; i < n; ++i) {
      before += divergence(raw[i], (*p_star)[i], lossmat);
      after += divergence(calibrated[i], (*p_star)[i], lossmat);
    }
    result.refinement_before = before / static_cast<double>(n);
    result.refinement_after = after / static_cast<double>(n);
  }
  return result;
}

std::string emit_report(const ExperimentResult& result) {
  ordered_json root;
  root["format_version"] = 1;
  const ordered_json cfg = config_json(result);
  std::ostringstream hash;
  hash << "fnv1a64:" << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(cfg.dump());
  ordered_json prov;
  prov["seed"] = result.config.seed;
  prov["config_hash"] = hash.str();
  root["provenance"] = prov;
  root["config"] = cfg;
  ordered_json dataset;
  dataset["num_records"] = result.num_records;
  dataset["num_classes"] = result.num_classes;
  root["dataset"] = dataset;
  ordered_json folds = ordered_json::array();
  for (size_t f = 0; f < result.folds.size(); ++f) {
    const FoldResult& fr = result.folds[f];
    ordered_json j;
    j["fold"] = f;
    j["n"] = fr.n;
    ordered_json fitj;
    fitj["final_nll"] = fr.final_nll;
    fitj["gradient_norm"] = fr.gradient_norm;
    fitj["iterations"] = fr.iterations;
    fitj["converged"] = fr.converged;
    j["fit"] = fitj;
    j["before"] = metric_json(fr.before);
    j["after"] = metric_json(fr.after);
    folds.push_back(j);
  }
  root["folds"] = folds;
  ordered_json agg;
  ordered_json agg_before, agg_after;
  agg_before["mean"] = metric_json(result.before.mean);
  agg_before["stddev"] = metric_json(result.before.stddev);
  agg_after["mean"] = metric_json(result.after.mean);
  agg_after["stddev"] = metric_json(result.after.stddev);
  agg["before"] = agg_before;
  agg["after"] = agg_after;
  root["aggregate"] = agg;
  root["action_movement"] = result.movement;
  if (result.refinement_before && result.refinement_after) {
    ordered_json ref;
    ref["before"] = *result.refinement_before;
    ref["after"] = *result.refinement_after;
    root["refinement"] = ref;
  }
  return root.dump(2) + "\n";
}

}  // namespace taskcal
