// Acceptance suite: end-to-end checks of the decision, calibration, metric
// and harness behavior this library promises. One pass/fail line is printed
// per criterion; the exit code is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "taskcal/calibrate.hpp"
#include "taskcal/core.hpp"
#include "taskcal/decision.hpp"
#include "taskcal/errors.hpp"
#include "taskcal/harness.hpp"
#include "taskcal/losses.hpp"
#include "taskcal/metrics.hpp"

namespace {

using namespace taskcal;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome pass(const std::string& detail) { return {true, detail}; }
Outcome fail(const std::string& detail) { return {false, detail}; }

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

std::vector<std::string> index_labels(int c) {
  std::vector<std::string> labels;
  for (int i = 0; i < c; ++i) labels.push_back(std::to_string(i));
  return labels;
}

SimplexPoint random_simplex(std::mt19937_64& rng, int c, double floor = 0.0) {
  std::exponential_distribution<double> expo(1.0);
  std::vector<double> p(static_cast<size_t>(c));
  double total = 0.0;
  for (auto& v : p) {
    v = expo(rng) + floor;
    total += v;
  }
  for (auto& v : p) v /= total;
  return SimplexPoint(p);
}

LatentSpace random_ordinal_space(std::mt19937_64& rng, int c) {
  std::uniform_real_distribution<double> start(-2.0, 2.0);
  std::uniform_real_distribution<double> gap(0.05, 1.5);
  std::vector<double> values(static_cast<size_t>(c));
  values[0] = start(rng);
  for (int i = 1; i < c; ++i) values[static_cast<size_t>(i)] = values[static_cast<size_t>(i - 1)] + gap(rng);
  return ordinal_space(index_labels(c), values);
}

LatentSpace random_product_space(std::mt19937_64& rng, const std::vector<int>& sizes) {
  std::vector<LatentSpace> factors;
  for (int s : sizes) factors.push_back(random_ordinal_space(rng, s));
  return product_space(factors);
}

// Independent risk minimization: same accumulation order, separate code.
int exhaustive_min_risk_action(const SimplexPoint& q, const LossMatrix& loss) {
  int best = 0;
  double best_risk = 0.0;
  for (int b = 0; b < loss.c; ++b) {
    double risk = 0.0;
    for (int a = 0; a < loss.c; ++a) risk += q[static_cast<size_t>(a)] * loss.at(a, b);
    if (b == 0 || risk < best_risk) {
      best = b;
      best_risk = risk;
    }
  }
  return best;
}

// Smallest index whose cumulative weight reaches one half.
int weighted_median_index(const std::vector<double>& weights) {
  double acc = 0.0;
  for (size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (acc >= 0.5) return static_cast<int>(i);
  }
  return static_cast<int>(weights.size()) - 1;
}

// Shared fixture for the fit-quality criteria: one synthetic corpus, one fit.
struct SynthFit {
  LatentSpace space = categorical_space(index_labels(3));
  SyntheticData syn;
  FitResult fitted;
  std::vector<SimplexPoint> raw;
  std::vector<SimplexPoint> calibrated;
  std::vector<int> labels;
  size_t train_n = 4000;
  double build_seconds = 0.0;
};

const SynthFit& shared_synth_fit() {
  static SynthFit f = [] {
    SynthFit s;
    auto start = Clock::now();
    s.syn = generate_synthetic(s.space, 5000, preset_distortion("overconfident", 3), 42);
    Dataset train;
    train.space = s.space;
    train.records.assign(s.syn.data.records.begin(),
                         s.syn.data.records.begin() + static_cast<long>(s.train_n));
    s.fitted = fit(train, CalibratorFamily::dirichlet);
    for (const auto& rec : s.syn.data.records) {
      SimplexPoint q = record_belief(s.space, rec);
      s.calibrated.push_back(apply(s.fitted.calibrator, q));
      s.raw.push_back(std::move(q));
      s.labels.push_back(rec.label);
    }
    s.build_seconds = seconds_since(start);
    return s;
  }();
  return f;
}

struct CliResult {
  int exit_code = -1;
  std::string output;
};

CliResult run_cli(const std::string& cli, const std::string& args) {
  CliResult res;
  std::string cmd = cli + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return res;
  char buf[4096];
  size_t n = 0;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) res.output.append(buf, n);
  int status = pclose(pipe);
  if (WIFEXITED(status)) res.exit_code = WEXITSTATUS(status);
  return res;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// Criterion 1: the MBR decoder agrees exactly with exhaustive risk
// minimization across every loss kind and class counts 2..8, in under 5s.
Outcome criterion_mbr_exhaustive() {
  auto start = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> tdist(0.0, 0.95);
  const std::vector<std::vector<int>> product_sizes = {{2, 2}, {2, 3}, {3, 2}, {2, 4}, {4, 2}, {2, 2, 2}};
  int checked = 0;
  for (int i = 0; i < 1000; ++i) {
    LatentSpace space;
    LossSpec spec;
    switch (i % 4) {
      case 0:
        spec.kind = LossKind::exact_match;
        space = categorical_space(index_labels(2 + static_cast<int>(rng() % 7)));
        break;
      case 1:
        spec.kind = LossKind::l1;
        space = random_ordinal_space(rng, 2 + static_cast<int>(rng() % 7));
        break;
      case 2:
        spec.kind = LossKind::bas;
        spec.t = tdist(rng);
        space = answer_abstain_space();
        break;
      default:
        spec.kind = LossKind::separable_l1;
        space = random_product_space(rng, product_sizes[rng() % product_sizes.size()]);
        break;
    }
    LossMatrix loss = build_loss_matrix(space, spec);
    SimplexPoint q = random_simplex(rng, space.num_classes());
    int got = mbr_decode(q, loss);
    int want = exhaustive_min_risk_action(q, loss);
    if (got != want) {
      return fail("instance " + std::to_string(i) + ": decoder chose " + std::to_string(got) +
                  ", exhaustive search chose " + std::to_string(want));
    }
    ++checked;
  }
  double elapsed = seconds_since(start);
  if (elapsed >= 5.0) return fail("took " + fmt(elapsed) + "s, bound is 5s");
  return pass("decoder matches exhaustive search on " + std::to_string(checked) +
              " random instances (" + fmt(elapsed) + "s)");
}

// Criterion 2: absolute-difference decoding equals the weighted median, and
// separable product decoding equals per-factor marginal medians.
Outcome criterion_weighted_median() {
  std::mt19937_64 rng(202);
  for (int i = 0; i < 1000; ++i) {
    int c = 2 + static_cast<int>(rng() % 7);
    LatentSpace space = random_ordinal_space(rng, c);
    LossMatrix loss = build_loss_matrix(space, {LossKind::l1, 0.25});
    SimplexPoint q = random_simplex(rng, c);
    int got = mbr_decode(q, loss);
    int want = weighted_median_index(q.probs());
    if (got != want) {
      return fail("ordinal instance " + std::to_string(i) + ": decoder " + std::to_string(got) +
                  " vs weighted median " + std::to_string(want));
    }
  }
  for (int i = 0; i < 500; ++i) {
    std::vector<int> sizes = {2 + static_cast<int>(rng() % 3), 2 + static_cast<int>(rng() % 3)};
    LatentSpace space = random_product_space(rng, sizes);
    LossMatrix loss = build_loss_matrix(space, {LossKind::separable_l1, 0.25});
    int c = space.num_classes();
    SimplexPoint q = random_simplex(rng, c);
    int got = mbr_decode(q, loss);
    std::vector<int> median_digits;
    for (size_t f = 0; f < sizes.size(); ++f) {
      std::vector<double> marginal(static_cast<size_t>(sizes[f]), 0.0);
      for (int cls = 0; cls < c; ++cls) {
        marginal[static_cast<size_t>(product_decode(space, cls)[f])] += q[static_cast<size_t>(cls)];
      }
      median_digits.push_back(weighted_median_index(marginal));
    }
    int want = product_encode(space, median_digits);
    if (got != want) {
      return fail("product instance " + std::to_string(i) + ": decoder " + std::to_string(got) +
                  " vs factor medians " + std::to_string(want));
    }
  }
  return pass("1000 ordinal instances match the weighted median, 500 product instances match per-factor medians");
}

// Criterion 3: under the answer-or-abstain loss the MBR decoder is exactly
// the threshold rule, boundaries included, and the t = 0.25 wrong-answer
// entry is exactly one third.
Outcome criterion_threshold_rule() {
  LatentSpace space = answer_abstain_space();
  for (int j = 0; j < 20; ++j) {
    double t = static_cast<double>(50 * j) / 1000.0;
    LossMatrix loss = build_loss_matrix(space, {LossKind::bas, t});
    for (int i = 0; i <= 1000; ++i) {
      double p = static_cast<double>(i) / 1000.0;
      SimplexPoint q(std::vector<double>{p, 1.0 - p});
      int want = p >= t ? 0 : 1;
      int got = mbr_decode(q, loss);
      if (got != want) {
        return fail("t=" + fmt(t) + ", p=" + fmt(p) + ": decoder " + std::to_string(got) +
                    " vs threshold rule " + std::to_string(want));
      }
      if (bas_threshold_decide(p, t) != want) {
        return fail("threshold helper disagrees at t=" + fmt(t) + ", p=" + fmt(p));
      }
    }
  }
  LossMatrix quarter = build_loss_matrix(space, {LossKind::bas, 0.25});
  if (quarter.at(1, 0) != 1.0 / 3.0) {
    return fail("wrong-answer entry at t=0.25 is " + fmt(quarter.at(1, 0)) + ", expected exactly 1/3");
  }
  if (bas_loss(1, 0, 0.25) != 1.0 / 3.0) {
    return fail("bas_loss(1, 0, 0.25) is not exactly 1/3");
  }
  return pass("decoder equals the threshold rule on a 1001-point grid for 20 thresholds; t=0.25 entry is exactly 1/3");
}

// Criterion 4: identity-parameter calibrators reproduce their input, and
// temperature 2 takes (0.9, 0.1) to (0.75, 0.25).
Outcome criterion_calibrator_identities() {
  std::mt19937_64 rng(404);
  for (int i = 0; i < 1000; ++i) {
    int c = 2 + static_cast<int>(rng() % 5);
    SimplexPoint q = random_simplex(rng, c, 1e-3);
    std::vector<double> eye(static_cast<size_t>(c) * static_cast<size_t>(c), 0.0);
    for (int k = 0; k < c; ++k) eye[static_cast<size_t>(k) * static_cast<size_t>(c) + static_cast<size_t>(k)] = 1.0;
    Calibrator dir = dirichlet_calibrator(c, eye, std::vector<double>(static_cast<size_t>(c), 0.0));
    Calibrator temp = temperature_calibrator(c, 0.0);
    SimplexPoint qd = apply(dir, q);
    SimplexPoint qt = apply(temp, q);
    for (int k = 0; k < c; ++k) {
      if (std::fabs(qd[static_cast<size_t>(k)] - q[static_cast<size_t>(k)]) > 1e-8) {
        return fail("identity-parameter map moved a coordinate by more than 1e-8 (instance " +
                    std::to_string(i) + ")");
      }
      if (std::fabs(qt[static_cast<size_t>(k)] - q[static_cast<size_t>(k)]) > 1e-8) {
        return fail("unit-temperature map moved a coordinate by more than 1e-8 (instance " +
                    std::to_string(i) + ")");
      }
    }
  }
  Calibrator half = temperature_calibrator(2, std::log(2.0));
  SimplexPoint out = apply(half, SimplexPoint(std::vector<double>{0.9, 0.1}));
  if (std::fabs(out[0] - 0.75) > 1e-9 || std::fabs(out[1] - 0.25) > 1e-9) {
    return fail("temperature 2 maps (0.9, 0.1) to (" + fmt(out[0]) + ", " + fmt(out[1]) +
                "), expected (0.75, 0.25)");
  }
  return pass("identity parameters reproduce 1000 random points within 1e-8; temperature 2 maps (0.9, 0.1) to (0.75, 0.25)");
}

// Criterion 5: fitting on distorted synthetic data recovers the true
// posterior (mean held-out KL <= 0.01) and strictly lowers the held-out
// realized loss of MBR decoding, in under 60s.
Outcome criterion_fit_recovery() {
  const SynthFit& s = shared_synth_fit();
  LossMatrix loss = build_loss_matrix(s.space, {LossKind::exact_match, 0.25});
  double kl_sum = 0.0;
  double raw_loss = 0.0;
  double cal_loss = 0.0;
  size_t held = s.syn.data.records.size() - s.train_n;
  for (size_t i = s.train_n; i < s.syn.data.records.size(); ++i) {
    const SimplexPoint& p_star = s.syn.p_star[i];
    const SimplexPoint& f = s.calibrated[i];
    for (int k = 0; k < 3; ++k) {
      kl_sum += p_star[static_cast<size_t>(k)] *
                std::log(p_star[static_cast<size_t>(k)] / f[static_cast<size_t>(k)]);
    }
    raw_loss += loss.at(s.labels[i], mbr_decode(s.raw[i], loss));
    cal_loss += loss.at(s.labels[i], mbr_decode(f, loss));
  }
  double mean_kl = kl_sum / static_cast<double>(held);
  double mean_raw = raw_loss / static_cast<double>(held);
  double mean_cal = cal_loss / static_cast<double>(held);
  if (!(mean_kl <= 0.01)) return fail("held-out mean KL " + fmt(mean_kl) + " exceeds 0.01");
  if (!(mean_cal < mean_raw)) {
    return fail("held-out loss " + fmt(mean_cal) + " not strictly below uncalibrated " + fmt(mean_raw));
  }
  if (s.build_seconds >= 60.0) return fail("fit took " + fmt(s.build_seconds) + "s, bound is 60s");
  return pass("held-out mean KL " + fmt(mean_kl) + " <= 0.01, loss " + fmt(mean_raw) + " -> " +
              fmt(mean_cal) + " (" + fmt(s.build_seconds) + "s)");
}

// Criterion 6: on the same synthetic corpus the binned calibration error of
// calibrated beliefs is at most 10% of the uncalibrated value.
Outcome criterion_tce_reduction() {
  const SynthFit& s = shared_synth_fit();
  LossMatrix loss = build_loss_matrix(s.space, {LossKind::exact_match, 0.25});
  TceBinConfig cfg;
  cfg.bins_per_dim = 4;
  double before = tce_binned(s.raw, s.labels, loss, cfg);
  double after = tce_binned(s.calibrated, s.labels, loss, cfg);
  if (!(after <= 0.1 * before)) {
    return fail("calibrated error " + fmt(after) + " exceeds 10% of uncalibrated " + fmt(before));
  }
  return pass("binned calibration error " + fmt(before) + " -> " + fmt(after) + " (ratio " +
              fmt(after / before) + ")");
}

// Criterion 7: with four belief groups and exact conditional frequencies,
// enumerating all 81 deterministic decision rules confirms that acting by MBR
// on the group conditionals is optimal overall and within every group, for
// both the mismatch loss and the absolute-difference loss, in under 1s.
Outcome criterion_rule_enumeration() {
  auto start = Clock::now();
  LatentSpace space = ordinal_space(index_labels(3), {0.0, 1.0, 2.0});
  const int64_t counts[4][3] = {{6, 2, 2}, {1, 8, 1}, {2, 3, 5}, {4, 4, 2}};
  for (LossKind kind : {LossKind::exact_match, LossKind::l1}) {
    LossMatrix loss = build_loss_matrix(space, {kind, 0.25});
    int64_t loss_int[3][3];
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        double entry = loss.at(a, b);
        loss_int[a][b] = static_cast<int64_t>(entry);
        if (static_cast<double>(loss_int[a][b]) != entry) return fail("loss entry is not integral");
      }
    }
    int64_t group_loss[4][3];
    int mbr_action[4];
    for (int g = 0; g < 4; ++g) {
      int64_t n_g = counts[g][0] + counts[g][1] + counts[g][2];
      std::vector<double> freq(3);
      for (int k = 0; k < 3; ++k) freq[static_cast<size_t>(k)] = static_cast<double>(counts[g][k]) / static_cast<double>(n_g);
      mbr_action[g] = mbr_decode(SimplexPoint(freq), loss);
      for (int b = 0; b < 3; ++b) {
        group_loss[g][b] = 0;
        for (int k = 0; k < 3; ++k) group_loss[g][b] += counts[g][k] * loss_int[k][b];
      }
    }
    int64_t mbr_total = 0;
    for (int g = 0; g < 4; ++g) {
      mbr_total += group_loss[g][mbr_action[g]];
      for (int b = 0; b < 3; ++b) {
        if (group_loss[g][b] < group_loss[g][mbr_action[g]]) {
          return fail(std::string(loss_kind_name(kind)) + ": group " + std::to_string(g) +
                      " has a strictly better action than the MBR choice");
        }
      }
    }
    for (int rule = 0; rule < 81; ++rule) {
      int digits = rule;
      int64_t total = 0;
      for (int g = 0; g < 4; ++g) {
        total += group_loss[g][digits % 3];
        digits /= 3;
      }
      if (total < mbr_total) {
        return fail(std::string(loss_kind_name(kind)) + ": rule " + std::to_string(rule) +
                    " beats MBR on the group conditionals");
      }
    }
  }
  double elapsed = seconds_since(start);
  if (elapsed >= 1.0) return fail("took " + fmt(elapsed) + "s, bound is 1s");
  return pass("MBR on exact group conditionals is minimal among all 81 rules, overall and per group, for both losses");
}

// Criterion 8: the mixture decomposition
//   sum_k w_k D(q || p_k) = D(q || fbar) + sum_k w_k D(fbar || p_k)
// holds within 1e-9 on random mixtures for every loss kind.
Outcome criterion_decomposition() {
  std::mt19937_64 rng(808);
  std::uniform_real_distribution<double> tdist(0.0, 0.9);
  double worst = 0.0;
  for (int i = 0; i < 500; ++i) {
    for (int kind_idx = 0; kind_idx < 4; ++kind_idx) {
      LatentSpace space;
      LossSpec spec;
      switch (kind_idx) {
        case 0:
          spec.kind = LossKind::exact_match;
          space = categorical_space(index_labels(2 + static_cast<int>(rng() % 4)));
          break;
        case 1:
          spec.kind = LossKind::l1;
          space = random_ordinal_space(rng, 2 + static_cast<int>(rng() % 4));
          break;
        case 2:
          spec.kind = LossKind::bas;
          spec.t = tdist(rng);
          space = answer_abstain_space();
          break;
        default:
          spec.kind = LossKind::separable_l1;
          space = random_product_space(rng, {2, 2 + static_cast<int>(rng() % 2)});
          break;
      }
      int c = space.num_classes();
      LossMatrix loss = build_loss_matrix(space, spec);
      int k_comps = 2 + static_cast<int>(rng() % 4);
      std::vector<double> w(static_cast<size_t>(k_comps));
      std::exponential_distribution<double> expo(1.0);
      double wsum = 0.0;
      for (auto& v : w) {
        v = expo(rng);
        wsum += v;
      }
      for (auto& v : w) v /= wsum;
      SimplexPoint q = random_simplex(rng, c);
      std::vector<SimplexPoint> comps;
      std::vector<double> fbar(static_cast<size_t>(c), 0.0);
      for (int k = 0; k < k_comps; ++k) {
        comps.push_back(random_simplex(rng, c));
        for (int j = 0; j < c; ++j) fbar[static_cast<size_t>(j)] += w[static_cast<size_t>(k)] * comps.back()[static_cast<size_t>(j)];
      }
      SimplexPoint mean(fbar);
      double lhs = 0.0;
      double rhs = divergence(q, mean, loss);
      for (int k = 0; k < k_comps; ++k) {
        lhs += w[static_cast<size_t>(k)] * divergence(q, comps[static_cast<size_t>(k)], loss);
        rhs += w[static_cast<size_t>(k)] * divergence(mean, comps[static_cast<size_t>(k)], loss);
      }
      double gap = std::fabs(lhs - rhs);
      worst = std::max(worst, gap);
      if (!(gap <= 1e-9)) {
        return fail(std::string(loss_kind_name(spec.kind)) + " mixture " + std::to_string(i) +
                    ": identity gap " + fmt(gap));
      }
    }
  }
  return pass("identity holds within 1e-9 on 500 mixtures x 4 loss kinds (worst gap " + fmt(worst) + ")");
}

// Criterion 9: divergence is non-negative on random triples, exactly zero on
// identical arguments, and matches a hand-computed value.
Outcome criterion_divergence_properties() {
  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> tdist(0.0, 0.9);
  for (int i = 0; i < 10000; ++i) {
    LatentSpace space;
    LossSpec spec;
    switch (i % 4) {
      case 0:
        spec.kind = LossKind::exact_match;
        space = categorical_space(index_labels(2 + static_cast<int>(rng() % 5)));
        break;
      case 1:
        spec.kind = LossKind::l1;
        space = random_ordinal_space(rng, 2 + static_cast<int>(rng() % 5));
        break;
      case 2:
        spec.kind = LossKind::bas;
        spec.t = tdist(rng);
        space = answer_abstain_space();
        break;
      default:
        spec.kind = LossKind::separable_l1;
        space = random_product_space(rng, {2, 2 + static_cast<int>(rng() % 2)});
        break;
    }
    int c = space.num_classes();
    LossMatrix loss = build_loss_matrix(space, spec);
    SimplexPoint q = random_simplex(rng, c);
    SimplexPoint r = random_simplex(rng, c);
    if (!(divergence(q, r, loss) >= 0.0)) {
      return fail("negative divergence at triple " + std::to_string(i));
    }
    if (divergence(q, q, loss) != 0.0) {
      return fail("divergence of a point from itself is not exactly zero at triple " + std::to_string(i));
    }
  }
  LossMatrix bas = build_loss_matrix(answer_abstain_space(), {LossKind::bas, 0.25});
  double worked = divergence(SimplexPoint(std::vector<double>{0.2, 0.8}),
                             SimplexPoint(std::vector<double>{0.5, 0.5}), bas);
  if (std::fabs(worked - 1.0 / 3.0) > 1e-12) {
    return fail("hand-computed divergence is " + fmt(worked) + ", expected 1/3");
  }
  return pass("non-negative on 10000 random triples, exactly zero on equal arguments, hand value matches 1/3");
}

// Criterion 10: on perfectly calibrated data the self-estimated risk of a
// decision rule matches its realized loss within three binomial standard
// errors, for both the MBR and the argmax rule.
Outcome criterion_indistinguishable() {
  LatentSpace space = categorical_space(index_labels(3));
  SyntheticData syn = generate_synthetic(space, 20000, preset_distortion("identity", 3), 7);
  LossMatrix loss = build_loss_matrix(space, {LossKind::exact_match, 0.25});
  double n = static_cast<double>(syn.data.records.size());
  for (int use_argmax = 0; use_argmax < 2; ++use_argmax) {
    double est_sum = 0.0;
    double realized_sum = 0.0;
    for (const auto& rec : syn.data.records) {
      SimplexPoint q = record_belief(space, rec);
      int action = use_argmax ? argmax_policy(q) : mbr_decode(q, loss);
      est_sum += bayes_risk(action, q, loss);
      realized_sum += loss.at(rec.label, action);
    }
    double est = est_sum / n;
    double realized = realized_sum / n;
    double se = std::sqrt(std::max(realized * (1.0 - realized), 1e-12) / n);
    if (std::fabs(est - realized) > 3.0 * se) {
      return fail(std::string(use_argmax ? "argmax" : "mbr") + " rule: self-estimate " + fmt(est) +
                  " vs realized " + fmt(realized) + " differs by more than 3 SE (" + fmt(3.0 * se) + ")");
    }
  }
  return pass("self-estimated risk matches realized loss within 3 SE for both rules on 20000 records");
}

// Criterion 11: every CLI command is byte-reproducible under a fixed seed,
// and a serialization round trip leaves calibrator outputs bit-identical.
Outcome criterion_determinism() {
  const char* cli_env = std::getenv("TASKCAL_CLI");
  if (!cli_env) return fail("TASKCAL_CLI is not set");
  std::string cli = cli_env;
  fs::path dir = fs::temp_directory_path() / "taskcal-acceptance";
  std::error_code ec;
  fs::remove_all(dir, ec);
  fs::create_directories(dir);
  spit(dir / "task.json",
       "{\"format_version\": 1, \"space\": {\"kind\": \"categorical\", \"labels\": [\"a\", \"b\", \"c\"]}, "
       "\"loss\": {\"kind\": \"exact_match\"}}\n");
  std::string task = (dir / "task.json").string();

  std::vector<std::string> run_outputs;
  std::vector<std::vector<std::string>> run_files;
  for (int run = 0; run < 2; ++run) {
    fs::path sub = dir / ("run" + std::to_string(run));
    fs::create_directories(sub);
    std::string d = (sub / "data.jsonl").string();
    std::string truth = (sub / "truth.jsonl").string();
    std::string cal = (sub / "cal.json").string();
    struct Step {
      std::string args;
      std::string file;
    };
    std::vector<Step> steps = {
        {"synth --n 200 --classes 3 --preset overconfident --seed 5 --output " + d + " --truth-out " + truth, d},
        {"fit --task-spec " + task + " --input " + d + " --family dirichlet --seed 5 --output " + cal, cal},
        {"apply --calibrator " + cal + " --input " + d + " --output " + (sub / "applied.jsonl").string(),
         (sub / "applied.jsonl").string()},
        {"decode --task-spec " + task + " --calibrator " + cal + " --input " + d + " --output " +
             (sub / "decoded.jsonl").string(),
         (sub / "decoded.jsonl").string()},
        {"eval --task-spec " + task + " --input " + d + " --calibrator " + cal + " --output " +
             (sub / "eval.json").string(),
         (sub / "eval.json").string()},
        {"tce --task-spec " + task + " --input " + d + " --estimator binned --bins-per-dim 4 --output " +
             (sub / "tce.json").string(),
         (sub / "tce.json").string()},
        {"tce --task-spec " + task + " --input " + d + " --estimator kde --bandwidth 0.05 --output " +
             (sub / "tce_kde.json").string(),
         (sub / "tce_kde.json").string()},
        {"cv --task-spec " + task + " --input " + d + " --family dirichlet --folds 3 --seed 5 --truth " +
             truth + " --report " + (sub / "report.json").string(),
         (sub / "report.json").string()},
    };
    std::string combined_stdout;
    std::vector<std::string> files;
    for (const auto& step : steps) {
      CliResult res = run_cli(cli, step.args);
      if (res.exit_code != 0) {
        return fail("command exited with " + std::to_string(res.exit_code) + ": " +
                    step.args.substr(0, step.args.find(' ')) + " (" + res.output.substr(0, 200) + ")");
      }
      combined_stdout += res.output;
      files.push_back(slurp(step.file));
    }
    files.push_back(slurp(truth));
    run_outputs.push_back(combined_stdout);
    run_files.push_back(files);
  }
  if (run_outputs[0] != run_outputs[1]) return fail("command stdout differs between identical runs");
  if (run_files[0] != run_files[1]) return fail("output files differ between identical runs");

  const SynthFit& s = shared_synth_fit();
  Calibrator original = s.fitted.calibrator;
  Calibrator restored = deserialize_calibrator(serialize_calibrator(original));
  std::mt19937_64 rng(1111);
  for (int i = 0; i < 100; ++i) {
    SimplexPoint q = random_simplex(rng, 3, 1e-6);
    std::vector<double> a = apply(original, q).probs();
    std::vector<double> b = apply(restored, q).probs();
    if (std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) != 0) {
      return fail("round-tripped calibrator output differs bitwise at input " + std::to_string(i));
    }
  }
  return pass("8 CLI invocations byte-reproducible across runs; serialization round trip is bit-identical on 100 inputs");
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"mbr equals exhaustive risk minimization", criterion_mbr_exhaustive},
      {"ordinal and product decoding equal weighted medians", criterion_weighted_median},
      {"answer-abstain decoding equals the threshold rule", criterion_threshold_rule},
      {"identity-parameter calibrators are the identity map", criterion_calibrator_identities},
      {"fitting recovers the true posterior and lowers task loss", criterion_fit_recovery},
      {"calibration shrinks binned calibration error by 10x", criterion_tce_reduction},
      {"MBR on exact conditionals is optimal among all rules", criterion_rule_enumeration},
      {"mixture divergence decomposition identity", criterion_decomposition},
      {"divergence non-negativity and exact values", criterion_divergence_properties},
      {"calibrated self-estimates match realized loss", criterion_indistinguishable},
      {"CLI determinism and serialization round trip", criterion_determinism},
  };
  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    Outcome out;
    try {
      out = criteria[i].run();
    } catch (const std::exception& e) {
      out = fail(std::string("unhandled exception: ") + e.what());
    }
    if (!out.pass) ++failures;
    std::cout << "criterion " << (i + 1) << "/" << criteria.size() << " ["
              << criteria[i].name << "]: " << (out.pass ? "PASS" : "FAIL") << " - " << out.detail
              << std::endl;
  }
  std::cout << (criteria.size() - static_cast<size_t>(failures)) << " of " << criteria.size()
            << " criteria passed" << std::endl;
  return failures;
}
