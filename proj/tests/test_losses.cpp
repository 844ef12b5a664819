#include <cmath>

#include "doctest.h"
#include "taskcal/losses.hpp"

using namespace taskcal;

TEST_CASE("loss kind names round trip") {
  for (LossKind k : {LossKind::l1, LossKind::exact_match, LossKind::separable_l1, LossKind::bas}) {
    CHECK(loss_kind_from_name(loss_kind_name(k)) == k);
  }
  CHECK_THROWS_AS(loss_kind_from_name("squared"), ValidationError);
}

TEST_CASE("answer-abstain loss entries at the default threshold") {
  const double t = 0.25;
  CHECK(bas_loss(0, 0, t) == -1.0);
  CHECK(bas_loss(0, 1, t) == 0.0);
  CHECK(bas_loss(1, 1, t) == 0.0);
  CHECK(bas_loss(1, 0, t) == 1.0 / 3.0);
}

TEST_CASE("answer-abstain loss degenerate and invalid thresholds") {
  CHECK(bas_loss(1, 0, 0.0) == 0.0);
  CHECK_THROWS_AS(bas_loss(1, 0, 1.0), ValidationError);
  CHECK_THROWS_AS(bas_loss(1, 0, -0.1), ValidationError);
  CHECK_THROWS_AS(bas_loss(2, 0, 0.25), ValidationError);
  CHECK_THROWS_AS(bas_loss(0, -1, 0.25), ValidationError);
}

TEST_CASE("answering at the exact threshold belief never has positive risk") {
  // At belief (t, 1-t) the risk of answering is t*(-1) + (1-t)*d. The wrong
  // answer penalty is rounded so this is <= 0 in double arithmetic for every
  // threshold, keeping the threshold rule inclusive.
  for (int i = 0; i < 1000; ++i) {
    const double t = static_cast<double>(i) / 1000.0;
    const double d = bas_loss(1, 0, t);
    CHECK(std::fma(1.0 - t, d, -t) <= 0.0);
    // The snap moves the entry only a few ulp below t/(1-t).
    if (t > 0.0) {
      const double exact = t / (1.0 - t);
      CHECK(d <= exact);
      CHECK(d >= exact * (1.0 - 1e-14));
    }
  }
}

TEST_CASE("l1 loss on an ordinal space is the value distance") {
  const LatentSpace s = ordinal_space({"one", "two", "four"}, {1.0, 2.0, 4.0});
  const LossMatrix m = build_loss_matrix(s, {LossKind::l1});
  CHECK(m.c == 3);
  CHECK(m.at(0, 0) == 0.0);
  CHECK(m.at(0, 2) == 3.0);
  CHECK(m.at(2, 0) == 3.0);
  CHECK(m.at(1, 2) == 2.0);
  CHECK_THROWS_AS(build_loss_matrix(categorical_space({"a", "b"}), {LossKind::l1}),
                  ValidationError);
}

TEST_CASE("exact match loss is the mismatch indicator on any space") {
  const LossMatrix m = build_loss_matrix(categorical_space({"a", "b", "c"}), {});
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) CHECK(m.at(a, b) == (a == b ? 0.0 : 1.0));
}

TEST_CASE("separable l1 loss sums per-factor distances") {
  const LatentSpace f2 = ordinal_space({"a", "b"}, {0.0, 1.0});
  const LatentSpace f3 = ordinal_space({"x", "y", "z"}, {0.0, 1.0, 3.0});
  const LatentSpace grid = product_space({f2, f3});
  const LossMatrix m = build_loss_matrix(grid, {LossKind::separable_l1});
  for (int a = 0; a < grid.num_classes(); ++a) {
    const std::vector<double> va = product_value(grid, a);
    for (int b = 0; b < grid.num_classes(); ++b) {
      const std::vector<double> vb = product_value(grid, b);
      double expect = 0.0;
      for (size_t k = 0; k < va.size(); ++k) expect += std::fabs(va[k] - vb[k]);
      CHECK(m.at(a, b) == expect);
    }
  }
  CHECK_THROWS_AS(build_loss_matrix(f3, {LossKind::separable_l1}), ValidationError);
}

TEST_CASE("bas loss matrix requires an answer-abstain space") {
  LossSpec spec;
  spec.kind = LossKind::bas;
  spec.t = 0.25;
  const LossMatrix m = build_loss_matrix(answer_abstain_space(), spec);
  CHECK(m.at(0, 0) == -1.0);
  CHECK(m.at(0, 1) == 0.0);
  CHECK(m.at(1, 0) == 1.0 / 3.0);
  CHECK(m.at(1, 1) == 0.0);
  CHECK_THROWS_AS(build_loss_matrix(categorical_space({"a", "b"}), spec), ValidationError);
}
