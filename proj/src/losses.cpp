#include "taskcal/losses.hpp"

#include <cmath>

namespace taskcal {

const char* loss_kind_name(LossKind k) {
  switch (k) {
    case LossKind::l1: return "l1";
    case LossKind::exact_match: return "exact_match";
    case LossKind::separable_l1: return "separable_l1";
    case LossKind::bas: return "bas";
  }
  return "unknown";
}

LossKind loss_kind_from_name(const std::string& name) {
  if (name == "l1") return LossKind::l1;
  if (name == "exact_match") return LossKind::exact_match;
  if (name == "separable_l1") return LossKind::separable_l1;
  if (name == "bas") return LossKind::bas;
  throw ValidationError("unknown loss kind: " + name);
}

double bas_loss(int truth, int predicted, double t) {
  if (!(t >= 0.0 && t < 1.0)) throw ValidationError("bas threshold must lie in [0, 1)");
  if ((truth != 0 && truth != 1) || (predicted != 0 && predicted != 1))
    throw ValidationError("bas_loss classes must be 0 (answer) or 1 (abstain)");
  if (predicted == 1) return 0.0;
  if (truth == 0) return -1.0;
  if (t == 0.0) return 0.0;
  const double u = 1.0 - t;
  double d = t / u;
  // The belief (t, 1-t) must not strictly prefer abstaining: the decision rule
  // this loss encodes answers inclusively at the threshold. Round the penalty
  // toward zero until u*d <= t holds exactly in double arithmetic, so the
  // computed Bayes risk of answering at the borderline is <= 0. This moves the
  // entry by at most one ulp below the true quotient.
  while (std::fma(u, d, -t) > 0.0) d = std::nextafter(d, 0.0);
  return d;
}

LossMatrix build_loss_matrix(const LatentSpace& space, const LossSpec& spec) {
  validate_space(space);
  const int c = space.num_classes();
  LossMatrix m;
  m.c = c;
  m.d.assign(static_cast<size_t>(c) * static_cast<size_t>(c), 0.0);
  switch (spec.kind) {
    case LossKind::l1: {
      if (space.kind != SpaceKind::ordinal)
        throw ValidationError("l1 loss requires an ordinal space with numeric values");
      for (int a = 0; a < c; ++a)
        for (int b = 0; b < c; ++b)
          m.d[static_cast<size_t>(a) * c + b] = std::fabs(space.values[a] - space.values[b]);
      break;
    }
    case LossKind::exact_match: {
      for (int a = 0; a < c; ++a)
        for (int b = 0; b < c; ++b)
          m.d[static_cast<size_t>(a) * c + b] = (a == b) ? 0.0 : 1.0;
      break;
    }
    case LossKind::separable_l1: {
      if (space.kind != SpaceKind::product)
        throw ValidationError("separable_l1 loss requires a product space");
      std::vector<std::vector<double>> vals(static_cast<size_t>(c));
      for (int i = 0; i < c; ++i) vals[static_cast<size_t>(i)] = product_value(space, i);
      for (int a = 0; a < c; ++a) {
        for (int b = 0; b < c; ++b) {
          double s = 0.0;
          for (size_t k = 0; k < vals[static_cast<size_t>(a)].size(); ++k)
            s += std::fabs(vals[static_cast<size_t>(a)][k] - vals[static_cast<size_t>(b)][k]);
          m.d[static_cast<size_t>(a) * c + b] = s;
        }
      }
      break;
    }
    case LossKind::bas: {
      if (space.kind != SpaceKind::answer_abstain)
        throw ValidationError("bas loss requires an answer_abstain space");
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
          m.d[static_cast<size_t>(a) * 2 + b] = bas_loss(a, b, spec.t);
      break;
    }
  }
  return m;
}

}  // namespace taskcal
