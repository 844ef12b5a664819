#include "taskcal/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include <json.hpp>

namespace taskcal {

namespace {

constexpr double kArmijo = 1e-4;
constexpr int kMaxHalvings = 60;

void softmax_inplace(std::vector<double>& z) {
  double m = z[0];
  for (double v : z) m = std::max(m, v);
  double sum = 0.0;
  for (auto& v : z) {
    v = std::exp(v - m);
    sum += v;
  }
  for (auto& v : z) v /= sum;
}

// Calibrated belief without the SimplexPoint wrapper; shared by apply, nll
// and the fitting objective so they agree bit for bit.
std::vector<double> apply_raw(const Calibrator& c, const std::vector<double>& q) {
  const size_t n = q.size();
  std::vector<double> z(n);
  switch (c.family) {
    case CalibratorFamily::identity:
      return q;
    case CalibratorFamily::temperature: {
      const double scale = std::exp(-c.log_tau);
      for (size_t i = 0; i < n; ++i) z[i] = scale * std::log(q[i] + c.epsilon);
      break;
    }
    case CalibratorFamily::dirichlet: {
      std::vector<double> u(n);
      for (size_t i = 0; i < n; ++i) u[i] = std::log(q[i] + c.epsilon);
      for (size_t r = 0; r < n; ++r) {
        double acc = c.bias[r];
        const double* row = c.weight.data() + r * n;
        for (size_t k = 0; k < n; ++k) acc += row[k] * u[k];
        z[r] = acc;
      }
      break;
    }
  }
  softmax_inplace(z);
  return z;
}

struct FitProblem {
  CalibratorFamily family = CalibratorFamily::temperature;
  int c = 0;
  double epsilon = 1e-12;
  std::vector<std::vector<double>> features;  // log(q + epsilon) per record
  std::vector<int> labels;

  size_t param_count() const {
    return family == CalibratorFamily::temperature
               ? 1
               : static_cast<size_t>(c) * static_cast<size_t>(c) + static_cast<size_t>(c);
  }

  double objective(const std::vector<double>& x, std::vector<double>* grad) const {
    const size_t n = features.size();
    const size_t d = static_cast<size_t>(c);
    if (grad) grad->assign(param_count(), 0.0);
    std::vector<double> z(d);
    std::vector<double> p(d);
    double f = 0.0;
    const double scale = family == CalibratorFamily::temperature ? std::exp(-x[0]) : 0.0;
    for (size_t i = 0; i < n; ++i) {
      const auto& u = features[i];
      if (family == CalibratorFamily::temperature) {
        for (size_t r = 0; r < d; ++r) z[r] = scale * u[r];
      } else {
        for (size_t r = 0; r < d; ++r) {
          double acc = x[d * d + r];
          const double* row = x.data() + r * d;
          for (size_t k = 0; k < d; ++k) acc += row[k] * u[k];
          z[r] = acc;
        }
      }
      p = z;
      softmax_inplace(p);
      const size_t y = static_cast<size_t>(labels[i]);
      const double py = p[y];
      f += -std::log(py + epsilon);
      if (grad) {
        // d/dz of -log(softmax(z)[y] + epsilon)
        const double gscale = py / (py + epsilon);
        if (family == CalibratorFamily::temperature) {
          double dot = 0.0;
          for (size_t r = 0; r < d; ++r) dot += p[r] * z[r];
          (*grad)[0] += -gscale * (dot - z[y]);
        } else {
          for (size_t r = 0; r < d; ++r) {
            const double gz = gscale * (p[r] - (r == y ? 1.0 : 0.0));
            double* grow = grad->data() + r * d;
            for (size_t k = 0; k < d; ++k) grow[k] += gz * u[k];
            (*grad)[d * d + r] += gz;
          }
        }
      }
    }
    const double inv = 1.0 / static_cast<double>(n);
    f *= inv;
    if (grad)
      for (auto& g : *grad) g *= inv;
    return f;
  }
};

std::vector<double> pack_params(const Calibrator& c) {
  if (c.family == CalibratorFamily::temperature) return {c.log_tau};
  std::vector<double> x = c.weight;
  x.insert(x.end(), c.bias.begin(), c.bias.end());
  return x;
}

Calibrator unpack_params(const FitProblem& prob, const std::vector<double>& x) {
  if (prob.family == CalibratorFamily::temperature)
    return temperature_calibrator(prob.c, x[0], prob.epsilon);
  const size_t d = static_cast<size_t>(prob.c);
  std::vector<double> w(x.begin(), x.begin() + static_cast<long>(d * d));
  std::vector<double> b(x.begin() + static_cast<long>(d * d), x.end());
  return dirichlet_calibrator(prob.c, std::move(w), std::move(b), prob.epsilon);
}

double l2_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

FitProblem make_problem(const Dataset& data, CalibratorFamily family, double epsilon) {
  if (family == CalibratorFamily::identity)
    throw ValidationError("fit requires a parametric family (temperature or dirichlet)");
  validate_dataset(data);
  if (data.records.empty()) throw ValidationError("fit requires a non-empty dataset");
  FitProblem prob;
  prob.family = family;
  prob.c = data.space.num_classes();
  prob.epsilon = epsilon;
  prob.features.reserve(data.size());
  prob.labels.reserve(data.size());
  for (const auto& r : data.records) {
    const SimplexPoint q = record_belief(data.space, r);
    std::vector<double> u(q.probs().size());
    for (size_t i = 0; i < u.size(); ++i) u[i] = std::log(q[i] + epsilon);
    prob.features.push_back(std::move(u));
    prob.labels.push_back(r.label);
  }
  return prob;
}

FitResult minimize(const FitProblem& prob, std::vector<double> x, const FitConfig& config) {
  if (config.max_iterations < 1) throw ValidationError("max_iterations must be >= 1");
  if (!(config.gradient_tolerance > 0.0))
    throw ValidationError("gradient_tolerance must be positive");
  if (!(config.initial_step > 0.0)) throw ValidationError("initial_step must be positive");

  std::vector<double> grad;
  double f = prob.objective(x, &grad);
  if (!std::isfinite(f)) throw NumericError("non-finite objective at iteration 0");
  double gn = l2_norm(grad);
  int iterations = 0;
  bool converged = gn <= config.gradient_tolerance;

  while (!converged && iterations < config.max_iterations) {
    double step = config.initial_step;
    std::vector<double> trial(x.size());
    double f_trial = 0.0;
    bool accepted = false;
    const double slope = gn * gn;
    for (int h = 0; h <= kMaxHalvings; ++h) {
      for (size_t i = 0; i < x.size(); ++i) trial[i] = x[i] - step * grad[i];
      f_trial = prob.objective(trial, nullptr);
      if (std::isfinite(f_trial) && f_trial <= f - kArmijo * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // flat to machine precision along the gradient
    x = trial;
    ++iterations;
    f = prob.objective(x, &grad);
    if (!std::isfinite(f))
      throw NumericError("non-finite objective at iteration " + std::to_string(iterations));
    gn = l2_norm(grad);
    converged = gn <= config.gradient_tolerance;
  }

  FitResult out;
  out.calibrator = unpack_params(prob, x);
  out.final_nll = f;
  out.gradient_norm = gn;
  out.iterations = iterations;
  out.converged = converged;
  return out;
}

}  // namespace

const char* calibrator_family_name(CalibratorFamily f) {
  switch (f) {
    case CalibratorFamily::identity: return "identity";
    case CalibratorFamily::temperature: return "temperature";
    case CalibratorFamily::dirichlet: return "dirichlet";
  }
  return "unknown";
}

CalibratorFamily calibrator_family_from_name(const std::string& name) {
  if (name == "identity") return CalibratorFamily::identity;
  if (name == "temperature") return CalibratorFamily::temperature;
  if (name == "dirichlet") return CalibratorFamily::dirichlet;
  throw ValidationError("unknown calibrator family: " + name);
}

Calibrator identity_calibrator(int dimension) {
  Calibrator c;
  c.family = CalibratorFamily::identity;
  c.dimension = dimension;
  validate_calibrator(c);
  return c;
}

Calibrator temperature_calibrator(int dimension, double log_tau, double epsilon) {
  Calibrator c;
  c.family = CalibratorFamily::temperature;
  c.dimension = dimension;
  c.log_tau = log_tau;
  c.epsilon = epsilon;
  validate_calibrator(c);
  return c;
}

Calibrator dirichlet_calibrator(int dimension, std::vector<double> weight,
                                std::vector<double> bias, double epsilon) {
  Calibrator c;
  c.family = CalibratorFamily::dirichlet;
  c.dimension = dimension;
  c.weight = std::move(weight);
  c.bias = std::move(bias);
  c.epsilon = epsilon;
  validate_calibrator(c);
  return c;
}

void validate_calibrator(const Calibrator& c) {
  if (c.dimension < 2) throw ValidationError("calibrator dimension must be >= 2");
  if (!(c.epsilon > 0.0) || !std::isfinite(c.epsilon))
    throw ValidationError("calibrator epsilon must be positive and finite");
  const size_t d = static_cast<size_t>(c.dimension);
  switch (c.family) {
    case CalibratorFamily::identity:
      break;
    case CalibratorFamily::temperature:
      if (!std::isfinite(c.log_tau)) throw ValidationError("log_tau must be finite");
      break;
    case CalibratorFamily::dirichlet: {
      if (c.weight.size() != d * d) throw ValidationError("dirichlet weight must be dimension^2");
      if (c.bias.size() != d) throw ValidationError("dirichlet bias must match dimension");
      for (double v : c.weight)
        if (!std::isfinite(v)) throw ValidationError("dirichlet weight must be finite");
      for (double v : c.bias)
        if (!std::isfinite(v)) throw ValidationError("dirichlet bias must be finite");
      break;
    }
  }
}

SimplexPoint apply(const Calibrator& c, const SimplexPoint& q) {
  validate_calibrator(c);
  if (q.dim() != c.dimension) throw ValidationError("calibrator and belief dimensions differ");
  if (c.family == CalibratorFamily::identity) return q;
  return SimplexPoint(apply_raw(c, q.probs()));
}

double nll(const Calibrator& c, const Dataset& data) {
  validate_calibrator(c);
  validate_dataset(data);
  if (data.records.empty()) throw ValidationError("nll requires a non-empty dataset");
  if (data.space.num_classes() != c.dimension)
    throw ValidationError("calibrator and dataset dimensions differ");
  double acc = 0.0;
  for (const auto& r : data.records) {
    const SimplexPoint q = record_belief(data.space, r);
    const std::vector<double> p = apply_raw(c, q.probs());
    acc += -std::log(p[static_cast<size_t>(r.label)] + c.epsilon);
  }
  return acc / static_cast<double>(data.size());
}

FitResult fit(const Dataset& data, CalibratorFamily family, const FitConfig& config) {
  if (!(config.epsilon > 0.0) || !std::isfinite(config.epsilon))
    throw ValidationError("fit epsilon must be positive and finite");
  if (family == CalibratorFamily::identity) {
    // Nothing to optimize; report the objective at the identity map.
    FitResult out;
    out.calibrator = identity_calibrator(data.space.num_classes());
    out.calibrator.epsilon = config.epsilon;
    out.final_nll = nll(out.calibrator, data);
    out.gradient_norm = 0.0;
    out.iterations = 0;
    out.converged = true;
    return out;
  }
  const FitProblem prob = make_problem(data, family, config.epsilon);
  std::vector<double> x;
  if (family == CalibratorFamily::temperature) {
    x = {0.0};
  } else {
    const size_t d = static_cast<size_t>(prob.c);
    x.assign(d * d + d, 0.0);
    for (size_t i = 0; i < d; ++i) x[i * d + i] = 1.0;
  }
  return minimize(prob, std::move(x), config);
}

FitResult fit_from(const Calibrator& init, const Dataset& data, const FitConfig& config) {
  validate_calibrator(init);
  if (init.dimension != data.space.num_classes())
    throw ValidationError("calibrator and dataset dimensions differ");
  const FitProblem prob = make_problem(data, init.family, init.epsilon);
  return minimize(prob, pack_params(init), config);
}

std::string serialize_calibrator(const Calibrator& c) {
  validate_calibrator(c);
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["family"] = calibrator_family_name(c.family);
  j["dimension"] = c.dimension;
  j["epsilon"] = c.epsilon;
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  if (c.family == CalibratorFamily::temperature) {
    params["log_tau"] = c.log_tau;
  } else if (c.family == CalibratorFamily::dirichlet) {
    params["weight"] = c.weight;
    params["bias"] = c.bias;
  }
  j["parameters"] = std::move(params);
  return j.dump();
}

Calibrator deserialize_calibrator(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("calibrator parse error: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("calibrator file must hold a JSON object");
  if (!j.contains("format_version") || !j["format_version"].is_number_integer() ||
      j["format_version"].get<int>() != 1)
    throw ValidationError("calibrator format_version must be 1");
  for (const char* field : {"family", "dimension", "epsilon", "parameters"}) {
    if (!j.contains(field))
      throw ValidationError(std::string("calibrator file missing field: ") + field);
  }
  Calibrator c;
  c.family = calibrator_family_from_name(j["family"].get<std::string>());
  if (!j["dimension"].is_number_integer())
    throw ValidationError("calibrator dimension must be an integer");
  c.dimension = j["dimension"].get<int>();
  if (!j["epsilon"].is_number()) throw ValidationError("calibrator epsilon must be a number");
  c.epsilon = j["epsilon"].get<double>();
  const auto& params = j["parameters"];
  if (!params.is_object()) throw ValidationError("calibrator parameters must be an object");
  if (c.family == CalibratorFamily::temperature) {
    if (!params.contains("log_tau") || !params["log_tau"].is_number())
      throw ValidationError("temperature calibrator needs numeric log_tau");
    c.log_tau = params["log_tau"].get<double>();
  } else if (c.family == CalibratorFamily::dirichlet) {
    if (!params.contains("weight") || !params["weight"].is_array() ||
        !params.contains("bias") || !params["bias"].is_array())
      throw ValidationError("dirichlet calibrator needs weight and bias arrays");
    c.weight = params["weight"].get<std::vector<double>>();
    c.bias = params["bias"].get<std::vector<double>>();
  }
  validate_calibrator(c);
  return c;
}

}  // namespace taskcal
