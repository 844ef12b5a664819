#include <cmath>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "taskcal/calibrate.hpp"
#include "taskcal/core.hpp"
#include "taskcal/decision.hpp"
#include "taskcal/harness.hpp"
#include "taskcal/io.hpp"
#include "taskcal/losses.hpp"
#include "taskcal/metrics.hpp"

namespace {

using taskcal::Dataset;
using taskcal::SimplexPoint;
using ordered_json = nlohmann::ordered_json;

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty())
    std::cout << text;
  else
    taskcal::write_text_file(out_path, text);
}

taskcal::LatentSpace anonymous_space(int classes) {
  std::vector<std::string> labels;
  labels.reserve(static_cast<size_t>(classes));
  for (int i = 0; i < classes; ++i) labels.push_back(std::to_string(i));
  return taskcal::categorical_space(std::move(labels));
}

taskcal::Calibrator load_calibrator_checked(const std::string& path, int classes) {
  taskcal::Calibrator cal = taskcal::deserialize_calibrator(taskcal::read_text_file(path));
  if (cal.dimension != classes)
    throw taskcal::ValidationError("calibrator dimension does not match the task space");
  return cal;
}

std::vector<SimplexPoint> load_truth(const std::string& path, const Dataset& data) {
  const std::string text = taskcal::read_text_file(path);
  std::istringstream in(text);
  std::string line;
  size_t lineno = 0;
  std::map<std::string, std::vector<double>> by_id;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      throw taskcal::ValidationError("truth line " + std::to_string(lineno) + ": invalid json");
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || !j.contains("probs") ||
        !j["probs"].is_array())
      throw taskcal::ValidationError("truth line " + std::to_string(lineno) +
                                     ": needs 'id' and 'probs'");
    std::vector<double> p;
    double sum = 0.0;
    for (const auto& v : j["probs"]) {
      if (!v.is_number())
        throw taskcal::ValidationError("truth line " + std::to_string(lineno) +
                                       ": probs must be numbers");
      p.push_back(v.get<double>());
      sum += p.back();
    }
    if (std::fabs(sum - 1.0) > 1e-6)
      throw taskcal::ValidationError("truth line " + std::to_string(lineno) +
                                     ": probs must sum to 1 within 1e-6");
    for (auto& v : p) v /= sum;
    by_id[j["id"].get<std::string>()] = std::move(p);
  }
  std::vector<SimplexPoint> out;
  out.reserve(data.size());
  for (const auto& r : data.records) {
    auto it = by_id.find(r.id);
    if (it == by_id.end())
      throw taskcal::ValidationError("truth file has no entry for record " + r.id);
    out.emplace_back(it->second);
  }
  return out;
}

ordered_json metric_json(const taskcal::MetricReport& m) {
  ordered_json j;
  j["mean_task_loss"] = m.mean_task_loss;
  if (m.bas_score) j["bas_score"] = *m.bas_score;
  j["tce"] = m.tce;
  j["ece"] = m.ece;
  j["n"] = m.n;
  return j;
}

struct BeliefColumns {
  std::vector<SimplexPoint> beliefs;
  std::vector<int> labels;
};

BeliefColumns dataset_beliefs(const Dataset& data, const taskcal::Calibrator* cal) {
  BeliefColumns out;
  out.beliefs.reserve(data.size());
  out.labels.reserve(data.size());
  for (const auto& r : data.records) {
    SimplexPoint q = taskcal::record_belief(data.space, r);
    if (cal) q = taskcal::apply(*cal, q);
    out.beliefs.push_back(std::move(q));
    out.labels.push_back(r.label);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"calibration of model beliefs toward task decisions"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  size_t synth_n = 1000;
  int synth_classes = 3;
  uint64_t synth_seed = 0;
  std::string synth_preset = "identity";
  std::string synth_out;
  std::string synth_truth;
  synth->add_option("--n", synth_n, "number of records");
  synth->add_option("--classes", synth_classes, "class count of the categorical space");
  synth->add_option("--preset", synth_preset,
                    "identity, overconfident, underconfident or grouped");
  synth->add_option("--seed", synth_seed, "rng seed");
  synth->add_option("--output", synth_out, "dataset output path (default stdout)");
  synth->add_option("--truth-out", synth_truth, "optional true posterior output path");

  // fit
  auto* fitcmd = app.add_subcommand("fit", "fit a calibrator on a dataset");
  std::string fit_task, fit_input, fit_out;
  std::string fit_family = "dirichlet";
  taskcal::FitConfig fit_config;
  fitcmd->add_option("--task-spec", fit_task, "task spec json file")->required();
  fitcmd->add_option("--input", fit_input, "dataset jsonl")->required();
  fitcmd->add_option("--family", fit_family, "temperature or dirichlet");
  fitcmd->add_option("--max-iters", fit_config.max_iterations, "iteration cap");
  fitcmd->add_option("--tol", fit_config.gradient_tolerance,
                     "stop when the gradient norm falls below this");
  fitcmd->add_option("--seed", fit_config.seed, "recorded in the calibrator provenance");
  fitcmd->add_option("--output", fit_out, "calibrator output path")->required();

  // apply
  auto* applycmd = app.add_subcommand("apply", "write calibrated beliefs for a dataset");
  std::string apply_cal, apply_input, apply_out;
  applycmd->add_option("--calibrator", apply_cal, "calibrator json")->required();
  applycmd->add_option("--input", apply_input, "dataset jsonl")->required();
  applycmd->add_option("--output", apply_out, "output path (default stdout)");

  // decode
  auto* decodecmd = app.add_subcommand("decode", "minimum Bayes risk actions for a dataset");
  std::string decode_task, decode_cal, decode_input, decode_out;
  decodecmd->add_option("--task-spec", decode_task, "task spec json file")->required();
  decodecmd->add_option("--calibrator", decode_cal, "optional calibrator json");
  decodecmd->add_option("--input", decode_input, "dataset jsonl")->required();
  decodecmd->add_option("--output", decode_out, "output path (default stdout)");

  // eval
  auto* evalcmd = app.add_subcommand("eval", "task loss and calibration metrics");
  std::string eval_task, eval_input, eval_cal, eval_out;
  int eval_tce_bins = 4;
  int eval_ece_bins = 10;
  evalcmd->add_option("--task-spec", eval_task, "task spec json file")->required();
  evalcmd->add_option("--input", eval_input, "dataset jsonl")->required();
  evalcmd->add_option("--calibrator", eval_cal, "optional calibrator json");
  evalcmd->add_option("--tce-bins", eval_tce_bins, "simplex bins per dimension");
  evalcmd->add_option("--ece-bins", eval_ece_bins, "confidence bins");
  evalcmd->add_option("--output", eval_out, "output path (default stdout)");

  // tce
  auto* tcecmd = app.add_subcommand("tce", "task calibration error only");
  std::string tce_task, tce_input, tce_out;
  std::string tce_estimator = "binned";
  int tce_bins = 4;
  double tce_bandwidth = 0.01;
  tcecmd->add_option("--task-spec", tce_task, "task spec json file")->required();
  tcecmd->add_option("--input", tce_input, "dataset jsonl")->required();
  tcecmd->add_option("--estimator", tce_estimator, "binned or kde");
  tcecmd->add_option("--bins-per-dim", tce_bins, "simplex bins per dimension (binned)");
  tcecmd->add_option("--bandwidth", tce_bandwidth, "kernel bandwidth (kde)");
  tcecmd->add_option("--output", tce_out, "output path (default stdout)");

  // cv
  auto* cvcmd = app.add_subcommand("cv", "cross-validated calibration experiment");
  std::string cv_task, cv_input, cv_truth, cv_report;
  taskcal::ExperimentConfig cv_config;
  std::string cv_family = "dirichlet";
  cvcmd->add_option("--task-spec", cv_task, "task spec json file")->required();
  cvcmd->add_option("--input", cv_input, "dataset jsonl")->required();
  cvcmd->add_option("--family", cv_family, "identity, temperature or dirichlet");
  cvcmd->add_option("--folds", cv_config.folds, "fold count");
  cvcmd->add_option("--seed", cv_config.seed, "rng seed for the fold split");
  cvcmd->add_option("--max-iters", cv_config.fit.max_iterations, "iteration cap");
  cvcmd->add_option("--tol", cv_config.fit.gradient_tolerance,
                    "stop when the gradient norm falls below this");
  cvcmd->add_option("--tce-bins", cv_config.tce.bins_per_dim, "simplex bins per dimension");
  cvcmd->add_option("--ece-bins", cv_config.ece_bins, "confidence bins");
  cvcmd->add_option("--truth", cv_truth, "true posterior jsonl, enables refinement");
  cvcmd->add_option("--report", cv_report, "report output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*synth) {
      const taskcal::LatentSpace space = anonymous_space(synth_classes);
      const taskcal::DistortionSpec spec = taskcal::preset_distortion(synth_preset, synth_classes);
      const taskcal::SyntheticData syn =
          taskcal::generate_synthetic(space, synth_n, spec, synth_seed);
      emit(taskcal::save_dataset_text(syn.data), synth_out);
      if (!synth_truth.empty()) {
        std::string text;
        for (size_t i = 0; i < syn.data.size(); ++i) {
          ordered_json j;
          j["id"] = syn.data.records[i].id;
          j["probs"] = syn.p_star[i].probs();
          text += j.dump();
          text += '\n';
        }
        taskcal::write_text_file(synth_truth, text);
      }
    } else if (*fitcmd) {
      const taskcal::TaskSpec task = taskcal::load_task_spec(fit_task);
      const Dataset data = taskcal::load_dataset_file(fit_input, task.space);
      const taskcal::FitResult res =
          taskcal::fit(data, taskcal::calibrator_family_from_name(fit_family), fit_config);
      taskcal::write_text_file(fit_out, taskcal::serialize_calibrator(res.calibrator) + "\n");
      ordered_json j;
      j["final_nll"] = res.final_nll;
      j["gradient_norm"] = res.gradient_norm;
      j["iterations"] = res.iterations;
      j["converged"] = res.converged;
      std::cout << j.dump() << '\n';
    } else if (*applycmd) {
      const taskcal::Calibrator cal =
          taskcal::deserialize_calibrator(taskcal::read_text_file(apply_cal));
      const Dataset data =
          taskcal::load_dataset_file(apply_input, anonymous_space(cal.dimension));
      std::string text;
      for (const auto& r : data.records) {
        ordered_json j;
        j["id"] = r.id;
        j["probs"] = taskcal::apply(cal, taskcal::record_belief(data.space, r)).probs();
        text += j.dump();
        text += '\n';
      }
      emit(text, apply_out);
    } else if (*decodecmd) {
      const taskcal::TaskSpec task = taskcal::load_task_spec(decode_task);
      const taskcal::LossMatrix loss = taskcal::build_loss_matrix(task.space, task.loss);
      const Dataset data = taskcal::load_dataset_file(decode_input, task.space);
      std::optional<taskcal::Calibrator> cal;
      if (!decode_cal.empty())
        cal = load_calibrator_checked(decode_cal, task.space.num_classes());
      std::string text;
      for (const auto& r : data.records) {
        SimplexPoint q = taskcal::record_belief(data.space, r);
        if (cal) q = taskcal::apply(*cal, q);
        const int action = taskcal::mbr_decode(q, loss);
        ordered_json j;
        j["id"] = r.id;
        j["action_index"] = action;
        j["action_label"] = task.space.labels[static_cast<size_t>(action)];
        text += j.dump();
        text += '\n';
      }
      emit(text, decode_out);
    } else if (*evalcmd) {
      const taskcal::TaskSpec task = taskcal::load_task_spec(eval_task);
      const taskcal::LossMatrix loss = taskcal::build_loss_matrix(task.space, task.loss);
      const Dataset data = taskcal::load_dataset_file(eval_input, task.space);
      taskcal::Calibrator cal = taskcal::identity_calibrator(task.space.num_classes());
      if (!eval_cal.empty()) cal = load_calibrator_checked(eval_cal, task.space.num_classes());
      const BeliefColumns cols = dataset_beliefs(data, &cal);
      std::vector<int> actions(cols.beliefs.size());
      for (size_t i = 0; i < cols.beliefs.size(); ++i)
        actions[i] = taskcal::mbr_decode(cols.beliefs[i], loss);
      taskcal::MetricReport m;
      m.mean_task_loss = taskcal::expected_task_loss(cols.labels, actions, loss);
      if (task.loss.kind == taskcal::LossKind::bas) m.bas_score = -m.mean_task_loss;
      m.tce = taskcal::tce_binned(cols.beliefs, cols.labels, loss,
                                  taskcal::TceBinConfig{eval_tce_bins});
      m.ece = taskcal::ece_confidence(cols.beliefs, cols.labels, eval_ece_bins);
      m.n = static_cast<int64_t>(cols.beliefs.size());
      ordered_json j;
      j["metrics"] = metric_json(m);
      j["action_movement"] = taskcal::action_movement_matrix(data, cal, loss);
      emit(j.dump(2) + "\n", eval_out);
    } else if (*tcecmd) {
      const taskcal::TaskSpec task = taskcal::load_task_spec(tce_task);
      const taskcal::LossMatrix loss = taskcal::build_loss_matrix(task.space, task.loss);
      const Dataset data = taskcal::load_dataset_file(tce_input, task.space);
      const BeliefColumns cols = dataset_beliefs(data, nullptr);
      double value = 0.0;
      if (tce_estimator == "binned") {
        value = taskcal::tce_binned(cols.beliefs, cols.labels, loss,
                                    taskcal::TceBinConfig{tce_bins});
      } else if (tce_estimator == "kde") {
        value = taskcal::tce_kde(cols.beliefs, cols.labels, loss, tce_bandwidth);
      } else {
        throw taskcal::ValidationError("unknown tce estimator: " + tce_estimator);
      }
      ordered_json j;
      j["estimator"] = tce_estimator;
      j["tce"] = value;
      emit(j.dump(2) + "\n", tce_out);
    } else if (*cvcmd) {
      const taskcal::TaskSpec task = taskcal::load_task_spec(cv_task);
      const Dataset data = taskcal::load_dataset_file(cv_input, task.space);
      cv_config.family = taskcal::calibrator_family_from_name(cv_family);
      std::optional<std::vector<SimplexPoint>> truth;
      if (!cv_truth.empty()) truth = load_truth(cv_truth, data);
      const taskcal::ExperimentResult res =
          taskcal::run_experiment(data, task.loss, cv_config, truth ? &*truth : nullptr);
      emit(taskcal::emit_report(res), cv_report);
    }
  } catch (const taskcal::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const taskcal::NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
