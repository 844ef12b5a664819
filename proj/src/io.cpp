#include "taskcal/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace taskcal {

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

[[noreturn]] void line_error(size_t line, const std::string& what) {
  throw ValidationError("line " + std::to_string(line) + ": " + what);
}

PredictionRecord parse_record(const json& j, const LatentSpace& space, size_t line) {
  if (!j.is_object()) line_error(line, "record must be a json object");
  PredictionRecord rec;
  if (!j.contains("id") || !j["id"].is_string()) line_error(line, "missing string field 'id'");
  rec.id = j["id"].get<std::string>();
  const bool has_counts = j.contains("counts");
  const bool has_probs = j.contains("probs");
  if (has_counts && has_probs) line_error(line, "ambiguous belief: both 'counts' and 'probs' set");
  if (!has_counts && !has_probs) line_error(line, "record needs one of 'counts' or 'probs'");
  const int c = space.num_classes();
  if (has_counts) {
    if (!j["counts"].is_array()) line_error(line, "'counts' must be an array");
    for (const auto& v : j["counts"]) {
      if (!v.is_number_integer()) line_error(line, "'counts' entries must be integers");
      const int64_t n = v.get<int64_t>();
      if (n < 0) line_error(line, "'counts' entries must be non-negative");
      rec.counts.push_back(n);
    }
    if (static_cast<int>(rec.counts.size()) != c)
      line_error(line, "'counts' needs one entry per class");
    int64_t sum = 0;
    for (int64_t v : rec.counts) sum += v;
    if (sum < 1) line_error(line, "'counts' must sum to at least 1");
  } else {
    if (!j["probs"].is_array()) line_error(line, "'probs' must be an array");
    double sum = 0.0;
    for (const auto& v : j["probs"]) {
      if (!v.is_number()) line_error(line, "'probs' entries must be numbers");
      const double p = v.get<double>();
      if (!std::isfinite(p) || p < 0.0) line_error(line, "'probs' entries must be finite and non-negative");
      rec.probs.push_back(p);
      sum += p;
    }
    if (static_cast<int>(rec.probs.size()) != c)
      line_error(line, "'probs' needs one entry per class");
    if (std::fabs(sum - 1.0) > 1e-6) line_error(line, "'probs' must sum to 1 within 1e-6");
    for (auto& p : rec.probs) p /= sum;
  }
  if (!j.contains("label") || !j["label"].is_number_integer())
    line_error(line, "missing integer field 'label'");
  rec.label = j["label"].get<int>();
  if (rec.label < 0 || rec.label >= c) line_error(line, "'label' out of range");
  return rec;
}

}  // namespace

Dataset load_dataset_text(const std::string& text, const LatentSpace& space) {
  validate_space(space);
  Dataset data;
  data.space = space;
  std::istringstream in(text);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error&) {
      line_error(lineno, "invalid json");
    }
    data.records.push_back(parse_record(j, space, lineno));
  }
  if (data.records.empty()) throw ValidationError("dataset has no records");
  validate_dataset(data);
  return data;
}

Dataset load_dataset_file(const std::string& path, const LatentSpace& space) {
  return load_dataset_text(read_text_file(path), space);
}

std::string save_dataset_text(const Dataset& data) {
  validate_dataset(data);
  std::string out;
  for (const auto& r : data.records) {
    ordered_json j;
    j["id"] = r.id;
    if (r.has_counts())
      j["counts"] = r.counts;
    else
      j["probs"] = r.probs;
    j["label"] = r.label;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void save_dataset_file(const Dataset& data, const std::string& path) {
  write_text_file(path, save_dataset_text(data));
}

TaskSpec parse_task_spec(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error&) {
    throw ValidationError("task spec is not valid json");
  }
  if (!j.is_object()) throw ValidationError("task spec must be a json object");
  if (!j.contains("format_version") || !j["format_version"].is_number_integer() ||
      j["format_version"].get<int>() != 1)
    throw ValidationError("task spec needs format_version 1");
  if (!j.contains("space") || !j["space"].is_object())
    throw ValidationError("task spec needs a 'space' object");
  if (!j.contains("loss") || !j["loss"].is_object())
    throw ValidationError("task spec needs a 'loss' object");

  const json& js = j["space"];
  if (!js.contains("kind") || !js["kind"].is_string())
    throw ValidationError("space needs a string 'kind'");
  const SpaceKind kind = space_kind_from_name(js["kind"].get<std::string>());

  auto read_labels = [&]() {
    if (!js.contains("labels") || !js["labels"].is_array())
      throw ValidationError("space needs a 'labels' array");
    std::vector<std::string> labels;
    for (const auto& v : js["labels"]) {
      if (!v.is_string()) throw ValidationError("space labels must be strings");
      labels.push_back(v.get<std::string>());
    }
    return labels;
  };

  TaskSpec spec;
  switch (kind) {
    case SpaceKind::categorical:
      spec.space = categorical_space(read_labels());
      break;
    case SpaceKind::ordinal: {
      std::vector<std::string> labels = read_labels();
      std::vector<double> values;
      if (js.contains("values")) {
        if (!js["values"].is_array()) throw ValidationError("space 'values' must be an array");
        for (const auto& v : js["values"]) {
          if (!v.is_number()) throw ValidationError("space values must be numbers");
          values.push_back(v.get<double>());
        }
      } else {
        for (size_t i = 0; i < labels.size(); ++i) values.push_back(static_cast<double>(i));
      }
      spec.space = ordinal_space(std::move(labels), std::move(values));
      break;
    }
    case SpaceKind::answer_abstain:
      spec.space = answer_abstain_space();
      break;
    case SpaceKind::binary_decision:
      spec.space = binary_decision_space();
      break;
    case SpaceKind::product: {
      if (!js.contains("factor_sizes") || !js["factor_sizes"].is_array())
        throw ValidationError("product space needs a 'factor_sizes' array");
      std::vector<int> sizes;
      for (const auto& v : js["factor_sizes"]) {
        if (!v.is_number_integer()) throw ValidationError("factor sizes must be integers");
        sizes.push_back(v.get<int>());
      }
      std::vector<std::vector<double>> values(sizes.size());
      if (js.contains("factor_values")) {
        if (!js["factor_values"].is_array() || js["factor_values"].size() != sizes.size())
          throw ValidationError("'factor_values' needs one array per factor");
        for (size_t f = 0; f < sizes.size(); ++f) {
          const auto& arr = js["factor_values"][f];
          if (!arr.is_array()) throw ValidationError("'factor_values' needs one array per factor");
          for (const auto& v : arr) {
            if (!v.is_number()) throw ValidationError("factor values must be numbers");
            values[f].push_back(v.get<double>());
          }
        }
      } else {
        for (size_t f = 0; f < sizes.size(); ++f)
          for (int i = 0; i < (sizes[f] < 0 ? 0 : sizes[f]); ++i)
            values[f].push_back(static_cast<double>(i));
      }
      std::vector<LatentSpace> factors;
      for (size_t f = 0; f < sizes.size(); ++f) {
        if (sizes[f] < 2) throw ValidationError("each factor needs at least 2 classes");
        if (static_cast<int>(values[f].size()) != sizes[f])
          throw ValidationError("factor values must match the factor size");
        std::vector<std::string> labels;
        for (int i = 0; i < sizes[f]; ++i) labels.push_back(std::to_string(i));
        factors.push_back(ordinal_space(std::move(labels), values[f]));
      }
      spec.space = product_space(factors);
      break;
    }
  }

  const json& jl = j["loss"];
  if (!jl.contains("kind") || !jl["kind"].is_string())
    throw ValidationError("loss needs a string 'kind'");
  spec.loss.kind = loss_kind_from_name(jl["kind"].get<std::string>());
  if (jl.contains("t")) {
    if (spec.loss.kind != LossKind::bas)
      throw ValidationError("loss 't' only applies to the bas loss");
    if (!jl["t"].is_number()) throw ValidationError("loss 't' must be a number");
    spec.loss.t = jl["t"].get<double>();
  }
  validate_space(spec.space);
  return spec;
}

TaskSpec load_task_spec(const std::string& path) { return parse_task_spec(read_text_file(path)); }

std::string serialize_task_spec(const TaskSpec& spec) {
  validate_space(spec.space);
  ordered_json j;
  j["format_version"] = 1;
  ordered_json js;
  js["kind"] = space_kind_name(spec.space.kind);
  switch (spec.space.kind) {
    case SpaceKind::categorical:
      js["labels"] = spec.space.labels;
      break;
    case SpaceKind::ordinal:
      js["labels"] = spec.space.labels;
      js["values"] = spec.space.values;
      break;
    case SpaceKind::answer_abstain:
    case SpaceKind::binary_decision:
      break;
    case SpaceKind::product:
      js["factor_sizes"] = spec.space.factor_sizes;
      js["factor_values"] = spec.space.factor_values;
      break;
  }
  j["space"] = js;
  ordered_json jl;
  jl["kind"] = loss_kind_name(spec.loss.kind);
  if (spec.loss.kind == LossKind::bas) jl["t"] = spec.loss.t;
  j["loss"] = jl;
  return j.dump(2) + "\n";
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open file for writing: " + path);
  out << content;
  if (!out) throw ValidationError("failed writing file: " + path);
}

}  // namespace taskcal
