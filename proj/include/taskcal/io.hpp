#pragma once

#include <string>

#include "taskcal/core.hpp"
#include "taskcal/losses.hpp"

namespace taskcal {

// JSONL, one record per line: {"id": str, "counts": [ints] | "probs": [floats],
// "label": int}. Exactly one of counts/probs per record. Probability vectors
// whose sum is within 1e-6 of one are renormalized, anything further off is
// rejected. Errors carry the offending line number.
Dataset load_dataset_text(const std::string& text, const LatentSpace& space);
Dataset load_dataset_file(const std::string& path, const LatentSpace& space);

std::string save_dataset_text(const Dataset& data);
void save_dataset_file(const Dataset& data, const std::string& path);

struct TaskSpec {
  LatentSpace space;
  LossSpec loss;
};

// JSON {"format_version": 1, "space": {...}, "loss": {...}}.
// space.kind selects the shape:
//   categorical      labels
//   ordinal          labels, optional values (default 0..C-1)
//   answer_abstain   nothing else
//   binary_decision  nothing else
//   product          factor_sizes, optional factor_values
// loss.kind is one of l1, exact_match, separable_l1, bas; bas takes an
// optional threshold t (default 0.25).
TaskSpec parse_task_spec(const std::string& text);
TaskSpec load_task_spec(const std::string& path);
std::string serialize_task_spec(const TaskSpec& spec);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace taskcal
