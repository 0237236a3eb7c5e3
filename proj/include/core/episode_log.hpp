#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core/io_util.hpp"
#include "core/protocol.hpp"

namespace core {

// One JSON record per trace (components and advantage included) and one per
// teacher context, ordered by (problem_id, model_id, round, sample_index)
// with the teacher record leading its problem's block.
std::vector<json> episode_records(const InstanceEpisode& ep);
std::string episode_log_to_string(std::span<const InstanceEpisode> episodes);

// Traces rebuilt from log records, grouped per problem in log order.
// Answers and correctness are not trusted from the file; they are
// recomputed from the text by make_trace.
struct ParsedEpisode {
  std::string problem_id;
  std::vector<Trace> round_a;
  std::vector<Trace> round_b;
  std::optional<json> teacher_record;
  std::vector<json> trace_records;  // original records, canonical order
};
std::vector<ParsedEpisode> parse_episode_log(const std::vector<json>& records);

// JSON-lines dataset: {"id", "question", "answer"} per line. Enforces
// non-empty unique ids and pre-normalized answers.
std::vector<Problem> load_dataset(const std::string& path);
std::string dataset_to_string(std::span<const Problem> problems);

// Correctness-table log: one record per (problem, model) with the sample
// outcomes, ordered by (problem_id, model_id).
std::string table_to_string(const CorrectnessTable& table);
CorrectnessTable table_from_records(const std::vector<json>& records);

}  // namespace core
