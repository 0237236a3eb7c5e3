#pragma once

#include <optional>
#include <string>
#include <vector>

namespace core {

// A problem instance. gold_answer is stored pre-normalized: it must survive
// normalize_answer unchanged, which the dataset loader enforces.
struct Problem {
  std::string id;
  std::string question;
  std::string gold_answer;
};

// Round a trace was sampled in: cold (A) or with teacher context (B).
enum class Round { ColdA, ContextedB };

const char* round_name(Round r);           // "A" or "B"
Round round_from_name(const std::string&);  // inverse, throws data_error

struct Trace {
  std::string problem_id;
  int model_id = 1;  // 1..N
  Round round = Round::ColdA;
  bool hint_shown = false;  // only ever true in round B
  int sample_index = 0;     // 0-based within (model, round)
  std::string text;
  std::optional<std::string> extracted_answer;  // normalized
  int token_count_estimate = 0;
};

// chars / 4, rounded up. The crude estimate used for every budget check.
int token_estimate(const std::string& text);

// Canonical answer form: lowercase, trimmed, no whitespace around commas,
// no trailing periods, thousands separators stripped from pure numerics.
// Idempotent by construction.
std::string normalize_answer(const std::string& raw);

// Scans for answer markers and returns the normalized span of the last one.
// Marker kinds: <final_answer> tags, "####" lines, \boxed{...}, and
// "Final answer:" lines. At equal positions the kinds win in that order.
// Spans that normalize to an empty string do not count as matches.
std::optional<std::string> extract_answer(const std::string& text);

// Fills extracted_answer and token_count_estimate from text.
Trace make_trace(std::string problem_id, int model_id, Round round, bool hint_shown,
                 int sample_index, std::string text);

// 1 iff the trace extracted an answer equal to the normalized gold answer.
int correctness(const Trace& trace, const std::string& gold_answer);

}  // namespace core
