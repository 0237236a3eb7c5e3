#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core/backends.hpp"
#include "core/metrics.hpp"
#include "core/rewards.hpp"
#include "core/trace.hpp"

namespace core {

struct ProtocolConfig {
  int k_cold = 2;                    // samples per model in round A
  int k_contexted = 1;               // samples per model in round B
  double p_hint = 0.5;               // per-sample probability the hint is shown
  int context_budget_tokens = 1536;  // teacher context cap
  int team_size = 2;
  bool enable_round_b = true;
  std::uint64_t seed = 0;
  int max_new_tokens = 3072;
  double temperature = 1.0;
};

// Answer-stripped excerpt of the teacher trace handed to round B.
struct TeacherContext {
  int source_model_id = 0;
  int source_sample_index = 0;
  std::string text;            // empty text means: never show a hint
  int token_count_estimate = 0;
};

struct InstanceEpisode {
  Problem problem;
  std::vector<Trace> round_a_traces;
  std::vector<int> round_a_success;  // per model, index model_id - 1
  std::optional<TeacherContext> teacher;
  std::vector<Trace> round_b_traces;
  std::vector<RewardBreakdown> breakdowns;  // round A block, then round B
  AdvantageBatch advantages;

  std::size_t trace_count() const { return round_a_traces.size() + round_b_traces.size(); }
  const Trace& trace_at(std::size_t i) const {
    return i < round_a_traces.size() ? round_a_traces[i]
                                     : round_b_traces[i - round_a_traces.size()];
  }
  bool is_round_b_index(std::size_t i) const { return i >= round_a_traces.size(); }
};

// Byte-exact prompt templates. A context with empty text renders cold.
std::string render_prompt(const Problem& problem, const std::optional<TeacherContext>& ctx);

// True if text still contains any answer-marker pattern.
bool contains_answer_marker(const std::string& text);

// Drops answer-marker lines and inline marker spans; guarantees no marker
// pattern survives in the result.
std::string strip_answer_markers(const std::string& text);

// Cold round: k_cold samples per model, deterministic per-sample streams.
// Backend failures abort the instance with the (model, sample) attached.
std::vector<Trace> run_round_a(const Problem& problem,
                               std::span<Backend* const> backends,
                               const ProtocolConfig& cfg);

// Highest exploitation reward among correct traces; ties prefer the shorter
// trace, then lower model_id, then lower sample_index. Absent if none correct.
std::optional<std::size_t> select_teacher(std::span<const Trace> traces,
                                          const std::string& gold,
                                          std::span<const double> r_exploit);

// Strategy-block extraction (when block delimiters are present and one
// block's own extracted outcome matches the teacher's answer), marker
// stripping, then prefix truncation to the token budget.
TeacherContext build_teacher_context(const Trace& teacher, const ProtocolConfig& cfg);

// Contexted round: k_contexted samples per model; each sample flips its own
// hint coin with probability p_hint when a non-empty context exists.
std::vector<Trace> run_round_b(const Problem& problem,
                               std::span<Backend* const> backends,
                               const std::optional<TeacherContext>& teacher,
                               const ProtocolConfig& cfg);

// Full two-round instance: round A, teacher selection, round B, reward
// composition, group-normalized advantages.
InstanceEpisode run_instance(const Problem& problem, std::span<Backend* const> backends,
                             const ProtocolConfig& protocol_cfg, const RewardConfig& reward_cfg,
                             const Featurizer& feat = Featurizer::shared_default());

// Round-A-only evaluation: k samples per model at an eval token budget,
// producing a correctness table in problem order.
CorrectnessTable run_cold_eval(std::span<const Problem> problems,
                               std::span<Backend* const> backends, int k,
                               std::uint64_t seed, int max_new_tokens, int jobs = 1);

}  // namespace core
