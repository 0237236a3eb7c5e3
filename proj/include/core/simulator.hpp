#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "core/backends.hpp"
#include "core/losses.hpp"
#include "core/protocol.hpp"
#include "core/rng.hpp"
#include "core/trace.hpp"

namespace core {

// A named solution strategy. body_text carries the operation words; traces
// render as a <strategy id="..."> block around body_text plus a "####"
// answer line, so the strategy is recoverable from the trace and the
// teacher-context pipeline sees realistic block structure.
struct StrategyTemplate {
  std::string id;
  std::string body_text;
};

// One problem plus, per (model, strategy), the probability that executing
// that strategy solves it.
struct TaskItem {
  Problem problem;
  std::vector<std::vector<double>> success_prob;  // [model][strategy]
};

struct SyntheticTask {
  std::string name;
  std::vector<StrategyTemplate> strategies;
  std::vector<TaskItem> items;

  void validate(int num_models) const;
};

// Categorical policy over strategies, with one learned additive bias per
// strategy applied when that strategy is the hinted one.
struct ToyPolicy {
  std::vector<double> logits;
  std::vector<double> hint_bias;

  std::vector<double> probs(std::optional<int> hinted_strategy) const;
  double strategy_logprob(int strategy, std::optional<int> hinted_strategy) const;
};

// The hinted strategy named in a teacher context, recovered from the
// rendered body text; nullopt when no strategy marker is present.
std::optional<int> strategy_from_hint_text(const SyntheticTask& task, const std::string& text);

// Strategy index recovered from a rendered trace's block tag. Throws
// contract_error when the text carries no recognizable tag.
int strategy_from_trace_text(const SyntheticTask& task, const std::string& text);

// Renders one trace for the given model: draws a strategy from the
// (optionally hinted) policy, then draws success against the item's
// probability. Wrong answers append a digit to the gold answer so they
// never normalize equal to it.
std::string render_toy_trace(const SyntheticTask& task, const TaskItem& item, int model_index,
                             const ToyPolicy& policy, std::optional<int> hinted_strategy,
                             sample_rng& rng);

// Exact length-1 log-prob sequences for a rendered trace under the current,
// sampling-time, and reference parameter snapshots.
TokenLogProbs policy_logprobs(const SyntheticTask& task, const ToyPolicy& current,
                              const ToyPolicy& old_snapshot, const ToyPolicy& ref_snapshot,
                              const Trace& trace, std::optional<int> hinted_strategy);

// Prompt-in/text-out adapter around a toy policy. Recovers the problem from
// the question line and the hinted strategy from the hint section.
class ToyBackend : public Backend {
 public:
  ToyBackend(const SyntheticTask& task, const ToyPolicy& policy, int model_index);
  std::string generate(const GenerationRequest& request) override;

 private:
  const SyntheticTask& task_;
  const ToyPolicy& policy_;
  int model_index_;
};

struct TrainOptions {
  int epochs = 1;
  int batch_problems = 4;
  double learning_rate = 1e-5;
  double max_grad_norm = 1.0;
  LossKind loss = LossKind::Grpo;
  LossConfig loss_cfg;
  int jobs = 1;
  bool keep_final_episodes = true;
};

struct EpochMetrics {
  int epoch = 0;
  std::vector<double> mean_reward;  // per model
  std::vector<double> pass_at_k;    // per model, over round A
  double team_pass_at_k = 0.0;      // over round A
  int rescue_count = 0;
  double mean_advantage_abs = 0.0;
};

struct TrainResult {
  std::vector<ToyPolicy> policies;
  std::vector<EpochMetrics> history;
  std::vector<InstanceEpisode> final_episodes;  // last epoch, problem order
};

// Two-round protocol driving toy policies, scored by the reward engine,
// updated by plain gradient descent on the selected loss. Problems advance
// in ascending id order; batch gradients are accumulated in that order
// regardless of worker count, so results never depend on --jobs.
TrainResult train(const SyntheticTask& task, std::vector<ToyPolicy> initial,
                  const ProtocolConfig& protocol_cfg, const RewardConfig& reward_cfg,
                  const TrainOptions& options);

// Cold evaluation of toy policies: k samples per model per problem.
CorrectnessTable evaluate_toy(const SyntheticTask& task, const std::vector<ToyPolicy>& policies,
                              int k, std::uint64_t seed, int jobs = 1);

// The bundled complementary task: two models, two strategies, 64 problems;
// each problem is solvable by exactly one strategy, model 1 executes only
// the first strategy well and model 2 only the second. Both policies start
// biased toward the first strategy, so the second model has to discover its
// own strength; the teacher round is what surfaces those successes.
SyntheticTask complementary_v1();
std::vector<ToyPolicy> complementary_v1_initial_policies();

// Toy-scale learning rate used by the bundled task's reference runs.
double complementary_v1_learning_rate();

// Loads a task from JSON: {"name", "strategies": [{"id", "body_text"}],
// "problems": [{"id", "question", "answer", "success_prob": [[...]]}]}.
SyntheticTask load_task_json(const std::string& path);

}  // namespace core
