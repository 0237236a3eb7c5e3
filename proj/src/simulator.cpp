#include "core/simulator.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>

#include "core/errors.hpp"
#include "core/io_util.hpp"
#include "core/rewards.hpp"

namespace core {

namespace {

std::string lower_copy(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::vector<double> softmax(const std::vector<double>& z) {
  double mx = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(z[i] - mx);
    total += out[i];
  }
  for (double& p : out) p /= total;
  return out;
}

// Flat parameter gradient (logits then hint_bias) for one model.
struct PolicyGrad {
  std::vector<double> d_logits;
  std::vector<double> d_hint_bias;
  int traces = 0;

  void init(std::size_t n) {
    d_logits.assign(n, 0.0);
    d_hint_bias.assign(n, 0.0);
    traces = 0;
  }
};

}  // namespace

void SyntheticTask::validate(int num_models) const {
  if (strategies.empty()) throw config_error("task '" + name + "' has no strategies");
  if (items.empty()) throw config_error("task '" + name + "' has no problems");
  for (const auto& item : items) {
    if (static_cast<int>(item.success_prob.size()) != num_models) {
      throw config_error("task '" + name + "', problem " + item.problem.id +
                         ": success_prob rows != team size");
    }
    for (const auto& row : item.success_prob) {
      if (row.size() != strategies.size()) {
        throw config_error("task '" + name + "', problem " + item.problem.id +
                           ": success_prob cols != strategy count");
      }
      for (double p : row) {
        if (p < 0.0 || p > 1.0) {
          throw config_error("task '" + name + "', problem " + item.problem.id +
                             ": success probability outside [0, 1]");
        }
      }
    }
    if (normalize_answer(item.problem.gold_answer) != item.problem.gold_answer) {
      throw config_error("task '" + name + "', problem " + item.problem.id +
                         ": gold answer is not normalized");
    }
  }
}

std::vector<double> ToyPolicy::probs(std::optional<int> hinted_strategy) const {
  if (logits.empty() || hint_bias.size() != logits.size()) {
    throw contract_error("toy policy has inconsistent parameter shapes");
  }
  std::vector<double> z = logits;
  if (hinted_strategy) {
    std::size_t h = static_cast<std::size_t>(*hinted_strategy);
    if (h >= z.size()) throw contract_error("hinted strategy out of range");
    z[h] += hint_bias[h];
  }
  return softmax(z);
}

double ToyPolicy::strategy_logprob(int strategy, std::optional<int> hinted_strategy) const {
  auto p = probs(hinted_strategy);
  std::size_t s = static_cast<std::size_t>(strategy);
  if (s >= p.size()) throw contract_error("strategy index out of range");
  return std::log(p[s]);
}

std::optional<int> strategy_from_hint_text(const SyntheticTask& task,
                                           const std::string& text) {
  const std::string lower = lower_copy(text);
  for (std::size_t s = 0; s < task.strategies.size(); ++s) {
    if (lower.find("strategy " + lower_copy(task.strategies[s].id)) != std::string::npos) {
      return static_cast<int>(s);
    }
  }
  return std::nullopt;
}

int strategy_from_trace_text(const SyntheticTask& task, const std::string& text) {
  const std::string open = "<strategy id=\"";
  auto p = text.find(open);
  if (p == std::string::npos) {
    throw contract_error("trace text carries no strategy tag");
  }
  auto end = text.find('"', p + open.size());
  if (end == std::string::npos) throw contract_error("unterminated strategy tag");
  std::string id = text.substr(p + open.size(), end - p - open.size());
  for (std::size_t s = 0; s < task.strategies.size(); ++s) {
    if (task.strategies[s].id == id) return static_cast<int>(s);
  }
  throw contract_error("unknown strategy id in trace: " + id);
}

std::string render_toy_trace(const SyntheticTask& task, const TaskItem& item, int model_index,
                             const ToyPolicy& policy, std::optional<int> hinted_strategy,
                             sample_rng& rng) {
  if (model_index < 0 || model_index >= static_cast<int>(item.success_prob.size())) {
    throw contract_error("render_toy_trace: model index out of range");
  }
  auto p = policy.probs(hinted_strategy);
  int s = rng.categorical(p);
  double ok_prob = item.success_prob[static_cast<std::size_t>(model_index)]
                                    [static_cast<std::size_t>(s)];
  bool ok = rng.bernoulli(ok_prob);
  const std::string& gold = item.problem.gold_answer;
  std::string answer = ok ? gold : gold + "1";
  const auto& st = task.strategies[static_cast<std::size_t>(s)];
  return "<strategy id=\"" + st.id + "\">\n" + st.body_text + "\n#### " + answer +
         "\n</strategy>";
}

TokenLogProbs policy_logprobs(const SyntheticTask& task, const ToyPolicy& current,
                              const ToyPolicy& old_snapshot, const ToyPolicy& ref_snapshot,
                              const Trace& trace, std::optional<int> hinted_strategy) {
  int s = strategy_from_trace_text(task, trace.text);
  TokenLogProbs t;
  t.new_logp.push_back(current.strategy_logprob(s, hinted_strategy));
  t.old_logp.push_back(old_snapshot.strategy_logprob(s, hinted_strategy));
  t.ref_logp.push_back(ref_snapshot.strategy_logprob(s, hinted_strategy));
  return t;
}

ToyBackend::ToyBackend(const SyntheticTask& task, const ToyPolicy& policy, int model_index)
    : task_(task), policy_(policy), model_index_(model_index) {}

std::string ToyBackend::generate(const GenerationRequest& request) {
  if (!request.seed_hint) throw backend_error("toy backend needs a seed hint");

  const std::string& prompt = request.prompt;
  const std::string q_prefix = "Question: ";
  if (prompt.rfind(q_prefix, 0) != 0) {
    throw backend_error("toy backend: unrecognized prompt shape");
  }
  std::size_t q_end = prompt.find("\n\n", q_prefix.size());
  if (q_end == std::string::npos) throw backend_error("toy backend: unterminated question");
  std::string question = prompt.substr(q_prefix.size(), q_end - q_prefix.size());

  std::optional<int> hinted;
  const std::string hint_open = "\n\nHint:\n";
  if (auto hp = prompt.find(hint_open); hp != std::string::npos) {
    auto tail = prompt.rfind("\n\nLet's solve this step by step:");
    if (tail == std::string::npos || tail < hp) {
      throw backend_error("toy backend: malformed hinted prompt");
    }
    hinted = strategy_from_hint_text(
        task_, prompt.substr(hp + hint_open.size(), tail - hp - hint_open.size()));
  }

  const TaskItem* item = nullptr;
  for (const auto& it : task_.items) {
    if (it.problem.question == question) {
      item = &it;
      break;
    }
  }
  if (!item) throw backend_error("toy backend: unknown question");

  sample_rng rng(*request.seed_hint);
  return render_toy_trace(task_, *item, model_index_, policy_, hinted, rng);
}

TrainResult train(const SyntheticTask& task, std::vector<ToyPolicy> initial,
                  const ProtocolConfig& protocol_cfg, const RewardConfig& reward_cfg,
                  const TrainOptions& options) {
  const int num_models = protocol_cfg.team_size;
  if (static_cast<int>(initial.size()) != num_models) {
    throw config_error("train: policy count != team size");
  }
  task.validate(num_models);
  if (options.epochs < 1) throw config_error("train: epochs must be >= 1");
  if (options.batch_problems < 1) throw config_error("train: batch_problems must be >= 1");

  // Problems advance in ascending id order.
  std::vector<const TaskItem*> items;
  items.reserve(task.items.size());
  for (const auto& it : task.items) items.push_back(&it);
  std::sort(items.begin(), items.end(), [](const TaskItem* a, const TaskItem* b) {
    return a->problem.id < b->problem.id;
  });

  TrainResult result;
  result.policies = std::move(initial);
  const std::vector<ToyPolicy> ref_snapshot = result.policies;

  std::vector<std::unique_ptr<ToyBackend>> owned;
  std::vector<Backend*> backends;
  for (int m = 0; m < num_models; ++m) {
    owned.push_back(std::make_unique<ToyBackend>(task, result.policies[m], m));
    backends.push_back(owned.back().get());
  }

  Featurizer feat;
  const std::size_t P = items.size();

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    ProtocolConfig epoch_cfg = protocol_cfg;
    epoch_cfg.seed = splitmix64(protocol_cfg.seed ^
                                (0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(epoch + 1)));

    EpochMetrics em;
    em.epoch = epoch;
    em.mean_reward.assign(num_models, 0.0);
    em.pass_at_k.assign(num_models, 0.0);
    std::vector<int> trace_counts(num_models, 0);
    std::vector<int> pass_counts(num_models, 0);
    int team_pass_count = 0;
    double adv_abs = 0.0;
    std::size_t adv_n = 0;
    std::vector<InstanceEpisode> epoch_episodes;
    bool keep = options.keep_final_episodes && epoch == options.epochs - 1;
    if (keep) epoch_episodes.resize(P);

    for (std::size_t batch_start = 0; batch_start < P;
         batch_start += static_cast<std::size_t>(options.batch_problems)) {
      std::size_t batch_end =
          std::min(P, batch_start + static_cast<std::size_t>(options.batch_problems));
      std::size_t batch_n = batch_end - batch_start;

      // Sampling-time snapshot; updates land after the whole batch.
      const std::vector<ToyPolicy> old_snapshot = result.policies;

      std::vector<InstanceEpisode> episodes(batch_n);
      parallel_for(batch_n, options.jobs, [&](std::size_t bi) {
        episodes[bi] = run_instance(items[batch_start + bi]->problem,
                                    std::span<Backend* const>(backends), epoch_cfg,
                                    reward_cfg, feat);
      });

      std::vector<PolicyGrad> grads(static_cast<std::size_t>(num_models));
      for (int m = 0; m < num_models; ++m) {
        grads[static_cast<std::size_t>(m)].init(result.policies[m].logits.size());
      }

      // Deterministic reduce in problem order.
      for (std::size_t bi = 0; bi < batch_n; ++bi) {
        InstanceEpisode& ep = episodes[bi];
        std::optional<int> hinted_id;
        if (ep.teacher) hinted_id = strategy_from_hint_text(task, ep.teacher->text);

        for (std::size_t i = 0; i < ep.trace_count(); ++i) {
          const Trace& t = ep.trace_at(i);
          std::size_t m = static_cast<std::size_t>(t.model_id - 1);
          std::optional<int> hinted = t.hint_shown ? hinted_id : std::nullopt;

          auto tokens = policy_logprobs(task, result.policies[m], old_snapshot[m],
                                        ref_snapshot[m], t, hinted);
          double advantage = ep.advantages.advantages[i];
          LossResult lr = loss_with_grad(options.loss, tokens, advantage, options.loss_cfg);

          int s = strategy_from_trace_text(task, t.text);
          auto p = result.policies[m].probs(hinted);
          PolicyGrad& g = grads[m];
          double coef = lr.d_new_logp[0];
          for (std::size_t j = 0; j < p.size(); ++j) {
            double dlp = (static_cast<int>(j) == s ? 1.0 : 0.0) - p[j];
            g.d_logits[j] += coef * dlp;
            if (hinted && static_cast<std::size_t>(*hinted) == j) {
              g.d_hint_bias[j] += coef * dlp;
            }
          }
          g.traces += 1;

          em.mean_reward[m] += ep.breakdowns[i].r_total;
          trace_counts[static_cast<int>(m)] += 1;
          em.rescue_count += ep.breakdowns[i].rescue_z;
          adv_abs += std::abs(advantage);
          ++adv_n;
        }

        std::vector<std::uint8_t> model_pass(static_cast<std::size_t>(num_models), 0);
        for (const auto& t : ep.round_a_traces) {
          if (correctness(t, ep.problem.gold_answer)) {
            model_pass[static_cast<std::size_t>(t.model_id - 1)] = 1;
          }
        }
        bool team = false;
        for (int m = 0; m < num_models; ++m) {
          if (model_pass[static_cast<std::size_t>(m)]) {
            pass_counts[m] += 1;
            team = true;
          }
        }
        if (team) ++team_pass_count;

        if (keep) epoch_episodes[batch_start + bi] = std::move(ep);
      }

      // Mean over the model's traces, clip the global norm, descend.
      for (int m = 0; m < num_models; ++m) {
        PolicyGrad& g = grads[static_cast<std::size_t>(m)];
        if (g.traces == 0) continue;
        double inv = 1.0 / static_cast<double>(g.traces);
        double sq = 0.0;
        for (double& x : g.d_logits) {
          x *= inv;
          sq += x * x;
        }
        for (double& x : g.d_hint_bias) {
          x *= inv;
          sq += x * x;
        }
        double norm = std::sqrt(sq);
        double scale = norm > options.max_grad_norm && norm > 0.0
                           ? options.max_grad_norm / norm
                           : 1.0;
        ToyPolicy& pol = result.policies[static_cast<std::size_t>(m)];
        for (std::size_t j = 0; j < pol.logits.size(); ++j) {
          pol.logits[j] -= options.learning_rate * scale * g.d_logits[j];
          pol.hint_bias[j] -= options.learning_rate * scale * g.d_hint_bias[j];
        }
      }
    }

    for (int m = 0; m < num_models; ++m) {
      if (trace_counts[m] > 0) em.mean_reward[m] /= trace_counts[m];
      em.pass_at_k[m] = static_cast<double>(pass_counts[m]) / static_cast<double>(P);
    }
    em.team_pass_at_k = static_cast<double>(team_pass_count) / static_cast<double>(P);
    em.mean_advantage_abs = adv_n > 0 ? adv_abs / static_cast<double>(adv_n) : 0.0;
    result.history.push_back(std::move(em));
    if (keep) result.final_episodes = std::move(epoch_episodes);
  }
  return result;
}

CorrectnessTable evaluate_toy(const SyntheticTask& task, const std::vector<ToyPolicy>& policies,
                              int k, std::uint64_t seed, int jobs) {
  std::vector<std::unique_ptr<ToyBackend>> owned;
  std::vector<Backend*> backends;
  for (std::size_t m = 0; m < policies.size(); ++m) {
    owned.push_back(std::make_unique<ToyBackend>(task, policies[m], static_cast<int>(m)));
    backends.push_back(owned.back().get());
  }
  std::vector<Problem> problems;
  problems.reserve(task.items.size());
  for (const auto& it : task.items) problems.push_back(it.problem);
  std::sort(problems.begin(), problems.end(),
            [](const Problem& a, const Problem& b) { return a.id < b.id; });
  return run_cold_eval(problems, std::span<Backend* const>(backends), k, seed,
                       /*max_new_tokens=*/4096, jobs);
}

SyntheticTask complementary_v1() {
  SyntheticTask task;
  task.name = "complementary-v1";
  task.strategies.push_back(
      {"alpha",
       "Strategy alpha: multiply the unit rate by the count, then add the leftover "
       "part to get the total."});
  task.strategies.push_back(
      {"beta",
       "Strategy beta: divide the whole into equal shares, then subtract the spare "
       "change from one share."});
  const int num_problems = 64;
  for (int i = 0; i < num_problems; ++i) {
    TaskItem item;
    char id[8];
    std::snprintf(id, sizeof(id), "p%03d", i);
    item.problem.id = id;
    item.problem.question =
        "Task " + std::to_string(i) + ": pick the right approach and compute the result.";
    item.problem.gold_answer = std::to_string(40 + 3 * i);
    int solvable_by = i % 2;
    // Model 1 executes alpha well and beta poorly; model 2 the reverse. A
    // strategy only works on the problems it is meant for.
    std::vector<double> m1(2, 0.0), m2(2, 0.0);
    m1[0] = solvable_by == 0 ? 0.9 : 0.0;
    m1[1] = solvable_by == 1 ? 0.05 : 0.0;
    m2[0] = solvable_by == 0 ? 0.05 : 0.0;
    m2[1] = solvable_by == 1 ? 0.9 : 0.0;
    item.success_prob = {m1, m2};
    task.items.push_back(std::move(item));
  }
  return task;
}

std::vector<ToyPolicy> complementary_v1_initial_policies() {
  // Both models start strongly preferring alpha, so the second model's beta
  // strength stays buried unless something surfaces it; hint-following is
  // moderate from the start and strengthens as hint_bias learns. Together
  // with the reference learning rate this puts a 100-epoch cold-only run in
  // the middle of its learning curve while the full protocol converges.
  ToyPolicy m1{{2.8, -2.8}, {3.0, 3.0}};
  ToyPolicy m2{{2.8, -2.8}, {3.0, 3.0}};
  return {m1, m2};
}

double complementary_v1_learning_rate() { return 0.1; }

SyntheticTask load_task_json(const std::string& path) {
  json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw data_error("task file is not valid JSON: " + path);
  SyntheticTask task;
  task.name = j.value("name", path);
  if (!j.contains("strategies") || !j["strategies"].is_array()) {
    throw data_error(path + ": missing strategies array");
  }
  for (const auto& s : j["strategies"]) {
    task.strategies.push_back({s.at("id").get<std::string>(),
                               s.at("body_text").get<std::string>()});
  }
  if (!j.contains("problems") || !j["problems"].is_array()) {
    throw data_error(path + ": missing problems array");
  }
  for (const auto& p : j["problems"]) {
    TaskItem item;
    item.problem.id = p.at("id").get<std::string>();
    item.problem.question = p.at("question").get<std::string>();
    item.problem.gold_answer = p.at("answer").get<std::string>();
    for (const auto& row : p.at("success_prob")) {
      item.success_prob.push_back(row.get<std::vector<double>>());
    }
    task.items.push_back(std::move(item));
  }
  return task;
}

}  // namespace core
