// Command-line front end: simulate | score | analyze | gradcheck | eval.
// Exit codes: 0 success, 1 validation error, 2 runtime error, 3 gradient
// check over threshold.
#include <algorithm>
#include <cstdint>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "core/config.hpp"
#include "core/episode_log.hpp"
#include "core/errors.hpp"
#include "core/io_util.hpp"
#include "core/losses.hpp"
#include "core/metrics.hpp"
#include "core/protocol.hpp"
#include "core/rewards.hpp"
#include "core/simulator.hpp"

namespace {

using core::json;

struct GlobalOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::optional<std::string> output_dir;
  bool print_config = false;
};

core::RunConfig resolve_config(const GlobalOpts& g) {
  core::RunConfig cfg;
  if (!g.config_path.empty()) cfg = core::load_run_config(g.config_path);
  if (g.seed) cfg.protocol.seed = *g.seed;
  if (g.output_dir) cfg.output_dir = *g.output_dir;
  cfg.validate();
  return cfg;
}

std::string out_path(const core::RunConfig& cfg, const std::string& name) {
  return cfg.output_dir + "/" + name;
}

json team_report_json(const core::TeamReport& r) {
  json j;
  j["p1"] = r.p1;
  j["p2"] = r.p2;
  j["team"] = r.team;
  j["p12"] = r.p12;
  j["exactly_one"] = r.exactly_one;
  j["both_wrong"] = r.both_wrong;
  j["delta"] = r.delta;
  j["bounds_ok"] = r.bounds_ok;
  return j;
}

// Task, policies, and concrete backend instances resolved from a config.
// Owns everything the Backend pointers reference.
struct BackendSet {
  core::SyntheticTask task;
  std::vector<core::ToyPolicy> policies;
  std::vector<std::unique_ptr<core::Backend>> owned;
  std::vector<core::Backend*> ptrs;
};

core::SyntheticTask resolve_task(const core::RunConfig& cfg) {
  if (!cfg.simulator.task_file.empty()) return core::load_task_json(cfg.simulator.task_file);
  if (cfg.simulator.task == "complementary-v1") return core::complementary_v1();
  throw core::config_error("simulator.task: unknown bundled task '" + cfg.simulator.task +
                           "' (expected complementary-v1 or a task_file)");
}

std::vector<core::ToyPolicy> resolve_policies(const core::RunConfig& cfg,
                                              const core::SyntheticTask& task) {
  const int models = cfg.protocol.team_size;
  const std::size_t strategies = task.strategies.size();
  std::vector<core::ToyPolicy> policies;
  if (cfg.simulator.init_logits.empty() && cfg.simulator.init_hint_bias.empty() &&
      cfg.simulator.task_file.empty() && cfg.simulator.task == "complementary-v1" &&
      models == 2) {
    policies = core::complementary_v1_initial_policies();
  } else {
    policies.assign(static_cast<std::size_t>(models),
                    core::ToyPolicy{std::vector<double>(strategies, 0.0),
                                    std::vector<double>(strategies, 0.0)});
  }
  auto apply = [&](const std::vector<std::vector<double>>& rows, bool logits,
                   const char* field) {
    if (rows.empty()) return;
    if (rows.size() != static_cast<std::size_t>(models)) {
      throw core::config_error(std::string("simulator.") + field + ": expected " +
                               std::to_string(models) + " rows");
    }
    for (std::size_t m = 0; m < rows.size(); ++m) {
      if (rows[m].size() != strategies) {
        throw core::config_error(std::string("simulator.") + field + ": row " +
                                 std::to_string(m) + " expected " +
                                 std::to_string(strategies) + " entries");
      }
      (logits ? policies[m].logits : policies[m].hint_bias) = rows[m];
    }
  };
  apply(cfg.simulator.init_logits, true, "init_logits");
  apply(cfg.simulator.init_hint_bias, false, "init_hint_bias");
  return policies;
}

BackendSet resolve_backends(const core::RunConfig& cfg) {
  BackendSet set;
  set.task = resolve_task(cfg);
  set.task.validate(cfg.protocol.team_size);
  set.policies = resolve_policies(cfg, set.task);
  auto backend_cfgs = cfg.effective_backends();
  for (std::size_t i = 0; i < backend_cfgs.size(); ++i) {
    const auto& b = backend_cfgs[i];
    if (b.kind == "toy") {
      set.owned.push_back(std::make_unique<core::ToyBackend>(set.task, set.policies[i],
                                                             static_cast<int>(i)));
    } else if (b.kind == "http") {
      set.owned.push_back(std::make_unique<core::HttpBackend>(b));
    } else if (b.kind == "mock") {
      set.owned.push_back(std::make_unique<core::MockBackend>());
    } else {
      throw core::config_error("backends[" + std::to_string(i) + "].kind: unknown kind '" +
                               b.kind + "'");
    }
  }
  for (auto& b : set.owned) set.ptrs.push_back(b.get());
  return set;
}

std::vector<core::Problem> sorted_problems(const core::SyntheticTask& task) {
  std::vector<core::Problem> problems;
  problems.reserve(task.items.size());
  for (const auto& item : task.items) problems.push_back(item.problem);
  std::sort(problems.begin(), problems.end(),
            [](const core::Problem& a, const core::Problem& b) { return a.id < b.id; });
  return problems;
}

int cmd_simulate(const GlobalOpts& g) {
  core::RunConfig cfg = resolve_config(g);
  auto task = resolve_task(cfg);
  task.validate(cfg.protocol.team_size);
  auto policies = resolve_policies(cfg, task);

  core::TrainOptions opts;
  opts.epochs = cfg.train.epochs;
  opts.batch_problems = cfg.train.batch_problems;
  opts.learning_rate = cfg.train.learning_rate;
  opts.max_grad_norm = cfg.train.max_grad_norm;
  opts.loss = core::loss_from_name(cfg.loss);
  opts.loss_cfg = cfg.loss_config;
  opts.jobs = g.jobs;
  opts.keep_final_episodes = true;

  auto result = core::train(task, std::move(policies), cfg.effective_protocol(),
                            cfg.effective_reward(), opts);

  auto problems = sorted_problems(task);
  core::atomic_write_file(out_path(cfg, "problems.jsonl"), core::dataset_to_string(problems));
  core::atomic_write_file(out_path(cfg, "episodes.jsonl"),
                          core::episode_log_to_string(result.final_episodes));

  std::vector<json> metric_records;
  for (const auto& m : result.history) {
    json r;
    r["epoch"] = m.epoch;
    r["mean_reward"] = m.mean_reward;
    r["pass_at_k"] = m.pass_at_k;
    r["team_pass_at_k"] = m.team_pass_at_k;
    r["rescue_count"] = m.rescue_count;
    r["mean_advantage_abs"] = m.mean_advantage_abs;
    metric_records.push_back(std::move(r));
  }
  core::atomic_write_file(out_path(cfg, "metrics.jsonl"), core::to_json_lines(metric_records));

  json policies_json;
  policies_json["policies"] = json::array();
  for (const auto& p : result.policies) {
    policies_json["policies"].push_back({{"logits", p.logits}, {"hint_bias", p.hint_bias}});
  }
  core::atomic_write_file(out_path(cfg, "final_policies.json"), policies_json.dump(2) + "\n");

  auto table = core::evaluate_toy(task, result.policies, cfg.protocol.k_cold,
                                  cfg.protocol.seed, g.jobs);
  auto report = core::decomposition_from_table(table);
  core::atomic_write_file(out_path(cfg, "team_report.json"),
                          team_report_json(report).dump(2) + "\n");

  std::cout << "simulate: " << result.history.size() << " epoch(s), "
            << result.final_episodes.size() << " final-epoch episode(s)\n"
            << "team_report: " << team_report_json(report).dump() << "\n"
            << "artifacts: " << cfg.output_dir << "/{problems,episodes,metrics}.jsonl, "
            << "final_policies.json, team_report.json" << std::endl;
  return 0;
}

int cmd_score(const GlobalOpts& g, const std::string& input, std::string output,
              const std::string& dataset_flag) {
  core::RunConfig cfg = resolve_config(g);
  if (output.empty()) output = out_path(cfg, "rescored.jsonl");

  std::map<std::string, std::string> gold;
  std::string dataset_path = !dataset_flag.empty() ? dataset_flag : cfg.dataset_path;
  if (!dataset_path.empty()) {
    for (const auto& p : core::load_dataset(dataset_path)) gold[p.id] = p.gold_answer;
  } else {
    for (const auto& item : resolve_task(cfg).items) {
      gold[item.problem.id] = item.problem.gold_answer;
    }
  }

  auto records = core::read_json_lines(input);
  auto episodes = core::parse_episode_log(records);
  core::Featurizer feat = core::make_featurizer(cfg);
  const core::RewardConfig reward = cfg.effective_reward();

  std::vector<json> out_records;
  for (const auto& ep : episodes) {
    auto it = gold.find(ep.problem_id);
    if (it == gold.end()) {
      throw core::data_error(input + ": no gold answer for problem " + ep.problem_id);
    }
    int models = 0;
    for (const auto& t : ep.round_a) models = std::max(models, t.model_id);
    for (const auto& t : ep.round_b) models = std::max(models, t.model_id);
    std::vector<int> round_a_success(static_cast<std::size_t>(models), 0);
    for (const auto& t : ep.round_a) {
      if (core::correctness(t, it->second)) {
        round_a_success[static_cast<std::size_t>(t.model_id - 1)] = 1;
      }
    }
    core::InstanceEpisode scored;
    scored.problem = core::Problem{ep.problem_id, "", it->second};
    scored.round_a_traces = ep.round_a;
    scored.round_a_success = round_a_success;
    scored.round_b_traces = ep.round_b;
    scored.breakdowns = core::score_instance(it->second, scored.round_a_traces,
                                             scored.round_b_traces, round_a_success,
                                             reward, feat);
    std::vector<double> totals;
    std::vector<std::uint8_t> is_b;
    for (std::size_t i = 0; i < scored.trace_count(); ++i) {
      totals.push_back(scored.breakdowns[i].r_total);
      is_b.push_back(scored.is_round_b_index(i) ? 1 : 0);
    }
    scored.advantages = core::group_normalize(totals, is_b, reward);
    if (ep.teacher_record) out_records.push_back(*ep.teacher_record);
    auto recs = core::episode_records(scored);
    out_records.insert(out_records.end(), std::make_move_iterator(recs.begin()),
                       std::make_move_iterator(recs.end()));
  }
  core::atomic_write_file(output, core::to_json_lines(out_records));
  std::cout << "score: " << episodes.size() << " episode(s) rescored -> " << output
            << std::endl;
  return 0;
}

core::CorrectnessTable table_from_episode_records(const std::vector<json>& records) {
  std::map<std::string, std::map<int, std::map<int, std::uint8_t>>> cells;
  int num_models = 0;
  int k = 0;
  for (const auto& r : records) {
    if (r.contains("source_model_id")) continue;  // teacher context record
    if (r.at("round").get<std::string>() != "A") continue;
    std::string pid = r.at("problem_id").get<std::string>();
    int model = r.at("model_id").get<int>();
    int sample = r.at("sample_index").get<int>();
    bool correct = r.at("correct").get<bool>();
    cells[pid][model][sample] = correct ? 1 : 0;
    num_models = std::max(num_models, model);
    k = std::max(k, sample + 1);
  }
  if (cells.empty()) throw core::data_error("episode log holds no cold-round records");
  core::CorrectnessTable table;
  table.num_models = num_models;
  table.k = k;
  for (const auto& [pid, by_model] : cells) {
    core::InstanceOutcomes inst;
    inst.problem_id = pid;
    inst.samples.assign(static_cast<std::size_t>(num_models),
                        std::vector<std::uint8_t>(static_cast<std::size_t>(k), 0));
    for (const auto& [model, by_sample] : by_model) {
      for (const auto& [sample, correct] : by_sample) {
        inst.samples.at(static_cast<std::size_t>(model - 1))
            .at(static_cast<std::size_t>(sample)) = correct;
      }
    }
    table.instances.push_back(std::move(inst));
  }
  table.validate();
  return table;
}

int cmd_analyze(const GlobalOpts&, const std::string& input, double p1, double p2,
                double team, bool rates_given, const std::string& output) {
  json report;
  if (!input.empty()) {
    auto records = core::read_json_lines(input);
    if (records.empty()) throw core::data_error(input + ": empty log");
    core::CorrectnessTable table = records.front().contains("samples")
                                       ? core::table_from_records(records)
                                       : table_from_episode_records(records);
    report = team_report_json(core::decomposition_from_table(table));
    report["num_models"] = table.num_models;
    report["k"] = table.k;
    report["instances"] = table.instances.size();
    json per_model = json::array();
    for (int m = 1; m <= table.num_models; ++m) {
      per_model.push_back(core::pass_at_k(table, m));
    }
    report["pass_at_k"] = per_model;
  } else if (rates_given) {
    try {
      report = team_report_json(core::decomposition(p1, p2, team));
    } catch (const core::contract_error& e) {
      // Bad rates are bad input at this boundary, not an internal bug.
      throw core::data_error(e.what());
    }
  } else {
    throw core::config_error("analyze: pass --input FILE or all of --p1 --p2 --team");
  }
  std::string text = report.dump(2) + "\n";
  std::cout << text;
  if (!output.empty()) core::atomic_write_file(output, text);
  return 0;
}

int cmd_gradcheck(const GlobalOpts& g, const std::string& loss, int trials, double step,
                  double tolerance) {
  if (trials < 1) throw core::config_error("gradcheck: --trials must be >= 1");
  std::vector<core::LossKind> kinds;
  if (loss == "all") {
    kinds = {core::LossKind::Grpo, core::LossKind::Gspo, core::LossKind::Sapo};
  } else {
    kinds = {core::loss_from_name(loss)};
  }
  std::uint64_t seed = g.seed.value_or(0);
  bool ok = true;
  for (auto kind : kinds) {
    auto report = core::gradcheck_loss(kind, trials, seed, step);
    bool pass = report.max_rel_err < tolerance;
    ok = ok && pass;
    std::cout << core::loss_name(kind) << ": max_rel_err=" << report.max_rel_err
              << " trials=" << report.trials << (pass ? " pass" : " FAIL") << "\n";
  }
  std::cout.flush();
  return ok ? 0 : 3;
}

int cmd_eval(const GlobalOpts& g, int k, const std::string& dataset_flag) {
  core::RunConfig cfg = resolve_config(g);
  BackendSet set = resolve_backends(cfg);
  std::string dataset_path = !dataset_flag.empty() ? dataset_flag : cfg.dataset_path;
  std::vector<core::Problem> problems = dataset_path.empty()
                                            ? sorted_problems(set.task)
                                            : core::load_dataset(dataset_path);
  std::sort(problems.begin(), problems.end(),
            [](const core::Problem& a, const core::Problem& b) { return a.id < b.id; });
  auto table = core::run_cold_eval(problems, set.ptrs, k, cfg.protocol.seed,
                                   /*max_new_tokens=*/4096, g.jobs);
  auto report = core::decomposition_from_table(table);
  core::atomic_write_file(out_path(cfg, "eval_table.jsonl"), core::table_to_string(table));
  json rj = team_report_json(report);
  rj["num_models"] = table.num_models;
  rj["k"] = table.k;
  rj["instances"] = table.instances.size();
  core::atomic_write_file(out_path(cfg, "eval_report.json"), rj.dump(2) + "\n");
  std::cout << rj.dump(2) << std::endl;
  return 0;
}

int run_app(int argc, char** argv) {
  CLI::App app{"Two-round cross-teaching trainer, scorer, and analyzer"};
  app.fallthrough(true);
  app.require_subcommand(0, 1);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "JSON config file; flags override its values");
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "Run seed override");
  app.add_option("--jobs", g.jobs, "Worker threads (never changes results)")
      ->check(CLI::Range(1, 256));
  std::string output_dir;
  auto* out_opt = app.add_option("--output-dir", output_dir, "Artifact directory override");
  app.add_flag("--print-config", g.print_config,
               "Print the effective configuration as JSON and exit");

  auto* simulate = app.add_subcommand("simulate", "Train toy policies with the two-round protocol");

  auto* score = app.add_subcommand("score", "Recompute rewards and advantages for an episode log");
  std::string score_input;
  std::string score_output;
  std::string score_dataset;
  score->add_option("--input", score_input, "Episode log (JSON lines)")->required();
  score->add_option("--output", score_output, "Rescored log path (default: <output-dir>/rescored.jsonl)");
  score->add_option("--dataset", score_dataset, "Gold answers (JSON lines: id, question, answer)");

  auto* analyze = app.add_subcommand("analyze", "Team collaboration-gain report");
  std::string an_input;
  std::string an_output;
  double an_p1 = 0.0, an_p2 = 0.0, an_team = 0.0;
  analyze->add_option("--input", an_input, "Episode or evaluation log (JSON lines)");
  auto* p1_opt = analyze->add_option("--p1", an_p1, "Model 1 pass rate");
  auto* p2_opt = analyze->add_option("--p2", an_p2, "Model 2 pass rate");
  auto* team_opt = analyze->add_option("--team", an_team, "Team pass rate");
  analyze->add_option("--output", an_output, "Also write the report to this path");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
  std::string gc_loss = "all";
  int gc_trials = 100;
  double gc_step = 1e-5;
  double gc_tolerance = 1e-4;
  gradcheck->add_option("--loss", gc_loss, "grpo | gspo | sapo | all");
  gradcheck->add_option("--trials", gc_trials, "Random trials per loss");
  gradcheck->add_option("--step", gc_step, "Central-difference step");
  gradcheck->add_option("--tolerance", gc_tolerance, "Max relative error allowed");

  auto* eval = app.add_subcommand("eval", "Cold evaluation producing a correctness table");
  int eval_k = 2;
  std::string eval_dataset;
  eval->add_option("--k", eval_k, "Samples per model")->check(CLI::Range(1, 64));
  eval->add_option("--dataset", eval_dataset, "Problems (JSON lines: id, question, answer)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  if (*seed_opt) g.seed = seed_value;
  if (*out_opt) g.output_dir = output_dir;

  if (g.print_config) {
    std::cout << core::to_json(resolve_config(g)).dump(2) << std::endl;
    return 0;
  }
  if (simulate->parsed()) return cmd_simulate(g);
  if (score->parsed()) return cmd_score(g, score_input, score_output, score_dataset);
  if (analyze->parsed()) {
    bool rates_given = *p1_opt && *p2_opt && *team_opt;
    if (!an_input.empty() && rates_given) {
      throw core::config_error("analyze: --input and --p1/--p2/--team are exclusive");
    }
    return cmd_analyze(g, an_input, an_p1, an_p2, an_team, rates_given, an_output);
  }
  if (gradcheck->parsed()) return cmd_gradcheck(g, gc_loss, gc_trials, gc_step, gc_tolerance);
  if (eval->parsed()) return cmd_eval(g, eval_k, eval_dataset);

  std::cout << app.help() << std::endl;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_app(argc, argv);
  } catch (const core::config_error& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return 1;
  } catch (const core::data_error& e) {
    std::cerr << "data error: " << e.what() << std::endl;
    return 1;
  } catch (const core::backend_error& e) {
    std::cerr << "backend error: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
}
