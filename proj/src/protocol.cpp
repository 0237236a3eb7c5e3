#include "core/protocol.hpp"

#include <algorithm>
#include <cctype>

#include "core/errors.hpp"
#include "core/io_util.hpp"
#include "core/rng.hpp"

namespace core {

namespace {

constexpr int kRoundATag = 0;
constexpr int kRoundBTag = 1;

std::string to_lower_copy(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// Interiors of <strategy id="...">...</strategy> blocks, in order.
std::vector<std::string> strategy_block_interiors(const std::string& text) {
  std::vector<std::string> out;
  const std::string lower = to_lower_copy(text);
  const std::string open = "<strategy";
  const std::string close = "</strategy>";
  std::size_t p = 0;
  while ((p = lower.find(open, p)) != std::string::npos) {
    std::size_t tag_end = text.find('>', p);
    if (tag_end == std::string::npos) break;
    std::size_t body = tag_end + 1;
    std::size_t end = lower.find(close, body);
    if (end == std::string::npos) break;
    out.push_back(text.substr(body, end - body));
    p = end + close.size();
  }
  return out;
}

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

Trace sample_one(const Problem& problem, Backend& backend, int model_id, Round round,
                 bool hint_shown, int sample_index, const std::string& prompt,
                 const ProtocolConfig& cfg, std::uint64_t stream) {
  GenerationRequest req;
  req.prompt = prompt;
  req.max_new_tokens = cfg.max_new_tokens;
  req.temperature = cfg.temperature;
  req.seed_hint = stream;
  std::string text;
  try {
    text = backend.generate(req);
  } catch (const std::exception& e) {
    throw backend_error("generation failed for model " + std::to_string(model_id) +
                        ", round " + round_name(round) + ", sample " +
                        std::to_string(sample_index) + ": " + e.what());
  }
  return make_trace(problem.id, model_id, round, hint_shown, sample_index, std::move(text));
}

}  // namespace

std::string render_prompt(const Problem& problem, const std::optional<TeacherContext>& ctx) {
  if (ctx && !ctx->text.empty()) {
    return "Question: " + problem.question + "\n\nHint:\n" + ctx->text +
           "\n\nLet's solve this step by step:";
  }
  return "Question: " + problem.question + "\n\nLet's solve this step by step:";
}

bool contains_answer_marker(const std::string& text) {
  if (text.find("####") != std::string::npos) return true;
  const std::string lower = to_lower_copy(text);
  return lower.find("final answer:") != std::string::npos ||
         lower.find("\\boxed") != std::string::npos ||
         lower.find("<final_answer") != std::string::npos ||
         lower.find("</final_answer") != std::string::npos;
}

std::string strip_answer_markers(const std::string& text) {
  // First pass: remove inline tagged spans and boxed spans.
  std::string work;
  work.reserve(text.size());
  std::string lower = to_lower_copy(text);
  std::size_t i = 0;
  while (i < text.size()) {
    if (lower.compare(i, 14, "<final_answer>") == 0) {
      std::size_t close = lower.find("</final_answer>", i);
      i = close == std::string::npos ? text.size() : close + 15;
      continue;
    }
    if (lower.compare(i, 7, "\\boxed{") == 0) {
      int depth = 0;
      std::size_t j = i + 6;
      for (; j < text.size(); ++j) {
        if (text[j] == '{') ++depth;
        if (text[j] == '}') {
          --depth;
          if (depth == 0) break;
        }
      }
      i = j < text.size() ? j + 1 : text.size();
      continue;
    }
    work.push_back(text[i]);
    ++i;
  }
  // Second pass: drop whole lines that still carry any marker.
  std::string out;
  out.reserve(work.size());
  std::size_t start = 0;
  while (start <= work.size()) {
    std::size_t end = work.find('\n', start);
    bool last = end == std::string::npos;
    std::string line = work.substr(start, last ? std::string::npos : end - start);
    if (!contains_answer_marker(line)) {
      out += line;
      if (!last) out.push_back('\n');
    }
    if (last) break;
    start = end + 1;
  }
  return out;
}

std::vector<Trace> run_round_a(const Problem& problem,
                               std::span<Backend* const> backends,
                               const ProtocolConfig& cfg) {
  std::vector<Trace> traces;
  std::string prompt = render_prompt(problem, std::nullopt);
  for (std::size_t m = 0; m < backends.size(); ++m) {
    int model_id = static_cast<int>(m) + 1;
    for (int k = 0; k < cfg.k_cold; ++k) {
      std::uint64_t stream = derive_stream(cfg.seed, problem.id, model_id, kRoundATag, k);
      traces.push_back(sample_one(problem, *backends[m], model_id, Round::ColdA,
                                  /*hint_shown=*/false, k, prompt, cfg, stream));
    }
  }
  return traces;
}

std::optional<std::size_t> select_teacher(std::span<const Trace> traces,
                                          const std::string& gold,
                                          std::span<const double> r_exploit) {
  if (traces.size() != r_exploit.size()) {
    throw contract_error("select_teacher: mismatched inputs");
  }
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    if (!correctness(traces[i], gold)) continue;
    if (!best) {
      best = i;
      continue;
    }
    const Trace& a = traces[i];
    const Trace& b = traces[*best];
    if (r_exploit[i] != r_exploit[*best]) {
      if (r_exploit[i] > r_exploit[*best]) best = i;
    } else if (a.token_count_estimate != b.token_count_estimate) {
      if (a.token_count_estimate < b.token_count_estimate) best = i;
    } else if (a.model_id != b.model_id) {
      if (a.model_id < b.model_id) best = i;
    } else if (a.sample_index < b.sample_index) {
      best = i;
    }
  }
  return best;
}

TeacherContext build_teacher_context(const Trace& teacher, const ProtocolConfig& cfg) {
  TeacherContext ctx;
  ctx.source_model_id = teacher.model_id;
  ctx.source_sample_index = teacher.sample_index;

  std::string body = teacher.text;
  if (teacher.extracted_answer) {
    // Prefer the strategy block whose own outcome matches the teacher's
    // answer; fall back to the whole trace when no block matches.
    for (const auto& interior : strategy_block_interiors(teacher.text)) {
      auto outcome = extract_answer(interior);
      if (outcome && *outcome == *teacher.extracted_answer) {
        body = interior;
        break;
      }
    }
  }
  std::string stripped = trim(strip_answer_markers(body));
  std::size_t max_chars = static_cast<std::size_t>(cfg.context_budget_tokens) * 4;
  if (stripped.size() > max_chars) stripped.resize(max_chars);
  ctx.text = std::move(stripped);
  ctx.token_count_estimate = token_estimate(ctx.text);
  return ctx;
}

std::vector<Trace> run_round_b(const Problem& problem,
                               std::span<Backend* const> backends,
                               const std::optional<TeacherContext>& teacher,
                               const ProtocolConfig& cfg) {
  std::vector<Trace> traces;
  bool hint_available = teacher && !teacher->text.empty();
  std::string cold_prompt = render_prompt(problem, std::nullopt);
  std::string hinted_prompt = render_prompt(problem, teacher);
  for (std::size_t m = 0; m < backends.size(); ++m) {
    int model_id = static_cast<int>(m) + 1;
    for (int k = 0; k < cfg.k_contexted; ++k) {
      std::uint64_t stream = derive_stream(cfg.seed, problem.id, model_id, kRoundBTag, k);
      sample_rng rng(stream);
      bool hint_shown = hint_available && rng.bernoulli(cfg.p_hint);
      traces.push_back(sample_one(problem, *backends[m], model_id, Round::ContextedB,
                                  hint_shown, k, hint_shown ? hinted_prompt : cold_prompt,
                                  cfg, rng.next_u64()));
    }
  }
  return traces;
}

InstanceEpisode run_instance(const Problem& problem, std::span<Backend* const> backends,
                             const ProtocolConfig& protocol_cfg,
                             const RewardConfig& reward_cfg, const Featurizer& feat) {
  if (backends.empty()) throw contract_error("run_instance: no backends");
  InstanceEpisode ep;
  ep.problem = problem;
  ep.round_a_traces = run_round_a(problem, backends, protocol_cfg);

  ep.round_a_success.assign(backends.size(), 0);
  std::vector<double> r_et_a(ep.round_a_traces.size());
  for (std::size_t i = 0; i < ep.round_a_traces.size(); ++i) {
    const Trace& t = ep.round_a_traces[i];
    r_et_a[i] = exploitation_reward(t, problem.gold_answer, reward_cfg);
    if (correctness(t, problem.gold_answer)) {
      ep.round_a_success[static_cast<std::size_t>(t.model_id - 1)] = 1;
    }
  }

  auto teacher_idx = select_teacher(ep.round_a_traces, problem.gold_answer, r_et_a);
  if (teacher_idx) {
    ep.teacher = build_teacher_context(ep.round_a_traces[*teacher_idx], protocol_cfg);
  }

  if (protocol_cfg.enable_round_b && protocol_cfg.k_contexted > 0) {
    ep.round_b_traces = run_round_b(problem, backends, ep.teacher, protocol_cfg);
  }

  ep.breakdowns = score_instance(problem.gold_answer, ep.round_a_traces, ep.round_b_traces,
                                 ep.round_a_success, reward_cfg, feat);

  std::vector<double> totals(ep.trace_count());
  std::vector<std::uint8_t> in_b(ep.trace_count());
  for (std::size_t i = 0; i < ep.trace_count(); ++i) {
    totals[i] = ep.breakdowns[i].r_total;
    in_b[i] = ep.is_round_b_index(i) ? 1 : 0;
  }
  ep.advantages = group_normalize(totals, in_b, reward_cfg);
  return ep;
}

CorrectnessTable run_cold_eval(std::span<const Problem> problems,
                               std::span<Backend* const> backends, int k,
                               std::uint64_t seed, int max_new_tokens, int jobs) {
  CorrectnessTable table;
  table.num_models = static_cast<int>(backends.size());
  table.k = k;
  table.instances.resize(problems.size());
  ProtocolConfig cfg;
  cfg.k_cold = k;
  cfg.seed = seed;
  cfg.max_new_tokens = max_new_tokens;
  parallel_for(problems.size(), jobs, [&](std::size_t p) {
    const Problem& problem = problems[p];
    auto traces = run_round_a(problem, backends, cfg);
    InstanceOutcomes inst;
    inst.problem_id = problem.id;
    inst.samples.assign(backends.size(), std::vector<std::uint8_t>(k, 0));
    for (const auto& t : traces) {
      inst.samples[static_cast<std::size_t>(t.model_id - 1)]
                  [static_cast<std::size_t>(t.sample_index)] =
          static_cast<std::uint8_t>(correctness(t, problem.gold_answer));
    }
    table.instances[p] = std::move(inst);
  });
  return table;
}

}  // namespace core
