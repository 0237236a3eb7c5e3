#include "core/episode_log.hpp"

#include <algorithm>
#include <set>

#include "core/errors.hpp"

namespace core {

namespace {

json trace_record(const InstanceEpisode& ep, std::size_t i) {
  const Trace& t = ep.trace_at(i);
  const RewardBreakdown& b = ep.breakdowns.at(i);
  json r;
  r["problem_id"] = t.problem_id;
  r["model_id"] = t.model_id;
  r["round"] = round_name(t.round);
  r["sample_index"] = t.sample_index;
  r["hint_shown"] = t.hint_shown;
  r["text"] = t.text;
  if (t.extracted_answer) {
    r["extracted_answer"] = *t.extracted_answer;
  } else {
    r["extracted_answer"] = nullptr;
  }
  r["correct"] = correctness(t, ep.problem.gold_answer) != 0;
  r["r_exploit"] = b.r_exploit;
  r["r_explore"] = b.r_explore;
  r["rescue_z"] = b.rescue_z;
  r["r_cross"] = b.r_cross;
  r["rho"] = b.rho;
  r["r_total"] = b.r_total;
  r["advantage"] = ep.advantages.advantages.at(i);
  return r;
}

}  // namespace

std::vector<json> episode_records(const InstanceEpisode& ep) {
  std::vector<json> out;
  if (ep.teacher) {
    json t;
    t["problem_id"] = ep.problem.id;
    t["source_model_id"] = ep.teacher->source_model_id;
    t["token_estimate"] = ep.teacher->token_count_estimate;
    out.push_back(std::move(t));
  }
  std::vector<std::size_t> order(ep.trace_count());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const Trace& ta = ep.trace_at(a);
    const Trace& tb = ep.trace_at(b);
    if (ta.model_id != tb.model_id) return ta.model_id < tb.model_id;
    if (ta.round != tb.round) {
      return static_cast<int>(ta.round) < static_cast<int>(tb.round);
    }
    return ta.sample_index < tb.sample_index;
  });
  for (std::size_t i : order) out.push_back(trace_record(ep, i));
  return out;
}

std::string episode_log_to_string(std::span<const InstanceEpisode> episodes) {
  std::vector<const InstanceEpisode*> order;
  order.reserve(episodes.size());
  for (const auto& ep : episodes) order.push_back(&ep);
  std::sort(order.begin(), order.end(), [](const InstanceEpisode* a, const InstanceEpisode* b) {
    return a->problem.id < b->problem.id;
  });
  std::vector<json> records;
  for (const InstanceEpisode* ep : order) {
    auto recs = episode_records(*ep);
    records.insert(records.end(), std::make_move_iterator(recs.begin()),
                   std::make_move_iterator(recs.end()));
  }
  return to_json_lines(records);
}

std::vector<ParsedEpisode> parse_episode_log(const std::vector<json>& records) {
  std::vector<ParsedEpisode> out;
  std::map<std::string, std::size_t> index;
  for (const auto& r : records) {
    if (!r.contains("problem_id")) throw data_error("episode record lacks problem_id");
    std::string pid = r.at("problem_id").get<std::string>();
    auto it = index.find(pid);
    if (it == index.end()) {
      index.emplace(pid, out.size());
      out.push_back(ParsedEpisode{pid, {}, {}, std::nullopt, {}});
      it = index.find(pid);
    }
    ParsedEpisode& ep = out[it->second];
    if (r.contains("source_model_id")) {
      ep.teacher_record = r;
      continue;
    }
    Trace t = make_trace(pid, r.at("model_id").get<int>(),
                         round_from_name(r.at("round").get<std::string>()),
                         r.at("hint_shown").get<bool>(), r.at("sample_index").get<int>(),
                         r.at("text").get<std::string>());
    if (t.round == Round::ColdA) {
      ep.round_a.push_back(std::move(t));
    } else {
      ep.round_b.push_back(std::move(t));
    }
    ep.trace_records.push_back(r);
  }
  return out;
}

std::vector<Problem> load_dataset(const std::string& path) {
  auto records = read_json_lines(path);
  std::vector<Problem> problems;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    std::string where = path + " record " + std::to_string(i + 1);
    if (!r.contains("id") || !r.contains("question") || !r.contains("answer")) {
      throw data_error(where + ": needs id, question, answer");
    }
    Problem p;
    p.id = r.at("id").get<std::string>();
    p.question = r.at("question").get<std::string>();
    p.gold_answer = r.at("answer").get<std::string>();
    if (p.id.empty()) throw data_error(where + ": empty id");
    if (!ids.insert(p.id).second) throw data_error(where + ": duplicate id " + p.id);
    if (normalize_answer(p.gold_answer) != p.gold_answer) {
      throw data_error(where + ": answer is not in normalized form");
    }
    problems.push_back(std::move(p));
  }
  return problems;
}

std::string dataset_to_string(std::span<const Problem> problems) {
  std::vector<json> records;
  records.reserve(problems.size());
  for (const auto& p : problems) {
    records.push_back({{"id", p.id}, {"question", p.question}, {"answer", p.gold_answer}});
  }
  return to_json_lines(records);
}

std::string table_to_string(const CorrectnessTable& table) {
  table.validate();
  std::vector<const InstanceOutcomes*> order;
  for (const auto& inst : table.instances) order.push_back(&inst);
  std::sort(order.begin(), order.end(),
            [](const InstanceOutcomes* a, const InstanceOutcomes* b) {
              return a->problem_id < b->problem_id;
            });
  std::vector<json> records;
  for (const InstanceOutcomes* inst : order) {
    for (std::size_t m = 0; m < inst->samples.size(); ++m) {
      json r;
      r["problem_id"] = inst->problem_id;
      r["model_id"] = static_cast<int>(m) + 1;
      std::vector<int> s(inst->samples[m].begin(), inst->samples[m].end());
      r["samples"] = s;
      records.push_back(std::move(r));
    }
  }
  return to_json_lines(records);
}

CorrectnessTable table_from_records(const std::vector<json>& records) {
  std::map<std::string, std::vector<std::pair<int, std::vector<std::uint8_t>>>> grouped;
  int num_models = 0;
  int k = 0;
  for (const auto& r : records) {
    std::string pid = r.at("problem_id").get<std::string>();
    int model = r.at("model_id").get<int>();
    auto s = r.at("samples").get<std::vector<int>>();
    std::vector<std::uint8_t> row(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) row[i] = s[i] ? 1 : 0;
    num_models = std::max(num_models, model);
    k = std::max(k, static_cast<int>(row.size()));
    grouped[pid].emplace_back(model, std::move(row));
  }
  CorrectnessTable table;
  table.num_models = num_models;
  table.k = k;
  for (auto& [pid, rows] : grouped) {
    InstanceOutcomes inst;
    inst.problem_id = pid;
    inst.samples.assign(static_cast<std::size_t>(num_models),
                        std::vector<std::uint8_t>(static_cast<std::size_t>(k), 0));
    for (auto& [model, row] : rows) {
      if (model < 1 || model > num_models || static_cast<int>(row.size()) != k) {
        throw data_error("table record shape mismatch for problem " + pid);
      }
      inst.samples[static_cast<std::size_t>(model - 1)] = std::move(row);
    }
    table.instances.push_back(std::move(inst));
  }
  table.validate();
  return table;
}

}  // namespace core
