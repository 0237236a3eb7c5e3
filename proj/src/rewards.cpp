#include "core/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "core/errors.hpp"

namespace core {

namespace {

std::set<std::string> answer_components(const std::string& normalized) {
  std::set<std::string> parts;
  std::string cur;
  for (char c : normalized) {
    if (c == ',' || c == ' ' || c == '\t' || c == '\n') {
      if (!cur.empty()) parts.insert(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) parts.insert(cur);
  return parts;
}

// Pairwise distances for one instance, with the identical-text short
// circuit applied inside hybrid_distance.
std::vector<std::vector<double>> distance_matrix(std::span<const Trace> traces,
                                                 const DistanceConfig& cfg,
                                                 const Featurizer& feat) {
  std::size_t n = traces.size();
  std::vector<std::shared_ptr<const TraceFeatures>> features;
  features.reserve(n);
  for (const auto& t : traces) features.push_back(feat.features(t.text));
  std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double v = hybrid_distance(*features[i], *features[j], cfg);
      d[i][j] = v;
      d[j][i] = v;
    }
  }
  return d;
}

// Selection ordering: higher exploitation first, then model, round, sample.
bool dpp_before(double r_a, const DppMeta& a, double r_b, const DppMeta& b) {
  if (r_a != r_b) return r_a > r_b;
  if (a.model_id != b.model_id) return a.model_id < b.model_id;
  if (a.round != b.round) return static_cast<int>(a.round) < static_cast<int>(b.round);
  return a.sample_index < b.sample_index;
}

}  // namespace

double partial_credit(const std::optional<std::string>& pred, const std::string& gold) {
  if (!pred) return 0.0;
  if (*pred == gold) return 1.0;
  auto a = answer_components(*pred);
  auto b = answer_components(gold);
  if (a.empty() && b.empty()) return 0.0;
  std::size_t inter = 0;
  for (const auto& x : a) inter += b.count(x);
  std::size_t uni = a.size() + b.size() - inter;
  if (uni == 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double exploitation_reward(const Trace& trace, const std::string& gold,
                           const RewardConfig& cfg) {
  return correctness(trace, gold) + cfg.alpha * partial_credit(trace.extracted_answer, gold);
}

std::vector<std::size_t> dpp_lite_select_from_matrix(
    const std::vector<std::vector<double>>& dist, std::span<const double> r_exploit,
    std::span<const DppMeta> meta, double delta, int explore_cap) {
  std::size_t n = r_exploit.size();
  if (n == 0 || explore_cap < 1) return {};
  if (meta.size() != n || dist.size() != n) {
    throw contract_error("dpp_lite_select: mismatched inputs");
  }

  std::size_t seed = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (dpp_before(r_exploit[i], meta[i], r_exploit[seed], meta[seed])) seed = i;
  }

  std::vector<std::size_t> selected{seed};
  std::vector<bool> in_set(n, false);
  in_set[seed] = true;
  std::vector<double> min_dist(n);
  for (std::size_t i = 0; i < n; ++i) min_dist[i] = dist[i][seed];

  while (selected.size() < static_cast<std::size_t>(explore_cap)) {
    bool found = false;
    std::size_t best = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (in_set[i] || min_dist[i] < delta) continue;
      if (!found || min_dist[i] > min_dist[best] ||
          (min_dist[i] == min_dist[best] &&
           dpp_before(r_exploit[i], meta[i], r_exploit[best], meta[best]))) {
        best = i;
        found = true;
      }
    }
    if (!found) break;
    selected.push_back(best);
    in_set[best] = true;
    for (std::size_t i = 0; i < n; ++i) min_dist[i] = std::min(min_dist[i], dist[i][best]);
  }
  return selected;
}

std::vector<std::size_t> dpp_lite_select(std::span<const Trace> traces,
                                         std::span<const double> r_exploit,
                                         const RewardConfig& cfg, const Featurizer& feat) {
  auto dist = distance_matrix(traces, cfg.distance, feat);
  std::vector<DppMeta> meta(traces.size());
  for (std::size_t i = 0; i < traces.size(); ++i) {
    meta[i] = {traces[i].model_id, traces[i].round, traces[i].sample_index};
  }
  return dpp_lite_select_from_matrix(dist, r_exploit, meta, cfg.delta, cfg.explore_cap);
}

double exploration_reward_from_matrix(const std::vector<std::vector<double>>& dist,
                                      std::size_t index,
                                      const std::vector<std::size_t>& diverse_set,
                                      double delta) {
  for (std::size_t s : diverse_set) {
    if (s == index) return 0.0;
  }
  if (diverse_set.empty()) return 0.0;
  double mind = dist[index][diverse_set[0]];
  for (std::size_t s : diverse_set) mind = std::min(mind, dist[index][s]);
  return std::max(0.0, mind - delta);
}

int rescue_indicator(const Trace& trace, int round_a_success, const std::string& gold) {
  return trace.round == Round::ContextedB && trace.hint_shown && round_a_success == 0 &&
                 correctness(trace, gold) == 1
             ? 1
             : 0;
}

double trace_accuracy_rho(std::span<const Trace> round_traces, const std::string& gold) {
  if (round_traces.empty()) throw contract_error("trace_accuracy_rho: empty round");
  int correct = 0;
  for (const auto& t : round_traces) correct += correctness(t, gold);
  return static_cast<double>(correct) / static_cast<double>(round_traces.size());
}

double cross_model_reward(const Trace& trace, std::span<const Trace> peer_traces,
                          std::span<const double> peer_exploit, const RewardConfig& cfg,
                          const Featurizer& feat) {
  if (peer_traces.empty()) return 0.0;
  if (peer_traces.size() != peer_exploit.size()) {
    throw contract_error("cross_model_reward: mismatched peer inputs");
  }
  double best = 0.0;
  for (double r : peer_exploit) best = std::max(best, r);
  if (best < cfg.eta) return 0.0;
  auto self = feat.features(trace.text);
  double mind = 1.0;
  for (const auto& p : peer_traces) {
    mind = std::min(mind, hybrid_distance(*self, *feat.features(p.text), cfg.distance));
  }
  return std::max(0.0, mind - cfg.delta_cm);
}

std::vector<RewardBreakdown> score_instance(const std::string& gold,
                                            std::span<const Trace> round_a,
                                            std::span<const Trace> round_b,
                                            std::span<const int> round_a_success,
                                            const RewardConfig& cfg,
                                            const Featurizer& feat) {
  std::vector<Trace> all;
  all.reserve(round_a.size() + round_b.size());
  all.insert(all.end(), round_a.begin(), round_a.end());
  all.insert(all.end(), round_b.begin(), round_b.end());
  std::size_t n = all.size();
  if (n == 0) return {};

  std::vector<RewardBreakdown> out(n);
  std::vector<double> r_et(n);
  for (std::size_t i = 0; i < n; ++i) {
    r_et[i] = exploitation_reward(all[i], gold, cfg);
    out[i].r_exploit = r_et[i];
  }

  // One diverse set over the whole instance, both rounds pooled.
  auto dist = distance_matrix(all, cfg.distance, feat);
  std::vector<DppMeta> meta(n);
  for (std::size_t i = 0; i < n; ++i) {
    meta[i] = {all[i].model_id, all[i].round, all[i].sample_index};
  }
  auto diverse = dpp_lite_select_from_matrix(dist, r_et, meta, cfg.delta, cfg.explore_cap);
  for (std::size_t s : diverse) out[s].in_diverse_set = true;
  for (std::size_t i = 0; i < n; ++i) {
    out[i].r_explore = exploration_reward_from_matrix(dist, i, diverse, cfg.delta);
  }

  double rho_a = round_a.empty() ? 0.0 : trace_accuracy_rho(round_a, gold);
  double rho_b = round_b.empty() ? 0.0 : trace_accuracy_rho(round_b, gold);

  for (std::size_t i = 0; i < n; ++i) {
    const Trace& t = all[i];
    bool in_b = t.round == Round::ContextedB;
    const auto round_span = in_b ? round_b : round_a;
    std::size_t round_base = in_b ? round_a.size() : 0;

    int s_i = 0;
    std::size_t model_slot = static_cast<std::size_t>(t.model_id - 1);
    if (model_slot < round_a_success.size()) s_i = round_a_success[model_slot];
    out[i].rescue_z = rescue_indicator(t, s_i, gold);
    out[i].rho = in_b ? rho_b : rho_a;

    // One gated value per peer model over its same-round traces; the best
    // peer wins.
    std::set<int> peer_models;
    for (const auto& p : round_span) {
      if (p.model_id != t.model_id) peer_models.insert(p.model_id);
    }
    double best_cross = 0.0;
    for (int m : peer_models) {
      std::vector<Trace> peers;
      std::vector<double> peer_et;
      for (std::size_t j = 0; j < round_span.size(); ++j) {
        if (round_span[j].model_id == m) {
          peers.push_back(round_span[j]);
          peer_et.push_back(r_et[round_base + j]);
        }
      }
      best_cross = std::max(best_cross, cross_model_reward(t, peers, peer_et, cfg, feat));
    }
    out[i].r_cross = best_cross;
    out[i].r_aux =
        cfg.lambda_ta * correctness(t, gold) * out[i].rho + cfg.lambda_cm * out[i].r_cross;
    out[i].r_total = cfg.w1 * out[i].r_exploit + cfg.w2 * out[i].r_explore +
                     cfg.r_teach * out[i].rescue_z + out[i].r_aux;
  }
  return out;
}

AdvantageBatch group_normalize(std::span<const double> rewards,
                               std::span<const std::uint8_t> is_round_b,
                               const RewardConfig& cfg) {
  if (rewards.size() != is_round_b.size()) {
    throw contract_error("group_normalize: mismatched inputs");
  }
  AdvantageBatch batch;
  std::size_t n = rewards.size();
  if (n == 0) return batch;
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= static_cast<double>(n);
  double sd = std::sqrt(var);
  batch.group_mean = mean;
  batch.group_std = sd;
  // A group with no spread gets exact zeros; dividing the floating-point
  // residue of (r - mean) by epsilon would otherwise leak ~1e-8 advantages.
  double lo = rewards[0];
  double hi = rewards[0];
  for (double r : rewards) {
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  if (lo == hi) {
    batch.group_std = 0.0;
    batch.advantages.assign(n, 0.0);
    return batch;
  }
  batch.advantages.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double a = (rewards[i] - mean) / (sd + cfg.epsilon);
    if (is_round_b[i]) {
      a *= cfg.lambda_b;
      batch.round_b_weight_applied = true;
    }
    batch.advantages[i] = a;
  }
  return batch;
}

}  // namespace core
