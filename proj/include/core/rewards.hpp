#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "core/distance.hpp"
#include "core/trace.hpp"

namespace core {

struct RewardConfig {
  double alpha = 0.3;        // partial-credit weight inside the exploitation term
  double w1 = 1.0;           // exploitation weight
  double w2 = 0.5;           // exploration weight
  double delta = 0.15;       // diversity margin for the DPP-lite set
  int explore_cap = 10;      // max size of the diverse set
  double r_teach = 0.15;     // rescue bonus
  double lambda_ta = 0.1;    // trace-accuracy auxiliary weight
  double lambda_cm = 0.1;    // cross-model auxiliary weight
  double eta = 1.0;          // peer-quality gate threshold on the peer's best R_et
  double delta_cm = 0.15;    // cross-model distance margin
  double epsilon = 1e-8;     // advantage denominator guard
  double lambda_b = 0.8;     // round-B advantage down-weight
  DistanceConfig distance;
};

struct RewardBreakdown {
  double r_exploit = 0.0;
  double r_explore = 0.0;
  int rescue_z = 0;
  double rho = 0.0;
  double r_cross = 0.0;
  double r_aux = 0.0;
  double r_total = 0.0;
  bool in_diverse_set = false;
};

struct AdvantageBatch {
  std::vector<double> advantages;  // aligned with the reward vector passed in
  double group_mean = 0.0;
  double group_std = 0.0;  // population std
  bool round_b_weight_applied = false;
};

// Exact match 1; absent 0; otherwise Jaccard overlap of the comma/space
// separated components of the two normalized answers.
double partial_credit(const std::optional<std::string>& pred, const std::string& gold);

// I[correct] + alpha * partial_credit. Max 1 + alpha.
double exploitation_reward(const Trace& trace, const std::string& gold,
                           const RewardConfig& cfg);

// Greedy farthest-point selection over a precomputed distance matrix.
// Seed: highest r_exploit, ties by (model_id, round, sample_index).
// Then repeatedly admit the candidate with the largest minimum distance to
// the selected set while that minimum is >= delta, up to explore_cap.
// Returns selected indices in selection order.
struct DppMeta {
  int model_id = 1;
  Round round = Round::ColdA;
  int sample_index = 0;
};
std::vector<std::size_t> dpp_lite_select_from_matrix(
    const std::vector<std::vector<double>>& dist, std::span<const double> r_exploit,
    std::span<const DppMeta> meta, double delta, int explore_cap);

std::vector<std::size_t> dpp_lite_select(std::span<const Trace> traces,
                                         std::span<const double> r_exploit,
                                         const RewardConfig& cfg, const Featurizer& feat);

// max(0, min distance to the diverse set - delta); members get 0.
double exploration_reward_from_matrix(const std::vector<std::vector<double>>& dist,
                                      std::size_t index,
                                      const std::vector<std::size_t>& diverse_set,
                                      double delta);

// 1 iff a hinted round-B trace is correct for a model whose cold round failed.
int rescue_indicator(const Trace& trace, int round_a_success, const std::string& gold);

// Fraction of correct traces in one round across all models. Errors on empty.
double trace_accuracy_rho(std::span<const Trace> round_traces, const std::string& gold);

// Gate q = I[max peer exploitation >= eta]; value = q * max(0, min distance
// to the peer's same-round traces - delta_cm). With several peers the gated
// value is computed per peer and the maximum taken.
double cross_model_reward(const Trace& trace, std::span<const Trace> peer_traces,
                          std::span<const double> peer_exploit, const RewardConfig& cfg,
                          const Featurizer& feat);

// Full per-trace reward composition for one problem instance. Traces are
// indexed round A block first, then round B. round_a_success holds one flag
// per model (index model_id - 1).
std::vector<RewardBreakdown> score_instance(const std::string& gold,
                                            std::span<const Trace> round_a,
                                            std::span<const Trace> round_b,
                                            std::span<const int> round_a_success,
                                            const RewardConfig& cfg,
                                            const Featurizer& feat);

// Group-normalized advantages over every trace of the instance: (r - mean)
// divided by (population std + epsilon), then round-B entries scaled by
// lambda_b. A zero-spread group yields all-zero advantages.
AdvantageBatch group_normalize(std::span<const double> rewards,
                               std::span<const std::uint8_t> is_round_b,
                               const RewardConfig& cfg);

}  // namespace core
