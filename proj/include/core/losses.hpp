#pragma once

#include <string>
#include <vector>

namespace core {

// Per-token log-probabilities of one sampled sequence under the current
// (new), sampling-time (old), and frozen reference policies.
struct TokenLogProbs {
  std::vector<double> new_logp;
  std::vector<double> old_logp;
  std::vector<double> ref_logp;
};

enum class LossKind { Grpo, Gspo, Sapo };

const char* loss_name(LossKind k);
LossKind loss_from_name(const std::string& name);

struct LossConfig {
  double clip_low = 0.2;    // lower clip width: ratios clipped at 1 - clip_low
  double clip_high = 0.28;  // upper clip width: ratios clipped at 1 + clip_high
  double kl_beta = 0.01;
  double sapo_temp_pos = 1.0;   // gate temperature for positive advantages
  double sapo_temp_neg = 1.05;  // gate temperature for negative advantages
};

struct LossResult {
  double value = 0.0;
  std::vector<double> d_new_logp;  // partial derivatives per token
};

// Mean over tokens of exp(ref - new) - (ref - new) - 1. Non-negative.
double kl_estimate(const TokenLogProbs& t);

// Token-level clipped surrogate:
//   mean_t -min(r_t * A, clip(r_t, 1-clip_low, 1+clip_high) * A) + kl_beta * KL
// with r_t = exp(new - old). Gradient flows through the ratio.
double grpo_loss(const TokenLogProbs& t, double advantage, const LossConfig& cfg);
LossResult grpo_loss_with_grad(const TokenLogProbs& t, double advantage,
                               const LossConfig& cfg);

// Sequence-level variant: the clipped sequence ratio
// clip(exp(mean_t(new - old)), 1-clip_low, 1+clip_high) acts as a frozen
// coefficient on advantage times mean_t(new), negated, plus the KL term.
double gspo_loss(const TokenLogProbs& t, double advantage, const LossConfig& cfg);
LossResult gspo_loss_with_grad(const TokenLogProbs& t, double advantage,
                               const LossConfig& cfg);

// Smooth gate sigma(temp * (r - 1)) * (4 / temp); 1 at r = 1 for temp = 2,
// saturating at 4 / temp.
double sapo_gate(double ratio, double temperature);

// mean_t -(g_t * A * new_t) + kl_beta * KL, gate frozen, temperature picked
// by the sign of the advantage.
double sapo_loss(const TokenLogProbs& t, double advantage, const LossConfig& cfg);
LossResult sapo_loss_with_grad(const TokenLogProbs& t, double advantage,
                               const LossConfig& cfg);

double loss_value(LossKind kind, const TokenLogProbs& t, double advantage,
                  const LossConfig& cfg);
LossResult loss_with_grad(LossKind kind, const TokenLogProbs& t, double advantage,
                          const LossConfig& cfg);

// --- finite-difference verification -------------------------------------
//
// Toy softmax policy over <= 10 logits; a trial draws a short action
// sequence plus old/ref snapshots, then compares the analytic gradient of
// the loss w.r.t. the logits against central differences. Terms that the
// losses treat as frozen coefficients (the sequence ratio in the
// sequence-level loss, the gate in the gated loss) are held at their base
// value while differencing, matching what the gradient claims to cover.

struct GradcheckReport {
  double max_rel_err = 0.0;
  int trials = 0;
};

GradcheckReport gradcheck_loss(LossKind kind, int trials, std::uint64_t seed,
                               double fd_step = 1e-5);

}  // namespace core
