#include "core/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "core/errors.hpp"
#include "core/rng.hpp"

namespace core {

namespace {

void check_tokens(const TokenLogProbs& t) {
  if (t.new_logp.empty()) throw contract_error("token sequence must be non-empty");
  if (t.old_logp.size() != t.new_logp.size() || t.ref_logp.size() != t.new_logp.size()) {
    throw contract_error("token log-prob lengths differ");
  }
  for (std::size_t i = 0; i < t.new_logp.size(); ++i) {
    if (!std::isfinite(t.new_logp[i]) || !std::isfinite(t.old_logp[i]) ||
        !std::isfinite(t.ref_logp[i])) {
      throw contract_error("token log-probs must be finite");
    }
  }
}

double clip(double x, double lo, double hi) { return std::min(std::max(x, lo), hi); }

// d(KL)/d(new_t) for the exp(d) - d - 1 estimator, d = ref - new.
double kl_grad_term(double ref, double nw) { return 1.0 - std::exp(ref - nw); }

}  // namespace

const char* loss_name(LossKind k) {
  switch (k) {
    case LossKind::Grpo: return "grpo";
    case LossKind::Gspo: return "gspo";
    case LossKind::Sapo: return "sapo";
  }
  return "grpo";
}

LossKind loss_from_name(const std::string& name) {
  if (name == "grpo") return LossKind::Grpo;
  if (name == "gspo") return LossKind::Gspo;
  if (name == "sapo") return LossKind::Sapo;
  throw config_error("unknown loss: " + name + " (expected grpo, gspo, or sapo)");
}

double kl_estimate(const TokenLogProbs& t) {
  check_tokens(t);
  double acc = 0.0;
  for (std::size_t i = 0; i < t.new_logp.size(); ++i) {
    double d = t.ref_logp[i] - t.new_logp[i];
    acc += std::exp(d) - d - 1.0;
  }
  return acc / static_cast<double>(t.new_logp.size());
}

LossResult grpo_loss_with_grad(const TokenLogProbs& t, double advantage,
                               const LossConfig& cfg) {
  check_tokens(t);
  std::size_t n = t.new_logp.size();
  double inv_n = 1.0 / static_cast<double>(n);
  double lo = 1.0 - cfg.clip_low;
  double hi = 1.0 + cfg.clip_high;
  LossResult res;
  res.d_new_logp.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double r = std::exp(t.new_logp[i] - t.old_logp[i]);
    double unclipped = r * advantage;
    double clipped = clip(r, lo, hi) * advantage;
    double surrogate;
    double dsur_dr;  // derivative of the chosen branch w.r.t. r
    if (unclipped <= clipped) {
      surrogate = unclipped;
      dsur_dr = advantage;
    } else {
      surrogate = clipped;
      dsur_dr = (r > lo && r < hi) ? advantage : 0.0;
    }
    double d = t.ref_logp[i] - t.new_logp[i];
    res.value += inv_n * (-surrogate + cfg.kl_beta * (std::exp(d) - d - 1.0));
    res.d_new_logp[i] =
        inv_n * (-dsur_dr * r + cfg.kl_beta * kl_grad_term(t.ref_logp[i], t.new_logp[i]));
  }
  return res;
}

double grpo_loss(const TokenLogProbs& t, double advantage, const LossConfig& cfg) {
  return grpo_loss_with_grad(t, advantage, cfg).value;
}

LossResult gspo_loss_with_grad(const TokenLogProbs& t, double advantage,
                               const LossConfig& cfg) {
  check_tokens(t);
  std::size_t n = t.new_logp.size();
  double inv_n = 1.0 / static_cast<double>(n);
  double mean_delta = 0.0;
  double mean_new = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_delta += t.new_logp[i] - t.old_logp[i];
    mean_new += t.new_logp[i];
  }
  mean_delta *= inv_n;
  mean_new *= inv_n;
  double coef = clip(std::exp(mean_delta), 1.0 - cfg.clip_low, 1.0 + cfg.clip_high);
  LossResult res;
  res.value = -coef * advantage * mean_new + cfg.kl_beta * kl_estimate(t);
  res.d_new_logp.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    res.d_new_logp[i] = -coef * advantage * inv_n +
                        cfg.kl_beta * inv_n * kl_grad_term(t.ref_logp[i], t.new_logp[i]);
  }
  return res;
}

double gspo_loss(const TokenLogProbs& t, double advantage, const LossConfig& cfg) {
  return gspo_loss_with_grad(t, advantage, cfg).value;
}

double sapo_gate(double ratio, double temperature) {
  double s = 1.0 / (1.0 + std::exp(-temperature * (ratio - 1.0)));
  return s * (4.0 / temperature);
}

LossResult sapo_loss_with_grad(const TokenLogProbs& t, double advantage,
                               const LossConfig& cfg) {
  check_tokens(t);
  std::size_t n = t.new_logp.size();
  double inv_n = 1.0 / static_cast<double>(n);
  double temp = advantage >= 0.0 ? cfg.sapo_temp_pos : cfg.sapo_temp_neg;
  LossResult res;
  res.d_new_logp.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double r = std::exp(t.new_logp[i] - t.old_logp[i]);
    double g = sapo_gate(r, temp);
    double d = t.ref_logp[i] - t.new_logp[i];
    res.value += inv_n * (-g * advantage * t.new_logp[i] +
                          cfg.kl_beta * (std::exp(d) - d - 1.0));
    res.d_new_logp[i] =
        inv_n * (-g * advantage +
                 cfg.kl_beta * kl_grad_term(t.ref_logp[i], t.new_logp[i]));
  }
  return res;
}

double sapo_loss(const TokenLogProbs& t, double advantage, const LossConfig& cfg) {
  return sapo_loss_with_grad(t, advantage, cfg).value;
}

double loss_value(LossKind kind, const TokenLogProbs& t, double advantage,
                  const LossConfig& cfg) {
  return loss_with_grad(kind, t, advantage, cfg).value;
}

LossResult loss_with_grad(LossKind kind, const TokenLogProbs& t, double advantage,
                          const LossConfig& cfg) {
  switch (kind) {
    case LossKind::Grpo: return grpo_loss_with_grad(t, advantage, cfg);
    case LossKind::Gspo: return gspo_loss_with_grad(t, advantage, cfg);
    case LossKind::Sapo: return sapo_loss_with_grad(t, advantage, cfg);
  }
  throw contract_error("unreachable loss kind");
}

// --- gradcheck -----------------------------------------------------------

namespace {

std::vector<double> log_softmax(const std::vector<double>& logits) {
  double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - mx);
  double logz = mx + std::log(z);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - logz;
  return out;
}

struct Trial {
  std::vector<double> logits;      // the parameters being checked
  std::vector<double> old_logits;  // sampling-time snapshot
  std::vector<double> ref_logits;  // frozen reference snapshot
  std::vector<int> actions;
  double advantage = 0.0;
};

TokenLogProbs trial_logprobs(const Trial& trial, const std::vector<double>& logits) {
  auto lp_new = log_softmax(logits);
  auto lp_old = log_softmax(trial.old_logits);
  auto lp_ref = log_softmax(trial.ref_logits);
  TokenLogProbs t;
  for (int a : trial.actions) {
    t.new_logp.push_back(lp_new[static_cast<std::size_t>(a)]);
    t.old_logp.push_back(lp_old[static_cast<std::size_t>(a)]);
    t.ref_logp.push_back(lp_ref[static_cast<std::size_t>(a)]);
  }
  return t;
}

// Loss value with the frozen coefficients pinned to their base-point values
// so the difference quotient measures exactly what the gradient covers.
double frozen_value(LossKind kind, const Trial& trial, const std::vector<double>& logits,
                    const LossConfig& cfg, const LossResult& base,
                    const TokenLogProbs& base_tokens) {
  TokenLogProbs t = trial_logprobs(trial, logits);
  std::size_t n = t.new_logp.size();
  double inv_n = 1.0 / static_cast<double>(n);
  switch (kind) {
    case LossKind::Grpo:
      return grpo_loss(t, trial.advantage, cfg);
    case LossKind::Gspo: {
      double mean_delta = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        mean_delta += base_tokens.new_logp[i] - base_tokens.old_logp[i];
      }
      double coef = clip(std::exp(mean_delta * inv_n), 1.0 - cfg.clip_low,
                         1.0 + cfg.clip_high);
      double mean_new = 0.0;
      for (double x : t.new_logp) mean_new += x;
      return -coef * trial.advantage * mean_new * inv_n + cfg.kl_beta * kl_estimate(t);
    }
    case LossKind::Sapo: {
      double temp = trial.advantage >= 0.0 ? cfg.sapo_temp_pos : cfg.sapo_temp_neg;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double r0 = std::exp(base_tokens.new_logp[i] - base_tokens.old_logp[i]);
        double g = sapo_gate(r0, temp);
        double d = t.ref_logp[i] - t.new_logp[i];
        acc += -g * trial.advantage * t.new_logp[i] +
               cfg.kl_beta * (std::exp(d) - d - 1.0);
      }
      return acc * inv_n;
    }
  }
  (void)base;
  throw contract_error("unreachable loss kind");
}

// Keeps GRPO trials away from clip kinks where the surrogate is not
// differentiable and a difference quotient is meaningless.
bool near_kink(const Trial& trial, const LossConfig& cfg) {
  auto t = trial_logprobs(trial, trial.logits);
  for (std::size_t i = 0; i < t.new_logp.size(); ++i) {
    double r = std::exp(t.new_logp[i] - t.old_logp[i]);
    if (std::abs(r - (1.0 - cfg.clip_low)) < 1e-2) return true;
    if (std::abs(r - (1.0 + cfg.clip_high)) < 1e-2) return true;
  }
  return false;
}

}  // namespace

GradcheckReport gradcheck_loss(LossKind kind, int trials, std::uint64_t seed,
                               double fd_step) {
  LossConfig cfg;
  GradcheckReport report;
  sample_rng rng(splitmix64(seed ^ static_cast<std::uint64_t>(kind)));
  for (int trial_idx = 0; trial_idx < trials; ++trial_idx) {
    Trial trial;
    for (;;) {
      int dim = 2 + static_cast<int>(rng.uniform01() * 8.0);  // 2..9 logits
      int len = 1 + static_cast<int>(rng.uniform01() * 5.0);  // 1..5 tokens
      trial.logits.clear();
      trial.old_logits.clear();
      trial.ref_logits.clear();
      trial.actions.clear();
      for (int i = 0; i < dim; ++i) {
        trial.logits.push_back(rng.uniform01() * 2.0 - 1.0);
        trial.old_logits.push_back(trial.logits.back() + (rng.uniform01() * 0.4 - 0.2));
        trial.ref_logits.push_back(trial.logits.back() + (rng.uniform01() * 0.4 - 0.2));
      }
      for (int i = 0; i < len; ++i) {
        trial.actions.push_back(static_cast<int>(rng.uniform01() * dim));
      }
      double mag = 0.2 + rng.uniform01() * 1.8;
      trial.advantage = rng.bernoulli(0.5) ? mag : -mag;
      if (!near_kink(trial, cfg)) break;
    }

    TokenLogProbs base_tokens = trial_logprobs(trial, trial.logits);
    LossResult base = loss_with_grad(kind, base_tokens, trial.advantage, cfg);

    // Chain rule: d(loss)/d(logit_j) via d(log softmax)/d(logit).
    auto lp_new = log_softmax(trial.logits);
    std::vector<double> probs(lp_new.size());
    for (std::size_t i = 0; i < lp_new.size(); ++i) probs[i] = std::exp(lp_new[i]);
    std::vector<double> analytic(trial.logits.size(), 0.0);
    for (std::size_t tok = 0; tok < base_tokens.new_logp.size(); ++tok) {
      int a = trial.actions[tok];
      for (std::size_t j = 0; j < trial.logits.size(); ++j) {
        double dlp = (static_cast<int>(j) == a ? 1.0 : 0.0) - probs[j];
        analytic[j] += base.d_new_logp[tok] * dlp;
      }
    }

    for (std::size_t j = 0; j < trial.logits.size(); ++j) {
      auto plus = trial.logits;
      auto minus = trial.logits;
      plus[j] += fd_step;
      minus[j] -= fd_step;
      double f_plus = frozen_value(kind, trial, plus, cfg, base, base_tokens);
      double f_minus = frozen_value(kind, trial, minus, cfg, base, base_tokens);
      double fd = (f_plus - f_minus) / (2.0 * fd_step);
      double denom = std::max({std::abs(fd), std::abs(analytic[j]), 1e-5});
      double rel = std::abs(fd - analytic[j]) / denom;
      report.max_rel_err = std::max(report.max_rel_err, rel);
    }
    ++report.trials;
  }
  return report;
}

}  // namespace core
