#include <doctest.h>

#include <cmath>
#include <vector>

#include "core/losses.hpp"

using namespace core;

namespace {

LossConfig no_kl() {
  LossConfig cfg;
  cfg.kl_beta = 0.0;
  return cfg;
}

TokenLogProbs same_everywhere(std::vector<double> logp) {
  return TokenLogProbs{logp, logp, logp};
}

}  // namespace

TEST_CASE("kl estimator is zero at equality, non-negative, and matches by hand") {
  auto t = same_everywhere({-0.7, -1.2});
  CHECK(kl_estimate(t) == doctest::Approx(0.0));

  TokenLogProbs shifted;
  shifted.new_logp = {-1.0, -1.0};
  shifted.old_logp = {-1.0, -1.0};
  shifted.ref_logp = {-1.0 + std::log(2.0), -1.0};
  // Per-token estimator exp(d) - d - 1 with d = {ln 2, 0}.
  CHECK(kl_estimate(shifted) == doctest::Approx((2.0 - std::log(2.0) - 1.0) / 2.0));
  CHECK(kl_estimate(shifted) >= 0.0);
}

TEST_CASE("ratio-one losses reduce to the plain score-function objective") {
  auto cfg = no_kl();
  auto t = same_everywhere({-0.4, -1.1, -0.9});
  double mean_new = (-0.4 - 1.1 - 0.9) / 3.0;
  for (double a : {0.7, -0.3, 2.0}) {
    CHECK(grpo_loss(t, a, cfg) == doctest::Approx(-a));
    CHECK(gspo_loss(t, a, cfg) == doctest::Approx(-a * mean_new));
  }
  LossConfig sapo_cfg = no_kl();
  sapo_cfg.sapo_temp_pos = 2.0;
  sapo_cfg.sapo_temp_neg = 2.0;  // gate is exactly 1 at ratio 1, temp 2
  CHECK(sapo_loss(t, 1.0, sapo_cfg) == doctest::Approx(-mean_new));
}

TEST_CASE("grpo clips the ratio at 1 + clip_high") {
  auto cfg = no_kl();
  TokenLogProbs t;
  t.new_logp = {std::log(2.0)};
  t.old_logp = {0.0};
  t.ref_logp = {std::log(2.0)};
  // Ratio 2, advantage 1: the clipped branch pays -(1.28).
  CHECK(grpo_loss(t, 1.0, cfg) == doctest::Approx(-1.28));
  // Negative advantage at ratio 2: min picks the unclipped branch, -2A.
  CHECK(grpo_loss(t, -1.0, cfg) == doctest::Approx(2.0));
}

TEST_CASE("grpo equals the unclipped objective when every ratio is inside the clip") {
  auto cfg = no_kl();
  TokenLogProbs t;
  t.old_logp = {-1.0, -0.5, -2.0};
  t.new_logp = {-1.0 + 0.1, -0.5 - 0.15, -2.0 + 0.05};
  t.ref_logp = t.new_logp;
  for (double a : {1.0, -0.4}) {
    double unclipped = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      unclipped += -std::exp(t.new_logp[i] - t.old_logp[i]) * a;
    }
    unclipped /= 3.0;
    CHECK(grpo_loss(t, a, cfg) == doctest::Approx(unclipped).epsilon(1e-12));
  }
}

TEST_CASE("gspo sequence ratio is the geometric mean of token ratios") {
  auto cfg = no_kl();
  TokenLogProbs t;
  t.old_logp = {-1.0, -1.0};
  t.new_logp = {-0.9, -1.1};  // diffs +0.1, -0.1: sequence ratio exactly 1
  t.ref_logp = t.new_logp;
  double mean_new = -1.0;
  CHECK(gspo_loss(t, 0.5, cfg) == doctest::Approx(-0.5 * mean_new));
}

TEST_CASE("sapo gate hits the pinned values and its asymptote") {
  CHECK(sapo_gate(1.0, 2.0) == doctest::Approx(1.0));
  CHECK(sapo_gate(1.0, 1.0) == doctest::Approx(2.0));
  CHECK(sapo_gate(1e9, 2.0) == doctest::Approx(2.0));   // 4 / temp
  CHECK(sapo_gate(1e9, 1.0) == doctest::Approx(4.0));
  CHECK(sapo_gate(0.0, 4.0) < sapo_gate(1.0, 4.0));
}

TEST_CASE("sapo with zero advantage is the kl term alone") {
  LossConfig cfg;
  cfg.kl_beta = 0.01;
  TokenLogProbs t;
  t.new_logp = {-1.0};
  t.old_logp = {-0.8};
  t.ref_logp = {-1.3};
  CHECK(sapo_loss(t, 0.0, cfg) == doctest::Approx(cfg.kl_beta * kl_estimate(t)));
}

TEST_CASE("loss names round-trip and dispatch agrees with the direct calls") {
  CHECK(loss_from_name("grpo") == LossKind::Grpo);
  CHECK(loss_from_name("gspo") == LossKind::Gspo);
  CHECK(loss_from_name("sapo") == LossKind::Sapo);
  CHECK_THROWS(loss_from_name("unknown"));

  LossConfig cfg;
  TokenLogProbs t;
  t.new_logp = {-0.9, -1.2};
  t.old_logp = {-1.0, -1.0};
  t.ref_logp = {-1.1, -1.0};
  for (auto kind : {LossKind::Grpo, LossKind::Gspo, LossKind::Sapo}) {
    double direct = kind == LossKind::Grpo   ? grpo_loss(t, 0.7, cfg)
                    : kind == LossKind::Gspo ? gspo_loss(t, 0.7, cfg)
                                             : sapo_loss(t, 0.7, cfg);
    CHECK(loss_value(kind, t, 0.7, cfg) == direct);
    CHECK(loss_with_grad(kind, t, 0.7, cfg).value == doctest::Approx(direct));
    CHECK(std::string(loss_name(kind)) == loss_name(loss_from_name(loss_name(kind))));
  }
}

TEST_CASE("analytic gradients match finite differences for every loss") {
  for (auto kind : {LossKind::Grpo, LossKind::Gspo, LossKind::Sapo}) {
    auto report = gradcheck_loss(kind, 25, 11);
    CHECK(report.trials == 25);
    CHECK(report.max_rel_err < 1e-4);
  }
}

TEST_CASE("losses reject mismatched sequence lengths") {
  LossConfig cfg;
  TokenLogProbs bad;
  bad.new_logp = {-1.0, -1.0};
  bad.old_logp = {-1.0};
  bad.ref_logp = {-1.0, -1.0};
  CHECK_THROWS(grpo_loss(bad, 1.0, cfg));
  CHECK_THROWS(gspo_loss(bad, 1.0, cfg));
  CHECK_THROWS(sapo_loss(bad, 1.0, cfg));
}
