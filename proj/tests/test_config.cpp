#include <doctest.h>

#include <string>

#include "core/config.hpp"
#include "core/errors.hpp"
#include "core/io_util.hpp"

using namespace core;

TEST_CASE("default configuration carries the documented hyperparameters") {
  RunConfig cfg;
  CHECK(cfg.protocol.k_cold == 2);
  CHECK(cfg.protocol.k_contexted == 1);
  CHECK(cfg.protocol.p_hint == 0.5);
  CHECK(cfg.protocol.context_budget_tokens == 1536);
  CHECK(cfg.protocol.team_size == 2);
  CHECK(cfg.protocol.max_new_tokens == 3072);
  CHECK(cfg.protocol.temperature == 1.0);
  CHECK(cfg.reward.alpha == 0.3);
  CHECK(cfg.reward.w1 == 1.0);
  CHECK(cfg.reward.w2 == 0.5);
  CHECK(cfg.reward.delta == 0.15);
  CHECK(cfg.reward.explore_cap == 10);
  CHECK(cfg.reward.r_teach == 0.15);
  CHECK(cfg.reward.lambda_ta == 0.1);
  CHECK(cfg.reward.lambda_cm == 0.1);
  CHECK(cfg.reward.eta == 1.0);
  CHECK(cfg.reward.delta_cm == 0.15);
  CHECK(cfg.reward.epsilon == 1e-8);
  CHECK(cfg.reward.lambda_b == 0.8);
  CHECK(cfg.reward.distance.lambda_emb == 0.6);
  CHECK(cfg.reward.distance.lambda_struct == 0.4);
  CHECK(cfg.loss == "grpo");
  CHECK(cfg.loss_config.clip_low == 0.2);
  CHECK(cfg.loss_config.clip_high == 0.28);
  CHECK(cfg.loss_config.kl_beta == 0.01);
  CHECK(cfg.train.epochs == 100);
  CHECK(cfg.train.batch_problems == 4);
  CHECK(cfg.train.learning_rate == 1e-5);
  CHECK(cfg.train.max_grad_norm == 1.0);
  CHECK(cfg.train.lora_rank == 16);
  CHECK(cfg.train.lora_alpha == 32);
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("configuration survives a json round-trip") {
  RunConfig cfg;
  cfg.protocol.seed = 99;
  cfg.loss = "sapo";
  cfg.ablations.disable_cross = true;
  cfg.signature_triggers.emplace_back("root", R"(sqrt|square root)");
  BackendConfig b;
  b.kind = "http";
  b.endpoint_url = "http://127.0.0.1:8000";
  b.model_name = "m";
  cfg.backends = {b, b};

  auto j = to_json(cfg);
  auto back = run_config_from_json(j);
  CHECK(to_json(back) == j);
  CHECK(back.loss == "sapo");
  CHECK(back.protocol.seed == 99);
  CHECK(back.ablations.disable_cross);
  CHECK(back.backends.size() == 2);
  CHECK(back.signature_triggers.size() == 1);
}

TEST_CASE("partial files merge over defaults") {
  std::string path = "/tmp/core_test_config.json";
  atomic_write_file(path, R"({"train": {"epochs": 3}, "loss": "gspo"})");
  auto cfg = load_run_config(path);
  CHECK(cfg.train.epochs == 3);
  CHECK(cfg.loss == "gspo");
  CHECK(cfg.protocol.k_cold == 2);        // untouched default
  CHECK(cfg.reward.r_teach == 0.15);      // untouched default
  CHECK(cfg.train.batch_problems == 4);   // untouched default
}

TEST_CASE("validation names the offending field") {
  RunConfig cfg;
  cfg.train.epochs = 0;
  try {
    cfg.validate();
    FAIL("expected a validation error");
  } catch (const config_error& e) {
    CHECK(std::string(e.what()).find("train.epochs") != std::string::npos);
  }

  RunConfig bad_k;
  bad_k.protocol.k_cold = 0;
  CHECK_THROWS_AS(bad_k.validate(), config_error);

  RunConfig bad_p;
  bad_p.protocol.p_hint = 1.5;
  CHECK_THROWS_AS(bad_p.validate(), config_error);

  RunConfig bad_loss;
  bad_loss.loss = "never-heard-of-it";
  CHECK_THROWS_AS(bad_loss.validate(), config_error);
}

TEST_CASE("malformed config files are rejected with context") {
  std::string path = "/tmp/core_test_config_bad.json";
  atomic_write_file(path, "{not json");
  CHECK_THROWS_AS(load_run_config(path), config_error);
  atomic_write_file(path, R"({"protocol": {"k_cold": "two"}})");
  CHECK_THROWS_AS(load_run_config(path), config_error);
}

TEST_CASE("ablation switches fold into the effective configs") {
  RunConfig cfg;
  cfg.ablations.disable_explore = true;
  cfg.ablations.disable_cross = true;
  cfg.ablations.disable_round_b = true;
  auto reward = cfg.effective_reward();
  CHECK(reward.w2 == 0.0);
  CHECK(reward.lambda_cm == 0.0);
  auto protocol = cfg.effective_protocol();
  CHECK_FALSE(protocol.enable_round_b);

  RunConfig plain;
  CHECK(plain.effective_reward().w2 == 0.5);
  CHECK(plain.effective_protocol().enable_round_b);
}

TEST_CASE("effective backends default to a toy team of the configured size") {
  RunConfig cfg;
  auto defaults = cfg.effective_backends();
  REQUIRE(defaults.size() == 2);
  CHECK(defaults[0].kind == "toy");

  BackendConfig b;
  b.kind = "http";
  b.endpoint_url = "http://localhost:1";
  b.model_name = "m";
  cfg.backends = {b, b, b};
  cfg.protocol.team_size = 3;
  auto explicit_set = cfg.effective_backends();
  CHECK(explicit_set.size() == 3);
  CHECK(explicit_set[0].kind == "http");

  cfg.protocol.team_size = 2;
  CHECK_THROWS_AS(cfg.validate(), config_error);  // backend count mismatch
}

TEST_CASE("trigger overrides replace by name and append new entries") {
  RunConfig cfg;
  cfg.signature_triggers.emplace_back("add", R"(\bplus\b)");  // replace
  cfg.signature_triggers.emplace_back("root", R"(sqrt)");     // append
  auto feat = make_featurizer(cfg);
  auto ops = feat.features("we add the numbers and take sqrt")->ops;
  CHECK(ops.count("add") == 0);  // the default pattern was replaced
  CHECK(ops.count("root") == 1);
  CHECK(feat.features("a plus b")->ops.count("add") == 1);

  auto plain = make_featurizer(RunConfig{});
  CHECK(plain.features("we add the numbers")->ops.count("add") == 1);
}
