#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "core/backends.hpp"
#include "core/losses.hpp"
#include "core/protocol.hpp"
#include "core/rewards.hpp"

namespace core {

struct AblationConfig {
  bool disable_round_b = false;
  bool disable_explore = false;  // zeroes the exploration weight
  bool disable_cross = false;    // zeroes the cross-model auxiliary weight
};

struct TrainConfig {
  int epochs = 100;
  int batch_problems = 4;
  double learning_rate = 1e-5;
  double max_grad_norm = 1.0;
  // Echoed for parity with adapter-based fine-tuning setups; the toy
  // trainer has no adapters, so these change nothing.
  int lora_rank = 16;
  int lora_alpha = 32;
};

struct SimulatorConfig {
  std::string task = "complementary-v1";  // bundled name or path via task_file
  std::string task_file;
  std::vector<std::vector<double>> init_logits;     // optional override
  std::vector<std::vector<double>> init_hint_bias;  // optional override
};

struct RunConfig {
  ProtocolConfig protocol;
  RewardConfig reward;
  std::string loss = "grpo";
  LossConfig loss_config;
  TrainConfig train;
  SimulatorConfig simulator;
  AblationConfig ablations;
  std::vector<BackendConfig> backends;  // one per model; empty means toy team
  std::string dataset_path;
  std::string output_dir = "out";
  // Optional trigger-table overrides merged over the built-in defaults.
  std::vector<std::pair<std::string, std::string>> signature_triggers;

  // Reward config with ablation switches folded in.
  RewardConfig effective_reward() const;
  // Protocol config with ablation switches folded in.
  ProtocolConfig effective_protocol() const;
  // Per-model backend configs, defaulted to a toy team of team_size.
  std::vector<BackendConfig> effective_backends() const;

  void validate() const;  // throws config_error with a field path
};

nlohmann::json to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::json& j);

// Reads, merges over defaults, validates.
RunConfig load_run_config(const std::string& path);

// Featurizer with the config's trigger overrides merged over the defaults
// (replace by name, append new names).
Featurizer make_featurizer(const RunConfig& cfg);

}  // namespace core
