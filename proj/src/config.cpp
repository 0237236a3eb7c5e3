#include "core/config.hpp"

#include "core/errors.hpp"
#include "core/io_util.hpp"

namespace core {

using nlohmann::json;

namespace {

// Pulls a field if present, enforcing the JSON type loosely via nlohmann.
template <typename T>
void get_to(const json& j, const char* key, T& out, const std::string& path) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(out);
  } catch (const json::exception& e) {
    throw config_error(path + "." + key + ": " + e.what());
  }
}

void check(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw config_error(field + ": " + what);
}

}  // namespace

RewardConfig RunConfig::effective_reward() const {
  RewardConfig r = reward;
  if (ablations.disable_explore) r.w2 = 0.0;
  if (ablations.disable_cross) r.lambda_cm = 0.0;
  return r;
}

ProtocolConfig RunConfig::effective_protocol() const {
  ProtocolConfig p = protocol;
  if (ablations.disable_round_b) p.enable_round_b = false;
  return p;
}

std::vector<BackendConfig> RunConfig::effective_backends() const {
  if (!backends.empty()) return backends;
  std::vector<BackendConfig> out(static_cast<std::size_t>(protocol.team_size));
  for (auto& b : out) b.kind = "toy";
  return out;
}

void RunConfig::validate() const {
  check(protocol.k_cold >= 1, "protocol.k_cold", "must be >= 1");
  check(protocol.k_contexted >= 0, "protocol.k_contexted", "must be >= 0");
  check(protocol.p_hint >= 0.0 && protocol.p_hint <= 1.0, "protocol.p_hint",
        "must lie in [0, 1]");
  check(protocol.context_budget_tokens >= 1, "protocol.context_budget_tokens",
        "must be >= 1");
  check(protocol.team_size >= 1, "protocol.team_size", "must be >= 1");
  check(protocol.max_new_tokens >= 1, "protocol.max_new_tokens", "must be >= 1");

  check(reward.alpha >= 0.0, "reward.alpha", "must be >= 0");
  check(reward.delta >= 0.0 && reward.delta <= 1.0, "reward.delta", "must lie in [0, 1]");
  check(reward.explore_cap >= 1, "reward.explore_cap", "must be >= 1");
  check(reward.r_teach >= 0.0, "reward.r_teach", "must be >= 0");
  check(reward.delta_cm >= 0.0 && reward.delta_cm <= 1.0, "reward.delta_cm",
        "must lie in [0, 1]");
  check(reward.epsilon > 0.0, "reward.epsilon", "must be > 0");
  check(reward.lambda_b >= 0.0 && reward.lambda_b <= 1.0, "reward.lambda_b",
        "must lie in [0, 1]");
  check(reward.distance.lambda_emb >= 0.0, "reward.distance.lambda_emb", "must be >= 0");
  check(reward.distance.lambda_struct >= 0.0, "reward.distance.lambda_struct",
        "must be >= 0");

  loss_from_name(loss);  // throws on unknown loss
  check(loss_config.clip_low > 0.0 && loss_config.clip_low < 1.0, "loss_config.clip_low",
        "must lie in (0, 1)");
  check(loss_config.clip_high > 0.0, "loss_config.clip_high", "must be > 0");
  check(loss_config.kl_beta >= 0.0, "loss_config.kl_beta", "must be >= 0");
  check(loss_config.sapo_temp_pos > 0.0, "loss_config.sapo_temp_pos", "must be > 0");
  check(loss_config.sapo_temp_neg > 0.0, "loss_config.sapo_temp_neg", "must be > 0");

  check(train.epochs >= 1, "train.epochs", "must be >= 1");
  check(train.batch_problems >= 1, "train.batch_problems", "must be >= 1");
  check(train.learning_rate > 0.0, "train.learning_rate", "must be > 0");
  check(train.max_grad_norm > 0.0, "train.max_grad_norm", "must be > 0");

  if (!backends.empty()) {
    check(static_cast<int>(backends.size()) == protocol.team_size, "backends",
          "must list exactly team_size entries");
    for (std::size_t i = 0; i < backends.size(); ++i) {
      const auto& b = backends[i];
      std::string field = "backends[" + std::to_string(i) + "]";
      check(b.kind == "mock" || b.kind == "toy" || b.kind == "http", field + ".kind",
            "must be mock, toy, or http");
      if (b.kind == "http") {
        check(!b.endpoint_url.empty(), field + ".endpoint_url",
              "required for http backends");
      }
      check(b.max_retries >= 0, field + ".max_retries", "must be >= 0");
      check(b.timeout_ms >= 1, field + ".timeout_ms", "must be >= 1");
    }
  }
  for (const auto& [name, pattern] : signature_triggers) {
    check(!name.empty(), "signature_triggers", "names must be non-empty");
    check(!pattern.empty(), "signature_triggers." + name, "pattern must be non-empty");
  }
}

json to_json(const RunConfig& cfg) {
  json j;
  j["protocol"] = {{"k_cold", cfg.protocol.k_cold},
                   {"k_contexted", cfg.protocol.k_contexted},
                   {"p_hint", cfg.protocol.p_hint},
                   {"context_budget_tokens", cfg.protocol.context_budget_tokens},
                   {"team_size", cfg.protocol.team_size},
                   {"enable_round_b", cfg.protocol.enable_round_b},
                   {"seed", cfg.protocol.seed},
                   {"max_new_tokens", cfg.protocol.max_new_tokens},
                   {"temperature", cfg.protocol.temperature}};
  j["reward"] = {{"alpha", cfg.reward.alpha},
                 {"w1", cfg.reward.w1},
                 {"w2", cfg.reward.w2},
                 {"delta", cfg.reward.delta},
                 {"explore_cap", cfg.reward.explore_cap},
                 {"r_teach", cfg.reward.r_teach},
                 {"lambda_ta", cfg.reward.lambda_ta},
                 {"lambda_cm", cfg.reward.lambda_cm},
                 {"eta", cfg.reward.eta},
                 {"delta_cm", cfg.reward.delta_cm},
                 {"epsilon", cfg.reward.epsilon},
                 {"lambda_b", cfg.reward.lambda_b},
                 {"distance", {{"lambda_emb", cfg.reward.distance.lambda_emb},
                               {"lambda_struct", cfg.reward.distance.lambda_struct}}}};
  j["loss"] = cfg.loss;
  j["loss_config"] = {{"clip_low", cfg.loss_config.clip_low},
                      {"clip_high", cfg.loss_config.clip_high},
                      {"kl_beta", cfg.loss_config.kl_beta},
                      {"sapo_temp_pos", cfg.loss_config.sapo_temp_pos},
                      {"sapo_temp_neg", cfg.loss_config.sapo_temp_neg}};
  j["train"] = {{"epochs", cfg.train.epochs},
                {"batch_problems", cfg.train.batch_problems},
                {"learning_rate", cfg.train.learning_rate},
                {"max_grad_norm", cfg.train.max_grad_norm},
                {"lora_rank", cfg.train.lora_rank},
                {"lora_alpha", cfg.train.lora_alpha}};
  j["simulator"] = {{"task", cfg.simulator.task}};
  if (!cfg.simulator.task_file.empty()) j["simulator"]["task_file"] = cfg.simulator.task_file;
  if (!cfg.simulator.init_logits.empty()) {
    j["simulator"]["init_logits"] = cfg.simulator.init_logits;
  }
  if (!cfg.simulator.init_hint_bias.empty()) {
    j["simulator"]["init_hint_bias"] = cfg.simulator.init_hint_bias;
  }
  j["ablations"] = {{"disable_round_b", cfg.ablations.disable_round_b},
                    {"disable_explore", cfg.ablations.disable_explore},
                    {"disable_cross", cfg.ablations.disable_cross}};
  j["backends"] = json::array();
  for (const auto& b : cfg.backends) {
    j["backends"].push_back({{"kind", b.kind},
                             {"endpoint_url", b.endpoint_url},
                             {"model_name", b.model_name},
                             {"timeout_ms", b.timeout_ms},
                             {"max_retries", b.max_retries},
                             {"api_key_env", b.api_key_env}});
  }
  j["dataset_path"] = cfg.dataset_path;
  j["output_dir"] = cfg.output_dir;
  j["signature_triggers"] = json::object();
  for (const auto& [name, pattern] : cfg.signature_triggers) {
    j["signature_triggers"][name] = pattern;
  }
  return j;
}

RunConfig run_config_from_json(const json& j) {
  RunConfig cfg;
  if (!j.is_object()) throw config_error("run config must be a JSON object");

  if (j.contains("protocol")) {
    const auto& p = j.at("protocol");
    get_to(p, "k_cold", cfg.protocol.k_cold, "protocol");
    get_to(p, "k_contexted", cfg.protocol.k_contexted, "protocol");
    get_to(p, "p_hint", cfg.protocol.p_hint, "protocol");
    get_to(p, "context_budget_tokens", cfg.protocol.context_budget_tokens, "protocol");
    get_to(p, "team_size", cfg.protocol.team_size, "protocol");
    get_to(p, "enable_round_b", cfg.protocol.enable_round_b, "protocol");
    get_to(p, "seed", cfg.protocol.seed, "protocol");
    get_to(p, "max_new_tokens", cfg.protocol.max_new_tokens, "protocol");
    get_to(p, "temperature", cfg.protocol.temperature, "protocol");
  }
  if (j.contains("reward")) {
    const auto& r = j.at("reward");
    get_to(r, "alpha", cfg.reward.alpha, "reward");
    get_to(r, "w1", cfg.reward.w1, "reward");
    get_to(r, "w2", cfg.reward.w2, "reward");
    get_to(r, "delta", cfg.reward.delta, "reward");
    get_to(r, "explore_cap", cfg.reward.explore_cap, "reward");
    get_to(r, "r_teach", cfg.reward.r_teach, "reward");
    get_to(r, "lambda_ta", cfg.reward.lambda_ta, "reward");
    get_to(r, "lambda_cm", cfg.reward.lambda_cm, "reward");
    get_to(r, "eta", cfg.reward.eta, "reward");
    get_to(r, "delta_cm", cfg.reward.delta_cm, "reward");
    get_to(r, "epsilon", cfg.reward.epsilon, "reward");
    get_to(r, "lambda_b", cfg.reward.lambda_b, "reward");
    if (r.contains("distance")) {
      get_to(r.at("distance"), "lambda_emb", cfg.reward.distance.lambda_emb,
             "reward.distance");
      get_to(r.at("distance"), "lambda_struct", cfg.reward.distance.lambda_struct,
             "reward.distance");
    }
  }
  get_to(j, "loss", cfg.loss, "");
  if (j.contains("loss_config")) {
    const auto& l = j.at("loss_config");
    get_to(l, "clip_low", cfg.loss_config.clip_low, "loss_config");
    get_to(l, "clip_high", cfg.loss_config.clip_high, "loss_config");
    get_to(l, "kl_beta", cfg.loss_config.kl_beta, "loss_config");
    get_to(l, "sapo_temp_pos", cfg.loss_config.sapo_temp_pos, "loss_config");
    get_to(l, "sapo_temp_neg", cfg.loss_config.sapo_temp_neg, "loss_config");
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    get_to(t, "epochs", cfg.train.epochs, "train");
    get_to(t, "batch_problems", cfg.train.batch_problems, "train");
    get_to(t, "learning_rate", cfg.train.learning_rate, "train");
    get_to(t, "max_grad_norm", cfg.train.max_grad_norm, "train");
    get_to(t, "lora_rank", cfg.train.lora_rank, "train");
    get_to(t, "lora_alpha", cfg.train.lora_alpha, "train");
  }
  if (j.contains("simulator")) {
    const auto& s = j.at("simulator");
    get_to(s, "task", cfg.simulator.task, "simulator");
    get_to(s, "task_file", cfg.simulator.task_file, "simulator");
    get_to(s, "init_logits", cfg.simulator.init_logits, "simulator");
    get_to(s, "init_hint_bias", cfg.simulator.init_hint_bias, "simulator");
  }
  if (j.contains("ablations")) {
    const auto& a = j.at("ablations");
    get_to(a, "disable_round_b", cfg.ablations.disable_round_b, "ablations");
    get_to(a, "disable_explore", cfg.ablations.disable_explore, "ablations");
    get_to(a, "disable_cross", cfg.ablations.disable_cross, "ablations");
  }
  if (j.contains("backends")) {
    if (!j.at("backends").is_array()) throw config_error("backends: must be an array");
    for (std::size_t i = 0; i < j.at("backends").size(); ++i) {
      const auto& b = j.at("backends")[i];
      BackendConfig bc;
      std::string path = "backends[" + std::to_string(i) + "]";
      get_to(b, "kind", bc.kind, path);
      get_to(b, "endpoint_url", bc.endpoint_url, path);
      get_to(b, "model_name", bc.model_name, path);
      get_to(b, "timeout_ms", bc.timeout_ms, path);
      get_to(b, "max_retries", bc.max_retries, path);
      get_to(b, "api_key_env", bc.api_key_env, path);
      cfg.backends.push_back(std::move(bc));
    }
  }
  get_to(j, "dataset_path", cfg.dataset_path, "");
  get_to(j, "output_dir", cfg.output_dir, "");
  if (j.contains("signature_triggers")) {
    const auto& s = j.at("signature_triggers");
    if (!s.is_object()) throw config_error("signature_triggers: must be an object");
    for (const auto& [name, pattern] : s.items()) {
      if (!pattern.is_string()) {
        throw config_error("signature_triggers." + name + ": pattern must be a string");
      }
      cfg.signature_triggers.emplace_back(name, pattern.get<std::string>());
    }
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw config_error("config file is not valid JSON: " + path);
  RunConfig cfg = run_config_from_json(j);
  cfg.validate();
  return cfg;
}

Featurizer make_featurizer(const RunConfig& cfg) {
  auto triggers = SignatureExtractor::default_triggers();
  for (const auto& [name, pattern] : cfg.signature_triggers) {
    bool replaced = false;
    for (auto& [existing_name, existing_pattern] : triggers) {
      if (existing_name == name) {
        existing_pattern = pattern;
        replaced = true;
        break;
      }
    }
    if (!replaced) triggers.emplace_back(name, pattern);
  }
  return Featurizer(HashedEmbedder(), SignatureExtractor(triggers));
}

}  // namespace core
