#include "core/backends.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "core/errors.hpp"
#include "core/trace.hpp"

namespace core {

using json = nlohmann::json;

MockBackend::MockBackend(std::map<std::string, std::string> script,
                         std::optional<std::string> fallback)
    : script_(std::move(script)), fallback_(std::move(fallback)) {}

void MockBackend::script(const std::string& prompt, const std::string& response) {
  script_[prompt] = response;
}

std::string MockBackend::generate(const GenerationRequest& request) {
  auto it = script_.find(request.prompt);
  if (it != script_.end()) return it->second;
  if (fallback_) return *fallback_;
  throw backend_error("mock backend has no script for prompt (" +
                      std::to_string(request.prompt.size()) + " chars)");
}

HttpBackend::HttpBackend(BackendConfig cfg) : cfg_(std::move(cfg)) {
  const std::string& url = cfg_.endpoint_url;
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw config_error("http backend endpoint_url must include a scheme: " + url);
  }
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    host_ = url;
    path_ = "/v1/chat/completions";
  } else {
    host_ = url.substr(0, path_start);
    path_ = url.substr(path_start);
    if (path_.empty() || path_ == "/") path_ = "/v1/chat/completions";
  }
}

std::string HttpBackend::request_body(const GenerationRequest& request,
                                      const std::string& model_name) {
  // nlohmann objects serialize keys sorted, so identical requests always
  // produce identical bytes.
  json body;
  body["model"] = model_name;
  body["messages"] = json::array({json{{"role", "user"}, {"content", request.prompt}}});
  body["max_tokens"] = request.max_new_tokens;
  body["temperature"] = request.temperature;
  if (request.seed_hint) body["seed"] = *request.seed_hint;
  return body.dump();
}

std::string HttpBackend::generate(const GenerationRequest& request) {
  std::string body = request_body(request, cfg_.model_name);
  httplib::Headers headers;
  if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  std::string last_failure = "no attempt made";
  int attempts = cfg_.max_retries < 0 ? 1 : cfg_.max_retries + 1;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) {
      auto delay = std::chrono::milliseconds(100LL << (attempt - 1));
      std::this_thread::sleep_for(delay);
    }
    httplib::Client client(host_);
    client.set_connection_timeout(cfg_.timeout_ms / 1000, (cfg_.timeout_ms % 1000) * 1000);
    client.set_read_timeout(cfg_.timeout_ms / 1000, (cfg_.timeout_ms % 1000) * 1000);
    auto res = client.Post(path_, headers, body, "application/json");
    if (!res) {
      last_failure = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_failure = "server status " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw backend_error("http backend: unexpected status " +
                          std::to_string(res->status) + " from " + host_ + path_);
    }
    json parsed = json::parse(res->body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("choices") ||
        !parsed["choices"].is_array() || parsed["choices"].empty()) {
      throw backend_error("http backend: malformed completion response");
    }
    const auto& first = parsed["choices"][0];
    if (!first.contains("message") || !first["message"].contains("content") ||
        !first["message"]["content"].is_string()) {
      throw backend_error("http backend: response missing message content");
    }
    std::string text = first["message"]["content"].get<std::string>();
    // Enforce the budget client-side with the same estimate used everywhere.
    std::size_t max_chars = static_cast<std::size_t>(request.max_new_tokens) * 4;
    if (text.size() > max_chars) text.resize(max_chars);
    return text;
  }
  throw backend_error("http backend: " + std::to_string(attempts) +
                      " attempts failed, last: " + last_failure);
}

}  // namespace core
