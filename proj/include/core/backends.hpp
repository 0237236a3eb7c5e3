#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>

namespace core {

struct GenerationRequest {
  std::string prompt;
  int max_new_tokens = 3072;  // 4096 for evaluation runs
  double temperature = 1.0;
  std::optional<std::uint64_t> seed_hint;
};

struct BackendConfig {
  std::string kind = "toy";  // "mock" | "toy" | "http"
  std::string endpoint_url;
  std::string model_name;
  int timeout_ms = 30000;
  int max_retries = 3;
  std::string api_key_env = "CORE_BACKEND_API_KEY";
};

// Prompt in, sampled text out. Implementations must be safe to call from
// several worker threads at once.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string generate(const GenerationRequest& request) = 0;
};

// Returns scripted text for exact prompts; unknown prompts either fall back
// to a default response or fail loudly.
class MockBackend : public Backend {
 public:
  MockBackend() = default;
  explicit MockBackend(std::map<std::string, std::string> script,
                       std::optional<std::string> fallback = std::nullopt);
  void script(const std::string& prompt, const std::string& response);
  std::string generate(const GenerationRequest& request) override;

 private:
  std::map<std::string, std::string> script_;
  std::optional<std::string> fallback_;
};

// POSTs a chat-completions request and returns choices[0].message.content,
// truncated client-side to the token budget. Retries transient failures
// with exponential backoff. The API key is read from the configured
// environment variable and never written to logs or errors.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(BackendConfig cfg);
  std::string generate(const GenerationRequest& request) override;

  // Exact wire bytes for a request; field order is pinned by construction.
  static std::string request_body(const GenerationRequest& request,
                                  const std::string& model_name);

 private:
  BackendConfig cfg_;
  std::string host_;  // scheme://authority
  std::string path_;  // request path, /v1/chat/completions appended if bare
};

}  // namespace core
