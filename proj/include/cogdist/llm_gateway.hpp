#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <semaphore>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cogdist/jsonl.hpp"

namespace cogdist {

enum class ApiStyle { openai, anthropic, gemini, mock };

std::string_view to_string(ApiStyle style) noexcept;
ApiStyle parse_api_style(std::string_view text);

/// One chat-completion provider. Decoding defaults are the values used for
/// every provider in both ELB extraction and instance inference.
struct ProviderConfig {
  std::string provider_id;
  ApiStyle api_style = ApiStyle::mock;
  std::string endpoint;
  std::string model_name;
  std::string api_key_env;
  int max_tokens = 512;
  double temperature = 0.7;
  double top_p = 1.0;
  double frequency_penalty = 0.0;
  double presence_penalty = 0.0;
  int max_retries = 3;
  std::chrono::milliseconds timeout{60'000};
  int max_in_flight = 4;

  static ProviderConfig from_json(const json& j);
  json to_json() const;
};

/// Digest of (provider_id, model_name, prompt, decoding params). A non-zero
/// `reprompt` index gives a re-sent prompt its own cache slot.
std::string request_hash(const ProviderConfig& provider, std::string_view prompt, int reprompt = 0);

struct CompletionRecord {
  std::string request_hash;
  std::string raw_text;
  std::string timestamp;  // ISO-8601 UTC; informational only
};

/// Content-addressed response store: <dir>/<hash[0:2]>/<hash>.json.
/// Writes go through a temp file + rename and are serialized.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  std::optional<CompletionRecord> get(const std::string& hash) const;
  void put(const CompletionRecord& record);
  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  std::filesystem::path path_for(const std::string& hash) const;

  std::filesystem::path dir_;
  mutable std::mutex mu_;
};

struct HttpRequest {
  std::string url;
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body;
  std::chrono::milliseconds timeout{60'000};
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// Blocking POST. Implementations throw TransportError(0, ...) when no
/// response arrives and Error(Timeout) on timeouts; HTTP error statuses are
/// returned, not thrown.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post(const HttpRequest& request) = 0;
};

std::shared_ptr<HttpTransport> make_http_transport();

/// Provider wire formats.
HttpRequest build_provider_request(const ProviderConfig& provider, std::string_view prompt,
                                   const std::string& api_key);
std::string parse_provider_response(ApiStyle style, const std::string& body);

/// Deterministic offline provider: keyword rules over the sentence embedded in
/// the prompt. Pure function of (prompt, provider_id).
std::string mock_complete(std::string_view prompt, std::string_view provider_id);

struct RetryPolicy {
  std::chrono::milliseconds initial_backoff{1000};
  double multiplier = 2.0;
  double jitter = 0.2;  // +/- fraction
};

class LlmGateway {
 public:
  struct Options {
    std::optional<std::filesystem::path> cache_dir;
    std::shared_ptr<HttpTransport> transport;  // default: make_http_transport()
    std::function<void(std::chrono::milliseconds)> sleep;  // default: this_thread::sleep_for
    std::function<std::optional<std::string>(const std::string&)> getenv;  // default: std::getenv
    RetryPolicy retry;
    std::uint64_t jitter_seed = 0x5EEDULL;
  };

  LlmGateway();
  explicit LlmGateway(Options options);

  /// Cache lookup, then provider call with retries; successful responses are
  /// cached under request_hash(provider, prompt).
  std::string complete(const ProviderConfig& provider, std::string_view prompt, int reprompt = 0);

  /// Number of provider invocations (network or mock) that missed the cache.
  std::size_t provider_calls() const noexcept;
  std::size_t cache_hits() const noexcept;

 private:
  std::string call_provider(const ProviderConfig& provider, std::string_view prompt);
  std::chrono::milliseconds backoff(int retry_index);
  std::counting_semaphore<>& limiter(const ProviderConfig& provider);

  Options options_;
  std::optional<ResponseCache> cache_;
  mutable std::mutex mu_;
  std::map<std::string, std::unique_ptr<std::counting_semaphore<>>> limiters_;
  std::mt19937_64 jitter_rng_;
  std::size_t provider_calls_ = 0;
  std::size_t cache_hits_ = 0;
};

/// First top-level JSON value (object or array) in an LLM reply. Code fences
/// are stripped first; prose around the value is ignored. Error(NoJsonFound).
std::string extract_json_payload(std::string_view raw_text);

}  // namespace cogdist
