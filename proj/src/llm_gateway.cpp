#include "cogdist/llm_gateway.hpp"

#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <thread>

#include "cogdist/digest.hpp"
#include "cogdist/error.hpp"

namespace cogdist {

namespace fs = std::filesystem;

std::string_view to_string(ApiStyle style) noexcept {
  switch (style) {
    case ApiStyle::openai: return "openai";
    case ApiStyle::anthropic: return "anthropic";
    case ApiStyle::gemini: return "gemini";
    case ApiStyle::mock: return "mock";
  }
  return "mock";
}

ApiStyle parse_api_style(std::string_view text) {
  if (text == "openai") return ApiStyle::openai;
  if (text == "anthropic") return ApiStyle::anthropic;
  if (text == "gemini") return ApiStyle::gemini;
  if (text == "mock") return ApiStyle::mock;
  throw Error(ErrorKind::ConfigInvalid, "unknown api_style '" + std::string(text) + "'");
}

ProviderConfig ProviderConfig::from_json(const json& j) {
  ProviderConfig c;
  try {
    c.provider_id = j.at("provider_id").get<std::string>();
    c.api_style = parse_api_style(j.value("api_style", std::string("mock")));
    c.endpoint = j.value("endpoint", std::string());
    c.model_name = j.value("model_name", std::string(c.api_style == ApiStyle::mock ? "mock" : ""));
    c.api_key_env = j.value("api_key_env", std::string());
    c.max_tokens = j.value("max_tokens", c.max_tokens);
    c.temperature = j.value("temperature", c.temperature);
    c.top_p = j.value("top_p", c.top_p);
    c.frequency_penalty = j.value("frequency_penalty", c.frequency_penalty);
    c.presence_penalty = j.value("presence_penalty", c.presence_penalty);
    c.max_retries = j.value("max_retries", c.max_retries);
    c.timeout = std::chrono::milliseconds(j.value("timeout_ms", static_cast<long>(c.timeout.count())));
    c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigInvalid, std::string("provider config: ") + e.what());
  }
  if (c.provider_id.empty()) throw Error(ErrorKind::ConfigInvalid, "provider_id is empty");
  if (c.max_retries < 0 || c.max_in_flight < 1 || c.max_tokens < 1) {
    throw Error(ErrorKind::ConfigInvalid, "provider '" + c.provider_id + "': invalid limits");
  }
  if (c.api_style != ApiStyle::mock && c.model_name.empty()) {
    throw Error(ErrorKind::ConfigInvalid, "provider '" + c.provider_id + "': model_name required");
  }
  return c;
}

json ProviderConfig::to_json() const {
  return {{"provider_id", provider_id},
          {"api_style", to_string(api_style)},
          {"endpoint", endpoint},
          {"model_name", model_name},
          {"api_key_env", api_key_env},
          {"max_tokens", max_tokens},
          {"temperature", temperature},
          {"top_p", top_p},
          {"frequency_penalty", frequency_penalty},
          {"presence_penalty", presence_penalty},
          {"max_retries", max_retries},
          {"timeout_ms", timeout.count()},
          {"max_in_flight", max_in_flight}};
}

std::string request_hash(const ProviderConfig& p, std::string_view prompt, int reprompt) {
  json key{{"provider_id", p.provider_id},
           {"model_name", p.model_name},
           {"prompt", std::string(prompt)},
           {"max_tokens", p.max_tokens},
           {"temperature", p.temperature},
           {"top_p", p.top_p},
           {"frequency_penalty", p.frequency_penalty},
           {"presence_penalty", p.presence_penalty}};
  if (reprompt > 0) key["reprompt"] = reprompt;
  return sha256_hex(key.dump());
}

// ---------------------------------------------------------------------------
// ResponseCache

ResponseCache::ResponseCache(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

fs::path ResponseCache::path_for(const std::string& hash) const {
  return dir_ / hash.substr(0, 2) / (hash + ".json");
}

std::optional<CompletionRecord> ResponseCache::get(const std::string& hash) const {
  const auto path = path_for(hash);
  std::lock_guard lock(mu_);
  if (!fs::exists(path)) return std::nullopt;
  const json j = read_json(path);
  return CompletionRecord{j.at("request_hash").get<std::string>(), j.at("raw_text").get<std::string>(),
                          j.value("timestamp", std::string())};
}

void ResponseCache::put(const CompletionRecord& record) {
  const auto path = path_for(record.request_hash);
  const json j{{"request_hash", record.request_hash}, {"raw_text", record.raw_text}, {"timestamp", record.timestamp}};
  std::lock_guard lock(mu_);
  fs::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  write_text(tmp, j.dump(2) + "\n");
  fs::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Provider wire formats

HttpRequest build_provider_request(const ProviderConfig& p, std::string_view prompt, const std::string& api_key) {
  HttpRequest req;
  req.timeout = p.timeout;
  req.headers.emplace_back("Content-Type", "application/json");
  json body;
  switch (p.api_style) {
    case ApiStyle::openai:
      req.url = p.endpoint.empty() ? "https://api.openai.com/v1/chat/completions" : p.endpoint;
      req.headers.emplace_back("Authorization", "Bearer " + api_key);
      body = {{"model", p.model_name},
              {"messages", json::array({{{"role", "user"}, {"content", std::string(prompt)}}})},
              {"max_tokens", p.max_tokens},
              {"temperature", p.temperature},
              {"top_p", p.top_p},
              {"frequency_penalty", p.frequency_penalty},
              {"presence_penalty", p.presence_penalty}};
      break;
    case ApiStyle::anthropic:
      // The Messages API has no frequency/presence penalties.
      req.url = p.endpoint.empty() ? "https://api.anthropic.com/v1/messages" : p.endpoint;
      req.headers.emplace_back("x-api-key", api_key);
      req.headers.emplace_back("anthropic-version", "2023-06-01");
      body = {{"model", p.model_name},
              {"messages", json::array({{{"role", "user"}, {"content", std::string(prompt)}}})},
              {"max_tokens", p.max_tokens},
              {"temperature", p.temperature},
              {"top_p", p.top_p}};
      break;
    case ApiStyle::gemini: {
      const std::string base =
          p.endpoint.empty() ? "https://generativelanguage.googleapis.com/v1beta" : p.endpoint;
      req.url = base + "/models/" + p.model_name + ":generateContent";
      req.headers.emplace_back("x-goog-api-key", api_key);
      body = {{"contents", json::array({{{"role", "user"}, {"parts", json::array({{{"text", std::string(prompt)}}})}}})},
              {"generationConfig",
               {{"maxOutputTokens", p.max_tokens},
                {"temperature", p.temperature},
                {"topP", p.top_p},
                {"frequencyPenalty", p.frequency_penalty},
                {"presencePenalty", p.presence_penalty}}}};
      break;
    }
    case ApiStyle::mock:
      throw Error(ErrorKind::InvalidInput, "mock provider has no wire format");
  }
  req.body = body.dump();
  return req;
}

std::string parse_provider_response(ApiStyle style, const std::string& body) {
  try {
    const json j = json::parse(body);
    switch (style) {
      case ApiStyle::openai:
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
      case ApiStyle::anthropic: {
        std::string text;
        for (const auto& block : j.at("content")) {
          if (block.value("type", "") == "text") text += block.at("text").get<std::string>();
        }
        return text;
      }
      case ApiStyle::gemini: {
        std::string text;
        for (const auto& part : j.at("candidates").at(0).at("content").at("parts")) {
          text += part.value("text", "");
        }
        return text;
      }
      case ApiStyle::mock:
        break;
    }
  } catch (const json::exception& e) {
    throw TransportError(200, std::string("unexpected response body: ") + e.what());
  }
  throw Error(ErrorKind::InvalidInput, "mock provider has no wire format");
}

// ---------------------------------------------------------------------------
// LlmGateway

LlmGateway::LlmGateway() : LlmGateway(Options{}) {}

LlmGateway::LlmGateway(Options options) : options_(std::move(options)), jitter_rng_(options_.jitter_seed) {
  if (options_.cache_dir) cache_.emplace(*options_.cache_dir);
  if (!options_.transport) options_.transport = make_http_transport();
  if (!options_.sleep) options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  if (!options_.getenv) {
    options_.getenv = [](const std::string& name) -> std::optional<std::string> {
      if (name.empty()) return std::nullopt;
      const char* v = std::getenv(name.c_str());
      if (v == nullptr || *v == '\0') return std::nullopt;
      return std::string(v);
    };
  }
}

std::size_t LlmGateway::provider_calls() const noexcept {
  std::lock_guard lock(mu_);
  return provider_calls_;
}

std::size_t LlmGateway::cache_hits() const noexcept {
  std::lock_guard lock(mu_);
  return cache_hits_;
}

std::counting_semaphore<>& LlmGateway::limiter(const ProviderConfig& provider) {
  std::lock_guard lock(mu_);
  auto& slot = limiters_[provider.provider_id];
  if (!slot) slot = std::make_unique<std::counting_semaphore<>>(provider.max_in_flight);
  return *slot;
}

std::chrono::milliseconds LlmGateway::backoff(int retry_index) {
  double factor;
  {
    std::lock_guard lock(mu_);
    std::uniform_real_distribution<double> dist(1.0 - options_.retry.jitter, 1.0 + options_.retry.jitter);
    factor = dist(jitter_rng_);
  }
  const double base = static_cast<double>(options_.retry.initial_backoff.count()) *
                      std::pow(options_.retry.multiplier, retry_index);
  return std::chrono::milliseconds(static_cast<long>(std::llround(base * factor)));
}

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

bool transient_status(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

std::string LlmGateway::call_provider(const ProviderConfig& provider, std::string_view prompt) {
  {
    std::lock_guard lock(mu_);
    ++provider_calls_;
  }
  if (provider.api_style == ApiStyle::mock) return mock_complete(prompt, provider.provider_id);

  const auto key = options_.getenv(provider.api_key_env);
  if (!key) {
    throw Error(ErrorKind::AuthMissing, "provider '" + provider.provider_id + "': environment variable '" +
                                            provider.api_key_env + "' is not set");
  }
  const HttpRequest request = build_provider_request(provider, prompt, *key);

  std::string last_error;
  for (int attempt = 0; attempt <= provider.max_retries; ++attempt) {
    if (attempt > 0) options_.sleep(backoff(attempt - 1));
    try {
      const HttpResponse response = options_.transport->post(request);
      if (response.status >= 200 && response.status < 300) {
        return parse_provider_response(provider.api_style, response.body);
      }
      if (!transient_status(response.status)) {
        throw TransportError(response.status, response.body.substr(0, 512));
      }
      last_error = "HTTP " + std::to_string(response.status);
    } catch (const TransportError& e) {
      if (e.status() != 0) throw;
      last_error = e.what();
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Timeout) throw;
      last_error = e.what();
    }
  }
  throw Error(ErrorKind::RetriesExhausted, "provider '" + provider.provider_id + "' failed after " +
                                               std::to_string(provider.max_retries + 1) +
                                               " attempts; last error: " + last_error);
}

std::string LlmGateway::complete(const ProviderConfig& provider, std::string_view prompt, int reprompt) {
  const std::string hash = request_hash(provider, prompt, reprompt);
  if (cache_) {
    if (auto hit = cache_->get(hash)) {
      std::lock_guard lock(mu_);
      ++cache_hits_;
      return hit->raw_text;
    }
  }
  auto& sem = limiter(provider);
  sem.acquire();
  std::string text;
  try {
    text = call_provider(provider, prompt);
  } catch (...) {
    sem.release();
    throw;
  }
  sem.release();
  if (cache_) cache_->put({hash, text, utc_timestamp()});
  return text;
}

// ---------------------------------------------------------------------------
// JSON payload extraction

namespace {

// End offset (exclusive) of the balanced bracket group starting at `start`,
// or npos if the brackets never balance.
std::size_t match_brackets(std::string_view s, std::size_t start) {
  std::string expect;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = start; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    switch (c) {
      case '"': in_string = true; break;
      case '[': expect.push_back(']'); break;
      case '{': expect.push_back('}'); break;
      case ']':
      case '}':
        if (expect.empty() || expect.back() != c) return std::string_view::npos;
        expect.pop_back();
        if (expect.empty()) return i + 1;
        break;
      default: break;
    }
  }
  return std::string_view::npos;
}

std::optional<std::string> first_json_value(std::string_view text) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '[' && text[i] != '{') continue;
    const std::size_t end = match_brackets(text, i);
    if (end == std::string_view::npos) continue;
    const std::string_view candidate = text.substr(i, end - i);
    if (json::accept(candidate)) return std::string(candidate);
  }
  return std::nullopt;
}

}  // namespace

std::string extract_json_payload(std::string_view raw) {
  if (const auto fence = raw.find("```"); fence != std::string_view::npos) {
    const auto nl = raw.find('\n', fence);
    if (nl != std::string_view::npos) {
      const auto close = raw.find("```", nl + 1);
      if (close != std::string_view::npos) {
        if (auto v = first_json_value(raw.substr(nl + 1, close - nl - 1))) return *v;
      }
    }
  }
  if (auto v = first_json_value(raw)) return *v;
  throw Error(ErrorKind::NoJsonFound, std::string(raw.substr(0, 120)));
}

}  // namespace cogdist
