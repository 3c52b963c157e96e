// Copyright 2026 The fbmine Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FBMINE_GATEWAY_HPP_
#define FBMINE_GATEWAY_HPP_

// Clients for external model services.
//
// Generator (chat completions), POST <base_url>/chat/completions:
//   request  {"model": str, "messages": [{"role", "content"}], "temperature": real, "max_tokens": int}
//   response {"choices": [{"message": {"role": "assistant", "content": str}}], ...}
// Reward model, POST <base_url>/score:
//   request  {"model": str, "messages": [{"role", "content"}]}
//   response {"score": real}
// Scalar text scorer (e.g. toxicity), POST <base_url>/score:
//   request  {"model": str, "text": str}
//   response {"score": real in [0, 1]}
//
// Authorization: "Bearer $FF_API_KEY" when a key is configured.
//
// base_url values with the mock:// scheme are served in-process by
// MockTransport and never touch the network:
//   mock://echo     generator returns the last user message
//   mock://revise   generator returns the last assistant message + " (revised)"
//   mock://fixed?content=<url-encoded text>   generator returns the given text
//   mock://length   reward/scorer returns the code-point length of the candidate
//
// Responses are cached under <cache_dir>/<sha256(url "\n" body)>.json, so a
// cache hit happens exactly when the serialized request is byte-identical.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <openssl/evp.h>

#include "fbmine/core.hpp"
#include "fbmine/jsonl.hpp"

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include "httplib.h"

namespace fbmine {

enum class ChatRole : std::uint8_t { kSystem, kUser, kAssistant };

inline std::string_view to_string(ChatRole role) {
  switch (role) {
    case ChatRole::kSystem: return "system";
    case ChatRole::kUser: return "user";
    case ChatRole::kAssistant: return "assistant";
  }
  return "user";
}

struct ChatMessage {
  ChatRole role;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

inline ChatMessage user_message(std::string content) { return {ChatRole::kUser, std::move(content)}; }
inline ChatMessage assistant_message(std::string content) {
  return {ChatRole::kAssistant, std::move(content)};
}
inline ChatMessage system_message(std::string content) {
  return {ChatRole::kSystem, std::move(content)};
}

inline ojson to_json(const std::vector<ChatMessage>& messages) {
  ojson arr = ojson::array();
  for (const auto& m : messages) {
    arr.push_back(ojson{{"role", std::string(to_string(m.role))}, {"content", m.content}});
  }
  return arr;
}

struct GeneratorEndpoint {
  std::string base_url = "mock://echo";
  std::string model_id = "mock";
  double temperature = 0.0;
  int max_output_tokens = 1024;
  std::chrono::milliseconds timeout{60000};
  int max_retries = 3;

  void validate() const {
    if (base_url.empty()) fail(ErrorCode::kConfigError, "generator base_url is empty");
    if (!(temperature >= 0.0)) fail(ErrorCode::kConfigError, "temperature must be >= 0");
    if (max_retries < 0) fail(ErrorCode::kConfigError, "max_retries must be >= 0");
    if (max_output_tokens <= 0) fail(ErrorCode::kConfigError, "max_output_tokens must be > 0");
  }
};

struct RewardEndpoint {
  std::string base_url = "mock://length";
  std::string model_id = "mock";
  std::chrono::milliseconds timeout{60000};
  int max_retries = 3;

  void validate() const {
    if (base_url.empty()) fail(ErrorCode::kConfigError, "reward base_url is empty");
    if (max_retries < 0) fail(ErrorCode::kConfigError, "max_retries must be >= 0");
  }
};

inline bool is_mock_url(std::string_view url) { return url.starts_with("mock://"); }

// ---------------------------------------------------------------------------
// Transport

struct HttpResponse {
  int status = 0;  // 0: no response (connection failure or timeout)
  std::string body;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const std::string& url, const std::string& body,
                            const std::map<std::string, std::string>& headers,
                            std::chrono::milliseconds timeout) = 0;
};

class HttpTransport final : public Transport {
 public:
  HttpResponse post(const std::string& url, const std::string& body,
                    const std::map<std::string, std::string>& headers,
                    std::chrono::milliseconds timeout) override {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
      fail(ErrorCode::kConfigError, "url without scheme: " + url);
    }
    const auto path_start = url.find('/', scheme_end + 3);
    const std::string origin = url.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

    httplib::Client client(origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto result = client.Post(path, h, body, "application/json");
    if (!result) return {0, httplib::to_string(result.error())};
    return {result->status, result->body};
  }
};

inline std::size_t codepoint_length(std::string_view text) {
  return static_cast<std::size_t>(std::count_if(
      text.begin(), text.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

// In-process model services for offline runs and tests.
class MockTransport final : public Transport {
 public:
  HttpResponse post(const std::string& url, const std::string& body,
                    const std::map<std::string, std::string>&,
                    std::chrono::milliseconds) override {
    json request;
    try {
      request = json::parse(body);
    } catch (const json::parse_error&) {
      return {400, R"({"error":"bad json"})"};
    }
    const std::string rest = url.substr(std::string_view("mock://").size());
    const std::string kind = rest.substr(0, rest.find_first_of("/?"));

    if (kind == "length") {
      std::string text;
      if (request.contains("text")) {
        text = request["text"].get<std::string>();
      } else if (request.contains("messages") && !request["messages"].empty()) {
        text = request["messages"].back().value("content", "");
      }
      return {200, json{{"score", static_cast<double>(codepoint_length(text))}}.dump()};
    }

    const auto last_with_role = [&](std::string_view role) -> std::optional<std::string> {
      const auto& msgs = request.at("messages");
      for (auto it = msgs.rbegin(); it != msgs.rend(); ++it) {
        if ((*it).value("role", "") == role) return (*it).value("content", "");
      }
      return std::nullopt;
    };

    std::string content;
    if (kind == "echo") {
      content = last_with_role("user").value_or("");
    } else if (kind == "revise") {
      auto prior = last_with_role("assistant");
      content = (prior ? *prior : last_with_role("user").value_or("")) + " (revised)";
    } else if (kind == "fixed") {
      const auto q = rest.find("content=");
      content = q == std::string::npos ? "" : httplib::detail::decode_url(rest.substr(q + 8), true);
    } else {
      return {404, R"({"error":"unknown mock service"})"};
    }
    json response = {{"choices", json::array({json{{"index", 0},
                                                     {"message", {{"role", "assistant"},
                                                                  {"content", content}}}}})}};
    return {200, response.dump()};
  }
};

// Sends mock:// URLs to MockTransport and everything else to the network.
class RoutingTransport final : public Transport {
 public:
  explicit RoutingTransport(std::shared_ptr<Transport> network = std::make_shared<HttpTransport>())
      : network_(std::move(network)) {}

  HttpResponse post(const std::string& url, const std::string& body,
                    const std::map<std::string, std::string>& headers,
                    std::chrono::milliseconds timeout) override {
    if (is_mock_url(url)) return mock_.post(url, body, headers, timeout);
    return network_->post(url, body, headers, timeout);
  }

 private:
  MockTransport mock_;
  std::shared_ptr<Transport> network_;
};

// ---------------------------------------------------------------------------
// Cache and concurrency bound

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    fail(ErrorCode::kInvalidArgument, "sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

// Memory cache with an optional content-addressed directory behind it.
// Entries store the full request so a hash collision can never return a
// response for a different request.
class ResponseCache {
 public:
  ResponseCache() = default;
  explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(*dir_, ec);
    if (ec) fail(ErrorCode::kIoError, "cannot create cache dir " + dir_->string());
  }

  static std::string key_for(std::string_view request) { return sha256_hex(request); }

  std::optional<std::string> get(const std::string& request) {
    const std::string key = key_for(request);
    {
      std::lock_guard lock(mu_);
      if (auto it = memory_.find(key); it != memory_.end()) {
        if (it->second.first == request) return it->second.second;
        return std::nullopt;
      }
    }
    if (!dir_) return std::nullopt;
    const auto path = *dir_ / (key + ".json");
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) return std::nullopt;
    try {
      const json entry = json::parse(read_file(path));
      if (entry.at("request").get<std::string>() != request) return std::nullopt;
      std::string response = entry.at("response").get<std::string>();
      std::lock_guard lock(mu_);
      memory_[key] = {request, response};
      return response;
    } catch (const std::exception&) {
      return std::nullopt;  // unreadable entries are treated as misses
    }
  }

  void put(const std::string& request, const std::string& response) {
    const std::string key = key_for(request);
    {
      std::lock_guard lock(mu_);
      memory_[key] = {request, response};
    }
    if (!dir_) return;
    ojson entry;
    entry["request"] = request;
    entry["response"] = response;
    // Write-then-rename keeps concurrent readers from seeing partial files.
    const auto final_path = *dir_ / (key + ".json");
    const auto tmp = *dir_ / (key + ".json.tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())));
    write_file(tmp, entry.dump());
    std::error_code ec;
    std::filesystem::rename(tmp, final_path, ec);
    if (ec) std::filesystem::remove(tmp, ec);
  }

  std::size_t memory_size() const {
    std::lock_guard lock(mu_);
    return memory_.size();
  }

 private:
  std::optional<std::filesystem::path> dir_;
  mutable std::mutex mu_;
  std::map<std::string, std::pair<std::string, std::string>> memory_;
};

// Caps the number of outstanding requests. peak() exposes the high-water
// mark for instrumentation.
class InflightLimiter {
 public:
  explicit InflightLimiter(std::size_t limit) : limit_(std::max<std::size_t>(1, limit)) {}

  class Permit {
   public:
    explicit Permit(InflightLimiter& owner) : owner_(&owner) { owner_->acquire(); }
    Permit(const Permit&) = delete;
    Permit& operator=(const Permit&) = delete;
    ~Permit() { owner_->release(); }

   private:
    InflightLimiter* owner_;
  };

  std::size_t limit() const noexcept { return limit_; }
  std::size_t peak() const {
    std::lock_guard lock(mu_);
    return peak_;
  }

 private:
  void acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return current_ < limit_; });
    ++current_;
    peak_ = std::max(peak_, current_);
  }
  void release() {
    {
      std::lock_guard lock(mu_);
      --current_;
    }
    cv_.notify_one();
  }

  std::size_t limit_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::size_t current_ = 0;
  std::size_t peak_ = 0;
};

struct RetryPolicy {
  std::chrono::milliseconds base_delay{500};
  std::chrono::milliseconds max_delay{16000};
  std::function<void(std::chrono::milliseconds)> sleep = [](std::chrono::milliseconds d) {
    std::this_thread::sleep_for(d);
  };

  std::chrono::milliseconds delay_for(int attempt) const {
    const double scaled = static_cast<double>(base_delay.count()) * std::pow(2.0, attempt);
    return std::chrono::milliseconds(
        static_cast<long long>(std::min<double>(scaled, static_cast<double>(max_delay.count()))));
  }
};

// Shared plumbing for every client: transport, cache, in-flight bound, retry.
// Safe to share across threads.
class Gateway {
 public:
  struct Options {
    std::shared_ptr<Transport> transport = std::make_shared<RoutingTransport>();
    std::shared_ptr<ResponseCache> cache = std::make_shared<ResponseCache>();
    std::size_t max_in_flight = 4;
    std::optional<std::string> api_key;
    RetryPolicy retry;
  };

  Gateway() : Gateway(Options{}) {}
  explicit Gateway(Options options)
      : transport_(std::move(options.transport)),
        cache_(std::move(options.cache)),
        limiter_(options.max_in_flight),
        api_key_(std::move(options.api_key)),
        retry_(std::move(options.retry)) {}

  // Reads FF_API_KEY from the environment.
  static std::optional<std::string> api_key_from_env() {
    const char* key = std::getenv("FF_API_KEY");
    if (key == nullptr || *key == '\0') return std::nullopt;
    return std::string(key);
  }

  // POSTs body to url and returns the 200 response body. Cached responses
  // are returned without a network call.
  std::string post_cached(const std::string& url, const std::string& body,
                          std::chrono::milliseconds timeout, int max_retries) {
    const std::string request = url + "\n" + body;
    if (cache_) {
      if (auto hit = cache_->get(request)) {
        ++cache_hits_;
        return *hit;
      }
    }
    std::map<std::string, std::string> headers;
    if (api_key_ && !is_mock_url(url)) headers["Authorization"] = "Bearer " + *api_key_;

    ErrorCode last = ErrorCode::kTimeout;
    std::string last_detail;
    for (int attempt = 0; attempt <= max_retries; ++attempt) {
      if (attempt > 0) retry_.sleep(retry_.delay_for(attempt - 1));
      HttpResponse response;
      {
        InflightLimiter::Permit permit(limiter_);
        ++network_calls_;
        response = transport_->post(url, body, headers, timeout);
      }
      if (response.status >= 200 && response.status < 300) {
        if (cache_) cache_->put(request, response.body);
        return response.body;
      }
      if (response.status == 429 || response.status == 503) {
        last = ErrorCode::kRateLimited;
      } else if (response.status == 0 || response.status >= 500 || response.status == 408) {
        last = ErrorCode::kTimeout;
      } else {
        throw ProtocolError("HTTP " + std::to_string(response.status) + " from " + url,
                            response.body);
      }
      last_detail = "HTTP " + std::to_string(response.status) + " " + response.body.substr(0, 200);
    }
    fail(last, url + " failed after " + std::to_string(max_retries + 1) + " attempts (" +
                   last_detail + ")");
  }

  std::size_t network_calls() const noexcept { return network_calls_.load(); }
  std::size_t cache_hits() const noexcept { return cache_hits_.load(); }
  const InflightLimiter& limiter() const noexcept { return limiter_; }
  std::size_t max_in_flight() const noexcept { return limiter_.limit(); }

 private:
  std::shared_ptr<Transport> transport_;
  std::shared_ptr<ResponseCache> cache_;
  InflightLimiter limiter_;
  std::optional<std::string> api_key_;
  RetryPolicy retry_;
  std::atomic<std::size_t> network_calls_{0};
  std::atomic<std::size_t> cache_hits_{0};
};

// ---------------------------------------------------------------------------
// Model interfaces

class ChatModel {
 public:
  virtual ~ChatModel() = default;
  virtual std::string complete(const std::vector<ChatMessage>& messages) = 0;
  // Stable identity used for provenance records.
  virtual std::string id() const = 0;
};

class RewardModel {
 public:
  virtual ~RewardModel() = default;
  virtual double score(const std::vector<ChatMessage>& messages) = 0;
};

class ScalarScorer {
 public:
  virtual ~ScalarScorer() = default;
  virtual double score(std::string_view text) = 0;
};

inline void check_messages(const std::vector<ChatMessage>& messages) {
  if (messages.empty()) fail(ErrorCode::kInvalidArgument, "no messages");
  for (const auto& m : messages) {
    if (m.content.empty()) fail(ErrorCode::kInvalidArgument, "empty message content");
  }
}

inline std::string join_url(const std::string& base, std::string_view path) {
  if (is_mock_url(base)) return base;
  std::string out = base;
  while (!out.empty() && out.back() == '/') out.pop_back();
  out += path;
  return out;
}

inline std::string generator_request_body(const GeneratorEndpoint& endpoint,
                                          const std::vector<ChatMessage>& messages) {
  ojson body;
  body["model"] = endpoint.model_id;
  body["messages"] = to_json(messages);
  body["temperature"] = endpoint.temperature;
  body["max_tokens"] = endpoint.max_output_tokens;
  return body.dump();
}

class GeneratorClient final : public ChatModel {
 public:
  GeneratorClient(GeneratorEndpoint endpoint, std::shared_ptr<Gateway> gateway)
      : endpoint_(std::move(endpoint)), gateway_(std::move(gateway)) {
    endpoint_.validate();
  }

  std::string complete(const std::vector<ChatMessage>& messages) override {
    check_messages(messages);
    const std::string body = generator_request_body(endpoint_, messages);
    const std::string raw = gateway_->post_cached(join_url(endpoint_.base_url, "/chat/completions"),
                                                  body, endpoint_.timeout, endpoint_.max_retries);
    try {
      const json parsed = json::parse(raw);
      const auto& content = parsed.at("choices").at(0).at("message").at("content");
      if (!content.is_string()) throw ProtocolError("content is not a string", raw);
      return content.get<std::string>();
    } catch (const ProtocolError&) {
      throw;
    } catch (const std::exception& e) {
      throw ProtocolError(std::string("non-conforming completion payload: ") + e.what(), raw);
    }
  }

  std::string id() const override { return endpoint_.base_url + "|" + endpoint_.model_id; }
  const GeneratorEndpoint& endpoint() const noexcept { return endpoint_; }

 private:
  GeneratorEndpoint endpoint_;
  std::shared_ptr<Gateway> gateway_;
};

inline double parse_score_payload(const std::string& raw) {
  try {
    const json parsed = json::parse(raw);
    const double score = parsed.at("score").get<double>();
    if (!std::isfinite(score)) throw ProtocolError("score is not finite", raw);
    return score;
  } catch (const ProtocolError&) {
    throw;
  } catch (const std::exception& e) {
    throw ProtocolError(std::string("non-conforming score payload: ") + e.what(), raw);
  }
}

class RewardClient final : public RewardModel {
 public:
  RewardClient(RewardEndpoint endpoint, std::shared_ptr<Gateway> gateway)
      : endpoint_(std::move(endpoint)), gateway_(std::move(gateway)) {
    endpoint_.validate();
  }

  // The last message is the candidate answer being scored.
  double score(const std::vector<ChatMessage>& messages) override {
    if (messages.empty() || messages.back().role != ChatRole::kAssistant ||
        is_blank(messages.back().content)) {
      fail(ErrorCode::kInvalidArgument, "reward scoring needs a non-empty final assistant message");
    }
    check_messages(messages);
    ojson body;
    body["model"] = endpoint_.model_id;
    body["messages"] = to_json(messages);
    return parse_score_payload(gateway_->post_cached(join_url(endpoint_.base_url, "/score"),
                                                     body.dump(), endpoint_.timeout,
                                                     endpoint_.max_retries));
  }

 private:
  RewardEndpoint endpoint_;
  std::shared_ptr<Gateway> gateway_;
};

class HttpScalarScorer final : public ScalarScorer {
 public:
  HttpScalarScorer(RewardEndpoint endpoint, std::shared_ptr<Gateway> gateway)
      : endpoint_(std::move(endpoint)), gateway_(std::move(gateway)) {}

  double score(std::string_view text) override {
    ojson body;
    body["model"] = endpoint_.model_id;
    body["text"] = std::string(text);
    return parse_score_payload(gateway_->post_cached(join_url(endpoint_.base_url, "/score"),
                                                     body.dump(), endpoint_.timeout,
                                                     endpoint_.max_retries));
  }

 private:
  RewardEndpoint endpoint_;
  std::shared_ptr<Gateway> gateway_;
};

class ConstantScorer final : public ScalarScorer {
 public:
  explicit ConstantScorer(double value) : value_(value) {}
  double score(std::string_view) override { return value_; }

 private:
  double value_;
};

// min(1, length / scale), length in code points.
class NormalizedLengthScorer final : public ScalarScorer {
 public:
  explicit NormalizedLengthScorer(double scale = 200.0) : scale_(scale) {}
  double score(std::string_view text) override {
    return std::min(1.0, static_cast<double>(codepoint_length(text)) / scale_);
  }

 private:
  double scale_;
};

}  // namespace fbmine

#endif  // FBMINE_GATEWAY_HPP_
