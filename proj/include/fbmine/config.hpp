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

#ifndef FBMINE_CONFIG_HPP_
#define FBMINE_CONFIG_HPP_

// Run configuration. The file format is one "key = value" per line, '#'
// starts a comment:
//
//   generator.base_url    generator.model    generator.temperature
//   generator.max_tokens  generator.timeout_ms  generator.max_retries
//   judge.*               (same keys as generator)
//   reward.base_url       reward.model       reward.timeout_ms   reward.max_retries
//   toxicity.*            (same keys as reward)
//   cache_dir             concurrency        seed
//
// Precedence, lowest first: built-in defaults, config file, command-line
// flags, environment (FF_API_KEY, FF_CACHE_DIR, FF_CONCURRENCY).

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>

#include "fbmine/gateway.hpp"
#include "fbmine/jsonl.hpp"

namespace fbmine {

inline constexpr std::uint64_t kDefaultSeed = 42;

// Endpoints start unconfigured; commands that need one fail with ConfigError
// until a base_url is set.
struct RunConfig {
  GeneratorEndpoint generator{.base_url = ""};
  GeneratorEndpoint judge{.base_url = ""};
  RewardEndpoint reward{.base_url = ""};
  RewardEndpoint toxicity{.base_url = ""};
  std::filesystem::path cache_dir = ".fbmine-cache";
  std::size_t concurrency = 4;
  std::uint64_t seed = kDefaultSeed;
  std::optional<std::string> api_key;

  // Everything except the API key, in a fixed order.
  ojson to_json() const {
    const auto gen = [](const GeneratorEndpoint& e) {
      return ojson{{"base_url", e.base_url},       {"model", e.model_id},
                   {"temperature", e.temperature}, {"max_tokens", e.max_output_tokens},
                   {"timeout_ms", e.timeout.count()}, {"max_retries", e.max_retries}};
    };
    const auto rew = [](const RewardEndpoint& e) {
      return ojson{{"base_url", e.base_url}, {"model", e.model_id}, {"timeout_ms", e.timeout.count()},
                   {"max_retries", e.max_retries}};
    };
    ojson out;
    out["generator"] = gen(generator);
    out["judge"] = gen(judge);
    out["reward"] = rew(reward);
    out["toxicity"] = rew(toxicity);
    out["cache_dir"] = cache_dir.string();
    out["concurrency"] = concurrency;
    out["seed"] = seed;
    return out;
  }

  std::string hash() const { return sha256_hex(to_json().dump()); }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  if constexpr (std::is_floating_point_v<T>) {
    char* end = nullptr;
    out = std::strtod(value.c_str(), &end);
    if (value.empty() || *end != '\0') fail(ErrorCode::kConfigError, "'" + key + "' is not a number: " + value);
  } else {
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
      fail(ErrorCode::kConfigError, "'" + key + "' is not an integer: " + value);
    }
  }
  return out;
}

inline bool set_generator_key(GeneratorEndpoint& e, const std::string& field, const std::string& key,
                              const std::string& value) {
  if (field == "base_url") e.base_url = value;
  else if (field == "model") e.model_id = value;
  else if (field == "temperature") e.temperature = parse_number<double>(key, value);
  else if (field == "max_tokens") e.max_output_tokens = parse_number<int>(key, value);
  else if (field == "timeout_ms") e.timeout = std::chrono::milliseconds(parse_number<long long>(key, value));
  else if (field == "max_retries") e.max_retries = parse_number<int>(key, value);
  else return false;
  return true;
}

inline bool set_reward_key(RewardEndpoint& e, const std::string& field, const std::string& key,
                           const std::string& value) {
  if (field == "base_url") e.base_url = value;
  else if (field == "model") e.model_id = value;
  else if (field == "timeout_ms") e.timeout = std::chrono::milliseconds(parse_number<long long>(key, value));
  else if (field == "max_retries") e.max_retries = parse_number<int>(key, value);
  else return false;
  return true;
}

}  // namespace detail

inline void apply_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  const auto dot = key.find('.');
  bool known = false;
  if (dot != std::string::npos) {
    const std::string section = key.substr(0, dot);
    const std::string field = key.substr(dot + 1);
    if (section == "generator") known = detail::set_generator_key(config.generator, field, key, value);
    else if (section == "judge") known = detail::set_generator_key(config.judge, field, key, value);
    else if (section == "reward") known = detail::set_reward_key(config.reward, field, key, value);
    else if (section == "toxicity") known = detail::set_reward_key(config.toxicity, field, key, value);
  } else if (key == "cache_dir") {
    config.cache_dir = value;
    known = true;
  } else if (key == "concurrency") {
    config.concurrency = detail::parse_number<std::size_t>(key, value);
    known = true;
  } else if (key == "seed") {
    config.seed = detail::parse_number<std::uint64_t>(key, value);
    known = true;
  }
  if (!known) fail(ErrorCode::kConfigError, "unknown config key '" + key + "'");
}

inline void apply_config_text(RunConfig& config, std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string trimmed = detail::trim(line);
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::kConfigError, "config line " + std::to_string(number) + " has no '='");
    }
    apply_config_value(config, detail::trim(trimmed.substr(0, eq)), detail::trim(trimmed.substr(eq + 1)));
  }
}

inline void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorCode::kConfigError, "config file not found: " + path.string());
  apply_config_text(config, read_file(path));
}

inline void apply_environment(RunConfig& config) {
  if (auto key = Gateway::api_key_from_env()) config.api_key = std::move(key);
  if (const char* dir = std::getenv("FF_CACHE_DIR"); dir && *dir) config.cache_dir = dir;
  if (const char* c = std::getenv("FF_CONCURRENCY"); c && *c) {
    config.concurrency = detail::parse_number<std::size_t>("FF_CONCURRENCY", c);
  }
}

}  // namespace fbmine

#endif  // FBMINE_CONFIG_HPP_
