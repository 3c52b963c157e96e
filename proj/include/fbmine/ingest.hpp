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

#ifndef FBMINE_INGEST_HPP_
#define FBMINE_INGEST_HPP_

// Reading conversation logs into canonical Conversations.
//
// Three input shapes are accepted, all newline-delimited JSON:
//
//   canonical     {"conversation_id", "source", "model", "language"?, "turns": [{"role", "content"}]}
//   lmsys_raw     {"conversation_id", "model", "language"?, "conversation": [{"role", "content"}]}
//                 source is set to "lmsys".
//   wildchat_raw  {"conversation_hash", "model", "language"?, "conversation": [{"role", "content", ...}]}
//                 conversation_id := conversation_hash, source is set to "wildchat".
//
// Normalization is identical for all three: system turns and blank turns are
// dropped, leading assistant turns are dropped, and consecutive turns with the
// same role are merged with a "\n" separator.

#include <concepts>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fbmine/core.hpp"
#include "fbmine/jsonl.hpp"

namespace fbmine {

enum class CorpusFormat : std::uint8_t { kCanonical, kLmsysRaw, kWildchatRaw };

inline std::optional<CorpusFormat> parse_corpus_format(std::string_view text) {
  if (text == "canonical") return CorpusFormat::kCanonical;
  if (text == "lmsys_raw" || text == "lmsys-raw") return CorpusFormat::kLmsysRaw;
  if (text == "wildchat_raw" || text == "wildchat-raw") return CorpusFormat::kWildchatRaw;
  return std::nullopt;
}

struct ParsedRecord {
  Conversation conversation;
  std::size_t dropped_system_turns = 0;
};

namespace detail {

inline std::string string_field(const json& obj, const char* key, bool required) {
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) {
    if (required) fail(ErrorCode::kMalformedJson, std::string("missing field '") + key + "'");
    return {};
  }
  if (!it->is_string()) fail(ErrorCode::kMalformedJson, std::string("field '") + key + "' is not a string");
  return it->get<std::string>();
}

}  // namespace detail

inline ParsedRecord parse_record_detailed(std::string_view line, CorpusFormat format) {
  json record;
  try {
    record = json::parse(line);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kMalformedJson, e.what());
  }
  if (!record.is_object()) fail(ErrorCode::kMalformedJson, "record is not a JSON object");

  std::string id;
  Source source = Source::kOther;
  const char* turns_key = "conversation";
  switch (format) {
    case CorpusFormat::kCanonical: {
      id = detail::string_field(record, "conversation_id", true);
      const auto parsed = parse_source(detail::string_field(record, "source", true));
      if (!parsed) fail(ErrorCode::kMalformedJson, "unknown source");
      source = *parsed;
      turns_key = "turns";
      break;
    }
    case CorpusFormat::kLmsysRaw:
      id = detail::string_field(record, "conversation_id", true);
      source = Source::kLmsys;
      break;
    case CorpusFormat::kWildchatRaw:
      id = detail::string_field(record, "conversation_hash", true);
      source = Source::kWildchat;
      break;
  }
  const std::string model = detail::string_field(record, "model", false);
  std::optional<std::string> language;
  if (auto lang = detail::string_field(record, "language", false); !lang.empty()) {
    language = std::move(lang);
  }

  const auto turns_it = record.find(turns_key);
  if (turns_it == record.end() || !turns_it->is_array()) {
    fail(ErrorCode::kMalformedJson, std::string("missing array '") + turns_key + "'");
  }

  std::vector<Turn> turns;
  std::size_t dropped_system = 0;
  for (const auto& raw : *turns_it) {
    if (!raw.is_object()) fail(ErrorCode::kMalformedJson, "turn is not an object");
    const std::string role_name = detail::string_field(raw, "role", true);
    const std::string content = detail::string_field(raw, "content", false);
    Role role;
    if (role_name == "user") {
      role = Role::kUser;
    } else if (role_name == "assistant") {
      role = Role::kAssistant;
    } else if (role_name == "system") {
      ++dropped_system;
      continue;
    } else {
      fail(ErrorCode::kUnknownRole, "unknown role '" + role_name + "'");
    }
    if (is_blank(content)) continue;
    if (turns.empty() && role == Role::kAssistant) continue;
    if (!turns.empty() && turns.back().role == role) {
      turns.back().content += "\n";
      turns.back().content += content;
    } else {
      turns.push_back(Turn{role, content});
    }
  }
  if (turns.empty()) fail(ErrorCode::kEmptyConversation, "no user turn in '" + id + "'");
  return {Conversation(std::move(id), source, model, std::move(turns), std::move(language)),
          dropped_system};
}

inline Conversation parse_record(std::string_view line, CorpusFormat format) {
  return parse_record_detailed(line, format).conversation;
}

inline ojson to_json(const Conversation& conv) {
  ojson out;
  out["conversation_id"] = conv.id();
  out["source"] = std::string(to_string(conv.source()));
  out["model"] = conv.model_name();
  if (conv.language()) out["language"] = *conv.language();
  ojson turns = ojson::array();
  for (const Turn& t : conv.turns()) {
    turns.push_back(ojson{{"role", std::string(to_string(t.role))}, {"content", t.content}});
  }
  out["turns"] = std::move(turns);
  return out;
}

inline std::string to_canonical_line(const Conversation& conv) { return dump_line(to_json(conv)); }

// Re-reads a canonical object already held as JSON.
inline Conversation conversation_from_json(const json& obj) {
  return parse_record(obj.dump(), CorpusFormat::kCanonical);
}

struct IngestStats {
  std::size_t read = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::map<std::string, std::size_t> rejection_reasons;
  // Turn-level drops inside accepted or rejected records.
  std::map<std::string, std::size_t> dropped_turns;

  void reject(std::string_view reason) {
    ++rejected;
    ++rejection_reasons[std::string(reason)];
  }
};

inline ojson to_json(const IngestStats& stats) {
  ojson out;
  out["read"] = stats.read;
  out["accepted"] = stats.accepted;
  out["rejected"] = stats.rejected;
  ojson reasons = ojson::object();
  for (const auto& [k, v] : stats.rejection_reasons) reasons[k] = v;
  out["rejection_reasons"] = reasons;
  ojson dropped = ojson::object();
  for (const auto& [k, v] : stats.dropped_turns) dropped[k] = v;
  out["dropped_turns"] = dropped;
  return out;
}

struct StreamFilters {
  std::size_t min_user_turns = 1;
  std::optional<std::string> language;
  std::optional<std::size_t> max_records;  // cap on yielded conversations
};

// Single-pass reader holding one record in memory at a time. Bad records are
// counted in stats() and skipped.
class CorpusReader {
 public:
  CorpusReader(const std::filesystem::path& path, CorpusFormat format, StreamFilters filters = {})
      : in_(open_for_read(path)), format_(format), filters_(std::move(filters)) {}

  std::optional<Conversation> next() {
    std::string line;
    while (true) {
      if (filters_.max_records && stats_.accepted >= *filters_.max_records) return std::nullopt;
      if (!std::getline(in_, line)) {
        if (in_.bad()) fail(ErrorCode::kIoError, "read failure");
        return std::nullopt;
      }
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      ++stats_.read;
      try {
        auto parsed = parse_record_detailed(line, format_);
        if (parsed.dropped_system_turns > 0) {
          stats_.dropped_turns["system_turn_dropped"] += parsed.dropped_system_turns;
        }
        Conversation& conv = parsed.conversation;
        if (conv.user_turn_count() < filters_.min_user_turns) {
          stats_.reject("below_min_user_turns");
          continue;
        }
        if (filters_.language && conv.language() != filters_.language) {
          stats_.reject("language_filtered");
          continue;
        }
        ++stats_.accepted;
        return std::move(conv);
      } catch (const Error& e) {
        stats_.reject(to_string(e.code()));
      }
    }
  }

  const IngestStats& stats() const noexcept { return stats_; }

 private:
  std::ifstream in_;
  CorpusFormat format_;
  StreamFilters filters_;
  IngestStats stats_;
};

inline std::vector<Conversation> read_corpus(const std::filesystem::path& path,
                                             CorpusFormat format = CorpusFormat::kCanonical,
                                             StreamFilters filters = {},
                                             IngestStats* stats = nullptr) {
  CorpusReader reader(path, format, std::move(filters));
  std::vector<Conversation> out;
  while (auto conv = reader.next()) out.push_back(std::move(*conv));
  if (stats) *stats = reader.stats();
  return out;
}

// mt19937_64 with a portable bounded draw, so seeded results agree across
// standard library implementations.
class DeterministicRng {
 public:
  explicit DeterministicRng(std::uint64_t seed) : engine_(seed) {}

  // Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) fail(ErrorCode::kInvalidArgument, "empty range");
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t draw;
    do {
      draw = engine_();
    } while (draw >= limit);
    return draw % bound;
  }

 private:
  std::mt19937_64 engine_;
};

// Algorithm R reservoir sampler. next() returns std::optional<T>.
template <typename T>
class Reservoir {
 public:
  Reservoir(std::size_t k, std::uint64_t seed) : k_(k), rng_(seed) { items_.reserve(k); }

  void offer(T item) {
    if (k_ == 0) {
      ++seen_;
      return;
    }
    if (items_.size() < k_) {
      items_.push_back(std::move(item));
    } else {
      const std::uint64_t j = rng_.below(seen_ + 1);
      if (j < k_) items_[j] = std::move(item);
    }
    ++seen_;
  }

  std::size_t seen() const noexcept { return seen_; }
  std::vector<T> take() && { return std::move(items_); }
  const std::vector<T>& items() const noexcept { return items_; }

 private:
  std::size_t k_;
  DeterministicRng rng_;
  std::vector<T> items_;
  std::size_t seen_ = 0;
};

template <typename Next>
  requires std::invocable<Next&>
auto sample_random(Next&& next, std::size_t k, std::uint64_t seed) {
  using Item = typename std::decay_t<decltype(next())>::value_type;
  Reservoir<Item> reservoir(k, seed);
  while (auto item = next()) reservoir.offer(std::move(*item));
  return std::move(reservoir).take();
}

inline std::vector<Conversation> sample_random(CorpusReader& reader, std::size_t k,
                                               std::uint64_t seed) {
  return sample_random([&] { return reader.next(); }, k, seed);
}

template <typename T>
std::vector<T> sample_random(const std::vector<T>& items, std::size_t k, std::uint64_t seed) {
  std::size_t pos = 0;
  return sample_random(
      [&]() -> std::optional<T> {
        if (pos >= items.size()) return std::nullopt;
        return items[pos++];
      },
      k, seed);
}

}  // namespace fbmine

#endif  // FBMINE_INGEST_HPP_
