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

#ifndef FBMINE_BUILD_HPP_
#define FBMINE_BUILD_HPP_

// Sub-conversation splits, answer regeneration, and training-data export.
//
// SFT line:  {"id", "messages": [{"role": "user", "content": u_i}, {"role": "assistant", "content": regen}],
//             "method": "scratch"|"semantic", "split": "neg"|"pos"|"rand"}
// KTO line:  {"id", "prompt": u_i, "completion": m_i, "label": true|false}
// Skip line: {"conversation_id", "stage", "error"}

#include <concepts>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fbmine/core.hpp"
#include "fbmine/gateway.hpp"
#include "fbmine/ingest.hpp"
#include "fbmine/jsonl.hpp"
#include "fbmine/parallel.hpp"

namespace fbmine {

struct SkipEntry {
  std::string conversation_id;
  std::string stage;
  std::string error;
};

inline std::string to_line(const SkipEntry& s) {
  ojson out;
  out["conversation_id"] = s.conversation_id;
  out["stage"] = s.stage;
  out["error"] = s.error;
  return dump_line(out);
}

inline std::string skip_ledger_jsonl(const std::vector<SkipEntry>& entries) {
  std::string out;
  for (const auto& e : entries) out += to_line(e);
  return out;
}

struct FeedbackSplits {
  std::vector<SubConversation> neg;
  std::vector<SubConversation> pos;
  std::vector<SubConversation> rand;
  std::uint64_t seed = 0;
  std::string source_corpus_id;
};

// Labels for a conversation, either looked up or computed on the fly.
using LabelSource = std::function<LabelVector(const Conversation&)>;

inline LabelSource labels_from(const std::map<std::string, LabelVector>& table) {
  return [&table](const Conversation& conv) -> LabelVector {
    const auto it = table.find(conv.id());
    if (it == table.end()) fail(ErrorCode::kIdMismatch, "no labels for '" + conv.id() + "'");
    return it->second;
  };
}

// Streams conversations once. Per conversation: the earliest sub-conversation
// whose trigger is NEG or POS goes to that split (so a conversation lands in
// at most one of neg/pos), and one uniformly chosen valid sub-conversation is
// offered to rand. Each split is reservoir-capped at k.
template <typename Next>
  requires std::invocable<Next&>
FeedbackSplits build_feedback_splits(Next&& next_conversation, const LabelSource& labels, std::size_t k,
                                     std::uint64_t seed, std::vector<SkipEntry>* skips = nullptr,
                                     std::string source_corpus_id = {}) {
  Reservoir<SubConversation> neg(k, seed), pos(k, seed ^ 0x9E3779B97F4A7C15ULL),
      rnd(k, seed ^ 0xC2B2AE3D27D4EB4FULL);
  DeterministicRng pick(seed ^ 0xD6E8FEB86659FD93ULL);
  while (std::optional<Conversation> conv = next_conversation()) {
    if (conv->user_turn_count() < 2) continue;
    std::vector<SubConversation> subs;
    try {
      subs = extract_subconversations(*conv, labels(*conv), AnyLabel{});
    } catch (const Error& e) {
      if (skips) skips->push_back({conv->id(), "labels", e.what()});
      continue;
    }
    if (subs.empty()) continue;
    for (const auto& s : subs) {
      const ThreeWayLabel t = to_three_way(s.trigger_label);
      if (t == ThreeWayLabel::kNeg) {
        neg.offer(s);
        break;
      }
      if (t == ThreeWayLabel::kPos) {
        pos.offer(s);
        break;
      }
    }
    rnd.offer(subs[pick.below(subs.size())]);
  }
  FeedbackSplits out;
  out.neg = std::move(neg).take();
  out.pos = std::move(pos).take();
  out.rand = std::move(rnd).take();
  out.seed = seed;
  out.source_corpus_id = std::move(source_corpus_id);
  return out;
}

inline FeedbackSplits build_feedback_splits(const std::vector<Conversation>& corpus, const LabelSource& labels,
                                            std::size_t k, std::uint64_t seed,
                                            std::vector<SkipEntry>* skips = nullptr,
                                            std::string source_corpus_id = {}) {
  std::size_t pos = 0;
  return build_feedback_splits(
      [&]() -> std::optional<Conversation> {
        if (pos >= corpus.size()) return std::nullopt;
        return corpus[pos++];
      },
      labels, k, seed, skips, std::move(source_corpus_id));
}

inline ojson to_json(const SubConversation& s, std::string_view split) {
  ojson out;
  out["id"] = s.key();
  out["split"] = std::string(split);
  out["conversation_id"] = s.conversation_id;
  out["index"] = s.index;
  out["u_i"] = s.u_i;
  out["m_i"] = s.m_i;
  out["u_next"] = s.u_next;
  out["m_next"] = s.m_next;
  out["trigger_label"] = std::string(to_string(s.trigger_label));
  return out;
}

inline SubConversation subconversation_from_json(const json& obj) {
  try {
    const auto label = parse_fine_label(obj.at("trigger_label").get<std::string>());
    if (!label) fail(ErrorCode::kUnknownPattern, "unknown trigger label");
    SubConversation s{
        .conversation_id = obj.at("conversation_id").get<std::string>(),
        .index = obj.at("index").get<std::size_t>(),
        .u_i = obj.at("u_i").get<std::string>(),
        .m_i = obj.at("m_i").get<std::string>(),
        .u_next = obj.at("u_next").get<std::string>(),
        .m_next = obj.at("m_next").get<std::string>(),
        .trigger_label = *label,
    };
    if (s.index < 1) fail(ErrorCode::kMalformedJson, "sub-conversation index must be >= 1");
    return s;
  } catch (const json::exception& e) {
    fail(ErrorCode::kMalformedJson, std::string("bad sub-conversation record: ") + e.what());
  }
}

inline std::string splits_jsonl(const FeedbackSplits& splits) {
  std::string out;
  for (const auto& s : splits.neg) out += dump_line(to_json(s, "neg"));
  for (const auto& s : splits.pos) out += dump_line(to_json(s, "pos"));
  for (const auto& s : splits.rand) out += dump_line(to_json(s, "rand"));
  return out;
}

struct SplitRow {
  std::string split;
  SubConversation sub;
};

inline std::vector<SplitRow> read_splits(const std::filesystem::path& path) {
  std::vector<SplitRow> rows;
  for (const json& obj : read_jsonl(path)) {
    rows.push_back({obj.value("split", ""), subconversation_from_json(obj)});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Regeneration

inline constexpr std::string_view kSemanticInstruction =
    "The user replied to your previous answer with the message below. Treat it as feedback on "
    "that answer and write an improved answer to the user's original request that incorporates "
    "the feedback. Reply with the improved answer only.\n\nUser reply:\n";

inline constexpr std::string_view kRegenTemplateVersion = "regen-templates-v1";

inline std::string regen_prompt_hash() {
  return sha256_hex(std::string(kRegenTemplateVersion) + "\n" + std::string(kSemanticInstruction));
}

// m^scra: the request alone.
inline std::vector<ChatMessage> scratch_messages(const SubConversation& sub) {
  if (is_blank(sub.u_i)) fail(ErrorCode::kInvalidArgument, "empty u_i");
  return {user_message(sub.u_i)};
}

// m^sem: request, original answer, then the feedback wrapped in the
// revision instruction.
inline std::vector<ChatMessage> semantic_messages(const SubConversation& sub) {
  if (is_blank(sub.u_i) || is_blank(sub.m_i) || is_blank(sub.u_next)) {
    fail(ErrorCode::kInvalidArgument, "semantic regeneration needs u_i, m_i and u_next");
  }
  return {user_message(sub.u_i), assistant_message(sub.m_i),
          user_message(std::string(kSemanticInstruction) + sub.u_next)};
}

inline std::string regenerate_scratch(const SubConversation& sub, ChatModel& model) {
  return model.complete(scratch_messages(sub));
}

inline std::string regenerate_semantic(const SubConversation& sub, ChatModel& model) {
  return model.complete(semantic_messages(sub));
}

struct RegenRecord {
  SubConversation sub;
  std::string split;
  std::optional<std::string> m_scra;
  std::optional<std::string> m_sem;
  std::string generator_id;
  std::string prompt_hash;

  void validate() const {
    if (!m_scra && !m_sem) fail(ErrorCode::kMissingVariant, "record '" + sub.key() + "' has no regeneration");
    if (generator_id.empty() || prompt_hash.empty()) {
      fail(ErrorCode::kInvalidArgument, "record '" + sub.key() + "' lacks provenance");
    }
  }
};

enum class RegenVariant : std::uint8_t { kScratch, kSemantic };

inline std::string_view to_string(RegenVariant v) {
  return v == RegenVariant::kScratch ? "scratch" : "semantic";
}

inline std::optional<RegenVariant> parse_regen_variant(std::string_view text) {
  if (text == "scratch") return RegenVariant::kScratch;
  if (text == "semantic") return RegenVariant::kSemantic;
  return std::nullopt;
}

struct RegenOptions {
  bool scratch = true;
  bool semantic = true;
  std::size_t workers = 4;
};

// Regenerates answers for every row. Rows whose calls fail are reported in
// skips and left out.
inline std::vector<RegenRecord> regenerate_all(const std::vector<SplitRow>& rows, ChatModel& model,
                                               const RegenOptions& options, std::vector<SkipEntry>* skips) {
  if (!options.scratch && !options.semantic) fail(ErrorCode::kInvalidArgument, "no regeneration variant chosen");
  const std::string hash = regen_prompt_hash();
  auto outcomes = parallel_map(
      rows,
      [&](const SplitRow& row) {
        RegenRecord r{row.sub, row.split, std::nullopt, std::nullopt, model.id(), hash};
        if (options.scratch) r.m_scra = regenerate_scratch(row.sub, model);
        if (options.semantic) r.m_sem = regenerate_semantic(row.sub, model);
        return r;
      },
      options.workers);
  std::vector<RegenRecord> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (outcomes[i].ok()) {
      out.push_back(std::move(*outcomes[i].value));
    } else if (skips) {
      skips->push_back({rows[i].sub.conversation_id, "regen", outcomes[i].error});
    }
  }
  return out;
}

inline ojson to_json(const RegenRecord& r) {
  ojson out = to_json(r.sub, r.split);
  out["m_scra"] = r.m_scra ? ojson(*r.m_scra) : ojson(nullptr);
  out["m_sem"] = r.m_sem ? ojson(*r.m_sem) : ojson(nullptr);
  out["generator_id"] = r.generator_id;
  out["prompt_hash"] = r.prompt_hash;
  return out;
}

inline RegenRecord regen_record_from_json(const json& obj) {
  RegenRecord r;
  r.sub = subconversation_from_json(obj);
  r.split = obj.value("split", "");
  if (obj.contains("m_scra") && obj["m_scra"].is_string()) r.m_scra = obj["m_scra"].get<std::string>();
  if (obj.contains("m_sem") && obj["m_sem"].is_string()) r.m_sem = obj["m_sem"].get<std::string>();
  r.generator_id = obj.value("generator_id", "");
  r.prompt_hash = obj.value("prompt_hash", "");
  r.validate();
  return r;
}

inline std::vector<RegenRecord> read_regen_records(const std::filesystem::path& path) {
  std::vector<RegenRecord> out;
  for (const json& obj : read_jsonl(path)) out.push_back(regen_record_from_json(obj));
  return out;
}

inline std::string regen_records_jsonl(const std::vector<RegenRecord>& records) {
  std::string out;
  for (const auto& r : records) out += dump_line(to_json(r));
  return out;
}

// ---------------------------------------------------------------------------
// Export

// The training prompt is u_i alone; the feedback turn never appears.
inline std::string export_sft(const std::vector<RegenRecord>& records, RegenVariant variant) {
  std::string out;
  for (const auto& r : records) {
    const auto& answer = variant == RegenVariant::kScratch ? r.m_scra : r.m_sem;
    if (!answer) {
      fail(ErrorCode::kMissingVariant,
           "record '" + r.sub.key() + "' has no " + std::string(to_string(variant)) + " regeneration");
    }
    ojson line;
    line["id"] = r.sub.key();
    line["messages"] = to_json(std::vector<ChatMessage>{user_message(r.sub.u_i), assistant_message(*answer)});
    line["method"] = std::string(to_string(variant));
    line["split"] = r.split;
    out += dump_line(line);
  }
  return out;
}

// Reads one SFT line back through the canonical conversation reader.
inline Conversation conversation_from_sft_line(std::string_view line) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kMalformedJson, e.what());
  }
  if (!obj.is_object() || !obj.contains("id") || !obj.contains("messages")) {
    fail(ErrorCode::kMalformedJson, "SFT line needs id and messages");
  }
  ojson canonical;
  canonical["conversation_id"] = obj["id"];
  canonical["source"] = "other";
  canonical["model"] = obj.value("method", "");
  canonical["turns"] = obj["messages"];
  return parse_record(canonical.dump(), CorpusFormat::kCanonical);
}

struct KtoExport {
  std::string jsonl;
  std::vector<std::string> warnings;
};

// Unpaired preference rows: completion is always the original m_i.
inline KtoExport export_kto(const std::vector<SubConversation>& pos, const std::vector<SubConversation>& neg) {
  KtoExport out;
  if (pos.empty()) out.warnings.emplace_back("no positive sub-conversations; file has only false labels");
  if (neg.empty()) out.warnings.emplace_back("no negative sub-conversations; file has only true labels");
  const auto emit = [&](const SubConversation& s, bool label) {
    ojson line;
    line["id"] = s.key();
    line["prompt"] = s.u_i;
    line["completion"] = s.m_i;
    line["label"] = label;
    out.jsonl += dump_line(line);
  };
  for (const auto& s : pos) emit(s, true);
  for (const auto& s : neg) emit(s, false);
  return out;
}

}  // namespace fbmine

#endif  // FBMINE_BUILD_HPP_
