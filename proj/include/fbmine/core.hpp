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

#ifndef FBMINE_CORE_HPP_
#define FBMINE_CORE_HPP_

// Canonical conversation model, the feedback label ontology and its
// projections, dual-label resolution, and sub-conversation extraction.

#include <algorithm>
#include <array>
#include <compare>
#include <initializer_list>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fbmine/error.hpp"

namespace fbmine {

enum class Role : std::uint8_t { kUser, kAssistant };

inline std::string_view to_string(Role role) {
  return role == Role::kUser ? "user" : "assistant";
}

inline bool is_blank(std::string_view text) {
  return std::all_of(text.begin(), text.end(), [](unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
  });
}

struct Turn {
  Role role;
  std::string content;

  friend bool operator==(const Turn&, const Turn&) = default;
};

enum class Source : std::uint8_t { kLmsys, kWildchat, kOther };

inline std::string_view to_string(Source source) {
  switch (source) {
    case Source::kLmsys: return "lmsys";
    case Source::kWildchat: return "wildchat";
    case Source::kOther: return "other";
  }
  return "other";
}

inline std::optional<Source> parse_source(std::string_view text) {
  if (text == "lmsys") return Source::kLmsys;
  if (text == "wildchat") return Source::kWildchat;
  if (text == "other") return Source::kOther;
  return std::nullopt;
}

// A strictly alternating user/assistant transcript that starts with a user
// turn. The transcript may end on a user turn (no final model response).
class Conversation {
 public:
  Conversation(std::string id, Source source, std::string model_name,
               std::vector<Turn> turns, std::optional<std::string> language = std::nullopt)
      : id_(std::move(id)),
        source_(source),
        model_name_(std::move(model_name)),
        turns_(std::move(turns)),
        language_(std::move(language)) {
    if (turns_.empty() || turns_.front().role != Role::kUser) {
      fail(ErrorCode::kEmptyConversation, "conversation '" + id_ + "' must start with a user turn");
    }
    for (std::size_t k = 0; k < turns_.size(); ++k) {
      const Role expected = (k % 2 == 0) ? Role::kUser : Role::kAssistant;
      if (turns_[k].role != expected) {
        fail(ErrorCode::kInvalidArgument,
             "conversation '" + id_ + "' does not alternate at turn " + std::to_string(k));
      }
      if (is_blank(turns_[k].content)) {
        fail(ErrorCode::kInvalidArgument,
             "conversation '" + id_ + "' has blank turn " + std::to_string(k));
      }
    }
  }

  const std::string& id() const noexcept { return id_; }
  Source source() const noexcept { return source_; }
  const std::string& model_name() const noexcept { return model_name_; }
  const std::vector<Turn>& turns() const noexcept { return turns_; }
  const std::optional<std::string>& language() const noexcept { return language_; }

  // n: number of user turns.
  std::size_t user_turn_count() const noexcept { return (turns_.size() + 1) / 2; }

  // 1-based, as in u_1 ... u_n.
  const std::string& user_turn(std::size_t i) const {
    if (i < 1 || i > user_turn_count()) {
      fail(ErrorCode::kWindowOutOfRange, "user turn " + std::to_string(i) + " out of range");
    }
    return turns_[2 * (i - 1)].content;
  }

  // m_i, absent when the transcript ends on u_i.
  std::optional<std::string_view> assistant_turn(std::size_t i) const {
    if (i < 1) return std::nullopt;
    const std::size_t k = 2 * (i - 1) + 1;
    if (k >= turns_.size()) return std::nullopt;
    return std::string_view(turns_[k].content);
  }

  friend bool operator==(const Conversation&, const Conversation&) = default;

 private:
  std::string id_;
  Source source_;
  std::string model_name_;
  std::vector<Turn> turns_;
  std::optional<std::string> language_;
};

// ---------------------------------------------------------------------------
// Labels

enum class FineLabel : std::uint8_t {
  kPos,
  kNegRephrase,
  kNegAwareNoCorrection,
  kNegAwareWithCorrection,
  kNegClarify,
  kNeu,
};

inline constexpr std::array<FineLabel, 6> kAllFineLabels = {
    FineLabel::kPos,          FineLabel::kNegRephrase,
    FineLabel::kNegAwareNoCorrection, FineLabel::kNegAwareWithCorrection,
    FineLabel::kNegClarify,   FineLabel::kNeu,
};

inline constexpr bool is_negative(FineLabel label) {
  return label == FineLabel::kNegRephrase || label == FineLabel::kNegAwareNoCorrection ||
         label == FineLabel::kNegAwareWithCorrection || label == FineLabel::kNegClarify;
}

inline std::string_view to_string(FineLabel label) {
  switch (label) {
    case FineLabel::kPos: return "POS";
    case FineLabel::kNegRephrase: return "NEG_REPHRASE";
    case FineLabel::kNegAwareNoCorrection: return "NEG_AWARE_NO_CORRECTION";
    case FineLabel::kNegAwareWithCorrection: return "NEG_AWARE_WITH_CORRECTION";
    case FineLabel::kNegClarify: return "NEG_CLARIFY";
    case FineLabel::kNeu: return "NEU";
  }
  return "NEU";
}

inline std::optional<FineLabel> parse_fine_label(std::string_view text) {
  for (FineLabel label : kAllFineLabels) {
    if (to_string(label) == text) return label;
  }
  return std::nullopt;
}

enum class LabelSet : std::uint8_t { kBinary, kThreeWay, kFine };

inline std::string_view to_string(LabelSet set) {
  switch (set) {
    case LabelSet::kBinary: return "binary";
    case LabelSet::kThreeWay: return "three";
    case LabelSet::kFine: return "fine";
  }
  return "fine";
}

inline std::optional<LabelSet> parse_label_set(std::string_view text) {
  if (text == "binary") return LabelSet::kBinary;
  if (text == "three" || text == "threeway" || text == "three-way") return LabelSet::kThreeWay;
  if (text == "fine") return LabelSet::kFine;
  return std::nullopt;
}

enum class BinaryLabel : std::uint8_t { kFeedback, kNoFeedback };
enum class ThreeWayLabel : std::uint8_t { kPos, kNeg, kNeu };

inline constexpr ThreeWayLabel to_three_way(FineLabel label) {
  if (label == FineLabel::kPos) return ThreeWayLabel::kPos;
  if (label == FineLabel::kNeu) return ThreeWayLabel::kNeu;
  return ThreeWayLabel::kNeg;
}

inline constexpr BinaryLabel to_binary(ThreeWayLabel label) {
  return label == ThreeWayLabel::kNeu ? BinaryLabel::kNoFeedback : BinaryLabel::kFeedback;
}

inline constexpr BinaryLabel to_binary(FineLabel label) {
  return label == FineLabel::kNeu ? BinaryLabel::kNoFeedback : BinaryLabel::kFeedback;
}

// A label drawn from one of the three label sets. Values from different sets
// never compare equal.
struct ProjectedLabel {
  LabelSet set;
  std::uint8_t code;

  friend auto operator<=>(const ProjectedLabel&, const ProjectedLabel&) = default;

  std::string_view name() const {
    switch (set) {
      case LabelSet::kBinary:
        return code == static_cast<std::uint8_t>(BinaryLabel::kFeedback) ? "FEEDBACK"
                                                                         : "NO_FEEDBACK";
      case LabelSet::kThreeWay: {
        constexpr std::array<std::string_view, 3> names = {"POS", "NEG", "NEU"};
        return names.at(code);
      }
      case LabelSet::kFine:
        return to_string(static_cast<FineLabel>(code));
    }
    return "";
  }

  static ProjectedLabel of(BinaryLabel l) {
    return {LabelSet::kBinary, static_cast<std::uint8_t>(l)};
  }
  static ProjectedLabel of(ThreeWayLabel l) {
    return {LabelSet::kThreeWay, static_cast<std::uint8_t>(l)};
  }
  static ProjectedLabel of(FineLabel l) { return {LabelSet::kFine, static_cast<std::uint8_t>(l)}; }
};

// Number of labels in each set, in code order.
inline std::vector<ProjectedLabel> labels_of(LabelSet set) {
  std::vector<ProjectedLabel> out;
  const std::uint8_t count = set == LabelSet::kBinary ? 2 : set == LabelSet::kThreeWay ? 3 : 6;
  for (std::uint8_t c = 0; c < count; ++c) out.push_back({set, c});
  return out;
}

inline ProjectedLabel project(FineLabel label, LabelSet target) {
  switch (target) {
    case LabelSet::kBinary: return ProjectedLabel::of(to_binary(label));
    case LabelSet::kThreeWay: return ProjectedLabel::of(to_three_way(label));
    case LabelSet::kFine: return ProjectedLabel::of(label);
  }
  return ProjectedLabel::of(label);
}

// Coarsens an already projected label. Refining (e.g. Binary -> ThreeWay) is
// not defined.
inline ProjectedLabel project(ProjectedLabel label, LabelSet target) {
  if (label.set == target) return label;
  if (label.set == LabelSet::kFine) return project(static_cast<FineLabel>(label.code), target);
  if (label.set == LabelSet::kThreeWay && target == LabelSet::kBinary) {
    return ProjectedLabel::of(to_binary(static_cast<ThreeWayLabel>(label.code)));
  }
  fail(ErrorCode::kInvalidArgument, "cannot refine a " + std::string(to_string(label.set)) +
                                        " label into " + std::string(to_string(target)));
}

// Negative feedback types in decreasing priority: the most informative type
// wins when an utterance carries several.
inline constexpr std::array<FineLabel, 4> kNegativePriority = {
    FineLabel::kNegAwareWithCorrection,
    FineLabel::kNegAwareNoCorrection,
    FineLabel::kNegClarify,
    FineLabel::kNegRephrase,
};

inline FineLabel resolve_dual(std::span<const FineLabel> candidates) {
  if (candidates.empty()) fail(ErrorCode::kInvalidArgument, "resolve_dual needs a candidate");
  const auto has = [&](FineLabel l) {
    return std::find(candidates.begin(), candidates.end(), l) != candidates.end();
  };
  const bool any_neg = std::any_of(candidates.begin(), candidates.end(), is_negative);
  if (has(FineLabel::kPos) && any_neg) {
    fail(ErrorCode::kPosNegConflict, "positive and negative labels on one turn");
  }
  for (FineLabel neg : kNegativePriority) {
    if (has(neg)) return neg;
  }
  if (has(FineLabel::kPos)) return FineLabel::kPos;
  return FineLabel::kNeu;
}

inline FineLabel resolve_dual(std::initializer_list<FineLabel> candidates) {
  return resolve_dual(std::span<const FineLabel>(candidates.begin(), candidates.size()));
}

enum class LabelOrigin : std::uint8_t { kHuman, kModel, kRule };

inline std::string_view to_string(LabelOrigin origin) {
  switch (origin) {
    case LabelOrigin::kHuman: return "human";
    case LabelOrigin::kModel: return "model";
    case LabelOrigin::kRule: return "rule";
  }
  return "model";
}

inline std::optional<LabelOrigin> parse_origin(std::string_view text) {
  if (text == "human") return LabelOrigin::kHuman;
  if (text == "model") return LabelOrigin::kModel;
  if (text == "rule") return LabelOrigin::kRule;
  return std::nullopt;
}

// Labels for user turns u_2 ... u_n; labels()[k] belongs to u_{k+2}.
class LabelVector {
 public:
  LabelVector(std::string conversation_id, std::vector<FineLabel> labels, LabelOrigin origin)
      : conversation_id_(std::move(conversation_id)), labels_(std::move(labels)), origin_(origin) {}

  // Checks the length invariant against the conversation it labels.
  static LabelVector for_conversation(const Conversation& conv, std::vector<FineLabel> labels,
                                      LabelOrigin origin) {
    if (conv.user_turn_count() < 1 || labels.size() != conv.user_turn_count() - 1) {
      fail(ErrorCode::kLengthMismatch,
           "conversation '" + conv.id() + "' has " + std::to_string(conv.user_turn_count()) +
               " user turns but " + std::to_string(labels.size()) + " labels");
    }
    return LabelVector(conv.id(), std::move(labels), origin);
  }

  const std::string& conversation_id() const noexcept { return conversation_id_; }
  const std::vector<FineLabel>& labels() const noexcept { return labels_; }
  LabelOrigin origin() const noexcept { return origin_; }
  std::size_t size() const noexcept { return labels_.size(); }

  // Label of user turn u_i, i >= 2.
  FineLabel of_user_turn(std::size_t i) const {
    if (i < 2 || i - 2 >= labels_.size()) {
      fail(ErrorCode::kWindowOutOfRange, "no label for user turn " + std::to_string(i));
    }
    return labels_[i - 2];
  }

  friend bool operator==(const LabelVector&, const LabelVector&) = default;

 private:
  std::string conversation_id_;
  std::vector<FineLabel> labels_;
  LabelOrigin origin_;
};

// s_i = {u_i, m_i, u_{i+1}, m_{i+1}}; trigger_label is the label of u_{i+1}.
struct SubConversation {
  std::string conversation_id;
  std::size_t index = 1;
  std::string u_i;
  std::string m_i;
  std::string u_next;
  std::string m_next;
  FineLabel trigger_label = FineLabel::kNeu;

  std::string key() const { return conversation_id + "#" + std::to_string(index); }

  friend bool operator==(const SubConversation&, const SubConversation&) = default;
};

// Predicate helpers over the three-way projection of the trigger label.
struct ThreeWayIs {
  ThreeWayLabel wanted;
  bool operator()(ThreeWayLabel l) const { return l == wanted; }
};

struct AnyLabel {
  bool operator()(ThreeWayLabel) const { return true; }
};

template <typename Predicate>
std::vector<SubConversation> extract_subconversations(const Conversation& conv,
                                                      const LabelVector& labels,
                                                      Predicate predicate) {
  if (labels.conversation_id() != conv.id()) {
    fail(ErrorCode::kIdMismatch,
         "labels for '" + labels.conversation_id() + "' applied to '" + conv.id() + "'");
  }
  const std::size_t n = conv.user_turn_count();
  if (labels.size() + 1 != n) {
    fail(ErrorCode::kLengthMismatch, "conversation '" + conv.id() + "' expects " +
                                         std::to_string(n - 1) + " labels, got " +
                                         std::to_string(labels.size()));
  }
  std::vector<SubConversation> out;
  for (std::size_t i = 1; i + 1 <= n; ++i) {
    const auto m_next = conv.assistant_turn(i + 1);
    if (!m_next) continue;
    const FineLabel trigger = labels.of_user_turn(i + 1);
    if (!predicate(to_three_way(trigger))) continue;
    out.push_back(SubConversation{
        .conversation_id = conv.id(),
        .index = i,
        .u_i = conv.user_turn(i),
        .m_i = std::string(*conv.assistant_turn(i)),
        .u_next = conv.user_turn(i + 1),
        .m_next = std::string(*m_next),
        .trigger_label = trigger,
    });
  }
  return out;
}

}  // namespace fbmine

#endif  // FBMINE_CORE_HPP_
