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

#ifndef FBMINE_DETECT_HPP_
#define FBMINE_DETECT_HPP_

// Feedback detection: conversation -> label vector for u_2 ... u_n.

#include <algorithm>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fbmine/core.hpp"
#include "fbmine/gateway.hpp"
#include "fbmine/jsonl.hpp"

namespace fbmine {

enum class DetectionMode : std::uint8_t { kSparse, kDense };

inline std::optional<DetectionMode> parse_detection_mode(std::string_view text) {
  if (text == "sparse") return DetectionMode::kSparse;
  if (text == "dense") return DetectionMode::kDense;
  return std::nullopt;
}

// Bump whenever any text below changes; detection accuracy is prompt
// sensitive and cached responses are keyed on the exact prompt.
inline constexpr std::string_view kDetectionPromptVersion = "detect-prompt-v1";

namespace prompt {

inline constexpr std::string_view kContext =
    "# Context\n"
    "You will be given a multi-turn conversation between a User and an Assistant. You should act "
    "as a human annotator to identify User feedback for the Assistant. Please read the "
    "conversation and complete the task below.\n\n";

inline constexpr std::string_view kTask =
    "# Task\n"
    "Your task is to identify all feedback instances for Assistant in the User responses that "
    "satisfy the following feedback patterns:\n\n"
    "## Repeat or Rephrase (NEG_1)\n"
    "Does the user repeat or rephrase their concern?\n"
    "Examples for \"yes\":\n"
    "- By house, I mean apartments, not condo\n"
    "- Actually, I wanted\n"
    "Examples for \"no\":\n"
    "- Thank you\n\n"
    "## Make Aware without Correction (NEG_2)\n"
    "Does the user simply point out that the Assistant's previous response was wrong, without "
    "saying how to fix it?\n"
    "Examples for \"yes\":\n"
    "- That's not correct\n"
    "- Your answer is wrong\n"
    "Examples for \"no\":\n"
    "- The capital is Canberra, not Sydney, please fix it\n\n"
    "## Make Aware with Correction (NEG_3)\n"
    "Does the user point out a problem in the Assistant's previous response and also give "
    "instructions or information on how to correct it?\n"
    "Examples for \"yes\":\n"
    "- No, the capital is Canberra. Please correct the answer\n"
    "- You forgot the imports, add them at the top\n"
    "Examples for \"no\":\n"
    "- That's wrong\n\n"
    "## Ask for Clarification (NEG_4)\n"
    "Does the user ask the Assistant to provide information that was missing from its previous "
    "response?\n"
    "Examples for \"yes\":\n"
    "- What do you mean by the second step?\n"
    "- Can you explain why that works?\n"
    "Examples for \"no\":\n"
    "- Now write a poem about cats\n\n"
    "## Positive Feedback (POS)\n"
    "Does the user express satisfaction, praise or gratitude for the Assistant's previous "
    "response?\n"
    "Examples for \"yes\":\n"
    "- Thank you, that works perfectly\n"
    "- Great answer!\n"
    "Examples for \"no\":\n"
    "- Tell me more\n\n"
    "If a User turn matches several negative patterns, choose the first applicable one in this "
    "order: NEG_3, NEG_2, NEG_4, NEG_1.\n\n";

inline constexpr std::string_view kFormat =
    "# Format\n"
    "You should output annotations per User turn except for the first query. You should both "
    "output the content of the User turn where feedback exists as well as the feedback pattern "
    "category using a json format:\n"
    "{\n"
    "\"User Response Pattern\": [Insert User Response Pattern],\n"
    "\"User Response Text\": [Insert User Response Text]\n"
    "}\n"
    "If there's no feedback, please output: {\n"
    "\"User Response Pattern\": \"NEU\",\n"
    "\"User Response Text\": [Insert User Response Text]\n"
    "}\n\n";

inline constexpr std::string_view kExamples =
    "Here are four examples of an input and your expected output.\n\n"
    "Example 1\n"
    "Input:\n"
    "User: Find me a house to rent in Boston under $2000.\n"
    "Assistant: Here are three condos in Boston under $2000 per month: ...\n"
    "User: By house, I mean apartments, not condo\n"
    "Output:\n"
    "{\"User Response Pattern\": \"NEG_1\", \"User Response Text\": \"By house, I mean "
    "apartments, not condo\"}\n\n"
    "Example 2\n"
    "Input:\n"
    "User: What is the capital of Australia?\n"
    "Assistant: The capital of Australia is Sydney.\n"
    "User: That's wrong.\n"
    "Assistant: I apologize, the capital of Australia is Canberra.\n"
    "User: Thanks!\n"
    "Output:\n"
    "{\"User Response Pattern\": \"NEG_2\", \"User Response Text\": \"That's wrong.\"}\n"
    "{\"User Response Pattern\": \"POS\", \"User Response Text\": \"Thanks!\"}\n\n"
    "Example 3\n"
    "Input:\n"
    "User: Write a Python function that reverses a string.\n"
    "Assistant: def reverse(s): return s.reverse()\n"
    "User: Strings have no reverse method, use slicing with s[::-1] instead.\n"
    "Output:\n"
    "{\"User Response Pattern\": \"NEG_3\", \"User Response Text\": \"Strings have no reverse "
    "method, use slicing with s[::-1] instead.\"}\n\n"
    "Example 4\n"
    "Input:\n"
    "User: How do I bake sourdough bread?\n"
    "Assistant: Mix starter, flour, water and salt, then proof and bake.\n"
    "User: How long should it proof for?\n"
    "Assistant: Usually 4 to 12 hours depending on temperature.\n"
    "User: Now give me a recipe for pancakes.\n"
    "Output:\n"
    "{\"User Response Pattern\": \"NEG_4\", \"User Response Text\": \"How long should it proof "
    "for?\"}\n"
    "{\"User Response Pattern\": \"NEU\", \"User Response Text\": \"Now give me a recipe for "
    "pancakes.\"}\n\n";

inline constexpr std::string_view kTrailer = "Now you try:\nInput:\n";

}  // namespace prompt

inline std::string serialize_turns(const std::vector<Turn>& turns) {
  std::string out;
  for (const Turn& t : turns) {
    out += t.role == Role::kUser ? "User: " : "Assistant: ";
    out += t.content;
    out += "\n";
  }
  return out;
}

// The 3-turn window {u_i, m_i, u_{i+1}} as its own conversation.
inline Conversation sparse_window(const Conversation& conv, std::size_t i) {
  const std::size_t n = conv.user_turn_count();
  if (i < 1 || i + 1 > n) {
    fail(ErrorCode::kWindowOutOfRange, "window " + std::to_string(i) + " needs user turns " +
                                           std::to_string(i) + " and " + std::to_string(i + 1) +
                                           " but conversation has " + std::to_string(n));
  }
  std::vector<Turn> turns = {
      {Role::kUser, conv.user_turn(i)},
      {Role::kAssistant, std::string(*conv.assistant_turn(i))},
      {Role::kUser, conv.user_turn(i + 1)},
  };
  return Conversation(conv.id(), conv.source(), conv.model_name(), std::move(turns), conv.language());
}

inline std::vector<ChatMessage> build_prompt(const Conversation& conv, DetectionMode mode,
                                             std::optional<std::size_t> window_index = std::nullopt) {
  std::string text;
  text += prompt::kContext;
  text += prompt::kTask;
  text += prompt::kFormat;
  text += prompt::kExamples;
  text += prompt::kTrailer;
  if (mode == DetectionMode::kSparse) {
    if (!window_index) fail(ErrorCode::kWindowOutOfRange, "sparse mode needs a window index");
    text += serialize_turns(sparse_window(conv, *window_index).turns());
  } else {
    if (conv.user_turn_count() < 2) {
      fail(ErrorCode::kWindowOutOfRange, "dense detection needs at least two user turns");
    }
    text += serialize_turns(conv.turns());
  }
  text += "Output:\n";
  return {user_message(std::move(text))};
}

struct DetectorOutputItem {
  std::string pattern;
  std::string response_text;
};

inline std::optional<FineLabel> label_from_pattern(std::string_view tag) {
  std::string t;
  for (char c : tag) {
    if (!std::isspace(static_cast<unsigned char>(c))) t.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  }
  if (t == "POS") return FineLabel::kPos;
  if (t == "NEU") return FineLabel::kNeu;
  if (t == "NEG_1") return FineLabel::kNegRephrase;
  if (t == "NEG_2") return FineLabel::kNegAwareNoCorrection;
  if (t == "NEG_3") return FineLabel::kNegAwareWithCorrection;
  if (t == "NEG_4") return FineLabel::kNegClarify;
  return parse_fine_label(t);
}

inline std::string_view pattern_tag(FineLabel label) {
  switch (label) {
    case FineLabel::kPos: return "POS";
    case FineLabel::kNegRephrase: return "NEG_1";
    case FineLabel::kNegAwareNoCorrection: return "NEG_2";
    case FineLabel::kNegAwareWithCorrection: return "NEG_3";
    case FineLabel::kNegClarify: return "NEG_4";
    case FineLabel::kNeu: return "NEU";
  }
  return "NEU";
}

// "NEG_1, NEG_3" style multi-tags are resolved with the negative priority
// order.
inline FineLabel label_from_pattern_field(std::string_view field) {
  std::vector<FineLabel> found;
  std::size_t start = 0;
  while (start <= field.size()) {
    std::size_t end = field.find_first_of(",/|;", start);
    if (end == std::string_view::npos) end = field.size();
    const std::string_view piece = field.substr(start, end - start);
    if (!is_blank(piece)) {
      const auto label = label_from_pattern(piece);
      if (!label) fail(ErrorCode::kUnknownPattern, "unknown pattern '" + std::string(piece) + "'");
      found.push_back(*label);
    }
    start = end + 1;
  }
  if (found.empty()) fail(ErrorCode::kUnknownPattern, "empty pattern");
  return resolve_dual(std::span<const FineLabel>(found));
}

// Serializes labels the way the model is asked to answer; used to build
// canned responses and to check that parsing inverts it.
inline std::string render_detection_output(const Conversation& conv, const LabelVector& labels) {
  std::string out;
  for (std::size_t i = 2; i <= conv.user_turn_count(); ++i) {
    ojson item;
    item["User Response Pattern"] = std::string(pattern_tag(labels.of_user_turn(i)));
    item["User Response Text"] = conv.user_turn(i);
    out += item.dump() + "\n";
  }
  return out;
}

namespace detail {

inline std::string normalize_for_match(std::string_view text) {
  std::string out;
  bool space = false;
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u) || u >= 0x80) {
      if (space && !out.empty()) out.push_back(' ');
      out.push_back(static_cast<char>(std::tolower(u)));
      space = false;
    } else {
      space = true;
    }
  }
  return out;
}

inline std::string straighten_quotes(std::string_view raw) {
  std::string out(raw);
  for (const std::string_view curly : {"\xE2\x80\x9C", "\xE2\x80\x9D", "\xE2\x80\x9E"}) {
    for (std::size_t pos; (pos = out.find(curly)) != std::string::npos;) out.replace(pos, curly.size(), "\"");
  }
  return out;
}

// Index one past the brace matching raw[open], or npos.
inline std::size_t match_brace(std::string_view raw, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < raw.size(); ++i) {
    const char c = raw[i];
    if (in_string) {
      if (c == '\\') ++i;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') ++depth;
    else if (c == '}' && --depth == 0) return i + 1;
  }
  return std::string_view::npos;
}

}  // namespace detail

// Pulls every top-level JSON object carrying a "User Response Pattern" out of
// free-form model text, in order of appearance.
inline std::vector<DetectorOutputItem> extract_output_items(std::string_view raw_text) {
  const std::string raw = detail::straighten_quotes(raw_text);
  std::vector<DetectorOutputItem> items;
  std::size_t pos = 0;
  while ((pos = raw.find('{', pos)) != std::string::npos) {
    const std::size_t end = detail::match_brace(raw, pos);
    if (end == std::string::npos) break;
    try {
      const json obj = json::parse(raw.substr(pos, end - pos));
      if (obj.is_object() && obj.contains("User Response Pattern")) {
        const auto& pattern = obj["User Response Pattern"];
        DetectorOutputItem item;
        item.pattern = pattern.is_string() ? pattern.get<std::string>() : pattern.dump();
        if (obj.contains("User Response Text") && obj["User Response Text"].is_string()) {
          item.response_text = obj["User Response Text"].get<std::string>();
        }
        items.push_back(std::move(item));
        pos = end;
        continue;
      }
    } catch (const json::parse_error&) {
    }
    ++pos;
  }
  return items;
}

struct DetectionParse {
  LabelVector labels;
  std::vector<DetectorOutputItem> items;
  std::vector<std::string> warnings;
};

inline DetectionParse parse_detection_response_detailed(std::string_view raw, const Conversation& conv,
                                                        LabelOrigin origin = LabelOrigin::kModel) {
  auto items = extract_output_items(raw);
  if (items.empty()) throw UnparsableOutput("no annotation objects in detector output", std::string(raw));
  const std::size_t expected = conv.user_turn_count() - 1;
  if (items.size() != expected) {
    fail(ErrorCode::kCountMismatch, "conversation '" + conv.id() + "' needs " +
                                        std::to_string(expected) + " annotations, got " +
                                        std::to_string(items.size()));
  }
  std::vector<FineLabel> labels;
  std::vector<std::string> warnings;
  for (std::size_t k = 0; k < items.size(); ++k) {
    labels.push_back(label_from_pattern_field(items[k].pattern));
    const std::string said = detail::normalize_for_match(items[k].response_text);
    const std::string actual = detail::normalize_for_match(conv.user_turn(k + 2));
    if (said.empty() || (actual.find(said) == std::string::npos && said.find(actual) == std::string::npos)) {
      warnings.push_back("item " + std::to_string(k + 1) + " text does not match user turn " +
                         std::to_string(k + 2));
    }
  }
  return {LabelVector::for_conversation(conv, std::move(labels), origin), std::move(items),
          std::move(warnings)};
}

inline LabelVector parse_detection_response(std::string_view raw, const Conversation& conv) {
  return parse_detection_response_detailed(raw, conv).labels;
}

inline LabelVector detect_dense(const Conversation& conv, ChatModel& model) {
  const std::string raw = model.complete(build_prompt(conv, DetectionMode::kDense));
  return parse_detection_response(raw, conv);
}

// One call per designated window i, labelling u_{i+1}. Turns outside the
// designated windows are NEU.
inline LabelVector detect_sparse(const Conversation& conv, ChatModel& model,
                                 const std::vector<std::size_t>& windows) {
  const std::size_t n = conv.user_turn_count();
  std::vector<FineLabel> labels(n >= 1 ? n - 1 : 0, FineLabel::kNeu);
  for (std::size_t i : windows) {
    const Conversation window = sparse_window(conv, i);
    const std::string raw = model.complete(build_prompt(conv, DetectionMode::kSparse, i));
    labels[i - 1] = parse_detection_response(raw, window).labels().front();
  }
  return LabelVector::for_conversation(conv, std::move(labels), LabelOrigin::kModel);
}

inline std::vector<std::size_t> all_windows(const Conversation& conv) {
  std::vector<std::size_t> out;
  for (std::size_t i = 1; i < conv.user_turn_count(); ++i) out.push_back(i);
  return out;
}

inline LabelVector detect(const Conversation& conv, ChatModel& model, DetectionMode mode) {
  if (mode == DetectionMode::kDense) return detect_dense(conv, model);
  if (conv.user_turn_count() < 2) {
    fail(ErrorCode::kWindowOutOfRange, "sparse detection needs at least two user turns");
  }
  return detect_sparse(conv, model, all_windows(conv));
}

// ---------------------------------------------------------------------------
// Rule-based detector
//
// Each user turn u_k (k >= 2) is lower-cased and matched against the phrase
// table below; a phrase matches only on word boundaries. A turn ending in '?'
// that contains a back-reference word is NEG_CLARIFY. When positive and
// negative rules both fire the positive hit is discarded, and the remaining
// hits are combined with resolve_dual. No hit means NEU.

struct PhraseRule {
  FineLabel label;
  std::string_view phrase;
};

inline constexpr PhraseRule kPhraseRules[] = {
    {FineLabel::kPos, "thank you"},
    {FineLabel::kPos, "thanks"},
    {FineLabel::kPos, "great"},
    {FineLabel::kPos, "perfect"},
    {FineLabel::kPos, "awesome"},
    {FineLabel::kPos, "excellent"},
    {FineLabel::kPos, "good job"},
    {FineLabel::kPos, "well done"},
    {FineLabel::kPos, "that works"},
    {FineLabel::kPos, "love it"},
    {FineLabel::kPos, "exactly what i"},
    {FineLabel::kNegRephrase, "i meant"},
    {FineLabel::kNegRephrase, "i mean"},
    {FineLabel::kNegRephrase, "actually"},
    {FineLabel::kNegRephrase, "let me rephrase"},
    {FineLabel::kNegRephrase, "in other words"},
    {FineLabel::kNegRephrase, "what i want is"},
    {FineLabel::kNegRephrase, "i asked for"},
    {FineLabel::kNegAwareNoCorrection, "wrong"},
    {FineLabel::kNegAwareNoCorrection, "incorrect"},
    {FineLabel::kNegAwareNoCorrection, "not correct"},
    {FineLabel::kNegAwareNoCorrection, "not right"},
    {FineLabel::kNegAwareNoCorrection, "doesn't work"},
    {FineLabel::kNegAwareNoCorrection, "does not work"},
    {FineLabel::kNegAwareNoCorrection, "mistake"},
    {FineLabel::kNegAwareNoCorrection, "not what i asked"},
    {FineLabel::kNegAwareNoCorrection, "not true"},
    {FineLabel::kNegAwareWithCorrection, "should be"},
    {FineLabel::kNegAwareWithCorrection, "should have"},
    {FineLabel::kNegAwareWithCorrection, "instead"},
    {FineLabel::kNegAwareWithCorrection, "change it to"},
    {FineLabel::kNegAwareWithCorrection, "replace"},
    {FineLabel::kNegAwareWithCorrection, "fix it"},
    {FineLabel::kNegAwareWithCorrection, "please fix"},
    {FineLabel::kNegAwareWithCorrection, "correct it"},
    {FineLabel::kNegAwareWithCorrection, "you forgot"},
    {FineLabel::kNegAwareWithCorrection, "you need to"},
};

// Words that tie a question back to the previous answer.
inline constexpr std::string_view kBackReferenceWords[] = {
    "your", "that", "this", "it", "above", "explain", "elaborate", "mean", "why",
    "detail", "details", "clarify", "previous", "earlier", "said", "answer", "response",
};

namespace detail {

inline bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '\'' || static_cast<unsigned char>(c) >= 0x80;
}

inline bool contains_phrase(std::string_view text, std::string_view phrase) {
  for (std::size_t pos = text.find(phrase); pos != std::string_view::npos;
       pos = text.find(phrase, pos + 1)) {
    const bool left = pos == 0 || !is_word_char(text[pos - 1]);
    const std::size_t end = pos + phrase.size();
    const bool right = end >= text.size() || !is_word_char(text[end]);
    if (left && right) return true;
  }
  return false;
}

inline std::string lowercase(std::string_view text) {
  std::string out(text);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  // Straight apostrophes so "doesn’t" matches "doesn't".
  for (std::size_t pos; (pos = out.find("\xE2\x80\x99")) != std::string::npos;) out.replace(pos, 3, "'");
  return out;
}

}  // namespace detail

inline FineLabel classify_turn_by_rules(std::string_view utterance) {
  const std::string text = detail::lowercase(utterance);
  std::vector<FineLabel> hits;
  for (const auto& rule : kPhraseRules) {
    if (detail::contains_phrase(text, rule.phrase)) hits.push_back(rule.label);
  }
  const auto last = text.find_last_not_of(" \t\r\n");
  if (last != std::string::npos && text[last] == '?') {
    for (std::string_view word : kBackReferenceWords) {
      if (detail::contains_phrase(text, word)) {
        hits.push_back(FineLabel::kNegClarify);
        break;
      }
    }
  }
  if (std::any_of(hits.begin(), hits.end(), is_negative)) {
    std::erase(hits, FineLabel::kPos);
  }
  if (hits.empty()) return FineLabel::kNeu;
  return resolve_dual(std::span<const FineLabel>(hits));
}

inline LabelVector detect_rule_based(const Conversation& conv) {
  if (conv.user_turn_count() < 2) {
    fail(ErrorCode::kWindowOutOfRange, "rule detection needs at least two user turns");
  }
  std::vector<FineLabel> labels;
  for (std::size_t i = 2; i <= conv.user_turn_count(); ++i) {
    labels.push_back(classify_turn_by_rules(conv.user_turn(i)));
  }
  return LabelVector::for_conversation(conv, std::move(labels), LabelOrigin::kRule);
}

}  // namespace fbmine

#endif  // FBMINE_DETECT_HPP_
