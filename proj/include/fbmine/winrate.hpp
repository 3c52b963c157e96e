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

#ifndef FBMINE_WINRATE_HPP_
#define FBMINE_WINRATE_HPP_

// Pairwise method comparison through reward-model scores.
//
// Scored message lists (the candidate answer is always last):
//   without feedback: [user: u_i, assistant: a]
//   with feedback:    [user: u_i, user: u_{i+1}, assistant: a]

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "fbmine/build.hpp"
#include "fbmine/core.hpp"
#include "fbmine/gateway.hpp"
#include "fbmine/parallel.hpp"

namespace fbmine {

enum class EvalSetting : std::uint8_t { kWithFeedback, kWithoutFeedback };

inline std::string_view to_string(EvalSetting s) {
  return s == EvalSetting::kWithFeedback ? "with-fb" : "without-fb";
}

inline std::optional<EvalSetting> parse_eval_setting(std::string_view text) {
  if (text == "with-fb" || text == "with_fb") return EvalSetting::kWithFeedback;
  if (text == "without-fb" || text == "without_fb") return EvalSetting::kWithoutFeedback;
  return std::nullopt;
}

enum class TiePolicy : std::uint8_t { kSplit, kExclude };

inline std::optional<TiePolicy> parse_tie_policy(std::string_view text) {
  if (text == "split") return TiePolicy::kSplit;
  if (text == "exclude") return TiePolicy::kExclude;
  return std::nullopt;
}

inline constexpr std::string_view kKnownMethods[] = {"orig_m_i", "orig_m_next", "better_scratch",
                                                     "better_semantic"};

struct MethodAnswer {
  std::string method_id;
  std::string answer;
  std::string sub_ref;
};

// Answer a method produced for a record. The orig_* methods copy the logged
// responses; any other id is looked up in `custom`.
inline std::optional<std::string> answer_for(const RegenRecord& record, std::string_view method,
                                             const std::map<std::string, std::string>* custom = nullptr) {
  if (method == "orig_m_i") return record.sub.m_i;
  if (method == "orig_m_next") return record.sub.m_next;
  if (method == "better_scratch") return record.m_scra;
  if (method == "better_semantic") return record.m_sem;
  if (custom) {
    if (auto it = custom->find(std::string(method)); it != custom->end()) return it->second;
  }
  return std::nullopt;
}

inline std::vector<ChatMessage> score_messages(const SubConversation& sub, std::string_view answer,
                                               EvalSetting setting) {
  if (is_blank(answer)) fail(ErrorCode::kInvalidArgument, "empty candidate answer");
  if (setting == EvalSetting::kWithoutFeedback) {
    return {user_message(sub.u_i), assistant_message(std::string(answer))};
  }
  if (is_blank(sub.u_next)) fail(ErrorCode::kInvalidArgument, "with-feedback scoring needs u_{i+1}");
  return {user_message(sub.u_i), user_message(sub.u_next), assistant_message(std::string(answer))};
}

inline double score(const SubConversation& sub, std::string_view answer, EvalSetting setting, RewardModel& rm) {
  return rm.score(score_messages(sub, answer, setting));
}

struct WinrateCounts {
  std::size_t wins = 0;
  std::size_t losses = 0;
  std::size_t ties = 0;
};

inline WinrateCounts count_outcomes(const std::vector<std::pair<double, double>>& pairs) {
  WinrateCounts c;
  for (const auto& [a, b] : pairs) {
    if (a > b) ++c.wins;
    else if (a < b) ++c.losses;
    else ++c.ties;
  }
  return c;
}

inline double winrate(const WinrateCounts& c, TiePolicy policy) {
  if (policy == TiePolicy::kSplit) {
    const std::size_t n = c.wins + c.losses + c.ties;
    if (n == 0) fail(ErrorCode::kEmptyAfterExclusion, "no pairs to compare");
    return 100.0 * (static_cast<double>(c.wins) + 0.5 * static_cast<double>(c.ties)) / static_cast<double>(n);
  }
  const std::size_t n = c.wins + c.losses;
  if (n == 0) fail(ErrorCode::kEmptyAfterExclusion, "every pair is a tie");
  return 100.0 * static_cast<double>(c.wins) / static_cast<double>(n);
}

// Percentage of pairs where the first score is higher.
inline double winrate(const std::vector<std::pair<double, double>>& pairs, TiePolicy policy = TiePolicy::kSplit) {
  return winrate(count_outcomes(pairs), policy);
}

struct ComparisonSpec {
  std::string method_a;
  std::string method_b;
  EvalSetting setting = EvalSetting::kWithoutFeedback;
};

// One comparison per non-comment line: "<method_a> <method_b> [with-fb|without-fb]".
inline std::vector<ComparisonSpec> parse_comparison_specs(std::string_view text, EvalSetting default_setting) {
  std::vector<ComparisonSpec> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream fields(line);
    std::vector<std::string> tokens;
    for (std::string t; fields >> t;) tokens.push_back(t);
    if (tokens.empty()) continue;
    if (tokens.size() < 2 || tokens.size() > 3) {
      fail(ErrorCode::kInvalidArgument, "spec line " + std::to_string(number) + " needs two methods");
    }
    ComparisonSpec spec{tokens[0], tokens[1], default_setting};
    if (tokens.size() == 3) {
      const auto s = parse_eval_setting(tokens[2]);
      if (!s) fail(ErrorCode::kInvalidArgument, "unknown setting '" + tokens[2] + "'");
      spec.setting = *s;
    }
    out.push_back(std::move(spec));
  }
  return out;
}

struct WinrateRow {
  std::string method_a;
  std::string method_b;
  EvalSetting setting = EvalSetting::kWithoutFeedback;
  std::optional<double> winrate_pct;
  std::size_t n = 0;  // usable pairs
  std::size_t wins = 0;
  std::size_t ties = 0;
  std::size_t excluded = 0;  // pairs dropped because a score failed
  std::size_t skipped = 0;   // records ineligible for this setting
  std::string error;
};

struct WinrateReport {
  TiePolicy tie_policy = TiePolicy::kSplit;
  std::vector<WinrateRow> rows;
  std::vector<SkipEntry> failures;
};

// Scores every distinct (sub-conversation, answer, setting) once, then
// reduces each requested comparison. With-feedback rows skip records whose
// trigger carries no feedback (NEU), since their u_{i+1} is not feedback.
inline WinrateReport compare_methods(std::vector<RegenRecord> records, const std::vector<ComparisonSpec>& specs,
                                     RewardModel& rm, TiePolicy policy = TiePolicy::kSplit,
                                     std::size_t workers = 4) {
  std::sort(records.begin(), records.end(),
            [](const RegenRecord& a, const RegenRecord& b) { return a.sub.key() < b.sub.key(); });

  using ItemKey = std::tuple<std::string, std::string, EvalSetting>;
  struct Item {
    const SubConversation* sub;
    std::string answer;
    EvalSetting setting;
  };
  std::map<ItemKey, std::size_t> index;
  std::vector<Item> items;
  const auto eligible = [](const RegenRecord& r, EvalSetting s) {
    return s == EvalSetting::kWithoutFeedback || r.sub.trigger_label != FineLabel::kNeu;
  };

  WinrateReport report;
  report.tie_policy = policy;
  for (const auto& spec : specs) {
    WinrateRow row;
    row.method_a = spec.method_a;
    row.method_b = spec.method_b;
    row.setting = spec.setting;
    for (const auto& r : records) {
      const auto a = answer_for(r, spec.method_a);
      const auto b = answer_for(r, spec.method_b);
      if (!a || !b) {
        row.error = "method '" + std::string(!a ? spec.method_a : spec.method_b) + "' missing for record '" +
                    r.sub.key() + "'";
        break;
      }
      if (!eligible(r, spec.setting)) continue;
      for (const std::string* answer : {&*a, &*b}) {
        ItemKey key{r.sub.key(), *answer, spec.setting};
        if (index.emplace(key, items.size()).second) items.push_back({&r.sub, *answer, spec.setting});
      }
    }
    report.rows.push_back(std::move(row));
  }

  auto scores = parallel_map(items, [&](const Item& it) { return score(*it.sub, it.answer, it.setting, rm); }, workers);
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!scores[i].ok()) report.failures.push_back({items[i].sub->conversation_id, "score", scores[i].error});
  }

  for (std::size_t s = 0; s < specs.size(); ++s) {
    WinrateRow& row = report.rows[s];
    if (!row.error.empty()) continue;
    std::vector<std::pair<double, double>> pairs;
    for (const auto& r : records) {
      if (!eligible(r, row.setting)) {
        ++row.skipped;
        continue;
      }
      const auto& a = scores[index.at({r.sub.key(), *answer_for(r, row.method_a), row.setting})];
      const auto& b = scores[index.at({r.sub.key(), *answer_for(r, row.method_b), row.setting})];
      if (!a.ok() || !b.ok()) {
        ++row.excluded;  // dropped pairwise, never one-sided
        continue;
      }
      pairs.emplace_back(*a.value, *b.value);
    }
    const WinrateCounts c = count_outcomes(pairs);
    row.wins = c.wins;
    row.ties = c.ties;
    row.n = policy == TiePolicy::kSplit ? pairs.size() : c.wins + c.losses;
    try {
      row.winrate_pct = winrate(c, policy);
    } catch (const Error& e) {
      row.error = e.what();
    }
  }
  return report;
}

inline ojson to_json(const WinrateReport& report) {
  ojson out;
  out["tie_policy"] = report.tie_policy == TiePolicy::kSplit ? "split" : "exclude";
  ojson rows = ojson::array();
  for (const auto& r : report.rows) {
    ojson row;
    row["method_a"] = r.method_a;
    row["method_b"] = r.method_b;
    row["setting"] = std::string(to_string(r.setting));
    row["winrate_pct"] = r.winrate_pct ? ojson(*r.winrate_pct) : ojson(nullptr);
    row["n"] = r.n;
    row["wins"] = r.wins;
    row["ties"] = r.ties;
    row["excluded"] = r.excluded;
    row["skipped"] = r.skipped;
    if (!r.error.empty()) row["error"] = r.error;
    rows.push_back(std::move(row));
  }
  out["rows"] = std::move(rows);
  out["failures"] = report.failures.size();
  return out;
}

inline std::string format_table(const WinrateReport& report) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-18s %-18s %-11s %8s %6s %6s %s\n", "Response A", "Response B", "Setting",
                "Winrate", "n", "ties", "note");
  out += buf;
  for (const auto& r : report.rows) {
    std::string rate = r.winrate_pct ? std::to_string(static_cast<int>(*r.winrate_pct + 0.5)) + "%" : "---";
    std::snprintf(buf, sizeof buf, "%-18s %-18s %-11s %8s %6zu %6zu %s\n", r.method_a.c_str(), r.method_b.c_str(),
                  std::string(to_string(r.setting)).c_str(), rate.c_str(), r.n, r.ties, r.error.c_str());
    out += buf;
  }
  return out;
}

}  // namespace fbmine

#endif  // FBMINE_WINRATE_HPP_
