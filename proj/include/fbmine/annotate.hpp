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

#ifndef FBMINE_ANNOTATE_HPP_
#define FBMINE_ANNOTATE_HPP_

// File-backed store for human feedback annotations.
//
// store/tasks.jsonl        {"conversation_id", "required_annotators", "conversation": <canonical object>}
// store/annotations.jsonl  {"conversation_id", "annotator_id", "turn_index", "label", "submitted_at", "revision"}
//
// Both files are append-only; the in-memory state is whatever replaying them
// yields, with the highest revision winning per (conversation, annotator,
// turn). compact() rewrites the annotation log down to those winners.
// turn_index is the user-turn ordinal, so the first labelable turn is 2.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "fbmine/core.hpp"
#include "fbmine/ingest.hpp"
#include "fbmine/jsonl.hpp"
#include "fbmine/labels_io.hpp"
#include "fbmine/metrics.hpp"

namespace fbmine {

struct AnnotationRecord {
  std::string conversation_id;
  std::string annotator_id;
  std::size_t turn_index = 2;
  FineLabel label = FineLabel::kNeu;
  std::string submitted_at;
  std::uint64_t revision = 0;
};

inline ojson to_json(const AnnotationRecord& r) {
  ojson out;
  out["conversation_id"] = r.conversation_id;
  out["annotator_id"] = r.annotator_id;
  out["turn_index"] = r.turn_index;
  out["label"] = std::string(to_string(r.label));
  out["submitted_at"] = r.submitted_at;
  out["revision"] = r.revision;
  return out;
}

enum class TaskStatus : std::uint8_t { kUnassigned, kInProgress, kComplete };

inline std::string_view to_string(TaskStatus s) {
  switch (s) {
    case TaskStatus::kUnassigned: return "unassigned";
    case TaskStatus::kInProgress: return "in_progress";
    case TaskStatus::kComplete: return "complete";
  }
  return "unassigned";
}

inline std::optional<TaskStatus> parse_task_status(std::string_view text) {
  if (text == "unassigned") return TaskStatus::kUnassigned;
  if (text == "in_progress") return TaskStatus::kInProgress;
  if (text == "complete") return TaskStatus::kComplete;
  return std::nullopt;
}

struct TaskSummary {
  std::string conversation_id;
  TaskStatus status = TaskStatus::kUnassigned;
  std::size_t required_annotators = 1;
  std::size_t label_slots = 0;  // n - 1
  std::map<std::string, std::size_t> labeled;  // annotator -> turns labeled
  std::vector<std::string> completed_by;
};

// Error surfaced to HTTP clients with its status code.
class StoreError : public Error {
 public:
  StoreError(int http_status, ErrorCode code, const std::string& message)
      : Error(code, message), http_status_(http_status) {}
  int http_status() const noexcept { return http_status_; }

 private:
  int http_status_;
};

struct AgreementResult {
  double kappa = 0;
  std::size_t n_items = 0;
  std::size_t n_conversations = 0;
};

inline std::string utc_now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class AnnotationStore {
 public:
  struct Options {
    // Annotator whose labels are exported when several completed a task.
    std::optional<std::string> primary_annotator;
    std::function<std::string()> clock = utc_now_iso8601;
  };

  explicit AnnotationStore(std::filesystem::path dir) : AnnotationStore(std::move(dir), Options{}) {}
  AnnotationStore(std::filesystem::path dir, Options options)
      : dir_(std::move(dir)), options_(std::move(options)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) fail(ErrorCode::kIoError, "cannot create store dir " + dir_.string());
    replay();
  }

  const std::filesystem::path& dir() const noexcept { return dir_; }
  std::filesystem::path tasks_path() const { return dir_ / "tasks.jsonl"; }
  std::filesystem::path annotations_path() const { return dir_ / "annotations.jsonl"; }

  // Registers a conversation for annotation. Re-adding an existing id is a no-op.
  bool add_task(const Conversation& conv, std::size_t required_annotators = 1) {
    if (conv.user_turn_count() < 2) {
      fail(ErrorCode::kInvalidArgument, "conversation '" + conv.id() + "' has nothing to annotate");
    }
    std::unique_lock lock(mu_);
    if (tasks_.count(conv.id())) return false;
    ojson line;
    line["conversation_id"] = conv.id();
    line["required_annotators"] = std::max<std::size_t>(1, required_annotators);
    line["conversation"] = to_json(conv);
    append(tasks_path(), dump_line(line));
    apply_task(conv, std::max<std::size_t>(1, required_annotators));
    return true;
  }

  // Appends one revision per submitted label and returns the task summary.
  TaskSummary submit(const std::string& conversation_id, const std::string& annotator_id,
                     const std::vector<std::pair<std::size_t, FineLabel>>& labels) {
    std::unique_lock lock(mu_);
    const auto it = tasks_.find(conversation_id);
    if (it == tasks_.end()) {
      throw StoreError(409, ErrorCode::kIdMismatch, "no task for conversation '" + conversation_id + "'");
    }
    if (is_blank(annotator_id)) throw StoreError(422, ErrorCode::kInvalidArgument, "annotator_id is required");
    const std::size_t n = it->second.conversation.user_turn_count();
    for (const auto& [turn, label] : labels) {
      if (turn < 2 || turn > n) {
        throw StoreError(422, ErrorCode::kWindowOutOfRange,
                         "turn_index " + std::to_string(turn) + " outside 2.." + std::to_string(n));
      }
    }
    std::string lines;
    std::vector<AnnotationRecord> records;
    const std::string now = options_.clock();
    for (const auto& [turn, label] : labels) {
      AnnotationRecord r{conversation_id, annotator_id, turn, label, now, next_revision(conversation_id, annotator_id, turn)};
      // Duplicate turns in one submission: later entries win.
      revisions_[{conversation_id, annotator_id, turn}] = r.revision;
      lines += dump_line(to_json(r));
      records.push_back(std::move(r));
    }
    append(annotations_path(), lines);
    for (auto& r : records) apply_annotation(r);
    return summarize(it->second);
  }

  std::vector<TaskSummary> list(std::optional<TaskStatus> status = std::nullopt,
                                std::optional<std::string> annotator = std::nullopt) const {
    std::shared_lock lock(mu_);
    std::vector<TaskSummary> out;
    for (const auto& id : order_) {
      const Task& task = tasks_.at(id);
      TaskSummary s = summarize(task);
      if (status && s.status != *status) continue;
      if (annotator && !s.labeled.count(*annotator)) continue;
      out.push_back(std::move(s));
    }
    return out;
  }

  std::optional<TaskSummary> summary(const std::string& conversation_id) const {
    std::shared_lock lock(mu_);
    const auto it = tasks_.find(conversation_id);
    if (it == tasks_.end()) return std::nullopt;
    return summarize(it->second);
  }

  std::optional<Conversation> conversation(const std::string& conversation_id) const {
    std::shared_lock lock(mu_);
    const auto it = tasks_.find(conversation_id);
    if (it == tasks_.end()) return std::nullopt;
    return it->second.conversation;
  }

  // Latest label per turn for one annotator.
  std::map<std::size_t, FineLabel> labels_of(const std::string& conversation_id, const std::string& annotator) const {
    std::shared_lock lock(mu_);
    const auto it = tasks_.find(conversation_id);
    if (it == tasks_.end()) return {};
    const auto a = it->second.labels.find(annotator);
    if (a == it->second.labels.end()) return {};
    std::map<std::size_t, FineLabel> out;
    for (const auto& [turn, rec] : a->second) out[turn] = rec.label;
    return out;
  }

  // Kappa over every turn of the conversations both annotators completed.
  AgreementResult agreement(const std::string& a, const std::string& b, LabelSet set) const {
    std::shared_lock lock(mu_);
    std::vector<ProjectedLabel> xs, ys;
    std::size_t convs = 0;
    for (const auto& id : order_) {
      const Task& task = tasks_.at(id);
      if (!completed(task, a) || !completed(task, b)) continue;
      ++convs;
      for (const auto& [turn, rec] : task.labels.at(a)) {
        xs.push_back(project(rec.label, set));
        ys.push_back(project(task.labels.at(b).at(turn).label, set));
      }
    }
    if (xs.empty()) {
      throw StoreError(409, ErrorCode::kEmptyInput, "annotators '" + a + "' and '" + b + "' share no completed conversation");
    }
    return {cohens_kappa(xs, ys), xs.size(), convs};
  }

  // Gold label vectors for complete tasks, in task order.
  std::vector<LabelVector> gold() const {
    std::shared_lock lock(mu_);
    std::vector<LabelVector> out;
    for (const auto& id : order_) {
      const Task& task = tasks_.at(id);
      const TaskSummary s = summarize(task);
      if (s.status != TaskStatus::kComplete) continue;
      std::string chosen = s.completed_by.front();
      if (options_.primary_annotator &&
          std::find(s.completed_by.begin(), s.completed_by.end(), *options_.primary_annotator) != s.completed_by.end()) {
        chosen = *options_.primary_annotator;
      }
      std::vector<FineLabel> labels;
      for (const auto& [turn, rec] : task.labels.at(chosen)) labels.push_back(rec.label);
      out.push_back(LabelVector::for_conversation(task.conversation, std::move(labels), LabelOrigin::kHuman));
    }
    return out;
  }

  std::string export_jsonl() const {
    std::string out;
    for (const auto& v : gold()) out += to_line(v);
    return out;
  }

  // Loads label vectors as submissions by `annotator_id`.
  void import_labels(const std::vector<LabelVector>& vectors, const std::string& annotator_id) {
    for (const auto& v : vectors) {
      std::vector<std::pair<std::size_t, FineLabel>> labels;
      for (std::size_t k = 0; k < v.size(); ++k) labels.emplace_back(k + 2, v.labels()[k]);
      submit(v.conversation_id(), annotator_id, labels);
    }
  }

  // Rewrites the annotation log keeping only the winning revisions.
  void compact() {
    std::unique_lock lock(mu_);
    std::string content;
    for (const auto& id : order_) {
      for (const auto& [annotator, turns] : tasks_.at(id).labels) {
        for (const auto& [turn, rec] : turns) content += dump_line(to_json(rec));
      }
    }
    const auto tmp = annotations_path().string() + ".compact";
    write_file(tmp, content);
    std::filesystem::rename(tmp, annotations_path());
  }

 private:
  struct Task {
    Conversation conversation;
    std::size_t required = 1;
    std::map<std::string, std::map<std::size_t, AnnotationRecord>> labels;
  };
  using RevisionKey = std::tuple<std::string, std::string, std::size_t>;

  void replay() {
    if (std::filesystem::exists(tasks_path())) {
      for (const json& obj : read_jsonl(tasks_path())) {
        Conversation conv = conversation_from_json(obj.at("conversation"));
        if (!tasks_.count(conv.id())) apply_task(conv, obj.value("required_annotators", std::size_t{1}));
      }
    }
    if (std::filesystem::exists(annotations_path())) {
      for (const json& obj : read_jsonl(annotations_path())) {
        const auto label = parse_fine_label(obj.at("label").get<std::string>());
        if (!label) fail(ErrorCode::kUnknownPattern, "bad label in annotation log");
        AnnotationRecord r{obj.at("conversation_id").get<std::string>(), obj.at("annotator_id").get<std::string>(),
                           obj.at("turn_index").get<std::size_t>(), *label, obj.value("submitted_at", ""),
                           obj.at("revision").get<std::uint64_t>()};
        if (!tasks_.count(r.conversation_id)) continue;
        auto& rev = revisions_[{r.conversation_id, r.annotator_id, r.turn_index}];
        rev = std::max(rev, r.revision);
        apply_annotation(r);
      }
    }
  }

  void apply_task(const Conversation& conv, std::size_t required) {
    tasks_.emplace(conv.id(), Task{conv, required, {}});
    order_.push_back(conv.id());
  }

  void apply_annotation(const AnnotationRecord& r) {
    auto& slot = tasks_.at(r.conversation_id).labels[r.annotator_id];
    const auto it = slot.find(r.turn_index);
    if (it == slot.end() || it->second.revision <= r.revision) slot[r.turn_index] = r;
  }

  std::uint64_t next_revision(const std::string& conv, const std::string& annotator, std::size_t turn) const {
    const auto it = revisions_.find({conv, annotator, turn});
    return it == revisions_.end() ? 1 : it->second + 1;
  }

  static bool completed(const Task& task, const std::string& annotator) {
    const auto it = task.labels.find(annotator);
    return it != task.labels.end() && it->second.size() == task.conversation.user_turn_count() - 1;
  }

  TaskSummary summarize(const Task& task) const {
    TaskSummary s;
    s.conversation_id = task.conversation.id();
    s.required_annotators = task.required;
    s.label_slots = task.conversation.user_turn_count() - 1;
    for (const auto& [annotator, turns] : task.labels) {
      s.labeled[annotator] = turns.size();
      if (turns.size() == s.label_slots) s.completed_by.push_back(annotator);
    }
    if (s.labeled.empty()) s.status = TaskStatus::kUnassigned;
    else if (s.completed_by.size() >= task.required) s.status = TaskStatus::kComplete;
    else s.status = TaskStatus::kInProgress;
    return s;
  }

  void append(const std::filesystem::path& path, const std::string& lines) {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    out << lines;
    out.flush();
    if (!out) fail(ErrorCode::kIoError, "append to " + path.string() + " failed");
  }

  std::filesystem::path dir_;
  Options options_;
  mutable std::shared_mutex mu_;
  std::map<std::string, Task> tasks_;
  std::vector<std::string> order_;
  std::map<RevisionKey, std::uint64_t> revisions_;
};

inline ojson to_json(const TaskSummary& s) {
  ojson out;
  out["conversation_id"] = s.conversation_id;
  out["status"] = std::string(to_string(s.status));
  out["required_annotators"] = s.required_annotators;
  out["label_slots"] = s.label_slots;
  ojson progress = ojson::object();
  for (const auto& [a, c] : s.labeled) progress[a] = c;
  out["progress"] = std::move(progress);
  out["completed_by"] = s.completed_by;
  return out;
}

}  // namespace fbmine

#endif  // FBMINE_ANNOTATE_HPP_
