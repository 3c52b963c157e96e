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

#ifndef FBMINE_LABELS_IO_HPP_
#define FBMINE_LABELS_IO_HPP_

// Label-vector JSONL, shared by detector output, human gold exports and the
// annotation server:
//   {"conversation_id": str, "origin": "human"|"model"|"rule", "labels": [FineLabel name, ...]}

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fbmine/core.hpp"
#include "fbmine/jsonl.hpp"

namespace fbmine {

inline ojson to_json(const LabelVector& labels) {
  ojson out;
  out["conversation_id"] = labels.conversation_id();
  out["origin"] = std::string(to_string(labels.origin()));
  ojson arr = ojson::array();
  for (FineLabel l : labels.labels()) arr.push_back(std::string(to_string(l)));
  out["labels"] = std::move(arr);
  return out;
}

inline std::string to_line(const LabelVector& labels) { return dump_line(to_json(labels)); }

inline LabelVector label_vector_from_json(const json& obj) {
  if (!obj.is_object() || !obj.contains("conversation_id") || !obj.contains("labels") ||
      !obj["labels"].is_array() || !obj["conversation_id"].is_string()) {
    fail(ErrorCode::kMalformedJson, "label record needs conversation_id and labels");
  }
  LabelOrigin origin = LabelOrigin::kModel;
  if (obj.contains("origin")) {
    const auto parsed = parse_origin(obj["origin"].get<std::string>());
    if (!parsed) fail(ErrorCode::kMalformedJson, "unknown origin");
    origin = *parsed;
  }
  std::vector<FineLabel> labels;
  for (const auto& item : obj["labels"]) {
    if (!item.is_string()) fail(ErrorCode::kMalformedJson, "label is not a string");
    const auto label = parse_fine_label(item.get<std::string>());
    if (!label) fail(ErrorCode::kUnknownPattern, "unknown label '" + item.get<std::string>() + "'");
    labels.push_back(*label);
  }
  return LabelVector(obj["conversation_id"].get<std::string>(), std::move(labels), origin);
}

inline std::vector<LabelVector> read_label_file(const std::filesystem::path& path) {
  std::vector<LabelVector> out;
  for (const json& obj : read_jsonl(path)) out.push_back(label_vector_from_json(obj));
  return out;
}

inline void write_label_file(const std::filesystem::path& path,
                             const std::vector<LabelVector>& vectors) {
  std::string content;
  for (const auto& v : vectors) content += to_line(v);
  write_file(path, content);
}

inline std::map<std::string, LabelVector> index_by_id(const std::vector<LabelVector>& vectors) {
  std::map<std::string, LabelVector> out;
  for (const auto& v : vectors) {
    if (!out.emplace(v.conversation_id(), v).second) {
      fail(ErrorCode::kIdMismatch, "duplicate labels for '" + v.conversation_id() + "'");
    }
  }
  return out;
}

}  // namespace fbmine

#endif  // FBMINE_LABELS_IO_HPP_
