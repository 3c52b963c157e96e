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

#ifndef FBMINE_JSONL_HPP_
#define FBMINE_JSONL_HPP_

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "fbmine/error.hpp"
#include "json.hpp"

namespace fbmine {

using json = nlohmann::json;
// Writers use insertion-ordered objects so field order in output files is
// fixed by the code, not by key sorting.
using ojson = nlohmann::ordered_json;

inline std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, "cannot open '" + path.string() + "' for reading");
  return in;
}

inline std::ofstream open_for_write(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIoError, "cannot open '" + path.string() + "' for writing");
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  auto in = open_for_read(path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  auto out = open_for_write(path);
  out << content;
  if (!out) fail(ErrorCode::kIoError, "short write to '" + path.string() + "'");
}

// Calls fn(line, line_number) for each non-blank line; line numbers are 1-based.
inline void for_each_line(std::istream& in,
                          const std::function<void(const std::string&, std::size_t)>& fn) {
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    fn(line, number);
  }
}

inline std::vector<json> read_jsonl(const std::filesystem::path& path) {
  auto in = open_for_read(path);
  std::vector<json> out;
  for_each_line(in, [&](const std::string& line, std::size_t number) {
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      fail(ErrorCode::kMalformedJson,
           path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  });
  return out;
}

inline std::string dump_line(const ojson& value) {
  return value.dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
}

}  // namespace fbmine

#endif  // FBMINE_JSONL_HPP_
