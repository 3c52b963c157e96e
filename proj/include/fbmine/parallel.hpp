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

#ifndef FBMINE_PARALLEL_HPP_
#define FBMINE_PARALLEL_HPP_

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <optional>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

#include "fbmine/error.hpp"

namespace fbmine {

// Result of one item in a batch: either a value or the error that item raised.
template <typename T>
struct Outcome {
  std::optional<T> value;
  std::optional<ErrorCode> code;
  std::string error;

  bool ok() const noexcept { return value.has_value(); }
};

// Applies fn to every item on up to `workers` threads. Results come back in
// input order; an exception thrown for one item is captured in its Outcome.
template <typename In, typename Fn>
auto parallel_map(const std::vector<In>& items, Fn fn, std::size_t workers)
    -> std::vector<Outcome<std::invoke_result_t<Fn&, const In&>>> {
  using Out = std::invoke_result_t<Fn&, const In&>;
  std::vector<Outcome<Out>> results(items.size());
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t i = next++; i < items.size(); i = next++) {
      try {
        results[i].value.emplace(fn(items[i]));
      } catch (const Error& e) {
        results[i].code = e.code();
        results[i].error = e.what();
      } catch (const std::exception& e) {
        results[i].code = ErrorCode::kInvalidArgument;
        results[i].error = e.what();
      }
    }
  };
  const std::size_t count = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(1, items.size()));
  if (count == 1) {
    work();
    return results;
  }
  std::vector<std::jthread> pool;
  pool.reserve(count);
  for (std::size_t t = 0; t < count; ++t) pool.emplace_back(work);
  pool.clear();  // joins
  return results;
}

}  // namespace fbmine

#endif  // FBMINE_PARALLEL_HPP_
