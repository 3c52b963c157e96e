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

// Independent reference implementations used to cross-check the library.
// They follow the textbook definitions directly and share no code with it.

#ifndef FBMINE_TESTS_ORACLES_HPP_
#define FBMINE_TESTS_ORACLES_HPP_

#include <set>
#include <string>
#include <vector>

#include "fbmine/core.hpp"

namespace fbmine::oracle {

// Frozen reference values from scipy.stats.ttest_rel (scipy 1.11).
struct FrozenTTest {
  std::vector<double> x, y;
  double t, p;
};

inline const std::vector<FrozenTTest>& frozen_t_tests() {
  static const std::vector<FrozenTTest> cases = {
      {{1, 2, 3, 4}, {1.5, 2.5, 2.5, 5.0}, -1.1920791213585396, 0.31893179191277526},
      {{0.1, 0.5, 0.9, 1.3, 2.0}, {0.3, 0.2, 1.4, 1.0, 2.8}, -0.8267673819143255, 0.45483468577959485},
  };
  return cases;
}

// Cohen's kappa straight from the definition, looping over the label
// alphabet instead of accumulating marginals.
inline double kappa(const std::vector<int>& a, const std::vector<int>& b) {
  const double n = static_cast<double>(a.size());
  std::set<int> alphabet(a.begin(), a.end());
  alphabet.insert(b.begin(), b.end());
  double observed = 0;
  for (std::size_t i = 0; i < a.size(); ++i) observed += (a[i] == b[i]) ? 1.0 : 0.0;
  observed /= n;
  double expected = 0;
  for (int label : alphabet) {
    double ca = 0, cb = 0;
    for (int v : a) ca += (v == label);
    for (int v : b) cb += (v == label);
    expected += (ca / n) * (cb / n);
  }
  if (expected == 1.0) return 1.0;
  return (observed - expected) / (1.0 - expected);
}

struct Window {
  std::size_t index;
  std::string u_i, m_i, u_next, m_next;
  FineLabel trigger;
};

// Every i in [1, n-1] whose window is complete, read off the flat turn list.
inline std::vector<Window> all_windows(const Conversation& conv, const std::vector<FineLabel>& labels) {
  std::vector<std::string> users, assistants;
  for (const Turn& t : conv.turns()) (t.role == Role::kUser ? users : assistants).push_back(t.content);
  std::vector<Window> out;
  for (std::size_t i = 1; i + 1 <= users.size(); ++i) {
    if (assistants.size() < i + 1) continue;
    out.push_back({i, users[i - 1], assistants[i - 1], users[i], assistants[i], labels[i - 1]});
  }
  return out;
}

// Winrate of A over B with ties counted as half, computed over raw pairs.
inline double split_winrate(const std::vector<double>& a, const std::vector<double>& b) {
  double points = 0;
  for (std::size_t i = 0; i < a.size(); ++i) points += a[i] > b[i] ? 1.0 : (a[i] == b[i] ? 0.5 : 0.0);
  return 100.0 * points / static_cast<double>(a.size());
}

}  // namespace fbmine::oracle

#endif  // FBMINE_TESTS_ORACLES_HPP_
