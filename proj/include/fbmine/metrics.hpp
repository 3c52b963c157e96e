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

#ifndef FBMINE_METRICS_HPP_
#define FBMINE_METRICS_HPP_

// Detection-quality metrics. All rates are percentages in [0, 100].

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "fbmine/core.hpp"
#include "fbmine/jsonl.hpp"

namespace fbmine {

// A rate whose denominator may be zero. get() raises DegenerateDenominator
// instead of producing NaN.
struct Rate {
  std::optional<double> value;
  std::string_view what = "rate";

  bool degenerate() const noexcept { return !value.has_value(); }
  double get() const {
    if (!value) fail(ErrorCode::kDegenerateDenominator, std::string(what) + " has a zero denominator");
    return *value;
  }
};

inline Rate percent_of(double numerator, double denominator, std::string_view what) {
  if (denominator == 0.0) return {std::nullopt, what};
  return {100.0 * numerator / denominator, what};
}

// Binary confusion cells as percentages of all items; FEEDBACK is positive.
struct ConfusionProportions {
  double tp = 0;
  double fp = 0;
  double fn = 0;
  double tn = 0;

  static ConfusionProportions from_counts(std::size_t tp, std::size_t fp, std::size_t fn,
                                          std::size_t tn) {
    const double total = static_cast<double>(tp + fp + fn + tn);
    if (total == 0) fail(ErrorCode::kEmptyInput, "no items in confusion counts");
    return {100.0 * tp / total, 100.0 * fp / total, 100.0 * fn / total, 100.0 * tn / total};
  }

  void validate() const {
    if (tp < 0 || fp < 0 || fn < 0 || tn < 0) {
      fail(ErrorCode::kInvalidArgument, "confusion proportions must be non-negative");
    }
  }
};

struct ConfusionRates {
  double accuracy = 0;
  Rate precision;
  Rate recall;
};

inline ConfusionRates metrics_from_confusion(const ConfusionProportions& c) {
  c.validate();
  return {c.tp + c.tn, percent_of(c.tp, c.tp + c.fp, "precision"),
          percent_of(c.tp, c.tp + c.fn, "recall")};
}

struct ClassScores {
  ProjectedLabel label;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::size_t support = 0;
  // Set when a 0/0 was replaced by 0.
  bool zero_division = false;
};

struct ClassReport {
  LabelSet set = LabelSet::kFine;
  std::size_t total = 0;
  double accuracy = 0;
  std::vector<ClassScores> classes;
  double macro_precision = 0, macro_recall = 0, macro_f1 = 0;
  double weighted_precision = 0, weighted_recall = 0, weighted_f1 = 0;
  // confusion[gold][pred] in label-code order over the whole label set.
  std::vector<std::vector<std::size_t>> confusion;
  // Only for the binary set.
  std::optional<ConfusionProportions> binary;
};

// Item-level report over already projected label sequences.
inline ClassReport classification_report(std::span<const ProjectedLabel> gold,
                                         std::span<const ProjectedLabel> pred, LabelSet set) {
  if (gold.size() != pred.size()) fail(ErrorCode::kLengthMismatch, "gold and pred differ in length");
  if (gold.empty()) fail(ErrorCode::kEmptyInput, "no items to score");
  const std::size_t k = labels_of(set).size();
  ClassReport report;
  report.set = set;
  report.total = gold.size();
  report.confusion.assign(k, std::vector<std::size_t>(k, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto g = project(gold[i], set);
    const auto p = project(pred[i], set);
    ++report.confusion[g.code][p.code];
    if (g == p) ++correct;
  }
  report.accuracy = 100.0 * correct / report.total;

  for (std::size_t c = 0; c < k; ++c) {
    std::size_t support = 0, predicted = 0;
    for (std::size_t j = 0; j < k; ++j) {
      support += report.confusion[c][j];
      predicted += report.confusion[j][c];
    }
    if (support == 0 && predicted == 0) continue;
    const double tp = static_cast<double>(report.confusion[c][c]);
    ClassScores s;
    s.label = {set, static_cast<std::uint8_t>(c)};
    s.support = support;
    if (predicted == 0) s.zero_division = true;
    else s.precision = 100.0 * tp / predicted;
    if (support == 0) s.zero_division = true;
    else s.recall = 100.0 * tp / support;
    if (s.precision + s.recall == 0) {
      s.zero_division = s.zero_division || tp == 0;
      s.f1 = 0;
    } else {
      s.f1 = 2 * s.precision * s.recall / (s.precision + s.recall);
    }
    report.classes.push_back(s);
  }
  const double n_classes = static_cast<double>(report.classes.size());
  for (const auto& s : report.classes) {
    report.macro_precision += s.precision / n_classes;
    report.macro_recall += s.recall / n_classes;
    report.macro_f1 += s.f1 / n_classes;
    const double w = static_cast<double>(s.support) / report.total;
    report.weighted_precision += s.precision * w;
    report.weighted_recall += s.recall * w;
    report.weighted_f1 += s.f1 * w;
  }
  if (set == LabelSet::kBinary) {
    const auto fb = static_cast<std::size_t>(BinaryLabel::kFeedback);
    const auto no = static_cast<std::size_t>(BinaryLabel::kNoFeedback);
    report.binary = ConfusionProportions::from_counts(report.confusion[fb][fb], report.confusion[no][fb],
                                                      report.confusion[fb][no], report.confusion[no][no]);
  }
  return report;
}

// Conversation-level entry point: aligns vectors by id, projects both sides
// to `set`, and scores at the turn level.
inline ClassReport classification_report(const std::vector<LabelVector>& gold,
                                         const std::vector<LabelVector>& pred, LabelSet set) {
  std::map<std::string, const LabelVector*> by_id;
  for (const auto& p : pred) {
    if (!by_id.emplace(p.conversation_id(), &p).second) {
      fail(ErrorCode::kIdMismatch, "duplicate prediction for '" + p.conversation_id() + "'");
    }
  }
  if (by_id.size() != gold.size()) fail(ErrorCode::kIdMismatch, "gold and pred cover different conversations");
  std::vector<const LabelVector*> golds;
  for (const auto& g : gold) golds.push_back(&g);
  // Turn order is fixed by id so the report does not depend on input order.
  std::sort(golds.begin(), golds.end(),
            [](auto* a, auto* b) { return a->conversation_id() < b->conversation_id(); });
  std::vector<ProjectedLabel> g_items, p_items;
  for (const LabelVector* g : golds) {
    const auto it = by_id.find(g->conversation_id());
    if (it == by_id.end()) fail(ErrorCode::kIdMismatch, "no prediction for '" + g->conversation_id() + "'");
    if (it->second->size() != g->size()) {
      fail(ErrorCode::kLengthMismatch, "label count differs for '" + g->conversation_id() + "'");
    }
    for (std::size_t k = 0; k < g->size(); ++k) {
      g_items.push_back(project(g->labels()[k], set));
      p_items.push_back(project(it->second->labels()[k], set));
    }
  }
  return classification_report(std::span<const ProjectedLabel>(g_items),
                               std::span<const ProjectedLabel>(p_items), set);
}

inline ojson to_json(const ClassReport& r) {
  ojson out;
  out["label_set"] = std::string(to_string(r.set));
  out["total"] = r.total;
  out["accuracy"] = r.accuracy;
  ojson classes = ojson::array();
  for (const auto& s : r.classes) {
    ojson c;
    c["label"] = std::string(s.label.name());
    c["precision"] = s.precision;
    c["recall"] = s.recall;
    c["f1"] = s.f1;
    c["support"] = s.support;
    c["zero_division"] = s.zero_division;
    classes.push_back(std::move(c));
  }
  out["classes"] = std::move(classes);
  out["macro_avg"] = ojson{{"precision", r.macro_precision}, {"recall", r.macro_recall}, {"f1", r.macro_f1}};
  out["weighted_avg"] =
      ojson{{"precision", r.weighted_precision}, {"recall", r.weighted_recall}, {"f1", r.weighted_f1}};
  ojson matrix = ojson::array();
  for (const auto& row : r.confusion) matrix.push_back(row);
  out["confusion"] = std::move(matrix);
  if (r.binary) {
    const auto rates = metrics_from_confusion(*r.binary);
    out["binary"] = ojson{{"true_positives", r.binary->tp},
                          {"false_positives", r.binary->fp},
                          {"false_negatives", r.binary->fn},
                          {"true_negatives", r.binary->tn},
                          {"precision", rates.precision.value ? ojson(*rates.precision.value) : ojson(nullptr)},
                          {"recall", rates.recall.value ? ojson(*rates.recall.value) : ojson(nullptr)}};
  }
  return out;
}

inline std::string format_table(const ClassReport& r) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-28s %10s %10s %10s %8s\n", "Label", "Precision", "Recall", "F1", "Support");
  out += buf;
  for (const auto& s : r.classes) {
    std::snprintf(buf, sizeof buf, "%-28s %10.2f %10.2f %10.2f %8zu%s\n", std::string(s.label.name()).c_str(),
                  s.precision, s.recall, s.f1, s.support, s.zero_division ? " *" : "");
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "%-28s %10s %10s %10.2f %8zu\n", "Accuracy", "", "", r.accuracy, r.total);
  out += buf;
  std::snprintf(buf, sizeof buf, "%-28s %10.2f %10.2f %10.2f %8zu\n", "Macro avg", r.macro_precision,
                r.macro_recall, r.macro_f1, r.total);
  out += buf;
  std::snprintf(buf, sizeof buf, "%-28s %10.2f %10.2f %10.2f %8zu\n", "Weighted avg", r.weighted_precision,
                r.weighted_recall, r.weighted_f1, r.total);
  out += buf;
  if (r.binary) {
    std::snprintf(buf, sizeof buf,
                  "\nFalse positives %6.2f\nFalse negatives %6.2f\nTrue positives  %6.2f\nTrue negatives  %6.2f\n",
                  r.binary->fp, r.binary->fn, r.binary->tp, r.binary->tn);
    out += buf;
  }
  return out;
}

// Cohen's kappa with expected agreement from the product of marginals.
template <typename T>
double cohens_kappa(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) fail(ErrorCode::kLengthMismatch, "annotation sequences differ in length");
  if (a.empty()) fail(ErrorCode::kEmptyInput, "no items for kappa");
  const double n = static_cast<double>(a.size());
  std::map<T, std::pair<double, double>> marginals;
  double agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == b[i]) agree += 1;
    marginals[a[i]].first += 1;
    marginals[b[i]].second += 1;
  }
  const double p_o = agree / n;
  double p_e = 0;
  for (const auto& [label, counts] : marginals) p_e += (counts.first / n) * (counts.second / n);
  if (p_e >= 1.0) return 1.0;  // both annotators used one identical label throughout
  return (p_o - p_e) / (1.0 - p_e);
}

template <typename T>
double cohens_kappa(const std::vector<T>& a, const std::vector<T>& b) {
  return cohens_kappa(std::span<const T>(a), std::span<const T>(b));
}

struct TTestResult {
  double t = 0;
  double p = 1;
  std::size_t df = 0;
};

// Two-sided paired t-test on x - y.
inline TTestResult paired_t_test(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail(ErrorCode::kLengthMismatch, "paired samples differ in length");
  if (x.size() < 2) fail(ErrorCode::kEmptyInput, "paired t-test needs at least two pairs");
  const std::size_t n = x.size();
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = x[i] - y[i];
  const double mean = std::accumulate(diff.begin(), diff.end(), 0.0) / n;
  double ss = 0;
  for (double d : diff) ss += (d - mean) * (d - mean);
  const std::size_t df = n - 1;
  if (std::all_of(diff.begin(), diff.end(), [](double d) { return d == 0.0; })) return {0.0, 1.0, df};
  const double var = ss / df;
  if (var <= 0 || std::all_of(diff.begin(), diff.end(), [&](double d) { return d == diff.front(); })) {
    fail(ErrorCode::kZeroVariance, "all paired differences are identical");
  }
  const double t = mean / std::sqrt(var / n);
  const boost::math::students_t dist(static_cast<double>(df));
  const double p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
  return {t, std::min(1.0, p), df};
}

inline TTestResult paired_t_test(const std::vector<double>& x, const std::vector<double>& y) {
  return paired_t_test(std::span<const double>(x), std::span<const double>(y));
}

}  // namespace fbmine

#endif  // FBMINE_METRICS_HPP_
