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

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "fbmine/metrics.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace fbmine {
namespace {

using testing::make_conv_n;

LabelVector vec(const std::string& id, std::vector<FineLabel> labels) {
  return LabelVector(id, std::move(labels), LabelOrigin::kHuman);
}

TEST(ConfusionTest, ReproducesLowPrecisionRow) {
  const auto r = metrics_from_confusion({41.38, 7.76, 50.86, 0.00});
  EXPECT_NEAR(r.accuracy, 41.38, 0.05);
  EXPECT_NEAR(r.recall.get(), 44.86, 0.05);
  EXPECT_NEAR(r.precision.get(), 84.21, 0.05);
}

TEST(ConfusionTest, ReproducesZeroFalsePositiveRow) {
  const auto r = metrics_from_confusion({42.29, 0.00, 18.86, 38.86});
  EXPECT_NEAR(r.accuracy, 81.15, 0.05);
  EXPECT_NEAR(r.recall.get(), 69.16, 0.05);
  EXPECT_NEAR(r.precision.get(), 100.0, 0.05);
}

TEST(ConfusionTest, ZeroPredictedPositivesIsDegenerate) {
  const auto r = metrics_from_confusion({0, 0, 100, 0});
  EXPECT_DOUBLE_EQ(r.recall.get(), 0.0);
  EXPECT_TRUE(r.precision.degenerate());
  try {
    r.precision.get();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateDenominator);
  }
}

TEST(ConfusionTest, FromCountsSumsToHundred) {
  const auto c = ConfusionProportions::from_counts(3, 1, 2, 7);
  EXPECT_NEAR(c.tp + c.fp + c.fn + c.tn, 100.0, 1e-6);
  EXPECT_THROW(ConfusionProportions::from_counts(0, 0, 0, 0), Error);
  EXPECT_THROW(metrics_from_confusion({-1, 0, 0, 101}), Error);
}

TEST(ReportTest, PerfectPrediction) {
  const std::vector<LabelVector> gold = {vec("a", {FineLabel::kPos, FineLabel::kNegClarify}),
                                         vec("b", {FineLabel::kNeu})};
  for (LabelSet set : {LabelSet::kBinary, LabelSet::kThreeWay, LabelSet::kFine}) {
    const auto r = classification_report(gold, gold, set);
    EXPECT_DOUBLE_EQ(r.accuracy, 100.0);
    for (const auto& c : r.classes) EXPECT_DOUBLE_EQ(c.f1, 100.0) << c.label.name();
  }
}

TEST(ReportTest, HandCountedThreeWay) {
  const auto r = classification_report({vec("c", {FineLabel::kNegRephrase, FineLabel::kNeu, FineLabel::kPos})},
                                       {vec("c", {FineLabel::kNegClarify, FineLabel::kNegRephrase, FineLabel::kPos})},
                                       LabelSet::kThreeWay);
  EXPECT_NEAR(r.accuracy, 66.67, 0.005);
  EXPECT_EQ(r.total, 3u);
}

TEST(ReportTest, IdAndLengthErrors) {
  try {
    classification_report({vec("a", {FineLabel::kNeu})}, {vec("b", {FineLabel::kNeu})}, LabelSet::kBinary);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIdMismatch);
  }
  try {
    classification_report({vec("a", {FineLabel::kNeu})}, {vec("a", {FineLabel::kNeu, FineLabel::kPos})},
                          LabelSet::kBinary);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kLengthMismatch);
  }
}

TEST(ReportTest, BinaryProportionsFromFineInputs) {
  // gold FB FB NEU NEU, pred FB NEU FB NEU -> tp 25, fn 25, fp 25, tn 25
  const auto r = classification_report({vec("a", {FineLabel::kPos, FineLabel::kNegRephrase, FineLabel::kNeu,
                                                  FineLabel::kNeu})},
                                       {vec("a", {FineLabel::kNegClarify, FineLabel::kNeu, FineLabel::kPos,
                                                  FineLabel::kNeu})},
                                       LabelSet::kBinary);
  ASSERT_TRUE(r.binary.has_value());
  EXPECT_DOUBLE_EQ(r.binary->tp, 25.0);
  EXPECT_DOUBLE_EQ(r.binary->fp, 25.0);
  EXPECT_DOUBLE_EQ(r.binary->fn, 25.0);
  EXPECT_DOUBLE_EQ(r.binary->tn, 25.0);
  EXPECT_DOUBLE_EQ(r.accuracy, 50.0);
}

TEST(ReportTest, ZeroDivisionFlagged) {
  // NEU never predicted, never gold: absent. POS predicted but never gold.
  const auto r = classification_report({vec("a", {FineLabel::kNegRephrase})}, {vec("a", {FineLabel::kPos})},
                                       LabelSet::kThreeWay);
  bool flagged = false;
  for (const auto& c : r.classes) flagged = flagged || c.zero_division;
  EXPECT_TRUE(flagged);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.0);
}

class ReportPropertyTest : public ::testing::Test {
 protected:
  std::mt19937_64 rng{11};

  std::vector<LabelVector> random_vectors(std::size_t count, std::vector<std::size_t>* lengths) {
    std::vector<LabelVector> out;
    for (std::size_t c = 0; c < count; ++c) {
      const std::size_t len = lengths ? (*lengths)[c] : 1 + rng() % 6;
      if (!lengths) len_.push_back(len);
      std::vector<FineLabel> labels;
      for (std::size_t k = 0; k < len; ++k) labels.push_back(kAllFineLabels[rng() % 6]);
      out.push_back(vec("conv-" + std::to_string(c), std::move(labels)));
    }
    return out;
  }
  std::vector<std::size_t> len_;
};

TEST_F(ReportPropertyTest, InvariantsOnRandomInputs) {
  for (int trial = 0; trial < 100; ++trial) {
    len_.clear();
    const std::size_t count = 1 + rng() % 8;
    auto gold = random_vectors(count, nullptr);
    auto pred = random_vectors(count, &len_);
    for (LabelSet set : {LabelSet::kBinary, LabelSet::kThreeWay, LabelSet::kFine}) {
      const auto r = classification_report(gold, pred, set);
      // accuracy == trace / total, counted independently
      std::size_t agree = 0, total = 0;
      for (std::size_t c = 0; c < count; ++c) {
        for (std::size_t k = 0; k < gold[c].size(); ++k, ++total) {
          agree += project(gold[c].labels()[k], set) == project(pred[c].labels()[k], set);
        }
      }
      EXPECT_NEAR(r.accuracy, 100.0 * agree / total, 1e-9);
      std::size_t trace = 0;
      for (std::size_t i = 0; i < r.confusion.size(); ++i) trace += r.confusion[i][i];
      EXPECT_EQ(trace, agree);
      // weighted average recomputable from per-class values
      double wr = 0;
      std::size_t support = 0;
      for (const auto& c : r.classes) {
        wr += c.recall * c.support;
        support += c.support;
      }
      EXPECT_EQ(support, total);
      EXPECT_NEAR(r.weighted_recall, wr / support, 1e-9);
      // ordering invariance
      auto g2 = gold, p2 = pred;
      std::reverse(g2.begin(), g2.end());
      std::shuffle(p2.begin(), p2.end(), rng);
      const auto r2 = classification_report(g2, p2, set);
      EXPECT_EQ(r2.confusion, r.confusion);
      EXPECT_DOUBLE_EQ(r2.macro_f1, r.macro_f1);
    }
    // Binary on fine inputs equals binary on pre-projected three-way inputs.
    const auto fine = classification_report(gold, pred, LabelSet::kBinary);
    std::vector<ProjectedLabel> g3, p3;
    for (std::size_t c = 0; c < count; ++c) {
      for (std::size_t k = 0; k < gold[c].size(); ++k) {
        g3.push_back(project(gold[c].labels()[k], LabelSet::kThreeWay));
        p3.push_back(project(pred[c].labels()[k], LabelSet::kThreeWay));
      }
    }
    // Same turn order as the id-sorted path: ids sort lexicographically, so
    // compare only order-free quantities.
    const auto pre = classification_report(std::span<const ProjectedLabel>(g3), std::span<const ProjectedLabel>(p3),
                                           LabelSet::kBinary);
    EXPECT_EQ(pre.confusion, fine.confusion);
  }
}

TEST(KappaTest, HandExample) {
  const std::vector<std::string> a = {"FB", "FB", "NEU", "NEU"};
  const std::vector<std::string> b = {"FB", "NEU", "NEU", "NEU"};
  EXPECT_DOUBLE_EQ(cohens_kappa(a, b), 0.5);
}

TEST(KappaTest, IdenticalIsOne) {
  EXPECT_DOUBLE_EQ(cohens_kappa(std::vector<int>{1, 1, 1}, std::vector<int>{1, 1, 1}), 1.0);
  EXPECT_DOUBLE_EQ(cohens_kappa(std::vector<int>{1, 2, 3}, std::vector<int>{1, 2, 3}), 1.0);
}

TEST(KappaTest, Errors) {
  EXPECT_THROW(cohens_kappa(std::vector<int>{1}, std::vector<int>{1, 2}), Error);
  EXPECT_THROW(cohens_kappa(std::vector<int>{}, std::vector<int>{}), Error);
}

TEST(KappaTest, MatchesOracleSymmetricAndBounded) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t len = 1 + rng() % 10;
    const int alphabet = 1 + static_cast<int>(rng() % 6);
    std::vector<int> a(len), b(len);
    for (auto& v : a) v = static_cast<int>(rng() % alphabet);
    for (auto& v : b) v = static_cast<int>(rng() % alphabet);
    const double k = cohens_kappa(a, b);
    EXPECT_NEAR(k, oracle::kappa(a, b), 1e-9);
    EXPECT_DOUBLE_EQ(k, cohens_kappa(b, a));
    EXPECT_GE(k, -1.0 - 1e-12);
    EXPECT_LE(k, 1.0 + 1e-12);
    EXPECT_DOUBLE_EQ(cohens_kappa(a, a), 1.0);
  }
}

TEST(TTestTest, IdenticalSamples) {
  const auto r = paired_t_test(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3});
  EXPECT_DOUBLE_EQ(r.t, 0.0);
  EXPECT_DOUBLE_EQ(r.p, 1.0);
  EXPECT_EQ(r.df, 2u);
}

TEST(TTestTest, FrozenReferenceValues) {
  for (const auto& c : oracle::frozen_t_tests()) {
    const auto r = paired_t_test(c.x, c.y);
    EXPECT_NEAR(r.t, c.t, 1e-9);
    EXPECT_NEAR(r.p, c.p, 1e-9);
    EXPECT_EQ(r.df, c.x.size() - 1);
  }
}

TEST(TTestTest, ConstantDifferenceHasZeroVariance) {
  try {
    paired_t_test(std::vector<double>{1, 2, 3}, std::vector<double>{2, 3, 4});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kZeroVariance);
  }
  EXPECT_THROW(paired_t_test(std::vector<double>{1}, std::vector<double>{1}), Error);
}

}  // namespace
}  // namespace fbmine
