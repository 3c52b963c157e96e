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

#include <random>
#include <set>

#include "fbmine/analyze.hpp"
#include "fbmine/labels_io.hpp"
#include "test_support.hpp"

namespace fbmine {
namespace {

using testing::data_path;
using testing::FnChatModel;
using testing::make_conv;
using testing::make_conv_n;

LabelVector vec(const std::string& id, std::vector<FineLabel> labels) {
  return LabelVector(id, std::move(labels), LabelOrigin::kHuman);
}

TEST(TurnHistogramTest, DenseLmsysFixtureReproducesReferenceRow) {
  const auto h = turn_histogram(read_label_file(data_path("dense_gold_lmsys.labels.jsonl")), LabelSet::kFine);
  EXPECT_EQ(h.feedback.at(2), 43u);
  EXPECT_EQ(h.annotated.at(2), 74u);
  EXPECT_EQ(h.feedback.at(3), 26u);
  EXPECT_EQ(h.annotated.at(3), 32u);
  EXPECT_EQ(h.feedback.at(4), 13u);
  EXPECT_EQ(h.annotated.at(4), 17u);
  EXPECT_EQ(h.feedback.at(5), 24u);
  EXPECT_EQ(h.annotated.at(5), 25u);
}

TEST(TurnHistogramTest, AllNeutral) {
  const auto h = turn_histogram({vec("a", {FineLabel::kNeu, FineLabel::kNeu}), vec("b", {FineLabel::kNeu})},
                                LabelSet::kThreeWay);
  for (std::size_t b : kTurnBuckets) EXPECT_EQ(h.feedback.at(b), 0u);
  EXPECT_EQ(h.annotated.at(2), 2u);
  EXPECT_EQ(h.annotated.at(3), 1u);
  EXPECT_EQ(h.total_annotated(), 3u);
}

TEST(TurnHistogramTest, LateTurnsShareTheLastBucket) {
  const auto h = turn_histogram({vec("a", {FineLabel::kNegRephrase, FineLabel::kNeu, FineLabel::kNeu, FineLabel::kPos,
                                           FineLabel::kNegClarify})},
                                LabelSet::kThreeWay);
  EXPECT_EQ(h.annotated.at(5), 2u);
  EXPECT_EQ(h.feedback.at(5), 2u);
  EXPECT_EQ(h.feedback.at(2), 1u);
  const auto pos = ProjectedLabel::of(ThreeWayLabel::kPos).code;
  const auto neg = ProjectedLabel::of(ThreeWayLabel::kNeg).code;
  EXPECT_EQ(h.counts.at(5).at(pos), 1u);
  EXPECT_EQ(h.counts.at(5).at(neg), 1u);
}

TEST(TurnHistogramTest, TotalsMatchLabelCounts) {
  std::mt19937_64 rng(3);
  std::vector<LabelVector> vectors;
  std::size_t expected = 0;
  for (int c = 0; c < 50; ++c) {
    const auto conv = testing::random_conv(rng, "c" + std::to_string(c));
    vectors.push_back(testing::random_labels(rng, conv));
    expected += conv.user_turn_count() - 1;
  }
  const auto h = turn_histogram(vectors, LabelSet::kFine);
  EXPECT_EQ(h.total_annotated(), expected);
  for (std::size_t b : kTurnBuckets) EXPECT_LE(h.feedback.at(b), h.annotated.at(b));
}

class GroupSampleTest : public ::testing::Test {
 protected:
  // Three conversations; 3 turns elicit NEG, 2 elicit POS, 9 user turns total.
  void SetUp() override {
    corpus = {make_conv_n("a", 3), make_conv_n("b", 3), make_conv_n("c", 3)};
    labels.insert_or_assign("a", vec("a", {FineLabel::kNegRephrase, FineLabel::kPos}));
    labels.insert_or_assign("b", vec("b", {FineLabel::kNegClarify, FineLabel::kNeu}));
    labels.insert_or_assign("c", vec("c", {FineLabel::kPos, FineLabel::kNegAwareWithCorrection}));
  }
  std::vector<Conversation> corpus;
  std::map<std::string, LabelVector> labels;
};

TEST_F(GroupSampleTest, InsufficientPopulationIsFlagged) {
  const auto g = sample_groups(corpus, labels, 5, 1);
  EXPECT_EQ(g.neg.utterances.size(), 3u);
  EXPECT_TRUE(g.neg.insufficient);
  EXPECT_EQ(g.pos.utterances.size(), 2u);
  EXPECT_EQ(g.rand.utterances.size(), 5u);
  EXPECT_FALSE(g.rand.insufficient);
  EXPECT_EQ(g.rand.population, 9u);
  for (const auto& u : g.neg.utterances) {
    EXPECT_EQ(to_three_way(labels.at(u.conversation_id).of_user_turn(u.turn_index + 1)), ThreeWayLabel::kNeg);
  }
}

TEST_F(GroupSampleTest, ZeroK) {
  const auto g = sample_groups(corpus, labels, 0, 1);
  EXPECT_TRUE(g.neg.utterances.empty());
  EXPECT_TRUE(g.pos.utterances.empty());
  EXPECT_TRUE(g.rand.utterances.empty());
}

TEST_F(GroupSampleTest, DeterministicDisjointAndDuplicateFree) {
  const auto a = sample_groups(corpus, labels, 4, 77);
  const auto b = sample_groups(corpus, labels, 4, 77);
  EXPECT_EQ(a.neg.utterances, b.neg.utterances);
  EXPECT_EQ(a.pos.utterances, b.pos.utterances);
  EXPECT_EQ(a.rand.utterances, b.rand.utterances);
  std::set<std::pair<std::string, std::size_t>> neg, pos;
  for (const auto& u : a.neg.utterances) EXPECT_TRUE(neg.insert({u.conversation_id, u.turn_index}).second);
  for (const auto& u : a.pos.utterances) EXPECT_TRUE(pos.insert({u.conversation_id, u.turn_index}).second);
  for (const auto& key : neg) EXPECT_FALSE(pos.contains(key));
  std::set<std::pair<std::string, std::size_t>> rnd;
  for (const auto& u : a.rand.utterances) EXPECT_TRUE(rnd.insert({u.conversation_id, u.turn_index}).second);
}

TEST(ToxicityTest, ConstantScorerFlattensGroups) {
  const std::vector<Conversation> corpus = {make_conv_n("a", 3), make_conv_n("b", 2)};
  std::map<std::string, LabelVector> labels;
  labels.insert_or_assign("a", vec("a", {FineLabel::kNegRephrase, FineLabel::kPos}));
  labels.insert_or_assign("b", vec("b", {FineLabel::kPos}));
  ConstantScorer scorer(0.2);
  const auto s = toxicity_summary(sample_groups(corpus, labels, 10, 1), scorer);
  for (const auto& [group, stats] : s.groups) {
    ASSERT_TRUE(stats.mean.has_value()) << group;
    EXPECT_DOUBLE_EQ(*stats.mean, 0.2);
    EXPECT_DOUBLE_EQ(*stats.p50, 0.2);
    EXPECT_DOUBLE_EQ(*stats.p90, 0.2);
  }
}

TEST(ToxicityTest, LengthScorerSeparatesLongPositiveTurns) {
  // Turns that elicit POS are long; everything else is short.
  std::vector<Conversation> corpus;
  std::map<std::string, LabelVector> labels;
  for (int c = 0; c < 6; ++c) {
    const std::string id = "c" + std::to_string(c);
    corpus.push_back(make_conv(id, {std::string(150, 'x'), "ok thanks", "short", "tiny"}, {"a", "b", "c", "d"}));
    labels.insert_or_assign(id, vec(id, {FineLabel::kPos, FineLabel::kNeu, FineLabel::kNegRephrase}));
  }
  NormalizedLengthScorer scorer;
  const auto s = toxicity_summary(sample_groups(corpus, labels, 100, 5), scorer, 3);
  EXPECT_GT(*s.groups.at("pos").mean, *s.groups.at("rand").mean);
  EXPECT_EQ(s.raw.size(), 6u + 6u + 24u);
}

TEST(ToxicityTest, EmptyGroupIsAbsent) {
  const std::vector<Conversation> corpus = {make_conv_n("a", 2)};
  std::map<std::string, LabelVector> labels;
  labels.insert_or_assign("a", vec("a", {FineLabel::kNeu}));
  ConstantScorer scorer(0.5);
  const auto s = toxicity_summary(sample_groups(corpus, labels, 5, 1), scorer);
  EXPECT_FALSE(s.groups.at("neg").mean.has_value());
  EXPECT_FALSE(s.groups.at("pos").p90.has_value());
  EXPECT_TRUE(s.groups.at("rand").mean.has_value());
  EXPECT_TRUE(to_json(s.groups.at("neg"))["mean"].is_null());
}

TEST(ToxicityTest, FailedScoresAreCountedAndExcluded) {
  class Flaky final : public ScalarScorer {
   public:
    double score(std::string_view text) override {
      if (text.find("u2") != std::string_view::npos) fail(ErrorCode::kTimeout, "flaky");
      return 0.5;
    }
  } scorer;
  const std::vector<Conversation> corpus = {make_conv_n("a", 3)};
  const auto s = toxicity_summary(sample_groups(corpus, {}, 10, 1), scorer);
  EXPECT_EQ(s.groups.at("rand").scored, 2u);
  EXPECT_EQ(s.groups.at("rand").failed, 1u);
  const std::string csv = raw_scores_csv(s.raw);
  EXPECT_NE(csv.find("flaky"), std::string::npos);
}

TEST(ToxicityTest, SummaryIsPermutationInvariant) {
  std::vector<double> xs = {0.1, 0.7, 0.3, 0.9, 0.25, 0.6, 0.05};
  const auto a = summarize_scores(xs);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 20; ++i) {
    std::shuffle(xs.begin(), xs.end(), rng);
    const auto b = summarize_scores(xs);
    EXPECT_EQ(*a.mean, *b.mean);
    EXPECT_EQ(*a.p50, *b.p50);
    EXPECT_EQ(*a.p90, *b.p90);
  }
  EXPECT_DOUBLE_EQ(*a.p50, 0.3);
  EXPECT_DOUBLE_EQ(*a.p90, 0.9);
}

TEST(CsvTest, QuotesEveryField) {
  EXPECT_EQ(csv_field("plain"), "\"plain\"");
  EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
}

TEST(QualityTest, AllOnes) {
  FnChatModel judge([](const auto&) {
    return R"({"specificity": 1, "domain_knowledge": 1, "complexity": 1, "problem_solving": 1, "creativity": 1, "technical_accuracy": 1, "real_world": 1})";
  });
  EXPECT_DOUBLE_EQ(score_prompt_quality("Write a sorting function", judge).mean(), 1.0);
}

TEST(QualityTest, MeanOfMixedAspects) {
  FnChatModel judge([](const auto&) {
    return "Sure. {\"specificity\": 1, \"domain_knowledge\": 0, \"complexity\": 1, \"problem_solving\": 0, "
           "\"creativity\": 1, \"technical_accuracy\": 0, \"real_world\": 1}";
  });
  const auto q = score_prompt_quality("prompt", judge);
  EXPECT_NEAR(q.mean(), 4.0 / 7.0, 1e-9);
  EXPECT_EQ(to_json(q)["complexity"], 1);
  ASSERT_EQ(judge.last.size(), 1u);
  EXPECT_NE(judge.last[0].content.find("technical_accuracy"), std::string::npos);
}

TEST(QualityTest, Errors) {
  FnChatModel judge([](const auto&) { return R"({"specificity": 1})"; });
  EXPECT_THROW(score_prompt_quality("prompt", judge), UnparsableOutput);
  EXPECT_THROW(score_prompt_quality("  ", judge), Error);
  EXPECT_THROW(parse_quality_response("no json here"), UnparsableOutput);
}

TEST(RefusalTest, PhraseList) {
  std::vector<std::string> responses(40, "Sure, here is what you asked for.");
  EXPECT_DOUBLE_EQ(*refusal_rate(responses).rate, 0.0);
  responses[7] = "I cannot assist with that request.";
  const auto r = refusal_rate(responses);
  EXPECT_EQ(r.refusals, 1u);
  EXPECT_DOUBLE_EQ(*r.rate, 0.025);
  EXPECT_FALSE(refusal_rate({}).rate.has_value());
}

TEST(RefusalTest, JudgePredicate) {
  FnChatModel judge([](const std::vector<ChatMessage>& m) {
    return m[0].content.find("nope") != std::string::npos ? "Yes" : "no";
  });
  const auto r = refusal_rate({"nope, not doing it", "here you go"}, JudgeRefusalPredicate(judge));
  EXPECT_EQ(r.refusals, 1u);
}

}  // namespace
}  // namespace fbmine
