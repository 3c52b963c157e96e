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

#include "fbmine/core.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace fbmine {
namespace {

using testing::make_conv;
using testing::make_conv_n;

TEST(ConversationTest, CountsUserTurnsAndAllowsTrailingUserTurn) {
  const auto conv = make_conv("c", {"a", "b", "c"}, {"x", "y"});
  EXPECT_EQ(conv.user_turn_count(), 3u);
  EXPECT_EQ(conv.user_turn(3), "c");
  EXPECT_EQ(conv.assistant_turn(2).value(), "y");
  EXPECT_FALSE(conv.assistant_turn(3).has_value());
}

TEST(ConversationTest, RejectsBrokenTranscripts) {
  EXPECT_THROW(Conversation("x", Source::kOther, "m", {}), Error);
  EXPECT_THROW(Conversation("x", Source::kOther, "m", {{Role::kAssistant, "hi"}}), Error);
  EXPECT_THROW(Conversation("x", Source::kOther, "m", {{Role::kUser, "a"}, {Role::kUser, "b"}}), Error);
  EXPECT_THROW(Conversation("x", Source::kOther, "m", {{Role::kUser, "  \n"}}), Error);
}

TEST(ProjectTest, Examples) {
  EXPECT_EQ(project(FineLabel::kNegClarify, LabelSet::kBinary), ProjectedLabel::of(BinaryLabel::kFeedback));
  EXPECT_EQ(project(FineLabel::kNeu, LabelSet::kThreeWay), ProjectedLabel::of(ThreeWayLabel::kNeu));
  EXPECT_EQ(project(FineLabel::kPos, LabelSet::kThreeWay), ProjectedLabel::of(ThreeWayLabel::kPos));
  EXPECT_EQ(project(FineLabel::kNegRephrase, LabelSet::kFine), ProjectedLabel::of(FineLabel::kNegRephrase));
}

TEST(ProjectTest, BinaryCommutesWithThreeWay) {
  for (FineLabel l : kAllFineLabels) {
    const auto direct = project(l, LabelSet::kBinary);
    EXPECT_EQ(direct, project(project(l, LabelSet::kThreeWay), LabelSet::kBinary)) << to_string(l);
    EXPECT_EQ(direct == ProjectedLabel::of(BinaryLabel::kFeedback),
              project(l, LabelSet::kThreeWay) != ProjectedLabel::of(ThreeWayLabel::kNeu));
  }
}

TEST(ProjectTest, RefiningIsRejected) {
  EXPECT_THROW(project(ProjectedLabel::of(BinaryLabel::kFeedback), LabelSet::kFine), Error);
}

TEST(ResolveDualTest, PriorityExamples) {
  EXPECT_EQ(resolve_dual({FineLabel::kNegRephrase, FineLabel::kNegAwareWithCorrection}),
            FineLabel::kNegAwareWithCorrection);
  EXPECT_EQ(resolve_dual({FineLabel::kNegClarify}), FineLabel::kNegClarify);
  EXPECT_EQ(resolve_dual({FineLabel::kNegAwareNoCorrection, FineLabel::kNegClarify}),
            FineLabel::kNegAwareNoCorrection);
  EXPECT_EQ(resolve_dual({FineLabel::kPos, FineLabel::kNeu}), FineLabel::kPos);
  EXPECT_EQ(resolve_dual({FineLabel::kNegRephrase, FineLabel::kNeu}), FineLabel::kNegRephrase);
}

TEST(ResolveDualTest, ConflictAndEmpty) {
  try {
    resolve_dual({FineLabel::kPos, FineLabel::kNegClarify});
    FAIL() << "expected PosNegConflict";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPosNegConflict);
  }
  EXPECT_THROW(resolve_dual(std::span<const FineLabel>{}), Error);
}

TEST(ResolveDualTest, Idempotent) {
  for (unsigned mask = 1; mask < 64; ++mask) {
    std::vector<FineLabel> set;
    for (unsigned b = 0; b < 6; ++b) {
      if (mask & (1u << b)) set.push_back(kAllFineLabels[b]);
    }
    try {
      const FineLabel once = resolve_dual(std::span<const FineLabel>(set));
      EXPECT_EQ(resolve_dual({once}), once);
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kPosNegConflict);
    }
  }
}

TEST(LabelVectorTest, LengthCheckedAgainstConversation) {
  const auto conv = make_conv_n("c", 3);
  EXPECT_NO_THROW(LabelVector::for_conversation(conv, {FineLabel::kNeu, FineLabel::kPos}, LabelOrigin::kHuman));
  EXPECT_THROW(LabelVector::for_conversation(conv, {FineLabel::kNeu}, LabelOrigin::kHuman), Error);
  const auto v = LabelVector::for_conversation(conv, {FineLabel::kNegClarify, FineLabel::kPos}, LabelOrigin::kHuman);
  EXPECT_EQ(v.of_user_turn(2), FineLabel::kNegClarify);
  EXPECT_EQ(v.of_user_turn(3), FineLabel::kPos);
  EXPECT_THROW(v.of_user_turn(1), Error);
}

TEST(ExtractTest, SelectsByFollowingUserTurn) {
  const auto conv = make_conv_n("c", 3);
  const auto labels = LabelVector::for_conversation(conv, {FineLabel::kNegRephrase, FineLabel::kNeu}, LabelOrigin::kHuman);
  const auto subs = extract_subconversations(conv, labels, ThreeWayIs{ThreeWayLabel::kNeg});
  ASSERT_EQ(subs.size(), 1u);
  EXPECT_EQ(subs[0].index, 1u);
  EXPECT_EQ(subs[0].u_i, "u1 of c");
  EXPECT_EQ(subs[0].m_i, "m1 of c");
  EXPECT_EQ(subs[0].u_next, "u2 of c");
  EXPECT_EQ(subs[0].m_next, "m2 of c");
  EXPECT_EQ(subs[0].trigger_label, FineLabel::kNegRephrase);
}

TEST(ExtractTest, AllNeutralGivesNothing) {
  const auto conv = make_conv_n("c", 4);
  const auto labels = LabelVector::for_conversation(conv, {FineLabel::kNeu, FineLabel::kNeu, FineLabel::kNeu},
                                                    LabelOrigin::kHuman);
  EXPECT_TRUE(extract_subconversations(conv, labels, ThreeWayIs{ThreeWayLabel::kNeg}).empty());
}

TEST(ExtractTest, MissingFinalAnswerExcludesWindow) {
  const auto conv = make_conv("c", {"a", "b"}, {"x"});
  const auto labels = LabelVector::for_conversation(conv, {FineLabel::kNegClarify}, LabelOrigin::kHuman);
  EXPECT_TRUE(extract_subconversations(conv, labels, ThreeWayIs{ThreeWayLabel::kNeg}).empty());
}

TEST(ExtractTest, LengthAndIdMismatch) {
  const auto conv = make_conv_n("c", 3);
  try {
    extract_subconversations(conv, LabelVector("c", {FineLabel::kNeu}, LabelOrigin::kModel), AnyLabel{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kLengthMismatch);
  }
  EXPECT_THROW(extract_subconversations(conv, LabelVector("other", {FineLabel::kNeu, FineLabel::kNeu},
                                                          LabelOrigin::kModel), AnyLabel{}),
               Error);
}

TEST(ExtractTest, IndicesStrictlyIncreasing) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const auto conv = testing::random_conv(rng, "c" + std::to_string(trial));
    const auto labels = testing::random_labels(rng, conv);
    const auto subs = extract_subconversations(conv, labels, AnyLabel{});
    for (std::size_t k = 1; k < subs.size(); ++k) EXPECT_LT(subs[k - 1].index, subs[k].index);
  }
}

TEST(ExtractTest, MatchesBruteForceEnumeration) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const auto conv = testing::random_conv(rng, "f" + std::to_string(trial));
    const auto labels = testing::random_labels(rng, conv);
    const auto got = extract_subconversations(conv, labels, AnyLabel{});
    const auto want = oracle::all_windows(conv, labels.labels());
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t k = 0; k < got.size(); ++k) {
      EXPECT_EQ(got[k].index, want[k].index);
      EXPECT_EQ(got[k].u_i, want[k].u_i);
      EXPECT_EQ(got[k].m_i, want[k].m_i);
      EXPECT_EQ(got[k].u_next, want[k].u_next);
      EXPECT_EQ(got[k].m_next, want[k].m_next);
      EXPECT_EQ(got[k].trigger_label, want[k].trigger);
    }
    for (ThreeWayLabel t : {ThreeWayLabel::kPos, ThreeWayLabel::kNeg, ThreeWayLabel::kNeu}) {
      std::size_t expected = 0;
      for (const auto& w : want) expected += to_three_way(w.trigger) == t;
      EXPECT_EQ(extract_subconversations(conv, labels, ThreeWayIs{t}).size(), expected);
    }
  }
}

}  // namespace
}  // namespace fbmine
