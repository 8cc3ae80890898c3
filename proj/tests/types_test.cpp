#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "quota/types.hpp"
#include "test_util.hpp"

namespace quota {
namespace {

TEST(ValidateTest, WellFormedVideoIsOk) {
  std::vector<FrameEmbedding> frames{FrameEmbedding::filled(2, 2, 4, 1.0f),
                                     FrameEmbedding::filled(2, 2, 4, 2.0f)};
  EXPECT_FALSE(validate(frames).has_value());
  VideoEmbeddings video(frames);
  EXPECT_FALSE(validate(video).has_value());
  EXPECT_FALSE(validate(video).has_value());  // idempotent
  EXPECT_EQ(video.total_tokens(), 8u);
}

TEST(ValidateTest, ChannelMismatchIsReported) {
  std::vector<FrameEmbedding> frames{FrameEmbedding::filled(2, 2, 4, 1.0f),
                                     FrameEmbedding::filled(2, 2, 8, 1.0f)};
  auto err = validate(frames);
  ASSERT_TRUE(err.has_value());
  EXPECT_EQ(err->code(), ErrorCode::kDimensionMismatch);
  EXPECT_EQ(err->frame_index(), 1u);
  try {
    VideoEmbeddings video(frames);
    FAIL() << "expected dimension-mismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
}

TEST(ValidateTest, NanIsRejected) {
  std::vector<float> data(16, 0.5f);
  data[5] = std::numeric_limits<float>::quiet_NaN();
  auto err = validate_frame(2, 2, 4, data, {});
  ASSERT_TRUE(err.has_value());
  EXPECT_EQ(err->code(), ErrorCode::kNonFiniteValue);
  try {
    FrameEmbedding f(2, 2, 4, data);
    FAIL() << "expected non-finite-value";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFiniteValue);
  }
}

TEST(ValidateTest, EmptyVideoIsRejected) {
  std::vector<FrameEmbedding> none;
  auto err = validate(none);
  ASSERT_TRUE(err.has_value());
  EXPECT_EQ(err->code(), ErrorCode::kEmptyVideo);
  EXPECT_THROW(VideoEmbeddings{none}, Error);
}

TEST(FrameEmbeddingTest, ShapeInvariants) {
  EXPECT_THROW(FrameEmbedding(0, 2, 1, {}), Error);
  EXPECT_THROW(FrameEmbedding(2, 2, 1, std::vector<float>(3)), Error);
  EXPECT_THROW(FrameEmbedding(1, 2, 1, std::vector<float>(2), {1}), Error);
  EXPECT_THROW(FrameEmbedding(1, 2, 1, std::vector<float>(2), {1, 0}), Error);
  FrameEmbedding f(1, 2, 1, {1.0f, 2.0f}, {3, 1});
  EXPECT_EQ(f.size_at(0, 0), 3u);
  EXPECT_FALSE(f.without_sizes().has_sizes());
  EXPECT_EQ(FrameEmbedding::filled(1, 1, 1, 0.0f).size_at(0, 0), 1u);
}

TEST(FrameEmbeddingTest, TokenIsRowMajorChannelFastest) {
  std::vector<float> data(2 * 3 * 2);
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<float>(i);
  FrameEmbedding f(2, 3, 2, data);
  auto t = f.token(1, 2);
  EXPECT_EQ(t[0], 10.0f);
  EXPECT_EQ(t[1], 11.0f);
}

TEST(ScoreTypesTest, ScoreVectorRejectsNegativeAndNonFinite) {
  EXPECT_THROW(ScoreVector({0.5, -0.1}), Error);
  EXPECT_THROW(ScoreVector({std::nan("")}), Error);
  try {
    ScoreVector({0.1, -1.0});
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNegativeScore);
    EXPECT_EQ(e.frame_index(), 1u);
  }
}

TEST(ScoreTypesTest, NormalizedScoresRequireUnitSum) {
  EXPECT_NO_THROW(NormalizedScores({0.25, 0.75}));
  EXPECT_THROW(NormalizedScores({0.25, 0.70}), Error);
  EXPECT_THROW(NormalizedScores({1.5, -0.5}), Error);
  EXPECT_THROW(NormalizedScores({}), Error);
}

TEST(DecoupledQueryTest, StrategyInvariants) {
  auto d = DecoupledQuery::direct("q");
  EXPECT_EQ(d.strategy(), DecoupleStrategy::kDirect);
  EXPECT_FALSE(d.object_list().has_value());
  EXPECT_FALSE(d.event_question().has_value());
  EXPECT_THROW(DecoupledQuery::entities("q", {}), Error);
  EXPECT_THROW(DecoupledQuery::entities("q", {"cup", ""}), Error);
  EXPECT_THROW(DecoupledQuery::event("q", ""), Error);
  auto e = DecoupledQuery::entities("q", {"cup"});
  EXPECT_EQ(e.object_list()->size(), 1u);
}

TEST(AllocationPlanTest, Invariants) {
  EXPECT_NO_THROW(AllocationPlan(392, {210, 180}, {{15, 14}, {13, 13}}));
  // Sum over budget.
  EXPECT_THROW(AllocationPlan(300, {210, 180}, {{15, 14}, {13, 13}}), Error);
  // Grid exceeding its target.
  EXPECT_THROW(AllocationPlan(400, {100, 100}, {{11, 10}, {10, 10}}), Error);
  EXPECT_THROW(AllocationPlan(400, {100}, {{0, 10}}), Error);
  EXPECT_THROW(AllocationPlan(400, {100, 1}, {{10, 10}}), Error);
  AllocationPlan p(392, {210, 180}, {{15, 14}, {13, 13}});
  EXPECT_EQ(p.used_tokens(), 379u);
}

TEST(VideoEmbeddingsTest, VariableGridsShareChannels) {
  std::mt19937_64 rng(3);
  VideoEmbeddings v({testing::random_frame(rng, 3, 4, 5), testing::random_frame(rng, 2, 2, 5)});
  EXPECT_FALSE(v.uniform_grid());
  EXPECT_EQ(v.dim(), 5u);
  EXPECT_EQ(v.total_tokens(), 16u);
}

}  // namespace
}  // namespace quota
