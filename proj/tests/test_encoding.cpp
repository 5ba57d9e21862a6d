#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "bsord/encoding.hpp"

namespace bsord {
namespace {

TEST(TreeDepth, MatchesFigureSizes) {
  EXPECT_EQ(tree_depth(8), 3);
  EXPECT_EQ(tree_depth(6), 3);
  EXPECT_EQ(tree_depth(2), 1);
  EXPECT_EQ(tree_depth(3), 2);
}

TEST(TreeDepth, PowerOfTwoBoundaries) {
  for (int n = 1; n <= 15; ++n) {
    const std::int64_t k = std::int64_t{1} << n;
    EXPECT_EQ(tree_depth(k), n);
    EXPECT_EQ(tree_depth(k + 1), n + 1);
  }
}

TEST(TreeDepth, RejectsDegenerateCounts) {
  EXPECT_THROW(tree_depth(1), InvalidStateError);
  EXPECT_THROW(tree_depth(0), InvalidStateError);
  EXPECT_THROW(tree_depth(-4), InvalidStateError);
}

TEST(EncodeState, BinaryDigitsMostSignificantFirst) {
  EXPECT_EQ(encode_state(5, 3), BitCode({1, 0, 1}));
  EXPECT_EQ(encode_state(0, 3), BitCode({0, 0, 0}));
  EXPECT_EQ(encode_state(6, 4), BitCode({0, 1, 1, 0}));
}

TEST(EncodeState, RejectsOutOfRange) {
  EXPECT_THROW(encode_state(8, 3), InvalidStateError);
  EXPECT_THROW(encode_state(-1, 3), InvalidStateError);
  EXPECT_THROW(encode_state(0, 0), InvalidStateError);
}

TEST(DecodeBits, InvertsEncoding) {
  EXPECT_EQ(decode_bits(BitCode({1, 0, 1})), 5);
  EXPECT_EQ(decode_bits(BitCode({0, 0, 0})), 0);
  EXPECT_THROW(decode_bits(BitCode{}), InvalidStateError);
}

TEST(BitCode, RejectsNonBinaryDigits) {
  EXPECT_THROW(BitCode({0, 2}), InvalidStateError);
  EXPECT_THROW(BitCode(std::vector<std::uint8_t>{}), InvalidStateError);
}

TEST(EncodeDecode, BijectionUpToSixteenBits) {
  for (int n = 1; n <= 16; ++n) {
    const std::int64_t states = std::int64_t{1} << n;
    const std::int64_t stride = n <= 10 ? 1 : 37;
    for (std::int64_t y = 0; y < states; y += stride) {
      const auto code = encode_state(y, n);
      ASSERT_EQ(code.size(), static_cast<std::size_t>(n));
      ASSERT_EQ(decode_bits(code), y);
    }
    ASSERT_EQ(decode_bits(encode_state(states - 1, n)), states - 1);
  }
}

TEST(TruncateRenormalize, EqualValidMassBecomesUniform) {
  const std::vector<double> dist{0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.2, 0.2};
  const auto out = truncate_renormalize(dist, 6);
  ASSERT_EQ(out.probs.size(), 6u);
  EXPECT_FALSE(out.degenerate);
  for (double p : out.probs) EXPECT_NEAR(p, 1.0 / 6.0, 1e-15);
}

TEST(TruncateRenormalize, IdentityOnFullTree) {
  const std::vector<double> dist(8, 0.125);
  const auto out = truncate_renormalize(dist, 8);
  for (double p : out.probs) EXPECT_DOUBLE_EQ(p, 0.125);
}

TEST(TruncateRenormalize, SixStatesDropTheTwoHighestLeaves) {
  const std::vector<double> dist{0.05, 0.1, 0.2, 0.25, 0.1, 0.1, 0.1, 0.1};
  const auto out = truncate_renormalize(dist, 6);
  ASSERT_EQ(out.probs.size(), 6u);
  EXPECT_NEAR(std::accumulate(out.probs.begin(), out.probs.end(), 0.0), 1.0, 1e-12);
  EXPECT_NEAR(out.probs[3], 0.25 / 0.8, 1e-15);
}

TEST(TruncateRenormalize, DegenerateMassFallsBackToUniform) {
  std::string warning;
  auto saved = warning_sink();
  warning_sink() = [&](std::string_view m) { warning = m; };
  const std::vector<double> dist{0.0, 0.0, 0.0, 1.0};
  const auto out = truncate_renormalize(dist, 3);
  warning_sink() = saved;
  EXPECT_TRUE(out.degenerate);
  EXPECT_FALSE(warning.empty());
  for (double p : out.probs) EXPECT_DOUBLE_EQ(p, 1.0 / 3.0);
}

TEST(TruncateRenormalize, PropertiesOnRandomDistributions) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 6;
    const std::size_t leaves = std::size_t{1} << n;
    std::vector<double> dist(leaves);
    for (auto& p : dist) p = u(rng);
    const double total = std::accumulate(dist.begin(), dist.end(), 0.0);
    for (auto& p : dist) p /= total;
    const auto k = static_cast<std::int64_t>(leaves / 2 + 1 + trial % (leaves / 2));
    const auto out = truncate_renormalize(dist, std::min<std::int64_t>(std::max<std::int64_t>(k, 2), leaves));
    double sum = 0.0;
    for (double p : out.probs) {
      EXPECT_GE(p, 0.0);
      sum += p;
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
    // Argmax over the valid prefix is preserved.
    const auto valid_end = dist.begin() + static_cast<std::ptrdiff_t>(out.probs.size());
    EXPECT_EQ(std::max_element(dist.begin(), valid_end) - dist.begin(),
              std::max_element(out.probs.begin(), out.probs.end()) - out.probs.begin());
  }
}

}  // namespace
}  // namespace bsord
