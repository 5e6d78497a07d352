#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "citebias/util.hpp"
#include "../support.hpp"

namespace citebias {
namespace {

TEST(Sha256, KnownVectors) {
  EXPECT_EQ(util::Sha256Hex(""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(util::Sha256Hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(StableRng, FrozenStream) {
  // SplitMix64 reference outputs for seed 0.
  util::StableRng rng(0);
  EXPECT_EQ(rng.Next(), 0xe220a8397b1dcdafULL);
  EXPECT_EQ(rng.Next(), 0x6e789e6aa1b965f4ULL);
  EXPECT_EQ(rng.Next(), 0x06c45d188009454fULL);
}

TEST(StableRng, LabelsGiveDistinctStreams) {
  util::StableRng a(42, "r1"), b(42, "r2"), c(42, "r1");
  const auto x = a.Next();
  EXPECT_NE(x, b.Next());
  EXPECT_EQ(x, c.Next());
}

TEST(StableRng, BoundedStaysInRangeAndCoversIt) {
  util::StableRng rng(9);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto v = rng.Bounded(7);
    ASSERT_LT(v, 7u);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 7u);
}

TEST(StableRng, NormalMoments) {
  util::StableRng rng(3);
  const int n = 200000;
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.Normal();
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_NEAR(sq / n - mean * mean, 1.0, 0.02);
}

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(util::FormatDouble(0.0), "0");
  EXPECT_EQ(util::FormatDouble(0.1), "0.1");
  EXPECT_EQ(util::FormatDouble(1.5), "1.5");
  const double v = 1.0 / 3.0;
  EXPECT_EQ(std::stod(util::FormatDouble(v)), v);
}

TEST(WriteFileAtomic, ReplacesContent) {
  testing::TempDir dir;
  const auto p = dir / "f.txt";
  util::WriteFileAtomic(p, "one");
  util::WriteFileAtomic(p, "two");
  EXPECT_EQ(util::ReadFile(p), "two");
  EXPECT_THROW(util::ReadFile(dir / "missing"), std::exception);
}

}  // namespace
}  // namespace citebias
