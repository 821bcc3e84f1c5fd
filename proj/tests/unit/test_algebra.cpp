#include <gtest/gtest.h>

#include "alans/algebra.hpp"
#include "alans/error.hpp"

using namespace alans;

namespace {

PeanoEncoding swap_encoding() {
  PeanoEncoding e;
  e.attribute = Attribute::Type;
  e.M0 = Mat::Identity(2, 2);
  e.M.resize(2, 2);
  e.M << 0, 1, 1, 0;
  return e;
}

std::vector<double> delta(int n, int k) {
  std::vector<double> d(static_cast<std::size_t>(n), 0.0);
  d[static_cast<std::size_t>(k)] = 1.0;
  return d;
}

}  // namespace

TEST(Encode, ZeroIsM0AndSuccessorIsM) {
  Rng rng(1);
  const Encoding enc = init_encoding(Attribute::Color, 4, rng);
  const auto& p = std::get<PeanoEncoding>(enc);
  EXPECT_EQ(encode(enc, 0), p.M0);
  for (int k = 0; k + 1 < value_count(Attribute::Color); ++k) {
    EXPECT_TRUE(encode(enc, k + 1).isApprox(p.M * encode(enc, k), 1e-14));
  }
  EXPECT_THROW(encode(enc, value_count(Attribute::Color)), IndexOutOfDomain);
  EXPECT_THROW(encode(enc, -1), IndexOutOfDomain);
}

TEST(Encode, SwapMatrixCubed) {
  const Encoding enc = swap_encoding();
  Mat want(2, 2);
  want << 0, 1, 1, 0;
  EXPECT_EQ(encode(enc, 3), want);
  EXPECT_EQ(encode(enc, 2), Mat::Identity(2, 2));
}

TEST(Encode, ValueCounts) {
  EXPECT_EQ(value_count(Attribute::Number), 10);
  EXPECT_EQ(value_count(Attribute::Type), 5);
  EXPECT_EQ(value_count(Attribute::Size), 6);
  EXPECT_EQ(value_count(Attribute::Color), 10);
}

TEST(ExpectedRep, DeltaAndTwoTermAverage) {
  Rng rng(2);
  const Encoding enc = init_encoding(Attribute::Size, 3, rng);
  for (int k = 0; k < 6; ++k) EXPECT_TRUE(expected_rep(enc, delta(6, k)).isApprox(encode(enc, k)));

  PeanoEncoding s;
  s.attribute = Attribute::Type;
  s.M0 = Mat::Identity(3, 3);
  s.M = 2.0 * Mat::Identity(3, 3);
  const std::vector<double> half = {0.5, 0.5, 0.0, 0.0, 0.0};
  EXPECT_TRUE(expected_rep(Encoding(s), half).isApprox(1.5 * Mat::Identity(3, 3)));
}

TEST(ExpectedRep, Linear) {
  Rng rng(3);
  const Encoding enc = init_encoding(Attribute::Type, 4, rng);
  const std::vector<double> p = {0.1, 0.2, 0.3, 0.4, 0.0};
  const std::vector<double> q = {0.0, 0.5, 0.0, 0.25, 0.25};
  std::vector<double> mix(5);
  const double a = 0.3;
  for (std::size_t i = 0; i < 5; ++i) mix[i] = a * p[i] + (1 - a) * q[i];
  EXPECT_TRUE(expected_rep(enc, mix).isApprox(a * expected_rep(enc, p) + (1 - a) * expected_rep(enc, q),
                                              1e-13));
}

TEST(ExpectedRep, SupportSizeMustMatch) {
  Rng rng(4);
  const Encoding enc = init_encoding(Attribute::Type, 2, rng);
  EXPECT_THROW(expected_rep(enc, std::vector<double>(6, 1.0 / 6)), SupportMismatch);
}

TEST(RowAggregate, PermutationInvariantSum) {
  Rng rng(5);
  const Encoding enc = init_encoding(Attribute::Color, 3, rng);
  const auto a = delta(10, 1), b = delta(10, 4), c = delta(10, 7);
  const Mat x = row_aggregate(enc, a, b, c);
  EXPECT_TRUE(x.isApprox(row_aggregate(enc, c, a, b), 1e-14));
  EXPECT_TRUE(x.isApprox(encode(enc, 1) + encode(enc, 4) + encode(enc, 7), 1e-14));
}

TEST(PositionRep, OccupancyVector) {
  const std::array<double, 9> m = {1, 1, 1, 0, 0, 0, 0, 0, 0};
  const Vec v = position_rep(m);
  ASSERT_EQ(v.size(), 9);
  EXPECT_EQ(v.sum(), 3.0);
  EXPECT_EQ(v(2), 1.0);
  EXPECT_EQ(v(3), 0.0);
}

TEST(InitEncoding, NormalizedInvertibleAndReproducible) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    Rng a(s), b(s);
    const PeanoEncoding e = init_encoding(Attribute::Number, 8, a);
    const PeanoEncoding f = init_encoding(Attribute::Number, 8, b);
    EXPECT_NEAR(e.M0.norm(), 1.0, 1e-9);
    EXPECT_GT(std::abs(e.M.determinant()), 1e-6);
    EXPECT_EQ(e.M, f.M);
    EXPECT_EQ(e.M0, f.M0);
    EXPECT_GT(min_separation(Encoding(e)), 0.0);
  }
}

TEST(InitModel, VariantsPickTheirEncodings) {
  Rng rng(6);
  const Model alans = init_model(ModelKind::Alans, 4, rng);
  const Model ind = init_model(ModelKind::AlansInd, 4, rng);
  for (Attribute a : kEncodedAttributes) {
    EXPECT_TRUE(is_peano(alans.encoding(a)));
    EXPECT_FALSE(is_peano(ind.encoding(a)));
    EXPECT_EQ(parameters(ind.encoding(a)).size(), static_cast<std::size_t>(value_count(a)));
    EXPECT_EQ(parameters(alans.encoding(a)).size(), 2u);
    EXPECT_EQ(dimension(ind.encoding(a)), 4);
  }
  EXPECT_EQ(model_kind_from_string("alans-gt"), ModelKind::AlansGt);
  EXPECT_EQ(to_string(ModelKind::AlansInd), "alans-ind");
}
