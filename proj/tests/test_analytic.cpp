#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "mcbary/analytic.hpp"
#include "mcbary/numerics.hpp"
#include "mcbary/solver.hpp"

using namespace mcbary;
using mcbary::test::kD;

TEST(HittingRate, ReferenceValues) {
  EXPECT_NEAR(hitting_rate({6, 1, kD}, 2.0) / 0.0089673836984947849, 1.0, 1e-13);
  EXPECT_NEAR(hitting_rate({2, 1, kD}, 0.01) / 11.55346428226437, 1.0, 1e-13);
  EXPECT_EQ(hitting_rate({6, 1, kD}, 0.0), 0.0);
}

TEST(HittingRate, RejectsTouchingSource) {
  EXPECT_THROW((void)hitting_rate({1, 1, kD}, 1.0), NonPositiveParameter);
  EXPECT_THROW((void)hitting_rate({6, 1, kD}, -1.0), NonPositiveParameter);
}

TEST(HittingRate, IntegratesToCumulative) {
  const SisoChannel ch{3, 1, kD};
  const double area = integrate_adaptive([&](double t) { return hitting_rate(ch, t); }, 0.0, 0.5);
  EXPECT_NEAR(area, absorbed_fraction(3, 1, kD, 0.5), 1e-10);
}

TEST(CumAbsorbedSiso, ReferenceValues) {
  EXPECT_NEAR(cum_absorbed_siso({6, 1, kD}, 2.0, 1e4), 1298.4098584302079, 1e-9);
  EXPECT_NEAR(cum_absorbed_siso({3, 1, kD}, 0.5, 1e4), 2741.3570480499308, 1e-9);
}

TEST(CumAbsorbedSiso, EdgeCases) {
  EXPECT_EQ(cum_absorbed_siso({6, 1, kD}, 0.0, 1e4), 0.0);
  EXPECT_EQ(cum_absorbed_siso({1, 1, kD}, 1.0, 1e4), 1e4);
  EXPECT_THROW((void)cum_absorbed_siso({0.5, 1, kD}, 1.0, 1e4), NonPositiveParameter);
}

TEST(CumAbsorbedSiso, MonotoneAndBoundedByCaptureProbability) {
  double prev = 0.0;
  for (double t = 0.05; t < 1e9; t *= 2) {
    const double n = cum_absorbed_siso({6, 1, kD}, t, 1e4);
    EXPECT_GE(n, prev);
    EXPECT_LE(n, 1e4 / 6.0 + 1e-9);
    prev = n;
  }
  EXPECT_NEAR(prev, 1e4 / 6.0, 0.1);
}

TEST(CumulativeKernel, PrimitiveMatchesQuadrature) {
  const CumulativeKernel k1(6, 1, kD);
  EXPECT_NEAR(k1.primitive(2.0), 0.20838386334541026, 1e-14);
  const CumulativeKernel k2(2, 1, kD);
  EXPECT_NEAR(k2.primitive(0.05), 0.013695351806248679, 1e-15);
  EXPECT_EQ(k2.primitive(0.0), 0.0);
}

TEST(Sito, ReferenceValues) {
  const SitoConfig c{1, 1, 6, 7.2, 4.3, 4.1, 1e4, kD};
  const auto [n1, n2] = cum_absorbed_sito(c, 2.0);
  EXPECT_NEAR(n1, 1150.6503734813208, 1e-8);
  EXPECT_NEAR(n2, 776.17333044220527, 1e-8);
  EXPECT_NEAR(cum_absorbed_sito(c, 0.5).first, 883.21163813871679, 1e-8);
}

TEST(Sito, FarSecondReceiverRecoversSiso) {
  const SitoConfig c{1, 1, 6, 1e6, 1e6, 1e6, 1e4, kD};
  EXPECT_NEAR(cum_absorbed_sito(c, 2.0).first, cum_absorbed_siso({6, 1, kD}, 2.0, 1e4), 1e-6);
}

TEST(Sito, SwapSymmetry) {
  const SitoConfig c{1, 0.7, 6, 5, 4.3, 4.1, 1e4, kD};
  const SitoConfig swapped{0.7, 1, 5, 6, 4.1, 4.3, 1e4, kD};
  const auto a = cum_absorbed_sito(c, 1.0);
  const auto b = cum_absorbed_sito(swapped, 1.0);
  EXPECT_DOUBLE_EQ(a.first, b.second);
  EXPECT_DOUBLE_EQ(a.second, b.first);
}

TEST(Sito, RejectsBadInputs) {
  EXPECT_THROW((void)cum_absorbed_sito({1, 1, 6, 6, 4, 4, 1e4, kD}, 0.0), NonPositiveParameter);
  EXPECT_THROW((void)cum_absorbed_sito({1, 1, 6, 6, 1, 4, 1e4, kD}, 1.0), NonPositiveParameter);
}
