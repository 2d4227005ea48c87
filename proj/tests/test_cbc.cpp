#include <gtest/gtest.h>

#include "korolat/cbc.hpp"

using namespace korolat;

TEST(Cbc, OneDimensionIsOne) {
  for (std::int64_t N : {3, 53, 131}) EXPECT_EQ(cbc_construct(N, KorobovParams::unweighted(1, 1.0)).g(),
                                                (std::vector<std::int64_t>{1}));
}

TEST(Cbc, FastEqualsSlow) {
  for (std::int64_t N : {5, 7, 53, 131, 311}) {
    for (int d : {2, 3, 4}) {
      for (double alpha : {1.0, 2.0}) {
        const auto p = KorobovParams::unweighted(d, alpha);
        EXPECT_EQ(cbc_construct(N, p, true), cbc_construct(N, p, false)) << "N=" << N << " d=" << d;
      }
    }
  }
  const KorobovParams weighted(3, 1.0, {1.0, 0.5, 0.25});
  EXPECT_EQ(cbc_construct(1009, weighted, true), cbc_construct(1009, weighted, false));
}

TEST(Cbc, EachCoordinateMinimizesP) {
  const auto p = KorobovParams::unweighted(3, 1.0);
  const auto gen = cbc_construct(131, p);
  ASSERT_EQ(gen.g(0), 1);
  // with the prefix fixed, no candidate beats the chosen one
  const KorobovParams p2 = KorobovParams::unweighted(2, 1.0);
  const double best2 = worst_case_P(GeneratingVector(131, {1, gen.g(1)}), p2);
  for (std::int64_t c = 1; c < 131; ++c) {
    const double v = worst_case_P(GeneratingVector(131, {1, c}), p2);
    EXPECT_GE(v, best2);
    if (v == best2) {
      EXPECT_GE(c, gen.g(1));  // smallest wins ties
    }
  }
  const double best3 = worst_case_P(gen, p);
  for (std::int64_t c = 1; c < 131; ++c)
    EXPECT_GE(worst_case_P(GeneratingVector(131, {1, gen.g(1), c}), p), best3);
}

TEST(Cbc, FigureOfMeritCertificate) {
  for (std::int64_t N : {53, 131, 311}) {
    for (int d : {2, 3}) {
      const auto p = KorobovParams::unweighted(d, 1.0);
      const auto gen = cbc_construct(N, p);
      EXPECT_TRUE(rho_exceeds(gen, p, choose_M(p, N, MRule::closed_form_half())));
    }
  }
}

TEST(Cbc, Errors) {
  EXPECT_THROW(cbc_construct(53, KorobovParams::unweighted(2, 1.5)), UnsupportedAlphaError);
  EXPECT_THROW(cbc_construct(51, KorobovParams::unweighted(2, 1.0)), DomainError);
}

TEST(CyclicCorrelation, MatchesDirect) {
  Rng rng(2);
  for (int L : {1, 2, 7, 52, 130}) {
    std::vector<double> x(L), y(L);
    for (auto& v : x) v = rng.uniform() - 0.5;
    for (auto& v : y) v = rng.uniform() - 0.5;
    const auto c = detail::cyclic_correlation(x, y);
    for (int b = 0; b < L; ++b) {
      double direct = 0.0;
      for (int a = 0; a < L; ++a) direct += x[a] * y[(a + b) % L];
      EXPECT_NEAR(c[b], direct, 1e-12);
    }
  }
}
