#include "mfspc/errors.hpp"
#include "mfspc/rankcharts.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace mfspc;

TEST(RankMoments, MatchesHandValues) {
  const RankMoments m4 = rank_moments(4);
  EXPECT_DOUBLE_EQ(m4.mean, 0.125);
  EXPECT_DOUBLE_EQ(m4.variance, 72.0 / 3072.0);
  const RankMoments m5 = rank_moments(5);
  EXPECT_DOUBLE_EQ(m5.mean, 0.12);
  EXPECT_DOUBLE_EQ(m5.variance, 0.0256);
  EXPECT_DOUBLE_EQ(m5.covariance, -0.0064);
}

TEST(RankMoments, EqualExhaustiveEnumeration) {
  for (long N = 2; N <= 12; ++N) {
    const oracle::RationalMoments r = oracle::enumerate_rank_moments(N);
    const RankMoments m = rank_moments(N);
    EXPECT_EQ(m.mean, static_cast<double>(r.mean_num) / static_cast<double>(r.mean_den)) << N;
    EXPECT_EQ(m.variance, static_cast<double>(r.var_num) / static_cast<double>(r.var_den)) << N;
    EXPECT_TRUE(oracle::same_fraction(r.cov_num, r.cov_den, -r.var_num, r.var_den * (N - 1))) << N;
    EXPECT_EQ(m.covariance, static_cast<double>(r.cov_num) / static_cast<double>(r.cov_den)) << N;
  }
}

TEST(RankMoments, LimitsAndRange) {
  for (long N : {2L, 3L, 10L, 11L, 1000L, 1001L}) {
    const RankMoments m = rank_moments(N);
    EXPECT_GT(m.mean, 0.0);
    EXPECT_LE(m.mean, 0.125);
    EXPECT_GT(m.variance, 0.0);
  }
  EXPECT_NEAR(rank_moments(100001).variance, 5.0 / 192.0, 1e-9);
  EXPECT_THROW(rank_moments(1), InvalidArgument);
}

TEST(RankMoments, CenteredRanks) {
  for (long N = 2; N <= 12; ++N) {
    double s = 0.0, s2 = 0.0;
    for (long r = 1; r <= N; ++r) {
      const double z = (static_cast<double>(r) - (N + 1) / 2.0) / static_cast<double>(N);
      s += z;
      s2 += z * z;
    }
    const RankMoments m = centered_rank_moments(N);
    EXPECT_NEAR(s / N, 0.0, 1e-15);
    EXPECT_NEAR(s2 / N, m.variance, 1e-15);
  }
}

TEST(EwmaVariance, SingleTermIsScoreVariance) {
  const RankMoments m = rank_moments(9);
  EXPECT_DOUBLE_EQ(ewma_variance(0.3, 1, m), m.variance);
}

TEST(EwmaVariance, ClosedFormsForHalfWeight) {
  const RankMoments m = rank_moments(20);
  const double A = (1.0 - std::pow(0.5, 4)) / (0.5 * 1.5);
  const double S = (1.0 - 0.25) / 0.5;
  EXPECT_DOUBLE_EQ(A, 1.25);
  EXPECT_DOUBLE_EQ(S, 1.5);
  const double expected = m.variance * (1.0 + 1.0 / 19.0) * A - m.variance * S * S / 19.0;
  EXPECT_NEAR(ewma_variance(0.5, 2, m), expected, 1e-15);
}

TEST(EwmaVariance, EqualsQuadraticForm) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> lam(0.01, 0.99);
  std::uniform_int_distribution<long> Nd(2, 400);
  for (int t = 0; t < 100; ++t) {
    const long N = Nd(rng);
    const long L = std::uniform_int_distribution<long>(1, N)(rng);
    const double lambda = lam(rng);
    const RankMoments m = rank_moments(N);
    std::vector<double> a(static_cast<std::size_t>(L));
    for (long j = 0; j < L; ++j) a[static_cast<std::size_t>(j)] = std::pow(1.0 - lambda, static_cast<double>(L - 1 - j));
    const long double q = oracle::quadratic_form_variance(a, m.variance, m.covariance);
    EXPECT_NEAR(ewma_variance(lambda, L, m) / static_cast<double>(q), 1.0, 1e-12);
  }
}

TEST(TwoSample, HandEvaluations) {
  const std::vector<double> ref{1.0, 2.0, 3.0};
  EXPECT_NEAR(two_sample_statistic(ref, std::vector<double>{4.0, 5.0}), 0.36 / (0.16 * std::sqrt(1.5)), 1e-12);
  EXPECT_NEAR(two_sample_statistic(std::vector<double>{3.0, 4.0, 5.0}, std::vector<double>{1.0, 2.0}),
              -0.24 / (0.16 * std::sqrt(1.5)), 1e-12);
}

TEST(TwoSample, PermutationMeanIsZero) {
  const std::vector<double> pooled{0.3, -1.2, 2.5, 0.9, 1.7};
  double sum = 0.0;
  for (int i = 0; i < 5; ++i) {
    for (int j = i + 1; j < 5; ++j) {
      std::vector<double> ref, cand{pooled[i], pooled[j]};
      for (int k = 0; k < 5; ++k) if (k != i && k != j) ref.push_back(pooled[k]);
      sum += two_sample_statistic(ref, cand);
    }
  }
  EXPECT_NEAR(sum / 10.0, 0.0, 1e-12);
}

TEST(UpperQuantile, CeilIndexOrderStatistic) {
  std::vector<double> v;
  for (int i = 1; i <= 100; ++i) v.push_back(i);
  EXPECT_EQ(upper_quantile(v, 0.05), 95.0);
  EXPECT_EQ(upper_quantile(v, 0.5), 50.0);
  EXPECT_EQ(upper_quantile({3.0}, 0.05), 3.0);
  EXPECT_THROW(upper_quantile({}, 0.05), InvalidArgument);
}

TEST(PermutationQuantile, MedianAndCantelliBound) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  std::vector<double> pooled(40);
  for (double& x : pooled) x = g(rng);
  const double c50 = permutation_quantile(pooled, 30, 10, 0.5, 2000, rng);
  // Fresh batch: fraction of relabelings with T >= c.
  int hits = 0;
  const int B = 4000;
  for (int b = 0; b < B; ++b) {
    std::vector<double> p = pooled;
    std::shuffle(p.begin(), p.end(), rng);
    const std::vector<double> ref(p.begin(), p.begin() + 30), cand(p.begin() + 30, p.end());
    hits += two_sample_statistic(ref, cand) >= c50 ? 1 : 0;
  }
  EXPECT_GE(hits / static_cast<double>(B), 0.45);
  EXPECT_LE(hits / static_cast<double>(B), 0.55);
  for (double alpha : {0.05, 0.1, 0.2}) {
    EXPECT_LE(permutation_quantile(pooled, 30, 10, alpha, 1000, rng), std::sqrt((1 - alpha) / alpha) + 0.1);
  }
  EXPECT_THROW(permutation_quantile(pooled, 30, 10, 0.05, 100, rng), InvalidArgument);
  EXPECT_THROW(permutation_quantile(pooled, 20, 10, 0.05, 1000, rng), InvalidArgument);
}

TEST(PermutationQuantile, DeterministicGivenSeed) {
  std::vector<double> pooled;
  for (int i = 0; i < 25; ++i) pooled.push_back(std::sin(i * 1.7));
  std::mt19937_64 a(11), b(11);
  EXPECT_EQ(permutation_quantile(pooled, 20, 5, 0.1, 500, a),
            permutation_quantile(pooled, 20, 5, 0.1, 500, b));
}

namespace {

std::vector<double> normals(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return v;
}

ChartConfig fast_config(std::uint64_t seed) {
  ChartConfig c;
  c.permutations = 400;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(Udfm, WindowOneIsStandardizedScore) {
  ChartConfig c = fast_config(1);
  c.window = 1;
  const std::vector<double> ref{0.1, 0.5, 0.2, 0.9};
  UdfmChart chart(ref, c);
  const ChartPoint p = chart.update(0.7);  // rank 4 of N = 5
  const RankMoments m = rank_moments(5);
  EXPECT_NEAR(p.statistic, (0.2 - m.mean) / std::sqrt(m.variance), 1e-12);
}

TEST(Udfm, StatisticMatchesDirectEwma) {
  const ChartConfig c = fast_config(2);
  const std::vector<double> ref = normals(30, 5);
  const std::vector<double> stream = normals(12, 6);
  UdfmChart chart(ref, c);
  std::vector<double> pooled = ref;
  for (std::size_t n = 1; n <= stream.size(); ++n) {
    pooled.push_back(stream[n - 1]);
    const long N = static_cast<long>(pooled.size());
    const long span = std::min<long>(static_cast<long>(n), c.window);
    const RankMoments m = rank_moments(N);
    double ewma = 0.0, wsum = 0.0;
    for (long j = static_cast<long>(n) - span + 1; j <= static_cast<long>(n); ++j) {
      const double x = stream[static_cast<std::size_t>(j - 1)];
      long rank = 0;
      for (double y : pooled) rank += y <= x ? 1 : 0;
      const double w = std::pow(1.0 - c.lambda, static_cast<double>(static_cast<long>(n) - j));
      ewma += w * std::max(0.0, rank - (N + 1) / 2.0) / N;
      wsum += w;
    }
    const double expected = (ewma - wsum * m.mean) / std::sqrt(ewma_variance(c.lambda, span, m));
    EXPECT_NEAR(chart.update(stream[n - 1]).statistic, expected, 1e-10) << n;
  }
}

TEST(Udfm, ExtremeValuesAlarmWithinWindow) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const ChartConfig c = fast_config(seed);
    UdfmChart chart(normals(100, seed), c);
    int steps = 0;
    bool alarmed = false;
    while (!alarmed && steps < c.window) {
      alarmed = chart.update(1000.0 + steps).alarm;
      ++steps;
    }
    EXPECT_TRUE(alarmed) << seed;
  }
}

TEST(Udfm, InvariantUnderMonotoneTransform) {
  const ChartConfig c = fast_config(4);
  const std::vector<double> ref = normals(50, 8), stream = normals(25, 9);
  std::vector<double> ref2, stream2;
  for (double x : ref) ref2.push_back(std::exp(2.0 * x) + 3.0);
  for (double x : stream) stream2.push_back(std::exp(2.0 * x) + 3.0);
  UdfmChart a(ref, c), b(ref2, c);
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const ChartPoint pa = a.update(stream[i]);
    const ChartPoint pb = b.update(stream2[i]);
    EXPECT_DOUBLE_EQ(pa.statistic, pb.statistic);
    EXPECT_DOUBLE_EQ(pa.limit, pb.limit);
  }
}

TEST(Udfm, Deterministic) {
  const ChartConfig c = fast_config(12);
  const std::vector<double> ref = normals(40, 1), stream = normals(30, 2);
  UdfmChart a(ref, c), b(ref, c);
  for (double x : stream) {
    const ChartPoint pa = a.update(x), pb = b.update(x);
    EXPECT_EQ(pa.statistic, pb.statistic);
    EXPECT_EQ(pa.limit, pb.limit);
    EXPECT_EQ(pa.alarm, pb.alarm);
  }
}

TEST(Udfm, TiesAreBrokenNotRejected) {
  const ChartConfig c = fast_config(3);
  UdfmChart chart(std::vector<double>(20, 1.0), c);
  for (int i = 0; i < 5; ++i) {
    const ChartPoint p = chart.update(1.0);
    EXPECT_TRUE(std::isfinite(p.statistic));
    EXPECT_TRUE(std::isfinite(p.limit));
  }
}

TEST(Udfm, LongerConditioningGivesSimilarLimits) {
  ChartConfig shortc = fast_config(21);
  shortc.permutations = 1000;
  ChartConfig longc = shortc;
  longc.conditioning_window = 2 * shortc.window;
  const std::vector<double> ref = normals(100, 30), stream = normals(30, 31);
  UdfmChart a(ref, shortc), b(ref, longc);
  double diff = 0.0, scale = 0.0;
  for (double x : stream) {
    const ChartPoint pa = a.update(x), pb = b.update(x);
    diff += std::abs(pa.limit - pb.limit);
    scale += std::abs(pa.limit);
  }
  EXPECT_LT(diff / scale, 0.1);
}

TEST(Udfm, RejectsBadInput) {
  EXPECT_THROW(UdfmChart(std::vector<double>{}, fast_config(1)), InvalidArgument);
  ChartConfig c = fast_config(1);
  c.lambda = 1.5;
  EXPECT_THROW(UdfmChart(std::vector<double>{1.0, 2.0}, c), InvalidArgument);
  UdfmChart chart(std::vector<double>{1.0, 2.0}, fast_config(1));
  EXPECT_THROW(chart.update(std::nan("")), InvalidArgument);
}

TEST(Dfewma, OneDimensionIsSquaredCenteredEwma) {
  const ChartConfig c = fast_config(5);
  const std::vector<double> ref = normals(20, 40), stream = normals(8, 41);
  RowMatrix R(20, 1);
  for (int i = 0; i < 20; ++i) R(i, 0) = ref[static_cast<std::size_t>(i)];
  DfewmaChart chart(R, c);
  std::vector<double> pooled = ref;
  for (std::size_t n = 1; n <= stream.size(); ++n) {
    pooled.push_back(stream[n - 1]);
    const long N = static_cast<long>(pooled.size());
    const long span = std::min<long>(static_cast<long>(n), c.window);
    double ewma = 0.0;
    for (long j = static_cast<long>(n) - span + 1; j <= static_cast<long>(n); ++j) {
      const double x = stream[static_cast<std::size_t>(j - 1)];
      long rank = 0;
      for (double y : pooled) rank += y <= x ? 1 : 0;
      ewma += std::pow(1.0 - c.lambda, static_cast<double>(static_cast<long>(n) - j)) *
              (rank - (N + 1) / 2.0) / N;
    }
    const double var = ewma_variance(c.lambda, span, centered_rank_moments(N));
    Vector v(1);
    v(0) = stream[n - 1];
    EXPECT_NEAR(chart.update(v).statistic, ewma * ewma / var, 1e-10);
  }
}

TEST(Dfewma, ShiftInOneDimensionIsDetected) {
  double total = 0.0;
  const int runs = 20;
  for (int r = 0; r < runs; ++r) {
    const ChartConfig c = fast_config(100 + r);
    std::mt19937_64 rng(500 + r);
    std::normal_distribution<double> g;
    RowMatrix ref(100, 3);
    for (Index i = 0; i < ref.size(); ++i) ref.data()[i] = g(rng);
    DfewmaChart chart(ref, c);
    int rl = 0;
    for (;;) {
      ++rl;
      Vector v(3);
      v << g(rng) + 3.0, g(rng), g(rng);
      if (chart.update(v).alarm || rl >= 200) break;
    }
    total += rl;
  }
  EXPECT_LT(total / runs, 0.5 * 20.0);
}

TEST(Dfewma, DimensionChecked) {
  RowMatrix ref(10, 2);
  ref.setRandom();
  DfewmaChart chart(ref, fast_config(1));
  EXPECT_THROW(chart.update(Vector::Zero(3)), DimensionMismatch);
}
