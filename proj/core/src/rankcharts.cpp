#include "mfspc/rankcharts.hpp"

#include "mfspc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace mfspc {

namespace {

// num / den with one rounding when both fit a double exactly.
double ratio(__int128 num, __int128 den) {
  constexpr __int128 kExact = __int128{1} << 53;
  const __int128 a = num < 0 ? -num : num;
  if (a < kExact && den < kExact) return static_cast<double>(num) / static_cast<double>(den);
  return static_cast<double>(static_cast<long double>(num) / static_cast<long double>(den));
}

}  // namespace

RankMoments rank_moments(long N) {
  if (N < 2) throw InvalidArgument("rank_moments: N must be >= 2");
  const __int128 n = N;
  const __int128 n2 = n * n;
  RankMoments out;
  out.N = N;
  if (N % 2 == 0) {
    out.mean = 0.125;
    out.variance = ratio(5 * n2 - 8, 192 * n2);
    out.covariance = ratio(-(5 * n2 - 8), 192 * n2 * (n - 1));
  } else {
    out.mean = ratio(n2 - 1, 8 * n2);
    out.variance = ratio((n2 - 1) * (5 * n2 + 3), 192 * n2 * n2);
    out.covariance = ratio(-(n2 - 1) * (5 * n2 + 3), 192 * n2 * n2 * (n - 1));
  }
  return out;
}

RankMoments centered_rank_moments(long N) {
  if (N < 2) throw InvalidArgument("centered_rank_moments: N must be >= 2");
  const double n = static_cast<double>(N);
  RankMoments out;
  out.N = N;
  out.mean = 0.0;
  out.variance = (n * n - 1.0) / (12.0 * n * n);
  out.covariance = -out.variance / (n - 1.0);
  return out;
}

double ewma_variance(double lambda, long L, const RankMoments& moments) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw InvalidArgument("ewma_variance: lambda in (0,1)");
  if (L < 1) throw InvalidArgument("ewma_variance: L must be >= 1");
  const double q = 1.0 - lambda;
  double A = 0.0;
  double S = 0.0;
  double a = 1.0;
  for (long k = 0; k < L; ++k) {
    A += a * a;
    S += a;
    a *= q;
  }
  const double nm1 = static_cast<double>(moments.N) - 1.0;
  return moments.variance * (1.0 + 1.0 / nm1) * A - moments.variance * S * S / nm1;
}

namespace {

// 1-based ranks, ties broken by position.
std::vector<long> ranks_of(std::span<const double> values) {
  std::vector<long> order(values.size());
  std::iota(order.begin(), order.end(), 0L);
  std::stable_sort(order.begin(), order.end(),
                   [&](long a, long b) { return values[static_cast<std::size_t>(a)] <
                                                values[static_cast<std::size_t>(b)]; });
  std::vector<long> rank(values.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    rank[static_cast<std::size_t>(order[r])] = static_cast<long>(r) + 1;
  }
  return rank;
}

std::mt19937_64 seeded_engine(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32), stream};
  return std::mt19937_64(seq);
}

double upper_score(long N, long rank) {
  return std::max(0.0, static_cast<double>(rank) - (static_cast<double>(N) + 1.0) / 2.0) /
         static_cast<double>(N);
}

double two_sample_from_sum(double score_sum, long n, const RankMoments& mom) {
  const double nn = static_cast<double>(n);
  const double scale =
      std::sqrt(mom.variance) *
      std::sqrt(nn * (1.0 - (nn - 1.0) / (static_cast<double>(mom.N) - 1.0)));
  return (score_sum - nn * mom.mean) / scale;
}

}  // namespace

double two_sample_statistic(std::span<const double> reference,
                            std::span<const double> candidates) {
  if (reference.empty() || candidates.empty()) {
    throw InvalidArgument("two_sample_statistic: both samples must be non-empty");
  }
  std::vector<double> pooled(reference.begin(), reference.end());
  pooled.insert(pooled.end(), candidates.begin(), candidates.end());
  const long N = static_cast<long>(pooled.size());
  const std::vector<long> rank = ranks_of(pooled);
  double sum = 0.0;
  for (std::size_t j = reference.size(); j < pooled.size(); ++j) sum += upper_score(N, rank[j]);
  return two_sample_from_sum(sum, static_cast<long>(candidates.size()), rank_moments(N));
}

double upper_quantile(std::vector<double> values, double alpha) {
  if (values.empty()) throw InvalidArgument("upper_quantile: no values");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("upper_quantile: alpha in (0,1)");
  const double size = static_cast<double>(values.size());
  long idx = static_cast<long>(std::ceil((1.0 - alpha) * size - 1e-9));
  idx = std::clamp(idx, 1L, static_cast<long>(values.size()));
  auto nth = values.begin() + (idx - 1);
  std::nth_element(values.begin(), nth, values.end());
  return *nth;
}

double permutation_quantile(std::span<const double> pooled, long m, long n, double alpha,
                            int B, std::mt19937_64& rng) {
  if (m < 1 || n < 1 || static_cast<std::size_t>(m + n) != pooled.size()) {
    throw InvalidArgument("permutation_quantile: pooled size must equal m + n with m, n >= 1");
  }
  if (B < 200) throw InvalidArgument("permutation_quantile: need at least 200 replicates");
  const long N = m + n;
  const RankMoments mom = rank_moments(N);
  const std::vector<long> rank = ranks_of(pooled);
  std::vector<double> score(static_cast<std::size_t>(N));
  for (long i = 0; i < N; ++i) score[static_cast<std::size_t>(i)] = upper_score(N, rank[static_cast<std::size_t>(i)]);

  std::vector<long> pool(static_cast<std::size_t>(N));
  std::iota(pool.begin(), pool.end(), 0L);
  std::vector<double> stats(static_cast<std::size_t>(B));
  for (int b = 0; b < B; ++b) {
    double sum = 0.0;
    for (long i = 0; i < n; ++i) {
      std::uniform_int_distribution<long> pick(i, N - 1);
      std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
      sum += score[static_cast<std::size_t>(pool[static_cast<std::size_t>(i)])];
    }
    stats[static_cast<std::size_t>(b)] = two_sample_from_sum(sum, n, mom);
  }
  return upper_quantile(std::move(stats), alpha);
}

void ChartConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw InvalidArgument("ChartConfig." + field + ": " + why);
  };
  if (window < 1) fail("window", "must be >= 1");
  if (!(lambda > 0.0 && lambda < 1.0)) fail("lambda", "must lie in (0, 1)");
  if (!(alpha > 0.0 && alpha < 1.0)) fail("alpha", "must lie in (0, 1)");
  if (permutations < 200) fail("permutations", "must be >= 200");
  if (min_survivors < 1) fail("min_survivors", "must be >= 1");
  if (max_permutation_factor < 1) fail("max_permutation_factor", "must be >= 1");
  if (conditioning_window < 0) fail("conditioning_window", "must be >= 0");
}

RankChart::RankChart(Kind kind, const RowMatrix& reference, const ChartConfig& config)
    : kind_(kind),
      config_(config),
      dims_(reference.cols()),
      m_(static_cast<long>(reference.rows())),
      jitter_rng_(seeded_engine(config.seed, 1)),
      perm_rng_(seeded_engine(config.seed, 2)) {
  config_.validate();
  if (m_ < 1 || dims_ < 1) throw InvalidArgument("RankChart: empty reference sample");
  if (kind_ == Kind::OneSided && dims_ != 1) {
    throw InvalidArgument("RankChart: the one-sided chart is univariate");
  }
  if (!reference.allFinite()) throw InvalidArgument("RankChart: non-finite reference value");

  weights_.resize(static_cast<std::size_t>(config_.window));
  double a = 1.0;
  for (double& w : weights_) {
    w = a;
    a *= 1.0 - config_.lambda;
  }
  jitter_scale_.resize(static_cast<std::size_t>(dims_));
  for (Index d = 0; d < dims_; ++d) {
    const double range = reference.col(d).maxCoeff() - reference.col(d).minCoeff();
    jitter_scale_[static_cast<std::size_t>(d)] = 1e-9 * (range > 0.0 ? range : 1.0);
  }
  sorted_.resize(static_cast<std::size_t>(dims_));
  rank_.resize(static_cast<std::size_t>(dims_));
  for (Index i = 0; i < reference.rows(); ++i) {
    const Vector row = reference.row(i).transpose();
    insert(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
  }
}

void RankChart::insert(std::span<const double> x) {
  const long item = static_cast<long>(pool_.size());
  std::uniform_real_distribution<double> unit(-0.5, 0.5);
  for (Index d = 0; d < dims_; ++d) {
    const auto du = static_cast<std::size_t>(d);
    const double value = x[du] + jitter_scale_[du] * unit(jitter_rng_);
    auto& sorted = sorted_[du];
    auto& rank = rank_[du];
    const std::pair<double, long> key{value, item};
    const auto pos = std::lower_bound(sorted.begin(), sorted.end(), key);
    const std::size_t at = static_cast<std::size_t>(pos - sorted.begin());
    sorted.insert(pos, key);
    rank.push_back(0);
    for (std::size_t i = at; i < sorted.size(); ++i) {
      rank[static_cast<std::size_t>(sorted[i].second)] = static_cast<long>(i) + 1;
    }
  }
  pool_.push_back(item);
}

RankChart::StepTerms RankChart::terms_for(long k) const {
  StepTerms t;
  t.N = m_ + k;
  t.span = std::min<long>(k, config_.window);
  const RankMoments mom =
      kind_ == Kind::OneSided ? rank_moments(t.N) : centered_rank_moments(t.N);
  double weight_sum = 0.0;
  for (long i = 0; i < t.span; ++i) weight_sum += weights_[static_cast<std::size_t>(i)];
  t.center = mom.mean * weight_sum;
  t.inv_sd = 1.0 / std::sqrt(ewma_variance(config_.lambda, t.span, mom));
  return t;
}

double RankChart::score(long N, long rank) const {
  if (kind_ == Kind::OneSided) return upper_score(N, rank);
  return (static_cast<double>(rank) - (static_cast<double>(N) + 1.0) / 2.0) /
         static_cast<double>(N);
}

double RankChart::statistic(const StepTerms& t, const std::vector<long>& ranks) const {
  const auto span = static_cast<std::size_t>(t.span);
  double total = 0.0;
  for (Index d = 0; d < dims_; ++d) {
    double ewma = 0.0;
    for (std::size_t j = 0; j < span; ++j) {
      ewma += weights_[span - 1 - j] * score(t.N, ranks[static_cast<std::size_t>(d) * span + j]);
    }
    const double z = (ewma - t.center) * t.inv_sd;
    total += kind_ == Kind::OneSided ? z : z * z;
  }
  return total;
}

ChartPoint RankChart::update(std::span<const double> x) {
  if (static_cast<Index>(x.size()) != dims_) {
    throw DimensionMismatch("RankChart::update: expected " + std::to_string(dims_) +
                            " values, got " + std::to_string(x.size()));
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw InvalidArgument("RankChart::update: non-finite value");
  }
  insert(x);
  ++n_;
  const long n = n_;
  const long N = m_ + n;
  const long w = config_.window;
  const long k_lo = std::max<long>(1, n - config_.conditioning());
  const long first = std::max<long>(1, k_lo - w + 1);  // earliest step any window touches
  const long L = n - first + 1;

  std::vector<StepTerms> terms;
  terms.reserve(static_cast<std::size_t>(n - k_lo + 1));
  for (long k = k_lo; k <= n; ++k) terms.push_back(terms_for(k));

  // Realized statistic: the last `span` stream items with their current ranks.
  ChartPoint point;
  point.n = n;
  std::vector<long> ranks;
  {
    const StepTerms& t = terms.back();
    ranks.assign(static_cast<std::size_t>(dims_ * t.span), 0);
    for (Index d = 0; d < dims_; ++d) {
      for (long j = 0; j < t.span; ++j) {
        const long item = m_ + (n - t.span + j);  // step s is item m + s - 1
        ranks[static_cast<std::size_t>(d * t.span + j)] =
            rank_[static_cast<std::size_t>(d)][static_cast<std::size_t>(item)];
      }
    }
    point.statistic = statistic(t, ranks);
  }

  // Permutation replicates: draw the items occupying steps first..n uniformly
  // from the pooled sample; everything earlier stays inside every prefix.
  std::vector<long> chosen(static_cast<std::size_t>(L));
  std::vector<double> all_stats;
  std::vector<double> survivors;
  auto run_batch = [&](int count) {
    for (int b = 0; b < count; ++b) {
      for (long i = 0; i < L; ++i) {
        std::uniform_int_distribution<long> pick(i, N - 1);
        std::swap(pool_[static_cast<std::size_t>(i)],
                  pool_[static_cast<std::size_t>(pick(perm_rng_))]);
        chosen[static_cast<std::size_t>(i)] = pool_[static_cast<std::size_t>(i)];
      }
      bool alive = true;
      double final_stat = 0.0;
      for (long k = alive ? k_lo : n; k <= n; ++k) {
        if (!alive && k < n) continue;
        const StepTerms& t = terms[static_cast<std::size_t>(k - k_lo)];
        ranks.assign(static_cast<std::size_t>(dims_ * t.span), 0);
        for (Index d = 0; d < dims_; ++d) {
          const auto& global = rank_[static_cast<std::size_t>(d)];
          for (long j = 0; j < t.span; ++j) {
            const long step = k - t.span + 1 + j;
            long r = global[static_cast<std::size_t>(chosen[static_cast<std::size_t>(step - first)])];
            const long base = r;
            // Items at steps after k are not yet in the pooled sample of step k.
            for (long q = k + 1; q <= n; ++q) {
              if (global[static_cast<std::size_t>(chosen[static_cast<std::size_t>(q - first)])] < base) --r;
            }
            ranks[static_cast<std::size_t>(d * t.span + j)] = r;
          }
        }
        const double s = statistic(t, ranks);
        if (k < n) {
          if (s > limits_[static_cast<std::size_t>(k - 1)]) alive = false;
        } else {
          final_stat = s;
        }
      }
      all_stats.push_back(final_stat);
      if (alive) survivors.push_back(final_stat);
    }
  };

  const int B = config_.permutations;
  run_batch(B);
  int drawn = B;
  while (static_cast<int>(survivors.size()) < config_.min_survivors &&
         drawn < config_.max_permutation_factor * B) {
    run_batch(B);
    drawn += B;
  }
  point.replicates = drawn;
  point.survivors = static_cast<int>(survivors.size());
  if (point.survivors >= config_.min_survivors) {
    point.limit = upper_quantile(std::move(survivors), config_.alpha);
  } else {
    point.limit = upper_quantile(std::move(all_stats), config_.alpha);
    point.unconditional = true;
  }
  point.alarm = point.statistic > point.limit;
  limits_.push_back(point.limit);
  return point;
}

namespace {
RowMatrix column_of(std::span<const double> values) {
  RowMatrix m(static_cast<Index>(values.size()), 1);
  for (std::size_t i = 0; i < values.size(); ++i) m(static_cast<Index>(i), 0) = values[i];
  return m;
}
}  // namespace

UdfmChart::UdfmChart(std::span<const double> reference, const ChartConfig& config)
    : core_(RankChart::Kind::OneSided, column_of(reference), config) {}

DfewmaChart::DfewmaChart(const RowMatrix& reference, const ChartConfig& config)
    : core_(RankChart::Kind::SumOfSquares, reference, config) {}

ChartPoint DfewmaChart::update(const Vector& v) {
  return core_.update(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

}  // namespace mfspc
