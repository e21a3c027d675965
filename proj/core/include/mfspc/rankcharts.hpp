#pragma once

#include "mfspc/point_cloud.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace mfspc {

/// Null moments of a rank score for a pooled sample of size N.
struct RankMoments {
  long N = 0;
  double mean = 0.0;
  double variance = 0.0;
  double covariance = 0.0;  ///< between two distinct scores, -variance / (N - 1)
};

/// Moments of Z = max(0, R - (N+1)/2) / N with R uniform on 1..N.
RankMoments rank_moments(long N);

/// Moments of the centered rank (R - (N+1)/2) / N with R uniform on 1..N.
RankMoments centered_rank_moments(long N);

/// Null variance of sum_{j=1}^{L} (1-lambda)^{L-j} Z_j for L distinct scores
/// drawn without replacement from one pooled sample.
double ewma_variance(double lambda, long L, const RankMoments& moments);

/// Standardized one-sided rank-sum statistic of `candidates` against
/// `reference`. Ties are ranked by position in the pooled order.
double two_sample_statistic(std::span<const double> reference,
                            std::span<const double> candidates);

/// Ascending order statistic at index ceil((1 - alpha) * size).
double upper_quantile(std::vector<double> values, double alpha);

/// alpha upper quantile of the two-sample statistic over B random relabelings
/// of `pooled` into m reference and n candidate values.
double permutation_quantile(std::span<const double> pooled, long m, long n, double alpha,
                            int B, std::mt19937_64& rng);

struct ChartConfig {
  int window = 5;        ///< w, number of most recent scores in the statistic
  double lambda = 0.05;  ///< EWMA weight
  double alpha = 0.05;   ///< per-step false-alarm rate
  int permutations = 1000;
  std::uint64_t seed = 1;
  /// Fewer survivors than this triggers extra permutation batches.
  int min_survivors = 50;
  /// Upper bound on drawn replicates, as a multiple of `permutations`.
  int max_permutation_factor = 10;
  /// Number of earlier steps a replicate must not have alarmed on; 0 means `window`.
  int conditioning_window = 0;

  void validate() const;
  int conditioning() const noexcept {
    return conditioning_window > 0 ? conditioning_window : window;
  }
};

/// One charting step, also the record written to trace files.
struct ChartPoint {
  long n = 0;
  double statistic = 0.0;
  double limit = 0.0;
  bool alarm = false;
  /// The conditional replicate pool was exhausted and all replicates were used.
  bool unconditional = false;
  int survivors = 0;
  int replicates = 0;
};

/// Streaming rank chart over d-dimensional observations with permutation
/// control limits conditioned on no alarm in the preceding steps.
///
/// Scores are computed from ranks in the growing pooled sample (reference plus
/// all stream values so far). The one-sided form standardizes the EWMA of
/// upper-half rank scores; the sum-of-squares form adds the squared
/// standardized EWMA of centered ranks over dimensions.
class RankChart {
 public:
  enum class Kind { OneSided, SumOfSquares };

  RankChart(Kind kind, const RowMatrix& reference, const ChartConfig& config);

  ChartPoint update(std::span<const double> x);

  Kind kind() const noexcept { return kind_; }
  long reference_size() const noexcept { return m_; }
  long steps() const noexcept { return n_; }
  Index dims() const noexcept { return dims_; }
  const ChartConfig& config() const noexcept { return config_; }
  const std::vector<double>& limits() const noexcept { return limits_; }

 private:
  struct StepTerms {
    long N = 0;
    long span = 0;          // number of scores in the window
    double center = 0.0;    // sum of weights times null mean
    double inv_sd = 0.0;
  };

  void insert(std::span<const double> x);
  StepTerms terms_for(long k) const;
  double score(long N, long rank) const;
  // Statistic at step k from the ranks of its window, oldest first, laid out
  // as ranks[dim * span + j].
  double statistic(const StepTerms& t, const std::vector<long>& ranks) const;

  Kind kind_;
  ChartConfig config_;
  Index dims_;
  long m_;
  long n_ = 0;
  std::vector<double> weights_;  // (1-lambda)^i, i = 0..window-1
  std::vector<double> jitter_scale_;
  std::vector<std::vector<std::pair<double, long>>> sorted_;  // per dim
  std::vector<std::vector<long>> rank_;                        // per dim, by item
  std::vector<long> pool_;  // item ids for partial Fisher-Yates draws
  std::vector<double> limits_;
  std::mt19937_64 jitter_rng_;
  std::mt19937_64 perm_rng_;
};

/// Univariate one-sided chart for deviations from the fitted manifold.
class UdfmChart {
 public:
  UdfmChart(std::span<const double> reference, const ChartConfig& config);
  ChartPoint update(double x) { return core_.update(std::span<const double>(&x, 1)); }
  const RankChart& core() const noexcept { return core_; }

 private:
  RankChart core_;
};

/// Multivariate two-sided chart for embedded, prewhitened observations.
class DfewmaChart {
 public:
  DfewmaChart(const RowMatrix& reference, const ChartConfig& config);
  ChartPoint update(const Vector& v);
  const RankChart& core() const noexcept { return core_; }

 private:
  RankChart core_;
};

}  // namespace mfspc
