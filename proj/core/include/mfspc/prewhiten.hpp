#pragma once

#include <deque>
#include <span>
#include <vector>

namespace mfspc {

/// Univariate autoregressive model x_t - mean = sum_i phi_i (x_{t-i} - mean) + e_t.
struct ARModel {
  std::vector<double> coefficients;  ///< phi_1 .. phi_p
  double mean = 0.0;
  double innovation_variance = 1.0;

  int order() const noexcept { return static_cast<int>(coefficients.size()); }
};

/// Yule-Walker estimate through the Levinson-Durbin recursion on the biased
/// sample autocovariances, which always yields a causal filter.
/// Throws TooShort (length <= p + 1) or DegenerateVariance.
ARModel fit_ar(std::span<const double> series, int p);

/// Innovation variances sigma^2_0 .. sigma^2_{p_max} from one recursion.
std::vector<double> innovation_variances(std::span<const double> series, int p_max);

/// argmin_p n log(sigma^2_p) + 2p over 0..p_max; ties go to the smaller order.
int select_order_aic(std::span<const double> series, int p_max);

/// One-step forecast residual. `history` is ordered oldest to newest; missing
/// values (fewer than p) are taken to equal the model mean.
double filter_residual(const ARModel& model, std::span<const double> history, double x_new);

/// Spectral radius of the companion matrix of phi; < 1 for a causal filter.
double companion_spectral_radius(const ARModel& model);

/// Streaming residual filter holding the last p inputs.
class ARFilter {
 public:
  explicit ARFilter(ARModel model);

  /// Seeds the history with past observations (oldest first) without emitting.
  void prime(std::span<const double> past);
  /// Residual for x, then x joins the history.
  double push(double x);

  const ARModel& model() const noexcept { return model_; }

 private:
  ARModel model_;
  std::deque<double> history_;  // oldest first, at most p values
  std::vector<double> scratch_;
};

}  // namespace mfspc
