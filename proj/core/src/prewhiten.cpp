#include "mfspc/prewhiten.hpp"

#include "mfspc/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <string>

namespace mfspc {

namespace {

struct Recursion {
  double mean = 0.0;
  std::vector<std::vector<double>> phi;  // phi[p] holds the order-p coefficients
  std::vector<double> variance;          // innovation variance per order
};

Recursion levinson_durbin(std::span<const double> series, int p_max) {
  if (p_max < 0) throw InvalidArgument("AR order must be nonnegative");
  const std::size_t n = series.size();
  if (n <= static_cast<std::size_t>(p_max) + 1) {
    throw TooShort("series of length " + std::to_string(n) + " is too short for AR order " +
                   std::to_string(p_max));
  }
  Recursion r;
  for (double x : series) r.mean += x;
  r.mean /= static_cast<double>(n);

  std::vector<double> gamma(static_cast<std::size_t>(p_max) + 1, 0.0);
  for (int lag = 0; lag <= p_max; ++lag) {
    double acc = 0.0;
    for (std::size_t t = static_cast<std::size_t>(lag); t < n; ++t) {
      acc += (series[t] - r.mean) * (series[t - static_cast<std::size_t>(lag)] - r.mean);
    }
    gamma[static_cast<std::size_t>(lag)] = acc / static_cast<double>(n);
  }
  if (!(gamma[0] > 0.0)) throw DegenerateVariance("series has zero sample variance");

  r.phi.assign(static_cast<std::size_t>(p_max) + 1, {});
  r.variance.assign(static_cast<std::size_t>(p_max) + 1, 0.0);
  r.variance[0] = gamma[0];
  std::vector<double> prev;
  for (int k = 1; k <= p_max; ++k) {
    double num = gamma[static_cast<std::size_t>(k)];
    for (int j = 1; j < k; ++j) {
      num -= prev[static_cast<std::size_t>(j - 1)] * gamma[static_cast<std::size_t>(k - j)];
    }
    const double prev_var = r.variance[static_cast<std::size_t>(k - 1)];
    const double kappa = prev_var > 0.0 ? num / prev_var : 0.0;
    std::vector<double> cur(static_cast<std::size_t>(k));
    for (int j = 1; j < k; ++j) {
      cur[static_cast<std::size_t>(j - 1)] =
          prev[static_cast<std::size_t>(j - 1)] - kappa * prev[static_cast<std::size_t>(k - j - 1)];
    }
    cur[static_cast<std::size_t>(k - 1)] = kappa;
    r.variance[static_cast<std::size_t>(k)] = prev_var * (1.0 - kappa * kappa);
    r.phi[static_cast<std::size_t>(k)] = cur;
    prev = std::move(cur);
  }
  return r;
}

}  // namespace

ARModel fit_ar(std::span<const double> series, int p) {
  Recursion r = levinson_durbin(series, p);
  ARModel model;
  model.coefficients = std::move(r.phi[static_cast<std::size_t>(p)]);
  model.mean = r.mean;
  // Guard against an exactly predictable sample.
  model.innovation_variance =
      std::max(r.variance[static_cast<std::size_t>(p)],
               std::numeric_limits<double>::min());
  return model;
}

std::vector<double> innovation_variances(std::span<const double> series, int p_max) {
  return levinson_durbin(series, p_max).variance;
}

int select_order_aic(std::span<const double> series, int p_max) {
  const std::vector<double> var = innovation_variances(series, p_max);
  const double n = static_cast<double>(series.size());
  int best = 0;
  double best_aic = std::numeric_limits<double>::infinity();
  for (int p = 0; p <= p_max; ++p) {
    const double v = std::max(var[static_cast<std::size_t>(p)], std::numeric_limits<double>::min());
    const double aic = n * std::log(v) + 2.0 * p;
    if (aic < best_aic) {
      best_aic = aic;
      best = p;
    }
  }
  return best;
}

double filter_residual(const ARModel& model, std::span<const double> history, double x_new) {
  double residual = x_new - model.mean;
  const std::size_t h = history.size();
  for (std::size_t i = 0; i < model.coefficients.size(); ++i) {
    // phi_{i+1} pairs with the (i+1)-th most recent value.
    if (i < h) residual -= model.coefficients[i] * (history[h - 1 - i] - model.mean);
  }
  return residual;
}

double companion_spectral_radius(const ARModel& model) {
  const int p = model.order();
  if (p == 0) return 0.0;
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(p, p);
  for (int i = 0; i < p; ++i) companion(0, i) = model.coefficients[static_cast<std::size_t>(i)];
  for (int i = 1; i < p; ++i) companion(i, i - 1) = 1.0;
  return companion.eigenvalues().cwiseAbs().maxCoeff();
}

ARFilter::ARFilter(ARModel model) : model_(std::move(model)) {}

void ARFilter::prime(std::span<const double> past) {
  for (double x : past) {
    history_.push_back(x);
    if (static_cast<int>(history_.size()) > model_.order()) history_.pop_front();
  }
}

double ARFilter::push(double x) {
  scratch_.assign(history_.begin(), history_.end());
  const double residual = filter_residual(model_, scratch_, x);
  prime(std::span<const double>(&x, 1));
  return residual;
}

}  // namespace mfspc
