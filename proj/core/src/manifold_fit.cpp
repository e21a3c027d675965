#include "mfspc/manifold_fit.hpp"

#include "mfspc/errors.hpp"

#include <cmath>
#include <string>

namespace mfspc {

namespace {

void check_dim(const PointCloud& cloud, const Vector& z, const char* where) {
  if (z.size() != cloud.dim()) {
    throw DimensionMismatch(std::string(where) + ": point has dimension " +
                            std::to_string(z.size()) + ", cloud has " +
                            std::to_string(cloud.dim()));
  }
}

// Points within `radius` of z, ascending. Identical to the kd-tree result.
void candidates(const PointCloud& cloud, const Vector& z, double radius, const KdTree* index,
                std::vector<Index>& out) {
  if (index != nullptr) {
    index->radius_search(z, radius, out);
    return;
  }
  out.clear();
  const double radius2 = radius * radius;
  const RowMatrix& pts = cloud.matrix();
  for (Index i = 0; i < cloud.size(); ++i) {
    if ((pts.row(i).transpose() - z).squaredNorm() <= radius2) out.push_back(i);
  }
}

void normalize(WeightedSupport& support) {
  double total = 0.0;
  for (double w : support.weights) total += w;
  for (double& w : support.weights) w /= total;
}

Vector weighted_mean(const PointCloud& cloud, const WeightedSupport& support) {
  Vector mean = Vector::Zero(cloud.dim());
  for (std::size_t i = 0; i < support.indices.size(); ++i) {
    mean.noalias() += support.weights[i] * cloud.point(support.indices[i]);
  }
  return mean;
}

}  // namespace

void FitConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw InvalidArgument("FitConfig." + field + ": " + why);
  };
  if (!(C0 > 0.0)) fail("C0", "must be positive");
  if (!(C1 > 0.0)) fail("C1", "must be positive");
  if (!(C2 > 0.0)) fail("C2", "must be positive");
  if (C1 > C0) fail("C1", "must not exceed C0 (r0 >= r1)");
  if (C0 > C2) fail("C2", "must be at least C0 (r2 >= r0)");
  if (k < 2) fail("k", "must be >= 2");
  if (d_hint && *d_hint < 0) fail("d_hint", "must be nonnegative");
  if (min_ball_points < 1) fail("min_ball_points", "must be >= 1");
  if (!(radius_growth > 1.0)) fail("radius_growth", "must be > 1");
  if (max_radius_growths < 0) fail("max_radius_growths", "must be >= 0");
  if (!(sigma0 > 0.0)) fail("sigma0", "must be positive");
  if (!(tolerance > 0.0)) fail("tolerance", "must be positive");
  if (max_iterations < 1) fail("max_iterations", "must be >= 1");
}

Radii radii_for(double sigma, const FitConfig& config) {
  const double log_factor = std::max(1.0, std::log(1.0 / sigma));
  return {config.C0 * sigma, config.C1 * sigma, config.C2 * sigma * std::sqrt(log_factor)};
}

WeightedSupport direction_weights(const PointCloud& cloud, const Vector& z, double r0, int k,
                                  const GrowthPolicy& growth, const KdTree* index) {
  check_dim(cloud, z, "direction_weights");
  if (!(r0 > 0.0)) throw InvalidArgument("direction_weights: r0 must be positive");

  WeightedSupport support;
  std::vector<Index> near;
  double radius = r0;
  for (int attempt = 0;; ++attempt) {
    candidates(cloud, z, radius, index, near);
    support.indices.clear();
    support.weights.clear();
    const double inv_r2 = 1.0 / (radius * radius);
    for (Index i : near) {
      const double w =
          std::pow(1.0 - (cloud.point(i) - z).squaredNorm() * inv_r2, static_cast<double>(k));
      if (w > 0.0) {
        support.indices.push_back(i);
        support.weights.push_back(w);
      }
    }
    support.growths = attempt;
    if (static_cast<Index>(support.indices.size()) >= growth.min_points ||
        attempt >= growth.max_growths) {
      break;
    }
    radius *= growth.factor;
  }
  if (support.indices.empty()) {
    throw EmptyNeighborhood("no Phase I point within radius " + std::to_string(radius) +
                            " after " + std::to_string(support.growths) + " enlargements");
  }
  normalize(support);
  return support;
}

WeightedSupport cylinder_weights(const PointCloud& cloud, const Vector& z,
                                 const Vector& direction, double r1, double r2, int k,
                                 const GrowthPolicy& growth, const KdTree* index) {
  check_dim(cloud, z, "cylinder_weights");
  check_dim(cloud, direction, "cylinder_weights");
  const double norm = direction.norm();
  if (!(norm > 0.0)) throw DegenerateDirection("cylinder_weights: zero contraction direction");
  if (!(r1 > 0.0) || !(r2 > 0.0)) {
    throw InvalidArgument("cylinder_weights: radii must be positive");
  }
  const Vector axis = direction / norm;
  const double kd = static_cast<double>(k);

  WeightedSupport support;
  std::vector<Index> near;
  double rv = r1;
  double ru = r2;
  for (int attempt = 0;; ++attempt) {
    candidates(cloud, z, std::hypot(rv, ru), index, near);
    support.indices.clear();
    support.weights.clear();
    for (Index i : near) {
      const Vector offset = cloud.point(i) - z;
      const double u = std::abs(offset.dot(axis));
      if (u >= ru) continue;
      const double v2 = (offset - offset.dot(axis) * axis).squaredNorm();
      if (v2 >= rv * rv) continue;
      const double wv = std::pow(1.0 - v2 / (rv * rv), kd);
      double wu = 1.0;
      if (u > ru / 2.0) {
        const double s = (2.0 * u - ru) / ru;
        wu = std::pow(1.0 - s * s, kd);
      }
      const double w = wu * wv;
      if (w > 0.0) {
        support.indices.push_back(i);
        support.weights.push_back(w);
      }
    }
    support.growths = attempt;
    if (static_cast<Index>(support.indices.size()) >= growth.min_points ||
        attempt >= growth.max_growths) {
      break;
    }
    rv *= growth.factor;
    ru *= growth.factor;
  }
  if (support.indices.empty()) {
    throw EmptyCylinder("no Phase I point inside the contraction cylinder after " +
                        std::to_string(support.growths) + " enlargements");
  }
  normalize(support);
  return support;
}

DirectionEstimate estimate_contraction_direction(const PointCloud& cloud, const Vector& z,
                                                 double r0, int k, const GrowthPolicy& growth,
                                                 const KdTree* index) {
  const WeightedSupport support = direction_weights(cloud, z, r0, k, growth, index);
  return {weighted_mean(cloud, support) - z, support.growths,
          static_cast<Index>(support.indices.size())};
}

ContractionEstimate contract_point(const PointCloud& cloud, const Vector& z,
                                   const Vector& direction, double r1, double r2, int k,
                                   const GrowthPolicy& growth, const KdTree* index) {
  const WeightedSupport support = cylinder_weights(cloud, z, direction, r1, r2, k, growth, index);
  return {weighted_mean(cloud, support), support.growths,
          static_cast<Index>(support.indices.size())};
}

Projection project_point(const PointCloud& cloud, const Vector& z, const Radii& radii, int k,
                         const GrowthPolicy& growth, const KdTree* index) {
  DirectionEstimate dir = estimate_contraction_direction(cloud, z, radii.r0, k, growth, index);
  Projection out;
  out.direction_growths = dir.growths;
  if (!(dir.direction.squaredNorm() > 0.0)) {
    out.point = z;
    out.direction = std::move(dir.direction);
    return out;
  }
  ContractionEstimate c =
      contract_point(cloud, z, dir.direction, radii.r1, radii.r2, k, growth, index);
  out.point = std::move(c.point);
  out.direction = std::move(dir.direction);
  out.cylinder_growths = c.growths;
  return out;
}

NoiseEstimate estimate_noise(const PointCloud& cloud, Index d, double sigma0, double eps,
                             int max_iterations, const FitConfig& config) {
  if (!(sigma0 > 0.0)) throw InvalidArgument("estimate_noise: sigma0 must be positive");
  if (!(eps > 0.0)) throw InvalidArgument("estimate_noise: eps must be positive");
  if (max_iterations < 1) throw InvalidArgument("estimate_noise: max_iterations must be >= 1");
  if (d < 0 || d >= cloud.dim()) {
    throw InvalidArgument("estimate_noise: intrinsic dimension must satisfy 0 <= d < D");
  }

  auto shared = std::make_shared<const PointCloud>(cloud);
  const KdTree index(shared);
  const GrowthPolicy growth = config.growth();
  const double denom = static_cast<double>(cloud.size()) * static_cast<double>(cloud.dim() - d);

  NoiseEstimate est;
  est.history.push_back(sigma0);
  double sigma = sigma0;
  for (int i = 1; i <= max_iterations; ++i) {
    const Radii radii = radii_for(sigma, config);
    double sum = 0.0;
    for (Index t = 0; t < cloud.size(); ++t) {
      const Vector y = cloud.point(t);
      sum += (y - project_point(*shared, y, radii, config.k, growth, &index).point).squaredNorm();
    }
    const double next = std::sqrt(sum / denom);
    est.history.push_back(next);
    est.iterations = i;
    const double change = std::abs(next - sigma);
    sigma = next;
    if (!(sigma > 0.0)) break;  // noiseless cloud; radii would collapse
    if (change < eps) {
      est.converged = true;
      break;
    }
  }
  est.sigma = sigma;
  return est;
}

FittedManifold::FittedManifold(PointCloud cloud, double sigma_hat, const FitConfig& config)
    : cloud_(std::make_shared<const PointCloud>(std::move(cloud))),
      sigma_hat_(sigma_hat),
      k_(config.k),
      growth_(config.growth()) {
  config.validate();
  if (!(sigma_hat > 0.0) || !std::isfinite(sigma_hat)) {
    throw InvalidArgument("FittedManifold: sigma_hat must be positive and finite, got " +
                          std::to_string(sigma_hat));
  }
  radii_ = radii_for(sigma_hat, config);
  index_ = std::make_shared<const KdTree>(cloud_);
}

Projection FittedManifold::project(const Vector& z) const {
  return project_point(*cloud_, z, radii_, k_, growth_, index_.get());
}

ManifoldFit fit_manifold(PointCloud phase1, const FitConfig& config, std::optional<double> sigma) {
  config.validate();
  std::optional<NoiseEstimate> noise;
  if (!sigma) {
    noise = estimate_noise(phase1, config.d_hint.value_or(0), config.sigma0, config.tolerance,
                           config.max_iterations, config);
    sigma = noise->sigma;
  }
  return {FittedManifold(std::move(phase1), *sigma, config), std::move(noise)};
}

double deviation(const FittedManifold& fit, const Vector& z) {
  if (z.size() != fit.dim()) {
    throw DimensionMismatch("deviation: point dimension " + std::to_string(z.size()) +
                            " != manifold ambient dimension " + std::to_string(fit.dim()));
  }
  return (z - fit.project(z).point).norm();
}

}  // namespace mfspc
