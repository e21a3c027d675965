#pragma once

#include "mfspc/neighbor_index.hpp"
#include "mfspc/point_cloud.hpp"

#include <memory>
#include <optional>
#include <vector>

namespace mfspc {

/// How a sparse neighborhood is enlarged: while fewer than `min_points` points
/// carry positive weight, the radius is multiplied by `factor`, at most
/// `max_growths` times.
struct GrowthPolicy {
  Index min_points = 5;
  double factor = 1.5;
  int max_growths = 10;
};

struct FitConfig {
  double C0 = 5.0;  ///< contraction-ball radius r0 = C0 * sigma
  double C1 = 3.0;  ///< cylinder cross-section radius r1 = C1 * sigma
  double C2 = 5.0;  ///< cylinder half-length r2 = C2 * sigma * sqrt(log(1/sigma))
  int k = 3;        ///< weight exponent, >= 2
  std::optional<Index> d_hint;  ///< intrinsic dimension used by the noise estimate
  Index min_ball_points = 5;
  double radius_growth = 1.5;
  int max_radius_growths = 10;

  // Noise-level iteration (used when sigma is not supplied).
  double sigma0 = 0.05;
  double tolerance = 1e-4;
  int max_iterations = 50;

  /// Throws InvalidArgument naming the offending field.
  void validate() const;
  GrowthPolicy growth() const { return {min_ball_points, radius_growth, max_radius_growths}; }
};

struct Radii {
  double r0 = 0.0;
  double r1 = 0.0;
  double r2 = 0.0;
};

/// r0 = C0 s, r1 = C1 s, r2 = C2 s sqrt(max(1, ln(1/s))).
Radii radii_for(double sigma, const FitConfig& config);

/// Normalized weights of the points that received positive weight.
struct WeightedSupport {
  std::vector<Index> indices;  ///< ascending
  std::vector<double> weights;  ///< sums to 1
  int growths = 0;  ///< number of radius enlargements applied
};

/// Ball weights (1 - ||Y_t - z||^2 / r0^2)^k inside the ball of radius r0.
WeightedSupport direction_weights(const PointCloud& cloud, const Vector& z, double r0, int k,
                                  const GrowthPolicy& growth = {},
                                  const KdTree* index = nullptr);

/// Cylinder weights w_u(u_t) * w_v(v_t) around the axis through z along
/// `direction`. Throws DegenerateDirection for a zero direction.
WeightedSupport cylinder_weights(const PointCloud& cloud, const Vector& z,
                                 const Vector& direction, double r1, double r2, int k,
                                 const GrowthPolicy& growth = {},
                                 const KdTree* index = nullptr);

struct DirectionEstimate {
  Vector direction;  ///< mu_z - z
  int growths = 0;
  Index support = 0;
};

/// Weighted ball mean minus z. Throws EmptyNeighborhood.
DirectionEstimate estimate_contraction_direction(const PointCloud& cloud, const Vector& z,
                                                 double r0, int k,
                                                 const GrowthPolicy& growth = {},
                                                 const KdTree* index = nullptr);

struct ContractionEstimate {
  Vector point;  ///< estimated projection of z
  int growths = 0;
  Index support = 0;
};

/// Weighted cylinder mean. Throws EmptyCylinder or DegenerateDirection.
ContractionEstimate contract_point(const PointCloud& cloud, const Vector& z,
                                   const Vector& direction, double r1, double r2, int k,
                                   const GrowthPolicy& growth = {},
                                   const KdTree* index = nullptr);

struct Projection {
  Vector point;
  Vector direction;
  int direction_growths = 0;
  int cylinder_growths = 0;
};

/// Contraction direction followed by the cylinder step. When the ball mean
/// coincides with z the direction is zero and z itself is returned.
Projection project_point(const PointCloud& cloud, const Vector& z, const Radii& radii, int k,
                         const GrowthPolicy& growth = {}, const KdTree* index = nullptr);

struct NoiseEstimate {
  double sigma = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> history;  ///< sigma^(0), sigma^(1), ...
};

/// Fixed-point iteration sigma <- sqrt(sum ||Y_t - proj(Y_t)||^2 / (m (D - d))),
/// re-deriving the radii from the current iterate at every step.
NoiseEstimate estimate_noise(const PointCloud& cloud, Index d, double sigma0, double eps,
                             int max_iterations, const FitConfig& config);

/// Frozen Phase I cloud plus everything needed to project new points onto the
/// implicitly fitted manifold. Cheap to copy; safe to share between threads.
class FittedManifold {
 public:
  FittedManifold(PointCloud cloud, double sigma_hat, const FitConfig& config);

  const PointCloud& cloud() const noexcept { return *cloud_; }
  const KdTree& index() const noexcept { return *index_; }
  double sigma_hat() const noexcept { return sigma_hat_; }
  const Radii& radii() const noexcept { return radii_; }
  double r0() const noexcept { return radii_.r0; }
  double r1() const noexcept { return radii_.r1; }
  double r2() const noexcept { return radii_.r2; }
  int k() const noexcept { return k_; }
  const GrowthPolicy& growth() const noexcept { return growth_; }
  Index dim() const noexcept { return cloud_->dim(); }

  Projection project(const Vector& z) const;

 private:
  std::shared_ptr<const PointCloud> cloud_;
  std::shared_ptr<const KdTree> index_;
  double sigma_hat_;
  Radii radii_;
  int k_;
  GrowthPolicy growth_;
};

struct ManifoldFit {
  FittedManifold manifold;
  std::optional<NoiseEstimate> noise;  ///< present when sigma was estimated
};

/// Estimates sigma (unless given), derives the radii and indexes the cloud.
ManifoldFit fit_manifold(PointCloud phase1, const FitConfig& config,
                         std::optional<double> sigma = std::nullopt);

/// ||z - proj(z)|| on the fitted manifold.
double deviation(const FittedManifold& fit, const Vector& z);

}  // namespace mfspc
