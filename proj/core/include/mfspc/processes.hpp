#pragma once

#include "mfspc/point_cloud.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <vector>

namespace mfspc {

/// Time-ordered D-dimensional observations, optionally with a sustained mean
/// shift that starts at the 1-based index `tau`.
struct Series {
  RowMatrix observations;  ///< one row per time step
  std::optional<Index> tau;
  std::optional<Vector> delta;
  RowMatrix latent;  ///< noiseless states when generated synthetically (else empty)

  Index length() const noexcept { return observations.rows(); }
  Index dim() const noexcept { return observations.cols(); }
  PointCloud cloud() const { return PointCloud(observations); }
  /// Rows [first, first + count) as a point cloud.
  PointCloud rows(Index first, Index count) const;
};

struct SphereConfig {
  Index d = 2;           ///< intrinsic dimension of the sphere
  Index D = 3;           ///< ambient dimension, >= d + 1
  double sigma_x = 0.3;  ///< latent step noise
  double sigma = 0.1;    ///< observation noise
  Index n = 1000;
  std::uint64_t seed = 1;

  void validate() const;
};

/// (y_1..y_{d+1}, 0, ..., 0) / ||(y_1..y_{d+1})||. Throws KernelPoint when the
/// leading d+1 coordinates are all zero.
Vector sphere_project(const Vector& y, Index d);

/// Streaming form of the sphere process: X_t = proj(X_{t-1} + E_t),
/// Y_t = X_t + eps_t. Copying a process forks it at its current state.
class SphereProcess {
 public:
  explicit SphereProcess(const SphereConfig& config);

  struct Step {
    Vector latent;
    Vector observed;
  };
  Step next();

  const SphereConfig& config() const noexcept { return config_; }
  const Vector& state() const noexcept { return state_; }

 private:
  SphereConfig config_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_;
  Vector state_;
};

/// n consecutive observations of a fresh SphereProcess (latent path included).
Series generate_sphere_process(const SphereConfig& config);

/// Adds delta to every observation at 1-based index >= tau.
Series inject_mean_shift(Series series, Index tau, const Vector& delta);

/// delta_sigma * sigma along 1-based coordinate `dim` of a D-vector.
Vector coordinate_shift(Index D, Index dim, double delta_sigma, double sigma);

struct SubspaceOracleConfig {
  Index d = 2;
  Index D = 5;
  Index n = 1000;
  double sigma = 1.0;
  Vector delta;  ///< empty means no shift
  std::optional<Index> tau;  ///< 1-based change point; defaults to n/2 + 1
  double box_half_width = 10.0;  ///< latent points uniform in [-b, b]^d
  std::uint64_t seed = 1;
};

struct SubspaceOracle {
  Series series;
  std::vector<double> squared_deviations;  ///< exact ||Q Y_t||^2
};

/// Observations near the span of the first d coordinates, with exact squared
/// distances to that subspace.
SubspaceOracle linear_subspace_oracle(const SubspaceOracleConfig& config);

/// Rectangular numeric CSV, optional single header row. Throws ParseError.
Series load_series_csv(const std::filesystem::path& path);
/// Writes rows with 17 significant digits; optional header of column names.
void write_series_csv(const std::filesystem::path& path, const RowMatrix& observations,
                      const std::vector<std::string>& header = {});

}  // namespace mfspc
