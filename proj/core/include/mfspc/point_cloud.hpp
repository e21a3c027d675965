#pragma once

#include <Eigen/Core>

#include <vector>

namespace mfspc {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
/// Row-major storage so that each observation is contiguous.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A non-empty set of m observations in R^D, one per row.
class PointCloud {
 public:
  /// Throws InvalidArgument when `points` has no rows, no columns, or a
  /// non-finite entry.
  explicit PointCloud(RowMatrix points);
  static PointCloud from_rows(const std::vector<Vector>& rows);

  Index size() const noexcept { return points_.rows(); }
  Index dim() const noexcept { return points_.cols(); }

  auto point(Index i) const { return points_.row(i).transpose(); }
  const RowMatrix& matrix() const noexcept { return points_; }

  /// Contiguous rows [first, first + count).
  PointCloud slice(Index first, Index count) const;

 private:
  RowMatrix points_;
};

}  // namespace mfspc
