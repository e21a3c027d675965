#include "mfspc/point_cloud.hpp"

#include "mfspc/errors.hpp"

#include <string>

namespace mfspc {

PointCloud::PointCloud(RowMatrix points) : points_(std::move(points)) {
  if (points_.rows() < 1 || points_.cols() < 1) {
    throw InvalidArgument("PointCloud: at least one point of dimension >= 1 is required");
  }
  if (!points_.allFinite()) {
    throw InvalidArgument("PointCloud: non-finite coordinate");
  }
}

PointCloud PointCloud::from_rows(const std::vector<Vector>& rows) {
  if (rows.empty()) {
    throw InvalidArgument("PointCloud: at least one point is required");
  }
  const Index dim = rows.front().size();
  RowMatrix points(static_cast<Index>(rows.size()), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != dim) {
      throw DimensionMismatch("PointCloud: row " + std::to_string(i) + " has dimension " +
                              std::to_string(rows[i].size()) + ", expected " +
                              std::to_string(dim));
    }
    points.row(static_cast<Index>(i)) = rows[i].transpose();
  }
  return PointCloud(std::move(points));
}

PointCloud PointCloud::slice(Index first, Index count) const {
  if (first < 0 || count < 1 || first + count > size()) {
    throw IndexOutOfRange("PointCloud::slice: rows [" + std::to_string(first) + ", " +
                          std::to_string(first + count) + ") outside [0, " +
                          std::to_string(size()) + ")");
  }
  return PointCloud(points_.middleRows(first, count));
}

}  // namespace mfspc
