#pragma once

#include "mfspc/point_cloud.hpp"

#include <memory>
#include <vector>

namespace mfspc {

/// Exact kd-tree over a PointCloud supporting fixed-radius queries.
///
/// Results are returned in ascending point order, so any reduction over them
/// matches a brute-force scan bit for bit.
class KdTree {
 public:
  explicit KdTree(std::shared_ptr<const PointCloud> cloud, Index leaf_size = 16);

  /// Indices of all points with ||p - z|| <= radius, ascending.
  std::vector<Index> radius_search(const Eigen::Ref<const Vector>& z, double radius) const;
  void radius_search(const Eigen::Ref<const Vector>& z, double radius,
                     std::vector<Index>& out) const;

  const PointCloud& cloud() const noexcept { return *cloud_; }

 private:
  struct Node {
    Index begin = 0;  // range into order_
    Index end = 0;
    Index split_dim = -1;  // -1 for leaves
    double split_value = 0.0;
    Index left = -1;
    Index right = -1;
    Vector lower;  // bounding box of the node's points
    Vector upper;
  };

  Index build(Index begin, Index end);
  void search(Index node, const Eigen::Ref<const Vector>& z, double radius2,
              std::vector<Index>& out) const;

  std::shared_ptr<const PointCloud> cloud_;
  Index leaf_size_;
  std::vector<Index> order_;
  std::vector<Node> nodes_;
};

}  // namespace mfspc
