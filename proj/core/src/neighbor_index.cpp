#include "mfspc/neighbor_index.hpp"

#include "mfspc/errors.hpp"

#include <algorithm>
#include <numeric>

namespace mfspc {

KdTree::KdTree(std::shared_ptr<const PointCloud> cloud, Index leaf_size)
    : cloud_(std::move(cloud)), leaf_size_(std::max<Index>(1, leaf_size)) {
  if (!cloud_) throw InvalidArgument("KdTree: null cloud");
  order_.resize(static_cast<std::size_t>(cloud_->size()));
  std::iota(order_.begin(), order_.end(), Index{0});
  nodes_.reserve(static_cast<std::size_t>(2 * cloud_->size() / leaf_size_ + 1));
  build(0, cloud_->size());
}

Index KdTree::build(Index begin, Index end) {
  const RowMatrix& pts = cloud_->matrix();
  const Index dim = cloud_->dim();

  Node node;
  node.begin = begin;
  node.end = end;
  node.lower = Vector::Constant(dim, std::numeric_limits<double>::infinity());
  node.upper = Vector::Constant(dim, -std::numeric_limits<double>::infinity());
  for (Index i = begin; i < end; ++i) {
    const auto p = pts.row(order_[static_cast<std::size_t>(i)]).transpose();
    node.lower = node.lower.cwiseMin(p);
    node.upper = node.upper.cwiseMax(p);
  }

  const Index id = static_cast<Index>(nodes_.size());
  nodes_.push_back(node);
  if (end - begin <= leaf_size_) return id;

  Index split_dim = 0;
  (node.upper - node.lower).maxCoeff(&split_dim);
  if (node.upper[split_dim] <= node.lower[split_dim]) return id;  // all coincident

  const Index mid = begin + (end - begin) / 2;
  auto first = order_.begin() + begin;
  std::nth_element(first, order_.begin() + mid, order_.begin() + end,
                   [&](Index a, Index b) { return pts(a, split_dim) < pts(b, split_dim); });
  const double split_value = pts(order_[static_cast<std::size_t>(mid)], split_dim);

  const Index left = build(begin, mid);
  const Index right = build(mid, end);
  Node& self = nodes_[static_cast<std::size_t>(id)];
  self.split_dim = split_dim;
  self.split_value = split_value;
  self.left = left;
  self.right = right;
  return id;
}

std::vector<Index> KdTree::radius_search(const Eigen::Ref<const Vector>& z,
                                         double radius) const {
  std::vector<Index> out;
  radius_search(z, radius, out);
  return out;
}

void KdTree::radius_search(const Eigen::Ref<const Vector>& z, double radius,
                           std::vector<Index>& out) const {
  if (z.size() != cloud_->dim()) {
    throw DimensionMismatch("KdTree::radius_search: query dimension mismatch");
  }
  out.clear();
  if (radius < 0.0) return;
  search(0, z, radius * radius, out);
  std::sort(out.begin(), out.end());
}

void KdTree::search(Index id, const Eigen::Ref<const Vector>& z, double radius2,
                    std::vector<Index>& out) const {
  const Node& node = nodes_[static_cast<std::size_t>(id)];
  // Squared distance from z to the node's bounding box.
  double box2 = 0.0;
  for (Index j = 0; j < z.size(); ++j) {
    const double below = node.lower[j] - z[j];
    const double above = z[j] - node.upper[j];
    const double gap = std::max({below, above, 0.0});
    box2 += gap * gap;
    if (box2 > radius2) return;
  }

  if (node.split_dim < 0) {
    const RowMatrix& pts = cloud_->matrix();
    for (Index i = node.begin; i < node.end; ++i) {
      const Index p = order_[static_cast<std::size_t>(i)];
      if ((pts.row(p).transpose() - z).squaredNorm() <= radius2) out.push_back(p);
    }
    return;
  }
  search(node.left, z, radius2, out);
  search(node.right, z, radius2, out);
}

}  // namespace mfspc
