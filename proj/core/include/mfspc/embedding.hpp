#pragma once

#include "mfspc/point_cloud.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mfspc {

/// Undirected weighted graph over the rows of a point cloud.
struct NeighborGraph {
  enum class Rule { KNearest, EpsilonBall };

  Index n = 0;
  Rule rule = Rule::KNearest;
  std::vector<std::vector<Index>> adjacency;  ///< ascending, no self loops
  std::vector<std::vector<double>> weights;   ///< aligned with adjacency
  std::vector<std::vector<double>> sq_distances;

  Index edge_count() const;  ///< undirected edges
  double degree(Index i) const;
};

/// Squared distances of the undirected edges, each counted once.
std::vector<double> edge_sq_distances(const NeighborGraph& graph);

/// Median squared edge length, the default heat-kernel scale.
double median_edge_sq_distance(const NeighborGraph& graph);

/// Replaces every edge weight with exp(-||Yi - Yj||^2 / t0). When `t0` is
/// empty the median squared edge length is used.
void apply_heat_kernel(NeighborGraph& graph, std::optional<double> t0 = std::nullopt);

/// i ~ j when either is among the other's k nearest points. Distance ties go
/// to the smaller index. Weights are 1 unless `heat_t0` is given.
NeighborGraph build_knn_graph(const PointCloud& points, Index k_neighbors,
                              std::optional<double> heat_t0 = std::nullopt);

/// i ~ j when ||Yi - Yj|| <= radius.
NeighborGraph build_epsilon_graph(const PointCloud& points, double radius,
                                  std::optional<double> heat_t0 = std::nullopt);

struct GeneralizedEigen {
  Vector values;   ///< ascending
  Matrix vectors;  ///< columns, B-orthonormal
};

/// Solves A f = lambda B f for symmetric A and symmetric positive definite B.
/// Throws NotPositiveDefinite carrying the smallest eigenvalue of B.
GeneralizedEigen solve_generalized_symmetric_eig(const Matrix& A, const Matrix& B);

enum class EmbeddingMethod { PCA, LPP, NPE };

std::string_view method_name(EmbeddingMethod method);
/// Accepts "pca", "lpp", "npe" (any case).
std::optional<EmbeddingMethod> parse_method(std::string_view name);

/// Linear map z -> U (z - centering).
class EmbeddingMap {
 public:
  EmbeddingMap(Matrix U, Vector centering, EmbeddingMethod method, Vector eigenvalues = {},
               Vector explained_variance_ratio = {});

  Vector embed(const Vector& z) const;
  /// Embeds each row.
  RowMatrix embed_rows(const RowMatrix& rows) const;

  const Matrix& U() const noexcept { return U_; }
  const Vector& centering() const noexcept { return centering_; }
  EmbeddingMethod method() const noexcept { return method_; }
  Index input_dim() const noexcept { return U_.cols(); }
  Index output_dim() const noexcept { return U_.rows(); }
  /// Generalized eigenvalues (LPP, NPE, ascending) or covariance eigenvalues
  /// (PCA, descending).
  const Vector& eigenvalues() const noexcept { return eigenvalues_; }
  /// PCA only: fraction of total variance carried by each retained direction.
  const Vector& explained_variance_ratio() const noexcept { return explained_; }

 private:
  Matrix U_;
  Vector centering_;
  EmbeddingMethod method_;
  Vector eigenvalues_;
  Vector explained_;
};

EmbeddingMap fit_pca(const PointCloud& points, Index d);

/// Eigenvalues of the sample covariance, descending.
Vector pca_spectrum(const PointCloud& points);

EmbeddingMap fit_lpp(const PointCloud& points, Index d, const NeighborGraph& graph);

/// Per-node affine reconstruction weights over the graph neighbors.
struct ReconstructionWeights {
  std::vector<std::vector<Index>> neighbors;
  std::vector<std::vector<double>> weights;  ///< each row sums to 1
};

/// Solves min ||Y_i - sum_j W_ij Y_j||^2 subject to sum_j W_ij = 1 per node.
/// A singular local Gram matrix G gets the ridge `ridge * trace(G) / k`; with
/// `ridge == 0` the minimum-norm exact solution is used instead.
ReconstructionWeights reconstruction_weights(const PointCloud& points,
                                             const NeighborGraph& graph,
                                             double ridge = 1e-3);

EmbeddingMap fit_npe(const PointCloud& points, Index d, const NeighborGraph& graph,
                     double ridge = 1e-3);

/// Everything needed to learn a map from Phase I data.
struct EmbeddingConfig {
  EmbeddingMethod method = EmbeddingMethod::NPE;
  Index d = 3;
  Index k_neighbors = 15;
  /// Heat-kernel weights; empty selects the method default (heat for LPP,
  /// binary for NPE).
  std::optional<bool> heat_kernel;
  std::optional<double> heat_t0;  ///< empty means median squared edge length
  double npe_ridge = 1e-3;

  void validate() const;
};

/// Builds the graph when the method needs one and fits the map. Throws
/// IllPosed when there are no more observations than dimensions.
EmbeddingMap learn_embedding(const PointCloud& points, const EmbeddingConfig& config);

}  // namespace mfspc
