#include "mfspc/embedding.hpp"

#include "mfspc/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace mfspc {

namespace {

constexpr double kVarianceFloor = 1e-12;  // relative; directions below it are dropped
constexpr double kMaxCondition = 1e12;

std::string str(Index v) { return std::to_string(v); }

NeighborGraph graph_from_edges(const PointCloud& points, std::vector<std::vector<Index>> adj,
                               NeighborGraph::Rule rule) {
  NeighborGraph g;
  g.n = points.size();
  g.rule = rule;
  g.adjacency = std::move(adj);
  g.weights.resize(static_cast<std::size_t>(g.n));
  g.sq_distances.resize(static_cast<std::size_t>(g.n));
  const RowMatrix& Y = points.matrix();
  for (Index i = 0; i < g.n; ++i) {
    auto& nb = g.adjacency[static_cast<std::size_t>(i)];
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    auto& dist = g.sq_distances[static_cast<std::size_t>(i)];
    dist.reserve(nb.size());
    for (Index j : nb) dist.push_back((Y.row(i) - Y.row(j)).squaredNorm());
    g.weights[static_cast<std::size_t>(i)].assign(nb.size(), 1.0);
  }
  return g;
}

// Largest-magnitude entry of each column made positive.
void normalize_signs(Matrix& columns) {
  for (Index c = 0; c < columns.cols(); ++c) {
    Index at = 0;
    columns.col(c).cwiseAbs().maxCoeff(&at);
    if (columns(at, c) < 0.0) columns.col(c) *= -1.0;
  }
}

// Centered data expressed in the span of its nonzero-variance directions.
struct Reduced {
  Vector mean;
  Matrix basis;  // D x r, orthonormal columns
  Matrix X;      // m x r
};

Reduced reduce(const PointCloud& points, Index d, const char* what) {
  const Index m = points.size();
  const Index D = points.dim();
  if (d < 1 || d > D) {
    throw InvalidArgument(std::string(what) + ": target dimension " + str(d) +
                          " must lie in [1, " + str(D) + "]");
  }
  if (m <= D) {
    throw IllPosed(std::string(what) + ": needs more observations than dimensions (m = " +
                       str(m) + ", D = " + str(D) + "); use the manifold-fitting pipeline",
                   std::numeric_limits<double>::infinity());
  }
  Reduced r;
  r.mean = points.matrix().colwise().mean().transpose();
  const Matrix Xc = points.matrix().rowwise() - r.mean.transpose();
  const Matrix cov = (Xc.transpose() * Xc) / static_cast<double>(m - 1);
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
  const Vector& ev = es.eigenvalues();
  const double top = ev(D - 1);
  if (!(top > 0.0)) {
    throw IllPosed(std::string(what) + ": the Phase I sample has no variance",
                   std::numeric_limits<double>::infinity());
  }
  Index keep = 0;
  for (Index i = 0; i < D; ++i) keep += ev(i) > kVarianceFloor * top ? 1 : 0;
  if (keep < d) {
    throw IllPosed(std::string(what) + ": the sample spans only " + str(keep) +
                       " dimensions, fewer than the target " + str(d),
                   top / std::max(ev(0), std::numeric_limits<double>::min()));
  }
  r.basis = es.eigenvectors().rightCols(keep);
  r.X = Xc * r.basis;
  return r;
}

EmbeddingMap solve_reduced(const Reduced& r, const Matrix& A, const Matrix& B, Index d,
                           EmbeddingMethod method, const char* what) {
  Eigen::SelfAdjointEigenSolver<Matrix> eb(B, Eigen::EigenvaluesOnly);
  const double lo = eb.eigenvalues()(0);
  const double hi = eb.eigenvalues()(B.rows() - 1);
  const double cond = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  if (!(cond <= kMaxCondition)) {
    throw IllPosed(std::string(what) + ": right-hand matrix is numerically singular " +
                       "(condition " + std::to_string(cond) + ")",
                   cond);
  }
  GeneralizedEigen ge = solve_generalized_symmetric_eig(A, B);
  Matrix F = r.basis * ge.vectors.leftCols(d);  // D x d
  normalize_signs(F);
  return EmbeddingMap(F.transpose(), r.mean, method, ge.values.head(d));
}

void check_graph(const PointCloud& points, const NeighborGraph& graph, const char* what) {
  if (graph.n != points.size() ||
      static_cast<Index>(graph.adjacency.size()) != points.size()) {
    throw DimensionMismatch(std::string(what) + ": graph has " + str(graph.n) +
                            " nodes but the cloud has " + str(points.size()) + " points");
  }
}

}  // namespace

Index NeighborGraph::edge_count() const {
  Index total = 0;
  for (const auto& nb : adjacency) total += static_cast<Index>(nb.size());
  return total / 2;
}

double NeighborGraph::degree(Index i) const {
  const auto& w = weights.at(static_cast<std::size_t>(i));
  return std::accumulate(w.begin(), w.end(), 0.0);
}

std::vector<double> edge_sq_distances(const NeighborGraph& graph) {
  std::vector<double> out;
  for (Index i = 0; i < graph.n; ++i) {
    const auto& nb = graph.adjacency[static_cast<std::size_t>(i)];
    for (std::size_t e = 0; e < nb.size(); ++e) {
      if (nb[e] > i) out.push_back(graph.sq_distances[static_cast<std::size_t>(i)][e]);
    }
  }
  return out;
}

double median_edge_sq_distance(const NeighborGraph& graph) {
  std::vector<double> d = edge_sq_distances(graph);
  if (d.empty()) throw InvalidArgument("median_edge_sq_distance: graph has no edges");
  std::sort(d.begin(), d.end());
  const std::size_t h = d.size() / 2;
  return d.size() % 2 == 1 ? d[h] : 0.5 * (d[h - 1] + d[h]);
}

void apply_heat_kernel(NeighborGraph& graph, std::optional<double> t0) {
  double scale = 0.0;
  if (t0) {
    if (!(*t0 > 0.0) || !std::isfinite(*t0)) {
      throw InvalidArgument("apply_heat_kernel: t0 must be positive and finite");
    }
    scale = *t0;
  } else {
    if (graph.edge_count() == 0) return;
    scale = median_edge_sq_distance(graph);
    if (!(scale > 0.0)) {
      // More than half of the edges join coincident points.
      const std::vector<double> d = edge_sq_distances(graph);
      double sum = 0.0;
      long count = 0;
      for (double v : d) {
        if (v > 0.0) {
          sum += v;
          ++count;
        }
      }
      scale = count > 0 ? sum / static_cast<double>(count) : 1.0;
    }
  }
  for (std::size_t i = 0; i < graph.weights.size(); ++i) {
    for (std::size_t e = 0; e < graph.weights[i].size(); ++e) {
      graph.weights[i][e] = std::exp(-graph.sq_distances[i][e] / scale);
    }
  }
}

NeighborGraph build_knn_graph(const PointCloud& points, Index k_neighbors,
                              std::optional<double> heat_t0) {
  const Index m = points.size();
  if (k_neighbors < 1 || k_neighbors >= m) {
    throw InvalidK("build_knn_graph: k_neighbors = " + str(k_neighbors) +
                   " must lie in [1, m - 1] with m = " + str(m));
  }
  const RowMatrix& Y = points.matrix();
  std::vector<std::vector<Index>> adj(static_cast<std::size_t>(m));
  std::vector<std::pair<double, Index>> cand(static_cast<std::size_t>(m - 1));
  for (Index i = 0; i < m; ++i) {
    std::size_t c = 0;
    for (Index j = 0; j < m; ++j) {
      if (j != i) cand[c++] = {(Y.row(i) - Y.row(j)).squaredNorm(), j};
    }
    auto kth = cand.begin() + k_neighbors;
    std::partial_sort(cand.begin(), kth, cand.end());
    for (auto it = cand.begin(); it != kth; ++it) {
      adj[static_cast<std::size_t>(i)].push_back(it->second);
      adj[static_cast<std::size_t>(it->second)].push_back(i);
    }
  }
  NeighborGraph g = graph_from_edges(points, std::move(adj), NeighborGraph::Rule::KNearest);
  if (heat_t0) apply_heat_kernel(g, heat_t0);
  return g;
}

NeighborGraph build_epsilon_graph(const PointCloud& points, double radius,
                                  std::optional<double> heat_t0) {
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw InvalidArgument("build_epsilon_graph: radius must be positive and finite");
  }
  const Index m = points.size();
  const RowMatrix& Y = points.matrix();
  const double r2 = radius * radius;
  std::vector<std::vector<Index>> adj(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i) {
    for (Index j = i + 1; j < m; ++j) {
      if ((Y.row(i) - Y.row(j)).squaredNorm() <= r2) {
        adj[static_cast<std::size_t>(i)].push_back(j);
        adj[static_cast<std::size_t>(j)].push_back(i);
      }
    }
  }
  NeighborGraph g = graph_from_edges(points, std::move(adj), NeighborGraph::Rule::EpsilonBall);
  if (heat_t0) apply_heat_kernel(g, heat_t0);
  return g;
}

GeneralizedEigen solve_generalized_symmetric_eig(const Matrix& A, const Matrix& B) {
  if (A.rows() != A.cols() || B.rows() != B.cols() || A.rows() != B.rows() || A.rows() == 0) {
    throw DimensionMismatch("solve_generalized_symmetric_eig: A and B must be square and equal in size");
  }
  const Matrix As = 0.5 * (A + A.transpose());
  const Matrix Bs = 0.5 * (B + B.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eb(Bs);
  const Vector& lb = eb.eigenvalues();
  const double smallest = lb(0);
  const double scale = std::max(lb.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  if (!(smallest > 1e-14 * scale)) {
    throw NotPositiveDefinite("solve_generalized_symmetric_eig: B is not positive definite "
                              "(smallest eigenvalue " + std::to_string(smallest) + ")",
                              smallest);
  }
  const Matrix& V = eb.eigenvectors();
  const Matrix Bis = V * lb.cwiseSqrt().cwiseInverse().asDiagonal() * V.transpose();
  Matrix C = Bis * As * Bis;
  C = 0.5 * (C + C.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> ec(C);
  GeneralizedEigen out;
  out.values = ec.eigenvalues();
  out.vectors = Bis * ec.eigenvectors();
  normalize_signs(out.vectors);
  return out;
}

std::string_view method_name(EmbeddingMethod method) {
  switch (method) {
    case EmbeddingMethod::PCA: return "pca";
    case EmbeddingMethod::LPP: return "lpp";
    case EmbeddingMethod::NPE: return "npe";
  }
  return "unknown";
}

std::optional<EmbeddingMethod> parse_method(std::string_view name) {
  std::string lower(name);
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "pca") return EmbeddingMethod::PCA;
  if (lower == "lpp") return EmbeddingMethod::LPP;
  if (lower == "npe") return EmbeddingMethod::NPE;
  return std::nullopt;
}

EmbeddingMap::EmbeddingMap(Matrix U, Vector centering, EmbeddingMethod method, Vector eigenvalues,
                           Vector explained_variance_ratio)
    : U_(std::move(U)),
      centering_(std::move(centering)),
      method_(method),
      eigenvalues_(std::move(eigenvalues)),
      explained_(std::move(explained_variance_ratio)) {
  if (U_.rows() < 1 || U_.cols() < 1 || U_.cols() != centering_.size()) {
    throw DimensionMismatch("EmbeddingMap: U is " + str(U_.rows()) + "x" + str(U_.cols()) +
                            " but centering has " + str(centering_.size()) + " entries");
  }
  if (!U_.allFinite() || !centering_.allFinite()) {
    throw InvalidArgument("EmbeddingMap: non-finite entries");
  }
}

Vector EmbeddingMap::embed(const Vector& z) const {
  if (z.size() != input_dim()) {
    throw DimensionMismatch("embed: expected a " + str(input_dim()) + "-vector, got " +
                            str(z.size()));
  }
  return U_ * (z - centering_);
}

RowMatrix EmbeddingMap::embed_rows(const RowMatrix& rows) const {
  if (rows.cols() != input_dim()) {
    throw DimensionMismatch("embed_rows: expected " + str(input_dim()) + " columns, got " +
                            str(rows.cols()));
  }
  return (rows.rowwise() - centering_.transpose()) * U_.transpose();
}

Vector pca_spectrum(const PointCloud& points) {
  const Index m = points.size();
  if (m < 2) throw InvalidArgument("pca_spectrum: needs at least two observations");
  const Vector mean = points.matrix().colwise().mean().transpose();
  const Matrix Xc = points.matrix().rowwise() - mean.transpose();
  const Matrix cov = (Xc.transpose() * Xc) / static_cast<double>(m - 1);
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov, Eigen::EigenvaluesOnly);
  return es.eigenvalues().reverse().cwiseMax(0.0);
}

EmbeddingMap fit_pca(const PointCloud& points, Index d) {
  const Index m = points.size();
  const Index D = points.dim();
  if (m < 2) throw InvalidArgument("fit_pca: needs at least two observations");
  if (d < 1 || d > D) {
    throw InvalidArgument("fit_pca: target dimension " + str(d) + " must lie in [1, " + str(D) + "]");
  }
  const Vector mean = points.matrix().colwise().mean().transpose();
  const Matrix Xc = points.matrix().rowwise() - mean.transpose();
  const Matrix cov = (Xc.transpose() * Xc) / static_cast<double>(m - 1);
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
  Matrix F = es.eigenvectors().rightCols(d).rowwise().reverse();
  normalize_signs(F);
  const Vector values = es.eigenvalues().tail(d).reverse().cwiseMax(0.0);
  const double total = es.eigenvalues().cwiseMax(0.0).sum();
  const Vector ratio = total > 0.0 ? Vector(values / total) : Vector(Vector::Zero(d));
  return EmbeddingMap(F.transpose(), mean, EmbeddingMethod::PCA, values, ratio);
}

EmbeddingMap fit_lpp(const PointCloud& points, Index d, const NeighborGraph& graph) {
  check_graph(points, graph, "fit_lpp");
  const Reduced r = reduce(points, d, "fit_lpp");
  const Index m = points.size();
  Vector deg(m);
  Matrix WX = Matrix::Zero(m, r.X.cols());
  for (Index i = 0; i < m; ++i) {
    const auto& nb = graph.adjacency[static_cast<std::size_t>(i)];
    const auto& w = graph.weights[static_cast<std::size_t>(i)];
    double s = 0.0;
    for (std::size_t e = 0; e < nb.size(); ++e) {
      WX.row(i) += w[e] * r.X.row(nb[e]);
      s += w[e];
    }
    deg(i) = s;
  }
  const Matrix KX = deg.asDiagonal() * r.X;
  const Matrix B = r.X.transpose() * KX;
  const Matrix A = r.X.transpose() * (KX - WX);
  return solve_reduced(r, A, B, d, EmbeddingMethod::LPP, "fit_lpp");
}

ReconstructionWeights reconstruction_weights(const PointCloud& points, const NeighborGraph& graph,
                                             double ridge) {
  check_graph(points, graph, "reconstruction_weights");
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) {
    throw InvalidArgument("reconstruction_weights: ridge must be non-negative");
  }
  const RowMatrix& Y = points.matrix();
  const Index D = points.dim();
  ReconstructionWeights out;
  out.neighbors = graph.adjacency;
  out.weights.resize(out.neighbors.size());
  for (Index i = 0; i < points.size(); ++i) {
    const auto& nb = out.neighbors[static_cast<std::size_t>(i)];
    const Index k = static_cast<Index>(nb.size());
    if (k == 0) {
      throw InvalidArgument("reconstruction_weights: node " + str(i) + " has no neighbors");
    }
    Matrix Dm(D, k);
    for (Index c = 0; c < k; ++c) Dm.col(c) = (Y.row(i) - Y.row(nb[static_cast<std::size_t>(c)])).transpose();
    const Matrix G = Dm.transpose() * Dm;
    Vector w;
    Eigen::ColPivHouseholderQR<Matrix> qr(G);
    qr.setThreshold(1e-10);
    if (qr.rank() == k) {
      w = G.ldlt().solve(Vector::Ones(k));
    } else if (ridge > 0.0 && G.trace() > 0.0) {
      Matrix Gr = G;
      Gr.diagonal().array() += ridge * G.trace() / static_cast<double>(k);
      w = Gr.ldlt().solve(Vector::Ones(k));
    } else if (k == 1) {
      w = Vector::Ones(1);
    } else {
      // Minimum-norm correction of the uniform weights within sum(w) = 1.
      const Vector w0 = Vector::Constant(k, 1.0 / static_cast<double>(k));
      Eigen::HouseholderQR<Matrix> h(Matrix::Ones(k, 1));
      const Matrix Q = h.householderQ() * Matrix::Identity(k, k);
      const Matrix N = Q.rightCols(k - 1);
      const Matrix DN = Dm * N;
      const Vector z = Eigen::CompleteOrthogonalDecomposition<Matrix>(DN).solve(-(Dm * w0));
      w = w0 + N * z;
    }
    w /= w.sum();
    out.weights[static_cast<std::size_t>(i)].assign(w.data(), w.data() + w.size());
  }
  return out;
}

EmbeddingMap fit_npe(const PointCloud& points, Index d, const NeighborGraph& graph, double ridge) {
  check_graph(points, graph, "fit_npe");
  const Reduced r = reduce(points, d, "fit_npe");
  const ReconstructionWeights rw = reconstruction_weights(points, graph, ridge);
  Matrix R = r.X;
  for (Index i = 0; i < points.size(); ++i) {
    const auto& nb = rw.neighbors[static_cast<std::size_t>(i)];
    const auto& w = rw.weights[static_cast<std::size_t>(i)];
    for (std::size_t e = 0; e < nb.size(); ++e) R.row(i) -= w[e] * r.X.row(nb[e]);
  }
  const Matrix A = R.transpose() * R;
  const Matrix B = r.X.transpose() * r.X;
  return solve_reduced(r, A, B, d, EmbeddingMethod::NPE, "fit_npe");
}

void EmbeddingConfig::validate() const {
  if (d < 1) throw InvalidArgument("EmbeddingConfig.d: must be >= 1");
  if (method != EmbeddingMethod::PCA && k_neighbors < 1) {
    throw InvalidArgument("EmbeddingConfig.k_neighbors: must be >= 1");
  }
  if (heat_t0 && !(*heat_t0 > 0.0)) throw InvalidArgument("EmbeddingConfig.heat_t0: must be positive");
  if (!(npe_ridge >= 0.0)) throw InvalidArgument("EmbeddingConfig.npe_ridge: must be >= 0");
}

EmbeddingMap learn_embedding(const PointCloud& points, const EmbeddingConfig& config) {
  config.validate();
  if (points.size() <= points.dim()) {
    throw IllPosed("learn_embedding: " + std::string(method_name(config.method)) +
                       " needs more Phase I observations than dimensions (m = " +
                       str(points.size()) + ", D = " + str(points.dim()) +
                       "); use the manifold-fitting pipeline (method mf)",
                   std::numeric_limits<double>::infinity());
  }
  if (config.method == EmbeddingMethod::PCA) return fit_pca(points, config.d);
  NeighborGraph graph = build_knn_graph(points, config.k_neighbors);
  const bool heat = config.heat_kernel.value_or(config.method == EmbeddingMethod::LPP);
  if (heat) apply_heat_kernel(graph, config.heat_t0);
  if (config.method == EmbeddingMethod::LPP) return fit_lpp(points, config.d, graph);
  return fit_npe(points, config.d, graph, config.npe_ridge);
}

}  // namespace mfspc
