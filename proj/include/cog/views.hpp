#pragma once

#include "cog/types.hpp"

#include <filesystem>
#include <string>

namespace cog {

/// Node coordinates produced from one view of the graph.
struct Embedding {
  Matrix coords;       ///< n x d
  Vector eigenvalues;  ///< one per column, nondecreasing within each source block
  std::string source;  ///< "eigenmap-A", "eigenmap-A2" or "eigenmap-A+A2"
  NodeList clamped_nodes;  ///< zero-degree nodes given a unit self-loop before solving
  Index num_components = 0;

  Index dim() const { return coords.cols(); }
};

/// Row-wise cosine similarity s_ij = x_i . x_j / (|x_i| |x_j|). All-zero rows
/// have similarity 0 to every row, including themselves.
template <typename Derived>
MatrixX<typename Derived::Scalar> cosine_similarity(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  MatrixX<Scalar> unit = x;
  for (Index r = 0; r < unit.rows(); ++r) {
    const Scalar norm = unit.row(r).norm();
    if (norm > Scalar(0)) unit.row(r) /= norm;
  }
  return unit * unit.transpose();
}

/// Binary kNN graph over cosine similarity: each node links to its k most
/// similar other nodes (ties to the smaller index), then the edge set is
/// symmetrized by union.
SparseMatrix knn_graph(const Matrix& features, Index k);

/// Random-walk Laplacian eigenmap: solutions of L y = lambda D y for the k
/// smallest eigenvalues, skipping the constant vector of the largest
/// connected component. Eigenvectors are D-orthonormal with their first
/// nonzero coordinate positive.
Embedding laplacian_eigenmaps(const SparseMatrix& adjacency, Index k);

/// A^2 with its diagonal removed and every remaining nonzero set to 1.
SparseMatrix binarized_square(const SparseMatrix& adjacency);

/// [eigenmap(A) | eigenmap(binarized A^2)], width 2k.
Embedding smlp_features(const SparseMatrix& adjacency, Index k);

void write_embedding_csv(const std::filesystem::path& path, const Embedding& embedding);

}  // namespace cog
