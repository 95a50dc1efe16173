#pragma once

#include "cog/types.hpp"

#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace cog {

/// Undirected edge stored with first < second.
using Edge = std::pair<Index, Index>;

/// Canonicalizes an edge list: orients each pair as (min, max), drops
/// self-loops, sorts and removes duplicates.
std::vector<Edge> canonical_edges(std::vector<Edge> edges);

/// Undirected, unweighted attributed graph.
///
/// The edge set is always canonical (see canonical_edges), so the implied
/// adjacency is symmetric with an empty diagonal. Labels are optional; when
/// present there is one per node, each in [0, num_classes).
class Graph {
 public:
  Graph() = default;
  Graph(Index num_nodes, std::vector<Edge> edges, Matrix features, std::vector<int> labels = {},
        int num_classes = 0);

  Index num_nodes() const { return num_nodes_; }
  Index num_edges() const { return static_cast<Index>(edges_.size()); }
  Index num_features() const { return features_.cols(); }
  int num_classes() const { return num_classes_; }
  bool has_labels() const { return !labels_.empty(); }

  const std::vector<Edge>& edges() const { return edges_; }
  const Matrix& features() const { return features_; }
  const std::vector<int>& labels() const { return labels_; }

  /// Binary symmetric adjacency A.
  SparseMatrix adjacency() const;
  bool has_edge(Index a, Index b) const;

  Graph with_edges(std::vector<Edge> edges) const;
  Graph with_features(Matrix features) const;

  friend bool operator==(const Graph& a, const Graph& b);

 private:
  Index num_nodes_ = 0;
  std::vector<Edge> edges_;
  Matrix features_;
  std::vector<int> labels_;
  int num_classes_ = 0;
};

struct NodeSplit {
  NodeList labeled;
  NodeList validation;
  NodeList test;
  std::vector<Index> class_histogram;
  std::vector<std::string> warnings;
};

// ---- ingestion -------------------------------------------------------------

/// Edge list: one "src<TAB>dst" pair per line, '#' starts a comment.
/// Pairs are symmetrized by union; self-loops are dropped.
std::vector<Edge> read_edge_list(const std::filesystem::path& path, Index num_nodes);

/// Dense CSV (row i = node i) or Matrix Market coordinate format, detected by
/// the "%%MatrixMarket" banner.
Matrix read_features(const std::filesystem::path& path);

/// "node_id,label" lines; an optional non-numeric header is skipped.
/// Returns labels indexed by node; every node must appear exactly once.
std::vector<int> read_labels(const std::filesystem::path& path, Index num_nodes);

Graph load_graph(const std::filesystem::path& edge_path, const std::filesystem::path& feature_path,
                 const std::filesystem::path& label_path);

void write_edge_list(const std::filesystem::path& path, const std::vector<Edge>& edges);
void write_features_csv(const std::filesystem::path& path, const Matrix& features);
void write_labels_csv(const std::filesystem::path& path, const std::vector<int>& labels);

// ---- structure -------------------------------------------------------------

SparseMatrix adjacency_from_edges(Index num_nodes, const std::vector<Edge>& edges);

/// D̃^{-1/2} (A + I) D̃^{-1/2}, with D̃ the degree matrix of A + I.
template <typename Scalar>
SparseMatrixX<Scalar> normalized_adjacency(const SparseMatrixX<Scalar>& adjacency) {
  const Index n = adjacency.rows();
  SparseMatrixX<Scalar> tilde = adjacency;
  for (Index i = 0; i < n; ++i) tilde.coeffRef(i, i) += Scalar(1);
  tilde.makeCompressed();
  VectorX<Scalar> inv_sqrt(n);
  for (Index i = 0; i < n; ++i) {
    Scalar degree(0);
    for (typename SparseMatrixX<Scalar>::InnerIterator it(tilde, i); it; ++it) degree += it.value();
    inv_sqrt(i) = Scalar(1) / std::sqrt(degree);
  }
  for (Index i = 0; i < n; ++i)
    for (typename SparseMatrixX<Scalar>::InnerIterator it(tilde, i); it; ++it)
      it.valueRef() = inv_sqrt(i) * it.value() * inv_sqrt(it.col());
  return tilde;
}

SparseMatrix normalized_adjacency(const Graph& g);

/// Component id per node (ids assigned in order of smallest member).
std::vector<Index> connected_components(const SparseMatrix& adjacency);

// ---- synthetic fixtures ------------------------------------------------------

/// Stochastic block model with planted class-indicator features.
struct SyntheticParams {
  Index num_nodes = 300;
  int num_classes = 3;
  double p_in = 0.1;
  double p_out = 0.01;
  Index num_features = 30;
  double feature_noise = 0.0;
  Seed seed = 0;
  /// Optional class proportions. Empty means round-robin assignment.
  std::vector<double> class_weights;
};

Graph generate_synthetic(const SyntheticParams& params);

// ---- splitting ---------------------------------------------------------------

NodeSplit split_nodes(const Graph& g, double train_frac, double val_frac, Seed seed);

/// Per-class counts of `labels` over `nodes`.
std::vector<Index> class_histogram(const std::vector<int>& labels, const NodeList& nodes, int num_classes);

}  // namespace cog
