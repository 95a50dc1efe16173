#include "cog/views.hpp"

#include "cog/graph.hpp"
#include "cog/io.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace cog {

SparseMatrix knn_graph(const Matrix& features, Index k) {
  const Index n = features.rows();
  if (k < 1) throw ValidationError("kNN graph needs k >= 1");
  if (k >= n) throw ValidationError("kNN graph needs k < n (k=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");

  Matrix unit = features;
  for (Index r = 0; r < n; ++r) {
    const double norm = unit.row(r).norm();
    if (norm > 0.0) unit.row(r) /= norm;
  }

  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(n * k));
  constexpr Index kBlock = 1024;
  NodeList order(static_cast<std::size_t>(n));
  for (Index start = 0; start < n; start += kBlock) {
    const Index rows = std::min(kBlock, n - start);
    const Matrix sim = unit.middleRows(start, rows) * unit.transpose();
    for (Index r = 0; r < rows; ++r) {
      const Index i = start + r;
      std::iota(order.begin(), order.end(), Index{0});
      std::swap(order[i], order.back());
      auto better = [&](Index a, Index b) {
        if (sim(r, a) != sim(r, b)) return sim(r, a) > sim(r, b);
        return a < b;
      };
      std::partial_sort(order.begin(), order.begin() + k, order.end() - 1, better);
      for (Index j = 0; j < k; ++j) edges.emplace_back(i, order[j]);
    }
  }
  return adjacency_from_edges(n, canonical_edges(std::move(edges)));
}

namespace {

void canonicalize_sign(Eigen::Ref<Vector> y) {
  const double scale = y.cwiseAbs().maxCoeff();
  for (Index i = 0; i < y.size(); ++i) {
    if (std::abs(y(i)) > 1e-10 * scale) {
      if (y(i) < 0.0) y = -y;
      return;
    }
  }
}

}  // namespace

Embedding laplacian_eigenmaps(const SparseMatrix& adjacency, Index k) {
  const Index n = adjacency.rows();
  if (adjacency.cols() != n) throw ValidationError("adjacency must be square");
  if (k < 1 || k >= n) throw ValidationError("eigenmap dimension must satisfy 1 <= k < n");

  Embedding out;
  out.source = "eigenmap-A";

  Vector degree = Vector::Zero(n);
  for (Index i = 0; i < n; ++i)
    for (SparseMatrix::InnerIterator it(adjacency, i); it; ++it) {
      if (it.value() < 0.0) throw ValidationError("adjacency must be nonnegative");
      degree(i) += it.value();
    }
  for (Index i = 0; i < n; ++i)
    if (degree(i) <= 0.0) {
      degree(i) = 1.0;
      out.clamped_nodes.push_back(i);
    }

  // Symmetric form: D^{-1/2} L D^{-1/2} z = lambda z with y = D^{-1/2} z.
  // A clamped node carries a unit self-loop, so its row of L vanishes.
  const Vector inv_sqrt = degree.cwiseSqrt().cwiseInverse();
  Matrix sym = Matrix::Identity(n, n);
  for (Index i = 0; i < n; ++i)
    for (SparseMatrix::InnerIterator it(adjacency, i); it; ++it)
      sym(i, it.col()) -= inv_sqrt(i) * it.value() * inv_sqrt(it.col());
  for (Index i : out.clamped_nodes) sym(i, i) -= 1.0;

  const std::vector<Index> comp = connected_components(adjacency);
  const Index num_comp = comp.empty() ? 0 : *std::max_element(comp.begin(), comp.end()) + 1;
  out.num_components = num_comp;

  // Null space: one D-normalized indicator per component, largest component
  // first (ties by smallest member, which is the component id order).
  std::vector<Index> size(static_cast<std::size_t>(num_comp), 0);
  std::vector<double> volume(static_cast<std::size_t>(num_comp), 0.0);
  for (Index i = 0; i < n; ++i) {
    ++size[comp[i]];
    volume[comp[i]] += degree(i);
  }
  std::vector<Index> comp_order(static_cast<std::size_t>(num_comp));
  std::iota(comp_order.begin(), comp_order.end(), Index{0});
  std::stable_sort(comp_order.begin(), comp_order.end(), [&](Index a, Index b) { return size[a] > size[b]; });

  out.coords.resize(n, k);
  out.eigenvalues.resize(k);
  Index col = 0;
  for (Index c = 1; c < num_comp && col < k; ++c, ++col) {
    const Index id = comp_order[c];
    Vector y = Vector::Zero(n);
    for (Index i = 0; i < n; ++i)
      if (comp[i] == id) y(i) = 1.0 / std::sqrt(volume[id]);
    out.coords.col(col) = y;
    out.eigenvalues(col) = 0.0;
  }

  if (col < k) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
    if (solver.info() != Eigen::Success) throw std::runtime_error("eigensolver failed to converge");
    // The first num_comp eigenpairs span the null space handled above.
    for (Index j = num_comp; col < k; ++j, ++col) {
      out.coords.col(col) = inv_sqrt.asDiagonal() * solver.eigenvectors().col(j);
      out.eigenvalues(col) = std::max(0.0, solver.eigenvalues()(j));
    }
  }
  for (Index j = 0; j < k; ++j) canonicalize_sign(out.coords.col(j));
  return out;
}

SparseMatrix binarized_square(const SparseMatrix& adjacency) {
  SparseMatrix sq = adjacency * adjacency;
  std::vector<Eigen::Triplet<double>> triplets;
  for (Index i = 0; i < sq.outerSize(); ++i)
    for (SparseMatrix::InnerIterator it(sq, i); it; ++it)
      if (it.col() != i && it.value() != 0.0) triplets.emplace_back(i, it.col(), 1.0);
  SparseMatrix out(adjacency.rows(), adjacency.cols());
  out.setFromTriplets(triplets.begin(), triplets.end());
  out.makeCompressed();
  return out;
}

Embedding smlp_features(const SparseMatrix& adjacency, Index k) {
  Embedding first = laplacian_eigenmaps(adjacency, k);
  Embedding second = laplacian_eigenmaps(binarized_square(adjacency), k);
  Embedding out;
  out.source = "eigenmap-A+A2";
  out.coords.resize(adjacency.rows(), 2 * k);
  out.coords << first.coords, second.coords;
  out.eigenvalues.resize(2 * k);
  out.eigenvalues << first.eigenvalues, second.eigenvalues;
  out.clamped_nodes = first.clamped_nodes;
  out.num_components = first.num_components;
  return out;
}

void write_embedding_csv(const std::filesystem::path& path, const Embedding& embedding) {
  std::ostringstream out;
  out << "node";
  for (Index j = 0; j < embedding.dim(); ++j) out << ",y" << j;
  out << '\n';
  for (Index i = 0; i < embedding.coords.rows(); ++i) {
    out << i;
    for (Index j = 0; j < embedding.dim(); ++j) out << ',' << io::format_double(embedding.coords(i, j));
    out << '\n';
  }
  io::write_text(path, out.str());
}

}  // namespace cog
