#include "cog/graph.hpp"
#include "cog/views.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <random>

using namespace cog;

namespace {

Matrix dense(const SparseMatrix& s) { return Matrix(s); }

SparseMatrix random_connected(Index n, double p, Seed seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(p);
  std::vector<Edge> edges;
  for (Index i = 1; i < n; ++i) edges.emplace_back(static_cast<Index>(rng() % static_cast<Seed>(i)), i);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      if (coin(rng)) edges.emplace_back(i, j);
  return adjacency_from_edges(n, canonical_edges(edges));
}

}  // namespace

TEST_CASE("cosine_similarity: unit diagonal and zero rows") {
  Matrix x(3, 2);
  x << 3, 4, 0, 0, -3, -4;
  const Matrix s = cosine_similarity(x);
  CHECK(s(0, 0) == doctest::Approx(1.0));
  CHECK(s(0, 2) == doctest::Approx(-1.0));
  CHECK(s(1, 1) == 0.0);
  CHECK(s(0, 1) == 0.0);
}

TEST_CASE("knn_graph: two clusters with k = 1") {
  Matrix x(4, 2);
  x << 1.0, 0.0, 0.9, 0.1, 0.0, 1.0, 0.1, 0.9;
  const Matrix a = dense(knn_graph(x, 1));
  Matrix expect = Matrix::Zero(4, 4);
  expect(0, 1) = expect(1, 0) = 1.0;
  expect(2, 3) = expect(3, 2) = 1.0;
  CHECK(a == expect);
}

TEST_CASE("knn_graph: ties go to the smaller index") {
  Matrix x(4, 2);
  x << 1, 0, 1, 0, 1, 0, 1, 0;
  const Matrix a = dense(knn_graph(x, 1));
  // Node 0 picks 1; nodes 1, 2, 3 pick 0.
  CHECK(a(0, 1) == 1.0);
  CHECK(a(0, 2) == 1.0);
  CHECK(a(0, 3) == 1.0);
  CHECK(a(1, 2) == 0.0);
}

TEST_CASE("knn_graph: structural properties and scale invariance") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  for (Index k : {1, 3, 7}) {
    Matrix x(40, 6);
    for (Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
    const Matrix a = dense(knn_graph(x, k));
    CHECK(a == a.transpose());
    CHECK(a.diagonal().isZero());
    CHECK(((a.array() == 0.0) || (a.array() == 1.0)).all());
    for (Index i = 0; i < 40; ++i) {
      CHECK(a.row(i).sum() >= static_cast<double>(k));
      CHECK(a.row(i).sum() <= 39.0);
    }
    Vector scale(40);
    for (Index i = 0; i < 40; ++i) scale(i) = 0.5 + static_cast<double>(i % 7);
    const Matrix scaled = scale.asDiagonal() * x;
    CHECK(dense(knn_graph(scaled, k)) == a);
  }
}

TEST_CASE("knn_graph: invalid k") {
  const Matrix x = Matrix::Identity(4, 4);
  CHECK_THROWS_AS(knn_graph(x, 0), ValidationError);
  CHECK_THROWS_AS(knn_graph(x, 4), ValidationError);
}

TEST_CASE("laplacian_eigenmaps: path on three nodes") {
  // Generalized spectrum of L y = lambda D y for P3 is {0, 1, 2}; the constant
  // vector is dropped, so k = 2 returns the eigenvalues 1 and 2.
  const SparseMatrix a = adjacency_from_edges(3, {{0, 1}, {1, 2}});
  const Embedding e = laplacian_eigenmaps(a, 2);
  REQUIRE(e.dim() == 2);
  CHECK(e.eigenvalues(0) == doctest::Approx(1.0));
  CHECK(e.eigenvalues(1) == doctest::Approx(2.0));
  CHECK(e.num_components == 1);
  CHECK(e.clamped_nodes.empty());

  // Independent oracle: the generalized solver applied to (L, D) directly.
  const Matrix adj = dense(a);
  const Vector deg = adj.rowwise().sum();
  const Matrix d = deg.asDiagonal();
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> oracle(d - adj, d);
  CHECK(oracle.eigenvalues()(0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(oracle.eigenvalues()(1) == doctest::Approx(e.eigenvalues(0)));
  CHECK(oracle.eigenvalues()(2) == doctest::Approx(e.eigenvalues(1)));

  // Eigenvalue-1 vector is proportional to (1, 0, -1) and sign-canonical.
  CHECK(e.coords(1, 0) == doctest::Approx(0.0));
  CHECK(e.coords(0, 0) > 0.0);
  CHECK(e.coords(2, 0) == doctest::Approx(-e.coords(0, 0)));
}

TEST_CASE("laplacian_eigenmaps: two disjoint triangles") {
  const SparseMatrix a = adjacency_from_edges(6, {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}});
  const Embedding e = laplacian_eigenmaps(a, 3);
  CHECK(e.num_components == 2);
  // The second null-space direction survives; it is the indicator of one triangle.
  CHECK(e.eigenvalues(0) == 0.0);
  const Vector y = e.coords.col(0);
  CHECK(y.head(3).isZero());
  CHECK(y(3) == doctest::Approx(y(4)));
  CHECK(y(4) == doctest::Approx(y(5)));
  CHECK(e.eigenvalues(1) == doctest::Approx(1.5));
  CHECK(e.eigenvalues(2) == doctest::Approx(1.5));
}

TEST_CASE("laplacian_eigenmaps: residual and D-orthonormality on random graphs") {
  for (Seed seed = 0; seed < 5; ++seed) {
    const Index n = 30 + static_cast<Index>(seed) * 7;
    const SparseMatrix a = random_connected(n, 0.08, seed);
    const Index k = 6;
    const Embedding e = laplacian_eigenmaps(a, k);
    const Matrix adj = dense(a);
    const Vector deg = adj.rowwise().sum();
    const Matrix lap = Matrix(deg.asDiagonal()) - adj;
    for (Index j = 0; j < k; ++j) {
      const Vector y = e.coords.col(j);
      const Vector residual = lap * y - e.eigenvalues(j) * deg.asDiagonal() * y;
      CHECK(residual.norm() <= 1e-8 * std::max(1.0, e.eigenvalues(j)) * std::sqrt(static_cast<double>(n)));
      // Orthogonal (in D) to the dropped constant vector.
      CHECK(std::abs(deg.dot(y)) <= 1e-8);
    }
    const Matrix gram = e.coords.transpose() * deg.asDiagonal() * e.coords;
    CHECK((gram - Matrix::Identity(k, k)).cwiseAbs().maxCoeff() <= 1e-8);
    for (Index j = 1; j < k; ++j) CHECK(e.eigenvalues(j) >= e.eigenvalues(j - 1) - 1e-12);
  }
}

TEST_CASE("laplacian_eigenmaps: isolated nodes are clamped and reported") {
  const SparseMatrix a = adjacency_from_edges(4, {{0, 1}, {1, 2}});
  const Embedding e = laplacian_eigenmaps(a, 2);
  CHECK(e.clamped_nodes == NodeList{3});
  CHECK(e.num_components == 2);
  CHECK(e.coords.allFinite());
}

TEST_CASE("laplacian_eigenmaps: invalid inputs") {
  const SparseMatrix a = adjacency_from_edges(3, {{0, 1}});
  CHECK_THROWS_AS(laplacian_eigenmaps(a, 0), ValidationError);
  CHECK_THROWS_AS(laplacian_eigenmaps(a, 3), ValidationError);
  SparseMatrix neg = a;
  neg.coeffRef(0, 1) = -1.0;
  CHECK_THROWS_AS(laplacian_eigenmaps(neg, 1), ValidationError);
}

TEST_CASE("binarized_square: path and triangle") {
  const Matrix p3 = dense(binarized_square(adjacency_from_edges(3, {{0, 1}, {1, 2}})));
  Matrix expect = Matrix::Zero(3, 3);
  expect(0, 2) = expect(2, 0) = 1.0;
  CHECK(p3 == expect);

  const SparseMatrix k3 = adjacency_from_edges(3, {{0, 1}, {1, 2}, {0, 2}});
  CHECK(dense(binarized_square(k3)) == dense(k3));
}

TEST_CASE("smlp_features: concatenation of both views") {
  SUBCASE("triangle: A^2 equals A, so the two halves span the same space") {
    const SparseMatrix k3 = adjacency_from_edges(3, {{0, 1}, {1, 2}, {0, 2}});
    const Embedding e = smlp_features(k3, 2);
    CHECK(e.dim() == 4);
    CHECK(e.source == "eigenmap-A+A2");
    const Matrix first = e.coords.leftCols(2);
    const Matrix second = e.coords.rightCols(2);
    const Matrix d = Matrix(2.0 * Matrix::Identity(3, 3));
    // Projectors Y Y^T D agree even when the eigenspace is degenerate.
    CHECK(((first * first.transpose() * d) - (second * second.transpose() * d)).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(e.eigenvalues.head(2).isApprox(e.eigenvalues.tail(2)));
  }
  SUBCASE("deterministic") {
    const SparseMatrix a = random_connected(25, 0.1, 3);
    const Embedding x = smlp_features(a, 4);
    const Embedding y = smlp_features(a, 4);
    CHECK(x.coords == y.coords);
  }
}

TEST_CASE("write_embedding_csv: header and shape") {
  cog::test::TempDir dir("views");
  const Embedding e = laplacian_eigenmaps(adjacency_from_edges(3, {{0, 1}, {1, 2}}), 2);
  write_embedding_csv(dir.path() / "emb.csv", e);
  const std::string text = cog::test::slurp(dir.path() / "emb.csv");
  CHECK(text.rfind("node,y0,y1\n0,", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);
}

TEST_CASE("cosine_similarity: identical rows score one") {
  Matrix x(3, 4);
  x << 1, 0, 2, 1, 1, 0, 2, 1, 0, 3, 0, 0;
  const Matrix s = cosine_similarity(x);
  CHECK(s(0, 1) == doctest::Approx(1.0));
  CHECK(s(0, 2) == doctest::Approx(0.0));
  CHECK((s - s.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("laplacian_eigenmaps: connected graph skips its single zero eigenvalue") {
  const SparseMatrix a = random_connected(30, 0.08, 11);
  const Embedding e = laplacian_eigenmaps(a, 3);
  CHECK(e.num_components == 1);

  // Oracle: dense generalized solver, whose spectrum starts with one zero.
  const Matrix adj = dense(a);
  const Vector deg = adj.rowwise().sum();
  const Matrix d = Matrix(deg.asDiagonal());
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> oracle(d - adj, d);
  CHECK(std::abs(oracle.eigenvalues()(0)) <= 1e-10);
  CHECK(oracle.eigenvalues()(1) > 1e-6);
  for (Index j = 0; j < 3; ++j) CHECK(e.eigenvalues(j) == doctest::Approx(oracle.eigenvalues()(j + 1)).epsilon(1e-9));
  // Every returned vector is D-orthogonal to the constant one.
  CHECK((deg.transpose() * e.coords).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("laplacian_eigenmaps: edgeless graph is all clamped and all zero") {
  const SparseMatrix a(5, 5);
  const Embedding e = laplacian_eigenmaps(a, 2);
  CHECK(e.clamped_nodes.size() == 5);
  CHECK(e.num_components == 5);
  CHECK(e.eigenvalues.cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(e.coords.allFinite());
}

TEST_CASE("smlp_features: width is twice the per-view dimension") {
  const SparseMatrix a = random_connected(40, 0.05, 2);
  for (Index k : {1, 3, 8}) {
    const Embedding e = smlp_features(a, k);
    CHECK(e.dim() == 2 * k);
    CHECK(e.coords.rows() == 40);
  }
}
