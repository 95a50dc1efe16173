#include "cog/graph.hpp"

#include "cog/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace cog {

std::vector<Edge> canonical_edges(std::vector<Edge> edges) {
  std::vector<Edge> out;
  out.reserve(edges.size());
  for (auto [a, b] : edges) {
    if (a == b) continue;
    out.emplace_back(std::min(a, b), std::max(a, b));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Graph::Graph(Index num_nodes, std::vector<Edge> edges, Matrix features, std::vector<int> labels,
             int num_classes)
    : num_nodes_(num_nodes),
      edges_(canonical_edges(std::move(edges))),
      features_(std::move(features)),
      labels_(std::move(labels)),
      num_classes_(num_classes) {
  if (num_nodes_ < 1) throw ValidationError("graph must have at least one node");
  if (features_.rows() != num_nodes_)
    throw ValidationError("feature matrix has " + std::to_string(features_.rows()) + " rows, expected " +
                          std::to_string(num_nodes_));
  if (features_.cols() < 1) throw ValidationError("feature matrix needs at least one column");
  if (!features_.allFinite()) throw ValidationError("feature matrix has non-finite entries");
  for (const auto& [a, b] : edges_)
    if (a < 0 || b >= num_nodes_)
      throw ValidationError("edge (" + std::to_string(a) + "," + std::to_string(b) + ") out of range for " +
                            std::to_string(num_nodes_) + " nodes");
  if (!labels_.empty()) {
    if (static_cast<Index>(labels_.size()) != num_nodes_)
      throw ValidationError("label count " + std::to_string(labels_.size()) + " != node count " +
                            std::to_string(num_nodes_));
    if (num_classes_ <= 0) num_classes_ = *std::max_element(labels_.begin(), labels_.end()) + 1;
    for (int y : labels_)
      if (y < 0 || y >= num_classes_)
        throw ValidationError("label " + std::to_string(y) + " outside [0, " + std::to_string(num_classes_) + ")");
  }
}

SparseMatrix Graph::adjacency() const { return adjacency_from_edges(num_nodes_, edges_); }

bool Graph::has_edge(Index a, Index b) const {
  const Edge e{std::min(a, b), std::max(a, b)};
  return std::binary_search(edges_.begin(), edges_.end(), e);
}

Graph Graph::with_edges(std::vector<Edge> edges) const {
  return Graph(num_nodes_, std::move(edges), features_, labels_, num_classes_);
}

Graph Graph::with_features(Matrix features) const {
  return Graph(num_nodes_, edges_, std::move(features), labels_, num_classes_);
}

bool operator==(const Graph& a, const Graph& b) {
  return a.num_nodes_ == b.num_nodes_ && a.edges_ == b.edges_ && a.num_classes_ == b.num_classes_ &&
         a.labels_ == b.labels_ && a.features_.rows() == b.features_.rows() &&
         a.features_.cols() == b.features_.cols() && a.features_ == b.features_;
}

// ---- ingestion -------------------------------------------------------------

namespace {

bool is_skippable(std::string_view line, char comment) {
  const auto t = io::trim(line);
  return t.empty() || t.front() == comment;
}

}  // namespace

std::vector<Edge> read_edge_list(const std::filesystem::path& path, Index num_nodes) {
  const auto lines = io::read_lines(path);
  const std::string name = path.string();
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    if (is_skippable(line, '#')) continue;
    std::vector<std::string_view> fields;
    for (auto f : io::split_fields(io::trim(line), "\t "))
      if (!f.empty()) fields.push_back(f);
    if (fields.size() != 2) throw ParseError(name, i + 1, "expected 'src<TAB>dst'");
    const Index a = io::parse_int(fields[0], name, i + 1);
    const Index b = io::parse_int(fields[1], name, i + 1);
    if (a < 0 || b < 0 || a >= num_nodes || b >= num_nodes)
      throw ValidationError(name + ":" + std::to_string(i + 1) + ": node index out of range [0, " +
                            std::to_string(num_nodes) + ")");
    edges.emplace_back(a, b);
  }
  return canonical_edges(std::move(edges));
}

namespace {

Matrix read_matrix_market(const std::vector<std::string>& lines, const std::string& name) {
  std::size_t i = 0;
  const std::string banner = lines.empty() ? std::string() : lines[0];
  if (banner.find("coordinate") == std::string::npos)
    throw ParseError(name, 1, "only Matrix Market coordinate format is supported");
  const bool pattern = banner.find("pattern") != std::string::npos;
  ++i;
  while (i < lines.size() && is_skippable(lines[i], '%')) ++i;
  if (i >= lines.size()) throw ParseError(name, i, "missing size line");
  std::vector<std::string_view> size;
  for (auto f : io::split_fields(io::trim(lines[i]), " \t"))
    if (!f.empty()) size.push_back(f);
  if (size.size() != 3) throw ParseError(name, i + 1, "expected 'rows cols nnz'");
  const Index rows = io::parse_int(size[0], name, i + 1);
  const Index cols = io::parse_int(size[1], name, i + 1);
  const Index nnz = io::parse_int(size[2], name, i + 1);
  Matrix x = Matrix::Zero(rows, cols);
  Index seen = 0;
  for (++i; i < lines.size(); ++i) {
    if (is_skippable(lines[i], '%')) continue;
    std::vector<std::string_view> f;
    for (auto t : io::split_fields(io::trim(lines[i]), " \t"))
      if (!t.empty()) f.push_back(t);
    if (f.size() != (pattern ? 2u : 3u)) throw ParseError(name, i + 1, "malformed entry");
    const Index r = io::parse_int(f[0], name, i + 1) - 1;
    const Index c = io::parse_int(f[1], name, i + 1) - 1;
    if (r < 0 || c < 0 || r >= rows || c >= cols)
      throw ValidationError(name + ":" + std::to_string(i + 1) + ": entry index out of range");
    x(r, c) = pattern ? 1.0 : io::parse_real(f[2], name, i + 1);
    ++seen;
  }
  if (seen != nnz)
    throw ValidationError(name + ": header declares " + std::to_string(nnz) + " entries, found " +
                          std::to_string(seen));
  return x;
}

}  // namespace

Matrix read_features(const std::filesystem::path& path) {
  const auto lines = io::read_lines(path);
  const std::string name = path.string();
  if (!lines.empty() && lines[0].rfind("%%MatrixMarket", 0) == 0) return read_matrix_market(lines, name);

  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_skippable(lines[i], '#')) continue;
    std::vector<double> row;
    for (auto f : io::split_fields(lines[i], ",")) row.push_back(io::parse_real(f, name, i + 1));
    if (!rows.empty() && row.size() != rows.front().size())
      throw ParseError(name, i + 1,
                       "expected " + std::to_string(rows.front().size()) + " columns, got " + std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ValidationError(name + ": no feature rows");
  Matrix x(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index r = 0; r < x.rows(); ++r)
    for (Index c = 0; c < x.cols(); ++c) x(r, c) = rows[r][c];
  return x;
}

std::vector<int> read_labels(const std::filesystem::path& path, Index num_nodes) {
  const auto lines = io::read_lines(path);
  const std::string name = path.string();
  std::vector<int> labels(static_cast<std::size_t>(num_nodes), -1);
  Index count = 0;
  bool first_data = true;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_skippable(lines[i], '#')) continue;
    const auto f = io::split_fields(lines[i], ",");
    if (f.size() != 2) throw ParseError(name, i + 1, "expected 'node_id,label'");
    if (first_data && !f[0].empty() && !std::isdigit(static_cast<unsigned char>(f[0].front()))) {
      first_data = false;
      continue;  // header
    }
    first_data = false;
    const Index node = io::parse_int(f[0], name, i + 1);
    const long long label = io::parse_int(f[1], name, i + 1);
    if (node < 0 || node >= num_nodes)
      throw ValidationError(name + ":" + std::to_string(i + 1) + ": node id out of range");
    if (label < 0) throw ValidationError(name + ":" + std::to_string(i + 1) + ": negative label");
    if (labels[node] != -1) throw ValidationError(name + ":" + std::to_string(i + 1) + ": duplicate node id");
    labels[node] = static_cast<int>(label);
    ++count;
  }
  if (count != num_nodes)
    throw ValidationError(name + ": label count " + std::to_string(count) + " != node count " +
                          std::to_string(num_nodes));
  return labels;
}

Graph load_graph(const std::filesystem::path& edge_path, const std::filesystem::path& feature_path,
                 const std::filesystem::path& label_path) {
  Matrix features = read_features(feature_path);
  const Index n = features.rows();
  auto edges = read_edge_list(edge_path, n);
  auto labels = read_labels(label_path, n);
  return Graph(n, std::move(edges), std::move(features), std::move(labels));
}

void write_edge_list(const std::filesystem::path& path, const std::vector<Edge>& edges) {
  std::ostringstream out;
  for (const auto& [a, b] : edges) out << a << '\t' << b << '\n';
  io::write_text(path, out.str());
}

void write_features_csv(const std::filesystem::path& path, const Matrix& features) {
  std::ostringstream out;
  for (Index r = 0; r < features.rows(); ++r) {
    for (Index c = 0; c < features.cols(); ++c) {
      if (c) out << ',';
      out << io::format_double(features(r, c));
    }
    out << '\n';
  }
  io::write_text(path, out.str());
}

void write_labels_csv(const std::filesystem::path& path, const std::vector<int>& labels) {
  std::ostringstream out;
  out << "node_id,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) out << i << ',' << labels[i] << '\n';
  io::write_text(path, out.str());
}

// ---- structure -------------------------------------------------------------

SparseMatrix adjacency_from_edges(Index num_nodes, const std::vector<Edge>& edges) {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(edges.size() * 2);
  for (const auto& [a, b] : edges) {
    triplets.emplace_back(a, b, 1.0);
    triplets.emplace_back(b, a, 1.0);
  }
  SparseMatrix adj(num_nodes, num_nodes);
  adj.setFromTriplets(triplets.begin(), triplets.end(), [](double x, double) { return x; });
  adj.makeCompressed();
  return adj;
}

SparseMatrix normalized_adjacency(const Graph& g) { return normalized_adjacency<double>(g.adjacency()); }

std::vector<Index> connected_components(const SparseMatrix& adjacency) {
  const Index n = adjacency.rows();
  std::vector<Index> comp(static_cast<std::size_t>(n), -1);
  Index next = 0;
  std::vector<Index> stack;
  for (Index s = 0; s < n; ++s) {
    if (comp[s] != -1) continue;
    comp[s] = next;
    stack.push_back(s);
    while (!stack.empty()) {
      const Index u = stack.back();
      stack.pop_back();
      for (SparseMatrix::InnerIterator it(adjacency, u); it; ++it) {
        if (it.value() == 0.0 || comp[it.col()] != -1) continue;
        comp[it.col()] = next;
        stack.push_back(it.col());
      }
    }
    ++next;
  }
  return comp;
}

// ---- synthetic fixtures ------------------------------------------------------

Graph generate_synthetic(const SyntheticParams& p) {
  if (!(p.p_in >= 0.0 && p.p_in <= 1.0 && p.p_out >= 0.0 && p.p_out < p.p_in))
    throw ValidationError("synthetic graph needs 0 <= p_out < p_in <= 1");
  if (!(p.feature_noise >= 0.0 && p.feature_noise <= 1.0))
    throw ValidationError("feature_noise must lie in [0, 1]");
  if (p.num_classes < 1 || p.num_nodes < p.num_classes)
    throw ValidationError("synthetic graph needs num_nodes >= num_classes >= 1");
  if (p.num_features < p.num_classes) throw ValidationError("synthetic graph needs num_features >= num_classes");

  std::mt19937_64 rng(p.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Index n = p.num_nodes;
  const int classes = p.num_classes;

  std::vector<int> labels(static_cast<std::size_t>(n));
  if (p.class_weights.empty()) {
    for (Index i = 0; i < n; ++i) labels[i] = static_cast<int>(i % classes);
  } else {
    if (static_cast<int>(p.class_weights.size()) != classes)
      throw ValidationError("class_weights needs one entry per class");
    const double total = std::accumulate(p.class_weights.begin(), p.class_weights.end(), 0.0);
    if (!(total > 0.0)) throw ValidationError("class_weights must have a positive sum");
    // Largest-remainder counts, then a seeded shuffle of the assignment.
    std::vector<Index> counts(classes);
    std::vector<std::pair<double, int>> remainders;
    Index assigned = 0;
    for (int c = 0; c < classes; ++c) {
      if (p.class_weights[c] < 0.0) throw ValidationError("class_weights must be nonnegative");
      const double exact = p.class_weights[c] / total * static_cast<double>(n);
      counts[c] = static_cast<Index>(std::floor(exact));
      assigned += counts[c];
      remainders.emplace_back(exact - std::floor(exact), c);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (Index r = 0; assigned < n; ++r, ++assigned) ++counts[remainders[r].second];
    std::size_t pos = 0;
    for (int c = 0; c < classes; ++c)
      for (Index j = 0; j < counts[c]; ++j) labels[pos++] = c;
    std::shuffle(labels.begin(), labels.end(), rng);
  }

  std::vector<Edge> edges;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      const double prob = labels[i] == labels[j] ? p.p_in : p.p_out;
      if (unit(rng) < prob) edges.emplace_back(i, j);
    }

  const Index block = p.num_features / classes;
  Matrix features = Matrix::Zero(n, p.num_features);
  for (Index i = 0; i < n; ++i) {
    for (Index f = 0; f < block; ++f) features(i, labels[i] * block + f) = 1.0;
    if (p.feature_noise > 0.0)
      for (Index f = 0; f < p.num_features; ++f)
        if (unit(rng) < p.feature_noise) features(i, f) = 1.0 - features(i, f);
  }
  return Graph(n, std::move(edges), std::move(features), std::move(labels), classes);
}

// ---- splitting ---------------------------------------------------------------

std::vector<Index> class_histogram(const std::vector<int>& labels, const NodeList& nodes, int num_classes) {
  std::vector<Index> hist(static_cast<std::size_t>(num_classes), 0);
  for (Index v : nodes) ++hist[labels[v]];
  return hist;
}

NodeSplit split_nodes(const Graph& g, double train_frac, double val_frac, Seed seed) {
  if (!(train_frac > 0.0 && val_frac > 0.0 && train_frac + val_frac <= 1.0))
    throw ValidationError("split fractions must be positive with sum <= 1");
  if (!g.has_labels()) throw ValidationError("splitting requires node labels");
  const Index n = g.num_nodes();
  NodeList order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto n_train = static_cast<Index>(std::floor(train_frac * static_cast<double>(n)));
  const auto n_val = static_cast<Index>(std::floor(val_frac * static_cast<double>(n)));
  if (n_train < 1) throw ValidationError("train fraction selects no nodes");

  NodeSplit split;
  split.labeled.assign(order.begin(), order.begin() + n_train);
  split.validation.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  split.test.assign(order.begin() + n_train + n_val, order.end());
  std::sort(split.labeled.begin(), split.labeled.end());
  std::sort(split.validation.begin(), split.validation.end());
  std::sort(split.test.begin(), split.test.end());
  split.class_histogram = class_histogram(g.labels(), split.labeled, g.num_classes());
  for (int c = 0; c < g.num_classes(); ++c)
    if (split.class_histogram[c] == 0)
      split.warnings.push_back("class " + std::to_string(c) + " has no labeled nodes; its quota is zero");
  return split;
}

}  // namespace cog
