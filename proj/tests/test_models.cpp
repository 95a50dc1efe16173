#include "cog/models.hpp"

#include <doctest.h>

using namespace cog;

namespace {

Graph fixture(double noise = 0.1, Seed seed = 1) {
  SyntheticParams p;
  p.num_nodes = 120;
  p.num_classes = 3;
  p.p_in = 0.08;
  p.p_out = 0.01;
  p.num_features = 24;
  p.feature_noise = noise;
  p.seed = seed;
  return generate_synthetic(p);
}

SubModelSpec quick(ModelKind kind, int epochs = 60) {
  SubModelSpec s = SubModelSpec::defaults(kind);
  s.hyper.epochs = epochs;
  if (kind == ModelKind::SMlp) s.k = 8;
  if (kind == ModelKind::KnnGcn) s.k = 5;
  return s;
}

LabeledNodes supervision(const Graph& g, const NodeList& nodes) {
  LabeledNodes out;
  out.nodes = nodes;
  for (Index v : nodes) out.labels.push_back(g.labels()[v]);
  return out;
}

constexpr ModelKind kAllKinds[] = {ModelKind::Gcn, ModelKind::SMlp, ModelKind::FMlp, ModelKind::KnnGcn};

}  // namespace

TEST_CASE("model kinds: names round-trip") {
  for (ModelKind k : kAllKinds) CHECK(parse_model_kind(to_string(k)) == k);
  CHECK(parse_model_kind("KNN_GCN") == ModelKind::KnnGcn);
  CHECK_THROWS_AS(parse_model_kind("gat"), ValidationError);
  CHECK(is_structure_dominant(ModelKind::Gcn));
  CHECK(is_structure_dominant(ModelKind::SMlp));
  CHECK_FALSE(is_structure_dominant(ModelKind::FMlp));
  CHECK_FALSE(is_structure_dominant(ModelKind::KnnGcn));
}

TEST_CASE("SubModelSpec: defaults and validation") {
  CHECK(SubModelSpec::defaults(ModelKind::Gcn).hidden == std::vector<Index>{16});
  CHECK(SubModelSpec::defaults(ModelKind::FMlp).hidden == std::vector<Index>{32});
  CHECK(SubModelSpec::defaults(ModelKind::SMlp).k == 50);
  CHECK(SubModelSpec::defaults(ModelKind::KnnGcn).k == 50);
  const Graph g = fixture();
  SubModelSpec s = SubModelSpec::defaults(ModelKind::KnnGcn);
  s.k = g.num_nodes();
  CHECK_THROWS_AS(s.validate(g), ValidationError);
  s = SubModelSpec::defaults(ModelKind::Gcn);
  s.hidden.clear();
  CHECK_THROWS_AS(s.validate(g), ValidationError);

  const Graph one_class(3, {{0, 1}}, Matrix::Identity(3, 3), {0, 0, 0}, 1);
  CHECK_THROWS_AS(SubModelSpec::defaults(ModelKind::FMlp).validate(one_class), ValidationError);
}

TEST_CASE("training is deterministic per seed") {
  const Graph g = fixture();
  const LabeledNodes sup = supervision(g, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
  for (ModelKind kind : kAllKinds) {
    const SubModel m = build_submodel(quick(kind, 20), g);
    const TrainedSubModel a = train_submodel(m, sup, 3);
    const TrainedSubModel b = train_submodel(m, sup, 3);
    const TrainedSubModel c = train_submodel(m, sup, 4);
    CHECK(a.params == b.params);
    CHECK(predict_all_logits(a) == predict_all_logits(b));
    CHECK_FALSE(a.params == c.params);
  }
}

TEST_CASE("training loss decreases over the first epochs") {
  const Graph g = fixture();
  NodeList nodes;
  for (Index v = 0; v < 30; ++v) nodes.push_back(v);
  const LabeledNodes sup = supervision(g, nodes);
  for (ModelKind kind : kAllKinds) {
    const TrainedSubModel t = train_submodel(build_submodel(quick(kind, 20), g), sup, 0);
    REQUIRE(t.loss_history.size() == 20);
    INFO(to_string(kind));
    CHECK(t.loss_history[9] < t.loss_history[0]);
    CHECK(t.loss_history[19] < t.loss_history[9]);
  }
}

TEST_CASE("GCN logits depend only on the two-hop neighborhood") {
  // Path 0-1-2-3-4-5-6: node 0 sees nodes 0, 1, 2.
  std::vector<Edge> edges;
  for (Index i = 0; i < 6; ++i) edges.emplace_back(i, i + 1);
  Matrix x = Matrix::Identity(7, 7);
  const Graph g(7, edges, x, {0, 1, 0, 1, 0, 1, 0});
  SubModelSpec spec = quick(ModelKind::Gcn, 10);
  const TrainedSubModel t = train_submodel(build_submodel(spec, g), supervision(g, {0, 1, 2, 3, 4, 5, 6}), 1);
  const Matrix base = predict_all_logits(t);

  Matrix far = x;
  far.row(3).setConstant(5.0);
  TrainedSubModel moved = t;
  moved.model = with_features(t.model, far);
  const Matrix after_far = predict_all_logits(moved);
  CHECK(after_far.row(0) == base.row(0));
  CHECK(after_far.row(1) != base.row(1));

  Matrix near = x;
  near.row(2).setConstant(5.0);
  moved.model = with_features(t.model, near);
  CHECK(predict_all_logits(moved).row(0) != base.row(0));
}

TEST_CASE("F-MLP ignores edges; S-MLP ignores features") {
  const Graph g = fixture();
  const LabeledNodes sup = supervision(g, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  const Graph rewired = g.with_edges({{0, 1}, {1, 2}, {2, 3}, {5, 9}});

  const TrainedSubModel f1 = train_submodel(build_submodel(quick(ModelKind::FMlp), g), sup, 2);
  const TrainedSubModel f2 = train_submodel(build_submodel(quick(ModelKind::FMlp), rewired), sup, 2);
  CHECK(predict_all_logits(f1) == predict_all_logits(f2));

  const Graph refeatured = g.with_features(Matrix::Ones(g.num_nodes(), 3));
  const TrainedSubModel s1 = train_submodel(build_submodel(quick(ModelKind::SMlp), g), sup, 2);
  const TrainedSubModel s2 = train_submodel(build_submodel(quick(ModelKind::SMlp), refeatured), sup, 2);
  CHECK(predict_all_logits(s1) == predict_all_logits(s2));
  CHECK(with_features(s1.model, Matrix::Zero(1, 1)).input == s1.model.input);
}

TEST_CASE("F-MLP fits noiseless class-indicator features") {
  const Graph g = fixture(0.0);
  NodeList nodes;
  for (Index v = 0; v < 30; ++v) nodes.push_back(v);
  const TrainedSubModel t = train_submodel(build_submodel(quick(ModelKind::FMlp, 200), g), supervision(g, nodes), 0);
  const auto pred = argmax_rows(predict_all_logits(t));
  CHECK(accuracy(pred, g.labels(), nodes) == 1.0);
}

TEST_CASE("predict_logits: row selection and range checks") {
  const Graph g = fixture();
  const TrainedSubModel t = train_submodel(build_submodel(quick(ModelKind::Gcn, 5), g), supervision(g, {0, 1, 2}), 0);
  const Matrix all = predict_all_logits(t);
  const NodeList pick{7, 3};
  const Matrix some = predict_logits(t, pick);
  CHECK(some.row(0) == all.row(7));
  CHECK(some.row(1) == all.row(3));
  CHECK_THROWS_AS(predict_logits(t, NodeList{g.num_nodes()}), ValidationError);
  CHECK_THROWS_AS(train_submodel(t.model, LabeledNodes{}, 0), ValidationError);
}

TEST_CASE("input_gradient matches finite differences") {
  const Graph g = fixture();
  const NodeList nodes{0, 4, 9, 15};
  std::vector<int> labels;
  for (Index v : nodes) labels.push_back(g.labels()[v]);
  for (ModelKind kind : {ModelKind::Gcn, ModelKind::FMlp, ModelKind::KnnGcn}) {
    SubModelSpec spec = quick(kind, 30);
    spec.hidden = {8};
    const TrainedSubModel t = train_submodel(build_submodel(spec, g), supervision(g, {0, 1, 2, 3, 4, 5}), 0);
    const Matrix grad = input_gradient(t, nodes, labels);
    REQUIRE(grad.rows() == g.num_nodes());
    REQUIRE(grad.cols() == g.num_features());
    auto loss = [&](const Matrix& x) {
      TrainedSubModel probe = t;
      probe.model = with_features(t.model, x);
      std::vector<int> targets(static_cast<std::size_t>(g.num_nodes()), 0);
      for (std::size_t i = 0; i < nodes.size(); ++i) targets[nodes[i]] = labels[i];
      return softmax_xent(predict_all_logits(probe), targets, nodes).loss;
    };
    double worst = 0.0;
    for (auto [r, c] : {std::pair<Index, Index>{0, 0}, {4, 3}, {9, 10}, {1, 20}, {50, 5}}) {
      Matrix up = g.features(), down = g.features();
      up(r, c) += 1e-5;
      down(r, c) -= 1e-5;
      const double numeric = (loss(up) - loss(down)) / 2e-5;
      worst = std::max(worst, std::abs(numeric - grad(r, c)) / std::max({std::abs(numeric), std::abs(grad(r, c)), 1e-6}));
    }
    INFO(to_string(kind));
    CHECK(worst < 1e-4);
  }
  const TrainedSubModel s = train_submodel(build_submodel(quick(ModelKind::SMlp, 5), g), supervision(g, {0, 1}), 0);
  CHECK_THROWS_AS(input_gradient(s, nodes, labels), ValidationError);
}

TEST_CASE("argmax_rows and accuracy") {
  Matrix m(3, 3);
  m << 0.2, 0.5, 0.5, 1.0, 1.0, 1.0, 0.0, 0.0, 3.0;
  CHECK(argmax_rows(m) == std::vector<int>{1, 0, 2});
  const std::vector<int> truth{1, 1, 2};
  CHECK(accuracy(argmax_rows(m), truth, NodeList{0, 1, 2}) == doctest::Approx(2.0 / 3.0));
  CHECK(accuracy(argmax_rows(m), truth, NodeList{}) == 0.0);
}
