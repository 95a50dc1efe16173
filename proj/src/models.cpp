#include "cog/models.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace cog {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Gcn: return "gcn";
    case ModelKind::SMlp: return "s-mlp";
    case ModelKind::FMlp: return "f-mlp";
    case ModelKind::KnnGcn: return "knn-gcn";
  }
  return "unknown";
}

ModelKind parse_model_kind(const std::string& name) {
  std::string key;
  for (char ch : name) key.push_back(ch == '_' ? '-' : static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  if (key == "gcn") return ModelKind::Gcn;
  if (key == "s-mlp" || key == "smlp") return ModelKind::SMlp;
  if (key == "f-mlp" || key == "fmlp" || key == "mlp") return ModelKind::FMlp;
  if (key == "knn-gcn" || key == "knngcn") return ModelKind::KnnGcn;
  throw ValidationError("unknown model kind '" + name + "'");
}

bool is_structure_dominant(ModelKind kind) { return kind == ModelKind::Gcn || kind == ModelKind::SMlp; }

SubModelSpec SubModelSpec::defaults(ModelKind kind) {
  SubModelSpec s;
  s.kind = kind;
  switch (kind) {
    case ModelKind::Gcn: s.hidden = {16}; break;
    case ModelKind::KnnGcn: s.hidden = {16}; s.k = 50; break;
    case ModelKind::FMlp: s.hidden = {32}; break;
    case ModelKind::SMlp: s.hidden = {32}; s.k = 50; break;
  }
  return s;
}

void SubModelSpec::validate(const Graph& g) const {
  hyper.validate();
  if (hidden.empty()) throw ValidationError(to_string(kind) + ": at least one hidden layer is required");
  for (Index h : hidden)
    if (h < 1) throw ValidationError(to_string(kind) + ": hidden widths must be positive");
  if (kind == ModelKind::SMlp || kind == ModelKind::KnnGcn) {
    if (k < 1) throw ValidationError(to_string(kind) + ": k must be positive");
    if (k >= g.num_nodes())
      throw ValidationError(to_string(kind) + ": k=" + std::to_string(k) + " must be below the node count");
  }
  if (g.num_classes() < 2) throw ValidationError("node classification needs at least two classes");
}

namespace {

Network make_network(const SubModelSpec& spec, Index in_dim, int classes,
                     std::shared_ptr<const SparseMatrix> propagation) {
  const bool gcn = spec.kind == ModelKind::Gcn || spec.kind == ModelKind::KnnGcn;
  std::vector<LayerPlan> layers;
  Index prev = in_dim;
  for (std::size_t i = 0; i <= spec.hidden.size(); ++i) {
    const bool last = i == spec.hidden.size();
    LayerPlan layer;
    layer.in_dim = prev;
    layer.out_dim = last ? classes : spec.hidden[i];
    layer.bias = true;
    layer.propagate = gcn;
    layer.activation = last ? Activation::None : Activation::Relu;
    layer.dropout = i == 0 ? 0.0 : spec.hyper.dropout;
    layers.push_back(layer);
    prev = layer.out_dim;
  }
  return Network(std::move(layers), gcn ? std::move(propagation) : nullptr);
}

}  // namespace

SubModel build_submodel(const SubModelSpec& spec, const Graph& g) {
  spec.validate(g);
  SubModel m;
  m.spec = spec;
  m.num_classes = g.num_classes();
  m.num_nodes = g.num_nodes();
  switch (spec.kind) {
    case ModelKind::Gcn:
      m.propagation = std::make_shared<const SparseMatrix>(normalized_adjacency(g));
      m.input = std::make_shared<const FeatureInput>(g.features());
      break;
    case ModelKind::KnnGcn: {
      auto knn = std::make_shared<const SparseMatrix>(knn_graph(g.features(), spec.k));
      m.propagation = std::make_shared<const SparseMatrix>(normalized_adjacency<double>(*knn));
      m.knn_adjacency = std::move(knn);
      m.input = std::make_shared<const FeatureInput>(g.features());
      break;
    }
    case ModelKind::FMlp:
      m.input = std::make_shared<const FeatureInput>(g.features());
      break;
    case ModelKind::SMlp: {
      auto emb = std::make_shared<const Embedding>(smlp_features(g.adjacency(), spec.k));
      m.input = std::make_shared<const FeatureInput>(emb->coords);
      m.embedding = std::move(emb);
      break;
    }
  }
  m.network = make_network(spec, m.input->cols(), m.num_classes, m.propagation);
  return m;
}

SubModel with_features(const SubModel& model, const Matrix& features) {
  if (model.spec.kind == ModelKind::SMlp) return model;
  if (features.rows() != model.num_nodes || features.cols() != model.input->cols())
    throw ValidationError("replacement features have the wrong shape");
  SubModel out = model;
  out.input = std::make_shared<const FeatureInput>(features);
  return out;
}

TrainedSubModel train_submodel(const SubModel& model, const LabeledNodes& labeled, Seed seed) {
  if (labeled.nodes.empty()) throw ValidationError("training needs at least one labeled node");
  if (labeled.nodes.size() != labeled.labels.size()) throw ValidationError("labeled nodes and labels differ in size");
  std::vector<int> targets(static_cast<std::size_t>(model.num_nodes), -1);
  for (std::size_t i = 0; i < labeled.nodes.size(); ++i) {
    const Index v = labeled.nodes[i];
    if (v < 0 || v >= model.num_nodes) throw ValidationError("labeled node out of range");
    if (labeled.labels[i] < 0 || labeled.labels[i] >= model.num_classes)
      throw ValidationError("label out of range for node " + std::to_string(v));
    targets[v] = labeled.labels[i];
  }

  const TrainHyper& hyper = model.spec.hyper;
  TrainedSubModel out;
  out.model = model;
  const auto plan = model.network.param_plan();
  out.params = init_params(plan, mix_seed(seed, 1));
  std::mt19937_64 dropout_rng(mix_seed(seed, 2));
  AdamState adam;
  Network::Cache cache;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    const Matrix logits = model.network.forward(*model.input, out.params, &cache, &dropout_rng);
    const LossAndGrad lg = softmax_xent(logits, targets, labeled.nodes);
    if (!std::isfinite(lg.loss))
      throw std::runtime_error(to_string(model.spec.kind) + ": non-finite loss at epoch " + std::to_string(epoch) +
                               " (check learning rate and input scaling)");
    out.loss_history.push_back(lg.loss);
    const ParamSet grads = model.network.backward(*model.input, out.params, cache, lg.grad);
    if (hyper.optimizer == Optimizer::Adam)
      adam_step(out.params, grads, adam, hyper);
    else
      sgd_step(out.params, grads, hyper);
  }
  if (!out.params.all_finite())
    throw std::runtime_error(to_string(model.spec.kind) + ": parameters diverged to non-finite values");
  return out;
}

Matrix predict_all_logits(const TrainedSubModel& model) {
  return model.model.network.forward(*model.model.input, model.params);
}

Matrix predict_logits(const TrainedSubModel& model, std::span<const Index> nodes) {
  for (Index v : nodes)
    if (v < 0 || v >= model.model.num_nodes) throw ValidationError("node " + std::to_string(v) + " out of range");
  const Matrix all = predict_all_logits(model);
  Matrix out(static_cast<Index>(nodes.size()), all.cols());
  for (std::size_t i = 0; i < nodes.size(); ++i) out.row(static_cast<Index>(i)) = all.row(nodes[i]);
  return out;
}

Matrix input_gradient(const TrainedSubModel& model, std::span<const Index> nodes, std::span<const int> labels) {
  if (model.model.spec.kind == ModelKind::SMlp)
    throw ValidationError("s-mlp does not consume raw features; no input gradient");
  if (nodes.size() != labels.size()) throw ValidationError("nodes and labels differ in size");
  std::vector<int> targets(static_cast<std::size_t>(model.model.num_nodes), -1);
  for (std::size_t i = 0; i < nodes.size(); ++i) targets[nodes[i]] = labels[i];
  Network::Cache cache;
  const Matrix logits = model.model.network.forward(*model.model.input, model.params, &cache);
  const LossAndGrad lg = softmax_xent(logits, targets, nodes);
  Matrix grad_input;
  model.model.network.backward(*model.model.input, model.params, cache, lg.grad, &grad_input);
  return grad_input;
}

std::vector<int> argmax_rows(const Matrix& m) {
  std::vector<int> out(static_cast<std::size_t>(m.rows()));
  for (Index r = 0; r < m.rows(); ++r) {
    Index best = 0;
    for (Index c = 1; c < m.cols(); ++c)
      if (m(r, c) > m(r, best)) best = c;
    out[r] = static_cast<int>(best);
  }
  return out;
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth, std::span<const Index> nodes) {
  if (nodes.empty()) return 0.0;
  Index correct = 0;
  for (Index v : nodes) correct += predicted[v] == truth[v] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(nodes.size());
}

}  // namespace cog
