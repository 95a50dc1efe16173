#pragma once

#include "cog/graph.hpp"
#include "cog/nn.hpp"
#include "cog/views.hpp"

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cog {

enum class ModelKind { Gcn, SMlp, FMlp, KnnGcn };

std::string to_string(ModelKind kind);
/// Accepts "gcn", "s-mlp", "f-mlp", "knn-gcn" (case-insensitive, '_' or '-').
ModelKind parse_model_kind(const std::string& name);
bool is_structure_dominant(ModelKind kind);

struct SubModelSpec {
  ModelKind kind = ModelKind::Gcn;
  std::vector<Index> hidden;
  Index k = 0;  ///< eigenmap dimension (S-MLP) or neighbor count (kNN-GCN)
  TrainHyper hyper;

  /// GCN and kNN-GCN: 16 hidden units; MLPs: 32. S-MLP k = 50, kNN-GCN k = 50.
  static SubModelSpec defaults(ModelKind kind);
  void validate(const Graph& g) const;
};

/// A sub-model bound to its precomputed view. Views are shared, immutable,
/// and reused across retrainings.
struct SubModel {
  SubModelSpec spec;
  int num_classes = 0;
  Index num_nodes = 0;
  std::shared_ptr<const SparseMatrix> propagation;  ///< normalized A (GCN) or A_k (kNN-GCN)
  std::shared_ptr<const SparseMatrix> knn_adjacency;
  std::shared_ptr<const Embedding> embedding;       ///< S-MLP only
  std::shared_ptr<const FeatureInput> input;
  Network network;
};

struct TrainedSubModel {
  SubModel model;
  ParamSet params;
  double temperature = 1.0;
  std::vector<double> loss_history;
};

/// Supervision for training: node ids with their (true or pseudo) labels.
struct LabeledNodes {
  NodeList nodes;
  std::vector<int> labels;
};

SubModel build_submodel(const SubModelSpec& spec, const Graph& g);

/// Same architecture and views, with the raw node features replaced. S-MLP
/// does not consume raw features and is returned unchanged.
SubModel with_features(const SubModel& model, const Matrix& features);

/// Full-batch training from a fresh seeded initialization for hyper.epochs.
TrainedSubModel train_submodel(const SubModel& model, const LabeledNodes& labeled, Seed seed);

/// Deterministic (dropout off) logits for the requested nodes, in order.
Matrix predict_logits(const TrainedSubModel& model, std::span<const Index> nodes);
Matrix predict_all_logits(const TrainedSubModel& model);

/// Gradient of the mean cross-entropy over `nodes` with respect to the raw
/// feature matrix. Views derived from features (A_k) are held fixed.
Matrix input_gradient(const TrainedSubModel& model, std::span<const Index> nodes, std::span<const int> labels);

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth, std::span<const Index> nodes);
std::vector<int> argmax_rows(const Matrix& m);

}  // namespace cog
