#pragma once

#include "cog/calibration.hpp"
#include "cog/graph.hpp"
#include "cog/models.hpp"

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace cog {

enum class Provenance { GroundTruth, PseudoStruct, PseudoFeat };
std::string to_string(Provenance p);

struct LabelEntry {
  int label = 0;
  Provenance provenance = Provenance::GroundTruth;
  int iteration = 0;  ///< selection round that added it; 0 for ground truth
  friend bool operator==(const LabelEntry&, const LabelEntry&) = default;
};

using LabeledMap = std::map<Index, LabelEntry>;

struct Quota {
  std::vector<Index> per_class;
  Index total = 0;
};

/// Per-class additions proportional to the labeled histogram, N_c / N * n_add,
/// rounded by largest remainder (ties to the smaller class) so they sum to n_add.
Quota class_quota(std::span<const Index> histogram, Index n_add);

struct Selection {
  Index node = 0;
  int label = 0;
  double confidence = 0.0;
  Provenance provenance = Provenance::PseudoStruct;
};

struct SelectionResult {
  std::vector<Selection> selected;   ///< grouped by class, confidence descending
  std::vector<Index> per_class;      ///< selected count per class
  std::vector<Index> shortfall;      ///< quota minus selected, per class
};

/// Per class c, the quota_c nodes with the highest confidence among those
/// whose argmax is c. Ties go to the lower node id. Shortfalls are recorded,
/// never redistributed. `probs` rows align with `nodes`.
SelectionResult select_confident(const Matrix& probs, std::span<const Index> nodes, const Quota& quota,
                                 Provenance provenance);

/// Class-agnostic variant used when balancing is disabled: the n_add most
/// confident nodes overall.
SelectionResult select_top(const Matrix& probs, std::span<const Index> nodes, Index n_add, Provenance provenance);

struct MergedAdditions {
  std::vector<Selection> additions;  ///< sorted by node id
  Index overlaps = 0;                ///< nodes picked by both models
  Index conflicts = 0;               ///< overlaps with disagreeing labels
};

/// Union of both selections; a node picked twice keeps the entry with the
/// higher confidence, the structure model winning exact ties.
MergedAdditions resolve_conflicts(std::span<const Selection> from_struct, std::span<const Selection> from_feat);

struct IterationRecord {
  int iter = 0;
  Index labeled_size = 0;
  Index unlabeled_size = 0;
  std::vector<Index> quota;
  std::vector<Index> added_struct;
  std::vector<Index> added_feat;
  std::vector<Index> shortfall_struct;
  std::vector<Index> shortfall_feat;
  Index merged_added = 0;
  Index overlaps = 0;
  Index conflicts = 0;
  double temperature_struct = 1.0;
  double temperature_feat = 1.0;
  double acc_struct = 0.0;
  double acc_feat = 0.0;
  double acc_ensemble = 0.0;
  std::vector<std::vector<Index>> confusion;  ///< [true][predicted], ensemble over the test set
};

nlohmann::json to_json(const IterationRecord& record);

/// Labeled set S (with provenance) and the unlabeled pool U.
class CoTrainState {
 public:
  CoTrainState(const Graph& g, const NodeSplit& split);

  const LabeledMap& labeled() const { return labeled_; }
  const NodeList& unlabeled() const { return unlabeled_; }
  int iteration() const { return iteration_; }
  const std::vector<IterationRecord>& history() const { return history_; }

  LabeledNodes training_set() const;

  /// Moves the additions from U to S, tagging them with `iteration`.
  /// Throws std::logic_error for nodes not in U.
  void apply(std::span<const Selection> additions, int iteration);
  void record(IterationRecord record) { history_.push_back(std::move(record)); }

  /// Empty when every invariant holds; otherwise one message per violation.
  std::vector<std::string> check_invariants() const;

 private:
  LabeledMap labeled_;
  NodeList unlabeled_;
  LabeledMap ground_truth_;
  Index universe_ = 0;
  int iteration_ = 0;
  std::vector<IterationRecord> history_;
};

/// Violations of the freezing rules between two snapshots of S: removed
/// entries, altered entries, or a shrinking set.
std::vector<std::string> audit_transition(const LabeledMap& before, const LabeledMap& after);

struct CoTrainOptions {
  Index n_add = 250;  ///< per model, per iteration
  int max_iters = 10;
  bool calibration = true;
  bool class_balancing = true;
  bool parallel = false;        ///< train the two sub-models concurrently
  bool keep_snapshots = false;  ///< retain S after every iteration
  int reliability_bins = 10;
  Seed seed = 0;
};

struct CoTrainResult {
  TrainedSubModel structure;
  TrainedSubModel feature;
  CoTrainState state;
  std::vector<LabeledMap> snapshots;  ///< S before each iteration, when requested
};

/// Two-view co-training. Each iteration retrains both sub-models from fresh
/// initialization on S, fits their temperatures on the validation nodes,
/// evaluates on the original test set, then moves confident test-pool nodes
/// into S. Stops after max_iters selection rounds, when U is empty, or when a
/// round adds nothing.
CoTrainResult cotrain(const Graph& g, const NodeSplit& split, const SubModelSpec& struct_spec,
                      const SubModelSpec& feat_spec, const CoTrainOptions& options);

/// Same, with sub-models whose views are already built.
CoTrainResult cotrain(const Graph& g, const NodeSplit& split, const SubModel& struct_model,
                      const SubModel& feat_model, const CoTrainOptions& options);

/// Calibrated probabilities softmax(z / T) for every node.
Matrix calibrated_probabilities(const TrainedSubModel& model);

struct EnsemblePrediction {
  std::vector<int> labels;
  Matrix probabilities;
};

/// Mean of the two calibrated probability rows; argmax ties to the smaller class.
EnsemblePrediction ensemble_predict(const TrainedSubModel& structure, const TrainedSubModel& feature,
                                    std::span<const Index> nodes);

std::vector<std::vector<Index>> confusion_matrix(const std::vector<int>& predicted, const std::vector<int>& truth,
                                                 std::span<const Index> nodes, int num_classes);

void write_history_jsonl(const std::filesystem::path& path, const std::vector<IterationRecord>& history);

}  // namespace cog
