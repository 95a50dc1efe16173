#pragma once

#include "cog/graph.hpp"
#include "cog/models.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace cog {

enum class AttackMethod { None, Random, Dice, GradFeat, Mixed, External };

std::string to_string(AttackMethod method);
AttackMethod parse_attack_method(const std::string& name);

/// Budget: `rate` is a fraction of |E|; `feature_ratio` is the share of that
/// budget spent on feature-bit flips (mixed attacks only).
struct PerturbationPlan {
  AttackMethod method = AttackMethod::None;
  double rate = 0.0;
  double feature_ratio = 0.0;
  Seed seed = 0;
  std::string external_path;  ///< edge list for AttackMethod::External

  void validate() const;
  std::string label() const;  ///< stable id, e.g. "dice@0.2" or "mixed@0.2:0.5"
};

struct EdgeFlip {
  Index a = 0;
  Index b = 0;
  bool inserted = false;
};

struct FeatureFlip {
  Index node = 0;
  Index feature = 0;
  double new_value = 0.0;
};

struct Perturbation {
  Graph graph;
  std::vector<EdgeFlip> edge_flips;
  std::vector<FeatureFlip> feature_flips;
  Index requested = 0;  ///< budget asked for, in flips
  std::vector<std::string> notes;

  Index insertions() const;
  Index deletions() const;
  /// FNV-1a over the textual flip log.
  std::string flip_log_hash() const;
};

/// Flips round(rate * |E|) distinct uniformly drawn node pairs (edge <-> non-edge).
Perturbation random_structure_perturb(const Graph& g, double rate, Seed seed);

/// DICE: each budget unit deletes a random same-class edge or inserts a random
/// cross-class non-edge with equal odds. When one kind runs out, the rest of the
/// budget goes to the other.
Perturbation dice_perturb(const Graph& g, std::span<const int> labels, double rate, Seed seed);

/// Greedy gradient-guided bit flips on binary features against a victim that
/// consumes raw features. Each round recomputes d loss / d X on the target
/// nodes and flips the (up to) 32 untouched bits whose flip direction most
/// increases the loss. Stops early if no flip increases the loss to first order.
Perturbation feature_flip_attack(const Graph& g, const TrainedSubModel& victim, std::span<const Index> targets,
                                 Index budget, Seed seed);

struct MixedBudget {
  Index feature_bits = 0;
  Index structure_flips = 0;
};

/// Both parts measured in units of |E|: structure = round((1 - ratio) * rate * |E|),
/// features = round(ratio * rate * |E|).
MixedBudget mixed_budget(double total_rate, double feature_ratio, Index num_edges);

/// Replaces the edge set with the file's (symmetrized); features and labels stay.
Graph load_perturbed_adjacency(const Graph& g, const std::filesystem::path& path);

/// Runs a full plan. Feature-flip parts attack an F-MLP victim trained on the
/// clean graph's labeled nodes with `victim_hyper`, targeting the test nodes.
Perturbation apply_plan(const Graph& g, const NodeSplit& split, const PerturbationPlan& plan,
                        const TrainHyper& victim_hyper);

nlohmann::json perturbation_sidecar(const PerturbationPlan& plan, const Perturbation& p);

/// Writes edges.tsv, features.csv, labels.csv and perturbation.json into `dir`.
void write_perturbation(const std::filesystem::path& dir, const PerturbationPlan& plan, const Perturbation& p);

}  // namespace cog
