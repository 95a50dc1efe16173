#pragma once

#include "cog/attacks.hpp"
#include "cog/calibration.hpp"
#include "cog/cotrain.hpp"
#include "cog/graph.hpp"
#include "cog/models.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace cog {

struct DatasetPaths {
  std::string edges;
  std::string features;
  std::string labels;
};

/// One JSON document describes a full run. Every field has a default except
/// the data source (either `dataset` or `synthetic`).
struct ExperimentConfig {
  std::optional<DatasetPaths> dataset;
  std::optional<SyntheticParams> synthetic;
  double train_frac = 0.1;
  double val_frac = 0.1;
  std::vector<Seed> seeds{0};
  Seed seed_offset = 0;
  SubModelSpec struct_model = SubModelSpec::defaults(ModelKind::Gcn);
  SubModelSpec feat_model = SubModelSpec::defaults(ModelKind::FMlp);
  TrainHyper hyper;
  Index n_add = 250;
  int max_iters = 10;
  std::vector<PerturbationPlan> attacks{PerturbationPlan{}};
  bool calibration = true;
  bool class_balancing = true;
  int reliability_bins = 10;
  int threads = 1;
  std::string output = "out";

  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  void validate() const;
};

Graph load_dataset(const ExperimentConfig& config);

struct CellResult {
  Seed seed = 0;
  std::string setting;
  bool ok = false;
  std::string error;
  std::vector<IterationRecord> history;
  ReliabilityBins struct_uncalibrated;  ///< validation, T = 1
  ReliabilityBins struct_calibrated;    ///< validation, fitted T
  ReliabilityBins feat_uncalibrated;
  ReliabilityBins feat_calibrated;
  ReliabilityBins ensemble_test;
};

struct Report {
  ExperimentConfig config;
  std::vector<std::string> settings;
  std::vector<CellResult> cells;  ///< seed-major, then setting, in config order

  /// Aggregates (mean and sample standard deviation over completed seeds).
  nlohmann::json summary() const;
  std::string results_csv() const;
  std::string reliability_csv() const;
  std::string confusion_csv() const;
};

struct Stat {
  double mean = 0.0;
  double std = 0.0;  ///< sample standard deviation; 0 for fewer than two values
  std::size_t n = 0;
};
Stat mean_std(const std::vector<double>& values);

/// Runs every seed x attack cell. A failing cell is recorded and skipped.
Report run_experiment(const ExperimentConfig& config);

/// results.csv, summary.json, reliability.csv, confusion.csv (+ config.json).
void emit_report(const Report& report, const std::filesystem::path& dir);

}  // namespace cog
