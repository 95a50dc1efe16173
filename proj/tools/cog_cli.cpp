// Command-line front end: train, cotrain, attack, calibrate, experiment, gen-synthetic.
// Exit codes: 0 success, 2 validation error, 1 runtime failure.

#include "cog/attacks.hpp"
#include "cog/calibration.hpp"
#include "cog/cotrain.hpp"
#include "cog/experiment.hpp"
#include "cog/graph.hpp"
#include "cog/io.hpp"
#include "cog/models.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalOptions {
  std::string config;
  std::string out;
  std::optional<cog::Seed> seed;
  std::optional<int> threads;
};

struct DataOptions {
  std::string edges;
  std::string features;
  std::string labels;
  std::optional<cog::Index> nodes;
  std::optional<int> classes;
  std::optional<double> p_in;
  std::optional<double> p_out;
  std::optional<cog::Index> feature_dim;
  std::optional<double> noise;
  std::vector<double> class_weights;
  std::optional<double> train_frac;
  std::optional<double> val_frac;
  std::optional<int> epochs;
};

void add_data_options(CLI::App* cmd, DataOptions& d) {
  cmd->add_option("--edges", d.edges, "Edge list (src<TAB>dst per line)");
  cmd->add_option("--features", d.features, "Feature matrix (dense CSV or Matrix Market)");
  cmd->add_option("--labels", d.labels, "Labels CSV (node_id,label)");
  cmd->add_option("--train-frac", d.train_frac, "Labeled fraction");
  cmd->add_option("--val-frac", d.val_frac, "Validation fraction");
  cmd->add_option("--epochs", d.epochs, "Training epochs per sub-model");
}

void add_synthetic_options(CLI::App* cmd, DataOptions& d) {
  cmd->add_option("--nodes", d.nodes, "Node count");
  cmd->add_option("--classes", d.classes, "Class count");
  cmd->add_option("--p-in", d.p_in, "Intra-class edge probability");
  cmd->add_option("--p-out", d.p_out, "Inter-class edge probability");
  cmd->add_option("--feature-dim", d.feature_dim, "Feature dimension");
  cmd->add_option("--noise", d.noise, "Feature bit-flip probability");
  cmd->add_option("--class-weights", d.class_weights, "Class proportions");
}

cog::ExperimentConfig resolve_config(const GlobalOptions& g, const DataOptions& d) {
  cog::ExperimentConfig c = g.config.empty() ? cog::ExperimentConfig{} : cog::ExperimentConfig::load(g.config);
  if (!d.edges.empty() || !d.features.empty() || !d.labels.empty()) {
    if (d.edges.empty() || d.features.empty() || d.labels.empty())
      throw cog::ValidationError("--edges, --features and --labels must be given together");
    c.dataset = cog::DatasetPaths{d.edges, d.features, d.labels};
    c.synthetic.reset();
  }
  if (!c.dataset && !c.synthetic) c.synthetic = cog::SyntheticParams{};
  if (c.synthetic) {
    auto& s = *c.synthetic;
    if (d.nodes) s.num_nodes = *d.nodes;
    if (d.classes) s.num_classes = *d.classes;
    if (d.p_in) s.p_in = *d.p_in;
    if (d.p_out) s.p_out = *d.p_out;
    if (d.feature_dim) s.num_features = *d.feature_dim;
    if (d.noise) s.feature_noise = *d.noise;
    if (!d.class_weights.empty()) s.class_weights = d.class_weights;
  }
  if (d.train_frac) c.train_frac = *d.train_frac;
  if (d.val_frac) c.val_frac = *d.val_frac;
  if (d.epochs) {
    c.hyper.epochs = *d.epochs;
    c.struct_model.hyper = c.hyper;
    c.feat_model.hyper = c.hyper;
  }
  if (g.seed) c.seeds = {*g.seed};
  if (g.threads) c.threads = *g.threads;
  if (!g.out.empty()) c.output = g.out;
  return c;
}

cog::Seed first_seed(const cog::ExperimentConfig& c) { return c.seeds.front() + c.seed_offset; }

cog::LabeledNodes ground_truth(const cog::Graph& g, const cog::NodeList& nodes) {
  cog::LabeledNodes out;
  for (cog::Index v : nodes) {
    out.nodes.push_back(v);
    out.labels.push_back(g.labels()[v]);
  }
  return out;
}

void print(const json& j) { std::cout << j.dump(2) << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-view co-training for robust node classification"};
  app.require_subcommand(1);
  GlobalOptions global;
  app.add_option("--config", global.config, "Experiment config (JSON)");
  app.add_option("--out", global.out, "Output directory");
  app.add_option("--seed", global.seed, "Seed (replaces the config's seed list)");
  app.add_option("--threads", global.threads, "Worker threads");
  app.fallthrough();

  // gen-synthetic
  DataOptions gen_opts;
  auto* gen = app.add_subcommand("gen-synthetic", "Write a stochastic-block-model graph with planted features");
  add_synthetic_options(gen, gen_opts);

  // train
  DataOptions train_opts;
  std::string train_model = "gcn";
  std::optional<cog::Index> train_k;
  auto* train = app.add_subcommand("train", "Train one sub-model on the labeled split");
  add_data_options(train, train_opts);
  add_synthetic_options(train, train_opts);
  train->add_option("--model", train_model, "gcn | s-mlp | f-mlp | knn-gcn");
  train->add_option("--k", train_k, "Eigenmap dimension or kNN neighbors");

  // cotrain
  DataOptions co_opts;
  std::string co_struct;
  std::string co_feat;
  std::optional<cog::Index> co_n_add;
  std::optional<int> co_iters;
  bool co_no_cal = false;
  bool co_no_bal = false;
  auto* co = app.add_subcommand("cotrain", "Run two-view co-training and write the per-iteration history");
  add_data_options(co, co_opts);
  add_synthetic_options(co, co_opts);
  co->add_option("--struct", co_struct, "Structure-dominant model (gcn | s-mlp)");
  co->add_option("--feat", co_feat, "Feature-dominant model (f-mlp | knn-gcn)");
  co->add_option("--n-add", co_n_add, "Pseudo-labels per model per iteration");
  co->add_option("--max-iters", co_iters, "Co-training iterations");
  co->add_flag("--no-calibration", co_no_cal, "Fix T = 1");
  co->add_flag("--no-balancing", co_no_bal, "Select the most confident nodes regardless of class");

  // attack
  DataOptions atk_opts;
  std::string atk_method = "dice";
  double atk_rate = 0.2;
  double atk_ratio = 0.0;
  auto* atk = app.add_subcommand("attack", "Perturb a graph and write it with a provenance sidecar");
  add_data_options(atk, atk_opts);
  add_synthetic_options(atk, atk_opts);
  atk->add_option("--method", atk_method, "random | dice | grad-feat | mixed | external");
  atk->add_option("--rate", atk_rate, "Budget as a fraction of |E|");
  atk->add_option("--ratio", atk_ratio, "Feature share of the budget (mixed)");
  std::string atk_path;
  atk->add_option("--perturbed", atk_path, "Externally produced edge list (method external)");

  // calibrate
  DataOptions cal_opts;
  std::string cal_model = "gcn";
  int cal_bins = 10;
  auto* cal = app.add_subcommand("calibrate", "Fit a temperature and write reliability statistics");
  add_data_options(cal, cal_opts);
  add_synthetic_options(cal, cal_opts);
  cal->add_option("--model", cal_model, "gcn | s-mlp | f-mlp | knn-gcn");
  cal->add_option("--bins", cal_bins, "Reliability bins");

  // experiment
  std::optional<cog::Seed> seed_offset;
  auto* exp = app.add_subcommand("experiment", "Run a configured seed x attack sweep and emit reports");
  exp->add_option("--seed-offset", seed_offset, "Added to every seed (sharding)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      const auto c = resolve_config(global, gen_opts);
      cog::SyntheticParams p = c.synthetic.value_or(cog::SyntheticParams{});
      if (global.seed) p.seed = *global.seed;
      const cog::Graph g = cog::generate_synthetic(p);
      const fs::path out = global.out.empty() ? fs::path("synthetic") : fs::path(global.out);
      cog::write_edge_list(out / "edges.tsv", g.edges());
      cog::write_features_csv(out / "features.csv", g.features());
      cog::write_labels_csv(out / "labels.csv", g.labels());
      print({{"nodes", g.num_nodes()}, {"edges", g.num_edges()}, {"classes", g.num_classes()}, {"out", out.string()}});
      return 0;
    }

    if (train->parsed() || cal->parsed()) {
      const auto& d = train->parsed() ? train_opts : cal_opts;
      const auto c = resolve_config(global, d);
      const cog::Graph g = cog::load_dataset(c);
      const cog::Seed seed = first_seed(c);
      const cog::NodeSplit split = cog::split_nodes(g, c.train_frac, c.val_frac, seed);
      cog::SubModelSpec spec = cog::SubModelSpec::defaults(cog::parse_model_kind(train->parsed() ? train_model : cal_model));
      if (train_k) spec.k = *train_k;
      spec.hyper = c.hyper;
      cog::TrainedSubModel model = cog::train_submodel(cog::build_submodel(spec, g), ground_truth(g, split.labeled), seed);
      const cog::Matrix logits = cog::predict_all_logits(model);
      const auto pred = cog::argmax_rows(logits);
      std::vector<int> val_labels;
      for (cog::Index v : split.validation) val_labels.push_back(g.labels()[v]);
      const cog::Matrix val_logits = cog::predict_logits(model, split.validation);
      const cog::TemperatureFit fit = cog::fit_temperature(val_logits, val_labels);
      model.temperature = fit.temperature;
      const fs::path out = c.output;
      json report{{"model", cog::to_string(spec.kind)},
                  {"seed", seed},
                  {"train_accuracy", cog::accuracy(pred, g.labels(), split.labeled)},
                  {"val_accuracy", cog::accuracy(pred, g.labels(), split.validation)},
                  {"test_accuracy", cog::accuracy(pred, g.labels(), split.test)},
                  {"temperature", fit.temperature},
                  {"val_nll_at_1", fit.nll_at_one},
                  {"val_nll_fitted", fit.nll},
                  {"final_loss", model.loss_history.back()}};
      if (train->parsed()) {
        cog::write_checkpoint(out / "checkpoint.csv", model.params);
      } else {
        const auto before = cog::reliability(cog::calibrate(val_logits, 1.0), val_labels, cal_bins);
        const auto after = cog::reliability(cog::calibrate(val_logits, fit.temperature), val_labels, cal_bins);
        cog::write_reliability_csv(out / "reliability_uncalibrated.csv", before);
        cog::write_reliability_csv(out / "reliability_calibrated.csv", after);
        report["val_ece_uncalibrated"] = before.ece;
        report["val_ece_calibrated"] = after.ece;
      }
      cog::io::write_text(out / (train->parsed() ? "train.json" : "calibration.json"), report.dump(2) + "\n");
      print(report);
      return 0;
    }

    if (co->parsed()) {
      auto c = resolve_config(global, co_opts);
      if (!co_struct.empty()) c.struct_model = cog::SubModelSpec::defaults(cog::parse_model_kind(co_struct));
      if (!co_feat.empty()) c.feat_model = cog::SubModelSpec::defaults(cog::parse_model_kind(co_feat));
      c.struct_model.hyper = c.hyper;
      c.feat_model.hyper = c.hyper;
      if (co_n_add) c.n_add = *co_n_add;
      if (co_iters) c.max_iters = *co_iters;
      const cog::Graph g = cog::load_dataset(c);
      const cog::Seed seed = first_seed(c);
      const cog::NodeSplit split = cog::split_nodes(g, c.train_frac, c.val_frac, seed);
      cog::CoTrainOptions opts;
      opts.n_add = c.n_add;
      opts.max_iters = c.max_iters;
      opts.calibration = !co_no_cal && c.calibration;
      opts.class_balancing = !co_no_bal && c.class_balancing;
      opts.parallel = c.threads > 1;
      opts.seed = seed;
      const auto res = cog::cotrain(g, split, c.struct_model, c.feat_model, opts);
      const fs::path out = c.output;
      cog::write_history_jsonl(out / "history.jsonl", res.state.history());
      for (const auto& r : res.state.history())
        std::cout << "iter " << r.iter << "  |S|=" << r.labeled_size << "  struct=" << r.acc_struct
                  << "  feat=" << r.acc_feat << "  ensemble=" << r.acc_ensemble << '\n';
      return 0;
    }

    if (atk->parsed()) {
      const auto c = resolve_config(global, atk_opts);
      const cog::Graph g = cog::load_dataset(c);
      const cog::Seed seed = first_seed(c);
      const cog::NodeSplit split = cog::split_nodes(g, c.train_frac, c.val_frac, seed);
      cog::PerturbationPlan plan;
      plan.method = cog::parse_attack_method(atk_method);
      plan.rate = atk_rate;
      plan.feature_ratio = atk_ratio;
      plan.seed = seed;
      plan.external_path = atk_path;
      const cog::Perturbation p = cog::apply_plan(g, split, plan, c.hyper);
      const fs::path out = c.output;
      cog::write_perturbation(out, plan, p);
      print(cog::perturbation_sidecar(plan, p));
      return 0;
    }

    if (exp->parsed()) {
      if (global.config.empty()) throw cog::ValidationError("experiment needs --config");
      DataOptions none;
      auto c = resolve_config(global, none);
      if (seed_offset) c.seed_offset = *seed_offset;
      const cog::Report report = cog::run_experiment(c);
      cog::emit_report(report, c.output);
      const json summary = report.summary();
      for (const auto& s : summary["settings"])
        std::cout << s["setting"].get<std::string>() << ": ensemble " << s["final_acc_ensemble"]["mean"].get<double>()
                  << " +- " << s["final_acc_ensemble"]["std"].get<double>() << " (struct alone "
                  << s["iter0_acc_struct"]["mean"].get<double>() << ")\n";
      return summary["failures"].empty() ? 0 : 1;
    }
  } catch (const cog::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
