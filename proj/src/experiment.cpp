#include "cog/experiment.hpp"

#include "cog/io.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace cog {

using nlohmann::json;

namespace {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<T>();
}

SubModelSpec parse_model(const json& j, ModelKind fallback_kind) {
  const ModelKind kind = j.contains("kind") ? parse_model_kind(j.at("kind").get<std::string>()) : fallback_kind;
  SubModelSpec spec = SubModelSpec::defaults(kind);
  if (j.contains("hidden")) spec.hidden = j.at("hidden").get<std::vector<Index>>();
  spec.k = get_or<Index>(j, "k", spec.k);
  return spec;
}

json model_json(const SubModelSpec& s) { return json{{"kind", to_string(s.kind)}, {"hidden", s.hidden}, {"k", s.k}}; }

Optimizer parse_optimizer(const std::string& name) {
  if (name == "adam") return Optimizer::Adam;
  if (name == "sgd") return Optimizer::Sgd;
  throw ValidationError("unknown optimizer '" + name + "'");
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  try {
    ExperimentConfig c;
    if (j.contains("dataset")) {
      const auto& d = j.at("dataset");
      c.dataset = DatasetPaths{d.at("edges").get<std::string>(), d.at("features").get<std::string>(),
                               d.at("labels").get<std::string>()};
    }
    if (j.contains("synthetic")) {
      const auto& s = j.at("synthetic");
      SyntheticParams p;
      p.num_nodes = get_or<Index>(s, "nodes", p.num_nodes);
      p.num_classes = get_or<int>(s, "classes", p.num_classes);
      p.p_in = get_or<double>(s, "p_in", p.p_in);
      p.p_out = get_or<double>(s, "p_out", p.p_out);
      p.num_features = get_or<Index>(s, "features", p.num_features);
      p.feature_noise = get_or<double>(s, "feature_noise", p.feature_noise);
      p.seed = get_or<Seed>(s, "seed", p.seed);
      p.class_weights = get_or<std::vector<double>>(s, "class_weights", {});
      c.synthetic = p;
    }
    if (j.contains("split")) {
      c.train_frac = get_or<double>(j.at("split"), "train", c.train_frac);
      c.val_frac = get_or<double>(j.at("split"), "val", c.val_frac);
    }
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<Seed>>();
    c.seed_offset = get_or<Seed>(j, "seed_offset", c.seed_offset);
    if (j.contains("struct_model")) c.struct_model = parse_model(j.at("struct_model"), ModelKind::Gcn);
    if (j.contains("feat_model")) c.feat_model = parse_model(j.at("feat_model"), ModelKind::FMlp);
    if (j.contains("hyper")) {
      const auto& h = j.at("hyper");
      c.hyper.learning_rate = get_or<double>(h, "learning_rate", c.hyper.learning_rate);
      c.hyper.weight_decay = get_or<double>(h, "weight_decay", c.hyper.weight_decay);
      c.hyper.dropout = get_or<double>(h, "dropout", c.hyper.dropout);
      c.hyper.epochs = get_or<int>(h, "epochs", c.hyper.epochs);
      c.hyper.optimizer = parse_optimizer(get_or<std::string>(h, "optimizer", "adam"));
    }
    c.n_add = get_or<Index>(j, "n_add", c.n_add);
    c.max_iters = get_or<int>(j, "max_iters", c.max_iters);
    if (j.contains("attacks")) {
      c.attacks.clear();
      for (const auto& a : j.at("attacks")) {
        PerturbationPlan plan;
        plan.method = parse_attack_method(get_or<std::string>(a, "method", "none"));
        plan.rate = get_or<double>(a, "rate", 0.0);
        plan.feature_ratio = get_or<double>(a, "ratio", 0.0);
        plan.seed = get_or<Seed>(a, "seed", 0);
        plan.external_path = get_or<std::string>(a, "path", "");
        c.attacks.push_back(plan);
      }
    }
    c.calibration = get_or<bool>(j, "calibration", c.calibration);
    c.class_balancing = get_or<bool>(j, "class_balancing", c.class_balancing);
    c.reliability_bins = get_or<int>(j, "reliability_bins", c.reliability_bins);
    c.threads = get_or<int>(j, "threads", c.threads);
    c.output = get_or<std::string>(j, "output", c.output);
    c.struct_model.hyper = c.hyper;
    c.feat_model.hyper = c.hyper;
    return c;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

json ExperimentConfig::to_json() const {
  json j;
  if (dataset) j["dataset"] = {{"edges", dataset->edges}, {"features", dataset->features}, {"labels", dataset->labels}};
  if (synthetic)
    j["synthetic"] = {{"nodes", synthetic->num_nodes},      {"classes", synthetic->num_classes},
                      {"p_in", synthetic->p_in},            {"p_out", synthetic->p_out},
                      {"features", synthetic->num_features}, {"feature_noise", synthetic->feature_noise},
                      {"seed", synthetic->seed},            {"class_weights", synthetic->class_weights}};
  j["split"] = {{"train", train_frac}, {"val", val_frac}};
  j["seeds"] = seeds;
  j["seed_offset"] = seed_offset;
  j["struct_model"] = model_json(struct_model);
  j["feat_model"] = model_json(feat_model);
  j["hyper"] = {{"learning_rate", hyper.learning_rate},
                {"weight_decay", hyper.weight_decay},
                {"dropout", hyper.dropout},
                {"epochs", hyper.epochs},
                {"optimizer", hyper.optimizer == Optimizer::Adam ? "adam" : "sgd"}};
  j["n_add"] = n_add;
  j["max_iters"] = max_iters;
  j["attacks"] = json::array();
  for (const auto& a : attacks)
    j["attacks"].push_back(
        {{"method", to_string(a.method)}, {"rate", a.rate}, {"ratio", a.feature_ratio}, {"seed", a.seed}, {"path", a.external_path}});
  j["calibration"] = calibration;
  j["class_balancing"] = class_balancing;
  j["reliability_bins"] = reliability_bins;
  j["threads"] = threads;
  j["output"] = output;
  return j;
}

void ExperimentConfig::validate() const {
  if (dataset.has_value() == synthetic.has_value())
    throw ValidationError("config needs exactly one of 'dataset' or 'synthetic'");
  if (seeds.empty()) throw ValidationError("config needs at least one seed");
  if (!(train_frac > 0.0 && val_frac > 0.0 && train_frac + val_frac <= 1.0))
    throw ValidationError("split fractions must be positive with sum <= 1");
  hyper.validate();
  if (!is_structure_dominant(struct_model.kind))
    throw ValidationError("struct_model must be gcn or s-mlp, got " + to_string(struct_model.kind));
  if (is_structure_dominant(feat_model.kind))
    throw ValidationError("feat_model must be f-mlp or knn-gcn, got " + to_string(feat_model.kind));
  if (n_add < 0 || max_iters < 0) throw ValidationError("n_add and max_iters must be nonnegative");
  if (attacks.empty()) throw ValidationError("config needs at least one attack setting (use method 'none')");
  for (const auto& a : attacks) a.validate();
  if (reliability_bins < 2) throw ValidationError("reliability_bins must be >= 2");
  if (threads < 1) throw ValidationError("threads must be >= 1");
}

Graph load_dataset(const ExperimentConfig& config) {
  if (config.synthetic) return generate_synthetic(*config.synthetic);
  if (!config.dataset) throw ValidationError("config has no data source");
  return load_graph(config.dataset->edges, config.dataset->features, config.dataset->labels);
}

Stat mean_std(const std::vector<double>& values) {
  Stat s;
  s.n = values.size();
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

namespace {

std::vector<int> labels_at(const std::vector<int>& labels, const NodeList& nodes) {
  std::vector<int> out;
  for (Index v : nodes) out.push_back(labels[v]);
  return out;
}

CellResult run_cell(const ExperimentConfig& config, const Graph& base, Seed seed, const PerturbationPlan& plan_in) {
  CellResult cell;
  cell.seed = seed;
  cell.setting = plan_in.label();
  try {
    const NodeSplit split = split_nodes(base, config.train_frac, config.val_frac, seed);
    PerturbationPlan plan = plan_in;
    plan.seed = mix_seed(seed, 1000 + plan_in.seed);
    const Perturbation pert = apply_plan(base, split, plan, config.hyper);

    CoTrainOptions opts;
    opts.n_add = config.n_add;
    opts.max_iters = config.max_iters;
    opts.calibration = config.calibration;
    opts.class_balancing = config.class_balancing;
    opts.reliability_bins = config.reliability_bins;
    opts.seed = seed;
    const CoTrainResult res = cotrain(pert.graph, split, config.struct_model, config.feat_model, opts);
    cell.history = res.state.history();

    const auto val_labels = labels_at(base.labels(), split.validation);
    const Matrix ls = predict_logits(res.structure, split.validation);
    const Matrix lf = predict_logits(res.feature, split.validation);
    cell.struct_uncalibrated = reliability(calibrate(ls, 1.0), val_labels, config.reliability_bins);
    cell.struct_calibrated = reliability(calibrate(ls, res.structure.temperature), val_labels, config.reliability_bins);
    cell.feat_uncalibrated = reliability(calibrate(lf, 1.0), val_labels, config.reliability_bins);
    cell.feat_calibrated = reliability(calibrate(lf, res.feature.temperature), val_labels, config.reliability_bins);
    const EnsemblePrediction ens = ensemble_predict(res.structure, res.feature, split.test);
    cell.ensemble_test = reliability(ens.probabilities, labels_at(base.labels(), split.test), config.reliability_bins);
    cell.ok = true;
  } catch (const std::exception& e) {
    cell.ok = false;
    cell.error = e.what();
  }
  return cell;
}

json stat_json(const Stat& s) { return json{{"mean", s.mean}, {"std", s.std}, {"n", s.n}}; }

}  // namespace

Report run_experiment(const ExperimentConfig& config) {
  config.validate();
  const Graph base = load_dataset(config);
  Report report;
  report.config = config;
  for (const auto& a : config.attacks) report.settings.push_back(a.label());

  struct Job {
    Seed seed;
    std::size_t attack;
  };
  std::vector<Job> jobs;
  for (Seed s : config.seeds)
    for (std::size_t a = 0; a < config.attacks.size(); ++a) jobs.push_back({s + config.seed_offset, a});
  report.cells.resize(jobs.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++)
      report.cells[i] = run_cell(config, base, jobs[i].seed, config.attacks[jobs[i].attack]);
  };
  const auto workers = static_cast<std::size_t>(std::max(1, config.threads));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < std::min(workers, jobs.size()); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return report;
}

json Report::summary() const {
  json out;
  out["settings"] = json::array();
  json failures = json::array();
  for (const auto& setting : settings) {
    std::vector<double> final_ens, iter0_ens, iter0_struct, iter0_feat, best_ens, ece_before, ece_after;
    std::map<int, std::vector<double>> per_iter;
    std::size_t total = 0;
    for (const auto& cell : cells) {
      if (cell.setting != setting) continue;
      ++total;
      if (!cell.ok) {
        failures.push_back({{"seed", cell.seed}, {"setting", setting}, {"error", cell.error}});
        continue;
      }
      const auto& h = cell.history;
      final_ens.push_back(h.back().acc_ensemble);
      iter0_ens.push_back(h.front().acc_ensemble);
      iter0_struct.push_back(h.front().acc_struct);
      iter0_feat.push_back(h.front().acc_feat);
      double best = h.front().acc_ensemble;
      for (const auto& r : h) {
        best = std::max(best, r.acc_ensemble);
        per_iter[r.iter].push_back(r.acc_ensemble);
      }
      best_ens.push_back(best);
      ece_before.push_back(cell.struct_uncalibrated.ece);
      ece_after.push_back(cell.struct_calibrated.ece);
    }
    json s{{"setting", setting},
           {"completed", final_ens.size()},
           {"total", total},
           {"complete", final_ens.size() == total},
           {"final_acc_ensemble", stat_json(mean_std(final_ens))},
           {"iter0_acc_ensemble", stat_json(mean_std(iter0_ens))},
           {"iter0_acc_struct", stat_json(mean_std(iter0_struct))},
           {"iter0_acc_feat", stat_json(mean_std(iter0_feat))},
           {"best_acc_ensemble", stat_json(mean_std(best_ens))},
           {"val_ece_struct_uncalibrated", stat_json(mean_std(ece_before))},
           {"val_ece_struct_calibrated", stat_json(mean_std(ece_after))}};
    json curve = json::array();
    for (const auto& [iter, values] : per_iter) curve.push_back({{"iter", iter}, {"acc_ensemble", stat_json(mean_std(values))}});
    s["per_iteration"] = curve;
    out["settings"].push_back(s);
  }
  out["failures"] = failures;
  out["config"] = config.to_json();
  return out;
}

std::string Report::results_csv() const {
  std::ostringstream out;
  out << "seed,setting,iter,S_size,U_size,merged_added,conflicts,temperature_struct,temperature_feat,acc_struct,acc_"
         "feat,acc_ensemble\n";
  for (const auto& cell : cells) {
    if (!cell.ok) continue;
    for (const auto& r : cell.history)
      out << cell.seed << ',' << cell.setting << ',' << r.iter << ',' << r.labeled_size << ',' << r.unlabeled_size << ','
          << r.merged_added << ',' << r.conflicts << ',' << io::format_double(r.temperature_struct) << ','
          << io::format_double(r.temperature_feat) << ',' << io::format_double(r.acc_struct) << ','
          << io::format_double(r.acc_feat) << ',' << io::format_double(r.acc_ensemble) << '\n';
  }
  return out.str();
}

std::string Report::reliability_csv() const {
  std::ostringstream out;
  out << "seed,setting,model,split,stage,bin_low,bin_high,count,confidence,accuracy\n";
  auto emit = [&](const CellResult& cell, const char* model, const char* split, const char* stage,
                  const ReliabilityBins& bins) {
    for (const auto& b : bins.bins)
      out << cell.seed << ',' << cell.setting << ',' << model << ',' << split << ',' << stage << ','
          << io::format_double(b.low) << ',' << io::format_double(b.high) << ',' << b.count << ','
          << io::format_double(b.confidence) << ',' << io::format_double(b.accuracy) << '\n';
  };
  for (const auto& cell : cells) {
    if (!cell.ok) continue;
    emit(cell, "struct", "validation", "uncalibrated", cell.struct_uncalibrated);
    emit(cell, "struct", "validation", "calibrated", cell.struct_calibrated);
    emit(cell, "feat", "validation", "uncalibrated", cell.feat_uncalibrated);
    emit(cell, "feat", "validation", "calibrated", cell.feat_calibrated);
    emit(cell, "ensemble", "test", "calibrated", cell.ensemble_test);
  }
  return out.str();
}

std::string Report::confusion_csv() const {
  std::ostringstream out;
  out << "seed,setting,iter,true_class,predicted_class,count\n";
  for (const auto& cell : cells) {
    if (!cell.ok) continue;
    for (const auto& r : cell.history)
      for (std::size_t t = 0; t < r.confusion.size(); ++t)
        for (std::size_t p = 0; p < r.confusion[t].size(); ++p)
          out << cell.seed << ',' << cell.setting << ',' << r.iter << ',' << t << ',' << p << ',' << r.confusion[t][p]
              << '\n';
  }
  return out.str();
}

void emit_report(const Report& report, const std::filesystem::path& dir) {
  try {
    std::filesystem::create_directories(dir);
  } catch (const std::filesystem::filesystem_error& e) {
    throw std::runtime_error("cannot create output directory " + dir.string() + ": " + e.what());
  }
  io::write_text(dir / "results.csv", report.results_csv());
  io::write_text(dir / "summary.json", report.summary().dump(2) + "\n");
  io::write_text(dir / "reliability.csv", report.reliability_csv());
  io::write_text(dir / "confusion.csv", report.confusion_csv());
  io::write_text(dir / "config.json", report.config.to_json().dump(2) + "\n");
}

}  // namespace cog
