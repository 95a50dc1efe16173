#include "cog/cotrain.hpp"

#include "cog/io.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace cog {

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::GroundTruth: return "ground-truth";
    case Provenance::PseudoStruct: return "pseudo:struct";
    case Provenance::PseudoFeat: return "pseudo:feat";
  }
  return "unknown";
}

Quota class_quota(std::span<const Index> histogram, Index n_add) {
  const Index total = std::accumulate(histogram.begin(), histogram.end(), Index{0});
  if (total <= 0) throw ValidationError("class quota needs a nonempty labeled histogram");
  if (n_add < 0) throw ValidationError("n_add must be nonnegative");
  Quota q;
  q.total = n_add;
  q.per_class.resize(histogram.size());
  // Integer arithmetic keeps the remainders exact.
  std::vector<std::pair<Index, std::size_t>> remainders;
  Index assigned = 0;
  for (std::size_t c = 0; c < histogram.size(); ++c) {
    const Index scaled = histogram[c] * n_add;
    q.per_class[c] = scaled / total;
    assigned += q.per_class[c];
    remainders.emplace_back(scaled % total, c);
  }
  std::stable_sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < n_add; ++i, ++assigned) ++q.per_class[remainders[i].second];
  return q;
}

namespace {

struct Candidate {
  Index node;
  int label;
  double confidence;
};

std::vector<Candidate> candidates_of(const Matrix& probs, std::span<const Index> nodes) {
  if (probs.rows() != static_cast<Index>(nodes.size())) throw ValidationError("probability rows must align with nodes");
  std::vector<Candidate> out;
  out.reserve(nodes.size());
  for (Index r = 0; r < probs.rows(); ++r) {
    Index best = 0;
    for (Index c = 1; c < probs.cols(); ++c)
      if (probs(r, c) > probs(r, best)) best = c;
    out.push_back({nodes[r], static_cast<int>(best), probs(r, best)});
  }
  std::sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.node < b.node;
  });
  return out;
}

}  // namespace

SelectionResult select_confident(const Matrix& probs, std::span<const Index> nodes, const Quota& quota,
                                 Provenance provenance) {
  const auto classes = static_cast<std::size_t>(probs.cols());
  if (quota.per_class.size() != classes) throw ValidationError("quota must have one entry per class");
  const auto ranked = candidates_of(probs, nodes);
  SelectionResult out;
  out.per_class.assign(classes, 0);
  out.shortfall.assign(classes, 0);
  for (std::size_t c = 0; c < classes; ++c) {
    for (const auto& cand : ranked) {
      if (out.per_class[c] >= quota.per_class[c]) break;
      if (cand.label != static_cast<int>(c)) continue;
      out.selected.push_back({cand.node, cand.label, cand.confidence, provenance});
      ++out.per_class[c];
    }
    out.shortfall[c] = quota.per_class[c] - out.per_class[c];
  }
  return out;
}

SelectionResult select_top(const Matrix& probs, std::span<const Index> nodes, Index n_add, Provenance provenance) {
  const auto ranked = candidates_of(probs, nodes);
  SelectionResult out;
  out.per_class.assign(static_cast<std::size_t>(probs.cols()), 0);
  out.shortfall.assign(static_cast<std::size_t>(probs.cols()), 0);
  for (const auto& cand : ranked) {
    if (static_cast<Index>(out.selected.size()) >= n_add) break;
    out.selected.push_back({cand.node, cand.label, cand.confidence, provenance});
    ++out.per_class[cand.label];
  }
  return out;
}

MergedAdditions resolve_conflicts(std::span<const Selection> from_struct, std::span<const Selection> from_feat) {
  std::map<Index, Selection> merged;
  for (const auto& s : from_struct) merged.emplace(s.node, s);
  MergedAdditions out;
  for (const auto& f : from_feat) {
    auto [it, inserted] = merged.emplace(f.node, f);
    if (inserted) continue;
    ++out.overlaps;
    if (it->second.label != f.label) ++out.conflicts;
    if (f.confidence > it->second.confidence) it->second = f;
  }
  for (auto& [node, sel] : merged) out.additions.push_back(sel);
  return out;
}

nlohmann::json to_json(const IterationRecord& r) {
  return nlohmann::json{{"iter", r.iter},
                        {"S_size", r.labeled_size},
                        {"U_size", r.unlabeled_size},
                        {"quota", r.quota},
                        {"added_per_class_struct", r.added_struct},
                        {"added_per_class_feat", r.added_feat},
                        {"shortfall_struct", r.shortfall_struct},
                        {"shortfall_feat", r.shortfall_feat},
                        {"merged_added", r.merged_added},
                        {"overlaps", r.overlaps},
                        {"conflicts", r.conflicts},
                        {"temperature_struct", r.temperature_struct},
                        {"temperature_feat", r.temperature_feat},
                        {"acc_struct", r.acc_struct},
                        {"acc_feat", r.acc_feat},
                        {"acc_ensemble", r.acc_ensemble},
                        {"confusion_matrix", r.confusion}};
}

// ---- state -------------------------------------------------------------------

CoTrainState::CoTrainState(const Graph& g, const NodeSplit& split) {
  if (!g.has_labels()) throw ValidationError("co-training needs ground-truth labels for the labeled set");
  for (Index v : split.labeled) labeled_.emplace(v, LabelEntry{g.labels()[v], Provenance::GroundTruth, 0});
  ground_truth_ = labeled_;
  unlabeled_ = split.test;
  std::sort(unlabeled_.begin(), unlabeled_.end());
  for (Index v : unlabeled_)
    if (labeled_.count(v)) throw ValidationError("labeled and test sets overlap");
  universe_ = static_cast<Index>(labeled_.size() + unlabeled_.size());
}

LabeledNodes CoTrainState::training_set() const {
  LabeledNodes out;
  for (const auto& [node, entry] : labeled_) {
    out.nodes.push_back(node);
    out.labels.push_back(entry.label);
  }
  return out;
}

void CoTrainState::apply(std::span<const Selection> additions, int iteration) {
  for (const auto& s : additions) {
    auto it = std::lower_bound(unlabeled_.begin(), unlabeled_.end(), s.node);
    if (it == unlabeled_.end() || *it != s.node)
      throw std::logic_error("node " + std::to_string(s.node) + " is not in the unlabeled pool");
    unlabeled_.erase(it);
    labeled_.emplace(s.node, LabelEntry{s.label, s.provenance, iteration});
  }
  iteration_ = iteration;
}

std::vector<std::string> CoTrainState::check_invariants() const {
  std::vector<std::string> bad;
  for (Index v : unlabeled_)
    if (labeled_.count(v)) bad.push_back("node " + std::to_string(v) + " is in both S and U");
  if (!std::is_sorted(unlabeled_.begin(), unlabeled_.end()) ||
      std::adjacent_find(unlabeled_.begin(), unlabeled_.end()) != unlabeled_.end())
    bad.push_back("U is not a sorted set");
  if (static_cast<Index>(labeled_.size() + unlabeled_.size()) != universe_) bad.push_back("|S| + |U| changed");
  for (const auto& [node, entry] : ground_truth_) {
    auto it = labeled_.find(node);
    if (it == labeled_.end() || !(it->second == entry))
      bad.push_back("ground-truth entry for node " + std::to_string(node) + " was altered");
  }
  for (const auto& [node, entry] : labeled_)
    if (entry.provenance != Provenance::GroundTruth && (entry.iteration > iteration_ || entry.iteration < 0))
      bad.push_back("pseudo-label of node " + std::to_string(node) + " has an impossible iteration");
  for (std::size_t i = 1; i < history_.size(); ++i)
    if (history_[i].labeled_size < history_[i - 1].labeled_size) bad.push_back("|S| decreased in history");
  return bad;
}

std::vector<std::string> audit_transition(const LabeledMap& before, const LabeledMap& after) {
  std::vector<std::string> bad;
  if (after.size() < before.size()) bad.push_back("S shrank");
  for (const auto& [node, entry] : before) {
    auto it = after.find(node);
    if (it == after.end())
      bad.push_back("node " + std::to_string(node) + " left S");
    else if (!(it->second == entry))
      bad.push_back("entry for node " + std::to_string(node) + " changed");
  }
  return bad;
}

// ---- loop ----------------------------------------------------------------------

Matrix calibrated_probabilities(const TrainedSubModel& model) {
  return calibrate(predict_all_logits(model), model.temperature);
}

EnsemblePrediction ensemble_predict(const TrainedSubModel& structure, const TrainedSubModel& feature,
                                    std::span<const Index> nodes) {
  const Matrix ps = calibrate(predict_logits(structure, nodes), structure.temperature);
  const Matrix pf = calibrate(predict_logits(feature, nodes), feature.temperature);
  EnsemblePrediction out;
  out.probabilities = 0.5 * (ps + pf);
  out.labels = argmax_rows(out.probabilities);
  return out;
}

std::vector<std::vector<Index>> confusion_matrix(const std::vector<int>& predicted, const std::vector<int>& truth,
                                                 std::span<const Index> nodes, int num_classes) {
  std::vector<std::vector<Index>> m(num_classes, std::vector<Index>(num_classes, 0));
  for (Index v : nodes) ++m[truth[v]][predicted[v]];
  return m;
}

namespace {

std::vector<int> labels_of(std::span<const Index> nodes, const std::vector<int>& labels) {
  std::vector<int> out;
  out.reserve(nodes.size());
  for (Index v : nodes) out.push_back(labels[v]);
  return out;
}

Matrix rows_of(const Matrix& m, std::span<const Index> nodes) {
  Matrix out(static_cast<Index>(nodes.size()), m.cols());
  for (std::size_t i = 0; i < nodes.size(); ++i) out.row(static_cast<Index>(i)) = m.row(nodes[i]);
  return out;
}

void fit(TrainedSubModel& model, const Matrix& logits, const NodeSplit& split, const std::vector<int>& truth,
         bool enabled) {
  if (!enabled) {
    model.temperature = 1.0;
    return;
  }
  model.temperature = fit_temperature(rows_of(logits, split.validation), labels_of(split.validation, truth)).temperature;
}

}  // namespace

CoTrainResult cotrain(const Graph& g, const NodeSplit& split, const SubModelSpec& struct_spec,
                      const SubModelSpec& feat_spec, const CoTrainOptions& options) {
  return cotrain(g, split, build_submodel(struct_spec, g), build_submodel(feat_spec, g), options);
}

CoTrainResult cotrain(const Graph& g, const NodeSplit& split, const SubModel& struct_model,
                      const SubModel& feat_model, const CoTrainOptions& options) {
  if (!is_structure_dominant(struct_model.spec.kind))
    throw ValidationError(to_string(struct_model.spec.kind) + " is not a structure-dominant model");
  if (is_structure_dominant(feat_model.spec.kind))
    throw ValidationError(to_string(feat_model.spec.kind) + " is not a feature-dominant model");
  if (options.max_iters < 0) throw ValidationError("max_iters must be nonnegative");
  if (options.n_add < 0) throw ValidationError("n_add must be nonnegative");

  const std::vector<int>& truth = g.labels();
  const int classes = g.num_classes();
  CoTrainResult result{{}, {}, CoTrainState(g, split), {}};
  CoTrainState& state = result.state;
  const Quota quota = class_quota(split.class_histogram, options.n_add);
  const Seed struct_seed = mix_seed(options.seed, 11);
  const Seed feat_seed = mix_seed(options.seed, 12);

  for (int it = 0;; ++it) {
    if (options.keep_snapshots) result.snapshots.push_back(state.labeled());
    const LabeledNodes train_set = state.training_set();
    if (options.parallel) {
      auto pending = std::async(std::launch::async, [&] { return train_submodel(struct_model, train_set, struct_seed); });
      result.feature = train_submodel(feat_model, train_set, feat_seed);
      result.structure = pending.get();
    } else {
      result.structure = train_submodel(struct_model, train_set, struct_seed);
      result.feature = train_submodel(feat_model, train_set, feat_seed);
    }
    const Matrix logits_s = predict_all_logits(result.structure);
    const Matrix logits_f = predict_all_logits(result.feature);
    fit(result.structure, logits_s, split, truth, options.calibration);
    fit(result.feature, logits_f, split, truth, options.calibration);
    const Matrix probs_s = calibrate(logits_s, result.structure.temperature);
    const Matrix probs_f = calibrate(logits_f, result.feature.temperature);
    const std::vector<int> pred_ens = argmax_rows(0.5 * (probs_s + probs_f));

    IterationRecord rec;
    rec.iter = it;
    rec.labeled_size = static_cast<Index>(state.labeled().size());
    rec.unlabeled_size = static_cast<Index>(state.unlabeled().size());
    rec.temperature_struct = result.structure.temperature;
    rec.temperature_feat = result.feature.temperature;
    rec.acc_struct = accuracy(argmax_rows(probs_s), truth, split.test);
    rec.acc_feat = accuracy(argmax_rows(probs_f), truth, split.test);
    rec.acc_ensemble = accuracy(pred_ens, truth, split.test);
    rec.confusion = confusion_matrix(pred_ens, truth, split.test, classes);
    rec.added_struct.assign(classes, 0);
    rec.added_feat.assign(classes, 0);
    rec.shortfall_struct.assign(classes, 0);
    rec.shortfall_feat.assign(classes, 0);

    if (it >= options.max_iters || state.unlabeled().empty()) {
      state.record(std::move(rec));
      break;
    }

    const NodeList& pool = state.unlabeled();
    const Matrix pool_s = rows_of(probs_s, pool);
    const Matrix pool_f = rows_of(probs_f, pool);
    SelectionResult sel_s;
    SelectionResult sel_f;
    if (options.class_balancing) {
      rec.quota = quota.per_class;
      sel_s = select_confident(pool_s, pool, quota, Provenance::PseudoStruct);
      sel_f = select_confident(pool_f, pool, quota, Provenance::PseudoFeat);
    } else {
      sel_s = select_top(pool_s, pool, options.n_add, Provenance::PseudoStruct);
      sel_f = select_top(pool_f, pool, options.n_add, Provenance::PseudoFeat);
    }
    const MergedAdditions merged = resolve_conflicts(sel_s.selected, sel_f.selected);
    rec.added_struct = sel_s.per_class;
    rec.added_feat = sel_f.per_class;
    rec.shortfall_struct = sel_s.shortfall;
    rec.shortfall_feat = sel_f.shortfall;
    rec.merged_added = static_cast<Index>(merged.additions.size());
    rec.overlaps = merged.overlaps;
    rec.conflicts = merged.conflicts;
    state.record(std::move(rec));
    if (merged.additions.empty()) break;
    state.apply(merged.additions, it + 1);
  }
  return result;
}

void write_history_jsonl(const std::filesystem::path& path, const std::vector<IterationRecord>& history) {
  std::ostringstream out;
  for (const auto& r : history) out << to_json(r).dump() << '\n';
  io::write_text(path, out.str());
}

}  // namespace cog
