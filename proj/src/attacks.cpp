#include "cog/attacks.hpp"

#include "cog/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

namespace cog {

std::string to_string(AttackMethod method) {
  switch (method) {
    case AttackMethod::None: return "none";
    case AttackMethod::Random: return "random";
    case AttackMethod::Dice: return "dice";
    case AttackMethod::GradFeat: return "grad-feat";
    case AttackMethod::Mixed: return "mixed";
    case AttackMethod::External: return "external";
  }
  return "unknown";
}

AttackMethod parse_attack_method(const std::string& name) {
  std::string key;
  for (char ch : name) key.push_back(ch == '_' ? '-' : static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  if (key == "none" || key == "clean") return AttackMethod::None;
  if (key == "random") return AttackMethod::Random;
  if (key == "dice") return AttackMethod::Dice;
  if (key == "grad-feat" || key == "gradfeat") return AttackMethod::GradFeat;
  if (key == "mixed") return AttackMethod::Mixed;
  if (key == "external" || key == "metattack" || key == "pgd") return AttackMethod::External;
  throw ValidationError("unknown attack method '" + name + "'");
}

void PerturbationPlan::validate() const {
  if (!(rate >= 0.0 && rate <= 1.0)) throw ValidationError("perturbation rate must lie in [0, 1]");
  if (!(feature_ratio >= 0.0 && feature_ratio <= 1.0)) throw ValidationError("feature ratio must lie in [0, 1]");
  if (method == AttackMethod::External && external_path.empty())
    throw ValidationError("external perturbation needs a path");
}

std::string PerturbationPlan::label() const {
  switch (method) {
    case AttackMethod::None: return "clean";
    case AttackMethod::Mixed: return "mixed@" + io::format_double(rate) + ":" + io::format_double(feature_ratio);
    case AttackMethod::External: return "external:" + std::filesystem::path(external_path).filename().string();
    default: return to_string(method) + "@" + io::format_double(rate);
  }
}

Index Perturbation::insertions() const {
  return std::count_if(edge_flips.begin(), edge_flips.end(), [](const EdgeFlip& f) { return f.inserted; });
}

Index Perturbation::deletions() const { return static_cast<Index>(edge_flips.size()) - insertions(); }

std::string Perturbation::flip_log_hash() const {
  std::ostringstream log;
  for (const auto& f : edge_flips) log << (f.inserted ? '+' : '-') << f.a << ' ' << f.b << '\n';
  for (const auto& f : feature_flips) log << '~' << f.node << ' ' << f.feature << ' ' << f.new_value << '\n';
  return io::fnv1a_hex(log.str());
}

namespace {

Index budget_of(double rate, Index edges) { return static_cast<Index>(std::llround(rate * static_cast<double>(edges))); }

/// Applies the flip log to the graph's edge set.
Graph apply_edge_flips(const Graph& g, const std::vector<EdgeFlip>& flips) {
  std::set<Edge> edges(g.edges().begin(), g.edges().end());
  for (const auto& f : flips) {
    const Edge e{std::min(f.a, f.b), std::max(f.a, f.b)};
    if (f.inserted)
      edges.insert(e);
    else
      edges.erase(e);
  }
  return g.with_edges(std::vector<Edge>(edges.begin(), edges.end()));
}

}  // namespace

Perturbation random_structure_perturb(const Graph& g, double rate, Seed seed) {
  if (!(rate >= 0.0)) throw ValidationError("perturbation rate must be nonnegative");
  const Index n = g.num_nodes();
  Perturbation out;
  out.requested = budget_of(rate, g.num_edges());
  const Index pairs = n * (n - 1) / 2;
  Index budget = out.requested;
  if (budget > pairs) {
    out.notes.push_back("budget exceeds the number of node pairs; capped");
    budget = pairs;
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Index> node(0, n - 1);
  std::set<Edge> chosen;
  while (static_cast<Index>(chosen.size()) < budget) {
    const Index a = node(rng);
    const Index b = node(rng);
    if (a == b) continue;
    const Edge e{std::min(a, b), std::max(a, b)};
    if (!chosen.insert(e).second) continue;
    out.edge_flips.push_back({e.first, e.second, !g.has_edge(e.first, e.second)});
  }
  out.graph = apply_edge_flips(g, out.edge_flips);
  return out;
}

Perturbation dice_perturb(const Graph& g, std::span<const int> labels, double rate, Seed seed) {
  if (!(rate >= 0.0)) throw ValidationError("perturbation rate must be nonnegative");
  const Index n = g.num_nodes();
  if (static_cast<Index>(labels.size()) != n) throw ValidationError("DICE needs one label per node");
  Perturbation out;
  out.requested = budget_of(rate, g.num_edges());
  std::mt19937_64 rng(seed);

  std::vector<Edge> internal;
  for (const auto& e : g.edges())
    if (labels[e.first] == labels[e.second]) internal.push_back(e);
  std::shuffle(internal.begin(), internal.end(), rng);
  std::size_t next_delete = 0;

  std::set<Edge> inserted;
  std::vector<Edge> cross_pool;  // filled lazily if rejection sampling stalls
  bool pool_built = false;
  std::uniform_int_distribution<Index> node(0, n - 1);
  auto draw_insertion = [&](Edge& e) -> bool {
    if (!pool_built) {
      for (int attempt = 0; attempt < 200; ++attempt) {
        const Index a = node(rng);
        const Index b = node(rng);
        if (a == b || labels[a] == labels[b]) continue;
        e = {std::min(a, b), std::max(a, b)};
        if (g.has_edge(e.first, e.second) || inserted.count(e)) continue;
        return true;
      }
      for (Index a = 0; a < n; ++a)
        for (Index b = a + 1; b < n; ++b)
          if (labels[a] != labels[b] && !g.has_edge(a, b) && !inserted.count({a, b})) cross_pool.emplace_back(a, b);
      std::shuffle(cross_pool.begin(), cross_pool.end(), rng);
      pool_built = true;
    }
    if (cross_pool.empty()) return false;
    e = cross_pool.back();
    cross_pool.pop_back();
    return true;
  };

  std::bernoulli_distribution coin(0.5);
  bool can_delete = true;
  bool can_insert = true;
  for (Index unit = 0; unit < out.requested; ++unit) {
    bool want_delete = coin(rng);
    if (want_delete && !can_delete) want_delete = false;
    if (!want_delete && !can_insert) want_delete = true;
    if (want_delete) {
      if (next_delete < internal.size()) {
        const Edge e = internal[next_delete++];
        out.edge_flips.push_back({e.first, e.second, false});
        continue;
      }
      can_delete = false;
      out.notes.push_back("same-class edges exhausted at unit " + std::to_string(unit));
    }
    Edge e;
    if (can_insert && draw_insertion(e)) {
      inserted.insert(e);
      out.edge_flips.push_back({e.first, e.second, true});
      continue;
    }
    if (can_insert) {
      can_insert = false;
      out.notes.push_back("cross-class non-edges exhausted at unit " + std::to_string(unit));
    }
    if (can_delete && next_delete < internal.size()) {
      const Edge d = internal[next_delete++];
      out.edge_flips.push_back({d.first, d.second, false});
      continue;
    }
    break;
  }
  out.graph = apply_edge_flips(g, out.edge_flips);
  return out;
}

Perturbation feature_flip_attack(const Graph& g, const TrainedSubModel& victim, std::span<const Index> targets,
                                 Index budget, Seed /*seed: the greedy search is deterministic*/) {
  const Matrix& x0 = g.features();
  if (!((x0.array() == 0.0) || (x0.array() == 1.0)).all())
    throw ValidationError("feature flip attack needs binary features");
  if (victim.model.spec.kind == ModelKind::SMlp)
    throw ValidationError("feature flip attack needs a victim that consumes raw features");
  if (!g.has_labels()) throw ValidationError("feature flip attack needs labels for its loss");
  if (budget < 0) throw ValidationError("budget must be nonnegative");
  if (targets.empty() && budget > 0) throw ValidationError("feature flip attack needs target nodes");

  constexpr Index kBatch = 32;
  Perturbation out;
  out.requested = budget;
  Matrix x = x0;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> touched =
      Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(x.rows(), x.cols(), false);
  std::vector<int> target_labels;
  for (Index v : targets) target_labels.push_back(g.labels()[v]);

  struct Candidate {
    double score;
    Index node;
    Index feature;
  };
  std::vector<Candidate> cands;
  while (static_cast<Index>(out.feature_flips.size()) < budget) {
    TrainedSubModel current = victim;
    current.model = with_features(victim.model, x);
    const Matrix grad = input_gradient(current, targets, target_labels);
    cands.clear();
    for (Index i = 0; i < x.rows(); ++i)
      for (Index j = 0; j < x.cols(); ++j) {
        if (touched(i, j)) continue;
        const double score = x(i, j) == 0.0 ? grad(i, j) : -grad(i, j);
        if (score > 0.0) cands.push_back({score, i, j});
      }
    if (cands.empty()) {
      out.notes.push_back("no loss-increasing flip left after " + std::to_string(out.feature_flips.size()) + " flips");
      break;
    }
    const Index take = std::min<Index>({kBatch, budget - static_cast<Index>(out.feature_flips.size()),
                                        static_cast<Index>(cands.size())});
    std::partial_sort(cands.begin(), cands.begin() + take, cands.end(), [](const Candidate& a, const Candidate& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.node != b.node) return a.node < b.node;
      return a.feature < b.feature;
    });
    for (Index t = 0; t < take; ++t) {
      const auto& c = cands[t];
      x(c.node, c.feature) = 1.0 - x(c.node, c.feature);
      touched(c.node, c.feature) = true;
      out.feature_flips.push_back({c.node, c.feature, x(c.node, c.feature)});
    }
  }
  out.graph = g.with_features(std::move(x));
  return out;
}

MixedBudget mixed_budget(double total_rate, double feature_ratio, Index num_edges) {
  if (!(total_rate >= 0.0 && total_rate <= 1.0 && feature_ratio >= 0.0 && feature_ratio <= 1.0))
    throw ValidationError("mixed budget ratios must lie in [0, 1]");
  const double total = total_rate * static_cast<double>(num_edges);
  return {static_cast<Index>(std::llround(feature_ratio * total)),
          static_cast<Index>(std::llround((1.0 - feature_ratio) * total))};
}

Graph load_perturbed_adjacency(const Graph& g, const std::filesystem::path& path) {
  return g.with_edges(read_edge_list(path, g.num_nodes()));
}

Perturbation apply_plan(const Graph& g, const NodeSplit& split, const PerturbationPlan& plan,
                        const TrainHyper& victim_hyper) {
  plan.validate();
  auto feature_part = [&](const Graph& base, Index bits, Perturbation& into) {
    if (bits == 0) return;
    SubModelSpec spec = SubModelSpec::defaults(ModelKind::FMlp);
    spec.hyper = victim_hyper;
    const SubModel model = build_submodel(spec, base);
    LabeledNodes labeled;
    for (Index v : split.labeled) {
      labeled.nodes.push_back(v);
      labeled.labels.push_back(base.labels()[v]);
    }
    const TrainedSubModel victim = train_submodel(model, labeled, mix_seed(plan.seed, 7));
    Perturbation feat = feature_flip_attack(base, victim, split.test, bits, plan.seed);
    into.graph = std::move(feat.graph);
    into.feature_flips = std::move(feat.feature_flips);
    into.requested += feat.requested;
    into.notes.insert(into.notes.end(), feat.notes.begin(), feat.notes.end());
  };

  switch (plan.method) {
    case AttackMethod::None: {
      Perturbation out;
      out.graph = g;
      return out;
    }
    case AttackMethod::Random: return random_structure_perturb(g, plan.rate, plan.seed);
    case AttackMethod::Dice: return dice_perturb(g, g.labels(), plan.rate, plan.seed);
    case AttackMethod::GradFeat: {
      Perturbation out;
      out.graph = g;
      feature_part(g, budget_of(plan.rate, g.num_edges()), out);
      return out;
    }
    case AttackMethod::Mixed: {
      const MixedBudget b = mixed_budget(plan.rate, plan.feature_ratio, g.num_edges());
      const double structure_rate =
          g.num_edges() > 0 ? static_cast<double>(b.structure_flips) / static_cast<double>(g.num_edges()) : 0.0;
      Perturbation out = dice_perturb(g, g.labels(), structure_rate, plan.seed);
      // The victim is an F-MLP, whose training does not see the edge set.
      feature_part(out.graph, b.feature_bits, out);
      return out;
    }
    case AttackMethod::External: {
      Perturbation out;
      out.graph = load_perturbed_adjacency(g, plan.external_path);
      std::vector<Edge> removed;
      std::vector<Edge> added;
      std::set_difference(g.edges().begin(), g.edges().end(), out.graph.edges().begin(), out.graph.edges().end(),
                          std::back_inserter(removed));
      std::set_difference(out.graph.edges().begin(), out.graph.edges().end(), g.edges().begin(), g.edges().end(),
                          std::back_inserter(added));
      for (const auto& e : removed) out.edge_flips.push_back({e.first, e.second, false});
      for (const auto& e : added) out.edge_flips.push_back({e.first, e.second, true});
      out.requested = static_cast<Index>(out.edge_flips.size());
      return out;
    }
  }
  throw ValidationError("unhandled attack method");
}

nlohmann::json perturbation_sidecar(const PerturbationPlan& plan, const Perturbation& p) {
  return nlohmann::json{{"method", to_string(plan.method)},
                        {"rate", plan.rate},
                        {"ratio", plan.feature_ratio},
                        {"seed", plan.seed},
                        {"flip_log_hash", p.flip_log_hash()},
                        {"edge_insertions", p.insertions()},
                        {"edge_deletions", p.deletions()},
                        {"feature_flips", p.feature_flips.size()},
                        {"budget_unit", "edges; feature budget in bit flips normalized to |E|"},
                        {"notes", p.notes}};
}

void write_perturbation(const std::filesystem::path& dir, const PerturbationPlan& plan, const Perturbation& p) {
  write_edge_list(dir / "edges.tsv", p.graph.edges());
  write_features_csv(dir / "features.csv", p.graph.features());
  if (p.graph.has_labels()) write_labels_csv(dir / "labels.csv", p.graph.labels());
  io::write_text(dir / "perturbation.json", perturbation_sidecar(plan, p).dump(2) + "\n");
}

}  // namespace cog
