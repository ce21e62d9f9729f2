#pragma once

// Linkage discovery and representation: fitness-based pairwise dependency
// tests collected in a dependency strength matrix, thresholding into an
// interaction graph, clique seeding into conditional linkage sets, and the
// static linkage models.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gomea/graph.hpp"
#include "gomea/problems.hpp"
#include "gomea/random.hpp"

namespace gomea {

// A set of variables varied jointly. When `conditioned_on` is non-empty the
// sampled variables are drawn conditionally on the current values of those.
struct FosElement {
  std::vector<std::size_t> sampled;
  std::vector<std::size_t> conditioned_on;

  bool conditional() const { return !conditioned_on.empty(); }

  // Sampled variables first, then the conditioning ones. Covariance matrices
  // of sampling models use this ordering.
  std::vector<std::size_t> involved() const {
    std::vector<std::size_t> all = sampled;
    all.insert(all.end(), conditioned_on.begin(), conditioned_on.end());
    return all;
  }

  friend bool operator==(const FosElement&, const FosElement&) = default;
};

enum class LinkageOrigin {
  static_univariate,
  static_marginal_product,
  static_full,
  static_conditional_true_vig,
  fitness_based_online
};

struct LinkageModel {
  std::vector<FosElement> elements;
  LinkageOrigin origin = LinkageOrigin::static_univariate;

  bool conditional() const {
    return std::any_of(elements.begin(), elements.end(), [](const FosElement& e) { return e.conditional(); });
  }

  // Every variable appears in some sampled set.
  bool covers(std::size_t dimension) const {
    std::vector<char> seen(dimension, 0);
    for (const auto& e : elements)
      for (std::size_t v : e.sampled)
        if (v < dimension) seen[v] = 1;
    return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
  }
};

// Symmetric matrix of pairwise dependency strengths in [0, 1]. Untested pairs
// report strength 0.
class Dsm {
 public:
  Dsm() = default;
  explicit Dsm(std::size_t n) : n_(n), strengths_(n * n, 0.0), tested_(n * n, 0) {}

  std::size_t size() const { return n_; }
  double strength(std::size_t i, std::size_t j) const { return strengths_[i * n_ + j]; }
  bool tested(std::size_t i, std::size_t j) const { return tested_[i * n_ + j] != 0; }

  void record(std::size_t i, std::size_t j, double strength) {
    if (i == j) throw std::invalid_argument("dsm diagonal is fixed at zero");
    strengths_[i * n_ + j] = strength;
    strengths_[j * n_ + i] = strength;
    if (!tested_[i * n_ + j]) ++tested_pairs_;
    tested_[i * n_ + j] = 1;
    tested_[j * n_ + i] = 1;
  }

  std::size_t tested_pairs() const { return tested_pairs_; }
  std::size_t total_pairs() const { return n_ * (n_ - (n_ > 0 ? 1 : 0)) / 2; }
  bool complete() const { return tested_pairs_ == total_pairs(); }

  friend bool operator==(const Dsm&, const Dsm&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> strengths_;
  std::vector<char> tested_;
  std::size_t tested_pairs_ = 0;
};

// Second-difference non-additivity of (i, j) around `x`:
//   |f(x^ij) - f(x^i) - f(x^j) + f(x)| / (eps + max |f(.)|), clamped to [0, 1],
// where x^i moves coordinate i by gamma * init-range width. The numerator is
// accumulated per subfunction over those containing both i and j, which makes
// it exactly zero for pairs that share no subfunction. The pair is
// canonicalized so that (i, j) and (j, i) are bit-identical.
inline double dependency_test(const ProblemInstance& problem, std::span<const double> x, const SubvalueCache& cache,
                              std::size_t i, std::size_t j, EvaluationLedger& ledger, double gamma = 1.0) {
  if (i == j) throw std::invalid_argument("dependency test needs two distinct variables");
  if (i > j) std::swap(i, j);
  const double delta = gamma * problem.init_range().width();
  const std::size_t changed_i[] = {i};
  const std::size_t changed_j[] = {j};

  std::vector<double> xi(x.begin(), x.end());
  xi[i] += delta;
  SubvalueCache ci = cache;
  const double fi = evaluate_partial(problem, xi, changed_i, ci, ledger);

  std::vector<double> xj(x.begin(), x.end());
  xj[j] += delta;
  SubvalueCache cj = cache;
  const double fj = evaluate_partial(problem, xj, changed_j, cj, ledger);

  std::vector<double> xij = xi;
  xij[j] += delta;
  SubvalueCache cij = ci;
  const double fij = evaluate_partial(problem, xij, changed_j, cij, ledger);

  double numerator = 0.0;
  const auto& subs_i = problem.subfunctions_of(i);
  const auto& subs_j = problem.subfunctions_of(j);
  for (std::size_t k : subs_i) {
    if (std::find(subs_j.begin(), subs_j.end(), k) == subs_j.end()) continue;
    numerator += ((cij.values[k] - ci.values[k]) - cj.values[k]) + cache.values[k];
  }
  const double scale =
      std::max({std::abs(fij), std::abs(fi), std::abs(fj), std::abs(cache.fitness)});
  const double strength = std::abs(numerator) / (1e-300 + scale);
  return std::clamp(strength, 0.0, 1.0);
}

// Tests up to `pair_budget` untested pairs chosen uniformly at random without
// replacement. Returns the number of pairs tested.
inline std::size_t update_dsm_incremental(Dsm& dsm, const ProblemInstance& problem, std::span<const double> x,
                                          const SubvalueCache& cache, std::size_t pair_budget,
                                          EvaluationLedger& ledger, Rng& rng, double gamma = 1.0) {
  if (pair_budget == 0 || dsm.complete()) return 0;
  std::vector<std::pair<std::size_t, std::size_t>> untested;
  for (std::size_t i = 0; i < dsm.size(); ++i)
    for (std::size_t j = i + 1; j < dsm.size(); ++j)
      if (!dsm.tested(i, j)) untested.emplace_back(i, j);
  const std::size_t count = std::min(pair_budget, untested.size());
  // Partial Fisher-Yates: the first `count` entries become a uniform sample.
  for (std::size_t k = 0; k < count; ++k) std::swap(untested[k], untested[k + rng.below(untested.size() - k)]);
  for (std::size_t k = 0; k < count; ++k) {
    const auto [i, j] = untested[k];
    dsm.record(i, j, dependency_test(problem, x, cache, i, j, ledger, gamma));
  }
  return count;
}

// Dependency strength threshold used for learned interaction graphs.
inline constexpr double kDefaultDependencyThreshold = 1e-6;

struct Vig {
  InteractionGraph graph;
  double threshold = kDefaultDependencyThreshold;
};

// Edge (u, v) iff the pair was tested and its strength exceeds d_min.
inline Vig build_vig(const Dsm& dsm, double d_min = kDefaultDependencyThreshold) {
  if (d_min < 0.0) throw std::invalid_argument("threshold must be non-negative");
  Vig vig{InteractionGraph(dsm.size()), d_min};
  for (std::size_t i = 0; i < dsm.size(); ++i)
    for (std::size_t j = i + 1; j < dsm.size(); ++j)
      if (dsm.tested(i, j) && dsm.strength(i, j) > d_min) vig.graph.add_edge(i, j);
  return vig;
}

// Greedy maximal clique grown breadth-first from `start`: neighbors of the
// start vertex are admitted in ascending order when adjacent to every member.
inline std::vector<std::size_t> greedy_clique(const InteractionGraph& graph, std::size_t start) {
  std::vector<std::size_t> clique = {start};
  for (std::size_t candidate : graph.neighbors(start)) {
    const bool adjacent_to_all = std::all_of(clique.begin(), clique.end(),
                                             [&](std::size_t member) { return graph.has_edge(member, candidate); });
    if (adjacent_to_all) clique.push_back(candidate);
  }
  std::sort(clique.begin(), clique.end());
  return clique;
}

// One conditional linkage set per distinct seeded clique, conditioned on all
// vertices outside the clique with an edge into it. Elements are ordered by
// the first start vertex that produced them.
inline LinkageModel clique_seeding(const InteractionGraph& graph,
                                   LinkageOrigin origin = LinkageOrigin::fitness_based_online) {
  LinkageModel model;
  model.origin = origin;
  std::set<std::vector<std::size_t>> seen;
  for (std::size_t v = 0; v < graph.size(); ++v) {
    auto clique = greedy_clique(graph, v);
    if (!seen.insert(clique).second) continue;
    std::vector<char> in_clique(graph.size(), 0);
    for (std::size_t u : clique) in_clique[u] = 1;
    std::vector<char> is_neighbor(graph.size(), 0);
    for (std::size_t u : clique)
      for (std::size_t w : graph.neighbors(u))
        if (!in_clique[w]) is_neighbor[w] = 1;
    FosElement element;
    element.sampled = std::move(clique);
    for (std::size_t w = 0; w < graph.size(); ++w)
      if (is_neighbor[w]) element.conditioned_on.push_back(w);
    model.elements.push_back(std::move(element));
  }
  return model;
}

enum class StaticModelKind { univariate, marginal_product, full, conditional_true_vig };

inline LinkageModel static_model(StaticModelKind kind, const ProblemInstance& problem, std::size_t block_size = 0) {
  const std::size_t ell = problem.dimension();
  LinkageModel model;
  switch (kind) {
    case StaticModelKind::univariate:
      model.origin = LinkageOrigin::static_univariate;
      for (std::size_t i = 0; i < ell; ++i) model.elements.push_back({{i}, {}});
      break;
    case StaticModelKind::marginal_product:
      if (block_size == 0 || ell % block_size != 0)
        throw std::invalid_argument("marginal-product block size must divide the dimension");
      model.origin = LinkageOrigin::static_marginal_product;
      for (std::size_t start = 0; start < ell; start += block_size) {
        FosElement element;
        for (std::size_t i = start; i < start + block_size; ++i) element.sampled.push_back(i);
        model.elements.push_back(std::move(element));
      }
      break;
    case StaticModelKind::full: {
      model.origin = LinkageOrigin::static_full;
      FosElement element;
      for (std::size_t i = 0; i < ell; ++i) element.sampled.push_back(i);
      model.elements.push_back(std::move(element));
      break;
    }
    case StaticModelKind::conditional_true_vig:
      model = clique_seeding(true_vig(problem), LinkageOrigin::static_conditional_true_vig);
      break;
  }
  return model;
}

// `u v strength` per edge, u < v. Without a DSM every edge reports 1.
inline void write_edge_list(std::ostream& out, const InteractionGraph& graph, const Dsm* dsm = nullptr) {
  for (const auto& [u, v] : graph.edges()) out << u << ' ' << v << ' ' << (dsm ? dsm->strength(u, v) : 1.0) << '\n';
}

// One line per element: sampled indices, then `|` and the conditioning ones.
inline void write_linkage(std::ostream& out, const LinkageModel& model) {
  for (const auto& element : model.elements) {
    for (std::size_t k = 0; k < element.sampled.size(); ++k) out << (k ? " " : "") << element.sampled[k];
    if (element.conditional()) {
      out << " |";
      for (std::size_t v : element.conditioned_on) out << ' ' << v;
    }
    out << '\n';
  }
}

}  // namespace gomea
