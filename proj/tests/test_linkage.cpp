#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>

#include "gomea/linkage.hpp"
#include "oracles.hpp"

using namespace gomea;

namespace {

InteractionGraph graph_from(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  InteractionGraph g(n);
  for (auto [u, v] : edges) g.add_edge(u, v);
  return g;
}

std::vector<std::vector<bool>> adjacency(const InteractionGraph& g) {
  std::vector<std::vector<bool>> adj(g.size(), std::vector<bool>(g.size(), false));
  for (auto [u, v] : g.edges()) adj[u][v] = adj[v][u] = true;
  return adj;
}

Dsm exhaustive_dsm(const ProblemInstance& p, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(p.dimension());
  for (auto& v : x) v = rng.uniform(p.init_range().lower, p.init_range().upper);
  EvaluationLedger ledger;
  const auto cache = evaluate_full(p, x, ledger);
  Dsm dsm(p.dimension());
  update_dsm_incremental(dsm, p, x, cache, dsm.total_pairs(), ledger, rng);
  return dsm;
}

}  // namespace

TEST(Linkage, DependencyIsZeroOnSeparableProblems) {
  const ProblemInstance p = make_problem("sphere", 6);
  const Dsm dsm = exhaustive_dsm(p, 1);
  ASSERT_TRUE(dsm.complete());
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) EXPECT_EQ(dsm.strength(i, j), 0.0);
}

TEST(Linkage, DependencyTestIsSymmetricBitForBit) {
  const ProblemInstance p = make_problem("reb5smalloverlap", 13);
  Rng rng(4);
  std::vector<double> x(13);
  for (auto& v : x) v = rng.uniform(-115.0, -100.0);
  EvaluationLedger ledger;
  const auto cache = evaluate_full(p, x, ledger);
  for (std::size_t i = 0; i < 13; ++i)
    for (std::size_t j = i + 1; j < 13; ++j) {
      const double a = dependency_test(p, x, cache, i, j, ledger);
      const double b = dependency_test(p, x, cache, j, i, ledger);
      EXPECT_EQ(a, b);
      EXPECT_GE(a, 0.0);
      EXPECT_LE(a, 1.0);
    }
}

TEST(Linkage, DependencyTestCostsThreePartialEvaluations) {
  const ProblemInstance p = make_problem("sphere", 10);
  std::vector<double> x(10, 1.0);
  EvaluationLedger ledger;
  const auto cache = evaluate_full(p, x, ledger);
  dependency_test(p, x, cache, 2, 7, ledger);
  EXPECT_NEAR(ledger.spent - 1.0, 0.3, 1e-12);
}

TEST(Linkage, SmallBudgetCoversAllPairs) {
  const ProblemInstance p = make_problem("reb5nooverlap", 5);
  Rng rng(2);
  std::vector<double> x(5, -107.0);
  EvaluationLedger ledger;
  const auto cache = evaluate_full(p, x, ledger);
  Dsm dsm(5);
  EXPECT_EQ(update_dsm_incremental(dsm, p, x, cache, 10, ledger, rng), 10u);
  EXPECT_TRUE(dsm.complete());
  EXPECT_EQ(update_dsm_incremental(dsm, p, x, cache, 10, ledger, rng), 0u);
}

TEST(Linkage, IncrementalUpdateNeverRetestsPairs) {
  const ProblemInstance p = make_problem("reb5smalloverlap", 20);
  Rng rng(8);
  std::vector<double> x(20, -107.0);
  EvaluationLedger ledger;
  const auto cache = evaluate_full(p, x, ledger);
  Dsm dsm(20);
  std::size_t total = 0;
  for (int round = 0; round < 12; ++round) {
    const std::size_t before = dsm.tested_pairs();
    const std::size_t tested = update_dsm_incremental(dsm, p, x, cache, 20, ledger, rng);
    EXPECT_EQ(dsm.tested_pairs(), before + tested);
    total += tested;
  }
  EXPECT_EQ(total, 190u);
  EXPECT_TRUE(dsm.complete());
}

TEST(Linkage, ExhaustiveDsmRecoversTheTrueGraph) {
  for (const char* name : {"reb5nooverlap", "reb5smalloverlap"}) {
    const ProblemInstance p = make_problem(name, 20);
    const Vig vig = build_vig(exhaustive_dsm(p, 17));
    EXPECT_EQ(vig.graph, true_vig(p)) << name;
  }
}

TEST(Linkage, BuildVigIgnoresUntestedPairs) {
  Dsm dsm(4);
  dsm.record(0, 1, 0.5);
  dsm.record(2, 3, 1e-9);
  const Vig vig = build_vig(dsm);
  EXPECT_EQ(vig.graph.edges(), (std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}}));
  EXPECT_THROW(build_vig(dsm, -1.0), std::invalid_argument);
}

TEST(Linkage, ChainSeeding) {
  const LinkageModel m = clique_seeding(graph_from(4, {{0, 1}, {1, 2}, {2, 3}}));
  ASSERT_EQ(m.elements.size(), 3u);
  EXPECT_EQ(m.elements[0], (FosElement{{0, 1}, {2}}));
  EXPECT_EQ(m.elements[1], (FosElement{{1, 2}, {0, 3}}));
  EXPECT_EQ(m.elements[2], (FosElement{{2, 3}, {1}}));
}

TEST(Linkage, CompleteAndEdgelessSeeding) {
  const LinkageModel complete = clique_seeding(graph_from(3, {{0, 1}, {0, 2}, {1, 2}}));
  ASSERT_EQ(complete.elements.size(), 1u);
  EXPECT_EQ(complete.elements[0], (FosElement{{0, 1, 2}, {}}));
  const LinkageModel edgeless = clique_seeding(InteractionGraph(3));
  ASSERT_EQ(edgeless.elements.size(), 3u);
  for (std::size_t v = 0; v < 3; ++v) EXPECT_EQ(edgeless.elements[v], (FosElement{{v}, {}}));
}

TEST(Linkage, GridSeedingMatchesLexicographicCliques) {
  const ProblemInstance p = make_problem("rebgrid", 9);
  const InteractionGraph g = true_vig(p);
  const auto adj = adjacency(g);
  std::set<std::vector<std::size_t>> expected;
  for (std::size_t v = 0; v < 9; ++v) {
    EXPECT_EQ(greedy_clique(g, v), oracle::lexicographic_clique(adj, v)) << v;
    expected.insert(oracle::lexicographic_clique(adj, v));
  }
  const LinkageModel m = clique_seeding(g);
  std::set<std::vector<std::size_t>> got;
  for (const auto& e : m.elements) got.insert(e.sampled);
  EXPECT_EQ(got, expected);
}

// Structural invariants on random graphs, checked against brute force.
TEST(Linkage, SeedingInvariantsOnRandomGraphs) {
  std::mt19937_64 gen(21);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 2 + trial % 9;
    std::bernoulli_distribution edge(0.1 + 0.8 * static_cast<double>(trial % 7) / 6.0);
    InteractionGraph g(n);
    for (std::size_t u = 0; u < n; ++u)
      for (std::size_t v = u + 1; v < n; ++v)
        if (edge(gen)) g.add_edge(u, v);
    const auto adj = adjacency(g);
    const LinkageModel m = clique_seeding(g);
    EXPECT_TRUE(m.covers(n));
    std::set<std::vector<std::size_t>> distinct;
    for (const auto& e : m.elements) {
      EXPECT_TRUE(distinct.insert(e.sampled).second);
      for (std::size_t a : e.sampled)
        for (std::size_t b : e.sampled)
          if (a != b) EXPECT_TRUE(adj[a][b]);
      std::set<std::size_t> neighbors;
      for (std::size_t a : e.sampled)
        for (std::size_t w = 0; w < n; ++w)
          if (adj[a][w] && std::find(e.sampled.begin(), e.sampled.end(), w) == e.sampled.end()) neighbors.insert(w);
      EXPECT_EQ(e.conditioned_on, std::vector<std::size_t>(neighbors.begin(), neighbors.end()));
    }
    for (std::size_t v = 0; v < n; ++v) EXPECT_EQ(greedy_clique(g, v), oracle::lexicographic_clique(adj, v));
  }
}

TEST(Linkage, StaticModels) {
  const ProblemInstance p = make_problem("soreb", 10);
  EXPECT_EQ(static_model(StaticModelKind::univariate, p).elements.size(), 10u);
  const LinkageModel blocks = static_model(StaticModelKind::marginal_product, p, 5);
  ASSERT_EQ(blocks.elements.size(), 2u);
  EXPECT_EQ(blocks.elements[1].sampled, (std::vector<std::size_t>{5, 6, 7, 8, 9}));
  EXPECT_THROW(static_model(StaticModelKind::marginal_product, p, 3), std::invalid_argument);
  const LinkageModel full = static_model(StaticModelKind::full, p);
  ASSERT_EQ(full.elements.size(), 1u);
  EXPECT_EQ(full.elements[0].sampled.size(), 10u);
  const LinkageModel vig = static_model(StaticModelKind::conditional_true_vig, p);
  ASSERT_EQ(vig.elements.size(), 2u);
  EXPECT_FALSE(vig.conditional());
}

TEST(Linkage, EdgeListFormat) {
  const InteractionGraph g = graph_from(3, {{2, 0}, {1, 2}});
  std::ostringstream plain;
  write_edge_list(plain, g);
  EXPECT_EQ(plain.str(), "0 2 1\n1 2 1\n");
  Dsm dsm(3);
  dsm.record(0, 2, 0.25);
  dsm.record(1, 2, 0.5);
  std::ostringstream weighted;
  write_edge_list(weighted, g, &dsm);
  EXPECT_EQ(weighted.str(), "0 2 0.25\n1 2 0.5\n");
}
