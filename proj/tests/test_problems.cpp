#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "gomea/problems.hpp"
#include "oracles.hpp"

using namespace gomea;

namespace {

// A dimension every family accepts.
std::size_t valid_dimension(const std::string& name) {
  if (name == "rebgrid") return 16;
  if (name == "osoreb") return 21;
  if (name == "reb5disjointpairs") return 23;  // blocks at 0,4,9,13,18
  if (name.rfind("reb10", 0) == 0) return 30;
  if (name == "reb5largeoverlap" || name == "reb5alternating") return 21;
  return 20;
}

double relative_error(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

std::vector<double> random_point(std::mt19937_64& gen, std::size_t n, double lo = -115.0, double hi = -100.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> x(n);
  for (auto& v : x) v = u(gen);
  return x;
}

}  // namespace

TEST(Problems, EveryFamilyMatchesItsFormula) {
  std::mt19937_64 gen(7);
  for (const auto& name : problem_names()) {
    const std::size_t ell = valid_dimension(name);
    const ProblemInstance p = make_problem(name, ell);
    for (int trial = 0; trial < 5; ++trial) {
      const auto x = random_point(gen, ell, -3.0, 3.0);
      EvaluationLedger ledger;
      const auto cache = evaluate_full(p, x, ledger);
      EXPECT_LT(relative_error(cache.fitness, oracle::evaluate(name, x)), 1e-10) << name;
      EXPECT_EQ(ledger.spent, 1.0);
    }
  }
}

TEST(Problems, KnownValues) {
  EvaluationLedger ledger;
  const std::vector<double> zeros(10, 0.0);
  EXPECT_EQ(evaluate_full(make_problem("sphere", 10), zeros, ledger).fitness, 0.0);
  const std::vector<double> ones(5, 1.0);
  EXPECT_EQ(evaluate_full(make_problem("rosenbrock", 5), ones, ledger).fitness, 0.0);
  const std::vector<double> x123 = {1.0, 2.0, 3.0};
  EXPECT_EQ(evaluate_full(make_problem("sphere", 3), x123, ledger).fitness, 14.0);
  const std::vector<double> x111 = {1.0, 1.0, 1.0};
  EXPECT_EQ(evaluate_full(make_problem("cigar", 3), x111, ledger).fitness, 1.0 + 2e6);
  EXPECT_EQ(ledger.spent, 4.0);
}

TEST(Problems, RotatedEllipsoidOnRotatedShortAxis) {
  const ProblemInstance p = make_problem("rotated-ellipsoid", 2);
  // Short axis in rotated coordinates is y = (1, 0); x = R^T y.
  const auto r = oracle::rotation(2, 45.0);
  const std::vector<double> x = {r[0][0], r[0][1]};
  EvaluationLedger ledger;
  const double f = evaluate_full(p, x, ledger).fitness;
  EXPECT_NEAR(f, oracle::rotated_ellipsoid(x, 6.0, 45.0), 1e-12);
  EXPECT_NEAR(f, 1.0, 1e-12);
}

TEST(Problems, SorebBlocks) {
  ProblemParams params;
  params.kappa = 5;
  const ProblemInstance p = make_problem("soreb", 20, params);
  ASSERT_EQ(p.subfunction_count(), 4u);
  std::set<std::size_t> seen;
  for (const auto& sub : p.subfunctions()) {
    EXPECT_EQ(sub.index_set.size(), 5u);
    for (std::size_t v : sub.index_set) EXPECT_TRUE(seen.insert(v).second);
  }
}

TEST(Problems, PartialCosts) {
  {
    ProblemParams params;
    params.kappa = 5;
    const ProblemInstance p = make_problem("soreb", 10, params);
    std::vector<double> x(10, 1.0);
    EvaluationLedger ledger;
    auto cache = evaluate_full(p, x, ledger);
    x[3] = 2.0;
    const std::size_t changed[] = {3};
    evaluate_partial(p, x, changed, cache, ledger);
    EXPECT_DOUBLE_EQ(ledger.spent - 1.0, 0.5);
  }
  {
    const ProblemInstance p = make_problem("sphere", 100);
    std::vector<double> x(100, 1.0);
    EvaluationLedger ledger;
    auto cache = evaluate_full(p, x, ledger);
    x[7] = 0.0;
    const std::size_t changed[] = {7};
    evaluate_partial(p, x, changed, cache, ledger);
    EXPECT_DOUBLE_EQ(ledger.spent, 1.01);
  }
}

TEST(Problems, SubfunctionCountDenominator) {
  ProblemParams params;
  params.kappa = 5;
  params.cost_denominator = CostDenominator::subfunction_count;
  const ProblemInstance p = make_problem("soreb", 10, params);
  EXPECT_DOUBLE_EQ(p.subfunction_cost(0), 5.0 / 2.0);
}

TEST(Problems, FullSweepMatchesFullEvaluationBitForBit) {
  const ProblemInstance p = make_problem("reb5nooverlap", 20);
  std::mt19937_64 gen(3);
  auto x = random_point(gen, 20);
  EvaluationLedger ledger;
  auto cache = evaluate_full(p, x, ledger);
  x = random_point(gen, 20);
  std::vector<std::size_t> all(20);
  for (std::size_t i = 0; i < 20; ++i) all[i] = i;
  EvaluationLedger partial_ledger;
  const double partial = evaluate_partial(p, x, all, cache, partial_ledger);
  EvaluationLedger full_ledger;
  EXPECT_EQ(partial, evaluate_full(p, x, full_ledger).fitness);
  EXPECT_NEAR(partial_ledger.spent, 1.0, 1e-12);
}

// Random single- and multi-variable change traces keep the cached fitness in
// step with a from-scratch evaluation.
TEST(Problems, PartialTracksFullOnRandomTraces) {
  std::mt19937_64 gen(11);
  for (const auto& name : problem_names()) {
    const std::size_t ell = valid_dimension(name);
    const ProblemInstance p = make_problem(name, ell);
    auto x = random_point(gen, ell);
    EvaluationLedger ledger;
    auto cache = evaluate_full(p, x, ledger);
    std::uniform_int_distribution<std::size_t> pick(0, ell - 1);
    std::uniform_int_distribution<std::size_t> width(1, std::min<std::size_t>(ell, 6));
    std::normal_distribution<double> step(0.0, 5.0);
    for (int trace = 0; trace < 1000; ++trace) {
      std::set<std::size_t> chosen;
      const std::size_t w = width(gen);
      while (chosen.size() < w) chosen.insert(pick(gen));
      const std::vector<std::size_t> changed(chosen.begin(), chosen.end());
      for (std::size_t v : changed) x[v] += step(gen);
      const double partial = evaluate_partial(p, x, changed, cache, ledger);
      EvaluationLedger scratch;
      const double full = evaluate_full(p, x, scratch).fitness;
      ASSERT_LE(relative_error(partial, full), 1e-9) << name << " trace " << trace;
    }
  }
}

TEST(Problems, CostConservationOnNonOverlappingSweeps) {
  for (const char* name : {"sphere", "soreb", "reb5nooverlap", "reb10nooverlap", "cigar", "different-powers"}) {
    const std::size_t ell = valid_dimension(name);
    const ProblemInstance p = make_problem(name, ell);
    std::vector<double> x(ell, 0.5);
    EvaluationLedger ledger;
    auto cache = evaluate_full(p, x, ledger);
    EvaluationLedger sweep;
    for (std::size_t k = 0; k < p.subfunction_count(); ++k) {
      const auto& idx = p.subfunctions()[k].index_set;
      for (std::size_t v : idx) x[v] += 1.0;
      evaluate_partial(p, x, idx, cache, sweep);
    }
    EXPECT_NEAR(sweep.spent, 1.0, 1e-12) << name;
  }
}

TEST(Problems, RotationsAreOrthogonalAndMatchTheOracle) {
  for (std::size_t n : {1, 2, 3, 5, 10}) {
    const Eigen::MatrixXd r = givens_rotation(n, 45.0);
    const Eigen::MatrixXd rtr = r.transpose() * r;
    EXPECT_TRUE(rtr.isIdentity(1e-10));
    const auto expected = oracle::rotation(n, 45.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        EXPECT_NEAR(r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), expected[i][j], 1e-12);
  }
}

TEST(Problems, ZeroAngleIsAxisAligned) {
  ProblemParams params;
  params.rotation_angle_deg = 0.0;
  const ProblemInstance p = make_problem("rotated-ellipsoid", 8, params);
  std::mt19937_64 gen(5);
  for (int t = 0; t < 20; ++t) {
    const auto x = random_point(gen, 8, -5.0, 5.0);
    double axis = 0.0;
    for (std::size_t i = 0; i < 8; ++i) axis += std::pow(10.0, 6.0 * static_cast<double>(i) / 7.0) * x[i] * x[i];
    EvaluationLedger ledger;
    EXPECT_LT(relative_error(evaluate_full(p, x, ledger).fitness, axis), 1e-10);
  }
}

TEST(Problems, TrueVigMatchesCoMembership) {
  for (const auto& name : problem_names()) {
    const std::size_t ell = valid_dimension(name);
    const ProblemInstance p = make_problem(name, ell);
    std::vector<std::vector<std::size_t>> sets;
    for (const auto& sub : p.subfunctions()) sets.push_back(sub.index_set);
    const auto adj = oracle::co_membership(ell, sets);
    const InteractionGraph g = true_vig(p);
    for (std::size_t u = 0; u < ell; ++u)
      for (std::size_t v = 0; v < ell; ++v) EXPECT_EQ(g.has_edge(u, v), static_cast<bool>(adj[u][v])) << name;
  }
}

TEST(Problems, TrueVigExamples) {
  EXPECT_EQ(true_vig(make_problem("sphere", 10)).edge_count(), 0u);
  const auto chain = true_vig(make_problem("rosenbrock", 4)).edges();
  const std::vector<std::pair<std::size_t, std::size_t>> expected = {{0, 1}, {1, 2}, {2, 3}};
  EXPECT_EQ(chain, expected);
  const InteractionGraph g = true_vig(make_problem("reb5smalloverlap", 13));
  for (std::size_t u = 0; u < 13; ++u)
    for (std::size_t v = 0; v < 13; ++v)
      if (u != v) {
        EXPECT_EQ(g.has_edge(u, v), (u > v ? u - v : v - u) < 5);
      }
}

TEST(Problems, InvalidInputs) {
  EXPECT_THROW(make_problem("nope", 10), std::invalid_argument);
  EXPECT_THROW(make_problem("rebgrid", 10), std::invalid_argument);
  EXPECT_THROW(make_problem("soreb", 12), std::invalid_argument);
  EXPECT_THROW(make_problem("sphere", 0), std::invalid_argument);
  ProblemParams zero;
  zero.kappa = 0;
  EXPECT_THROW(make_problem("soreb", 10, zero), std::invalid_argument);
  for (const auto& name : problem_names()) {
    if (name == "rebgrid") continue;
    if (name.rfind("reb", 0) == 0 || name == "soreb" || name == "osoreb") continue;
    EXPECT_NO_THROW(make_problem(name, 1)) << name;
  }
}

TEST(Problems, BudgetExhaustionLeavesCacheUntouched) {
  const ProblemInstance p = make_problem("sphere", 4);
  std::vector<double> x = {1.0, 2.0, 3.0, 4.0};
  EvaluationLedger ledger;
  ledger.budget = 1.1;
  auto cache = evaluate_full(p, x, ledger);
  const SubvalueCache before = cache;
  x[0] = 0.0;
  x[1] = 0.0;
  const std::size_t changed[] = {0, 1};
  EXPECT_THROW(evaluate_partial(p, x, changed, cache, ledger), BudgetExhausted);
  EXPECT_EQ(cache.values, before.values);
  EXPECT_EQ(cache.fitness, before.fitness);
  EXPECT_EQ(ledger.spent, 1.0);
}

TEST(Problems, RidgeTargets) {
  EXPECT_EQ(make_problem("parabolic-ridge", 5).vtr(), -1e10);
  EXPECT_EQ(make_problem("sharp-ridge", 5).vtr(), -1e10);
  EXPECT_EQ(make_problem("sphere", 5).vtr(), 1e-10);
}
