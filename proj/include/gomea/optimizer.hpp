#pragma once

// The RV-GOMEA / iRV-GOMEA generation loop: truncation selection, per-element
// model maintenance (full re-estimation or incremental), gene-pool optimal
// mixing with partial evaluations, the conditional repair sweep, anticipated
// mean shift, adaptive variance scaling and termination.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gomea/distribution.hpp"
#include "gomea/linkage.hpp"
#include "gomea/problems.hpp"
#include "gomea/random.hpp"

namespace gomea {

enum class Variant { rv_gomea, irv_gomea };

inline std::string to_string(Variant v) { return v == Variant::rv_gomea ? "rv" : "irv"; }

inline Variant parse_variant(const std::string& text) {
  if (text == "rv" || text == "rv-gomea") return Variant::rv_gomea;
  if (text == "irv" || text == "irv-gomea") return Variant::irv_gomea;
  throw std::invalid_argument("unknown variant: " + text);
}

enum class LinkageKind { univariate, marginal_product, full, conditional_true_vig, fitness_based };

struct LinkageSpec {
  LinkageKind kind = LinkageKind::univariate;
  std::size_t block_size = 0;  // marginal_product only

  friend bool operator==(const LinkageSpec&, const LinkageSpec&) = default;
};

inline std::string to_string(const LinkageSpec& spec) {
  switch (spec.kind) {
    case LinkageKind::univariate: return "univariate";
    case LinkageKind::marginal_product: return "blocks:" + std::to_string(spec.block_size);
    case LinkageKind::full: return "full";
    case LinkageKind::conditional_true_vig: return "true-vig";
    case LinkageKind::fitness_based: return "fitness-based";
  }
  return "?";
}

inline LinkageSpec parse_linkage(const std::string& text) {
  if (text == "univariate") return {LinkageKind::univariate, 0};
  if (text == "full") return {LinkageKind::full, 0};
  if (text == "true-vig") return {LinkageKind::conditional_true_vig, 0};
  if (text == "fitness-based") return {LinkageKind::fitness_based, 0};
  if (text.rfind("blocks:", 0) == 0) {
    const long k = std::stol(text.substr(7));
    if (k <= 0) throw std::invalid_argument("block size must be positive");
    return {LinkageKind::marginal_product, static_cast<std::size_t>(k)};
  }
  throw std::invalid_argument("unknown linkage: " + text);
}

// Block size the population guidelines are keyed on.
inline std::size_t guideline_kappa(const LinkageSpec& spec, const ProblemInstance& problem) {
  switch (spec.kind) {
    case LinkageKind::univariate: return 1;
    case LinkageKind::marginal_product: return spec.block_size;
    case LinkageKind::full: return problem.dimension();
    case LinkageKind::conditional_true_vig:
    case LinkageKind::fitness_based: return problem.max_subfunction_size();
  }
  return 1;
}

// iRV-GOMEA: 10 + 3k. RV-GOMEA: round(17 + 3k^1.5).
inline std::size_t population_guideline(Variant variant, std::size_t kappa) {
  if (kappa < 1) throw std::invalid_argument("kappa must be >= 1");
  const double k = static_cast<double>(kappa);
  if (variant == Variant::irv_gomea) return 10 + 3 * kappa;
  return static_cast<std::size_t>(std::llround(17.0 + 3.0 * std::pow(k, 1.5)));
}

struct OptimizerConfig {
  std::size_t population_size = 0;
  double tau = 0.35;
  Variant variant = Variant::irv_gomea;
  LinkageSpec linkage;
  double forced_accept_prob = 0.0;
  std::optional<double> multiplier_decrease;  // default: 0.9 (rv) or 0.95 (irv)
  std::optional<std::size_t> nis_max;         // default: 25 + ell
  std::optional<double> vtr;                  // default: the problem's
  double budget = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;
  Alphas alpha_cov = kCovarianceAlphas;
  Alphas alpha_ams = kAmsAlphas;
  std::optional<double> eta_cov_override;  // fixed rates, used by rate tuning
  std::optional<double> eta_ams_override;
  std::optional<std::size_t> dsm_pair_budget;  // default: ell pairs per generation
  double d_min = kDefaultDependencyThreshold;
  double dependency_gamma = 1.0;
  double delta_ams = 2.0;
  bool global_ams = false;  // one incrementally learned shift over all variables
  bool repair = true;
  bool improvement_over_parent = false;  // AVS counts any strict decrease, not only beating the elite
  std::size_t max_generations = 0;  // 0: unbounded

  std::size_t selection_size() const {
    return static_cast<std::size_t>(std::floor(tau * static_cast<double>(population_size) + 1e-9));
  }

  void validate() const {
    if (population_size < 2) throw std::invalid_argument("population size must be >= 2");
    if (selection_size() < 1) throw std::invalid_argument("selection size floor(tau * |P|) must be >= 1");
    if (forced_accept_prob < 0.0 || forced_accept_prob > 1.0)
      throw std::invalid_argument("forced accept probability must lie in [0, 1]");
    if (linkage.kind == LinkageKind::marginal_product && linkage.block_size == 0)
      throw std::invalid_argument("marginal-product linkage needs a block size");
  }
};

struct Solution {
  std::vector<double> x;
  SubvalueCache cache;
  double fitness() const { return cache.fitness; }
};

struct GenerationTelemetry {
  std::size_t generation = 0;
  double best_fitness = 0.0;
  double spent = 0.0;
  double multiplier_min = 0.0;
  double multiplier_max = 0.0;
  std::size_t fallback_events = 0;
};

struct RunState {
  OptimizerConfig config;
  const ProblemInstance* problem = nullptr;
  double vtr = 0.0;
  double multiplier_decrease = kAsymmetricMultiplierDecrease;
  std::size_t nis_max = 0;

  std::vector<Solution> population;
  LinkageModel linkage;
  std::vector<SamplingModel> models;
  Eigen::MatrixXd selection;
  Eigen::VectorXd previous_mean;  // previous generation's selection mean
  Eigen::VectorXd global_shift;   // only with config.global_ams
  Dsm dsm;
  std::size_t nis = 0;
  std::size_t generation = 0;
  EvaluationLedger ledger;
  Solution best;
  Rng rng;
  std::size_t fallback_events = 0;
  bool vtr_hit = false;
  bool budget_exhausted = false;

  std::function<void(const GenerationTelemetry&)> telemetry;
};

struct RunResult {
  bool success = false;
  double evaluations_spent = 0.0;
  std::size_t generations = 0;
  double best_fitness = std::numeric_limits<double>::infinity();
  std::vector<double> best_x;
  std::size_t fallback_events = 0;
  std::chrono::duration<double> wall_time{0.0};
  std::string termination;
  LinkageModel final_linkage;
  Dsm dsm;  // fitness-based linkage only
};

namespace detail {

inline void note_accepted(RunState& state, const Solution& solution) {
  if (solution.fitness() < state.best.fitness()) state.best = solution;
  if (solution.fitness() <= state.vtr) state.vtr_hit = true;
}

inline void clip_to_bounds(const ProblemInstance& problem, std::vector<double>& x,
                           std::span<const std::size_t> indices) {
  if (!problem.bounds()) return;
  const auto& [lower, upper] = *problem.bounds();
  for (std::size_t v : indices) x[v] = std::clamp(x[v], lower[v], upper[v]);
}

inline std::size_t best_index(const std::vector<Solution>& population) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < population.size(); ++i)
    if (population[i].fitness() < population[best].fitness()) best = i;
  return best;
}

inline void make_selection(RunState& state) {
  const auto& pop = state.population;
  std::vector<std::size_t> order(pop.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pop[a].fitness() < pop[b].fitness(); });
  const std::size_t s = state.config.selection_size();
  const auto ell = static_cast<Eigen::Index>(state.problem->dimension());
  state.selection.resize(static_cast<Eigen::Index>(s), ell);
  for (std::size_t r = 0; r < s; ++r)
    for (Eigen::Index c = 0; c < ell; ++c)
      state.selection(static_cast<Eigen::Index>(r), c) = pop[order[r]].x[static_cast<std::size_t>(c)];
}

inline LinkageModel initial_linkage(const OptimizerConfig& config, const ProblemInstance& problem) {
  switch (config.linkage.kind) {
    case LinkageKind::univariate: return static_model(StaticModelKind::univariate, problem);
    case LinkageKind::marginal_product:
      return static_model(StaticModelKind::marginal_product, problem, config.linkage.block_size);
    case LinkageKind::full: return static_model(StaticModelKind::full, problem);
    case LinkageKind::conditional_true_vig: return static_model(StaticModelKind::conditional_true_vig, problem);
    case LinkageKind::fitness_based:
      // Untested pairs count as independent: the first model is univariate.
      return clique_seeding(InteractionGraph(problem.dimension()), LinkageOrigin::fitness_based_online);
  }
  return {};
}

// Fresh models for `linkage`, seeded from `previous` by covariance transfer.
inline std::vector<SamplingModel> seed_models(RunState& state, const LinkageModel& linkage,
                                              std::span<const SamplingModel> previous) {
  std::vector<SamplingModel> models;
  models.reserve(linkage.elements.size());
  for (const auto& element : linkage.elements) {
    SamplingModel model(element);
    TransferResult transfer = transfer_covariance(previous, model.involved, state.selection, state.rng);
    model.cov = std::move(transfer.seed);
    if (transfer.exact_match) {
      const SamplingModel& source = previous[transfer.sources.front()];
      model.multiplier = source.multiplier;
      // Same variable set; carry the shift over when the sampled split matches too.
      if (source.element.sampled == element.sampled) model.ams_shift = source.ams_shift;
    } else if (!transfer.sources.empty()) {
      model.multiplier = previous[transfer.sources.front()].multiplier;
    }
    model.mean = ml_estimate(state.selection, model.involved).mean;
    models.push_back(std::move(model));
  }
  return models;
}

inline LearningRates rates_for(const RunState& state, const SamplingModel& model) {
  const auto s = static_cast<double>(state.config.selection_size());
  const auto kappa = static_cast<double>(model.involved.size());
  LearningRates rates;
  rates.eta_cov = state.config.eta_cov_override.value_or(learning_rate(state.config.alpha_cov, s, kappa));
  rates.eta_ams = state.config.eta_ams_override.value_or(learning_rate(state.config.alpha_ams, s, kappa));
  return rates;
}

}  // namespace detail

// Uniform initial population, fully evaluated, plus the initial linkage model
// with covariances seeded from the first selection (ML variances on the
// diagonal, zero elsewhere).
inline RunState initialize(const OptimizerConfig& config, const ProblemInstance& problem) {
  config.validate();
  if (config.budget < static_cast<double>(config.population_size))
    throw std::invalid_argument("budget smaller than the population size");
  RunState state;
  state.config = config;
  state.problem = &problem;
  state.vtr = config.vtr.value_or(problem.vtr());
  state.multiplier_decrease = config.multiplier_decrease.value_or(
      config.variant == Variant::rv_gomea ? kClassicMultiplierDecrease : kAsymmetricMultiplierDecrease);
  const std::size_t ell = problem.dimension();
  state.nis_max = config.nis_max.value_or(25 + ell);
  state.ledger.budget = config.budget;
  state.rng = Rng(config.seed);

  state.population.resize(config.population_size);
  for (auto& solution : state.population) {
    solution.x.resize(ell);
    for (std::size_t v = 0; v < ell; ++v) {
      double lo = problem.init_range().lower;
      double hi = problem.init_range().upper;
      if (problem.bounds()) {
        lo = problem.bounds()->first[v];
        hi = problem.bounds()->second[v];
      }
      solution.x[v] = state.rng.uniform(lo, hi);
    }
  }
  for (auto& solution : state.population) solution.cache = evaluate_full(problem, solution.x, state.ledger);
  state.best = state.population[detail::best_index(state.population)];
  state.vtr_hit = state.best.fitness() <= state.vtr;

  if (config.linkage.kind == LinkageKind::fitness_based) state.dsm = Dsm(ell);
  state.linkage = detail::initial_linkage(config, problem);
  if (!state.linkage.covers(ell)) throw std::logic_error("linkage model does not cover all variables");
  detail::make_selection(state);
  state.models = detail::seed_models(state, state.linkage, {});
  if (config.global_ams) state.global_shift = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ell));
  return state;
}

struct GomOutcome {
  bool accepted = false;
  bool improved = false;  // strictly better than the generation's elite
  double fitness = 0.0;
};

// Resample the model's variables in one solution, partially evaluate and keep
// the change iff the solution did not get worse (or by forced acceptance). A
// rejected change restores coordinates and cached subvalues exactly.
inline GomOutcome gom_step(RunState& state, std::size_t model_index, std::size_t solution_index, bool shift,
                           double elite_fitness = -std::numeric_limits<double>::infinity()) {
  const SamplingModel& model = state.models[model_index];
  Solution& solution = state.population[solution_index];
  const auto& sampled = model.element.sampled;
  const auto& given = model.element.conditioned_on;

  Eigen::VectorXd conditioning(static_cast<Eigen::Index>(given.size()));
  for (std::size_t k = 0; k < given.size(); ++k) conditioning(static_cast<Eigen::Index>(k)) = solution.x[given[k]];
  Eigen::VectorXd values = sample(model, conditioning, state.rng);
  if (shift) values = apply_ams(values, model, state.config.delta_ams);

  std::vector<double> old_values(sampled.size());
  for (std::size_t k = 0; k < sampled.size(); ++k) {
    old_values[k] = solution.x[sampled[k]];
    solution.x[sampled[k]] = values(static_cast<Eigen::Index>(k));
  }
  detail::clip_to_bounds(*state.problem, solution.x, sampled);
  SubvalueCache old_cache = solution.cache;
  const double old_fitness = old_cache.fitness;

  double new_fitness = 0.0;
  try {
    new_fitness = evaluate_partial(*state.problem, solution.x, sampled, solution.cache, state.ledger);
  } catch (const BudgetExhausted&) {
    for (std::size_t k = 0; k < sampled.size(); ++k) solution.x[sampled[k]] = old_values[k];
    throw;
  }

  GomOutcome outcome;
  outcome.accepted = new_fitness <= old_fitness;
  if (!outcome.accepted && state.config.forced_accept_prob > 0.0)
    outcome.accepted = state.rng.uniform01() < state.config.forced_accept_prob;
  if (outcome.accepted) {
    outcome.improved = new_fitness < (state.config.improvement_over_parent ? old_fitness : elite_fitness);
    outcome.fitness = new_fitness;
    detail::note_accepted(state, solution);
  } else {
    for (std::size_t k = 0; k < sampled.size(); ++k) solution.x[sampled[k]] = old_values[k];
    solution.cache = std::move(old_cache);
    outcome.fitness = old_fitness;
  }
  return outcome;
}

// One step of the repair sweep: the sampled-but-not-yet-covered variables of
// an element, drawn conditionally on the already resampled variables of that
// element (conditioning variables not yet resampled are marginalized out).
struct RepairStep {
  std::size_t model_index = 0;
  std::vector<std::size_t> target;  // variable indices
  std::vector<std::size_t> given;
  ConditionalSampler sampler;
};

inline std::vector<RepairStep> make_repair_plan(const std::vector<SamplingModel>& models, std::size_t dimension,
                                                std::size_t* fallbacks = nullptr) {
  std::vector<RepairStep> plan;
  std::vector<char> covered(dimension, 0);
  for (std::size_t m = 0; m < models.size(); ++m) {
    const SamplingModel& model = models[m];
    RepairStep step;
    step.model_index = m;
    std::vector<Eigen::Index> target_pos;
    std::vector<Eigen::Index> given_pos;
    for (std::size_t p = 0; p < model.involved.size(); ++p) {
      const std::size_t v = model.involved[p];
      if (covered[v]) {
        given_pos.push_back(static_cast<Eigen::Index>(p));
        step.given.push_back(v);
      } else if (p < model.sampled_count()) {
        target_pos.push_back(static_cast<Eigen::Index>(p));
        step.target.push_back(v);
      }
    }
    if (step.target.empty()) continue;
    step.sampler = make_conditional_sampler(model.cov, model.multiplier, std::move(target_pos), std::move(given_pos));
    if (step.sampler.fallback && fallbacks) ++*fallbacks;
    for (std::size_t v : step.target) covered[v] = 1;
    plan.push_back(std::move(step));
  }
  return plan;
}

// Draws every step of `plan` into `x` in order, each conditioned on the
// current (possibly just resampled) values. Returns the changed variables.
inline std::vector<std::size_t> sample_along_plan(const std::vector<SamplingModel>& models,
                                                  const std::vector<RepairStep>& plan, std::vector<double>& x,
                                                  Rng& rng) {
  std::vector<std::size_t> changed;
  for (const RepairStep& step : plan) {
    const SamplingModel& model = models[step.model_index];
    Eigen::VectorXd given(static_cast<Eigen::Index>(step.given.size()));
    for (std::size_t k = 0; k < step.given.size(); ++k) given(static_cast<Eigen::Index>(k)) = x[step.given[k]];
    const Eigen::VectorXd values = draw(step.sampler, model.mean, given, rng);
    for (std::size_t k = 0; k < step.target.size(); ++k) x[step.target[k]] = values(static_cast<Eigen::Index>(k));
    changed.insert(changed.end(), step.target.begin(), step.target.end());
  }
  return changed;
}

// Resample all variables along the conditional factorization without
// intermediate acceptance, then accept once iff the solution is not worse.
inline bool repair_step(RunState& state, const std::vector<RepairStep>& plan, std::size_t solution_index) {
  Solution& solution = state.population[solution_index];
  std::vector<double> x = solution.x;
  const auto changed = sample_along_plan(state.models, plan, x, state.rng);
  if (changed.empty()) return false;
  detail::clip_to_bounds(*state.problem, x, changed);
  SubvalueCache cache = solution.cache;
  const double new_fitness = evaluate_partial(*state.problem, x, changed, cache, state.ledger);
  if (!(new_fitness <= solution.fitness())) return false;
  solution.x = std::move(x);
  solution.cache = std::move(cache);
  detail::note_accepted(state, solution);
  return true;
}

inline double population_fitness_variance(const std::vector<Solution>& population) {
  double mean = 0.0;
  for (const auto& s : population) mean += s.fitness();
  mean /= static_cast<double>(population.size());
  double variance = 0.0;
  for (const auto& s : population) variance += (s.fitness() - mean) * (s.fitness() - mean);
  return variance / static_cast<double>(population.size());
}

// One generation: select; (online) learn linkage and transfer covariances;
// update models; GOM over elements in random order; repair sweep; variance
// scaling and no-improvement bookkeeping. The mean shift is applied to a random
// subset of the freshly sampled values inside GOM.
inline void generation(RunState& state) {
  const OptimizerConfig& config = state.config;
  const ProblemInstance& problem = *state.problem;
  const std::size_t ell = problem.dimension();
  const double best_before = state.best.fitness();

  detail::make_selection(state);

  if (config.linkage.kind == LinkageKind::fitness_based) {
    update_dsm_incremental(state.dsm, problem, state.best.x, state.best.cache, config.dsm_pair_budget.value_or(ell),
                           state.ledger, state.rng, config.dependency_gamma);
    LinkageModel linkage = clique_seeding(build_vig(state.dsm, config.d_min).graph, LinkageOrigin::fitness_based_online);
    state.models = detail::seed_models(state, linkage, state.models);
    state.linkage = std::move(linkage);
  }

  const UpdateMode mode = config.variant == Variant::rv_gomea ? UpdateMode::full_reestimate : UpdateMode::incremental;
  const Eigen::VectorXd selection_mean = state.selection.colwise().mean().transpose();
  if (config.global_ams && state.previous_mean.size() > 0) {
    const double eta = config.variant == Variant::rv_gomea
                           ? 1.0
                           : config.eta_ams_override.value_or(learning_rate(
                                 config.alpha_ams, static_cast<double>(config.selection_size()), static_cast<double>(ell)));
    state.global_shift = incremental_update(state.global_shift, selection_mean - state.previous_mean, eta);
  }
  for (auto& model : state.models) {
    update_model(model, state.selection, detail::rates_for(state, model), mode, state.previous_mean);
    if (config.global_ams)
      for (std::size_t k = 0; k < model.sampled_count(); ++k)
        model.ams_shift(static_cast<Eigen::Index>(k)) = state.global_shift(static_cast<Eigen::Index>(model.element.sampled[k]));
    if (model.prepare()) ++state.fallback_events;
  }
  state.previous_mean = selection_mean;

  const double elite_fitness = state.population[detail::best_index(state.population)].fitness();
  const std::size_t shifted = ams_count(state.population.size(), config.tau);

  std::vector<ImprovementStats> stats(state.models.size());
  const auto element_order = state.rng.permutation(state.models.size());
  for (std::size_t m : element_order) {
    const std::size_t n0 = state.models[m].sampled_count();
    Eigen::VectorXd improvement_sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n0));
    std::size_t improvements = 0;
    auto order = state.rng.permutation(state.population.size());
    for (std::size_t p = 0; p < order.size(); ++p) {
      const GomOutcome outcome = gom_step(state, m, order[p], p < shifted, elite_fitness);
      if (outcome.improved) {
        ++improvements;
        const auto& x = state.population[order[p]].x;
        for (std::size_t k = 0; k < n0; ++k)
          improvement_sum(static_cast<Eigen::Index>(k)) += x[state.models[m].element.sampled[k]];
      }
      if (state.vtr_hit) return;
    }
    if (improvements > 0) {
      stats[m].improved = true;
      stats[m].sdr = standard_deviation_ratio(state.models[m], improvement_sum / static_cast<double>(improvements));
    }
  }

  if (config.repair && state.linkage.conditional()) {
    const auto plan = make_repair_plan(state.models, ell, &state.fallback_events);
    for (std::size_t i = 0; i < state.population.size(); ++i) {
      repair_step(state, plan, i);
      if (state.vtr_hit) return;
    }
  }

  if (state.best.fitness() < best_before) state.nis = 0;
  else ++state.nis;
  for (std::size_t m = 0; m < state.models.size(); ++m)
    update_multiplier(state.models[m], stats[m], state.nis, state.nis_max, state.multiplier_decrease);

  ++state.generation;
  if (state.telemetry) {
    GenerationTelemetry t;
    t.generation = state.generation;
    t.best_fitness = state.best.fitness();
    t.spent = state.ledger.spent;
    t.multiplier_min = std::numeric_limits<double>::infinity();
    t.multiplier_max = -std::numeric_limits<double>::infinity();
    for (const auto& model : state.models) {
      t.multiplier_min = std::min(t.multiplier_min, model.multiplier);
      t.multiplier_max = std::max(t.multiplier_max, model.multiplier);
    }
    t.fallback_events = state.fallback_events;
    state.telemetry(t);
  }
}

// Loops generations until the VTR is reached, the budget runs out, the
// population fitness variance collapses to zero, or max_generations passes.
inline RunResult run(const OptimizerConfig& config, const ProblemInstance& problem,
                     std::function<void(const GenerationTelemetry&)> telemetry = {}) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  RunResult result;
  if (config.budget < static_cast<double>(config.population_size)) {
    result.termination = "budget";
    result.wall_time = std::chrono::steady_clock::now() - started;
    return result;
  }
  RunState state = initialize(config, problem);
  state.telemetry = std::move(telemetry);
  while (true) {
    if (state.vtr_hit) {
      result.termination = "vtr";
      break;
    }
    if (state.budget_exhausted) {
      result.termination = "budget";
      break;
    }
    if (population_fitness_variance(state.population) <= 0.0) {
      result.termination = "fitness-variance";
      break;
    }
    if (config.max_generations > 0 && state.generation >= config.max_generations) {
      result.termination = "generations";
      break;
    }
    try {
      generation(state);
    } catch (const BudgetExhausted&) {
      state.budget_exhausted = true;
    }
  }
  result.success = state.vtr_hit;
  result.evaluations_spent = state.ledger.spent;
  result.generations = state.generation;
  result.best_fitness = state.best.fitness();
  result.best_x = state.best.x;
  result.fallback_events = state.fallback_events;
  result.final_linkage = std::move(state.linkage);
  result.dsm = std::move(state.dsm);
  result.wall_time = std::chrono::steady_clock::now() - started;
  return result;
}

}  // namespace gomea
