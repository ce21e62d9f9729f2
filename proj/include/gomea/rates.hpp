#pragma once

// Meta-tuning of the learning rates: per (problem, kappa, |P|) optimization of
// (eta_cov, eta_ams), filtering of the collected samples, and regression of
// the learning-rate function class through a sum-of-squares loss.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "gomea/distribution.hpp"
#include "gomea/optimizer.hpp"
#include "gomea/parallel.hpp"
#include "gomea/problems.hpp"
#include "gomea/random.hpp"

namespace gomea {

struct RateSample {
  std::string problem;
  std::size_t kappa = 0;
  std::size_t population_size = 0;
  std::size_t selection_size = 0;
  double eta_cov = 0.0;
  double eta_ams = 0.0;
  double cost = 0.0;
  bool discarded = false;

  friend bool operator==(const RateSample&, const RateSample&) = default;
};

enum class RateTarget { cov, ams };

struct AlphaFit {
  Alphas alphas;
  double loss = 0.0;
  std::size_t sample_count = 0;
  bool degenerate = false;  // every sample shares one (|S|, kappa)
};

// Result of a bounded minimization by the library's own optimizer.
struct BoxMinimum {
  std::vector<double> x;
  double value = std::numeric_limits<double>::infinity();
  std::size_t probes = 0;
};

struct BoxSearchConfig {
  std::size_t restarts = 5;
  double evaluations_per_restart = 20000;
  std::uint64_t seed = 0;
};

// Minimizes `objective` over the box with iRV-GOMEA (one full linkage set,
// guideline population), restarted `restarts` times. The best point ever
// probed is returned, so the result never exceeds any evaluated value.
inline BoxMinimum minimize_box(const std::function<double(std::span<const double>)>& objective,
                               const std::vector<double>& lower, const std::vector<double>& upper,
                               const BoxSearchConfig& config) {
  BoxMinimum best;
  auto tracked = [&](std::span<const double> x) {
    const double value = objective(x);
    ++best.probes;
    if (value < best.value || best.x.empty()) {
      best.value = value;
      best.x.assign(x.begin(), x.end());
    }
    return value;
  };
  const ProblemInstance problem = make_custom_problem("box", lower.size(), tracked, lower, upper);
  OptimizerConfig optimizer;
  optimizer.variant = Variant::irv_gomea;
  optimizer.linkage = {LinkageKind::full, 0};
  optimizer.population_size = population_guideline(Variant::irv_gomea, lower.size());
  optimizer.budget = config.evaluations_per_restart;
  for (std::size_t r = 0; r < config.restarts; ++r) {
    optimizer.seed = splitmix64(config.seed + r);
    run(optimizer, problem);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Learning-rate tuning

struct TuneConfig {
  std::size_t replicates = 10;
  std::size_t reference_replicates = 10;
  double reference_cap = 1e7;  // budget of each reference RV-GOMEA run
  BoxSearchConfig outer{5, 40, 0};
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  InitRange init_range{-10.0, 5.0};
};

inline ProblemInstance tuning_problem(const std::string& name, std::size_t kappa, const InitRange& range) {
  ProblemParams params;
  params.init_range = range;
  return make_problem(name, kappa, params);
}

// Twice the mean evaluations RV-GOMEA (full linkage, guideline population)
// needs on the problem at ell = kappa; 0 when no reference run succeeds.
// Cached per (problem, kappa).
class ReferenceBudgets {
 public:
  double get(const std::string& name, std::size_t kappa, const TuneConfig& config) {
    const auto key = std::make_pair(name, kappa);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    const ProblemInstance problem = tuning_problem(name, kappa, config.init_range);
    OptimizerConfig rv;
    rv.variant = Variant::rv_gomea;
    rv.linkage = {LinkageKind::full, 0};
    rv.population_size = population_guideline(Variant::rv_gomea, kappa);
    rv.budget = config.reference_cap;
    const auto results = parallel_map(config.reference_replicates, config.workers, [&](std::size_t r) {
      OptimizerConfig c = rv;
      c.seed = splitmix64(config.seed + r);
      return run(c, problem);
    });
    double sum = 0.0;
    std::size_t successes = 0;
    for (const auto& result : results) {
      if (!result.success) continue;
      sum += result.evaluations_spent;
      ++successes;
    }
    const double budget = successes == 0 ? 0.0 : 2.0 * sum / static_cast<double>(successes);
    cache_[key] = budget;
    return budget;
  }

  void set(const std::string& name, std::size_t kappa, double budget) { cache_[{name, kappa}] = budget; }

 private:
  std::map<std::pair<std::string, std::size_t>, double> cache_;
};

struct InnerCost {
  double mean_cost = 0.0;  // failed replicates charged at the budget
  bool all_succeeded = false;
};

// Mean evaluations-to-VTR of iRV-GOMEA with fixed learning rates.
inline InnerCost inner_cost(const ProblemInstance& problem, std::size_t population_size, double eta_cov,
                            double eta_ams, double budget, const TuneConfig& config) {
  InnerCost cost;
  if (budget < static_cast<double>(population_size) || config.replicates == 0) {
    cost.mean_cost = budget;
    return cost;
  }
  OptimizerConfig irv;
  irv.variant = Variant::irv_gomea;
  irv.linkage = {LinkageKind::full, 0};
  irv.population_size = population_size;
  irv.budget = budget;
  irv.eta_cov_override = std::clamp(eta_cov, 0.0, 1.0);
  irv.eta_ams_override = std::clamp(eta_ams, 0.0, 1.0);
  const auto results = parallel_map(config.replicates, config.workers, [&](std::size_t r) {
    OptimizerConfig c = irv;
    c.seed = splitmix64(config.seed + r);
    return run(c, problem);
  });
  double sum = 0.0;
  cost.all_succeeded = true;
  for (const auto& result : results) {
    sum += result.success ? result.evaluations_spent : budget;
    cost.all_succeeded = cost.all_succeeded && result.success;
  }
  cost.mean_cost = sum / static_cast<double>(results.size());
  return cost;
}

// Optimizes (eta_cov, eta_ams) in [0,1]^2 for one (problem, kappa, |P|) cell.
// The best pair among those whose replicates all reached the VTR is returned;
// the sample is discarded when there is none. `budget` overrides the
// reference budget when given.
inline RateSample tune_rates(const std::string& name, std::size_t kappa, std::size_t population_size,
                             const TuneConfig& config, ReferenceBudgets& references,
                             std::optional<double> budget = std::nullopt) {
  RateSample sample;
  sample.problem = name;
  sample.kappa = kappa;
  sample.population_size = population_size;
  sample.selection_size = static_cast<std::size_t>(std::floor(0.35 * static_cast<double>(population_size) + 1e-9));
  const double inner_budget = budget.value_or(references.get(name, kappa, config));
  const ProblemInstance problem = tuning_problem(name, kappa, config.init_range);
  if (inner_budget < static_cast<double>(population_size) || sample.selection_size < 1) {
    sample.discarded = true;
    return sample;
  }

  double best_cost = std::numeric_limits<double>::infinity();
  auto objective = [&](std::span<const double> eta) {
    const InnerCost cost = inner_cost(problem, population_size, eta[0], eta[1], inner_budget, config);
    if (cost.all_succeeded && cost.mean_cost < best_cost) {
      best_cost = cost.mean_cost;
      sample.eta_cov = std::clamp(eta[0], 0.0, 1.0);
      sample.eta_ams = std::clamp(eta[1], 0.0, 1.0);
    }
    return cost.mean_cost;
  };
  BoxSearchConfig outer = config.outer;
  outer.seed = splitmix64(config.seed ^ 0x5bd1e995ULL);
  minimize_box(objective, {0.0, 0.0}, {1.0, 1.0}, outer);
  if (!std::isfinite(best_cost)) {
    sample.discarded = true;
    sample.eta_cov = sample.eta_ams = 0.0;
    return sample;
  }
  sample.cost = best_cost;
  return sample;
}

inline constexpr const char* kRotatedEllipsoid = "rotated-ellipsoid";

// Drops every sample of a (kappa, |P|) cell whose rotated-ellipsoid sample is
// discarded or missing.
inline std::vector<RateSample> filter_samples(const std::vector<RateSample>& samples) {
  std::map<std::pair<std::size_t, std::size_t>, bool> solved;
  for (const auto& s : samples)
    if (s.problem == kRotatedEllipsoid && !s.discarded) solved[{s.kappa, s.population_size}] = true;
  std::vector<RateSample> kept;
  for (const auto& s : samples)
    if (solved.count({s.kappa, s.population_size})) kept.push_back(s);
  return kept;
}

inline double target_eta(const RateSample& s, RateTarget target) {
  return target == RateTarget::cov ? s.eta_cov : s.eta_ams;
}

inline double fit_loss(const Alphas& alphas, const std::vector<RateSample>& samples, RateTarget target) {
  double loss = 0.0;
  for (const auto& s : samples) {
    const double r = target_eta(s, target) -
                     learning_rate(alphas, static_cast<double>(s.selection_size), static_cast<double>(s.kappa));
    loss += r * r;
  }
  return loss;
}

// Regresses the learning-rate function onto the non-discarded samples over
// alpha in [-10,10] x [0,5] x [0,5].
inline AlphaFit fit_alphas(const std::vector<RateSample>& samples, RateTarget target,
                           const BoxSearchConfig& search = {}) {
  std::vector<RateSample> usable;
  for (const auto& s : samples)
    if (!s.discarded) usable.push_back(s);
  if (usable.size() < 3) throw std::invalid_argument("fitting needs at least 3 usable samples");

  auto objective = [&](std::span<const double> a) { return fit_loss({a[0], a[1], a[2]}, usable, target); };
  const BoxMinimum best = minimize_box(objective, {-10.0, 0.0, 0.0}, {10.0, 5.0, 5.0}, search);

  AlphaFit fit;
  fit.alphas = {best.x[0], best.x[1], best.x[2]};
  fit.loss = fit_loss(fit.alphas, usable, target);
  fit.sample_count = usable.size();
  fit.degenerate = std::all_of(usable.begin(), usable.end(), [&](const RateSample& s) {
    return s.selection_size == usable.front().selection_size && s.kappa == usable.front().kappa;
  });
  return fit;
}

inline double eval_fit(const AlphaFit& fit, std::size_t selection_size, std::size_t kappa) {
  return learning_rate(fit.alphas, static_cast<double>(selection_size), static_cast<double>(kappa));
}

// ---------------------------------------------------------------------------
// Persistence

inline std::string format_real(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

inline constexpr const char* kRateSamplesHeader = "problem,kappa,pop,selection,eta_cov,eta_ams,cost,discarded";

inline void write_samples_csv(std::ostream& out, const std::vector<RateSample>& samples) {
  out << kRateSamplesHeader << '\n';
  for (const auto& s : samples) {
    out << s.problem << ',' << s.kappa << ',' << s.population_size << ',' << s.selection_size << ',';
    if (s.discarded) {
      out << ",,,1\n";
    } else {
      out << format_real(s.eta_cov) << ',' << format_real(s.eta_ams) << ',' << format_real(s.cost) << ",0\n";
    }
  }
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

inline std::vector<RateSample> read_samples_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kRateSamplesHeader) throw std::runtime_error("unexpected rate samples header");
  std::vector<RateSample> samples;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 8) throw std::runtime_error("malformed rate sample line: " + line);
    RateSample s;
    s.problem = f[0];
    s.kappa = std::stoul(f[1]);
    s.population_size = std::stoul(f[2]);
    s.selection_size = std::stoul(f[3]);
    s.discarded = f[7] == "1";
    if (!s.discarded) {
      s.eta_cov = std::stod(f[4]);
      s.eta_ams = std::stod(f[5]);
      s.cost = std::stod(f[6]);
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

inline void write_alpha_fit(std::ostream& out, const AlphaFit& fit) {
  out << "alpha0 " << format_real(fit.alphas.a0) << '\n'
      << "alpha1 " << format_real(fit.alphas.a1) << '\n'
      << "alpha2 " << format_real(fit.alphas.a2) << '\n'
      << "loss " << format_real(fit.loss) << '\n'
      << "samples " << fit.sample_count << '\n'
      << "degenerate " << (fit.degenerate ? 1 : 0) << '\n';
}

inline AlphaFit read_alpha_fit(std::istream& in) {
  AlphaFit fit;
  std::string key;
  std::size_t seen = 0;
  while (in >> key) {
    if (key == "alpha0") in >> fit.alphas.a0;
    else if (key == "alpha1") in >> fit.alphas.a1;
    else if (key == "alpha2") in >> fit.alphas.a2;
    else if (key == "loss") in >> fit.loss;
    else if (key == "samples") in >> fit.sample_count;
    else if (key == "degenerate") in >> fit.degenerate;
    else throw std::runtime_error("unknown alpha fit key: " + key);
    ++seen;
  }
  if (seen < 4) throw std::runtime_error("incomplete alpha fit");
  return fit;
}

}  // namespace gomea
