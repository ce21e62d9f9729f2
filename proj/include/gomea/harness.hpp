#pragma once

// Experiment orchestration: replicate sweeps with deterministic seeds,
// aggregation into corrected costs, population bisection, variant
// comparisons, and the CSV / JSON-lines writers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "gomea/optimizer.hpp"
#include "gomea/parallel.hpp"
#include "gomea/problems.hpp"
#include "gomea/random.hpp"
#include "gomea/rates.hpp"

namespace gomea {

// Replicate i of a sweep with base seed b runs with splitmix64(b + i).
inline std::vector<std::uint64_t> expand_seeds(std::uint64_t base, std::size_t count) {
  std::vector<std::uint64_t> seeds(count);
  for (std::size_t i = 0; i < count; ++i) seeds[i] = splitmix64(base + i);
  return seeds;
}

enum class PopulationPolicy { fixed, guideline, bisect };

struct ExperimentSpec {
  std::string problem;
  ProblemParams params;
  std::vector<std::size_t> ells;
  std::vector<Variant> variants{Variant::irv_gomea};
  std::string linkage = "univariate";
  PopulationPolicy policy = PopulationPolicy::guideline;
  std::size_t population_size = 0;  // fixed policy; start for bisect (0: 4x guideline)
  std::size_t replicates = 1;
  std::vector<std::uint64_t> seeds;  // explicit, or empty to expand base_seed
  std::uint64_t base_seed = 0;
  double budget = 1e8;
  std::optional<double> vtr;
  double tau = 0.35;
  std::size_t workers = 1;
  bool telemetry = false;

  std::vector<std::uint64_t> replicate_seeds() const {
    if (!seeds.empty()) return seeds;
    return expand_seeds(base_seed, replicates);
  }

  void validate() const {
    if (replicates < 1) throw std::invalid_argument("replicates must be >= 1");
    if (!seeds.empty() && seeds.size() != replicates)
      throw std::invalid_argument("explicit seed list must have one seed per replicate");
    if (ells.empty()) throw std::invalid_argument("no dimension given");
    if (variants.empty()) throw std::invalid_argument("no variant given");
    if (policy == PopulationPolicy::fixed && population_size < 2)
      throw std::invalid_argument("fixed population must be >= 2");
    parse_linkage(linkage);
  }
};

struct RunRecord {
  std::string problem;
  std::size_t ell = 0;
  std::string variant;
  std::string linkage;
  std::size_t population_size = 0;
  std::size_t replicate = 0;
  std::uint64_t seed = 0;
  std::size_t generations = 0;
  double spent = 0.0;
  bool success = false;
  std::size_t fallback_events = 0;
  double best_fitness = 0.0;
  std::vector<GenerationTelemetry> telemetry;
};

struct AggregateResult {
  std::string problem;
  std::size_t ell = 0;
  std::string variant;
  std::string linkage;
  std::size_t population_size = 0;
  std::size_t replicates = 0;
  double success_rate = 0.0;
  double mean_cost = std::numeric_limits<double>::quiet_NaN();    // over successful runs
  double median_cost = std::numeric_limits<double>::quiet_NaN();  // over successful runs
  double corrected_cost = std::numeric_limits<double>::quiet_NaN();
  bool failed = true;  // no run reached the VTR

  auto key() const { return std::tie(problem, ell, variant, linkage, population_size); }
};

inline double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

// Aggregates runs of one cell; corrected cost = mean successful cost divided
// by the success rate.
inline AggregateResult aggregate(const std::vector<RunRecord>& runs) {
  if (runs.empty()) throw std::invalid_argument("no runs to aggregate");
  AggregateResult a;
  a.problem = runs.front().problem;
  a.ell = runs.front().ell;
  a.variant = runs.front().variant;
  a.linkage = runs.front().linkage;
  a.population_size = runs.front().population_size;
  a.replicates = runs.size();
  std::vector<double> costs;
  for (const auto& r : runs)
    if (r.success) costs.push_back(r.spent);
  a.success_rate = static_cast<double>(costs.size()) / static_cast<double>(runs.size());
  if (costs.empty()) return a;
  double sum = 0.0;
  for (double c : costs) sum += c;
  a.mean_cost = sum / static_cast<double>(costs.size());
  a.median_cost = median(costs);
  a.corrected_cost = a.mean_cost / a.success_rate;
  a.failed = false;
  return a;
}

struct Cell {
  std::string problem;
  ProblemParams params;
  std::size_t ell = 0;
  Variant variant = Variant::irv_gomea;
  LinkageSpec linkage;
  std::size_t population_size = 0;
  double budget = 0.0;
  std::optional<double> vtr;
  double tau = 0.35;
  bool telemetry = false;
};

inline std::vector<RunRecord> run_cell(const Cell& cell, const std::vector<std::uint64_t>& seeds,
                                       std::size_t workers) {
  const ProblemInstance problem = make_problem(cell.problem, cell.ell, cell.params);
  OptimizerConfig config;
  config.population_size = cell.population_size;
  config.tau = cell.tau;
  config.variant = cell.variant;
  config.linkage = cell.linkage;
  config.budget = cell.budget;
  config.vtr = cell.vtr;
  return parallel_map(seeds.size(), workers, [&](std::size_t i) {
    OptimizerConfig c = config;
    c.seed = seeds[i];
    RunRecord record;
    std::function<void(const GenerationTelemetry&)> sink;
    if (cell.telemetry) sink = [&record](const GenerationTelemetry& t) { record.telemetry.push_back(t); };
    const RunResult result = run(c, problem, sink);
    record.problem = cell.problem;
    record.ell = cell.ell;
    record.variant = to_string(cell.variant);
    record.linkage = to_string(cell.linkage);
    record.population_size = cell.population_size;
    record.replicate = i;
    record.seed = seeds[i];
    record.generations = result.generations;
    record.spent = result.evaluations_spent;
    record.success = result.success;
    record.fallback_events = result.fallback_events;
    record.best_fitness = result.best_fitness;
    return record;
  });
}

// ---------------------------------------------------------------------------
// Bisection

struct BisectResult {
  std::size_t population_size = 0;
  double corrected_cost = std::numeric_limits<double>::infinity();
  bool failed = true;
  std::map<std::size_t, double> probes;  // population -> corrected cost (inf when failed)
};

inline constexpr std::size_t kBisectFloor = 4;

// Halves the population from `start` while the corrected cost strictly
// improves (down to the floor), then runs a discrete slope search between the
// last two halving probes. Ties favor the smaller population. `cost` returns
// nullopt (or +inf) for a population where every run failed.
inline BisectResult bisect_population(const std::function<std::optional<double>(std::size_t)>& cost,
                                      std::size_t start) {
  if (start < kBisectFloor) throw std::invalid_argument("bisection start must be >= 4");
  BisectResult result;
  auto probe = [&](std::size_t n) {
    if (auto it = result.probes.find(n); it != result.probes.end()) return it->second;
    const auto c = cost(n);
    const double value = c && std::isfinite(*c) ? *c : std::numeric_limits<double>::infinity();
    result.probes[n] = value;
    return value;
  };

  if (!std::isfinite(probe(start))) return result;

  std::size_t best = start;
  std::size_t worse = 0;  // last halving probe that did not improve
  while (best > kBisectFloor) {
    const std::size_t next = std::max(best / 2, kBisectFloor);
    if (probe(next) < probe(best)) {
      best = next;
    } else {
      worse = next;
      break;
    }
  }

  if (worse != 0) {
    std::size_t lo = worse;
    std::size_t hi = best;
    while (lo < hi) {
      const std::size_t mid = lo + (hi - lo) / 2;
      const double here = probe(mid);
      const double right = probe(mid + 1);
      // Failures sit at the small end, so an all-failed pair moves upwards.
      if (here <= right && std::isfinite(here)) hi = mid;
      else lo = mid + 1;
    }
  }

  for (const auto& [n, c] : result.probes) {
    if (c < result.corrected_cost) {
      result.corrected_cost = c;
      result.population_size = n;
    }
  }
  result.failed = !std::isfinite(result.corrected_cost);
  return result;
}

// Bisection where each probe runs `seeds.size()` replicates of the cell.
inline BisectResult bisect_population(Cell cell, std::size_t start, const std::vector<std::uint64_t>& seeds,
                                      std::size_t workers) {
  return bisect_population(
      [&](std::size_t n) -> std::optional<double> {
        cell.population_size = n;
        const AggregateResult a = aggregate(run_cell(cell, seeds, workers));
        if (a.failed) return std::nullopt;
        return a.corrected_cost;
      },
      start);
}

// ---------------------------------------------------------------------------
// Experiments

struct ExperimentOutput {
  std::vector<AggregateResult> aggregates;  // sorted by cell key
  std::vector<RunRecord> runs;              // in aggregate order, then replicate order
};

inline std::size_t resolve_population(const ExperimentSpec& spec, const Cell& cell, const ProblemInstance& problem,
                                      const std::vector<std::uint64_t>& seeds) {
  const std::size_t guideline = population_guideline(cell.variant, guideline_kappa(cell.linkage, problem));
  switch (spec.policy) {
    case PopulationPolicy::fixed: return spec.population_size;
    case PopulationPolicy::guideline: return guideline;
    case PopulationPolicy::bisect: {
      const std::size_t start = spec.population_size > 0 ? spec.population_size : 4 * guideline;
      const BisectResult b = bisect_population(cell, std::max(start, kBisectFloor), seeds, spec.workers);
      return b.failed ? std::max(start, kBisectFloor) : b.population_size;
    }
  }
  return guideline;
}

inline ExperimentOutput run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const auto seeds = spec.replicate_seeds();
  ExperimentOutput output;
  std::vector<std::vector<RunRecord>> cells;
  for (std::size_t ell : spec.ells) {
    const ProblemInstance problem = make_problem(spec.problem, ell, spec.params);
    for (Variant variant : spec.variants) {
      Cell cell;
      cell.problem = spec.problem;
      cell.params = spec.params;
      cell.ell = ell;
      cell.variant = variant;
      cell.linkage = parse_linkage(spec.linkage);
      cell.budget = spec.budget;
      cell.vtr = spec.vtr;
      cell.tau = spec.tau;
      cell.telemetry = spec.telemetry;
      cell.population_size = resolve_population(spec, cell, problem, seeds);
      cells.push_back(run_cell(cell, seeds, spec.workers));
    }
  }
  std::vector<std::size_t> order(cells.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<AggregateResult> aggregates;
  for (const auto& runs : cells) aggregates.push_back(aggregate(runs));
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return aggregates[a].key() < aggregates[b].key(); });
  for (std::size_t i : order) {
    output.aggregates.push_back(aggregates[i]);
    output.runs.insert(output.runs.end(), cells[i].begin(), cells[i].end());
  }
  return output;
}

// ---------------------------------------------------------------------------
// Comparison

struct ComparisonRow {
  std::string problem;
  std::size_t ell = 0;
  std::string linkage;
  std::optional<AggregateResult> a;
  std::optional<AggregateResult> b;
  double ratio = std::numeric_limits<double>::quiet_NaN();
  std::string note;
};

// corrected_cost(a) / corrected_cost(b) per (problem, ell, linkage) cell.
inline std::vector<ComparisonRow> compare_ratio(const std::vector<AggregateResult>& a,
                                                const std::vector<AggregateResult>& b) {
  using Key = std::tuple<std::string, std::size_t, std::string>;
  std::map<Key, ComparisonRow> rows;
  for (const auto& r : a) {
    auto& row = rows[{r.problem, r.ell, r.linkage}];
    row.a = r;
  }
  for (const auto& r : b) {
    auto& row = rows[{r.problem, r.ell, r.linkage}];
    row.b = r;
  }
  std::vector<ComparisonRow> out;
  for (auto& [key, row] : rows) {
    std::tie(row.problem, row.ell, row.linkage) = key;
    if (!row.a) row.note = "missing in a";
    else if (!row.b) row.note = "missing in b";
    else if (row.a->failed && row.b->failed) row.note = "both failed";
    else if (row.a->failed) row.note = "a failed";
    else if (row.b->failed) row.note = "b failed";
    else row.ratio = row.a->corrected_cost / row.b->corrected_cost;
    out.push_back(row);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Writers and readers

inline constexpr const char* kResultsHeader =
    "problem,ell,variant,linkage,pop,replicates,success_rate,mean_cost,median_cost,corrected_cost";

inline std::string format_optional(double value) { return std::isfinite(value) ? format_real(value) : ""; }

inline void write_results_csv(std::ostream& out, const std::vector<AggregateResult>& rows) {
  out << kResultsHeader << '\n';
  for (const auto& r : rows) {
    out << r.problem << ',' << r.ell << ',' << r.variant << ',' << r.linkage << ',' << r.population_size << ','
        << r.replicates << ',' << format_real(r.success_rate) << ',' << format_optional(r.mean_cost) << ','
        << format_optional(r.median_cost) << ',' << format_optional(r.corrected_cost) << '\n';
  }
}

inline std::vector<AggregateResult> read_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kResultsHeader) throw std::runtime_error("unexpected results header");
  std::vector<AggregateResult> rows;
  auto real_or_nan = [](const std::string& s) {
    return s.empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(s);
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 10) throw std::runtime_error("malformed results line: " + line);
    AggregateResult r;
    r.problem = f[0];
    r.ell = std::stoul(f[1]);
    r.variant = f[2];
    r.linkage = f[3];
    r.population_size = std::stoul(f[4]);
    r.replicates = std::stoul(f[5]);
    r.success_rate = std::stod(f[6]);
    r.mean_cost = real_or_nan(f[7]);
    r.median_cost = real_or_nan(f[8]);
    r.corrected_cost = real_or_nan(f[9]);
    r.failed = !std::isfinite(r.corrected_cost);
    rows.push_back(std::move(r));
  }
  return rows;
}

inline constexpr const char* kComparisonHeader = "problem,ell,linkage,pop_a,pop_b,corrected_a,corrected_b,ratio,note";

inline void write_comparison_csv(std::ostream& out, const std::vector<ComparisonRow>& rows) {
  out << kComparisonHeader << '\n';
  for (const auto& r : rows) {
    out << r.problem << ',' << r.ell << ',' << r.linkage << ',' << (r.a ? std::to_string(r.a->population_size) : "")
        << ',' << (r.b ? std::to_string(r.b->population_size) : "") << ','
        << (r.a ? format_optional(r.a->corrected_cost) : "") << ','
        << (r.b ? format_optional(r.b->corrected_cost) : "") << ',' << format_optional(r.ratio) << ',' << r.note
        << '\n';
  }
}

inline nlohmann::ordered_json to_json(const RunRecord& r) {
  nlohmann::ordered_json j;
  j["problem"] = r.problem;
  j["ell"] = r.ell;
  j["variant"] = r.variant;
  j["linkage"] = r.linkage;
  j["pop"] = r.population_size;
  j["replicate"] = r.replicate;
  j["seed"] = r.seed;
  j["generations"] = r.generations;
  j["spent"] = r.spent;
  j["success"] = r.success;
  j["fallback_events"] = r.fallback_events;
  j["best_fitness"] = r.best_fitness;
  return j;
}

inline void write_runs_jsonl(std::ostream& out, const std::vector<RunRecord>& runs) {
  for (const auto& r : runs) out << to_json(r).dump() << '\n';
}

inline RunRecord run_record_from_json(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  RunRecord r;
  r.problem = j.at("problem").get<std::string>();
  r.ell = j.at("ell").get<std::size_t>();
  r.variant = j.at("variant").get<std::string>();
  r.linkage = j.at("linkage").get<std::string>();
  r.population_size = j.at("pop").get<std::size_t>();
  r.replicate = j.at("replicate").get<std::size_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.generations = j.at("generations").get<std::size_t>();
  r.spent = j.at("spent").get<double>();
  r.success = j.at("success").get<bool>();
  r.fallback_events = j.at("fallback_events").get<std::size_t>();
  const auto& best = j.at("best_fitness");
  r.best_fitness = best.is_null() ? std::numeric_limits<double>::infinity() : best.get<double>();
  return r;
}

// One line per generation of every run, tagged with the run's identity.
inline void write_telemetry_jsonl(std::ostream& out, const std::vector<RunRecord>& runs) {
  for (const auto& r : runs) {
    for (const auto& t : r.telemetry) {
      nlohmann::ordered_json j;
      j["problem"] = r.problem;
      j["ell"] = r.ell;
      j["variant"] = r.variant;
      j["pop"] = r.population_size;
      j["seed"] = r.seed;
      j["generation"] = t.generation;
      j["best_fitness"] = t.best_fitness;
      j["spent"] = t.spent;
      j["c_mult_min"] = t.multiplier_min;
      j["c_mult_max"] = t.multiplier_max;
      j["fallback_events"] = t.fallback_events;
      out << j.dump() << '\n';
    }
  }
}

}  // namespace gomea
