#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gomea/gomea.hpp"

namespace {

struct Options {
  std::string problem = "sphere";
  std::vector<std::size_t> ells{10};
  std::string variant = "irv";
  std::string linkage = "univariate";
  std::string pop = "guideline";
  std::size_t replicates = 30;
  std::uint64_t seed = 0;
  double budget = 1e8;
  std::optional<double> vtr;
  std::string out;
  std::string log;
  std::size_t workers = 1;
  std::string cost_denominator = "indices";
  std::string telemetry;
  std::size_t kappa = 5;
  double tau = 0.35;
  std::string vig;
  std::size_t start = 0;
  std::string probes;
};

void add_experiment_flags(CLI::App* app, Options& o) {
  app->add_option("--problem", o.problem, "problem name")->check(CLI::IsMember(gomea::problem_names()));
  app->add_option("--ell", o.ells, "dimension(s), comma separated")->delimiter(',');
  app->add_option("--variant", o.variant, "rv, irv or both")->check(CLI::IsMember({"rv", "irv", "both"}));
  app->add_option("--linkage", o.linkage, "univariate | blocks:K | full | true-vig | fitness-based");
  app->add_option("--pop", o.pop, "N | guideline | bisect");
  app->add_option("--replicates", o.replicates, "runs per cell")->check(CLI::PositiveNumber);
  app->add_option("--seed", o.seed, "base seed");
  app->add_option("--budget", o.budget, "evaluation budget per run");
  app->add_option("--vtr", o.vtr, "value to reach (default: the problem's)");
  app->add_option("--out", o.out, "output file (default: stdout)");
  app->add_option("--log", o.log, "per-run JSON-lines log");
  app->add_option("--workers", o.workers, "concurrent runs")->check(CLI::PositiveNumber);
  app->add_option("--cost-denominator", o.cost_denominator, "indices | subfunctions")
      ->check(CLI::IsMember({"indices", "subfunctions"}));
  app->add_option("--telemetry", o.telemetry, "per-generation JSON-lines file");
  app->add_option("--kappa", o.kappa, "block size for parameterized problems");
  app->add_option("--tau", o.tau, "selection fraction");
}

std::vector<gomea::Variant> variants_of(const std::string& v) {
  if (v == "both") return {gomea::Variant::irv_gomea, gomea::Variant::rv_gomea};
  return {gomea::parse_variant(v)};
}

gomea::ExperimentSpec make_spec(const Options& o) {
  gomea::ExperimentSpec spec;
  spec.problem = o.problem;
  spec.params.kappa = o.kappa;
  spec.params.cost_denominator = o.cost_denominator == "subfunctions" ? gomea::CostDenominator::subfunction_count
                                                                      : gomea::CostDenominator::total_indices;
  spec.ells = o.ells;
  spec.variants = variants_of(o.variant);
  spec.linkage = o.linkage;
  if (o.pop == "guideline") {
    spec.policy = gomea::PopulationPolicy::guideline;
  } else if (o.pop == "bisect") {
    spec.policy = gomea::PopulationPolicy::bisect;
    spec.population_size = o.start;
  } else {
    spec.policy = gomea::PopulationPolicy::fixed;
    spec.population_size = std::stoul(o.pop);
  }
  spec.replicates = o.replicates;
  spec.base_seed = o.seed;
  spec.budget = o.budget;
  spec.vtr = o.vtr;
  spec.tau = o.tau;
  spec.workers = o.workers;
  spec.telemetry = !o.telemetry.empty();
  return spec;
}

// Writes to `path`, or to stdout when it is empty.
template <typename Fn>
void emit(const std::string& path, Fn&& write) {
  if (path.empty()) {
    write(std::cout);
    return;
  }
  std::ofstream file(path);
  if (!file) throw std::runtime_error("cannot open " + path);
  write(file);
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return in;
}

// Edge list of the first cell: the learned VIG of its first replicate for
// fitness-based linkage, the true VIG otherwise.
void write_vig(const Options& o, const gomea::ExperimentSpec& spec, const gomea::ExperimentOutput& output) {
  const auto& first = output.aggregates.front();
  const gomea::ProblemInstance problem = gomea::make_problem(first.problem, first.ell, spec.params);
  gomea::OptimizerConfig config;
  config.population_size = first.population_size;
  config.tau = spec.tau;
  config.variant = gomea::parse_variant(first.variant);
  config.linkage = gomea::parse_linkage(first.linkage);
  config.budget = spec.budget;
  config.vtr = spec.vtr;
  config.seed = spec.replicate_seeds().front();
  const gomea::RunResult result = gomea::run(config, problem);
  emit(o.vig, [&](std::ostream& out) {
    if (result.dsm.size() > 0) {
      gomea::write_edge_list(out, gomea::build_vig(result.dsm).graph, &result.dsm);
    } else {
      gomea::write_edge_list(out, gomea::true_vig(problem));
    }
  });
}

int cmd_run(const Options& o) {
  const gomea::ExperimentSpec spec = make_spec(o);
  const gomea::ExperimentOutput output = gomea::run_experiment(spec);
  emit(o.out, [&](std::ostream& out) { gomea::write_results_csv(out, output.aggregates); });
  if (!o.log.empty()) emit(o.log, [&](std::ostream& out) { gomea::write_runs_jsonl(out, output.runs); });
  if (!o.telemetry.empty())
    emit(o.telemetry, [&](std::ostream& out) { gomea::write_telemetry_jsonl(out, output.runs); });
  if (!o.vig.empty()) write_vig(o, spec, output);
  return 0;
}

int cmd_bisect(const Options& o) {
  gomea::ExperimentSpec spec = make_spec(o);
  spec.validate();
  const auto seeds = spec.replicate_seeds();
  std::vector<gomea::AggregateResult> rows;
  std::vector<std::pair<std::string, gomea::BisectResult>> traces;
  for (std::size_t ell : spec.ells) {
    const gomea::ProblemInstance problem = gomea::make_problem(spec.problem, ell, spec.params);
    for (gomea::Variant variant : spec.variants) {
      gomea::Cell cell;
      cell.problem = spec.problem;
      cell.params = spec.params;
      cell.ell = ell;
      cell.variant = variant;
      cell.linkage = gomea::parse_linkage(spec.linkage);
      cell.budget = spec.budget;
      cell.vtr = spec.vtr;
      cell.tau = spec.tau;
      const std::size_t guideline =
          gomea::population_guideline(variant, gomea::guideline_kappa(cell.linkage, problem));
      const std::size_t start = o.start > 0 ? o.start : 4 * guideline;
      const gomea::BisectResult b = gomea::bisect_population(cell, start, seeds, spec.workers);
      if (b.failed) {
        std::fprintf(stderr, "%s ell=%zu %s: every run failed at start population %zu\n", spec.problem.c_str(), ell,
                     gomea::to_string(variant).c_str(), start);
        cell.population_size = start;
      } else {
        cell.population_size = b.population_size;
      }
      rows.push_back(gomea::aggregate(gomea::run_cell(cell, seeds, spec.workers)));
      traces.emplace_back(spec.problem + "," + std::to_string(ell) + "," + gomea::to_string(variant), b);
    }
  }
  emit(o.out, [&](std::ostream& out) { gomea::write_results_csv(out, rows); });
  if (!o.probes.empty()) {
    emit(o.probes, [&](std::ostream& out) {
      out << "problem,ell,variant,pop,corrected_cost\n";
      for (const auto& [key, b] : traces)
        for (const auto& [n, c] : b.probes) out << key << ',' << n << ',' << gomea::format_optional(c) << '\n';
    });
  }
  return 0;
}

struct TuneOptions {
  std::vector<std::string> problems{"sphere", "rotated-ellipsoid"};
  std::vector<std::size_t> kappas{5, 10, 20};
  std::vector<std::size_t> pops{20, 40, 80};
  std::size_t replicates = 10;
  std::size_t restarts = 5;
  double outer_evals = 40;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::string out;
};

int cmd_tune(const TuneOptions& o) {
  gomea::TuneConfig config;
  config.replicates = o.replicates;
  config.outer.restarts = o.restarts;
  config.outer.evaluations_per_restart = o.outer_evals;
  config.seed = o.seed;
  config.workers = o.workers;
  gomea::ReferenceBudgets references;
  std::vector<std::string> problems = o.problems;
  std::sort(problems.begin(), problems.end());
  std::vector<gomea::RateSample> samples;
  for (const auto& name : problems) {
    for (std::size_t kappa : o.kappas) {
      for (std::size_t pop : o.pops) {
        samples.push_back(gomea::tune_rates(name, kappa, pop, config, references));
        const auto& s = samples.back();
        std::fprintf(stderr, "%s kappa=%zu pop=%zu %s\n", name.c_str(), kappa, pop,
                     s.discarded ? "discarded" : ("cost " + gomea::format_real(s.cost)).c_str());
      }
    }
  }
  emit(o.out, [&](std::ostream& out) { gomea::write_samples_csv(out, samples); });
  return 0;
}

struct FitOptions {
  std::string samples;
  std::string target = "cov";
  std::string out;
  std::uint64_t seed = 0;
  std::size_t restarts = 5;
  double evaluations = 20000;
  bool no_filter = false;
};

int cmd_fit(const FitOptions& o) {
  auto in = open_input(o.samples);
  std::vector<gomea::RateSample> samples = gomea::read_samples_csv(in);
  if (!o.no_filter) samples = gomea::filter_samples(samples);
  gomea::BoxSearchConfig search{o.restarts, o.evaluations, o.seed};
  const gomea::AlphaFit fit =
      gomea::fit_alphas(samples, o.target == "ams" ? gomea::RateTarget::ams : gomea::RateTarget::cov, search);
  emit(o.out, [&](std::ostream& out) { gomea::write_alpha_fit(out, fit); });
  return 0;
}

int cmd_compare(Options o, const std::string& a_path, const std::string& b_path) {
  std::vector<gomea::AggregateResult> a;
  std::vector<gomea::AggregateResult> b;
  if (!a_path.empty() || !b_path.empty()) {
    if (a_path.empty() || b_path.empty()) throw std::runtime_error("compare needs both --a and --b");
    auto in_a = open_input(a_path);
    auto in_b = open_input(b_path);
    a = gomea::read_results_csv(in_a);
    b = gomea::read_results_csv(in_b);
  } else {
    o.variant = "irv";
    a = gomea::run_experiment(make_spec(o)).aggregates;
    o.variant = "rv";
    b = gomea::run_experiment(make_spec(o)).aggregates;
  }
  emit(o.out, [&](std::ostream& out) { gomea::write_comparison_csv(out, gomea::compare_ratio(a, b)); });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gray-box real-valued optimization with RV-GOMEA and iRV-GOMEA"};
  app.require_subcommand(1);

  Options run_options;
  auto* run = app.add_subcommand("run", "run replicate sweeps and write aggregate results");
  add_experiment_flags(run, run_options);
  run->add_option("--vig", run_options.vig, "write the first cell's VIG as an edge list");
  run->add_option("--start", run_options.start, "bisection start population (with --pop bisect)");

  Options bisect_options;
  bisect_options.pop = "bisect";
  auto* bisect = app.add_subcommand("bisect", "bisect the population size per cell");
  add_experiment_flags(bisect, bisect_options);
  bisect->add_option("--start", bisect_options.start, "start population (default: 4x guideline)");
  bisect->add_option("--probes", bisect_options.probes, "CSV of every probed population");

  TuneOptions tune_options;
  auto* tune = app.add_subcommand("tune-rates", "optimize learning rates per (problem, kappa, population)");
  tune->add_option("--problem", tune_options.problems, "problems, comma separated")->delimiter(',');
  tune->add_option("--kappa", tune_options.kappas, "linkage set sizes, comma separated")->delimiter(',');
  tune->add_option("--pop", tune_options.pops, "population sizes, comma separated")->delimiter(',');
  tune->add_option("--replicates", tune_options.replicates, "inner runs per rate pair");
  tune->add_option("--restarts", tune_options.restarts, "outer optimizer restarts");
  tune->add_option("--outer-evals", tune_options.outer_evals, "outer evaluations per restart");
  tune->add_option("--seed", tune_options.seed, "base seed");
  tune->add_option("--workers", tune_options.workers, "concurrent inner runs");
  tune->add_option("--out", tune_options.out, "samples CSV (default: stdout)");

  FitOptions fit_options;
  auto* fit = app.add_subcommand("fit-alphas", "regress learning-rate parameters from samples");
  fit->add_option("--samples", fit_options.samples, "samples CSV")->required();
  fit->add_option("--target", fit_options.target, "cov | ams")->check(CLI::IsMember({"cov", "ams"}));
  fit->add_option("--out", fit_options.out, "fit output (default: stdout)");
  fit->add_option("--seed", fit_options.seed, "base seed");
  fit->add_option("--restarts", fit_options.restarts, "optimizer restarts");
  fit->add_option("--evals", fit_options.evaluations, "evaluations per restart");
  fit->add_flag("--no-filter", fit_options.no_filter, "keep cells whose rotated-ellipsoid sample failed");

  Options compare_options;
  std::string a_path;
  std::string b_path;
  auto* compare = app.add_subcommand("compare", "corrected-cost ratios a/b per cell (default: irv vs rv)");
  add_experiment_flags(compare, compare_options);
  compare->add_option("--a", a_path, "results CSV for the numerator");
  compare->add_option("--b", b_path, "results CSV for the denominator");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(run_options);
    if (*bisect) return cmd_bisect(bisect_options);
    if (*tune) return cmd_tune(tune_options);
    if (*fit) return cmd_fit(fit_options);
    if (*compare) return cmd_compare(compare_options, a_path, b_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
