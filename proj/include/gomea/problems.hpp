#pragma once

// Benchmark objectives expressed as sums of subfunctions, with full and
// partial evaluation and fractional evaluation-cost accounting.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gomea/graph.hpp"

namespace gomea {

// Thrown when a charge would take the ledger past its budget. Callers treat it
// as a termination signal; state is left consistent.
class BudgetExhausted : public std::runtime_error {
 public:
  BudgetExhausted() : std::runtime_error("evaluation budget exhausted") {}
};

enum class CostDenominator { total_indices, subfunction_count };

struct InitRange {
  double lower = -115.0;
  double upper = -100.0;
  double width() const { return upper - lower; }
};

enum class SubfunctionKind { power_sum, rotated_ellipsoid, ridge, rosenbrock_pair, grid_block, custom };

using CustomObjective = std::function<double(std::span<const double>)>;

struct SubfunctionSpec {
  std::vector<std::size_t> index_set;
  SubfunctionKind kind = SubfunctionKind::power_sum;
  double condition_exponent = 0.0;
  double rotation_angle_deg = 0.0;

  // power_sum: sum_k weights[k] * |x_k|^powers[k].
  // rotated_ellipsoid / grid_block: weights are the per-axis ellipsoid factors.
  std::vector<double> weights;
  std::vector<double> powers;

  // ridge: linear * x_{index_set[0]} + scale * (sum_k x_k^2)^norm_exponent
  double linear = 0.0;
  double scale = 0.0;
  double norm_exponent = 1.0;

  std::shared_ptr<const CustomObjective> custom;
};

struct EvaluationLedger {
  double spent = 0.0;
  double budget = std::numeric_limits<double>::infinity();

  double remaining() const { return budget - spent; }

  void charge(double cost) {
    if (spent + cost > budget) throw BudgetExhausted();
    spent += cost;
  }
};

// Current subfunction values of one solution plus their aggregate.
struct SubvalueCache {
  std::vector<double> values;
  double fitness = 0.0;
};

// Composes Givens rotations by `angle_deg` over every index pair (i, j), i < j,
// in lexicographic order; the (0,1) rotation is applied to the input first.
inline Eigen::MatrixXd givens_rotation(std::size_t n, double angle_deg) {
  const double theta = angle_deg * std::numbers::pi / 180.0;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Eigen::MatrixXd rotation = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i + 1 < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      // Left-multiply by the Givens rotation in the (i, j) plane.
      const auto ii = static_cast<Eigen::Index>(i);
      const auto jj = static_cast<Eigen::Index>(j);
      Eigen::RowVectorXd row_i = rotation.row(ii);
      Eigen::RowVectorXd row_j = rotation.row(jj);
      rotation.row(ii) = c * row_i - s * row_j;
      rotation.row(jj) = s * row_i + c * row_j;
    }
  }
  return rotation;
}

inline std::vector<double> ellipsoid_weights(std::size_t n, double condition_exponent) {
  std::vector<double> weights(n, 1.0);
  if (n < 2) return weights;
  for (std::size_t i = 0; i < n; ++i)
    weights[i] = std::pow(10.0, condition_exponent * static_cast<double>(i) / static_cast<double>(n - 1));
  return weights;
}

class ProblemInstance {
 public:
  ProblemInstance(std::string name, std::size_t dimension, std::vector<SubfunctionSpec> subfunctions, double vtr,
                  InitRange init_range, CostDenominator denominator = CostDenominator::total_indices)
      : name_(std::move(name)),
        dimension_(dimension),
        subfunctions_(std::move(subfunctions)),
        vtr_(vtr),
        init_range_(init_range),
        denominator_kind_(denominator) {
    if (dimension_ == 0) throw std::invalid_argument("problem dimension must be positive");
    if (subfunctions_.empty()) throw std::invalid_argument("problem needs at least one subfunction");
    variable_subfunctions_.resize(dimension_);
    rotations_.resize(subfunctions_.size());
    for (std::size_t k = 0; k < subfunctions_.size(); ++k) {
      auto& sub = subfunctions_[k];
      if (sub.index_set.empty()) throw std::invalid_argument("subfunction index set is empty");
      std::vector<std::size_t> sorted = sub.index_set;
      std::sort(sorted.begin(), sorted.end());
      if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw std::invalid_argument("subfunction index set has duplicates");
      if (sorted.back() >= dimension_) throw std::invalid_argument("subfunction index out of range");
      for (std::size_t v : sub.index_set) variable_subfunctions_[v].push_back(k);
      total_indices_ += sub.index_set.size();
      max_subfunction_size_ = std::max(max_subfunction_size_, sub.index_set.size());
      if (sub.kind == SubfunctionKind::rotated_ellipsoid || sub.kind == SubfunctionKind::grid_block) {
        rotations_[k] = givens_rotation(sub.index_set.size(), sub.rotation_angle_deg);
        if (sub.weights.size() != sub.index_set.size())
          sub.weights = ellipsoid_weights(sub.index_set.size(), sub.condition_exponent);
      }
      if (sub.kind == SubfunctionKind::custom && !sub.custom)
        throw std::invalid_argument("custom subfunction without objective");
    }
    for (std::size_t v = 0; v < dimension_; ++v)
      if (variable_subfunctions_[v].empty()) throw std::invalid_argument("variable not covered by any subfunction");
    denominator_ = denominator_kind_ == CostDenominator::total_indices ? static_cast<double>(total_indices_)
                                                                       : static_cast<double>(subfunctions_.size());
  }

  const std::string& name() const { return name_; }
  std::size_t dimension() const { return dimension_; }
  const std::vector<SubfunctionSpec>& subfunctions() const { return subfunctions_; }
  std::size_t subfunction_count() const { return subfunctions_.size(); }
  double vtr() const { return vtr_; }
  const InitRange& init_range() const { return init_range_; }
  CostDenominator cost_denominator() const { return denominator_kind_; }
  std::size_t total_index_count() const { return total_indices_; }
  std::size_t max_subfunction_size() const { return max_subfunction_size_; }

  // Orthogonal matrix of a rotated subfunction; empty for unrotated kinds.
  const Eigen::MatrixXd& rotation(std::size_t k) const { return rotations_[k]; }

  const std::vector<std::size_t>& subfunctions_of(std::size_t variable) const {
    return variable_subfunctions_[variable];
  }

  double subfunction_cost(std::size_t k) const {
    return static_cast<double>(subfunctions_[k].index_set.size()) / denominator_;
  }

  // Optional per-variable box. When set, optimizers clip samples into it and
  // initialize inside it instead of init_range.
  const std::optional<std::pair<std::vector<double>, std::vector<double>>>& bounds() const { return bounds_; }
  void set_bounds(std::vector<double> lower, std::vector<double> upper) {
    if (lower.size() != dimension_ || upper.size() != dimension_)
      throw std::invalid_argument("bounds dimension mismatch");
    bounds_.emplace(std::move(lower), std::move(upper));
  }

  double evaluate_subfunction(std::size_t k, std::span<const double> x) const {
    const SubfunctionSpec& sub = subfunctions_[k];
    const auto& idx = sub.index_set;
    switch (sub.kind) {
      case SubfunctionKind::power_sum: {
        double sum = 0.0;
        for (std::size_t m = 0; m < idx.size(); ++m) {
          const double v = x[idx[m]];
          sum += sub.weights[m] * (sub.powers[m] == 2.0 ? v * v : std::pow(std::abs(v), sub.powers[m]));
        }
        return sum;
      }
      case SubfunctionKind::rotated_ellipsoid:
      case SubfunctionKind::grid_block: {
        const Eigen::MatrixXd& rot = rotations_[k];
        const std::size_t n = idx.size();
        double sum = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
          double y = 0.0;
          for (std::size_t c = 0; c < n; ++c)
            y += rot(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) * x[idx[c]];
          sum += sub.weights[r] * y * y;
        }
        return sum;
      }
      case SubfunctionKind::ridge: {
        double squares = 0.0;
        if (sub.scale != 0.0)
          for (std::size_t v : idx) squares += x[v] * x[v];
        double value = sub.linear * x[idx[0]];
        if (sub.scale != 0.0) value += sub.scale * (sub.norm_exponent == 1.0 ? squares : std::pow(squares, sub.norm_exponent));
        return value;
      }
      case SubfunctionKind::rosenbrock_pair: {
        const double a = x[idx[0]];
        if (idx.size() == 1) return (a - 1.0) * (a - 1.0);
        const double b = x[idx[1]];
        const double t = a * a - b;
        return 100.0 * t * t + (a - 1.0) * (a - 1.0);
      }
      case SubfunctionKind::custom: {
        std::vector<double> local(idx.size());
        for (std::size_t m = 0; m < idx.size(); ++m) local[m] = x[idx[m]];
        return (*sub.custom)(local);
      }
    }
    return std::numeric_limits<double>::quiet_NaN();
  }

 private:
  std::string name_;
  std::size_t dimension_;
  std::vector<SubfunctionSpec> subfunctions_;
  double vtr_;
  InitRange init_range_;
  CostDenominator denominator_kind_;
  double denominator_ = 1.0;
  std::size_t total_indices_ = 0;
  std::size_t max_subfunction_size_ = 0;
  std::vector<std::vector<std::size_t>> variable_subfunctions_;
  std::vector<Eigen::MatrixXd> rotations_;
  std::optional<std::pair<std::vector<double>, std::vector<double>>> bounds_;
};

// Sum of cached subvalues in subfunction order. Both the full and the partial
// path aggregate through here, so their results agree bit-for-bit.
inline double aggregate(const std::vector<double>& values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum;
}

inline SubvalueCache evaluate_full(const ProblemInstance& problem, std::span<const double> x,
                                   EvaluationLedger& ledger) {
  if (x.size() != problem.dimension()) throw std::invalid_argument("solution dimension mismatch");
  ledger.charge(1.0);
  SubvalueCache cache;
  cache.values.resize(problem.subfunction_count());
  for (std::size_t k = 0; k < problem.subfunction_count(); ++k) cache.values[k] = problem.evaluate_subfunction(k, x);
  cache.fitness = aggregate(cache.values);
  return cache;
}

// Subfunctions whose index set intersects `changed`, ascending.
inline std::vector<std::size_t> touched_subfunctions(const ProblemInstance& problem,
                                                     std::span<const std::size_t> changed) {
  std::vector<std::size_t> touched;
  for (std::size_t v : changed) {
    const auto& subs = problem.subfunctions_of(v);
    touched.insert(touched.end(), subs.begin(), subs.end());
  }
  std::sort(touched.begin(), touched.end());
  touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
  return touched;
}

inline double partial_cost(const ProblemInstance& problem, std::span<const std::size_t> touched) {
  double cost = 0.0;
  for (std::size_t k : touched) cost += problem.subfunction_cost(k);
  return cost;
}

// Recomputes only the subfunctions touched by `changed`. The ledger is charged
// before the cache is modified, so a BudgetExhausted leaves `cache` untouched.
inline double evaluate_partial(const ProblemInstance& problem, std::span<const double> x,
                               std::span<const std::size_t> changed, SubvalueCache& cache,
                               EvaluationLedger& ledger) {
  const auto touched = touched_subfunctions(problem, changed);
  ledger.charge(partial_cost(problem, touched));
  for (std::size_t k : touched) cache.values[k] = problem.evaluate_subfunction(k, x);
  cache.fitness = aggregate(cache.values);
  return cache.fitness;
}

// Edge (u, v) iff some subfunction contains both.
inline InteractionGraph true_vig(const ProblemInstance& problem) {
  InteractionGraph graph(problem.dimension());
  for (const auto& sub : problem.subfunctions())
    for (std::size_t a = 0; a < sub.index_set.size(); ++a)
      for (std::size_t b = a + 1; b < sub.index_set.size(); ++b) graph.add_edge(sub.index_set[a], sub.index_set[b]);
  return graph;
}

struct ProblemParams {
  std::size_t kappa = 5;                          // soreb block size
  std::optional<double> condition_exponent;       // rotated-ellipsoid override
  std::optional<double> rotation_angle_deg;       // rotated-ellipsoid override
  std::size_t overlap_offset = 0;                 // osoreb: start of the second REB term
  std::optional<InitRange> init_range;
  std::optional<double> vtr;
  CostDenominator cost_denominator = CostDenominator::total_indices;
};

namespace detail {

inline SubfunctionSpec power_term(std::size_t index, double weight, double power = 2.0) {
  SubfunctionSpec sub;
  sub.index_set = {index};
  sub.kind = SubfunctionKind::power_sum;
  sub.weights = {weight};
  sub.powers = {power};
  return sub;
}

inline SubfunctionSpec ellipsoid_block(std::vector<std::size_t> indices, double c, double theta,
                                       SubfunctionKind kind = SubfunctionKind::rotated_ellipsoid) {
  SubfunctionSpec sub;
  sub.kind = kind;
  sub.condition_exponent = c;
  sub.rotation_angle_deg = theta;
  sub.weights = ellipsoid_weights(indices.size(), c);
  sub.index_set = std::move(indices);
  return sub;
}

struct BlockParams {
  double condition;
  double angle;
};

// REB(x, c, theta, kappa, s): blocks start at 0, s_0, s_0 + s_1, ... and must
// tile [0, ell) exactly, i.e. the last block ends at ell - 1.
inline std::vector<SubfunctionSpec> reb_blocks(std::size_t ell, std::size_t offset, std::size_t kappa,
                                               const std::function<std::size_t(std::size_t)>& stride,
                                               const std::function<BlockParams(std::size_t)>& params,
                                               bool require_exact_end) {
  if (kappa == 0) throw std::invalid_argument("block size must be positive");
  if (offset + kappa > ell) throw std::invalid_argument("dimension smaller than block size");
  std::vector<SubfunctionSpec> blocks;
  std::size_t start = offset;
  for (std::size_t i = 0;; ++i) {
    std::vector<std::size_t> indices(kappa);
    for (std::size_t m = 0; m < kappa; ++m) indices[m] = start + m;
    const BlockParams p = params(i);
    blocks.push_back(ellipsoid_block(std::move(indices), p.condition, p.angle));
    const std::size_t end = start + kappa;
    const std::size_t next = start + stride(i);
    if (end == ell) break;
    if (next + kappa > ell) {
      if (require_exact_end) throw std::invalid_argument("dimension incompatible with block size and stride");
      break;
    }
    start = next;
  }
  return blocks;
}

inline BlockParams alternating(std::size_t block) {
  return block % 2 == 0 ? BlockParams{1.0, 5.0} : BlockParams{6.0, 45.0};
}

}  // namespace detail

inline const std::vector<std::string>& problem_names() {
  static const std::vector<std::string> names = {
      "sphere",           "rotated-ellipsoid", "cigar",           "tablet",           "cigar-tablet",
      "two-axes",         "different-powers",  "rosenbrock",      "parabolic-ridge",  "sharp-ridge",
      "soreb",            "reb2weak",          "reb2strong",      "reb2alternating",  "reb5nooverlap",
      "reb5smalloverlap", "reb5largeoverlap",  "reb5alternating", "reb5disjointpairs", "reb10nooverlap",
      "reb10smalloverlap", "reb10largeoverlap", "reb10alternating", "osoreb",          "rebgrid"};
  return names;
}

inline ProblemInstance make_problem(const std::string& name, std::size_t ell, const ProblemParams& params = {}) {
  using detail::power_term;
  if (ell == 0) throw std::invalid_argument("dimension must be positive");
  std::vector<SubfunctionSpec> subs;
  double vtr = 1e-10;
  const double last = ell > 1 ? static_cast<double>(ell - 1) : 1.0;

  auto reb = [&](std::size_t kappa, std::size_t stride, detail::BlockParams p) {
    // Stride 0 denotes consecutive disjoint blocks.
    const std::size_t s = stride == 0 ? kappa : stride;
    return detail::reb_blocks(
        ell, 0, kappa, [s](std::size_t) { return s; }, [p](std::size_t) { return p; }, true);
  };
  auto reb_alternating = [&](std::size_t kappa, std::size_t stride) {
    return detail::reb_blocks(
        ell, 0, kappa, [stride](std::size_t) { return stride; }, detail::alternating, true);
  };

  if (name == "sphere") {
    for (std::size_t i = 0; i < ell; ++i) subs.push_back(power_term(i, 1.0));
  } else if (name == "rotated-ellipsoid") {
    std::vector<std::size_t> all(ell);
    for (std::size_t i = 0; i < ell; ++i) all[i] = i;
    subs.push_back(detail::ellipsoid_block(std::move(all), params.condition_exponent.value_or(6.0),
                                           params.rotation_angle_deg.value_or(45.0)));
  } else if (name == "cigar") {
    for (std::size_t i = 0; i < ell; ++i) subs.push_back(power_term(i, i == 0 ? 1.0 : 1e6));
  } else if (name == "tablet") {
    for (std::size_t i = 0; i < ell; ++i) subs.push_back(power_term(i, i == 0 ? 1e6 : 1.0));
  } else if (name == "cigar-tablet") {
    for (std::size_t i = 0; i < ell; ++i) {
      double w = 1e4;
      if (i == 0) w = 1.0;
      else if (i == ell - 1) w = 1e8;
      subs.push_back(power_term(i, w));
    }
  } else if (name == "two-axes") {
    for (std::size_t i = 0; i < ell; ++i) subs.push_back(power_term(i, i < ell / 2 ? 1e6 : 1.0));
  } else if (name == "different-powers") {
    for (std::size_t i = 0; i < ell; ++i)
      subs.push_back(power_term(i, 1.0, 2.0 + 10.0 * static_cast<double>(i) / last));
  } else if (name == "rosenbrock") {
    if (ell == 1) {
      SubfunctionSpec sub;
      sub.index_set = {0};
      sub.kind = SubfunctionKind::rosenbrock_pair;
      subs.push_back(sub);
    }
    for (std::size_t i = 0; i + 1 < ell; ++i) {
      SubfunctionSpec sub;
      sub.index_set = {i, i + 1};
      sub.kind = SubfunctionKind::rosenbrock_pair;
      subs.push_back(sub);
    }
  } else if (name == "parabolic-ridge" || name == "sharp-ridge") {
    vtr = -1e10;
    SubfunctionSpec slope;
    slope.index_set = {0};
    slope.kind = SubfunctionKind::ridge;
    slope.linear = -1.0;
    subs.push_back(slope);
    if (name == "parabolic-ridge") {
      for (std::size_t i = 1; i < ell; ++i) subs.push_back(power_term(i, 100.0));
    } else if (ell > 1) {
      SubfunctionSpec norm;
      norm.kind = SubfunctionKind::ridge;
      for (std::size_t i = 1; i < ell; ++i) norm.index_set.push_back(i);
      norm.scale = 100.0;
      norm.norm_exponent = 0.5;
      subs.push_back(norm);
    }
  } else if (name == "soreb") {
    if (params.kappa == 0) throw std::invalid_argument("block size must be positive");
    if (ell % params.kappa != 0) throw std::invalid_argument("soreb dimension must be a multiple of the block size");
    subs = reb(params.kappa, params.kappa, {6.0, 45.0});
  } else if (name == "reb2weak") {
    subs = reb(2, 1, {1.0, 5.0});
  } else if (name == "reb2strong") {
    subs = reb(2, 1, {6.0, 5.0});
  } else if (name == "reb2alternating") {
    subs = reb_alternating(2, 1);
  } else if (name == "reb5nooverlap") {
    subs = reb(5, 0, {6.0, 45.0});
  } else if (name == "reb5smalloverlap") {
    subs = reb(5, 1, {6.0, 45.0});
  } else if (name == "reb5largeoverlap") {
    subs = reb(5, 4, {6.0, 45.0});
  } else if (name == "reb5alternating") {
    subs = reb_alternating(5, 4);
  } else if (name == "reb5disjointpairs") {
    subs = detail::reb_blocks(
        ell, 0, 5, [](std::size_t i) -> std::size_t { return i % 2 == 0 ? 4 : 5; },
        [](std::size_t) { return detail::BlockParams{6.0, 45.0}; }, true);
  } else if (name == "reb10nooverlap") {
    subs = reb(10, 0, {6.0, 45.0});
  } else if (name == "reb10smalloverlap") {
    subs = reb(10, 1, {6.0, 45.0});
  } else if (name == "reb10largeoverlap") {
    subs = reb(10, 4, {6.0, 45.0});
  } else if (name == "reb10alternating") {
    subs = reb_alternating(10, 4);
  } else if (name == "osoreb") {
    subs = reb(5, 4, {6.0, 45.0});
    if (params.overlap_offset + 2 <= ell) {
      auto pairs = detail::reb_blocks(
          ell, params.overlap_offset, 2, [](std::size_t) -> std::size_t { return 5; },
          [](std::size_t) { return detail::BlockParams{6.0, 45.0}; }, false);
      subs.insert(subs.end(), pairs.begin(), pairs.end());
    }
  } else if (name == "rebgrid") {
    const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(ell))));
    if (side * side != ell) throw std::invalid_argument("rebgrid dimension must be a perfect square");
    for (std::size_t v = 0; v < ell; ++v) {
      const std::size_t r = v / side;
      const std::size_t c = v % side;
      std::vector<std::size_t> block = {v};
      if (r > 0) block.push_back(v - side);
      if (r + 1 < side) block.push_back(v + side);
      if (c > 0) block.push_back(v - 1);
      if (c + 1 < side) block.push_back(v + 1);
      std::sort(block.begin(), block.end());
      subs.push_back(detail::ellipsoid_block(std::move(block), 6.0, 45.0, SubfunctionKind::grid_block));
    }
  } else {
    throw std::invalid_argument("unknown problem: " + name);
  }

  return ProblemInstance(name, ell, std::move(subs), params.vtr.value_or(vtr), params.init_range.value_or(InitRange{}),
                         params.cost_denominator);
}

// A black-box objective over `dimension` variables as a single subfunction.
// Used internally for meta-optimization (rate tuning, alpha regression).
inline ProblemInstance make_custom_problem(std::string name, std::size_t dimension, CustomObjective objective,
                                           std::vector<double> lower, std::vector<double> upper,
                                           double vtr = -std::numeric_limits<double>::infinity()) {
  SubfunctionSpec sub;
  sub.kind = SubfunctionKind::custom;
  for (std::size_t i = 0; i < dimension; ++i) sub.index_set.push_back(i);
  sub.custom = std::make_shared<const CustomObjective>(std::move(objective));
  const double lo = *std::min_element(lower.begin(), lower.end());
  const double hi = *std::max_element(upper.begin(), upper.end());
  ProblemInstance problem(std::move(name), dimension, {sub}, vtr, InitRange{lo, hi});
  problem.set_bounds(std::move(lower), std::move(upper));
  return problem;
}

}  // namespace gomea
