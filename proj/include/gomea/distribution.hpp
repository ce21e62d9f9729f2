#pragma once

// Per-linkage-set Gaussian machinery: maximum-likelihood estimation,
// incremental blending across generations, covariance transfer when the
// linkage structure changes, anticipated mean shift, distribution multipliers
// and (conditional) sampling with a univariate fallback.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "gomea/linkage.hpp"
#include "gomea/random.hpp"

namespace gomea {

struct Alphas {
  double a0 = 0.0;
  double a1 = 0.0;
  double a2 = 0.0;
};

// Regressed learning-rate parameters for covariance matrices and for the
// anticipated mean shift.
inline constexpr Alphas kCovarianceAlphas{-1.01, 1.32, 1.94};
inline constexpr Alphas kAmsAlphas{-2.95, 0.47, 0.87};

struct LearningRates {
  double eta_cov = 1.0;
  double eta_ams = 1.0;
};

// eta = 1 - exp(a0 * |S|^a1 / kappa^a2), clamped to [0, 1].
inline double learning_rate(const Alphas& alphas, double selection_size, double kappa) {
  if (selection_size < 1.0 || kappa < 1.0) throw std::invalid_argument("selection size and kappa must be >= 1");
  const double exponent = alphas.a0 * std::pow(selection_size, alphas.a1) / std::pow(kappa, alphas.a2);
  const double eta = 1.0 - std::exp(exponent);
  if (std::isnan(eta)) return 0.0;
  return std::clamp(eta, 0.0, 1.0);
}

struct GaussianEstimate {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// Sample mean and maximum-likelihood covariance (divisor |S|) of the rows of
// `selection` restricted to the columns in `involved`, in that order.
inline GaussianEstimate ml_estimate(const Eigen::MatrixXd& selection, std::span<const std::size_t> involved) {
  if (selection.rows() < 1) throw std::invalid_argument("empty selection");
  const auto n = static_cast<Eigen::Index>(involved.size());
  const auto s = selection.rows();
  Eigen::MatrixXd data(s, n);
  for (Eigen::Index c = 0; c < n; ++c) data.col(c) = selection.col(static_cast<Eigen::Index>(involved[c]));
  GaussianEstimate estimate;
  estimate.mean = data.colwise().mean().transpose();
  const Eigen::MatrixXd centered = data.rowwise() - estimate.mean.transpose();
  estimate.cov = (centered.transpose() * centered) / static_cast<double>(s);
  // Exact symmetry; the product above is symmetric up to rounding only.
  estimate.cov = 0.5 * (estimate.cov + estimate.cov.transpose()).eval();
  return estimate;
}

// (1 - eta) * previous + eta * fresh, elementwise.
template <typename Derived, typename OtherDerived>
typename Derived::PlainObject incremental_update(const Eigen::MatrixBase<Derived>& previous,
                                                 const Eigen::MatrixBase<OtherDerived>& fresh, double eta) {
  return (1.0 - eta) * previous + eta * fresh;
}

inline double incremental_update(double previous, double fresh, double eta) {
  return (1.0 - eta) * previous + eta * fresh;
}

// Lower Cholesky factor; fails on a non-positive, tiny (< 1e-300) or
// non-finite pivot.
inline bool cholesky_lower(const Eigen::MatrixXd& matrix, Eigen::MatrixXd& factor) {
  const auto n = matrix.rows();
  factor = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double pivot = matrix(j, j);
    for (Eigen::Index k = 0; k < j; ++k) pivot -= factor(j, k) * factor(j, k);
    if (!(pivot >= 1e-300) || !std::isfinite(pivot)) return false;
    const double root = std::sqrt(pivot);
    factor(j, j) = root;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double sum = matrix(i, j);
      for (Eigen::Index k = 0; k < j; ++k) sum -= factor(i, k) * factor(j, k);
      factor(i, j) = sum / root;
    }
  }
  return true;
}

// Conditional Gaussian of the `target` positions given the `given` positions
// of a joint (mean, cov), with the covariance scaled by `multiplier`.
struct ConditionalSampler {
  std::vector<Eigen::Index> target;
  std::vector<Eigen::Index> given;
  Eigen::MatrixXd regression;   // Sigma_TG Sigma_GG^{-1}
  Eigen::MatrixXd factor;       // chol(multiplier * (Sigma_TT - regression Sigma_GT))
  Eigen::VectorXd fallback_sd;  // used when `fallback`
  bool fallback = false;
};

inline ConditionalSampler make_conditional_sampler(const Eigen::MatrixXd& cov, double multiplier,
                                                   std::vector<Eigen::Index> target, std::vector<Eigen::Index> given) {
  ConditionalSampler sampler;
  const auto nt = static_cast<Eigen::Index>(target.size());
  const auto ng = static_cast<Eigen::Index>(given.size());
  Eigen::MatrixXd tt(nt, nt);
  for (Eigen::Index a = 0; a < nt; ++a)
    for (Eigen::Index b = 0; b < nt; ++b) tt(a, b) = cov(target[a], target[b]);
  Eigen::MatrixXd conditional = tt;
  sampler.regression = Eigen::MatrixXd::Zero(nt, ng);
  bool given_ok = true;
  if (ng > 0) {
    Eigen::MatrixXd gg(ng, ng);
    Eigen::MatrixXd tg(nt, ng);
    for (Eigen::Index a = 0; a < ng; ++a)
      for (Eigen::Index b = 0; b < ng; ++b) gg(a, b) = cov(given[a], given[b]);
    for (Eigen::Index a = 0; a < nt; ++a)
      for (Eigen::Index b = 0; b < ng; ++b) tg(a, b) = cov(target[a], given[b]);
    Eigen::MatrixXd gg_factor;
    given_ok = cholesky_lower(gg, gg_factor);
    if (given_ok) {
      // regression = tg * gg^{-1} via two triangular solves on the transpose.
      const Eigen::MatrixXd y = gg_factor.triangularView<Eigen::Lower>().solve(tg.transpose());
      sampler.regression = gg_factor.transpose().triangularView<Eigen::Upper>().solve(y).transpose();
      conditional = tt - sampler.regression * tg.transpose();
      conditional = 0.5 * (conditional + conditional.transpose()).eval();
    }
  }
  const bool factor_ok = given_ok && cholesky_lower(multiplier * conditional, sampler.factor);
  if (!factor_ok) {
    sampler.fallback = true;
    const Eigen::MatrixXd& source = given_ok ? conditional : tt;
    sampler.fallback_sd.resize(nt);
    for (Eigen::Index a = 0; a < nt; ++a) sampler.fallback_sd(a) = std::sqrt(std::max(0.0, multiplier * source(a, a)));
  }
  sampler.target = std::move(target);
  sampler.given = std::move(given);
  return sampler;
}

// Draw the target block. `given_values` are the current values of the given
// variables, in `sampler.given` order.
inline Eigen::VectorXd draw(const ConditionalSampler& sampler, const Eigen::VectorXd& mean,
                            const Eigen::VectorXd& given_values, Rng& rng) {
  const auto nt = static_cast<Eigen::Index>(sampler.target.size());
  Eigen::VectorXd result(nt);
  for (Eigen::Index a = 0; a < nt; ++a) result(a) = mean(sampler.target[a]);
  if (!sampler.given.empty()) {
    Eigen::VectorXd innovation(static_cast<Eigen::Index>(sampler.given.size()));
    for (Eigen::Index b = 0; b < innovation.size(); ++b) innovation(b) = given_values(b) - mean(sampler.given[b]);
    result += sampler.regression * innovation;
  }
  Eigen::VectorXd z(nt);
  for (Eigen::Index a = 0; a < nt; ++a) z(a) = rng.gaussian();
  if (sampler.fallback) {
    result += sampler.fallback_sd.cwiseProduct(z);
  } else {
    result += sampler.factor.triangularView<Eigen::Lower>() * z;
  }
  return result;
}

// Gaussian state of one linkage set. `involved` lists the sampled variables
// followed by the conditioning ones; mean and cov are over `involved`.
struct SamplingModel {
  FosElement element;
  std::vector<std::size_t> involved;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  double multiplier = 1.0;
  Eigen::VectorXd ams_shift;  // over the sampled variables only

  ConditionalSampler sampler;
  Eigen::MatrixXd marginal_factor;  // chol(multiplier * Sigma_00); empty on failure
  bool prepared = false;

  SamplingModel() = default;
  explicit SamplingModel(FosElement fos) : element(std::move(fos)), involved(element.involved()) {
    const auto n = static_cast<Eigen::Index>(involved.size());
    mean = Eigen::VectorXd::Zero(n);
    cov = Eigen::MatrixXd::Zero(n, n);
    ams_shift = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(element.sampled.size()));
  }

  std::size_t sampled_count() const { return element.sampled.size(); }

  // Refresh the factor cache for multiplier * cov. Returns true when sampling
  // had to fall back to independent per-variable normals.
  bool prepare() {
    const auto n0 = static_cast<Eigen::Index>(sampled_count());
    const auto n = static_cast<Eigen::Index>(involved.size());
    std::vector<Eigen::Index> target(static_cast<std::size_t>(n0));
    std::vector<Eigen::Index> given(static_cast<std::size_t>(n - n0));
    std::iota(target.begin(), target.end(), Eigen::Index{0});
    std::iota(given.begin(), given.end(), n0);
    sampler = make_conditional_sampler(cov, multiplier, std::move(target), std::move(given));
    if (!cholesky_lower(multiplier * cov.topLeftCorner(n0, n0), marginal_factor)) marginal_factor.resize(0, 0);
    prepared = true;
    return sampler.fallback;
  }
};

// New values for the sampled variables, conditioned on `conditioning_values`
// (current values of element.conditioned_on; empty when unconditional).
inline Eigen::VectorXd sample(const SamplingModel& model, const Eigen::VectorXd& conditioning_values, Rng& rng) {
  if (!model.prepared) throw std::logic_error("sampling model not prepared");
  return draw(model.sampler, model.mean, conditioning_values, rng);
}

struct TransferResult {
  Eigen::MatrixXd seed;
  bool exact_match = false;
  std::vector<std::size_t> sources;    // previous models copied from, in copy order
  std::vector<std::size_t> residual;   // variables seeded from the selection variance
};

// Seed covariance for a linkage set over `involved` from the previous
// generation's models. An exact variable-set match is copied whole (reordered).
// Otherwise previous models are copied greedily, largest first with random
// tie-breaking, each restricted to models lying within the variables not yet
// covered; leftover variables get their ML variance from `selection` and zero
// covariances.
inline TransferResult transfer_covariance(std::span<const SamplingModel> previous,
                                          const std::vector<std::size_t>& involved, const Eigen::MatrixXd& selection,
                                          Rng& rng) {
  const auto n = static_cast<Eigen::Index>(involved.size());
  TransferResult result;
  result.seed = Eigen::MatrixXd::Zero(n, n);

  std::vector<std::size_t> wanted = involved;
  std::sort(wanted.begin(), wanted.end());
  auto position_in = [](const std::vector<std::size_t>& list, std::size_t v) {
    return static_cast<Eigen::Index>(std::find(list.begin(), list.end(), v) - list.begin());
  };
  auto copy_from = [&](const SamplingModel& source) {
    for (std::size_t a : source.involved)
      for (std::size_t b : source.involved)
        result.seed(position_in(involved, a), position_in(involved, b)) =
            source.cov(position_in(source.involved, a), position_in(source.involved, b));
  };

  for (std::size_t m = 0; m < previous.size(); ++m) {
    std::vector<std::size_t> theirs = previous[m].involved;
    std::sort(theirs.begin(), theirs.end());
    if (theirs == wanted) {
      copy_from(previous[m]);
      result.exact_match = true;
      result.sources.push_back(m);
      return result;
    }
  }

  std::vector<char> remaining(wanted.empty() ? 0 : wanted.back() + 1, 0);
  for (std::size_t v : wanted) remaining[v] = 1;
  std::size_t remaining_count = wanted.size();
  std::vector<char> used(previous.size(), 0);
  while (remaining_count > 0) {
    std::vector<std::size_t> candidates;
    std::size_t best_size = 0;
    for (std::size_t m = 0; m < previous.size(); ++m) {
      if (used[m]) continue;
      const auto& vars = previous[m].involved;
      const bool inside = std::all_of(vars.begin(), vars.end(),
                                      [&](std::size_t v) { return v < remaining.size() && remaining[v]; });
      if (!inside) continue;
      if (vars.size() > best_size) {
        best_size = vars.size();
        candidates.clear();
      }
      if (vars.size() == best_size) candidates.push_back(m);
    }
    if (candidates.empty()) break;
    const std::size_t chosen = candidates.size() == 1 ? candidates[0] : candidates[rng.below(candidates.size())];
    copy_from(previous[chosen]);
    used[chosen] = 1;
    result.sources.push_back(chosen);
    for (std::size_t v : previous[chosen].involved) {
      remaining[v] = 0;
      --remaining_count;
    }
  }

  for (std::size_t v : involved) {
    if (v >= remaining.size() || !remaining[v]) continue;
    result.residual.push_back(v);
    const Eigen::Index col = static_cast<Eigen::Index>(v);
    const double mean = selection.col(col).mean();
    const double variance = (selection.col(col).array() - mean).square().sum() / static_cast<double>(selection.rows());
    const Eigen::Index p = position_in(involved, v);
    result.seed(p, p) = variance;
  }
  return result;
}

enum class UpdateMode { incremental, full_reestimate };

// Re-estimates `model` from the selection. `previous_mean` is the previous
// generation's selection mean over all variables (empty in the first
// generation); the fresh mean shift is zero without it.
inline void update_model(SamplingModel& model, const Eigen::MatrixXd& selection, const LearningRates& rates,
                         UpdateMode mode, const Eigen::VectorXd& previous_mean) {
  const GaussianEstimate fresh = ml_estimate(selection, model.involved);
  const auto n0 = static_cast<Eigen::Index>(model.sampled_count());
  Eigen::VectorXd shift = Eigen::VectorXd::Zero(n0);
  if (previous_mean.size() > 0)
    for (Eigen::Index a = 0; a < n0; ++a)
      shift(a) = fresh.mean(a) - previous_mean(static_cast<Eigen::Index>(model.involved[static_cast<std::size_t>(a)]));
  if (mode == UpdateMode::full_reestimate) {
    model.cov = fresh.cov;
    model.ams_shift = shift;
  } else {
    model.cov = incremental_update(model.cov, fresh.cov, rates.eta_cov);
    model.ams_shift = incremental_update(model.ams_shift, shift, rates.eta_ams);
  }
  model.mean = fresh.mean;
  model.prepared = false;
}

inline constexpr double kMultiplierIncrease = 1.0 / 0.9;
inline constexpr double kClassicMultiplierDecrease = 0.9;
inline constexpr double kAsymmetricMultiplierDecrease = 0.95;
inline constexpr double kStDevRatioThreshold = 1.0;

struct ImprovementStats {
  bool improved = false;
  double sdr = 0.0;  // standard-deviation ratio of the average improvement
};

// Largest absolute coordinate of the average improvement relative to the
// model mean, expressed in the principal axes of multiplier * Sigma_00.
inline double standard_deviation_ratio(const SamplingModel& model, const Eigen::VectorXd& average_improvement) {
  const auto n0 = static_cast<Eigen::Index>(model.sampled_count());
  const Eigen::VectorXd offset = average_improvement - model.mean.head(n0);
  if (model.marginal_factor.size() > 0) {
    const Eigen::VectorXd z = model.marginal_factor.triangularView<Eigen::Lower>().solve(offset);
    return z.cwiseAbs().maxCoeff();
  }
  double ratio = 0.0;
  for (Eigen::Index a = 0; a < n0; ++a) {
    const double sd = std::sqrt(std::max(0.0, model.multiplier * model.cov(a, a)));
    if (sd > 0.0) ratio = std::max(ratio, std::abs(offset(a)) / sd);
  }
  return ratio;
}

// Adaptive variance scaling. The multiplier is floored at 1 while the run's
// no-improvement stretch is below `nis_max`.
inline void update_multiplier(SamplingModel& model, const ImprovementStats& stats, std::size_t nis,
                              std::size_t nis_max, double decrease) {
  double& c = model.multiplier;
  if (stats.improved) {
    if (c < 1.0) c = 1.0;
    if (stats.sdr > kStDevRatioThreshold) c *= kMultiplierIncrease;
  } else {
    if (c > 1.0 || nis >= nis_max) c *= decrease;
    if (nis < nis_max && c < 1.0) c = 1.0;
  }
  model.prepared = false;
}

// Shifts freshly sampled values of the sampled variables along the model's
// anticipated mean shift.
inline Eigen::VectorXd apply_ams(const Eigen::VectorXd& values, const SamplingModel& model, double delta_ams) {
  return values + delta_ams * model.multiplier * model.ams_shift;
}

// Number of solutions per linkage set that receive the mean shift:
// floor(alpha_ams * (|P| - 1)) with alpha_ams = 0.5 * tau * |P| / (|P| - 1).
inline std::size_t ams_count(std::size_t population_size, double tau) {
  if (population_size < 2) return 0;
  return static_cast<std::size_t>(std::floor(0.5 * tau * static_cast<double>(population_size) + 1e-9));
}

}  // namespace gomea
