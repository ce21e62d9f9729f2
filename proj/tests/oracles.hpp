#pragma once

// Independent reference implementations used only by the tests. They work
// from the textbook definitions with plain loops and avoid the library's
// caching, factorization and graph code paths.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <set>
#include <string>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

inline Matrix identity(std::size_t n) {
  Matrix m(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) m[i][i] = 1.0;
  return m;
}

inline Matrix multiply(const Matrix& a, const Matrix& b) {
  const std::size_t n = a.size();
  const std::size_t k = b.size();
  const std::size_t m = b.empty() ? 0 : b[0].size();
  Matrix c(n, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t t = 0; t < k; ++t) c[i][j] += a[i][t] * b[t][j];
  return c;
}

// Full Givens matrices G_ij multiplied together so that G_01 acts first.
inline Matrix rotation(std::size_t n, double degrees) {
  const double t = degrees * std::numbers::pi / 180.0;
  Matrix r = identity(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      Matrix g = identity(n);
      g[i][i] = std::cos(t);
      g[j][j] = std::cos(t);
      g[i][j] = -std::sin(t);
      g[j][i] = std::sin(t);
      r = multiply(g, r);
    }
  }
  return r;
}

// Ellipsoid of R^theta(x) with condition exponent c.
inline double rotated_ellipsoid(const std::vector<double>& x, double c, double degrees) {
  const std::size_t n = x.size();
  const Matrix r = rotation(n, degrees);
  double f = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double y = 0.0;
    for (std::size_t j = 0; j < n; ++j) y += r[i][j] * x[j];
    const double w = n == 1 ? 1.0 : std::pow(10.0, c * static_cast<double>(i) / static_cast<double>(n - 1));
    f += w * y * y;
  }
  return f;
}

struct Block {
  std::size_t start;
  std::size_t size;
  double c;
  double theta;
};

// Block starts of REB(x, c, theta, kappa, s) tiled from 0 up to the last
// block ending exactly at ell - 1.
inline std::vector<Block> reb_layout(const std::string& name, std::size_t ell) {
  std::size_t kappa = 0;
  std::size_t stride = 0;
  double c = 6.0;
  double theta = 45.0;
  bool alternating = false;
  bool pairs = false;
  if (name == "soreb") kappa = 5, stride = 5;
  else if (name == "reb2weak") kappa = 2, stride = 1, c = 1.0, theta = 5.0;
  else if (name == "reb2strong") kappa = 2, stride = 1, c = 6.0, theta = 5.0;
  else if (name == "reb2alternating") kappa = 2, stride = 1, alternating = true;
  else if (name == "reb5nooverlap") kappa = 5, stride = 5;
  else if (name == "reb5smalloverlap") kappa = 5, stride = 1;
  else if (name == "reb5largeoverlap") kappa = 5, stride = 4;
  else if (name == "reb5alternating") kappa = 5, stride = 4, alternating = true;
  else if (name == "reb5disjointpairs") kappa = 5, pairs = true;
  else if (name == "reb10nooverlap") kappa = 10, stride = 10;
  else if (name == "reb10smalloverlap") kappa = 10, stride = 1;
  else if (name == "reb10largeoverlap") kappa = 10, stride = 4;
  else if (name == "reb10alternating") kappa = 10, stride = 4, alternating = true;
  std::vector<Block> blocks;
  std::size_t start = 0;
  for (std::size_t i = 0; start + kappa <= ell; ++i) {
    double ci = c;
    double ti = theta;
    if (alternating) {
      ci = i % 2 == 0 ? 1.0 : 6.0;
      ti = i % 2 == 0 ? 5.0 : 45.0;
    }
    blocks.push_back({start, kappa, ci, ti});
    start += pairs ? (i % 2 == 0 ? 4 : 5) : stride;
  }
  return blocks;
}

// Direct evaluation of every named benchmark from its formula.
inline double evaluate(const std::string& name, const std::vector<double>& x) {
  const std::size_t n = x.size();
  double f = 0.0;
  if (name == "sphere") {
    for (double v : x) f += v * v;
  } else if (name == "rotated-ellipsoid") {
    f = rotated_ellipsoid(x, 6.0, 45.0);
  } else if (name == "cigar") {
    f = x[0] * x[0];
    for (std::size_t i = 1; i < n; ++i) f += 1e6 * x[i] * x[i];
  } else if (name == "tablet") {
    f = 1e6 * x[0] * x[0];
    for (std::size_t i = 1; i < n; ++i) f += x[i] * x[i];
  } else if (name == "cigar-tablet") {
    f = x[0] * x[0];
    for (std::size_t i = 1; i + 1 < n; ++i) f += 1e4 * x[i] * x[i];
    if (n > 1) f += 1e8 * x[n - 1] * x[n - 1];
  } else if (name == "two-axes") {
    for (std::size_t i = 0; i < n / 2; ++i) f += 1e6 * x[i] * x[i];
    for (std::size_t i = n / 2; i < n; ++i) f += x[i] * x[i];
  } else if (name == "different-powers") {
    for (std::size_t i = 0; i < n; ++i)
      f += std::pow(std::abs(x[i]), 2.0 + 10.0 * static_cast<double>(i) / (n > 1 ? static_cast<double>(n - 1) : 1.0));
  } else if (name == "rosenbrock") {
    if (n == 1) return (x[0] - 1.0) * (x[0] - 1.0);
    for (std::size_t i = 0; i + 1 < n; ++i)
      f += 100.0 * (x[i] * x[i] - x[i + 1]) * (x[i] * x[i] - x[i + 1]) + (x[i] - 1.0) * (x[i] - 1.0);
  } else if (name == "parabolic-ridge") {
    f = -x[0];
    for (std::size_t i = 1; i < n; ++i) f += 100.0 * x[i] * x[i];
  } else if (name == "sharp-ridge") {
    double s = 0.0;
    for (std::size_t i = 1; i < n; ++i) s += x[i] * x[i];
    f = -x[0] + 100.0 * std::sqrt(s);
  } else if (name == "osoreb") {
    for (std::size_t start = 0; start + 5 <= n; start += 4)
      f += rotated_ellipsoid({x.begin() + start, x.begin() + start + 5}, 6.0, 45.0);
    for (std::size_t start = 0; start + 2 <= n; start += 5)
      f += rotated_ellipsoid({x.begin() + start, x.begin() + start + 2}, 6.0, 45.0);
  } else if (name == "rebgrid") {
    const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
    for (std::size_t v = 0; v < n; ++v) {
      std::vector<std::size_t> members = {v};
      const std::size_t r = v / side;
      const std::size_t c = v % side;
      if (r > 0) members.push_back(v - side);
      if (r + 1 < side) members.push_back(v + side);
      if (c > 0) members.push_back(v - 1);
      if (c + 1 < side) members.push_back(v + 1);
      std::sort(members.begin(), members.end());
      std::vector<double> local;
      for (std::size_t m : members) local.push_back(x[m]);
      f += rotated_ellipsoid(local, 6.0, 45.0);
    }
  } else {
    for (const Block& b : reb_layout(name, n))
      f += rotated_ellipsoid({x.begin() + b.start, x.begin() + b.start + b.size}, b.c, b.theta);
  }
  return f;
}

// Covariance with divisor |S| from two nested loops over the definition.
inline Matrix covariance(const std::vector<std::vector<double>>& rows, const std::vector<std::size_t>& columns) {
  const std::size_t n = columns.size();
  const double s = static_cast<double>(rows.size());
  std::vector<double> mean(n, 0.0);
  for (const auto& row : rows)
    for (std::size_t a = 0; a < n; ++a) mean[a] += row[columns[a]] / s;
  Matrix cov(n, std::vector<double>(n, 0.0));
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      double sum = 0.0;
      for (const auto& row : rows) sum += (row[columns[a]] - mean[a]) * (row[columns[b]] - mean[b]);
      cov[a][b] = sum / s;
    }
  }
  return cov;
}

inline double learning_rate(double a0, double a1, double a2, double s, double kappa) {
  const double eta = 1.0 - std::exp(a0 * std::pow(s, a1) / std::pow(kappa, a2));
  return eta < 0.0 ? 0.0 : (eta > 1.0 ? 1.0 : eta);
}

// Adjacency matrix from explicit index sets.
inline std::vector<std::vector<bool>> co_membership(std::size_t n,
                                                     const std::vector<std::vector<std::size_t>>& sets) {
  std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = 0; v < n; ++v) {
      if (u == v) continue;
      for (const auto& s : sets)
        if (std::find(s.begin(), s.end(), u) != s.end() && std::find(s.begin(), s.end(), v) != s.end())
          adj[u][v] = true;
    }
  return adj;
}

// Every maximal clique, by subset enumeration (small graphs only).
inline std::vector<std::vector<std::size_t>> maximal_cliques(const std::vector<std::vector<bool>>& adj) {
  const std::size_t n = adj.size();
  std::vector<std::vector<std::size_t>> cliques;
  auto is_clique = [&](unsigned mask) {
    for (std::size_t u = 0; u < n; ++u)
      for (std::size_t v = u + 1; v < n; ++v)
        if ((mask >> u & 1u) && (mask >> v & 1u) && !adj[u][v]) return false;
    return true;
  };
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    if (!is_clique(mask)) continue;
    bool maximal = true;
    for (std::size_t w = 0; w < n && maximal; ++w)
      if (!(mask >> w & 1u) && is_clique(mask | (1u << w))) maximal = false;
    if (!maximal) continue;
    std::vector<std::size_t> members;
    for (std::size_t v = 0; v < n; ++v)
      if (mask >> v & 1u) members.push_back(v);
    cliques.push_back(members);
  }
  return cliques;
}

// The lexicographically smallest maximal clique containing v, comparing the
// ascending lists of its other members.
inline std::vector<std::size_t> lexicographic_clique(const std::vector<std::vector<bool>>& adj, std::size_t v) {
  std::vector<std::vector<std::size_t>> best;
  for (const auto& c : maximal_cliques(adj)) {
    if (std::find(c.begin(), c.end(), v) == c.end()) continue;
    std::vector<std::size_t> others;
    for (std::size_t u : c)
      if (u != v) others.push_back(u);
    if (best.empty() || others < best[1]) best = {c, others};
  }
  return best.empty() ? std::vector<std::size_t>{v} : best[0];
}

}  // namespace oracle
