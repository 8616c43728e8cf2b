#ifndef ODMX_METRICS_HPP
#define ODMX_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <vector>

#include "odmx/errors.hpp"
#include "odmx/intensity.hpp"
#include "odmx/matrix.hpp"
#include "odmx/table.hpp"

namespace odmx {

/// Standardised RMSE: RMSE over cells divided by the mean cell value of the
/// estimate.
inline double srmse(const RealMatrix& t, const Table& truth) {
  require_same_shape(t, truth.matrix(), "srmse");
  const double n = static_cast<double>(t.size());
  double sq = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) {
      const double d = t(i, j) - static_cast<double>(truth(i, j));
      sq += d * d;
      sum += t(i, j);
    }
  if (sum == 0.0) throw UndefinedMetricError("srmse is undefined for an all-zero estimate");
  return std::sqrt(sq / n) / (sum / n);
}

/// Mean over cells of 2 min(a,b) / (a+b); cells where both are zero count 1.
inline double ssi(const RealMatrix& t, const Table& truth) {
  require_same_shape(t, truth.matrix(), "ssi");
  double s = 0.0;
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) {
      const double a = t(i, j), b = static_cast<double>(truth(i, j));
      s += (a + b == 0.0) ? 1.0 : 2.0 * std::min(a, b) / (a + b);
    }
  return s / static_cast<double>(t.size());
}

/// Half the l1 distance: an upper bound on the number of unit basis moves
/// separating two tables with equal margins.
inline double mbd(const RealMatrix& t, const RealMatrix& truth) {
  require_same_shape(t, truth, "mbd");
  double s = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) s += std::abs(t.flat()[k] - truth.flat()[k]);
  return 0.5 * s;
}

inline double mbd(const Table& t, const Table& truth) { return mbd(t.as_real(), truth.as_real()); }

struct Interval {
  Count lo;
  Count hi;
};

/// Highest-mass region of an empirical integer distribution: values are taken
/// in decreasing frequency (ties to the lower value) until their mass reaches
/// q; the region reported is the hull of the chosen values.
inline Interval hpm_interval(std::span<const Count> values, double q) {
  if (values.empty()) throw UndefinedMetricError("empty sample");
  if (!(q > 0.0 && q < 1.0)) throw UndefinedMetricError("q must lie in (0,1)");
  std::map<Count, std::size_t> freq;
  for (Count v : values) ++freq[v];
  std::vector<std::pair<Count, std::size_t>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  const double need = q * static_cast<double>(values.size());
  double mass = 0.0;
  Interval out{ranked.front().first, ranked.front().first};
  for (const auto& [v, n] : ranked) {
    out.lo = std::min(out.lo, v);
    out.hi = std::max(out.hi, v);
    mass += static_cast<double>(n);
    if (mass >= need) break;
  }
  return out;
}

struct Coverage {
  double all_cells;
  double free_cells;
};

/// Fraction of cells whose true value lies inside the per-cell q-mass region
/// of the sampled tables. `fixed` cells are excluded from the free-only figure.
inline Coverage coverage_probability(std::span<const Table> samples, const Table& truth, double q = 0.99,
                                     const CellSet& fixed = {}) {
  if (samples.empty()) throw UndefinedMetricError("empty trace");
  std::size_t covered = 0, covered_free = 0, n_free = 0;
  std::vector<Count> column(samples.size());
  for (std::size_t i = 0; i < truth.rows(); ++i)
    for (std::size_t j = 0; j < truth.cols(); ++j) {
      for (std::size_t k = 0; k < samples.size(); ++k) {
        require_same_shape(samples[k].matrix(), truth.matrix(), "coverage");
        column[k] = samples[k](i, j);
      }
      const Interval r = hpm_interval(column, q);
      const bool in = truth(i, j) >= r.lo && truth(i, j) <= r.hi;
      covered += in ? 1 : 0;
      if (!fixed.contains(i, j)) {
        ++n_free;
        covered_free += in ? 1 : 0;
      }
    }
  const double n = static_cast<double>(truth.rows() * truth.cols());
  return {static_cast<double>(covered) / n, n_free ? static_cast<double>(covered_free) / static_cast<double>(n_free) : 1.0};
}

/// Coefficient of determination of x_mean against log y.
inline double r_squared(std::span<const double> x_mean, const Observation& y) {
  if (x_mean.size() != y.size()) throw DimensionError("r_squared length mismatch");
  const auto ly = y.log_values();
  double mean = 0.0;
  for (double v : ly) mean += v;
  mean /= static_cast<double>(ly.size());
  double ss_tot = 0.0, ss_res = 0.0;
  for (std::size_t j = 0; j < ly.size(); ++j) {
    ss_tot += (ly[j] - mean) * (ly[j] - mean);
    ss_res += (ly[j] - x_mean[j]) * (ly[j] - x_mean[j]);
  }
  if (ss_tot == 0.0) throw UndefinedMetricError("log observations have zero variance");
  return 1.0 - ss_res / ss_tot;
}

/// ||mean(T^(1:n)) - g||_1 for every n; divided by ||g||_1 when `relative`.
inline std::vector<double> l1_convergence(std::span<const Table> samples, const RealMatrix& g, bool relative = true) {
  double norm = 0.0;
  for (double v : g.flat()) norm += std::abs(v);
  if (relative && norm == 0.0) throw UndefinedMetricError("reference matrix has zero l1 norm");
  std::vector<double> running(g.size(), 0.0), out;
  out.reserve(samples.size());
  for (std::size_t n = 0; n < samples.size(); ++n) {
    require_same_shape(samples[n].matrix(), g, "l1_convergence");
    const auto cells = samples[n].matrix().flat();
    double e = 0.0;
    const double inv = 1.0 / static_cast<double>(n + 1);
    for (std::size_t k = 0; k < running.size(); ++k) {
      running[k] += static_cast<double>(cells[k]);
      e += std::abs(running[k] * inv - g.flat()[k]);
    }
    out.push_back(relative ? e / norm : e);
  }
  return out;
}

/// Cellwise mean of a set of tables.
inline RealMatrix mean_table(std::span<const Table> samples) {
  if (samples.empty()) throw UndefinedMetricError("empty trace");
  RealMatrix m(samples.front().rows(), samples.front().cols(), 0.0);
  for (const Table& t : samples) {
    require_same_shape(t.matrix(), m, "mean_table");
    for (std::size_t k = 0; k < m.size(); ++k) m.flat()[k] += static_cast<double>(t.matrix().flat()[k]);
  }
  for (double& v : m.flat()) v /= static_cast<double>(samples.size());
  return m;
}

}  // namespace odmx

#endif  // ODMX_METRICS_HPP
