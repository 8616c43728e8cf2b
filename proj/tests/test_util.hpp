#ifndef ODMX_TEST_UTIL_HPP
#define ODMX_TEST_UTIL_HPP

#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <vector>

#include "odmx/odmx.hpp"

namespace testutil {

using namespace odmx;

inline CostMatrix random_cost(std::size_t I, std::size_t J, Rng& rng, double scale = 2.0) {
  RealMatrix c(I, J);
  for (double& v : c.flat()) v = scale * rng.uniform();
  return CostMatrix(c);
}

inline std::vector<double> random_vector(std::size_t n, Rng& rng, double lo, double hi) {
  std::vector<double> v(n);
  for (double& a : v) a = lo + (hi - lo) * rng.uniform();
  return v;
}

inline RealMatrix random_positive(std::size_t I, std::size_t J, Rng& rng, double lo = 0.5, double hi = 5.0) {
  RealMatrix m(I, J);
  for (double& v : m.flat()) v = lo + (hi - lo) * rng.uniform();
  return m;
}

inline Table random_table(std::size_t I, std::size_t J, Rng& rng, Count hi = 6) {
  Table t(I, J);
  for (std::size_t i = 0; i < I; ++i)
    for (std::size_t j = 0; j < J; ++j) t(i, j) = static_cast<Count>(rng.below(static_cast<std::uint64_t>(hi) + 1));
  return t;
}

/// Central differences of a scalar function of a vector.
inline std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double x0 = x[k];
    x[k] = x0 + h;
    const double fp = f(x);
    x[k] = x0 - h;
    const double fm = f(x);
    x[k] = x0;
    g[k] = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

/// Counts tables with given row and column margins by dynamic programming
/// over rows; independent of the fiber walker.
inline std::size_t count_tables_dp(const std::vector<Count>& rows, const std::vector<Count>& cols) {
  std::map<std::vector<Count>, std::size_t> layer{{cols, 1}};
  for (Count r : rows) {
    std::map<std::vector<Count>, std::size_t> next;
    for (const auto& [left, n] : layer) {
      std::vector<Count> cur(left.size(), 0);
      std::function<void(std::size_t, Count)> rec = [&](std::size_t j, Count rem) {
        if (j + 1 == left.size()) {
          if (rem > left[j]) return;
          auto after = left;
          after[j] -= rem;
          for (std::size_t k = 0; k + 1 < left.size(); ++k) after[k] -= cur[k];
          next[after] += n;
          return;
        }
        for (Count v = 0; v <= std::min(rem, left[j]); ++v) {
          cur[j] = v;
          rec(j + 1, rem - v);
        }
        cur[j] = 0;
      };
      rec(0, r);
    }
    layer = std::move(next);
  }
  return layer[std::vector<Count>(cols.size(), 0)];
}

inline ConstraintSet doubly(const std::vector<Count>& rows, const std::vector<Count>& cols,
                            std::vector<TableConstraint> extra = {}) {
  std::vector<TableConstraint> tc{{RowMargins{}, rows}, {ColMargins{}, cols}};
  for (auto& e : extra) tc.push_back(std::move(e));
  return ConstraintSet(rows.size(), cols.size(), std::move(tc));
}

}  // namespace testutil

#endif  // ODMX_TEST_UTIL_HPP
