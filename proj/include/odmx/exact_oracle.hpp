#ifndef ODMX_EXACT_ORACLE_HPP
#define ODMX_EXACT_ORACLE_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "odmx/errors.hpp"
#include "odmx/intensity.hpp"
#include "odmx/table.hpp"

namespace odmx {

/// Every table admissible under a constraint set, in lexicographic order.
struct Fiber {
  ConstraintSet constraint;
  std::vector<Table> tables;
};

inline constexpr std::size_t kDefaultFiberCap = 1'000'000;

namespace detail {

class FiberWalker {
 public:
  FiberWalker(const ConstraintSet& c, std::size_t cap) : c_(c), cap_(cap), t_(c.rows(), c.cols()) {
    const std::size_t I = c.rows(), J = c.cols();
    free_ = c.free_mask();
    const auto& fixed = c.fixed_cells();
    for (std::size_t k = 0; k < fixed.size(); ++k) t_(fixed[k].i, fixed[k].j) = c.fixed_values()[k];
    if (c.row_margins()) row_left_ = *c.row_margins();
    if (c.col_margins()) col_left_ = *c.col_margins();
    if (auto total = c.grand_total()) total_left_ = *total;
    for (std::size_t k = 0; k < fixed.size(); ++k) {
      const Count v = c.fixed_values()[k];
      if (!row_left_.empty()) row_left_[fixed[k].i] -= v;
      if (!col_left_.empty()) col_left_[fixed[k].j] -= v;
      if (total_left_) *total_left_ -= v;
    }
    last_in_row_.assign(I, -1);
    last_in_col_.assign(J, -1);
    std::ptrdiff_t last_any = -1;
    for (std::size_t i = 0; i < I; ++i)
      for (std::size_t j = 0; j < J; ++j)
        if (free_(i, j)) {
          const auto idx = static_cast<std::ptrdiff_t>(i * J + j);
          cells_.push_back({i, j});
          last_in_row_[i] = idx;
          last_in_col_[j] = idx;
          last_any = idx;
        }
    last_any_ = last_any;
    if (!cells_.empty() && row_left_.empty() && col_left_.empty() && !total_left_)
      throw FiberTooLargeError("free cells are unbounded; the fiber is infinite");
  }

  std::vector<Table> run() {
    if (!cells_.empty()) {
      recurse(0);
    } else if (feasible_end()) {
      out_.push_back(t_);
    }
    return std::move(out_);
  }

 private:
  bool feasible_end() const {
    for (Count v : row_left_)
      if (v != 0) return false;
    for (Count v : col_left_)
      if (v != 0) return false;
    return !total_left_ || *total_left_ == 0;
  }

  void recurse(std::size_t k) {
    if (k == cells_.size()) {
      if (!feasible_end()) return;
      if (out_.size() >= cap_) throw FiberTooLargeError("fiber exceeds the enumeration cap");
      out_.push_back(t_);
      return;
    }
    const Cell cell = cells_[k];
    const auto idx = static_cast<std::ptrdiff_t>(cell.i * c_.cols() + cell.j);
    Count hi = std::numeric_limits<Count>::max();
    if (!row_left_.empty()) hi = std::min(hi, row_left_[cell.i]);
    if (!col_left_.empty()) hi = std::min(hi, col_left_[cell.j]);
    if (total_left_) hi = std::min(hi, *total_left_);
    Count lo = 0;
    auto force = [&](bool applies, Count need) {
      if (!applies) return;
      lo = std::max(lo, need);
      hi = std::min(hi, need);
    };
    force(!row_left_.empty() && last_in_row_[cell.i] == idx, row_left_.empty() ? 0 : row_left_[cell.i]);
    force(!col_left_.empty() && last_in_col_[cell.j] == idx, col_left_.empty() ? 0 : col_left_[cell.j]);
    force(total_left_.has_value() && last_any_ == idx, total_left_.value_or(0));
    for (Count v = lo; v <= hi; ++v) {
      set(cell, v, -1);
      recurse(k + 1);
      set(cell, v, +1);
    }
  }

  void set(const Cell& cell, Count v, int dir) {
    t_(cell.i, cell.j) = dir < 0 ? v : 0;
    if (!row_left_.empty()) row_left_[cell.i] += dir * v;
    if (!col_left_.empty()) col_left_[cell.j] += dir * v;
    if (total_left_) *total_left_ += dir * v;
  }

  const ConstraintSet& c_;
  std::size_t cap_;
  Table t_;
  CellMask free_;
  std::vector<Cell> cells_;
  std::vector<Count> row_left_, col_left_;
  std::optional<Count> total_left_;
  std::vector<std::ptrdiff_t> last_in_row_, last_in_col_;
  std::ptrdiff_t last_any_ = -1;
  std::vector<Table> out_;
};

inline double log_sum_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double a : v) m = std::max(m, a);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double a : v) s += std::exp(a - m);
  return m + std::log(s);
}

}  // namespace detail

/// Enumerates the fiber cell by cell (lexicographic order), forcing the last
/// free cell of each constrained line to its remaining need.
inline Fiber enumerate_fiber(const ConstraintSet& c, std::size_t cap = kDefaultFiberCap) {
  detail::FiberWalker walker(c, cap);
  return {c, walker.run()};
}

/// Log of Fisher's noncentral hypergeometric kernel, sum of T log omega -
/// log T! over all cells.
inline double fisher_log_kernel(const Table& t, const RealMatrix& omega) {
  require_same_shape(t.matrix(), omega, "table vs odds ratios");
  double s = 0.0;
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) {
      const Count v = t(i, j);
      if (v == 0) continue;
      if (!(omega(i, j) > 0.0)) return -std::numeric_limits<double>::infinity();
      s += static_cast<double>(v) * std::log(omega(i, j)) - std::lgamma(static_cast<double>(v) + 1.0);
    }
  return s;
}

/// Fisher's noncentral hypergeometric law over a doubly constrained fiber.
inline std::vector<double> exact_distribution(const Fiber& f, const Intensity& lam) {
  if (f.tables.empty()) throw InfeasibleConstraintsError("empty fiber");
  if (!f.constraint.row_margins() || !f.constraint.col_margins())
    throw ConfigError("the exact Fisher law needs both margins in the constraint set");
  const RealMatrix omega = odds_ratios(lam).omega;
  std::vector<double> logk(f.tables.size());
  for (std::size_t k = 0; k < f.tables.size(); ++k) logk[k] = fisher_log_kernel(f.tables[k], omega);
  const double lz = detail::log_sum_exp(logk);
  if (!std::isfinite(lz)) throw DegenerateEstimatorError("every table in the fiber has zero kernel");
  std::vector<double> p(logk.size());
  for (std::size_t k = 0; k < p.size(); ++k) p[k] = std::exp(logk[k] - lz);
  return p;
}

inline RealMatrix exact_mean(const Fiber& f, std::span<const double> probs) {
  if (probs.size() != f.tables.size()) throw DimensionError("probability vector length does not match fiber");
  if (f.tables.empty()) throw InfeasibleConstraintsError("empty fiber");
  RealMatrix m(f.tables.front().rows(), f.tables.front().cols(), 0.0);
  for (std::size_t k = 0; k < probs.size(); ++k)
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) += probs[k] * static_cast<double>(f.tables[k](i, j));
  return m;
}

struct IdentitySides {
  double lhs;
  double rhs;
};

/// Both sides of the multinomial convolution identity over tables with the
/// given column margins, in log space:
///   lhs = log[ T_{++}! / prod_j T_{+j}! * prod_j omega_{+j}^{T_{+j}} ]
///   rhs = log sum_T T_{++}! / prod_ij T_ij! * prod_ij omega_ij^{T_ij}
/// The right side is summed by enumeration.
inline IdentitySides verify_chu_vandermonde(const RealMatrix& omega, std::span<const Count> col_margins, Count total,
                                            std::size_t cap = kDefaultFiberCap) {
  const std::size_t I = omega.rows(), J = omega.cols();
  if (col_margins.size() != J) throw DimensionError("column margins length does not match odds ratios");
  Count sum = 0;
  for (Count v : col_margins) {
    if (v < 0) throw InfeasibleConstraintsError("negative column margin");
    sum += v;
  }
  if (sum != total) throw InfeasibleConstraintsError("column margins do not sum to the total");
  for (double w : omega.flat())
    if (!(w > 0.0)) throw SingularError("odds ratios must be positive");

  const auto ct = omega.col_sums();
  const double lt = std::lgamma(static_cast<double>(total) + 1.0);
  double lhs = lt;
  for (std::size_t j = 0; j < J; ++j) {
    const auto n = static_cast<double>(col_margins[j]);
    lhs += n * std::log(ct[j]) - std::lgamma(n + 1.0);
  }

  std::vector<TableConstraint> tc{{ColMargins{}, std::vector<Count>(col_margins.begin(), col_margins.end())}};
  const Fiber f = enumerate_fiber(ConstraintSet(I, J, std::move(tc)), cap);
  std::vector<double> terms;
  terms.reserve(f.tables.size());
  for (const Table& t : f.tables) terms.push_back(lt + fisher_log_kernel(t, omega));
  return {lhs, detail::log_sum_exp(terms)};
}

/// Product Multinomial approximation of the Fisher mean: column j carries
/// T_{+j} trials with probabilities omega_{.j} / omega_{+j}.
inline RealMatrix approx_fisher_mean(const Intensity& lam, std::span<const Count> col_margins) {
  if (col_margins.size() != lam.cols()) throw DimensionError("column margins length does not match intensity");
  const RealMatrix omega = odds_ratios(lam).omega;
  const auto cs = omega.col_sums();
  RealMatrix m(lam.rows(), lam.cols(), 0.0);
  for (std::size_t j = 0; j < lam.cols(); ++j) {
    if (!(cs[j] > 0.0)) throw SingularError("zero odds-ratio column sum");
    for (std::size_t i = 0; i < lam.rows(); ++i) m(i, j) = static_cast<double>(col_margins[j]) * omega(i, j) / cs[j];
  }
  return m;
}

}  // namespace odmx

#endif  // ODMX_EXACT_ORACLE_HPP
