#ifndef ODMX_MARKOV_BASIS_HPP
#define ODMX_MARKOV_BASIS_HPP

#include <algorithm>
#include <deque>
#include <map>
#include <vector>

#include "odmx/errors.hpp"
#include "odmx/exact_oracle.hpp"
#include "odmx/table.hpp"

namespace odmx {

/// Degree-4 rectangle move. A unit step adds +1 at (i1,j1) and (i2,j2) and
/// -1 at (i1,j2) and (i2,j1), so row and column sums are unchanged.
struct BasisMove {
  std::size_t i1, i2, j1, j2;

  CountMatrix as_matrix(std::size_t rows, std::size_t cols, Count eta = 1) const {
    CountMatrix m(rows, cols, 0);
    m(i1, j1) += eta;
    m(i2, j2) += eta;
    m(i1, j2) -= eta;
    m(i2, j1) -= eta;
    return m;
  }

  bool touches(std::size_t i, std::size_t j) const noexcept {
    return (i == i1 || i == i2) && (j == j1 || j == j2);
  }

  friend auto operator<=>(const BasisMove&, const BasisMove&) = default;
};

class MarkovBasis {
 public:
  MarkovBasis() = default;
  MarkovBasis(std::size_t rows, std::size_t cols, CellSet fixed, std::vector<BasisMove> moves)
      : rows_(rows), cols_(cols), fixed_(std::move(fixed)), moves_(std::move(moves)) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  const CellSet& fixed_cells() const noexcept { return fixed_; }
  const std::vector<BasisMove>& moves() const noexcept { return moves_; }
  std::size_t size() const noexcept { return moves_.size(); }
  bool empty() const noexcept { return moves_.empty(); }
  const BasisMove& operator[](std::size_t k) const { return moves_[k]; }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  CellSet fixed_;
  std::vector<BasisMove> moves_;
};

/// All rectangles over row pairs x column pairs that avoid every fixed cell.
inline MarkovBasis generate_basis(std::size_t rows, std::size_t cols, const CellSet& fixed = {}) {
  fixed.check_within(rows, cols);
  std::vector<BasisMove> moves;
  if (rows >= 2 && cols >= 2) moves.reserve(rows * (rows - 1) * cols * (cols - 1) / 4);
  for (std::size_t i1 = 0; i1 < rows; ++i1)
    for (std::size_t i2 = i1 + 1; i2 < rows; ++i2)
      for (std::size_t j1 = 0; j1 < cols; ++j1)
        for (std::size_t j2 = j1 + 1; j2 < cols; ++j2) {
          if (fixed.contains(i1, j1) || fixed.contains(i1, j2) || fixed.contains(i2, j1) || fixed.contains(i2, j2))
            continue;
          moves.push_back({i1, i2, j1, j2});
        }
  return MarkovBasis(rows, cols, fixed, std::move(moves));
}

struct EtaInterval {
  Count lo;
  Count hi;
  Count size() const noexcept { return hi - lo + 1; }
  bool contains(Count eta) const noexcept { return eta >= lo && eta <= hi; }
};

/// Step sizes that keep the four touched cells nonnegative.
inline EtaInterval eta_support(const Table& t, const BasisMove& f) {
  return {-std::min(t(f.i1, f.j1), t(f.i2, f.j2)), std::min(t(f.i1, f.j2), t(f.i2, f.j1))};
}

/// Applies eta * f in place; throws and leaves t untouched if a cell would go
/// negative.
inline void apply_move_inplace(Table& t, const BasisMove& f, Count eta) {
  if (!eta_support(t, f).contains(eta)) throw InvalidStepError("basis move step makes a cell negative");
  t(f.i1, f.j1) += eta;
  t(f.i2, f.j2) += eta;
  t(f.i1, f.j2) -= eta;
  t(f.i2, f.j1) -= eta;
}

inline Table apply_move(const Table& t, const BasisMove& f, Count eta) {
  Table out = t;
  apply_move_inplace(out, f, eta);
  return out;
}

/// Whether single unit moves of the basis built for `c` connect every pair of
/// admissible tables. Enumerates the fiber, so it is only usable on small
/// instances.
inline bool verify_connectivity(const ConstraintSet& c, std::size_t cap = kDefaultFiberCap) {
  const Fiber fiber = enumerate_fiber(c, cap);
  if (fiber.tables.size() <= 1) return true;
  const MarkovBasis basis = generate_basis(c.rows(), c.cols(), c.fixed_cells());
  std::map<Table, std::size_t> index;
  for (std::size_t k = 0; k < fiber.tables.size(); ++k) index.emplace(fiber.tables[k], k);
  std::vector<bool> seen(fiber.tables.size(), false);
  std::deque<std::size_t> queue{0};
  seen[0] = true;
  std::size_t reached = 1;
  while (!queue.empty()) {
    const Table& t = fiber.tables[queue.front()];
    queue.pop_front();
    for (const BasisMove& f : basis.moves()) {
      const EtaInterval s = eta_support(t, f);
      for (Count eta : {Count{-1}, Count{1}}) {
        if (!s.contains(eta)) continue;
        const auto it = index.find(apply_move(t, f, eta));
        if (it == index.end() || seen[it->second]) continue;
        seen[it->second] = true;
        ++reached;
        queue.push_back(it->second);
      }
    }
  }
  return reached == fiber.tables.size();
}

}  // namespace odmx

#endif  // ODMX_MARKOV_BASIS_HPP
