#ifndef ODMX_TABLE_HPP
#define ODMX_TABLE_HPP

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <deque>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "odmx/errors.hpp"
#include "odmx/matrix.hpp"

namespace odmx {

using Count = std::int64_t;
using CountMatrix = Matrix<Count>;
/// 1 marks a cell that samplers may change, 0 a fixed cell.
using CellMask = Matrix<std::uint8_t>;

/// Integer origin-destination table of agent counts. Cells are nonnegative;
/// margins are recomputed on request and never cached.
class Table {
 public:
  Table() = default;

  Table(std::size_t rows, std::size_t cols) : cells_(rows, cols, 0) { check_dims(); }

  explicit Table(CountMatrix cells) : cells_(std::move(cells)) {
    check_dims();
    for (Count v : cells_.flat()) {
      if (v < 0) throw DimensionError("table cells must be nonnegative");
    }
  }

  static Table from_rows(std::initializer_list<std::initializer_list<Count>> rows) {
    return Table(CountMatrix::from_rows(rows));
  }
  static Table from_rows(const std::vector<std::vector<Count>>& rows) {
    return Table(CountMatrix::from_rows(rows));
  }

  std::size_t rows() const noexcept { return cells_.rows(); }
  std::size_t cols() const noexcept { return cells_.cols(); }

  Count operator()(std::size_t i, std::size_t j) const { return cells_(i, j); }
  /// Mutable cell access for samplers; callers keep cells nonnegative.
  Count& operator()(std::size_t i, std::size_t j) { return cells_(i, j); }

  std::vector<Count> row_sums() const { return cells_.row_sums(); }
  std::vector<Count> col_sums() const { return cells_.col_sums(); }
  Count total() const { return cells_.sum(); }

  const CountMatrix& matrix() const noexcept { return cells_; }

  RealMatrix as_real() const {
    RealMatrix m(rows(), cols());
    for (std::size_t k = 0; k < cells_.size(); ++k) m.flat()[k] = static_cast<double>(cells_.flat()[k]);
    return m;
  }

  Table transposed() const { return Table(cells_.transposed()); }

  friend bool operator==(const Table& a, const Table& b) { return a.cells_ == b.cells_; }
  friend bool operator<(const Table& a, const Table& b) {
    return a.cells_.values() < b.cells_.values();
  }

 private:
  void check_dims() const {
    if (cells_.rows() < 1 || cells_.cols() < 1) throw DimensionError("table needs I >= 1 and J >= 1");
  }

  CountMatrix cells_;
};

struct Cell {
  std::size_t i = 0;
  std::size_t j = 0;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

/// Set of table cells kept in lexicographic (row, then column) order.
class CellSet {
 public:
  CellSet() = default;
  explicit CellSet(std::vector<Cell> cells) : cells_(std::move(cells)) {
    std::sort(cells_.begin(), cells_.end());
    if (std::adjacent_find(cells_.begin(), cells_.end()) != cells_.end()) {
      throw DimensionError("duplicate cell in cell set");
    }
  }
  CellSet(std::initializer_list<Cell> cells) : CellSet(std::vector<Cell>(cells)) {}

  std::size_t size() const noexcept { return cells_.size(); }
  bool empty() const noexcept { return cells_.empty(); }
  auto begin() const noexcept { return cells_.begin(); }
  auto end() const noexcept { return cells_.end(); }
  const Cell& operator[](std::size_t k) const { return cells_[k]; }

  bool contains(std::size_t i, std::size_t j) const {
    return std::binary_search(cells_.begin(), cells_.end(), Cell{i, j});
  }

  void check_within(std::size_t rows, std::size_t cols) const {
    for (const Cell& c : cells_) {
      if (c.i >= rows || c.j >= cols) {
        throw DimensionError("cell (" + std::to_string(c.i) + "," + std::to_string(c.j) +
                             ") outside " + std::to_string(rows) + "x" + std::to_string(cols));
      }
    }
  }

  friend bool operator==(const CellSet&, const CellSet&) = default;

 private:
  std::vector<Cell> cells_;
};

// Summary statistic kinds. CellValues comes first so that, for equal cell-set
// sizes, the variant index gives a stable secondary order.
struct CellValues {
  CellSet cells;
  explicit CellValues(CellSet c) : cells(std::move(c)) {
    if (cells.empty()) throw DimensionError("CellValues needs a nonempty cell set");
  }
  friend bool operator==(const CellValues&, const CellValues&) = default;
};
struct GrandTotal {
  friend bool operator==(const GrandTotal&, const GrandTotal&) = default;
};
struct RowMargins {
  friend bool operator==(const RowMargins&, const RowMargins&) = default;
};
struct ColMargins {
  friend bool operator==(const ColMargins&, const ColMargins&) = default;
};

using Statistic = std::variant<CellValues, GrandTotal, RowMargins, ColMargins>;

inline std::size_t statistic_cell_count(const Statistic& s, std::size_t rows, std::size_t cols) {
  if (const auto* cv = std::get_if<CellValues>(&s)) return cv->cells.size();
  return rows * cols;
}

inline std::size_t statistic_length(const Statistic& s, std::size_t rows, std::size_t cols) {
  return std::visit(
      [&](const auto& k) -> std::size_t {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, GrandTotal>) return 1;
        else if constexpr (std::is_same_v<K, RowMargins>) return rows;
        else if constexpr (std::is_same_v<K, ColMargins>) return cols;
        else return k.cells.size();
      },
      s);
}

inline const char* statistic_name(const Statistic& s) {
  switch (s.index()) {
    case 0: return "CellValues";
    case 1: return "GrandTotal";
    case 2: return "RowMargins";
    default: return "ColMargins";
  }
}

/// Row sums, column sums, [grand total] or the listed cell values (in
/// lexicographic cell order) of a matrix.
template <typename T>
std::vector<T> summary_statistic(const Matrix<T>& m, const Statistic& kind) {
  return std::visit(
      [&](const auto& k) -> std::vector<T> {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, GrandTotal>) return {m.sum()};
        else if constexpr (std::is_same_v<K, RowMargins>) return m.row_sums();
        else if constexpr (std::is_same_v<K, ColMargins>) return m.col_sums();
        else {
          k.cells.check_within(m.rows(), m.cols());
          std::vector<T> out;
          out.reserve(k.cells.size());
          for (const Cell& c : k.cells) out.push_back(m(c.i, c.j));
          return out;
        }
      },
      kind);
}

inline std::vector<Count> summary_statistic(const Table& t, const Statistic& kind) {
  return summary_statistic(t.matrix(), kind);
}

struct TableConstraint {
  Statistic statistic;
  std::vector<Count> values;
};

struct IntensityConstraint {
  Statistic statistic;
  std::vector<double> values;
};

namespace detail {

/// Fills free cells with nonnegative integers meeting the given row and column
/// sums: a northwest-corner pass in lexicographic order, then augmenting paths
/// on the bipartite row/column network for whatever the greedy pass could not
/// place. Returns nothing if no such filling exists.
inline std::optional<CountMatrix> transport_fill(const std::vector<Count>& row_need,
                                                 const std::vector<Count>& col_need,
                                                 const CellMask& free) {
  const std::size_t I = row_need.size();
  const std::size_t J = col_need.size();
  CountMatrix x(I, J, 0);
  std::vector<Count> r = row_need;
  std::vector<Count> c = col_need;
  for (std::size_t i = 0; i < I; ++i) {
    for (std::size_t j = 0; j < J; ++j) {
      if (!free(i, j)) continue;
      const Count v = std::min(r[i], c[j]);
      x(i, j) = v;
      r[i] -= v;
      c[j] -= v;
    }
  }
  // Augment: from a row with leftover supply, alternate forward row->col edges
  // (any free cell) and backward col->row edges (cells carrying flow) until
  // reaching a column with leftover demand.
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  for (;;) {
    std::vector<std::size_t> row_parent(I, kNone);  // column we came from
    std::vector<std::size_t> col_parent(J, kNone);  // row we came from
    std::vector<char> row_seen(I, 0);
    std::deque<std::size_t> queue;
    for (std::size_t i = 0; i < I; ++i) {
      if (r[i] > 0) {
        row_seen[i] = 1;
        queue.push_back(i);
      }
    }
    if (queue.empty()) break;
    std::size_t sink_col = kNone;
    while (!queue.empty() && sink_col == kNone) {
      const std::size_t i = queue.front();
      queue.pop_front();
      for (std::size_t j = 0; j < J; ++j) {
        if (!free(i, j) || col_parent[j] != kNone) continue;
        col_parent[j] = i;
        if (c[j] > 0) {
          sink_col = j;
          break;
        }
        for (std::size_t k = 0; k < I; ++k) {
          if (!row_seen[k] && free(k, j) && x(k, j) > 0) {
            row_seen[k] = 1;
            row_parent[k] = j;
            queue.push_back(k);
          }
        }
      }
    }
    if (sink_col == kNone) return std::nullopt;
    // Bottleneck along the path.
    Count amount = c[sink_col];
    std::size_t j = sink_col;
    std::size_t i = col_parent[j];
    while (row_parent[i] != kNone) {
      const std::size_t pj = row_parent[i];
      const std::size_t pi = col_parent[pj];
      amount = std::min(amount, x(i, pj));
      i = pi;
    }
    amount = std::min(amount, r[i]);
    // Apply.
    j = sink_col;
    i = col_parent[j];
    c[sink_col] -= amount;
    x(i, j) += amount;
    while (row_parent[i] != kNone) {
      const std::size_t pj = row_parent[i];
      x(i, pj) -= amount;
      i = col_parent[pj];
      x(i, pj) += amount;
    }
    r[i] -= amount;
  }
  return x;
}

}  // namespace detail

/// Ordered table and intensity constraint collections. Construction validates
/// lengths, nonnegativity, mutual consistency and the existence of at least one
/// admissible table; an object that exists is feasible.
class ConstraintSet {
 public:
  ConstraintSet(std::size_t rows, std::size_t cols, std::vector<TableConstraint> table = {},
                std::vector<IntensityConstraint> intensity = {})
      : rows_(rows), cols_(cols), table_(std::move(table)), intensity_(std::move(intensity)) {
    if (rows_ < 1 || cols_ < 1) throw DimensionError("constraint set needs I >= 1 and J >= 1");
    order(table_);
    order(intensity_);
    index_and_validate();
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  const std::vector<TableConstraint>& table_constraints() const noexcept { return table_; }
  const std::vector<IntensityConstraint>& intensity_constraints() const noexcept { return intensity_; }

  std::optional<Count> grand_total() const {
    if (const auto* v = find_table<GrandTotal>()) return v->front();
    return std::nullopt;
  }
  const std::vector<Count>* row_margins() const { return find_table<RowMargins>(); }
  const std::vector<Count>* col_margins() const { return find_table<ColMargins>(); }

  const CellSet& fixed_cells() const noexcept { return fixed_cells_; }
  /// Values of the fixed cells, aligned with fixed_cells().
  const std::vector<Count>& fixed_values() const noexcept { return fixed_values_; }
  bool has_fixed_cells() const noexcept { return !fixed_cells_.empty(); }

  /// Grand total implied by the table constraints, if any fixes it.
  std::optional<Count> implied_total() const {
    if (auto t = grand_total()) return t;
    if (const auto* r = row_margins()) return std::accumulate(r->begin(), r->end(), Count{0});
    if (const auto* c = col_margins()) return std::accumulate(c->begin(), c->end(), Count{0});
    return std::nullopt;
  }

  std::optional<double> intensity_total() const {
    if (const auto* v = find_intensity<GrandTotal>()) return v->front();
    return std::nullopt;
  }
  const std::vector<double>* intensity_row_margins() const { return find_intensity<RowMargins>(); }
  const std::vector<double>* intensity_col_margins() const { return find_intensity<ColMargins>(); }

  CellMask free_mask() const {
    CellMask m(rows_, cols_, 1);
    for (const Cell& c : fixed_cells_) m(c.i, c.j) = 0;
    return m;
  }

  /// The same constraints on the transposed table.
  ConstraintSet transposed() const {
    auto flip = [](const Statistic& s) -> Statistic {
      if (std::holds_alternative<RowMargins>(s)) return ColMargins{};
      if (std::holds_alternative<ColMargins>(s)) return RowMargins{};
      if (const auto* cv = std::get_if<CellValues>(&s)) {
        std::vector<Cell> cells;
        for (const Cell& c : cv->cells) cells.push_back({c.j, c.i});
        return CellValues(CellSet(std::move(cells)));
      }
      return s;
    };
    auto flip_values = [](const Statistic& s, const auto& values) {
      auto out = values;
      if (const auto* cv = std::get_if<CellValues>(&s)) {
        // Re-sort values to match the lexicographic order of transposed cells.
        std::vector<std::pair<Cell, std::size_t>> order;
        for (std::size_t k = 0; k < cv->cells.size(); ++k) order.push_back({{cv->cells[k].j, cv->cells[k].i}, k});
        std::sort(order.begin(), order.end());
        for (std::size_t k = 0; k < order.size(); ++k) out[k] = values[order[k].second];
      }
      return out;
    };
    std::vector<TableConstraint> t;
    for (const auto& tc : table_) t.push_back({flip(tc.statistic), flip_values(tc.statistic, tc.values)});
    std::vector<IntensityConstraint> l;
    for (const auto& ic : intensity_) l.push_back({flip(ic.statistic), flip_values(ic.statistic, ic.values)});
    return ConstraintSet(cols_, rows_, std::move(t), std::move(l));
  }

 private:
  template <typename C>
  void order(std::vector<C>& v) const {
    std::stable_sort(v.begin(), v.end(), [&](const C& a, const C& b) {
      const auto sa = statistic_cell_count(a.statistic, rows_, cols_);
      const auto sb = statistic_cell_count(b.statistic, rows_, cols_);
      if (sa != sb) return sa < sb;
      return a.statistic.index() < b.statistic.index();
    });
  }

  template <typename K>
  const std::vector<Count>* find_table() const {
    for (const auto& c : table_)
      if (std::holds_alternative<K>(c.statistic)) return &c.values;
    return nullptr;
  }

  template <typename K>
  const std::vector<double>* find_intensity() const {
    for (const auto& c : intensity_)
      if (std::holds_alternative<K>(c.statistic)) return &c.values;
    return nullptr;
  }

  void index_and_validate() {
    std::vector<int> seen(4, 0);
    for (const auto& c : table_) {
      if (seen[c.statistic.index()]++) {
        throw ConfigError(std::string("duplicate table constraint ") + statistic_name(c.statistic));
      }
      if (const auto* cv = std::get_if<CellValues>(&c.statistic)) cv->cells.check_within(rows_, cols_);
      if (c.values.size() != statistic_length(c.statistic, rows_, cols_)) {
        throw DimensionError(std::string(statistic_name(c.statistic)) + " expects " +
                             std::to_string(statistic_length(c.statistic, rows_, cols_)) + " values, got " +
                             std::to_string(c.values.size()));
      }
      for (Count v : c.values) {
        if (v < 0) throw InfeasibleConstraintsError(std::string(statistic_name(c.statistic)) + " has a negative value");
      }
      if (const auto* cv = std::get_if<CellValues>(&c.statistic)) {
        fixed_cells_ = cv->cells;
        fixed_values_ = c.values;
      }
    }
    std::vector<int> seen_l(4, 0);
    for (const auto& c : intensity_) {
      if (seen_l[c.statistic.index()]++) {
        throw ConfigError(std::string("duplicate intensity constraint ") + statistic_name(c.statistic));
      }
      if (std::holds_alternative<CellValues>(c.statistic)) {
        throw ConfigError("cell-value intensity constraints are not supported");
      }
      if (c.values.size() != statistic_length(c.statistic, rows_, cols_)) {
        throw DimensionError(std::string("intensity ") + statistic_name(c.statistic) + " has wrong length");
      }
      for (double v : c.values) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw InfeasibleConstraintsError("intensity constraint values must be finite and >= 0");
      }
    }
    check_feasible();
  }

  void check_feasible() const {
    const auto* rows = row_margins();
    const auto* cols = col_margins();
    const auto total = grand_total();
    auto sum = [](const std::vector<Count>& v) { return std::accumulate(v.begin(), v.end(), Count{0}); };
    if (total && rows && sum(*rows) != *total) throw InfeasibleConstraintsError("row margins do not sum to the grand total");
    if (total && cols && sum(*cols) != *total) throw InfeasibleConstraintsError("column margins do not sum to the grand total");
    if (rows && cols && sum(*rows) != sum(*cols)) throw InfeasibleConstraintsError("row and column margins disagree on the total");

    // Deduct fixed cells and make sure every margin stays nonnegative.
    std::vector<Count> r = rows ? *rows : std::vector<Count>{};
    std::vector<Count> c = cols ? *cols : std::vector<Count>{};
    Count t = total.value_or(0);
    for (std::size_t k = 0; k < fixed_cells_.size(); ++k) {
      const Cell& cell = fixed_cells_[k];
      const Count v = fixed_values_[k];
      if (rows && (r[cell.i] -= v) < 0) throw InfeasibleConstraintsError("fixed cells exceed row margin " + std::to_string(cell.i));
      if (cols && (c[cell.j] -= v) < 0) throw InfeasibleConstraintsError("fixed cells exceed column margin " + std::to_string(cell.j));
      if (total && (t -= v) < 0) throw InfeasibleConstraintsError("fixed cells exceed the grand total");
    }
    if (fixed_cells_.empty()) return;
    const CellMask free = free_mask();
    if (rows && cols) {
      if (!detail::transport_fill(r, c, free)) throw InfeasibleConstraintsError("no table meets the margins around the fixed cells");
      return;
    }
    auto line_has_free = [&](std::size_t idx, bool by_row) {
      const std::size_t n = by_row ? cols_ : rows_;
      for (std::size_t k = 0; k < n; ++k)
        if (by_row ? free(idx, k) : free(k, idx)) return true;
      return false;
    };
    if (rows) {
      for (std::size_t i = 0; i < rows_; ++i)
        if (r[i] > 0 && !line_has_free(i, true)) throw InfeasibleConstraintsError("row " + std::to_string(i) + " is fully fixed but its margin is not met");
    }
    if (cols) {
      for (std::size_t j = 0; j < cols_; ++j)
        if (c[j] > 0 && !line_has_free(j, false)) throw InfeasibleConstraintsError("column " + std::to_string(j) + " is fully fixed but its margin is not met");
    }
    if (total && !rows && !cols && t > 0 && fixed_cells_.size() == rows_ * cols_) {
      throw InfeasibleConstraintsError("every cell is fixed but the grand total is not met");
    }
  }

  std::size_t rows_;
  std::size_t cols_;
  std::vector<TableConstraint> table_;
  std::vector<IntensityConstraint> intensity_;
  CellSet fixed_cells_;
  std::vector<Count> fixed_values_;
};

/// True iff every table constraint is met exactly. Intensity constraints are
/// not checked here.
inline bool is_admissible(const Table& t, const ConstraintSet& c) {
  if (t.rows() != c.rows() || t.cols() != c.cols()) {
    throw DimensionError("table " + std::to_string(t.rows()) + "x" + std::to_string(t.cols()) +
                         " checked against constraints for " + std::to_string(c.rows()) + "x" +
                         std::to_string(c.cols()));
  }
  for (const auto& tc : c.table_constraints()) {
    if (summary_statistic(t, tc.statistic) != tc.values) return false;
  }
  return true;
}

/// Deducts fixed cell values from every margin and total they contribute to.
/// Returns the constraints on the free cells together with the fixed cells.
inline std::pair<ConstraintSet, CellSet> reduce_by_fixed_cells(const ConstraintSet& c) {
  const CellSet& fixed = c.fixed_cells();
  const auto& values = c.fixed_values();
  std::vector<TableConstraint> reduced;
  for (const auto& tc : c.table_constraints()) {
    if (std::holds_alternative<CellValues>(tc.statistic)) continue;
    TableConstraint out = tc;
    for (std::size_t k = 0; k < fixed.size(); ++k) {
      const Cell& cell = fixed[k];
      Count* target = nullptr;
      if (std::holds_alternative<GrandTotal>(tc.statistic)) target = &out.values[0];
      else if (std::holds_alternative<RowMargins>(tc.statistic)) target = &out.values[cell.i];
      else if (std::holds_alternative<ColMargins>(tc.statistic)) target = &out.values[cell.j];
      *target -= values[k];
      if (*target < 0) {
        throw InfeasibleConstraintsError(std::string("deducting fixed cells makes ") + statistic_name(tc.statistic) + " negative");
      }
    }
    reduced.push_back(std::move(out));
  }
  return {ConstraintSet(c.rows(), c.cols(), std::move(reduced), c.intensity_constraints()), fixed};
}

}  // namespace odmx

#endif  // ODMX_TABLE_HPP
