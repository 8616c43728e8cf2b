#ifndef ODMX_TABLE_SAMPLERS_HPP
#define ODMX_TABLE_SAMPLERS_HPP

#include <cassert>
#include <cmath>
#include <concepts>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "odmx/errors.hpp"
#include "odmx/intensity.hpp"
#include "odmx/likelihood.hpp"
#include "odmx/markov_basis.hpp"
#include "odmx/rng.hpp"
#include "odmx/table.hpp"

namespace odmx {

enum class TableFamily { Unconstrained, TotalConstrained, RowConstrained, DoublyConstrained };

/// Target law for the table conditional. `transposed` marks a column-margins
/// problem solved as a row-margins problem on the transpose.
struct TableTarget {
  TableFamily family = TableFamily::Unconstrained;
  bool transposed = false;
  CellSet fixed;

  bool tractable() const noexcept { return family != TableFamily::DoublyConstrained; }
};

inline const char* family_name(TableFamily f) {
  switch (f) {
    case TableFamily::Unconstrained: return "unconstrained";
    case TableFamily::TotalConstrained: return "total";
    case TableFamily::RowConstrained: return "row";
    default: return "doubly";
  }
}

inline TableTarget select_target(const ConstraintSet& c) {
  TableTarget t;
  t.fixed = c.fixed_cells();
  const bool rows = c.row_margins() != nullptr;
  const bool cols = c.col_margins() != nullptr;
  if (rows && cols) t.family = TableFamily::DoublyConstrained;
  else if (rows) t.family = TableFamily::RowConstrained;
  else if (cols) {
    t.family = TableFamily::RowConstrained;
    t.transposed = true;
  } else if (c.grand_total()) t.family = TableFamily::TotalConstrained;
  return t;
}

/// Likelihood kind matching a target, in the original (untransposed) frame.
inline TableLikelihoodKind likelihood_kind(const TableTarget& t) {
  switch (t.family) {
    case TableFamily::Unconstrained: return TableLikelihoodKind::Unconstrained;
    case TableFamily::TotalConstrained: return TableLikelihoodKind::GrandTotal;
    case TableFamily::RowConstrained:
      return t.transposed ? TableLikelihoodKind::ColMargins : TableLikelihoodKind::RowMargins;
    default: return TableLikelihoodKind::Doubly;
  }
}

namespace detail {

inline Count draw_binomial(Rng& rng, Count n, double p) {
  if (n <= 0 || p <= 0.0) return 0;
  if (p >= 1.0) return n;
  return std::binomial_distribution<Count>(n, p)(rng);
}

/// Multinomial draw by sequential binomial conditionals over `weights`.
inline void draw_multinomial(Rng& rng, Count n, std::span<const double> weights, std::span<Count> out) {
  double rest = 0.0;
  for (double w : weights) rest += w;
  if (n > 0 && !(rest > 0.0)) throw SupportError("multinomial draw with zero total weight");
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (n == 0) {
      out[k] = 0;
      continue;
    }
    const double p = rest > 0.0 ? weights[k] / rest : 0.0;
    const Count v = k + 1 == weights.size() ? n : draw_binomial(rng, n, std::min(1.0, p));
    out[k] = v;
    n -= v;
    rest -= weights[k];
  }
  if (n != 0) throw SupportError("multinomial draw left trials unassigned");
}

/// Intensity with fixed cells zeroed out.
inline RealMatrix masked_weights(const RealMatrix& lam, const CellSet& fixed) {
  RealMatrix w = lam;
  for (const Cell& c : fixed) w(c.i, c.j) = 0.0;
  return w;
}

inline void inject_fixed(Table& t, const ConstraintSet& c) {
  for (std::size_t k = 0; k < c.fixed_cells().size(); ++k) {
    const Cell& cell = c.fixed_cells()[k];
    t(cell.i, cell.j) = c.fixed_values()[k];
  }
}

}  // namespace detail

inline Table sample_poisson(const RealMatrix& lam, Rng& rng) {
  Table t(lam.rows(), lam.cols());
  for (std::size_t i = 0; i < lam.rows(); ++i)
    for (std::size_t j = 0; j < lam.cols(); ++j) {
      const double m = lam(i, j);
      if (m < 0.0 || !std::isfinite(m)) throw NumericError("Poisson mean must be finite and >= 0");
      t(i, j) = m > 0.0 ? std::poisson_distribution<Count>(m)(rng) : 0;
    }
  return t;
}

inline Table sample_poisson(const Intensity& lam, Rng& rng) { return sample_poisson(lam.matrix(), rng); }

inline Table sample_multinomial(const RealMatrix& lam, Count total, Rng& rng) {
  if (total < 0) throw InfeasibleConstraintsError("negative total");
  Table t(lam.rows(), lam.cols());
  std::vector<Count> out(lam.size());
  detail::draw_multinomial(rng, total, lam.flat(), out);
  for (std::size_t k = 0; k < out.size(); ++k) t(k / lam.cols(), k % lam.cols()) = out[k];
  return t;
}

inline Table sample_multinomial(const Intensity& lam, Count total, Rng& rng) {
  return sample_multinomial(lam.matrix(), total, rng);
}

inline Table sample_product_multinomial(const RealMatrix& lam, std::span<const Count> row_margins, Rng& rng) {
  if (row_margins.size() != lam.rows()) throw DimensionError("row margins length does not match intensity rows");
  Table t(lam.rows(), lam.cols());
  std::vector<Count> out(lam.cols());
  for (std::size_t i = 0; i < lam.rows(); ++i) {
    if (row_margins[i] < 0) throw InfeasibleConstraintsError("negative row margin");
    detail::draw_multinomial(rng, row_margins[i], lam.row(i), out);
    for (std::size_t j = 0; j < lam.cols(); ++j) t(i, j) = out[j];
  }
  return t;
}

inline Table sample_product_multinomial(const Intensity& lam, std::span<const Count> row_margins, Rng& rng) {
  return sample_product_multinomial(lam.matrix(), row_margins, rng);
}

/// Fixed cells first, then a northwest-corner fill of the free cells against
/// the reduced margins (augmented where fixed cells block the greedy pass).
inline Table initialise_admissible(const ConstraintSet& c) {
  const auto [reduced, fixed] = reduce_by_fixed_cells(c);
  const CellMask free = c.free_mask();
  const std::size_t I = c.rows(), J = c.cols();
  Table t(I, J);
  const auto* rows = reduced.row_margins();
  const auto* cols = reduced.col_margins();
  auto first_free = [&](auto pred) -> std::optional<Cell> {
    for (std::size_t i = 0; i < I; ++i)
      for (std::size_t j = 0; j < J; ++j)
        if (free(i, j) && pred(i, j)) return Cell{i, j};
    return std::nullopt;
  };
  auto place = [&](std::optional<Cell> cell, Count v) {
    if (v == 0) return;
    if (!cell) throw InfeasibleConstraintsError("no free cell can carry the remaining margin");
    t(cell->i, cell->j) += v;
  };
  if (rows && cols) {
    auto fill = detail::transport_fill(*rows, *cols, free);
    if (!fill) throw InfeasibleConstraintsError("no table meets both margins on the free cells");
    t = Table(*fill);
  } else if (rows) {
    for (std::size_t i = 0; i < I; ++i) place(first_free([&](std::size_t a, std::size_t) { return a == i; }), (*rows)[i]);
  } else if (cols) {
    for (std::size_t j = 0; j < J; ++j) place(first_free([&](std::size_t, std::size_t b) { return b == j; }), (*cols)[j]);
  } else if (auto total = reduced.grand_total()) {
    place(first_free([](std::size_t, std::size_t) { return true; }), *total);
  }
  detail::inject_fixed(t, c);
  if (!is_admissible(t, c)) throw InfeasibleConstraintsError("could not construct an admissible table");
  return t;
}

/// A measure over tables that can report log mu(T + eta f) - log mu(T) from
/// the four touched cells.
template <typename M>
concept TableMeasure = requires(const M& m, const Table& t, const BasisMove& f, Count eta) {
  { m.log_ratio(t, f, eta) } -> std::convertible_to<double>;
};

struct UniformMeasure {
  double log_ratio(const Table&, const BasisMove&, Count) const { return 0.0; }
};

/// Fisher's noncentral hypergeometric kernel prod omega^T / T!.
class FisherMeasure {
 public:
  explicit FisherMeasure(const RealMatrix& omega) : log_omega_(omega.rows(), omega.cols()) {
    for (std::size_t k = 0; k < omega.size(); ++k) {
      const double w = omega.flat()[k];
      log_omega_.flat()[k] = w > 0.0 ? std::log(w) : -std::numeric_limits<double>::infinity();
    }
  }
  explicit FisherMeasure(const Intensity& lam) : FisherMeasure(odds_ratios(lam).omega) {}

  /// Log cross ratio log(omega11 omega22 / (omega12 omega21)).
  double log_cross(const BasisMove& f) const {
    return log_omega_(f.i1, f.j1) + log_omega_(f.i2, f.j2) - log_omega_(f.i1, f.j2) - log_omega_(f.i2, f.j1);
  }

  double log_ratio(const Table& t, const BasisMove& f, Count eta) const {
    auto lf = [](Count v) { return std::lgamma(static_cast<double>(v) + 1.0); };
    return eta * log_cross(f) - lf(t(f.i1, f.j1) + eta) - lf(t(f.i2, f.j2) + eta) - lf(t(f.i1, f.j2) - eta) -
           lf(t(f.i2, f.j1) - eta) + lf(t(f.i1, f.j1)) + lf(t(f.i2, f.j2)) + lf(t(f.i1, f.j2)) + lf(t(f.i2, f.j1));
  }

 private:
  RealMatrix log_omega_;
};

/// Arbitrary log-measure evaluated on whole tables; slow, for tests.
struct LogMeasureFn {
  std::function<double(const Table&)> log_mu;
  double log_ratio(const Table& t, const BasisMove& f, Count eta) const {
    return log_mu(apply_move(t, f, eta)) - log_mu(t);
  }
};

/// One Markov-basis Metropolis-Hastings step in place: uniform move, eta = +-1
/// with probability 1/2 each, accept with min(1, mu'/mu). Returns whether the
/// table changed.
template <TableMeasure M>
bool mb_mh_step(Table& t, const MarkovBasis& basis, const M& mu, Rng& rng) {
  if (basis.empty()) throw ConfigError("Markov basis is empty");
  const BasisMove& f = basis[rng.below(basis.size())];
  const Count eta = (rng() >> 63) != 0 ? 1 : -1;
  if (!eta_support(t, f).contains(eta)) return false;
  const double lr = mu.log_ratio(t, f, eta);
  if (lr < 0.0 && std::log(rng.uniform()) >= lr) return false;
  apply_move_inplace(t, f, eta);
  return true;
}

template <TableMeasure M>
Table mb_mh_step(const Table& t, const MarkovBasis& basis, const M& mu, Rng& rng) {
  Table out = t;
  mb_mh_step(out, basis, mu, rng);
  return out;
}

/// Step-size law for one rectangle: support and normalised probabilities of
/// eta proportional to [prod over the four updated cells of T'!]^{-1} times the
/// cross odds ratio to the power eta.
struct EtaLaw {
  EtaInterval support;
  std::vector<double> probs;
};

inline EtaLaw fisher_eta_law(const Table& t, const BasisMove& f, const FisherMeasure& mu) {
  const EtaInterval s = eta_support(t, f);
  const double lc = mu.log_cross(f);
  auto lf = [](Count v) { return std::lgamma(static_cast<double>(v) + 1.0); };
  std::vector<double> lw(static_cast<std::size_t>(s.size()));
  double top = -std::numeric_limits<double>::infinity();
  for (Count eta = s.lo; eta <= s.hi; ++eta) {
    double v = -lf(t(f.i1, f.j1) + eta) - lf(t(f.i2, f.j2) + eta) - lf(t(f.i1, f.j2) - eta) - lf(t(f.i2, f.j1) - eta);
    if (eta != 0) v += static_cast<double>(eta) * lc;
    lw[static_cast<std::size_t>(eta - s.lo)] = v;
    top = std::max(top, v);
  }
  double z = 0.0;
  for (double& v : lw) z += (v = std::exp(v - top));
  for (double& v : lw) v /= z;
  return {s, std::move(lw)};
}

inline Count fisher_eta_sample(const Table& t, const BasisMove& f, const FisherMeasure& mu, Rng& rng) {
  const EtaInterval s = eta_support(t, f);
  if (s.lo == s.hi) return s.lo;
  const EtaLaw law = fisher_eta_law(t, f, mu);
  double u = rng.uniform();
  for (std::size_t k = 0; k < law.probs.size(); ++k) {
    u -= law.probs[k];
    if (u < 0.0) return s.lo + static_cast<Count>(k);
  }
  return s.hi;
}

inline Count fisher_eta_sample(const Table& t, const BasisMove& f, const OddsRatios& omega, Rng& rng) {
  return fisher_eta_sample(t, f, FisherMeasure(omega.omega), rng);
}

/// One Markov-basis Gibbs step in place: uniform move, eta from its exact
/// conditional, applied without an accept/reject step.
inline void mb_gibbs_step(Table& t, const MarkovBasis& basis, const FisherMeasure& mu, Rng& rng) {
  if (basis.empty()) throw ConfigError("Markov basis is empty");
  const BasisMove& f = basis[rng.below(basis.size())];
  const Count eta = fisher_eta_sample(t, f, mu, rng);
  if (eta != 0) apply_move_inplace(t, f, eta);
}

inline Table mb_gibbs_step(const Table& t, const MarkovBasis& basis, const OddsRatios& omega, Rng& rng) {
  Table out = t;
  mb_gibbs_step(out, basis, FisherMeasure(omega.omega), rng);
  return out;
}

enum class MarkovProposal { Gibbs, MetropolisHastings };

/// Table conditional for a fixed constraint set: closed-form draws for
/// tractable targets, one Markov-basis transition for doubly constrained ones.
/// Fixed cells are always reproduced.
class ConstrainedTableSampler {
 public:
  explicit ConstrainedTableSampler(ConstraintSet c, MarkovProposal proposal = MarkovProposal::Gibbs)
      : c_(std::move(c)), target_(select_target(c_)), proposal_(proposal), reduced_(reduce_by_fixed_cells(c_).first) {
    if (target_.family == TableFamily::DoublyConstrained) basis_ = generate_basis(c_.rows(), c_.cols(), c_.fixed_cells());
  }

  const ConstraintSet& constraints() const noexcept { return c_; }
  const TableTarget& target() const noexcept { return target_; }
  const MarkovBasis& basis() const noexcept { return basis_; }
  MarkovProposal proposal() const noexcept { return proposal_; }

  /// Initial table: a closed-form draw is not needed for tractable targets, so
  /// every family starts from the deterministic admissible table.
  Table initial() const {
    if (target_.family == TableFamily::Unconstrained) return Table(c_.rows(), c_.cols());
    return initialise_admissible(c_);
  }

  /// Next table given the intensity and the previous table.
  Table draw(const Intensity& lam, const Table& prev, Rng& rng) const {
    Table t = prev;
    draw_inplace(lam, t, rng);
    return t;
  }

  /// Returns whether the table changed (always true for closed-form targets).
  bool draw_inplace(const Intensity& lam, Table& t, Rng& rng) const {
    if (target_.family == TableFamily::DoublyConstrained) {
      if (basis_.empty()) return false;
      const FisherMeasure mu(lam);
      bool moved = true;
      if (proposal_ == MarkovProposal::Gibbs) mb_gibbs_step(t, basis_, mu, rng);
      else moved = mb_mh_step(t, basis_, mu, rng);
      assert(is_admissible(t, c_));
      return moved;
    }
    const RealMatrix w = detail::masked_weights(lam.matrix(), c_.fixed_cells());
    switch (target_.family) {
      case TableFamily::Unconstrained: t = sample_poisson(w, rng); break;
      case TableFamily::TotalConstrained: t = sample_multinomial(w, *reduced_.grand_total(), rng); break;
      default:
        if (target_.transposed) t = sample_product_multinomial(w.transposed(), *reduced_.col_margins(), rng).transposed();
        else t = sample_product_multinomial(w, *reduced_.row_margins(), rng);
    }
    detail::inject_fixed(t, c_);
    assert(is_admissible(t, c_));
    return true;
  }

 private:
  ConstraintSet c_;
  TableTarget target_;
  MarkovProposal proposal_;
  ConstraintSet reduced_;
  MarkovBasis basis_;
};

}  // namespace odmx

#endif  // ODMX_TABLE_SAMPLERS_HPP
