#ifndef ODMX_LIKELIHOOD_HPP
#define ODMX_LIKELIHOOD_HPP

#include <cmath>
#include <span>
#include <vector>

#include "odmx/errors.hpp"
#include "odmx/intensity.hpp"
#include "odmx/matrix.hpp"
#include "odmx/table.hpp"

namespace odmx {

/// Which table statistics are conditioned on when scoring a table against an
/// intensity.
enum class TableLikelihoodKind { Unconstrained, GrandTotal, RowMargins, ColMargins, Doubly };

/// Unconstrained gradient form. Poisson is the derivative of the Poisson
/// log-pmf; AsPrinted uses T/Lambda - Lambda_{i+}, which is not the gradient
/// of any of the kernels here and is kept for comparison only.
enum class PoissonGradientForm { Poisson, AsPrinted };

namespace detail {

inline bool is_free(const CellMask* mask, std::size_t i, std::size_t j) { return mask == nullptr || (*mask)(i, j) != 0; }

inline void check_lik_inputs(const RealMatrix& t, const Intensity& lam, const CellMask* mask) {
  require_same_shape(t, lam.matrix(), "table vs intensity");
  if (mask != nullptr) require_same_shape(t, *mask, "table vs free mask");
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j)
      if (is_free(mask, i, j) && t(i, j) > 0.0 && !(lam(i, j) > 0.0))
        throw SupportError("table has mass at a cell where the intensity is zero");
}

/// Row, column and total sums over free cells only.
struct FreeSums {
  std::vector<double> row, col;
  double total = 0.0;
};

inline FreeSums free_sums(const RealMatrix& m, const CellMask* mask) {
  FreeSums s{std::vector<double>(m.rows(), 0.0), std::vector<double>(m.cols(), 0.0), 0.0};
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j)
      if (is_free(mask, i, j)) {
        s.row[i] += m(i, j);
        s.col[j] += m(i, j);
        s.total += m(i, j);
      }
  return s;
}

inline double xlogy(double x, double y) { return x == 0.0 ? 0.0 : x * std::log(y); }
inline double ratio(double x, double y) { return x == 0.0 ? 0.0 : x / y; }

}  // namespace detail

/// Log-probability of a table under the distribution induced by the chosen
/// conditioning: Poisson, Multinomial, product Multinomial over rows or
/// columns, or the product Multinomial approximation of Fisher's noncentral
/// hypergeometric law (columns drawn with probabilities omega_{.j}/omega_{+j}).
/// Only free cells enter; margins and totals are restricted to them.
inline double table_log_likelihood(const RealMatrix& t, const Intensity& lam, TableLikelihoodKind kind,
                                   const CellMask* free = nullptr) {
  detail::check_lik_inputs(t, lam, free);
  const std::size_t I = t.rows(), J = t.cols();
  const auto ts = detail::free_sums(t, free);
  double coeff = 0.0;
  for (std::size_t i = 0; i < I; ++i)
    for (std::size_t j = 0; j < J; ++j)
      if (detail::is_free(free, i, j)) coeff -= std::lgamma(t(i, j) + 1.0);

  double ll = 0.0;
  switch (kind) {
    case TableLikelihoodKind::Unconstrained:
      for (std::size_t i = 0; i < I; ++i)
        for (std::size_t j = 0; j < J; ++j)
          if (detail::is_free(free, i, j)) ll += detail::xlogy(t(i, j), lam(i, j)) - lam(i, j);
      return ll + coeff;
    case TableLikelihoodKind::GrandTotal: {
      const auto ls = detail::free_sums(lam.matrix(), free);
      for (std::size_t i = 0; i < I; ++i)
        for (std::size_t j = 0; j < J; ++j)
          if (detail::is_free(free, i, j)) ll += detail::xlogy(t(i, j), lam(i, j) / ls.total);
      return ll + coeff + std::lgamma(ts.total + 1.0);
    }
    case TableLikelihoodKind::RowMargins: {
      const auto ls = detail::free_sums(lam.matrix(), free);
      for (std::size_t i = 0; i < I; ++i) {
        for (std::size_t j = 0; j < J; ++j)
          if (detail::is_free(free, i, j)) ll += detail::xlogy(t(i, j), lam(i, j) / ls.row[i]);
        ll += std::lgamma(ts.row[i] + 1.0);
      }
      return ll + coeff;
    }
    case TableLikelihoodKind::ColMargins: {
      const auto ls = detail::free_sums(lam.matrix(), free);
      for (std::size_t j = 0; j < J; ++j) {
        for (std::size_t i = 0; i < I; ++i)
          if (detail::is_free(free, i, j)) ll += detail::xlogy(t(i, j), lam(i, j) / ls.col[j]);
        ll += std::lgamma(ts.col[j] + 1.0);
      }
      return ll + coeff;
    }
    case TableLikelihoodKind::Doubly: {
      const RealMatrix omega = odds_ratios(lam).omega;
      const auto os = detail::free_sums(omega, free);
      for (std::size_t j = 0; j < J; ++j) {
        for (std::size_t i = 0; i < I; ++i)
          if (detail::is_free(free, i, j)) ll += detail::xlogy(t(i, j), omega(i, j) / os.col[j]);
        ll += std::lgamma(ts.col[j] + 1.0);
      }
      return ll + coeff;
    }
  }
  return ll;
}

inline double table_log_likelihood(const Table& t, const Intensity& lam, TableLikelihoodKind kind,
                                   const CellMask* free = nullptr) {
  return table_log_likelihood(t.as_real(), lam, kind, free);
}

/// Jacobian of the odds ratios, d omega_km / d Lambda_ij, as an (IJ) x (IJ)
/// matrix with row index k*J+m and column index i*J+j.
inline RealMatrix odds_ratio_jacobian(const Intensity& lam) {
  const RealMatrix omega = odds_ratios(lam).omega;
  const std::size_t I = lam.rows(), J = lam.cols();
  RealMatrix d(I * J, I * J, 0.0);
  for (std::size_t k = 0; k < I; ++k)
    for (std::size_t m = 0; m < J; ++m)
      for (std::size_t i = 0; i < I; ++i)
        for (std::size_t j = 0; j < J; ++j) {
          double v = 1.0 / lam.total();
          if (k == i && m == j) v += 1.0 / lam(i, j);
          if (k == i) v -= 1.0 / lam.row_sums()[i];
          if (m == j) v -= 1.0 / lam.col_sums()[j];
          d(k * J + m, i * J + j) = omega(k, m) * v;
        }
  return d;
}

/// Gradient of table_log_likelihood with respect to the intensity cells.
/// Fixed cells get zero. For the unconstrained kind `form` selects the Poisson
/// derivative or the as-printed variant.
inline RealMatrix table_loglik_gradient(const RealMatrix& t, const Intensity& lam, TableLikelihoodKind kind,
                                        const CellMask* free = nullptr,
                                        PoissonGradientForm form = PoissonGradientForm::Poisson) {
  detail::check_lik_inputs(t, lam, free);
  const std::size_t I = t.rows(), J = t.cols();
  RealMatrix g(I, J, 0.0);
  const auto ts = detail::free_sums(t, free);
  const auto ls = detail::free_sums(lam.matrix(), free);
  switch (kind) {
    case TableLikelihoodKind::Unconstrained:
      for (std::size_t i = 0; i < I; ++i)
        for (std::size_t j = 0; j < J; ++j)
          if (detail::is_free(free, i, j))
            g(i, j) = detail::ratio(t(i, j), lam(i, j)) -
                      (form == PoissonGradientForm::Poisson ? 1.0 : lam.row_sums()[i]);
      return g;
    case TableLikelihoodKind::GrandTotal:
      for (std::size_t i = 0; i < I; ++i)
        for (std::size_t j = 0; j < J; ++j)
          if (detail::is_free(free, i, j)) g(i, j) = detail::ratio(t(i, j), lam(i, j)) - ts.total / ls.total;
      return g;
    case TableLikelihoodKind::RowMargins:
      for (std::size_t i = 0; i < I; ++i)
        for (std::size_t j = 0; j < J; ++j)
          if (detail::is_free(free, i, j))
            g(i, j) = detail::ratio(t(i, j), lam(i, j)) - detail::ratio(ts.row[i], ls.row[i]);
      return g;
    case TableLikelihoodKind::ColMargins:
      for (std::size_t i = 0; i < I; ++i)
        for (std::size_t j = 0; j < J; ++j)
          if (detail::is_free(free, i, j))
            g(i, j) = detail::ratio(t(i, j), lam(i, j)) - detail::ratio(ts.col[j], ls.col[j]);
      return g;
    case TableLikelihoodKind::Doubly: {
      // dL/domega, then the chain rule through omega(Lambda) written out with
      // H = dL/domega * omega so that no IJ x IJ Jacobian is formed.
      const RealMatrix omega = odds_ratios(lam).omega;
      const auto os = detail::free_sums(omega, free);
      RealMatrix h(I, J, 0.0);
      for (std::size_t i = 0; i < I; ++i)
        for (std::size_t j = 0; j < J; ++j)
          if (detail::is_free(free, i, j))
            h(i, j) = t(i, j) - omega(i, j) * detail::ratio(ts.col[j], os.col[j]);
      const auto hr = h.row_sums();
      const auto hc = h.col_sums();
      const double ht = h.sum();
      for (std::size_t i = 0; i < I; ++i)
        for (std::size_t j = 0; j < J; ++j)
          g(i, j) = detail::ratio(h(i, j), lam(i, j)) + ht / lam.total() - hr[i] / lam.row_sums()[i] -
                    hc[j] / lam.col_sums()[j];
      return g;
    }
  }
  return g;
}

inline RealMatrix table_loglik_gradient(const Table& t, const Intensity& lam, TableLikelihoodKind kind,
                                        const CellMask* free = nullptr,
                                        PoissonGradientForm form = PoissonGradientForm::Poisson) {
  return table_loglik_gradient(t.as_real(), lam, kind, free, form);
}

/// d Lambda_ij / d x_m as an (IJ) x J matrix (row index i*J+j).
inline RealMatrix intensity_jacobian(const Intensity& lam, const Theta& th, IntensityFamily family) {
  const std::size_t I = lam.rows(), J = lam.cols();
  RealMatrix d(I * J, J, 0.0);
  for (std::size_t i = 0; i < I; ++i)
    for (std::size_t j = 0; j < J; ++j)
      for (std::size_t m = 0; m < J; ++m) {
        const double share = family == IntensityFamily::Total ? detail::ratio(lam.col_sums()[m], lam.total())
                                                              : detail::ratio(lam(i, m), lam.row_sums()[i]);
        d(i * J + j, m) = th.alpha * lam(i, j) * ((j == m ? 1.0 : 0.0) - share);
      }
  return d;
}

/// Contracts dL/dLambda with the intensity Jacobian without materialising it.
inline std::vector<double> pullback_x(const RealMatrix& g, const Intensity& lam, const Theta& th,
                                      IntensityFamily family) {
  require_same_shape(g, lam.matrix(), "gradient vs intensity");
  const std::size_t I = lam.rows(), J = lam.cols();
  std::vector<double> out(J, 0.0);
  if (family == IntensityFamily::Total) {
    double s = 0.0;
    for (std::size_t i = 0; i < I; ++i)
      for (std::size_t j = 0; j < J; ++j) {
        out[j] += g(i, j) * lam(i, j);
        s += g(i, j) * lam(i, j);
      }
    for (std::size_t m = 0; m < J; ++m) out[m] = th.alpha * (out[m] - detail::ratio(lam.col_sums()[m], lam.total()) * s);
    return out;
  }
  for (std::size_t i = 0; i < I; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < J; ++j) s += g(i, j) * lam(i, j);
    for (std::size_t m = 0; m < J; ++m)
      out[m] += th.alpha * (g(i, m) * lam(i, m) - detail::ratio(lam(i, m), lam.row_sums()[i]) * s);
  }
  return out;
}

/// Total derivative of the table log-likelihood with respect to x through the
/// intensity family. `constraint` holds the intensity total (one value) or the
/// row margins.
inline std::vector<double> chain_gradient_x(const RealMatrix& t, std::span<const double> x, const Theta& th,
                                            const CostMatrix& c, TableLikelihoodKind kind, IntensityFamily family,
                                            std::span<const double> constraint, const CellMask* free = nullptr,
                                            PoissonGradientForm form = PoissonGradientForm::Poisson) {
  const Intensity lam = make_intensity(family, x, th, constraint, c);
  return pullback_x(table_loglik_gradient(t, lam, kind, free, form), lam, th, family);
}

}  // namespace odmx

#endif  // ODMX_LIKELIHOOD_HPP
