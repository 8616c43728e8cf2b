#ifndef ODMX_INTENSITY_HPP
#define ODMX_INTENSITY_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "odmx/errors.hpp"
#include "odmx/matrix.hpp"

namespace odmx {

/// Spatial interaction parameters: attractiveness weight and cost deterrence.
struct Theta {
  double alpha = 1.0;
  double beta = 0.0;
  friend bool operator==(const Theta&, const Theta&) = default;
};

/// Harris-Wilson dynamics and observation-noise parameters.
struct HarrisWilsonParams {
  double epsilon = 1.0;
  double kappa = 1.0;
  double delta = 0.0;
  double gamma = 1e4;
  double sigma_d = 0.1;
  std::vector<double> origin_demand;

  void validate() const {
    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!positive(epsilon)) throw ConfigError("epsilon must be > 0");
    if (!positive(kappa)) throw ConfigError("kappa must be > 0");
    if (!(std::isfinite(delta) && delta >= 0.0)) throw ConfigError("delta must be >= 0");
    if (!positive(gamma)) throw ConfigError("gamma must be > 0");
    if (!positive(sigma_d)) throw ConfigError("sigma_d must be > 0");
    for (double o : origin_demand) {
      if (!(std::isfinite(o) && o >= 0.0)) throw ConfigError("origin demand must be >= 0");
    }
  }
};

/// Log destination attraction x = log w.
using LogAttraction = std::vector<double>;

/// Nonnegative travel impedance between origins (rows) and destinations.
class CostMatrix {
 public:
  CostMatrix() = default;
  explicit CostMatrix(RealMatrix c) : c_(std::move(c)) {
    if (c_.rows() < 1 || c_.cols() < 1) throw DimensionError("empty cost matrix");
    for (double v : c_.flat()) {
      if (!(std::isfinite(v) && v >= 0.0)) throw DimensionError("cost matrix entries must be finite and >= 0");
    }
  }
  std::size_t rows() const noexcept { return c_.rows(); }
  std::size_t cols() const noexcept { return c_.cols(); }
  double operator()(std::size_t i, std::size_t j) const { return c_(i, j); }
  const RealMatrix& matrix() const noexcept { return c_; }

 private:
  RealMatrix c_;
};

/// Observed destination attraction (job counts); strictly positive.
class Observation {
 public:
  Observation() = default;
  explicit Observation(std::vector<double> y) : y_(std::move(y)) {
    for (double v : y_) {
      if (!(std::isfinite(v) && v > 0.0)) throw DimensionError("observations must be finite and > 0");
    }
  }
  std::size_t size() const noexcept { return y_.size(); }
  const std::vector<double>& values() const noexcept { return y_; }
  std::vector<double> log_values() const {
    std::vector<double> out(y_.size());
    std::transform(y_.begin(), y_.end(), out.begin(), [](double v) { return std::log(v); });
    return out;
  }

 private:
  std::vector<double> y_;
};

/// Expected trips with margins computed once at construction.
class Intensity {
 public:
  Intensity() = default;
  explicit Intensity(RealMatrix lam) : lam_(std::move(lam)) {
    for (double v : lam_.flat()) {
      if (!(std::isfinite(v) && v >= 0.0)) throw NumericError("intensity cells must be finite and >= 0");
    }
    row_ = lam_.row_sums();
    col_ = lam_.col_sums();
    total_ = std::accumulate(row_.begin(), row_.end(), 0.0);
  }

  std::size_t rows() const noexcept { return lam_.rows(); }
  std::size_t cols() const noexcept { return lam_.cols(); }
  double operator()(std::size_t i, std::size_t j) const { return lam_(i, j); }
  const RealMatrix& matrix() const noexcept { return lam_; }
  const std::vector<double>& row_sums() const noexcept { return row_; }
  const std::vector<double>& col_sums() const noexcept { return col_; }
  double total() const noexcept { return total_; }

 private:
  RealMatrix lam_;
  std::vector<double> row_;
  std::vector<double> col_;
  double total_ = 0.0;
};

struct OddsRatios {
  RealMatrix omega;
};

enum class IntensityFamily { Total, Singly };

namespace detail {

inline void check_sim_dims(std::span<const double> x, const CostMatrix& c) {
  if (x.size() != c.cols()) {
    throw DimensionError("log-attraction has length " + std::to_string(x.size()) + " but cost matrix has " +
                         std::to_string(c.cols()) + " destinations");
  }
}

/// Utility exponent alpha * x_j - beta * c_ij, checked for finiteness.
inline double utility(std::span<const double> x, const Theta& th, const CostMatrix& c, std::size_t i,
                      std::size_t j) {
  const double a = th.alpha * x[j] - th.beta * c(i, j);
  if (!std::isfinite(a)) throw NumericError("non-finite utility exponent");
  return a;
}

}  // namespace detail

/// Totally constrained intensity: cells proportional to exp(alpha x_j - beta c_ij)
/// scaled to the requested total.
inline Intensity intensity_total(std::span<const double> x, const Theta& th, double total, const CostMatrix& c) {
  detail::check_sim_dims(x, c);
  if (!(total > 0.0) || !std::isfinite(total)) throw NumericError("intensity total must be positive");
  const std::size_t I = c.rows(), J = c.cols();
  RealMatrix lam(I, J);
  double shift = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < I; ++i)
    for (std::size_t j = 0; j < J; ++j) shift = std::max(shift, lam(i, j) = detail::utility(x, th, c, i, j));
  double z = 0.0;
  for (double& v : lam.flat()) z += (v = std::exp(v - shift));
  for (double& v : lam.flat()) v = total * v / z;
  return Intensity(std::move(lam));
}

/// Singly (origin) constrained intensity reproducing the given row margins.
inline Intensity intensity_singly(std::span<const double> x, const Theta& th, std::span<const double> row_margins,
                                  const CostMatrix& c) {
  detail::check_sim_dims(x, c);
  if (row_margins.size() != c.rows()) throw DimensionError("row margins length does not match cost matrix rows");
  const std::size_t I = c.rows(), J = c.cols();
  RealMatrix lam(I, J);
  for (std::size_t i = 0; i < I; ++i) {
    if (!(row_margins[i] >= 0.0)) throw NumericError("row margins must be >= 0");
    double shift = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < J; ++j) shift = std::max(shift, lam(i, j) = detail::utility(x, th, c, i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < J; ++j) z += (lam(i, j) = std::exp(lam(i, j) - shift));
    for (std::size_t j = 0; j < J; ++j) lam(i, j) = row_margins[i] * lam(i, j) / z;
  }
  return Intensity(std::move(lam));
}

/// Builds the intensity of the given family; `constraint` is the total (one
/// value) or the row margins.
inline Intensity make_intensity(IntensityFamily family, std::span<const double> x, const Theta& th,
                                std::span<const double> constraint, const CostMatrix& c) {
  if (family == IntensityFamily::Total) {
    if (constraint.size() != 1) throw DimensionError("total intensity needs exactly one constraint value");
    return intensity_total(x, th, constraint[0], c);
  }
  return intensity_singly(x, th, constraint, c);
}

namespace detail {

inline void check_potential_inputs(std::span<const double> x, const Theta& th, const HarrisWilsonParams& hw,
                                   const CostMatrix& c) {
  check_sim_dims(x, c);
  if (!(th.alpha > 0.0)) throw SingularError("the potential divides by alpha; alpha must be > 0");
  if (hw.origin_demand.size() != c.rows()) throw DimensionError("origin demand length does not match cost matrix rows");
}

/// Row-wise softmax of the utilities and the row log-sum-exps.
inline void row_softmax(std::span<const double> x, const Theta& th, const CostMatrix& c, RealMatrix& p,
                        std::vector<double>& lse) {
  const std::size_t I = c.rows(), J = c.cols();
  p = RealMatrix(I, J);
  lse.assign(I, 0.0);
  for (std::size_t i = 0; i < I; ++i) {
    double shift = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < J; ++j) shift = std::max(shift, p(i, j) = utility(x, th, c, i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < J; ++j) z += (p(i, j) = std::exp(p(i, j) - shift));
    for (std::size_t j = 0; j < J; ++j) p(i, j) /= z;
    lse[i] = shift + std::log(z);
  }
}

}  // namespace detail

/// Harris-Wilson potential: utility, cost and additional potentials scaled by
/// epsilon.
inline double potential(std::span<const double> x, const Theta& th, const HarrisWilsonParams& hw,
                        const CostMatrix& c) {
  detail::check_potential_inputs(x, th, hw, c);
  RealMatrix p;
  std::vector<double> lse;
  detail::row_softmax(x, th, c, p, lse);
  double utility = 0.0;
  for (std::size_t i = 0; i < c.rows(); ++i) utility += hw.origin_demand[i] * lse[i];
  double cost = 0.0, additional = 0.0;
  for (double v : x) {
    cost += std::exp(v);
    additional += v;
  }
  return hw.epsilon * (-utility / th.alpha + hw.kappa * cost - hw.delta * additional);
}

inline std::vector<double> potential_gradient(std::span<const double> x, const Theta& th,
                                              const HarrisWilsonParams& hw, const CostMatrix& c) {
  detail::check_potential_inputs(x, th, hw, c);
  RealMatrix p;
  std::vector<double> lse;
  detail::row_softmax(x, th, c, p, lse);
  std::vector<double> g(c.cols());
  for (std::size_t j = 0; j < c.cols(); ++j) {
    double pull = 0.0;
    for (std::size_t i = 0; i < c.rows(); ++i) pull += hw.origin_demand[i] * p(i, j);
    g[j] = hw.epsilon * (-pull + hw.kappa * std::exp(x[j]) - hw.delta);
  }
  return g;
}

/// Hessian of the potential, row-major J x J.
inline RealMatrix potential_hessian(std::span<const double> x, const Theta& th, const HarrisWilsonParams& hw,
                                    const CostMatrix& c) {
  detail::check_potential_inputs(x, th, hw, c);
  RealMatrix p;
  std::vector<double> lse;
  detail::row_softmax(x, th, c, p, lse);
  const std::size_t J = c.cols();
  RealMatrix h(J, J, 0.0);
  for (std::size_t i = 0; i < c.rows(); ++i) {
    const double o = hw.origin_demand[i];
    if (o == 0.0) continue;
    for (std::size_t j = 0; j < J; ++j) {
      h(j, j) -= th.alpha * o * p(i, j);
      for (std::size_t k = 0; k < J; ++k) h(j, k) += th.alpha * o * p(i, j) * p(i, k);
    }
  }
  for (std::size_t j = 0; j < J; ++j) h(j, j) += hw.kappa * std::exp(x[j]);
  for (double& v : h.flat()) v *= hw.epsilon;
  return h;
}

/// Number of agents competing for one job, from summing the equilibrium
/// condition over destinations.
inline double kappa_from(double delta, std::size_t J, double total, std::span<const double> w) {
  const double sw = std::accumulate(w.begin(), w.end(), 0.0);
  if (sw == 0.0) throw SingularError("sum of attractions is zero");
  return (delta * static_cast<double>(J) + total) / sw;
}

/// Smallest job count: the value at which a destination attracts no agents.
inline double delta_from(double kappa, std::span<const double> w) {
  if (w.empty()) throw DimensionError("empty attraction vector");
  return kappa * *std::min_element(w.begin(), w.end());
}

/// Residual of the equilibrium condition, Lambda_{+j} - (kappa w_j - delta),
/// for the intensity family driving the dynamics. Lambda_{++} equals the total
/// origin demand.
inline std::vector<double> stationary_residual(std::span<const double> w, const Theta& th,
                                               const HarrisWilsonParams& hw, const CostMatrix& c,
                                               IntensityFamily family = IntensityFamily::Total) {
  std::vector<double> x(w.size());
  for (std::size_t j = 0; j < w.size(); ++j) {
    if (!(w[j] > 0.0)) throw NumericError("attractions must stay positive");
    x[j] = std::log(w[j]);
  }
  if (hw.origin_demand.size() != c.rows()) throw DimensionError("origin demand length does not match cost matrix rows");
  const double total = std::accumulate(hw.origin_demand.begin(), hw.origin_demand.end(), 0.0);
  const Intensity lam = family == IntensityFamily::Total ? intensity_total(x, th, total, c)
                                                         : intensity_singly(x, th, hw.origin_demand, c);
  std::vector<double> r(w.size());
  for (std::size_t j = 0; j < w.size(); ++j) r[j] = lam.col_sums()[j] - (hw.kappa * w[j] - hw.delta);
  return r;
}

struct StationaryOptions {
  double tol = 1e-9;
  std::size_t max_iter = 1'000'000;
  double dt = 1e-2;
  IntensityFamily family = IntensityFamily::Total;
};

/// Integrates dw_j/dt = epsilon w_j (Lambda_{+j} - kappa w_j + delta) with
/// forward Euler until the equilibrium residual drops below tol in max-norm.
/// Each coordinate's step is capped at half its local stability limit
/// 1 / (epsilon kappa w_j); fixed points are unaffected.
inline std::vector<double> solve_stationary(std::span<const double> w0, const Theta& th,
                                            const HarrisWilsonParams& hw, const CostMatrix& c,
                                            const StationaryOptions& opt = {}) {
  detail::check_sim_dims(w0, c);
  std::vector<double> w(w0.begin(), w0.end());
  for (double v : w)
    if (!(v > 0.0)) throw NumericError("initial attractions must be > 0");
  for (std::size_t it = 0; it < opt.max_iter; ++it) {
    const auto r = stationary_residual(w, th, hw, c, opt.family);
    double worst = 0.0;
    for (double v : r) worst = std::max(worst, std::abs(v));
    if (worst < opt.tol) return w;
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double dt = std::min(opt.dt, 0.5 / (hw.epsilon * hw.kappa * w[j]));
      const double next = w[j] + dt * hw.epsilon * w[j] * r[j];
      // A step that would leave the positive orthant is halved instead.
      w[j] = next > 0.0 ? next : 0.5 * w[j];
    }
  }
  throw IterationLimitError("stationary attraction did not converge", w);
}

/// Odds ratios omega_ij = Lambda_ij Lambda_{++} / (Lambda_{i+} Lambda_{+j}).
inline OddsRatios odds_ratios(const Intensity& lam) {
  for (double v : lam.row_sums())
    if (!(v > 0.0)) throw SingularError("odds ratios need strictly positive row margins");
  for (double v : lam.col_sums())
    if (!(v > 0.0)) throw SingularError("odds ratios need strictly positive column margins");
  RealMatrix omega(lam.rows(), lam.cols());
  for (std::size_t i = 0; i < lam.rows(); ++i)
    for (std::size_t j = 0; j < lam.cols(); ++j)
      omega(i, j) = lam(i, j) * lam.total() / (lam.row_sums()[i] * lam.col_sums()[j]);
  return {std::move(omega)};
}

}  // namespace odmx

#endif  // ODMX_INTENSITY_HPP
