#ifndef ODMX_LATENT_HPP
#define ODMX_LATENT_HPP

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "odmx/errors.hpp"
#include "odmx/intensity.hpp"
#include "odmx/likelihood.hpp"
#include "odmx/rng.hpp"
#include "odmx/table.hpp"

namespace odmx {

enum class NoiseRegime { Low, High, Variable };

inline const char* regime_name(NoiseRegime r) {
  switch (r) {
    case NoiseRegime::Low: return "low";
    case NoiseRegime::High: return "high";
    default: return "variable";
  }
}

/// Everything the continuous conditionals need besides the current state.
struct LatentModel {
  CostMatrix cost;
  Observation obs;
  HarrisWilsonParams hw;
  IntensityFamily family = IntensityFamily::Total;
  /// Intensity total (one value) or row margins, depending on `family`.
  std::vector<double> intensity_constraint;
  TableLikelihoodKind kind = TableLikelihoodKind::GrandTotal;
  std::optional<CellMask> free;
  PoissonGradientForm form = PoissonGradientForm::Poisson;
  bool table_term = true;
  bool obs_term = true;

  std::size_t destinations() const noexcept { return cost.cols(); }
  const CellMask* mask() const { return free ? &*free : nullptr; }

  Intensity intensity(std::span<const double> x, const Theta& th) const {
    return make_intensity(family, x, th, intensity_constraint, cost);
  }
};

/// Log of the x-dependent posterior factors: table likelihood, Gaussian
/// observation term on log y, and -gamma V. Constants in x are dropped.
inline double log_posterior_x(std::span<const double> x, const Theta& th, const RealMatrix& t,
                              const LatentModel& m, double gamma) {
  double lp = -gamma * potential(x, th, m.hw, m.cost);
  if (m.obs_term) {
    const auto& y = m.obs.values();
    if (y.size() != x.size()) throw DimensionError("observation length does not match x");
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double r = std::log(y[j]) - x[j];
      lp -= 0.5 * r * r / (m.hw.sigma_d * m.hw.sigma_d);
    }
  }
  if (m.table_term) lp += table_log_likelihood(t, m.intensity(x, th), m.kind, m.mask());
  return lp;
}

inline std::vector<double> log_posterior_x_gradient(std::span<const double> x, const Theta& th, const RealMatrix& t,
                                                    const LatentModel& m, double gamma) {
  std::vector<double> g = potential_gradient(x, th, m.hw, m.cost);
  for (double& v : g) v *= -gamma;
  if (m.obs_term) {
    const auto& y = m.obs.values();
    for (std::size_t j = 0; j < x.size(); ++j) g[j] += (std::log(y[j]) - x[j]) / (m.hw.sigma_d * m.hw.sigma_d);
  }
  if (m.table_term) {
    const Intensity lam = m.intensity(x, th);
    const auto gt = pullback_x(table_loglik_gradient(t, lam, m.kind, m.mask(), m.form), lam, th, m.family);
    for (std::size_t j = 0; j < x.size(); ++j) g[j] += gt[j];
  }
  return g;
}

/// Differentiable log density for HMC.
template <typename T>
concept HmcTarget = requires(const T& t, std::span<const double> x) {
  { t.log_density(x) } -> std::convertible_to<double>;
  { t.gradient(x) } -> std::convertible_to<std::vector<double>>;
};

/// x-conditional for a frozen theta, gamma and table.
struct XTarget {
  const LatentModel* model;
  Theta theta;
  double gamma;
  RealMatrix table;

  double log_density(std::span<const double> x) const { return log_posterior_x(x, theta, table, *model, gamma); }
  std::vector<double> gradient(std::span<const double> x) const {
    return log_posterior_x_gradient(x, theta, table, *model, gamma);
  }
};

struct HmcStats {
  std::size_t proposals = 0;
  std::size_t accepted = 0;
  std::size_t non_finite = 0;
};

/// One HMC transition with identity mass. H = -log p(x) + |m|^2 / 2; the
/// proposal after `steps` leapfrog steps is accepted with min(1, exp(-dH)).
/// A non-finite Hamiltonian anywhere on the trajectory rejects.
template <HmcTarget T>
bool hmc_step(std::vector<double>& x, std::vector<double>& momentum, const T& target, double step_size,
              std::size_t steps, Rng& rng, HmcStats& stats) {
  const std::size_t n = x.size();
  std::normal_distribution<double> normal;
  momentum.resize(n);
  for (double& v : momentum) v = normal(rng);
  ++stats.proposals;
  const double u = rng.uniform();

  auto kinetic = [](const std::vector<double>& m) {
    double k = 0.0;
    for (double v : m) k += 0.5 * v * v;
    return k;
  };
  double lp0;
  std::vector<double> g;
  try {
    lp0 = target.log_density(x);
    g = target.gradient(x);
  } catch (const NumericError&) {
    lp0 = -std::numeric_limits<double>::infinity();
  } catch (const SupportError&) {
    lp0 = -std::numeric_limits<double>::infinity();
  }
  const double h0 = -lp0 + kinetic(momentum);
  if (steps == 0) {
    ++stats.accepted;
    return true;
  }
  std::vector<double> xn = x, mn = momentum;
  double h1 = std::numeric_limits<double>::infinity();
  try {
    for (std::size_t s = 0; s < steps && std::isfinite(h0); ++s) {
      for (std::size_t j = 0; j < n; ++j) mn[j] += 0.5 * step_size * g[j];
      for (std::size_t j = 0; j < n; ++j) xn[j] += step_size * mn[j];
      g = target.gradient(xn);
      for (std::size_t j = 0; j < n; ++j) mn[j] += 0.5 * step_size * g[j];
    }
    if (std::isfinite(h0)) h1 = -target.log_density(xn) + kinetic(mn);
  } catch (const NumericError&) {
  } catch (const SupportError&) {
  }
  if (!std::isfinite(h1) || !std::isfinite(h0)) {
    ++stats.non_finite;
    return false;
  }
  if (std::log(u) < h0 - h1) {
    x = std::move(xn);
    momentum = std::move(mn);
    ++stats.accepted;
    return true;
  }
  return false;
}

/// Estimate of log Z with the sign of the underlying signed estimator.
struct ZEstimate {
  double log_abs;
  int sign = 1;
};

struct AisSettings {
  std::size_t n_particles = 100;
  std::size_t n_temperatures = 50;
  /// Random-walk proposal scale relative to the reference covariance.
  double proposal_scale = 0.0;  // 0 picks 2.38 / sqrt(dim)
};

/// Annealed importance sampling for Z = integral of exp(log_f), from a
/// Gaussian reference N(mean, P^{-1}) with P = L L^T given by its Cholesky
/// factor. Uniform inverse-temperature ladder with one random-walk
/// Metropolis move per rung.
inline double ais_log_z(const std::function<double(std::span<const double>)>& log_f, std::span<const double> mean,
                        const Eigen::MatrixXd& precision_chol, const AisSettings& s, Rng& rng) {
  if (s.n_particles < 1) throw ConfigError("AIS needs at least one particle");
  if (s.n_temperatures < 2) throw ConfigError("AIS needs at least two temperatures");
  const auto n = static_cast<Eigen::Index>(mean.size());
  const Eigen::Map<const Eigen::VectorXd> mu(mean.data(), n);
  const Eigen::TriangularView<const Eigen::MatrixXd, Eigen::Lower> L(precision_chol);
  double log_det_half = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) log_det_half += std::log(precision_chol(k, k));
  const double log_norm = -0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi) + log_det_half;
  auto log_q = [&](const Eigen::VectorXd& x) {
    const Eigen::VectorXd r = L.transpose() * (x - mu);
    return log_norm - 0.5 * r.squaredNorm();
  };
  // Draws with covariance P^{-1}: solve L^T v = z.
  auto correlated = [&](const Eigen::VectorXd& z) -> Eigen::VectorXd { return L.transpose().solve(z); };
  auto log_f_at = [&](const Eigen::VectorXd& x) {
    try {
      const double v = log_f(std::span<const double>(x.data(), x.size()));
      return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
    } catch (const NumericError&) {
      return -std::numeric_limits<double>::infinity();
    }
  };
  const double scale = s.proposal_scale > 0.0 ? s.proposal_scale : 2.38 / std::sqrt(static_cast<double>(n));
  const std::size_t K = s.n_temperatures;
  std::normal_distribution<double> normal;
  std::vector<double> logw(s.n_particles, 0.0);
  Eigen::VectorXd z(n);
  for (std::size_t p = 0; p < s.n_particles; ++p) {
    for (Eigen::Index k = 0; k < n; ++k) z(k) = normal(rng);
    Eigen::VectorXd x = mu + correlated(z);
    double lf = log_f_at(x), lq = log_q(x);
    double w = 0.0;
    for (std::size_t k = 1; k < K; ++k) {
      const double b0 = static_cast<double>(k - 1) / static_cast<double>(K - 1);
      const double b1 = static_cast<double>(k) / static_cast<double>(K - 1);
      w += (b1 - b0) * (lf - lq);
      if (!std::isfinite(w)) break;
      if (k + 1 == K) break;
      for (Eigen::Index j = 0; j < n; ++j) z(j) = normal(rng);
      const Eigen::VectorXd xp = x + scale * correlated(z);
      const double lfp = log_f_at(xp), lqp = log_q(xp);
      const double log_acc = (1.0 - b1) * (lqp - lq) + b1 * (lfp - lf);
      if (std::log(rng.uniform()) < log_acc) {
        x = xp;
        lf = lfp;
        lq = lqp;
      }
    }
    logw[p] = w;
  }
  // Sorted reduction keeps the result independent of evaluation order.
  std::sort(logw.begin(), logw.end());
  const double top = logw.back();
  if (!std::isfinite(top)) throw DegenerateEstimatorError("all importance weights are zero");
  double sum = 0.0;
  for (double v : logw) sum += std::exp(v - top);
  return top + std::log(sum) - std::log(static_cast<double>(s.n_particles));
}

/// Cholesky factor of a symmetric matrix, falling back to the diagonal (with
/// entries floored at `floor`) when it is not positive definite.
inline Eigen::MatrixXd precision_cholesky(const RealMatrix& h, double floor) {
  const auto n = static_cast<Eigen::Index>(h.rows());
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = h(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) d(i, i) = std::sqrt(std::max(std::abs(m(i, i)), floor));
  return d;
}

/// Local minimiser of the potential, i.e. a stationary attraction of the
/// origin-constrained dynamics. Damped Newton with backtracking; the diagonal
/// of the cost term stands in for the Hessian where it is not positive definite.
inline std::vector<double> minimise_potential(const Theta& th, const HarrisWilsonParams& hw, const CostMatrix& c,
                                              double tol = 1e-10, std::size_t max_iter = 500) {
  const std::size_t J = c.cols();
  double o = 0.0;
  for (double v : hw.origin_demand) o += v;
  std::vector<double> x(J, std::log((o / static_cast<double>(J) + hw.delta + 1e-12) / hw.kappa));
  double v = potential(x, th, hw, c);
  for (std::size_t it = 0; it < max_iter; ++it) {
    const auto g = potential_gradient(x, th, hw, c);
    double gmax = 0.0;
    for (double a : g) gmax = std::max(gmax, std::abs(a));
    if (gmax < tol * std::max(1.0, o)) return x;
    const RealMatrix h = potential_hessian(x, th, hw, c);
    Eigen::MatrixXd hm(J, J);
    Eigen::VectorXd gv(J);
    for (std::size_t i = 0; i < J; ++i) {
      gv(static_cast<Eigen::Index>(i)) = g[i];
      for (std::size_t j = 0; j < J; ++j) hm(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = h(i, j);
    }
    Eigen::VectorXd step;
    Eigen::LLT<Eigen::MatrixXd> llt(hm);
    if (llt.info() == Eigen::Success) {
      step = -llt.solve(gv);
    } else {
      step.resize(J);
      for (std::size_t j = 0; j < J; ++j)
        step(static_cast<Eigen::Index>(j)) = -g[j] / (hw.epsilon * hw.kappa * std::exp(x[j]) + 1e-12);
    }
    double t = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      std::vector<double> xn(J);
      for (std::size_t j = 0; j < J; ++j) xn[j] = x[j] + t * step(static_cast<Eigen::Index>(j));
      double vn;
      try {
        vn = potential(xn, th, hw, c);
      } catch (const NumericError&) {
        continue;
      }
      if (vn <= v + 1e-4 * t * gv.dot(step)) {
        x = std::move(xn);
        v = vn;
        moved = true;
        break;
      }
    }
    if (!moved) return x;
  }
  return x;
}

/// Source of log Z(theta, gamma) estimates for the theta and gamma updates.
class ZEstimator {
 public:
  virtual ~ZEstimator() = default;
  virtual ZEstimate estimate(const Theta& th, double gamma, Rng& rng) const = 0;
};

/// Fixed value; switches the Z ratio off in tests.
class ConstantZEstimator final : public ZEstimator {
 public:
  explicit ConstantZEstimator(double log_z = 0.0) : log_z_(log_z) {}
  ZEstimate estimate(const Theta&, double, Rng&) const override { return {log_z_, 1}; }

 private:
  double log_z_;
};

/// Plain AIS for Z(theta) = integral exp(-gamma V_theta(x)) dx, starting from
/// the Laplace approximation at the minimiser of V.
class AisZEstimator : public ZEstimator {
 public:
  AisZEstimator(CostMatrix cost, HarrisWilsonParams hw, AisSettings settings)
      : cost_(std::move(cost)), hw_(std::move(hw)), settings_(settings) {}

  ZEstimate estimate(const Theta& th, double gamma, Rng& rng) const override {
    return {single(th, gamma, rng), 1};
  }

  double single(const Theta& th, double gamma, Rng& rng) const {
    const std::vector<double> centre = minimise_potential(th, hw_, cost_);
    RealMatrix h = potential_hessian(centre, th, hw_, cost_);
    for (double& v : h.flat()) v *= gamma;
    const Eigen::MatrixXd chol = precision_cholesky(h, 1e-8);
    auto log_f = [&](std::span<const double> x) { return -gamma * potential(x, th, hw_, cost_); };
    return ais_log_z(log_f, centre, chol, settings_, rng);
  }

 protected:
  CostMatrix cost_;
  HarrisWilsonParams hw_;
  AisSettings settings_;
};

/// Signed estimator: an unbiased estimate of 1/Z from independent AIS runs
/// via a geometric series truncated by Russian roulette,
///   1/Z = (1/c) sum_n prod_{k<=n} (1 - Z_k / c),  c = 2 Z_0,
/// where Z_0 is an independent pilot run. Term n is kept with probability
/// q^n and reweighted by q^-n. The reported log_abs is -log|estimate of 1/Z|.
class DebiasedZEstimator final : public AisZEstimator {
 public:
  DebiasedZEstimator(CostMatrix cost, HarrisWilsonParams hw, AisSettings settings, double continue_prob = 0.7,
                     std::size_t max_terms = 64)
      : AisZEstimator(std::move(cost), std::move(hw), settings), q_(continue_prob), max_terms_(max_terms) {
    if (!(q_ > 0.0 && q_ < 1.0)) throw ConfigError("roulette continuation probability must be in (0,1)");
  }

  ZEstimate estimate(const Theta& th, double gamma, Rng& rng) const override {
    const double log_c = std::log(2.0) + single(th, gamma, rng);
    double series = 1.0;  // in units of 1/c
    double prod = 1.0;
    for (std::size_t n = 1; n <= max_terms_; ++n) {
      if (rng.uniform() >= q_) break;
      const double zk_over_c = std::exp(single(th, gamma, rng) - log_c);
      prod *= (1.0 - zk_over_c) / q_;
      series += prod;
    }
    if (series == 0.0 || !std::isfinite(series)) throw DegenerateEstimatorError("signed estimator is zero or non-finite");
    return {log_c - std::log(std::abs(series)), series > 0.0 ? 1 : -1};
  }

 private:
  double q_;
  std::size_t max_terms_;
};

}  // namespace odmx

#endif  // ODMX_LATENT_HPP
