#ifndef ODMX_ALGORITHMS_HPP
#define ODMX_ALGORITHMS_HPP

#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "odmx/errors.hpp"
#include "odmx/exact_oracle.hpp"
#include "odmx/intensity.hpp"
#include "odmx/latent.hpp"
#include "odmx/likelihood.hpp"
#include "odmx/rng.hpp"
#include "odmx/table.hpp"
#include "odmx/table_samplers.hpp"

namespace odmx {

struct HmcSettings {
  std::size_t leapfrog_steps = 10;
  double step_size = 0.01;
  double target_accept = 0.95;
  bool adapt = true;
};

struct RandomWalkSettings {
  double std_alpha = 0.05;
  double std_beta = 0.05;
  double std_log_gamma = 0.2;
  double target_accept = 0.4;
  bool adapt = true;
};

struct PriorBox {
  double alpha_lo = 0.0, alpha_hi = 2.0;
  double beta_lo = 0.0, beta_hi = 2.0;
  /// Range of the log-uniform hyperprior on gamma (variable regime).
  double gamma_lo = 1e2, gamma_hi = 1e4;

  bool contains(const Theta& th) const noexcept {
    return th.alpha >= alpha_lo && th.alpha <= alpha_hi && th.beta >= beta_lo && th.beta <= beta_hi;
  }
};

struct SamplerConfig {
  std::size_t n_steps = 1000;
  std::size_t burn_in = 0;
  std::size_t thinning = 1;
  HmcSettings hmc;
  RandomWalkSettings rw;
  AisSettings ais;
  NoiseRegime regime = NoiseRegime::Low;
  double gamma_low = 1e4;
  double gamma_high = 1e2;
  double roulette_continue = 0.7;
  PriorBox prior;
  MarkovProposal table_proposal = MarkovProposal::Gibbs;
  double min_sign_fraction = 0.75;
  Theta theta0{1.0, 1.0};
  std::optional<std::vector<double>> x0;
  bool update_x = true;
  bool update_theta = true;
  bool update_table = true;
  std::uint64_t seed = 1;

  void validate() const {
    if (n_steps <= burn_in) throw ConfigError("n_steps must exceed burn_in");
    if (thinning < 1) throw ConfigError("thinning must be >= 1");
    if (!(hmc.step_size > 0.0)) throw ConfigError("HMC step size must be > 0");
    if (!(rw.std_alpha >= 0.0 && rw.std_beta >= 0.0 && rw.std_log_gamma >= 0.0))
      throw ConfigError("random-walk standard deviations must be >= 0");
    if (!(gamma_low > 0.0 && gamma_high > 0.0)) throw ConfigError("gamma values must be > 0");
    if (!(prior.alpha_lo <= prior.alpha_hi && prior.beta_lo <= prior.beta_hi)) throw ConfigError("empty prior box");
    if (!(prior.gamma_lo > 0.0 && prior.gamma_lo <= prior.gamma_hi)) throw ConfigError("bad gamma prior range");
    if (ais.n_particles < 1 || ais.n_temperatures < 2) throw ConfigError("AIS needs >= 1 particle and >= 2 temperatures");
    if (!prior.contains(theta0)) throw ConfigError("initial theta lies outside the prior box");
  }

  double initial_gamma() const {
    switch (regime) {
      case NoiseRegime::Low: return gamma_low;
      case NoiseRegime::High: return gamma_high;
      default: return std::sqrt(prior.gamma_lo * prior.gamma_hi);
    }
  }
};

struct ChainState {
  std::vector<double> x;
  std::vector<double> momentum;
  Theta theta;
  double gamma = 1.0;
  Table table;
  int sign = 1;
  double log_z_est = 0.0;
  std::size_t step = 0;
};

struct TraceMeta {
  std::size_t burn_in = 0;
  std::size_t thinning = 1;
  std::uint64_t seed = 0;
  std::size_t chain = 0;
  std::string constraint_signature;
};

/// Post-burn-in, thinned samples of one chain.
struct SampleTrace {
  std::vector<std::size_t> steps;
  std::vector<Table> tables;
  std::vector<std::vector<double>> xs;
  std::vector<Theta> thetas;
  std::vector<double> gammas;
  std::vector<int> signs;
  TraceMeta meta;

  std::size_t size() const noexcept { return tables.size(); }
};

struct ChainDiagnostics {
  HmcStats hmc;
  HmcStats hmc_post;
  std::size_t theta_proposals = 0, theta_accepted = 0;
  std::size_t theta_proposals_post = 0, theta_accepted_post = 0;
  std::size_t gamma_proposals = 0, gamma_accepted = 0;
  std::size_t estimator_failures = 0;
  std::size_t out_of_box = 0;
  std::size_t table_moves = 0, table_updates = 0;
  std::size_t emitted = 0, positive_signs = 0;
  double final_step_size = 0.0;
  double final_std_alpha = 0.0, final_std_beta = 0.0;
  std::size_t basis_size = 0;
  std::string family;
  double seconds = 0.0;

  double x_acceptance() const { return hmc_post.proposals ? double(hmc_post.accepted) / double(hmc_post.proposals) : 0.0; }
  double theta_acceptance() const {
    return theta_proposals_post ? double(theta_accepted_post) / double(theta_proposals_post) : 0.0;
  }
  double sign_fraction() const { return emitted ? double(positive_signs) / double(emitted) : 1.0; }
};

/// Receives every emitted (post-burn-in, thinned) state.
class SampleSink {
 public:
  virtual ~SampleSink() = default;
  virtual void emit(const ChainState& s) = 0;
};

class TraceSink final : public SampleSink {
 public:
  explicit TraceSink(SampleTrace& trace) : trace_(trace) {}
  void emit(const ChainState& s) override {
    trace_.steps.push_back(s.step);
    trace_.tables.push_back(s.table);
    trace_.xs.push_back(s.x);
    trace_.thetas.push_back(s.theta);
    trace_.gammas.push_back(s.gamma);
    trace_.signs.push_back(s.sign);
  }

 private:
  SampleTrace& trace_;
};

/// Model inputs shared by all chains.
struct Dataset {
  CostMatrix cost;
  Observation obs;
  HarrisWilsonParams hw;
  IntensityFamily family = IntensityFamily::Total;
  /// Intensity total or row margins; empty derives it from the constraints.
  std::vector<double> intensity_constraint;
};

/// Intensity normalisation: explicit values, then intensity constraints, then
/// table constraints, then origin demand.
inline std::vector<double> resolve_intensity_constraint(const Dataset& d, const ConstraintSet& c) {
  if (!d.intensity_constraint.empty()) return d.intensity_constraint;
  if (d.family == IntensityFamily::Total) {
    if (auto v = c.intensity_total()) return {*v};
    if (auto v = c.implied_total()) return {static_cast<double>(*v)};
    double s = 0.0;
    for (double o : d.hw.origin_demand) s += o;
    return {s};
  }
  if (const auto* r = c.intensity_row_margins()) return *r;
  if (const auto* r = c.row_margins()) return std::vector<double>(r->begin(), r->end());
  return d.hw.origin_demand;
}

inline std::string constraint_signature(const ConstraintSet& c) {
  std::string s;
  for (const auto& tc : c.table_constraints()) {
    if (!s.empty()) s += "+";
    s += statistic_name(tc.statistic);
  }
  return s.empty() ? "none" : s;
}

namespace detail {

inline void adapt_log(double& value, double accept, double target, std::size_t n) {
  value *= std::exp((accept - target) / std::sqrt(static_cast<double>(n) + 10.0));
}

}  // namespace detail

/// Runs one chain of the joint sampler: HMC for x, random-walk MH for theta
/// (and log gamma in the variable regime), then the table conditional. Step
/// size and random-walk scales adapt during burn-in only.
inline ChainDiagnostics run_chain(const Dataset& data, const ConstraintSet& c, const SamplerConfig& cfg,
                                  std::size_t chain_id, SampleSink& sink) {
  cfg.validate();
  data.hw.validate();
  const auto started = std::chrono::steady_clock::now();
  const ConstrainedTableSampler tables(c, cfg.table_proposal);
  const TableTarget& target = tables.target();
  const std::size_t J = data.cost.cols();
  if (data.obs.size() != J) throw DimensionError("observation length does not match cost matrix columns");
  if (c.rows() != data.cost.rows() || c.cols() != J) throw DimensionError("constraints do not match cost matrix");

  ChainDiagnostics diag;
  diag.family = family_name(target.family);
  diag.basis_size = tables.basis().size();
  if (target.family == TableFamily::DoublyConstrained && tables.basis().empty()) {
    bool unique = false;
    try {
      unique = enumerate_fiber(c, 2).tables.size() <= 1;
    } catch (const FiberTooLargeError&) {
    }
    if (!unique) throw ConfigError("Markov basis is empty but the fiber has more than one table");
  }

  LatentModel model{data.cost,
                    data.obs,
                    data.hw,
                    data.family,
                    resolve_intensity_constraint(data, c),
                    likelihood_kind(target),
                    c.has_fixed_cells() ? std::optional<CellMask>(c.free_mask()) : std::nullopt};

  std::unique_ptr<ZEstimator> estimator;
  if (cfg.regime == NoiseRegime::Low)
    estimator = std::make_unique<AisZEstimator>(data.cost, data.hw, cfg.ais);
  else
    estimator = std::make_unique<DebiasedZEstimator>(data.cost, data.hw, cfg.ais, cfg.roulette_continue);

  Rng rng(stream_seed(cfg.seed, {chain_id}));
  ChainState s;
  s.x = cfg.x0 ? *cfg.x0 : data.obs.log_values();
  if (s.x.size() != J) throw DimensionError("initial x has the wrong length");
  s.theta = cfg.theta0;
  s.gamma = cfg.initial_gamma();
  s.table = tables.initial();
  if (cfg.update_theta || cfg.regime == NoiseRegime::Variable) {
    const ZEstimate z = estimator->estimate(s.theta, s.gamma, rng);
    s.log_z_est = z.log_abs;
    s.sign = z.sign;
  }

  double step_size = cfg.hmc.step_size;
  double std_a = cfg.rw.std_alpha, std_b = cfg.rw.std_beta;
  std::normal_distribution<double> normal;

  // Theta- and gamma-dependent part of the joint log density at fixed x, T.
  auto log_joint = [&](const Theta& th, double gamma) {
    double v = -gamma * potential(s.x, th, model.hw, model.cost);
    if (model.table_term) v += table_log_likelihood(s.table.as_real(), model.intensity(s.x, th), model.kind, model.mask());
    return v;
  };

  for (std::size_t step = 0; step < cfg.n_steps; ++step) {
    s.step = step;
    const bool burning = step < cfg.burn_in;

    if (cfg.update_x) {
      XTarget xt{&model, s.theta, s.gamma, s.table.as_real()};
      const bool ok = hmc_step(s.x, s.momentum, xt, step_size, cfg.hmc.leapfrog_steps, rng, diag.hmc);
      if (!burning) {
        ++diag.hmc_post.proposals;
        diag.hmc_post.accepted += ok ? 1 : 0;
      }
      if (burning && cfg.hmc.adapt) detail::adapt_log(step_size, ok ? 1.0 : 0.0, cfg.hmc.target_accept, step);
    }

    if (cfg.update_theta) {
      const Theta prop{s.theta.alpha + std_a * normal(rng), s.theta.beta + std_b * normal(rng)};
      ++diag.theta_proposals;
      if (!burning) ++diag.theta_proposals_post;
      bool ok = false;
      if (!cfg.prior.contains(prop)) {
        ++diag.out_of_box;
      } else {
        try {
          const ZEstimate z = estimator->estimate(prop, s.gamma, rng);
          const double lr = log_joint(prop, s.gamma) - log_joint(s.theta, s.gamma) + s.log_z_est - z.log_abs;
          if (std::log(rng.uniform()) < lr) {
            s.theta = prop;
            s.log_z_est = z.log_abs;
            s.sign = z.sign;
            ok = true;
          }
        } catch (const DegenerateEstimatorError&) {
          ++diag.estimator_failures;
        } catch (const NumericError&) {
          ++diag.estimator_failures;
        } catch (const SingularError&) {
          ++diag.estimator_failures;
        }
      }
      if (ok) {
        ++diag.theta_accepted;
        if (!burning) ++diag.theta_accepted_post;
      }
      if (burning && cfg.rw.adapt) {
        detail::adapt_log(std_a, ok ? 1.0 : 0.0, cfg.rw.target_accept, step);
        detail::adapt_log(std_b, ok ? 1.0 : 0.0, cfg.rw.target_accept, step);
      }
    }

    if (cfg.regime == NoiseRegime::Variable) {
      const double lg = std::log(s.gamma) + cfg.rw.std_log_gamma * normal(rng);
      const double gp = std::exp(lg);
      ++diag.gamma_proposals;
      if (gp >= cfg.prior.gamma_lo && gp <= cfg.prior.gamma_hi) {
        try {
          const ZEstimate z = estimator->estimate(s.theta, gp, rng);
          const double lr = log_joint(s.theta, gp) - log_joint(s.theta, s.gamma) + s.log_z_est - z.log_abs;
          if (std::log(rng.uniform()) < lr) {
            s.gamma = gp;
            s.log_z_est = z.log_abs;
            s.sign = z.sign;
            ++diag.gamma_accepted;
          }
        } catch (const DegenerateEstimatorError&) {
          ++diag.estimator_failures;
        } catch (const NumericError&) {
          ++diag.estimator_failures;
        }
      }
    }

    if (cfg.update_table) {
      const Intensity lam = model.intensity(s.x, s.theta);
      diag.table_moves += tables.draw_inplace(lam, s.table, rng) ? 1 : 0;
      ++diag.table_updates;
    }

    if (!burning && (step - cfg.burn_in) % cfg.thinning == 0) {
      sink.emit(s);
      ++diag.emitted;
      diag.positive_signs += s.sign > 0 ? 1 : 0;
    }
  }
  diag.final_step_size = step_size;
  diag.final_std_alpha = std_a;
  diag.final_std_beta = std_b;
  diag.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  if (cfg.regime != NoiseRegime::Low && diag.sign_fraction() < cfg.min_sign_fraction)
    throw SignFractionError("positive-sign fraction " + std::to_string(diag.sign_fraction()) + " is below " +
                            std::to_string(cfg.min_sign_fraction));
  return diag;
}

struct ChainResult {
  SampleTrace trace;
  ChainDiagnostics diagnostics;
};

inline ChainResult run_into_trace(const Dataset& data, const ConstraintSet& c, const SamplerConfig& cfg,
                                  std::size_t chain_id) {
  ChainResult r;
  r.trace.meta = {cfg.burn_in, cfg.thinning, cfg.seed, chain_id, constraint_signature(c)};
  TraceSink sink(r.trace);
  r.diagnostics = run_chain(data, c, cfg, chain_id, sink);
  return r;
}

/// Joint sampler with closed-form table draws.
inline ChainResult run_algorithm_1(const Dataset& data, const ConstraintSet& c, const SamplerConfig& cfg,
                                   std::size_t chain_id = 0) {
  if (!select_target(c).tractable()) throw ConfigError("constraint set is not tractable; use the Markov basis sampler");
  return run_into_trace(data, c, cfg, chain_id);
}

/// Joint sampler with one Markov-basis transition per step.
inline ChainResult run_algorithm_2(const Dataset& data, const ConstraintSet& c, const SamplerConfig& cfg,
                                   std::size_t chain_id = 0) {
  if (select_target(c).tractable()) throw ConfigError("the Markov basis sampler needs both margins");
  return run_into_trace(data, c, cfg, chain_id);
}

/// Sum sign * phi / sum sign over the trace.
inline std::vector<double> signed_posterior_mean(std::span<const int> signs,
                                                 const std::vector<std::vector<double>>& phi) {
  if (signs.size() != phi.size()) throw DimensionError("signs and values differ in length");
  if (phi.empty()) throw DegenerateEstimatorError("empty trace");
  double ws = 0.0;
  std::vector<double> acc(phi.front().size(), 0.0);
  for (std::size_t k = 0; k < phi.size(); ++k) {
    if (phi[k].size() != acc.size()) throw DimensionError("ragged values");
    ws += signs[k];
    for (std::size_t d = 0; d < acc.size(); ++d) acc[d] += signs[k] * phi[k][d];
  }
  if (ws == 0.0) throw DegenerateEstimatorError("signs sum to zero");
  for (double& v : acc) v /= ws;
  return acc;
}

template <typename F>
std::vector<double> signed_posterior_mean(const SampleTrace& trace, F phi) {
  std::vector<std::vector<double>> values;
  values.reserve(trace.size());
  for (std::size_t k = 0; k < trace.size(); ++k) {
    if constexpr (std::is_invocable_v<F, const Table&>) values.push_back(phi(trace.tables[k]));
    else values.push_back(phi(trace.xs[k], trace.thetas[k]));
  }
  return signed_posterior_mean(trace.signs, values);
}

}  // namespace odmx

#endif  // ODMX_ALGORITHMS_HPP
