#ifndef ODMX_CONFIG_HPP
#define ODMX_CONFIG_HPP

#include <filesystem>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "odmx/algorithms.hpp"
#include "odmx/errors.hpp"
#include "odmx/io.hpp"
#include "odmx/table.hpp"

namespace odmx {

using json = nlohmann::json;

/// Parsed run configuration with every referenced input loaded.
struct RunConfig {
  json raw;
  fs::path base_dir;
  Dataset data;
  ConstraintSet constraints{1, 1};
  SamplerConfig sampler;
  std::optional<Table> truth;
  std::size_t n_chains = 1;
  fs::path output_dir = "run";
  std::vector<fs::path> inputs;
};

namespace detail {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

inline const json& section(const json& root, const char* key) {
  static const json empty = json::object();
  if (!root.contains(key)) return empty;
  if (!root.at(key).is_object()) throw ConfigError(std::string("config section '") + key + "' must be an object");
  return root.at(key);
}

inline NoiseRegime parse_regime(const std::string& s) {
  if (s == "low") return NoiseRegime::Low;
  if (s == "high") return NoiseRegime::High;
  if (s == "variable") return NoiseRegime::Variable;
  throw ConfigError("unknown noise regime '" + s + "'");
}

inline IntensityFamily parse_family(const std::string& s) {
  if (s == "total") return IntensityFamily::Total;
  if (s == "singly") return IntensityFamily::Singly;
  throw ConfigError("unknown intensity family '" + s + "'");
}

inline MarkovProposal parse_proposal(const std::string& s) {
  if (s == "gibbs") return MarkovProposal::Gibbs;
  if (s == "mh") return MarkovProposal::MetropolisHastings;
  throw ConfigError("unknown table proposal '" + s + "'");
}

}  // namespace detail

/// Builds a RunConfig from parsed JSON; relative paths resolve against
/// `base_dir`.
inline RunConfig parse_run_config(const json& root, const fs::path& base_dir) {
  if (!root.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig rc;
  rc.raw = root;
  rc.base_dir = base_dir;
  const json& data = detail::section(root, "data");
  const json& cons = detail::section(root, "constraints");
  const json& model = detail::section(root, "model");
  const json& samp = detail::section(root, "sampler");

  auto path_of = [&](const char* key) -> std::optional<fs::path> {
    const auto s = detail::get_or<std::string>(data, key, "");
    if (s.empty()) return std::nullopt;
    fs::path p = fs::path(s).is_absolute() ? fs::path(s) : base_dir / s;
    if (!fs::exists(p)) throw ConfigError(std::string("data.") + key + " does not exist: " + p.string());
    rc.inputs.push_back(p);
    return p;
  };

  const auto cost_path = path_of("cost_matrix");
  if (!cost_path) throw ConfigError("data.cost_matrix is required");
  CostMatrix cost(read_matrix_csv<double>(*cost_path));
  const std::size_t I = cost.rows(), J = cost.cols();
  const auto obs_path = path_of("observation");
  if (!obs_path) throw ConfigError("data.observation is required");
  Observation obs(read_vector_csv<double>(*obs_path));
  if (obs.size() != J) throw ConfigError("observation length does not match cost matrix columns");

  std::optional<std::vector<Count>> rows, cols;
  if (auto p = path_of("row_margins")) rows = read_vector_csv<Count>(*p);
  if (auto p = path_of("col_margins")) cols = read_vector_csv<Count>(*p);
  if (auto p = path_of("ground_truth_table")) {
    rc.truth = read_table_csv(*p);
    if (rc.truth->rows() != I || rc.truth->cols() != J) throw ConfigError("ground truth dims do not match cost matrix");
  }
  std::optional<std::pair<CellSet, std::vector<Count>>> fixed;
  if (auto p = path_of("fixed_cells")) fixed = read_fixed_cells_csv(*p);
  std::optional<std::vector<double>> origin;
  if (auto p = path_of("origin_demand")) origin = read_vector_csv<double>(*p);

  if (!rows && rc.truth) rows = rc.truth->row_sums();
  if (!cols && rc.truth) cols = rc.truth->col_sums();
  std::optional<Count> total;
  if (data.contains("total")) total = detail::get_or<Count>(data, "total", 0);
  else if (rows) total = std::accumulate(rows->begin(), rows->end(), Count{0});
  else if (cols) total = std::accumulate(cols->begin(), cols->end(), Count{0});
  else if (rc.truth) total = rc.truth->total();

  std::vector<TableConstraint> tc;
  for (const auto& name : detail::get_or<std::vector<std::string>>(cons, "table", {})) {
    if (name == "grand_total") {
      if (!total) throw ConfigError("grand_total constraint needs margins, a total or a ground truth table");
      tc.push_back({GrandTotal{}, {*total}});
    } else if (name == "row_margins") {
      if (!rows) throw ConfigError("row_margins constraint needs data.row_margins or a ground truth table");
      tc.push_back({RowMargins{}, *rows});
    } else if (name == "col_margins") {
      if (!cols) throw ConfigError("col_margins constraint needs data.col_margins or a ground truth table");
      tc.push_back({ColMargins{}, *cols});
    } else if (name == "cells") {
      if (!fixed) throw ConfigError("cells constraint needs data.fixed_cells");
      if (!fixed->first.empty()) tc.push_back({CellValues(fixed->first), fixed->second});
    } else {
      throw ConfigError("unknown table constraint '" + name + "'");
    }
  }
  std::vector<IntensityConstraint> ic;
  for (const auto& name : detail::get_or<std::vector<std::string>>(cons, "intensity", {})) {
    if (name == "grand_total") {
      if (!total) throw ConfigError("intensity grand_total needs a total");
      ic.push_back({GrandTotal{}, {static_cast<double>(*total)}});
    } else if (name == "row_margins") {
      if (!rows) throw ConfigError("intensity row_margins needs row margins");
      ic.push_back({RowMargins{}, std::vector<double>(rows->begin(), rows->end())});
    } else if (name == "col_margins") {
      if (!cols) throw ConfigError("intensity col_margins needs column margins");
      ic.push_back({ColMargins{}, std::vector<double>(cols->begin(), cols->end())});
    } else {
      throw ConfigError("unknown intensity constraint '" + name + "'");
    }
  }
  rc.constraints = ConstraintSet(I, J, std::move(tc), std::move(ic));

  HarrisWilsonParams hw;
  hw.epsilon = detail::get_or(model, "epsilon", 1.0);
  hw.kappa = detail::get_or(model, "kappa", 1.0);
  hw.delta = detail::get_or(model, "delta", 0.0);
  hw.sigma_d = detail::get_or(model, "sigma_d", 0.03 * std::log(static_cast<double>(J > 1 ? J : 2)));
  if (origin) hw.origin_demand = *origin;
  else if (rows) hw.origin_demand.assign(rows->begin(), rows->end());
  else hw.origin_demand.assign(I, total ? static_cast<double>(*total) / static_cast<double>(I) : 1.0);
  if (hw.origin_demand.size() != I) throw ConfigError("origin demand length does not match cost matrix rows");

  SamplerConfig& s = rc.sampler;
  s.regime = detail::parse_regime(detail::get_or<std::string>(model, "noise_regime", "low"));
  s.gamma_low = detail::get_or(model, "gamma_low", s.gamma_low);
  s.gamma_high = detail::get_or(model, "gamma_high", s.gamma_high);
  hw.gamma = s.initial_gamma();
  if (model.contains("prior")) {
    const json& p = model.at("prior");
    auto box = detail::get_or<std::vector<double>>(p, "alpha", {s.prior.alpha_lo, s.prior.alpha_hi});
    auto boxb = detail::get_or<std::vector<double>>(p, "beta", {s.prior.beta_lo, s.prior.beta_hi});
    auto boxg = detail::get_or<std::vector<double>>(p, "gamma", {s.prior.gamma_lo, s.prior.gamma_hi});
    if (box.size() != 2 || boxb.size() != 2 || boxg.size() != 2) throw ConfigError("prior ranges need two values");
    s.prior = {box[0], box[1], boxb[0], boxb[1], boxg[0], boxg[1]};
  }
  rc.data = Dataset{cost, obs, hw, detail::parse_family(detail::get_or<std::string>(model, "intensity_family", "total")), {}};

  s.n_steps = detail::get_or<std::size_t>(samp, "n_steps", s.n_steps);
  s.burn_in = detail::get_or<std::size_t>(samp, "burn_in", s.burn_in);
  s.thinning = detail::get_or<std::size_t>(samp, "thinning", s.thinning);
  s.hmc.leapfrog_steps = detail::get_or<std::size_t>(samp, "leapfrog_steps", s.hmc.leapfrog_steps);
  s.hmc.step_size = detail::get_or(samp, "step_size", s.hmc.step_size);
  s.hmc.target_accept = detail::get_or(samp, "x_target_accept", s.hmc.target_accept);
  s.hmc.adapt = detail::get_or(samp, "adapt", s.hmc.adapt);
  s.rw.adapt = s.hmc.adapt;
  auto rw = detail::get_or<std::vector<double>>(samp, "theta_proposal_std", {s.rw.std_alpha, s.rw.std_beta});
  if (rw.size() != 2) throw ConfigError("theta_proposal_std needs two values");
  s.rw.std_alpha = rw[0];
  s.rw.std_beta = rw[1];
  s.rw.std_log_gamma = detail::get_or(samp, "log_gamma_proposal_std", s.rw.std_log_gamma);
  s.rw.target_accept = detail::get_or(samp, "theta_target_accept", s.rw.target_accept);
  s.ais.n_particles = detail::get_or<std::size_t>(samp, "ais_particles", s.ais.n_particles);
  s.ais.n_temperatures = detail::get_or<std::size_t>(samp, "ais_temperatures", s.ais.n_temperatures);
  s.roulette_continue = detail::get_or(samp, "roulette_continue", s.roulette_continue);
  s.table_proposal = detail::parse_proposal(detail::get_or<std::string>(samp, "table_proposal", "gibbs"));
  s.min_sign_fraction = detail::get_or(samp, "min_sign_fraction", s.min_sign_fraction);
  auto th0 = detail::get_or<std::vector<double>>(samp, "theta0", {s.theta0.alpha, s.theta0.beta});
  if (th0.size() != 2) throw ConfigError("theta0 needs two values");
  s.theta0 = {th0[0], th0[1]};
  s.update_x = detail::get_or(samp, "update_x", s.update_x);
  s.update_theta = detail::get_or(samp, "update_theta", s.update_theta);
  s.update_table = detail::get_or(samp, "update_table", s.update_table);
  s.seed = detail::get_or<std::uint64_t>(samp, "seed", s.seed);
  rc.n_chains = detail::get_or<std::size_t>(samp, "n_chains", rc.n_chains);
  if (rc.n_chains < 1) throw ConfigError("n_chains must be >= 1");
  const auto out = detail::get_or<std::string>(root, "output_dir", "run");
  rc.output_dir = fs::path(out).is_absolute() ? fs::path(out) : base_dir / out;
  s.validate();
  hw.validate();
  return rc;
}

inline RunConfig load_run_config(const fs::path& p) {
  json root;
  try {
    root = json::parse(read_file(p));
  } catch (const json::parse_error& e) {
    throw ConfigError(p.string() + ": " + e.what());
  }
  RunConfig rc = parse_run_config(root, p.has_parent_path() ? p.parent_path() : fs::path("."));
  rc.inputs.insert(rc.inputs.begin(), p);
  return rc;
}

}  // namespace odmx

#endif  // ODMX_CONFIG_HPP
