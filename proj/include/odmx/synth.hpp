#ifndef ODMX_SYNTH_HPP
#define ODMX_SYNTH_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "odmx/intensity.hpp"
#include "odmx/io.hpp"
#include "odmx/rng.hpp"
#include "odmx/table.hpp"
#include "odmx/table_samplers.hpp"

namespace odmx {

struct SynthSpec {
  std::size_t rows = 2;
  std::size_t cols = 3;
  Count total = 100;
  std::uint64_t seed = 1;
  double fixed_fraction = 0.2;
  Theta theta{0.8, 1.2};
  double kappa = 1.0;
  /// Smallest job count as a fraction of total / J.
  double delta_share = 0.01;
  double cost_scale = 3.0;
  double obs_noise = 0.05;
  std::vector<std::string> table_constraints{"row_margins", "col_margins", "cells"};
};

/// Generated instance kept in memory.
struct SynthData {
  CostMatrix cost;
  std::vector<double> origin_demand;
  std::vector<double> w;
  Intensity intensity;
  Table truth;
  std::vector<double> y;
  CellSet fixed;
  std::vector<Count> fixed_values;
  HarrisWilsonParams hw;
};

/// Random planar zones, costs from distances, an equilibrium attraction for a
/// chosen theta, a Multinomial ground-truth table under the total-constrained
/// intensity and a log-normal perturbation of the attraction as observation.
inline SynthData synthesize(const SynthSpec& spec) {
  if (spec.rows < 1 || spec.cols < 1) throw DimensionError("synthetic table needs I, J >= 1");
  if (spec.total < 1) throw ConfigError("synthetic table needs a positive total");
  if (!(spec.fixed_fraction >= 0.0 && spec.fixed_fraction <= 1.0)) throw ConfigError("fixed fraction must lie in [0,1]");
  Rng rng(stream_seed(spec.seed, {0x5e7}));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::gamma_distribution<double> shape(4.0, 1.0);
  const std::size_t I = spec.rows, J = spec.cols;
  const double T = static_cast<double>(spec.total);

  std::vector<std::pair<double, double>> o(I), d(J);
  for (auto& p : o) p = {unit(rng), unit(rng)};
  for (auto& p : d) p = {unit(rng), unit(rng)};
  RealMatrix c(I, J);
  for (std::size_t i = 0; i < I; ++i)
    for (std::size_t j = 0; j < J; ++j)
      c(i, j) = spec.cost_scale * std::hypot(o[i].first - d[j].first, o[i].second - d[j].second);

  SynthData s;
  s.cost = CostMatrix(c);
  s.origin_demand.resize(I);
  for (double& v : s.origin_demand) v = shape(rng);
  const double osum = std::accumulate(s.origin_demand.begin(), s.origin_demand.end(), 0.0);
  for (double& v : s.origin_demand) v *= T / osum;

  s.hw.kappa = spec.kappa;
  s.hw.delta = spec.delta_share * T / static_cast<double>(J);
  s.hw.origin_demand = s.origin_demand;
  std::vector<double> w0(J);
  for (double& v : w0) v = (T / static_cast<double>(J)) * (0.5 + unit(rng));
  StationaryOptions opt;
  opt.tol = 1e-8 * std::max(1.0, T);
  s.w = solve_stationary(w0, spec.theta, s.hw, s.cost, opt);
  std::vector<double> x(J);
  for (std::size_t j = 0; j < J; ++j) x[j] = std::log(s.w[j]);
  s.intensity = intensity_total(x, spec.theta, T, s.cost);
  s.truth = sample_multinomial(s.intensity, spec.total, rng);

  std::normal_distribution<double> noise(0.0, spec.obs_noise);
  s.y.resize(J);
  for (std::size_t j = 0; j < J; ++j) s.y[j] = s.w[j] * std::exp(noise(rng));

  std::vector<std::size_t> idx(I * J);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_fixed = static_cast<std::size_t>(std::floor(spec.fixed_fraction * static_cast<double>(I * J)));
  idx.resize(n_fixed);
  std::sort(idx.begin(), idx.end());
  std::vector<Cell> cells;
  for (std::size_t k : idx) {
    cells.push_back({k / J, k % J});
    s.fixed_values.push_back(s.truth(k / J, k % J));
  }
  s.fixed = CellSet(std::move(cells));
  return s;
}

/// Writes the instance and a starter run config into `dir`.
inline void write_synth_dataset(const SynthSpec& spec, const SynthData& s, const fs::path& dir) {
  fs::create_directories(dir);
  write_file(dir / "cost_matrix.csv", matrix_csv(s.cost.matrix()));
  write_file(dir / "observation.csv", vector_csv(s.y));
  write_file(dir / "ground_truth_table.csv", matrix_csv(s.truth.matrix()));
  write_file(dir / "row_margins.csv", vector_csv(s.truth.row_sums()));
  write_file(dir / "col_margins.csv", vector_csv(s.truth.col_sums()));
  write_file(dir / "origin_demand.csv", vector_csv(s.origin_demand));
  write_file(dir / "intensity.csv", matrix_csv(s.intensity.matrix()));
  write_file(dir / "fixed_cells.csv", fixed_cells_csv(s.fixed, s.fixed_values));
  std::vector<std::string> table_constraints;
  for (const auto& name : spec.table_constraints)
    if (name != "cells" || !s.fixed.empty()) table_constraints.push_back(name);
  nlohmann::json cfg = {
      {"data",
       {{"cost_matrix", "cost_matrix.csv"},
        {"observation", "observation.csv"},
        {"ground_truth_table", "ground_truth_table.csv"},
        {"row_margins", "row_margins.csv"},
        {"col_margins", "col_margins.csv"},
        {"origin_demand", "origin_demand.csv"}}},
      {"constraints", {{"table", table_constraints}, {"intensity", nlohmann::json::array()}}},
      {"model",
       {{"intensity_family", "total"},
        {"epsilon", s.hw.epsilon},
        {"kappa", s.hw.kappa},
        {"delta", s.hw.delta},
        {"sigma_d", 0.03 * std::log(static_cast<double>(std::max<std::size_t>(spec.cols, 2)))},
        {"noise_regime", "low"}}},
      {"sampler",
       {{"n_steps", 1000}, {"burn_in", 100}, {"thinning", 1}, {"n_chains", 1}, {"seed", spec.seed}}},
      {"output_dir", "run"}};
  if (!s.fixed.empty()) cfg["data"]["fixed_cells"] = "fixed_cells.csv";
  write_file(dir / "config.json", cfg.dump(2) + "\n");
  nlohmann::json info = {{"rows", spec.rows},
                         {"cols", spec.cols},
                         {"total", spec.total},
                         {"seed", spec.seed},
                         {"alpha", spec.theta.alpha},
                         {"beta", spec.theta.beta},
                         {"fixed_cells", s.fixed.size()}};
  write_file(dir / "synth_info.json", info.dump(2) + "\n");
}

}  // namespace odmx

#endif  // ODMX_SYNTH_HPP
