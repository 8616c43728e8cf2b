#ifndef ODMX_COMMANDS_HPP
#define ODMX_COMMANDS_HPP

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "odmx/algorithms.hpp"
#include "odmx/config.hpp"
#include "odmx/exact_oracle.hpp"
#include "odmx/io.hpp"
#include "odmx/markov_basis.hpp"
#include "odmx/metrics.hpp"
#include "odmx/synth.hpp"

namespace odmx {

enum ExitCode : int {
  kExitOk = 0,
  kExitOther = 1,
  kExitConfig = 2,
  kExitInfeasible = 3,
  kExitEstimator = 4,
  kExitSignFraction = 5,
};

/// Exit code for an exception escaping a command.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DimensionError*>(&e)) return kExitConfig;
  if (dynamic_cast<const InfeasibleConstraintsError*>(&e)) return kExitInfeasible;
  if (dynamic_cast<const DegenerateEstimatorError*>(&e)) return kExitEstimator;
  if (dynamic_cast<const SignFractionError*>(&e)) return kExitSignFraction;
  return kExitOther;
}

struct SampleOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> chains;
  std::optional<fs::path> out;
  /// Worker threads; 0 reads ODMX_THREADS, then the hardware concurrency.
  std::size_t threads = 0;
  bool quiet = true;
};

inline std::size_t resolve_threads(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("ODMX_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? hc : 1;
}

inline fs::path chain_dir(const fs::path& run_dir, std::size_t chain) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "chain_%02zu", chain);
  return run_dir / buf;
}

inline json diagnostics_json(const ChainDiagnostics& d) {
  return {{"family", d.family},
          {"x_acceptance", d.x_acceptance()},
          {"x_acceptance_all", d.hmc.proposals ? double(d.hmc.accepted) / double(d.hmc.proposals) : 0.0},
          {"x_non_finite", d.hmc.non_finite},
          {"theta_acceptance", d.theta_acceptance()},
          {"theta_out_of_box", d.out_of_box},
          {"gamma_acceptance", d.gamma_proposals ? double(d.gamma_accepted) / double(d.gamma_proposals) : 0.0},
          {"estimator_failures", d.estimator_failures},
          {"table_move_rate", d.table_updates ? double(d.table_moves) / double(d.table_updates) : 0.0},
          {"emitted", d.emitted},
          {"sign_fraction", d.sign_fraction()},
          {"final_step_size", d.final_step_size},
          {"final_theta_std", {d.final_std_alpha, d.final_std_beta}},
          {"basis_size", d.basis_size}};
}

/// Hash over the config text and every input file, in the order listed.
inline std::string inputs_hash(const RunConfig& rc) {
  std::string bytes;
  for (const auto& p : rc.inputs) {
    const std::string content = read_file(p);
    bytes += "blob " + std::to_string(content.size()) + '\0' + content;
  }
  return content_hash(bytes);
}

/// Runs every chain of the configured sampler, each in its own directory, on a
/// worker pool. Chains own their RNG streams, so output does not depend on the
/// pool size. Returns the run directory.
inline fs::path cmd_sample(const fs::path& config_path, const SampleOptions& opt = {}) {
  RunConfig rc = load_run_config(config_path);
  if (opt.seed) rc.sampler.seed = *opt.seed;
  if (opt.chains) rc.n_chains = *opt.chains;
  if (opt.out) rc.output_dir = *opt.out;
  if (rc.n_chains < 1) throw ConfigError("need at least one chain");
  const fs::path run_dir = rc.output_dir;
  fs::create_directories(run_dir);

  const std::size_t n = rc.n_chains;
  std::vector<ChainDiagnostics> diags(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= n) return;
      try {
        const fs::path dir = chain_dir(run_dir, k);
        fs::create_directories(dir);
        ChainDiagnostics d;
        {
          FileSink sink(dir, rc.constraints.rows(), rc.constraints.cols());
          d = run_chain(rc.data, rc.constraints, rc.sampler, k, sink);
        }
        write_file(dir / "diagnostics.json", diagnostics_json(d).dump(2) + "\n");
        diags[k] = d;
        if (!opt.quiet) {
          std::lock_guard lock(log_mutex);
          std::cerr << "chain " << k << ": x-acc " << d.x_acceptance() << ", theta-acc " << d.theta_acceptance()
                    << ", " << d.seconds << " s\n";
        }
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const std::size_t pool = std::min(resolve_threads(opt.threads), n);
  {
    std::vector<std::jthread> threads;
    for (std::size_t t = 1; t < pool; ++t) threads.emplace_back(worker);
    worker();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  json cfg = rc.raw;
  cfg["sampler"]["seed"] = rc.sampler.seed;
  cfg["sampler"]["n_chains"] = rc.n_chains;
  json chains = json::array();
  for (const auto& d : diags) chains.push_back(diagnostics_json(d));
  json top = {{"config", cfg},
              {"config_dir", fs::absolute(rc.base_dir).lexically_normal().string()},
              {"input_hash", inputs_hash(rc)},
              {"constraints", constraint_signature(rc.constraints)},
              {"chains", chains}};
  write_file(run_dir / "diagnostics.json", top.dump(2) + "\n");
  return run_dir;
}

/// Reloads the config copy stored in a run directory.
inline RunConfig run_config_of(const fs::path& run_dir) {
  const json top = json::parse(read_file(run_dir / "diagnostics.json"));
  return parse_run_config(top.at("config"), fs::path(top.at("config_dir").get<std::string>()));
}

inline std::vector<SampleTrace> read_run(const fs::path& run_dir) {
  std::vector<SampleTrace> out;
  for (std::size_t k = 0;; ++k) {
    const fs::path dir = chain_dir(run_dir, k);
    if (!fs::exists(dir / "tables.bin")) break;
    out.push_back(read_chain_dir(dir));
  }
  if (out.empty()) throw IoError(run_dir.string() + ": no chain directories");
  return out;
}

/// Metric suite of a finished run against the ground truth; written to
/// metrics.json in the run directory and returned.
inline json cmd_metrics(const fs::path& run_dir, const std::optional<fs::path>& truth_path = std::nullopt,
                        double q = 0.99) {
  const RunConfig rc = run_config_of(run_dir);
  std::optional<Table> truth = truth_path ? std::optional<Table>(read_table_csv(*truth_path)) : rc.truth;
  if (!truth) throw ConfigError("no ground truth table available");
  const auto traces = read_run(run_dir);
  std::vector<Table> tables;
  std::vector<int> signs;
  std::vector<std::vector<double>> xs, flat_tables;
  for (const auto& t : traces) {
    for (std::size_t k = 0; k < t.size(); ++k) {
      tables.push_back(t.tables[k]);
      signs.push_back(t.signs[k]);
      xs.push_back(t.xs[k]);
      flat_tables.push_back(std::vector<double>(t.tables[k].as_real().values()));
    }
  }
  if (tables.empty()) throw UndefinedMetricError("empty post-burn-in trace");
  const auto mean_flat = signed_posterior_mean(signs, flat_tables);
  const RealMatrix mean(truth->rows(), truth->cols(), mean_flat);
  const auto x_mean = signed_posterior_mean(signs, xs);
  const Coverage cp = coverage_probability(tables, *truth, q, rc.constraints.fixed_cells());
  std::size_t positive = 0;
  for (int s : signs) positive += s > 0 ? 1 : 0;
  const json top = json::parse(read_file(run_dir / "diagnostics.json"));
  double xa = 0.0, ta = 0.0;
  for (const auto& c : top.at("chains")) {
    xa += c.at("x_acceptance").get<double>();
    ta += c.at("theta_acceptance").get<double>();
  }
  const double nc = static_cast<double>(top.at("chains").size());
  json m = {{"srmse", srmse(mean, *truth)},
            {"ssi", ssi(mean, *truth)},
            {"mbd", mbd(mean, truth->as_real())},
            {"cp", cp.all_cells},
            {"cp_free", cp.free_cells},
            {"cp_q", q},
            {"r2", r_squared(x_mean, rc.data.obs)},
            {"sign_fraction", static_cast<double>(positive) / static_cast<double>(signs.size())},
            {"x_acceptance", xa / nc},
            {"theta_acceptance", ta / nc},
            {"samples", tables.size()}};
  write_file(run_dir / "metrics.json", m.dump(2) + "\n");
  return m;
}

/// Reference mean for convergence curves from a known intensity: Multinomial,
/// product Multinomial or the product-Multinomial approximation of the Fisher
/// mean, depending on which margins the sampled tables share.
inline RealMatrix reference_mean(const Intensity& lam, const Table& any, const TableTarget& target) {
  RealMatrix g(lam.rows(), lam.cols());
  if (target.family == TableFamily::RowConstrained && target.transposed) {
    const auto c = any.col_sums();
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) g(i, j) = static_cast<double>(c[j]) * lam(i, j) / lam.col_sums()[j];
    return g;
  }
  switch (target.family) {
    case TableFamily::Unconstrained: return lam.matrix();
    case TableFamily::TotalConstrained:
      for (std::size_t k = 0; k < g.size(); ++k)
        g.flat()[k] = static_cast<double>(any.total()) * lam.matrix().flat()[k] / lam.total();
      return g;
    case TableFamily::RowConstrained: {
      const auto r = any.row_sums();
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) g(i, j) = static_cast<double>(r[i]) * lam(i, j) / lam.row_sums()[i];
      return g;
    }
    default: {
      const auto c = any.col_sums();
      return approx_fisher_mean(lam, c);
    }
  }
}

/// Rel-l1 curves of each chain against `g`, aggregated per step as mean and
/// 5/50/95% quantiles. Written as CSV: step,mean,q05,q50,q95,chains.
inline std::string cmd_convergence(const std::vector<fs::path>& run_dirs, const RealMatrix& g) {
  std::vector<std::vector<double>> curves;
  for (const auto& rd : run_dirs)
    for (const auto& t : read_run(rd)) curves.push_back(l1_convergence(t.tables, g));
  if (curves.empty()) throw IoError("no traces");
  std::size_t len = curves.front().size();
  for (const auto& c : curves) len = std::min(len, c.size());
  std::string out = "step,mean,q05,q50,q95,chains\n";
  std::vector<double> col(curves.size());
  auto quantile = [&](double p) {
    const double pos = p * static_cast<double>(col.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, col.size() - 1);
    return col[lo] + (pos - static_cast<double>(lo)) * (col[hi] - col[lo]);
  };
  for (std::size_t n = 0; n < len; ++n) {
    double mean = 0.0;
    for (std::size_t c = 0; c < curves.size(); ++c) {
      col[c] = curves[c][n];
      mean += col[c];
    }
    mean /= static_cast<double>(curves.size());
    std::sort(col.begin(), col.end());
    out += std::to_string(n + 1) + "," + fmt_real(mean) + "," + fmt_real(quantile(0.05)) + "," +
           fmt_real(quantile(0.5)) + "," + fmt_real(quantile(0.95)) + "," + std::to_string(curves.size()) + "\n";
  }
  return out;
}

/// Every admissible table of the configured constraint set, one flattened
/// table per line.
inline std::string cmd_fiber_dump(const fs::path& config_path, std::size_t cap = kDefaultFiberCap) {
  const RunConfig rc = load_run_config(config_path);
  const Fiber f = enumerate_fiber(rc.constraints, cap);
  std::string out;
  for (const Table& t : f.tables) out += vector_csv(t.matrix().values());
  return out;
}

inline std::string cmd_basis_dump(const fs::path& config_path) {
  const RunConfig rc = load_run_config(config_path);
  return basis_csv(generate_basis(rc.constraints.rows(), rc.constraints.cols(), rc.constraints.fixed_cells()));
}

inline SynthData cmd_synthesize(const SynthSpec& spec, const fs::path& out_dir) {
  SynthData s = synthesize(spec);
  write_synth_dataset(spec, s, out_dir);
  return s;
}

}  // namespace odmx

#endif  // ODMX_COMMANDS_HPP
