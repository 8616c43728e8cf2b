#include <CLI11.hpp>
#include <iostream>

#include "odmx/odmx.hpp"

namespace {

void emit(const std::string& text, const std::string& out) {
  if (out.empty() || out == "-") std::cout << text;
  else odmx::write_file(out, text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint origin-destination table and spatial interaction sampler"};
  app.require_subcommand(1);

  bool quiet = false;
  app.add_flag("--quiet", quiet, "Suppress progress output");

  odmx::SynthSpec spec;
  std::string synth_out = "synthetic";
  auto* synth = app.add_subcommand("synthesize", "Generate a synthetic dataset and starter config");
  synth->add_option("--rows", spec.rows, "Number of origins")->required();
  synth->add_option("--cols", spec.cols, "Number of destinations")->required();
  synth->add_option("--total", spec.total, "Number of agents")->required();
  synth->add_option("--seed", spec.seed, "Random seed");
  synth->add_option("--fixed-fraction", spec.fixed_fraction, "Share of cells fixed to their true value");
  synth->add_option("--alpha", spec.theta.alpha, "True attractiveness weight");
  synth->add_option("--beta", spec.theta.beta, "True cost deterrence");
  synth->add_option("--out", synth_out, "Output directory");

  std::string config;
  std::uint64_t seed = 0;
  std::size_t chains = 0, threads = 0;
  std::string out;
  auto* sample = app.add_subcommand("sample", "Run the joint sampler");
  sample->add_option("--config", config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  auto* seed_opt = sample->add_option("--seed", seed, "Run seed (overrides config)");
  auto* chains_opt = sample->add_option("--chains", chains, "Number of chains (overrides config)");
  sample->add_option("--threads", threads, "Worker threads (default ODMX_THREADS or all cores)");
  sample->add_option("--out", out, "Run directory (overrides config)");

  std::string run_dir, truth;
  double q = 0.99;
  auto* metrics = app.add_subcommand("metrics", "Compute validation metrics of a finished run");
  metrics->add_option("--run", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
  metrics->add_option("--truth", truth, "Ground truth table CSV (default from config)");
  metrics->add_option("--q", q, "HPM mass for coverage");

  std::vector<std::string> runs;
  std::string g_path, intensity_path, conv_out;
  auto* conv = app.add_subcommand("convergence", "Aggregate rel-l1 convergence curves");
  conv->add_option("--run", runs, "Run directories")->required();
  auto* g_opt = conv->add_option("--g", g_path, "Reference mean table CSV");
  auto* lam_opt = conv->add_option("--intensity", intensity_path, "Intensity CSV to derive the reference mean");
  g_opt->excludes(lam_opt);
  conv->add_option("--out", conv_out, "Output CSV (default stdout)");

  std::string dump_config, dump_out;
  std::size_t cap = odmx::kDefaultFiberCap;
  bool basis = false;
  auto* fiber = app.add_subcommand("fiber-dump", "Enumerate the admissible tables of a config (debug)");
  fiber->add_option("--config", dump_config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  fiber->add_option("--cap", cap, "Maximum number of tables");
  fiber->add_flag("--basis", basis, "Dump the Markov basis as i1,j1,i2,j2 rows instead");
  fiber->add_option("--out", dump_out, "Output CSV (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      const auto s = odmx::cmd_synthesize(spec, synth_out);
      if (!quiet) std::cerr << "wrote " << synth_out << " (total " << s.truth.total() << ")\n";
    } else if (*sample) {
      odmx::SampleOptions opt;
      if (*seed_opt) opt.seed = seed;
      if (*chains_opt) opt.chains = chains;
      if (!out.empty()) opt.out = out;
      opt.threads = threads;
      opt.quiet = quiet;
      const auto dir = odmx::cmd_sample(config, opt);
      if (!quiet) std::cerr << "wrote " << dir.string() << "\n";
    } else if (*metrics) {
      const auto m = odmx::cmd_metrics(run_dir, truth.empty() ? std::nullopt : std::optional<odmx::fs::path>(truth), q);
      std::cout << m.dump(2) << "\n";
    } else if (*conv) {
      odmx::RealMatrix g;
      if (!g_path.empty()) {
        g = odmx::read_matrix_csv<double>(g_path);
      } else if (!intensity_path.empty()) {
        const odmx::Intensity lam(odmx::read_matrix_csv<double>(intensity_path));
        const auto rc = odmx::run_config_of(runs.front());
        const auto first = odmx::read_run(runs.front()).front();
        if (first.tables.empty()) throw odmx::UndefinedMetricError("empty trace");
        g = odmx::reference_mean(lam, first.tables.front(), odmx::select_target(rc.constraints));
      } else {
        throw odmx::ConfigError("convergence needs --g or --intensity");
      }
      std::vector<odmx::fs::path> dirs(runs.begin(), runs.end());
      emit(odmx::cmd_convergence(dirs, g), conv_out);
    } else if (*fiber) {
      emit(basis ? odmx::cmd_basis_dump(dump_config) : odmx::cmd_fiber_dump(dump_config, cap), dump_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return odmx::exit_code_for(e);
  }
  return odmx::kExitOk;
}
