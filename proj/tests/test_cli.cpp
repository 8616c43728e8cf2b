#include <gtest/gtest.h>

#include <cstdlib>
#include <sys/wait.h>

#include "test_util.hpp"

using namespace odmx;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("odmx_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ODMX_CLI) + " --quiet " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

void edit_config(const fs::path& p, const std::function<void(json&)>& f) {
  json j = json::parse(read_file(p));
  f(j);
  write_file(p, j.dump(2));
}

}  // namespace

TEST(Io, CsvRoundTrip) {
  const fs::path d = scratch("csv");
  const RealMatrix m = RealMatrix::from_rows({{0.1, 1e-300}, {3.0, -2.5}});
  write_file(d / "m.csv", matrix_csv(m));
  EXPECT_EQ(read_matrix_csv<double>(d / "m.csv"), m);
  write_file(d / "v.csv", "1\n2\n3\n");
  EXPECT_EQ(read_vector_csv<Count>(d / "v.csv"), (std::vector<Count>{1, 2, 3}));
  write_file(d / "bad.csv", "1,x\n");
  EXPECT_THROW(read_matrix_csv<double>(d / "bad.csv"), IoError);
  write_file(d / "ragged.csv", "1,2\n3\n");
  EXPECT_THROW(read_matrix_csv<double>(d / "ragged.csv"), DimensionError);
}

TEST(Io, TraceRoundTrip) {
  const fs::path d = scratch("trace");
  const std::vector<Table> ts{Table::from_rows({{1, 2, 3}, {4, 5, 6}}), Table::from_rows({{0, 0, 0}, {9, 1, 1LL << 40}})};
  {
    TableTraceWriter w(d / "t.bin", 2, 3);
    for (const auto& t : ts) w.write(t);
  }
  EXPECT_EQ(read_table_trace(d / "t.bin"), ts);
  write_file(d / "bad.bin", "ODMX2xxxxxxxxxxxxxxxx");
  EXPECT_THROW(read_table_trace(d / "bad.bin"), IoError);
}

TEST(Io, FixedCellsCsv) {
  const fs::path d = scratch("fixed");
  write_file(d / "f.csv", "1,0,4\n0,2,1\n");
  const auto [cells, vals] = read_fixed_cells_csv(d / "f.csv");
  ASSERT_EQ(cells.size(), 2u);
  EXPECT_EQ(cells[0].i, 0u);
  EXPECT_EQ(vals[0], 1);
  EXPECT_EQ(vals[1], 4);
}

TEST(Config, SynthesizedConfigParses) {
  const fs::path d = scratch("cfg");
  SynthSpec spec;
  spec.rows = 3;
  spec.cols = 4;
  spec.total = 100;
  const SynthData s = cmd_synthesize(spec, d);
  EXPECT_EQ(s.truth.total(), 100);
  const RunConfig rc = load_run_config(d / "config.json");
  EXPECT_EQ(select_target(rc.constraints).family, TableFamily::DoublyConstrained);
  EXPECT_TRUE(is_admissible(s.truth, rc.constraints));
  EXPECT_EQ(rc.constraints.fixed_cells().size(), 2u);
}

TEST(Config, Errors) {
  const fs::path d = scratch("cfgerr");
  cmd_synthesize(SynthSpec{}, d);
  edit_config(d / "config.json", [](json& j) { j["model"]["noise_regime"] = "medium"; });
  EXPECT_THROW(load_run_config(d / "config.json"), ConfigError);
  write_file(d / "broken.json", "{");
  EXPECT_THROW(load_run_config(d / "broken.json"), ConfigError);
}

TEST(Synthesize, DeterministicForSeed) {
  const fs::path a = scratch("synth_a"), b = scratch("synth_b");
  SynthSpec spec;
  spec.seed = 17;
  cmd_synthesize(spec, a);
  cmd_synthesize(spec, b);
  for (const char* f : {"cost_matrix.csv", "observation.csv", "ground_truth_table.csv", "fixed_cells.csv"})
    EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;
}

TEST(Sample, TraceIndependentOfThreadCount) {
  const fs::path d = scratch("det");
  SynthSpec spec;
  spec.rows = 3;
  spec.cols = 3;
  cmd_synthesize(spec, d);
  edit_config(d / "config.json", [](json& j) {
    j["sampler"]["n_steps"] = 40;
    j["sampler"]["burn_in"] = 5;
    j["sampler"]["ais_particles"] = 10;
    j["sampler"]["ais_temperatures"] = 5;
  });
  SampleOptions one{std::uint64_t{5}, std::size_t{3}, d / "one", 1, true};
  SampleOptions three{std::uint64_t{5}, std::size_t{3}, d / "three", 3, true};
  cmd_sample(d / "config.json", one);
  cmd_sample(d / "config.json", three);
  for (std::size_t k = 0; k < 3; ++k)
    for (const char* f : {"tables.bin", "theta.csv", "x.csv"})
      EXPECT_EQ(read_file(chain_dir(d / "one", k) / f), read_file(chain_dir(d / "three", k) / f));
}

TEST(Metrics, TruthTraceScoresPerfectly) {
  const fs::path d = scratch("metrics");
  SynthSpec spec;
  cmd_synthesize(spec, d);
  const RunConfig rc = load_run_config(d / "config.json");
  const fs::path run = d / "run";
  fs::create_directories(chain_dir(run, 0));
  {
    FileSink sink(chain_dir(run, 0), 2, 3);
    ChainState s;
    s.x = rc.data.obs.log_values();
    s.table = *rc.truth;
    for (int k = 0; k < 5; ++k) sink.emit(s);
  }
  json top = {{"config", rc.raw},
              {"config_dir", fs::absolute(d).string()},
              {"chains", json::array({{{"x_acceptance", 1.0}, {"theta_acceptance", 0.5}}})}};
  write_file(run / "diagnostics.json", top.dump());
  const json m = cmd_metrics(run);
  EXPECT_EQ(m.at("srmse").get<double>(), 0.0);
  EXPECT_EQ(m.at("ssi").get<double>(), 1.0);
  EXPECT_EQ(m.at("cp").get<double>(), 1.0);
  EXPECT_DOUBLE_EQ(m.at("r2").get<double>(), 1.0);
}

TEST(Metrics, EmptyTraceIsError) {
  const fs::path d = scratch("metrics_empty");
  cmd_synthesize(SynthSpec{}, d);
  const RunConfig rc = load_run_config(d / "config.json");
  const fs::path run = d / "run";
  fs::create_directories(chain_dir(run, 0));
  { FileSink sink(chain_dir(run, 0), 2, 3); }
  json top = {{"config", rc.raw}, {"config_dir", fs::absolute(d).string()}, {"chains", json::array()}};
  write_file(run / "diagnostics.json", top.dump());
  EXPECT_THROW(cmd_metrics(run), UndefinedMetricError);
}

TEST(Convergence, SingleChainMatchesL1Curve) {
  const fs::path d = scratch("conv");
  const fs::path run = d / "run";
  fs::create_directories(chain_dir(run, 0));
  const std::vector<Table> ts{Table::from_rows({{1, 2}}), Table::from_rows({{3, 0}}), Table::from_rows({{2, 1}})};
  {
    FileSink sink(chain_dir(run, 0), 1, 2);
    ChainState s;
    s.x = {0.0, 0.0};
    for (const auto& t : ts) {
      s.table = t;
      sink.emit(s);
    }
  }
  const RealMatrix g = RealMatrix::from_rows({{2.0, 1.0}});
  const std::string csv = cmd_convergence({run}, g);
  const auto e = l1_convergence(ts, g);
  const auto rows = detail::split_csv(csv, "csv");
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_DOUBLE_EQ(std::stod(rows[k + 1][1]), e[k]);
}

TEST(Cli, ExitCodes) {
  const fs::path d = scratch("cli");
  EXPECT_EQ(run_cli("synthesize --rows 2 --cols 2 --total 10 --out " + (d / "s").string()), 0);
  EXPECT_TRUE(fs::exists(d / "s" / "config.json"));
  edit_config(d / "s" / "config.json", [](json& j) { j["sampler"]["n_steps"] = 0; });
  EXPECT_EQ(run_cli("sample --config " + (d / "s" / "config.json").string()), kExitConfig);
  edit_config(d / "s" / "config.json", [](json& j) {
    j["sampler"]["n_steps"] = 20;
    j["data"]["total"] = 3;
    j["constraints"]["table"] = json::array({"grand_total", "row_margins"});
  });
  EXPECT_EQ(run_cli("sample --config " + (d / "s" / "config.json").string()), kExitInfeasible);
  EXPECT_NE(run_cli("no-such-command"), 0);
}

TEST(Cli, FiberDump) {
  const fs::path d = scratch("cli_fiber");
  cmd_synthesize(SynthSpec{2, 2, 4, 3, 0.0}, d);
  const RunConfig rc = load_run_config(d / "config.json");
  const auto out = cmd_fiber_dump(d / "config.json");
  EXPECT_EQ(detail::split_csv(out, "fiber").size(), enumerate_fiber(rc.constraints).tables.size());
}
