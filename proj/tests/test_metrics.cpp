#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace odmx;

TEST(Srmse, Examples) {
  const Table truth = Table::from_rows({{1, 4}, {2, 0}});
  EXPECT_EQ(srmse(truth.as_real(), truth), 0.0);
  EXPECT_DOUBLE_EQ(srmse(RealMatrix::from_rows({{2.0}}), Table::from_rows({{1}})), 0.5);
  EXPECT_THROW(srmse(RealMatrix(1, 2, 0.0), Table::from_rows({{1, 1}})), UndefinedMetricError);
}

TEST(Ssi, Examples) {
  const Table truth = Table::from_rows({{1, 4}, {2, 3}});
  EXPECT_EQ(ssi(truth.as_real(), truth), 1.0);
  EXPECT_EQ(ssi(RealMatrix::from_rows({{0, 2}}), Table::from_rows({{3, 0}})), 0.0);
  EXPECT_DOUBLE_EQ(ssi(RealMatrix::from_rows({{1, 3}}), Table::from_rows({{3, 1}})), 0.5);
  EXPECT_EQ(ssi(RealMatrix::from_rows({{0, 2}}), Table::from_rows({{0, 2}})), 1.0);
}

TEST(Mbd, Examples) {
  const Table t = Table::from_rows({{1, 2}, {3, 4}});
  EXPECT_EQ(mbd(t, t), 0.0);
  EXPECT_EQ(mbd(apply_move(t, generate_basis(2, 2)[0], 1), t), 2.0);
  EXPECT_EQ(mbd(Table::from_rows({{3, 0}, {0, 0}}), Table::from_rows({{0, 3}, {0, 0}})), 3.0);
}

TEST(Hpm, IntervalRule) {
  const std::vector<Count> v{5, 5, 5, 5, 6, 6, 7, 9};
  const Interval a = hpm_interval(v, 0.5);
  EXPECT_EQ(a.lo, 5);
  EXPECT_EQ(a.hi, 5);
  const Interval b = hpm_interval(v, 0.75);
  EXPECT_EQ(b.lo, 5);
  EXPECT_EQ(b.hi, 6);
  const Interval c = hpm_interval(v, 0.99);
  EXPECT_EQ(c.lo, 5);
  EXPECT_EQ(c.hi, 9);
  // Ties go to the lower value.
  const Interval t = hpm_interval(std::vector<Count>{1, 3}, 0.5);
  EXPECT_EQ(t.lo, 1);
  EXPECT_EQ(t.hi, 1);
}

TEST(Coverage, Examples) {
  const Table truth = Table::from_rows({{1, 4}, {2, 0}});
  const std::vector<Table> same(10, truth);
  for (double q : {0.5, 0.9, 0.99}) EXPECT_EQ(coverage_probability(same, truth, q).all_cells, 1.0);
  const std::vector<Table> off(10, Table::from_rows({{2, 5}, {3, 1}}));
  EXPECT_EQ(coverage_probability(off, truth).all_cells, 0.0);
  const Coverage part = coverage_probability(std::vector<Table>{Table::from_rows({{1, 5}, {3, 1}})}, truth, 0.9,
                                             CellSet{{0, 0}});
  EXPECT_DOUBLE_EQ(part.all_cells, 0.25);
  EXPECT_DOUBLE_EQ(part.free_cells, 0.0);
  EXPECT_THROW(coverage_probability(std::vector<Table>{}, truth), UndefinedMetricError);
}

TEST(RSquared, Examples) {
  const Observation y(std::vector<double>{1.0, 2.0, 4.0, 8.0});
  const auto ly = y.log_values();
  EXPECT_DOUBLE_EQ(r_squared(ly, y), 1.0);
  const double m = (ly[0] + ly[1] + ly[2] + ly[3]) / 4.0;
  EXPECT_NEAR(r_squared(std::vector<double>(4, m), y), 0.0, 1e-15);
  // log y = k log 2 for k = 0..3; residuals (0.1, -0.1, 0.1, -0.1) log 2.
  std::vector<double> x(4);
  for (int k = 0; k < 4; ++k) x[k] = ly[k] + (k % 2 ? -0.1 : 0.1) * std::log(2.0);
  EXPECT_NEAR(r_squared(x, y), 1.0 - 0.04 / 5.0, 1e-13);
  EXPECT_THROW(r_squared(std::vector<double>{0, 0}, Observation(std::vector<double>{2, 2})), UndefinedMetricError);
}

TEST(L1Convergence, CopiesOfReferenceGiveZero) {
  const Table t = Table::from_rows({{1, 4}, {2, 0}});
  for (double v : l1_convergence(std::vector<Table>(5, t), t.as_real())) EXPECT_EQ(v, 0.0);
  const auto a = l1_convergence(std::vector<Table>{t, Table::from_rows({{3, 4}, {2, 0}})}, t.as_real());
  EXPECT_DOUBLE_EQ(a[1], 1.0 / 7.0);
}

TEST(L1Convergence, GibbsChainApproachesExactMean) {
  const ConstraintSet c = testutil::doubly({3, 3}, {2, 4});
  Rng rng(71);
  const Intensity lam(testutil::random_positive(2, 2, rng));
  const Fiber f = enumerate_fiber(c);
  const RealMatrix g = exact_mean(f, exact_distribution(f, lam));
  const ConstrainedTableSampler s(c);
  Table t = s.initial();
  std::vector<Table> trace;
  for (int k = 0; k < 100000; ++k) {
    s.draw_inplace(lam, t, rng);
    trace.push_back(t);
  }
  const auto e = l1_convergence(trace, g);
  // Slope of log error against log n over a late window is near -1/2.
  const double slope = (std::log(e[99999]) - std::log(e[999])) / (std::log(100000.0) - std::log(1000.0));
  EXPECT_LT(e.back(), 0.02);
  EXPECT_LT(slope, -0.2);
}
