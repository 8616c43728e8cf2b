#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace odmx;

TEST(IntensityTotal, UniformWhenThetaZero) {
  Rng rng(3);
  const auto c = testutil::random_cost(3, 4, rng);
  const Intensity lam = intensity_total(testutil::random_vector(4, rng, -1, 1), {0.0, 0.0}, 12.0, c);
  for (double v : lam.matrix().flat()) EXPECT_NEAR(v, 1.0, 1e-14);
}

TEST(IntensityTotal, SingleColumn) {
  const Intensity lam = intensity_total(std::vector<double>{0.3}, {1.0, 1.0}, 10.0, CostMatrix(RealMatrix(2, 1, 0.0)));
  EXPECT_NEAR(lam(0, 0), 5.0, 1e-14);
  EXPECT_NEAR(lam(1, 0), 5.0, 1e-14);
}

TEST(IntensityTotal, MatchesHighPrecisionValues) {
  const CostMatrix c(RealMatrix::from_rows({{0.0, 1.0}, {1.0, 0.0}}));
  const Intensity lam = intensity_total(std::vector<double>{0.0, 1.0}, {1.0, 0.5}, 1.0, c);
  EXPECT_NEAR(lam(0, 0), 0.16740509727844331986, 1e-12);
  EXPECT_NEAR(lam(0, 1), 0.27600434470659363447, 1e-12);
  EXPECT_NEAR(lam(1, 0), 0.10153632409155180089, 1e-12);
  EXPECT_NEAR(lam(1, 1), 0.45505423392341124478, 1e-12);
}

TEST(IntensityTotal, DimensionAndNumericErrors) {
  const CostMatrix c(RealMatrix(2, 2, 1.0));
  EXPECT_THROW(intensity_total(std::vector<double>{0.0}, {1.0, 1.0}, 1.0, c), DimensionError);
  EXPECT_THROW(intensity_total(std::vector<double>{INFINITY, 0.0}, {1.0, 1.0}, 1.0, c), NumericError);
}

TEST(IntensityTotal, LargeExponentsStayFinite) {
  const CostMatrix c(RealMatrix(2, 2, 0.0));
  const Intensity lam = intensity_total(std::vector<double>{800.0, 790.0}, {1.0, 0.0}, 4.0, c);
  EXPECT_NEAR(lam.total(), 4.0, 1e-12);
  EXPECT_GT(lam(0, 0), lam(0, 1));
}

TEST(IntensitySingly, Examples) {
  const CostMatrix c(RealMatrix(2, 2, 1.0));
  const Intensity lam = intensity_singly(std::vector<double>{0.4, -2.0}, {0.0, 0.0}, std::vector<double>{4, 8}, c);
  EXPECT_NEAR(lam(0, 0), 2.0, 1e-14);
  EXPECT_NEAR(lam(1, 1), 4.0, 1e-14);
  const Intensity z = intensity_singly(std::vector<double>{0.4, -2.0}, {1.0, 1.0}, std::vector<double>{0, 0}, c);
  for (double v : z.matrix().flat()) EXPECT_EQ(v, 0.0);
}

TEST(IntensitySingly, MatchesHighPrecisionValues) {
  const CostMatrix c(RealMatrix::from_rows({{0.5, 1.0, 2.0}, {1.5, 0.3, 0.9}}));
  const Intensity lam = intensity_singly(std::vector<double>{0.2, -0.4, 1.1}, {0.7, 1.3}, std::vector<double>{3, 5}, c);
  const double want[2][3] = {{1.8631876009353535237, 0.63908921666975249752, 0.4977231823948939788},
                             {0.60807101640623333633, 1.9012972178856023047, 2.490631765708164359}};
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(lam(i, j), want[i][j], 1e-12);
  EXPECT_NEAR(lam.row_sums()[0], 3.0, 1e-13);
}

TEST(Potential, Examples) {
  HarrisWilsonParams hw;
  hw.kappa = 0.0;
  hw.delta = 0.0;
  hw.origin_demand = {0.0, 0.0};
  const CostMatrix c(RealMatrix(2, 3, 1.0));
  const std::vector<double> x{0.1, 0.2, 0.3};
  EXPECT_EQ(potential(x, {1.0, 1.0}, hw, c), 0.0);
  for (double g : potential_gradient(x, {1.0, 1.0}, hw, c)) EXPECT_EQ(g, 0.0);

  HarrisWilsonParams one;
  one.origin_demand = {1.0};
  EXPECT_NEAR(potential(std::vector<double>{0.0}, {1.0, 0.0}, one, CostMatrix(RealMatrix(1, 1, 0.0))), 1.0, 1e-15);
}

TEST(Potential, MatchesHighPrecisionValue) {
  HarrisWilsonParams hw;
  hw.origin_demand = {3.0, 5.0};
  hw.kappa = 1.2;
  hw.delta = 0.3;
  hw.epsilon = 0.8;
  const CostMatrix c(RealMatrix::from_rows({{0.5, 1.0, 2.0}, {1.5, 0.3, 0.9}}));
  EXPECT_NEAR(potential(std::vector<double>{0.2, -0.4, 1.1}, {0.7, 1.3}, hw, c), 2.9029354735219024728, 1e-12);
}

TEST(Potential, AlphaZeroIsSingular) {
  HarrisWilsonParams hw;
  hw.origin_demand = {1.0};
  EXPECT_THROW(potential(std::vector<double>{0.0}, {0.0, 1.0}, hw, CostMatrix(RealMatrix(1, 1, 0.0))), SingularError);
}

TEST(Potential, GradientAndHessianMatchFiniteDifferences) {
  Rng rng(11);
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t I = 2 + rng.below(4), J = 2 + rng.below(4);
    const auto c = testutil::random_cost(I, J, rng);
    HarrisWilsonParams hw;
    hw.origin_demand = testutil::random_vector(I, rng, 0.5, 3.0);
    hw.kappa = 0.5 + rng.uniform();
    hw.delta = 0.2 * rng.uniform();
    hw.epsilon = 0.5 + rng.uniform();
    const Theta th{0.3 + 1.5 * rng.uniform(), 2.0 * rng.uniform()};
    const auto x = testutil::random_vector(J, rng, -1.0, 1.0);
    const auto g = potential_gradient(x, th, hw, c);
    const auto fd = testutil::fd_gradient([&](const std::vector<double>& v) { return potential(v, th, hw, c); }, x);
    EXPECT_LT(testutil::max_abs_diff(g, fd), 1e-7);
    const RealMatrix h = potential_hessian(x, th, hw, c);
    for (std::size_t k = 0; k < J; ++k) {
      const auto fdk = testutil::fd_gradient(
          [&](const std::vector<double>& v) { return potential_gradient(v, th, hw, c)[k]; }, x);
      for (std::size_t m = 0; m < J; ++m) EXPECT_NEAR(h(k, m), fdk[m], 1e-7);
    }
  }
}

TEST(Margins, KappaDelta) {
  EXPECT_DOUBLE_EQ(kappa_from(0.0, 2, 10.0, std::vector<double>{2, 3}), 2.0);
  EXPECT_DOUBLE_EQ(kappa_from(1.0, 3, 7.0, std::vector<double>{2, 3, 5}), 1.0);
  EXPECT_THROW(kappa_from(1.0, 2, 7.0, std::vector<double>{0, 0}), SingularError);
  EXPECT_DOUBLE_EQ(delta_from(2.0, std::vector<double>{0.5, 3}), 1.0);
  EXPECT_DOUBLE_EQ(delta_from(1.0, std::vector<double>{1, 1, 1}), 1.0);
  EXPECT_DOUBLE_EQ(delta_from(7.0, std::vector<double>{0, 2}), 0.0);
  EXPECT_THROW(delta_from(1.0, std::vector<double>{}), DimensionError);
}

TEST(Stationary, ResidualAndAggregateIdentity) {
  Rng rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t I = 2 + rng.below(6), J = 2 + rng.below(6);
    const auto c = testutil::random_cost(I, J, rng);
    HarrisWilsonParams hw;
    hw.origin_demand = testutil::random_vector(I, rng, 1.0, 10.0);
    hw.kappa = 1.0 + rng.uniform();
    hw.delta = 0.1 * rng.uniform();
    const Theta th{0.5 + rng.uniform(), 0.5 + rng.uniform()};
    const auto w = solve_stationary(testutil::random_vector(J, rng, 1.0, 5.0), th, hw, c);
    const auto r = stationary_residual(w, th, hw, c);
    for (double v : r) EXPECT_LT(std::abs(v), 1e-8);
    double sw = 0.0, total = 0.0;
    for (double v : w) sw += v;
    for (double o : hw.origin_demand) total += o;
    const double lhs = hw.kappa * sw, rhs = hw.delta * static_cast<double>(J) + total;
    EXPECT_LT(std::abs(lhs - rhs) / rhs, 1e-9);
  }
}

TEST(Stationary, IterationLimitCarriesIterate) {
  const CostMatrix c(RealMatrix(1, 2, 0.0));
  HarrisWilsonParams hw;
  hw.origin_demand = {5.0};
  StationaryOptions opt;
  opt.max_iter = 3;
  try {
    solve_stationary(std::vector<double>{1.0, 1.0}, {1.0, 1.0}, hw, c, opt);
    FAIL() << "expected an iteration-limit error";
  } catch (const IterationLimitError& e) {
    EXPECT_EQ(e.last_iterate().size(), 2u);
  }
}

TEST(OddsRatios, Examples) {
  const OddsRatios w = odds_ratios(Intensity(RealMatrix::from_rows({{2, 1}, {1, 2}})));
  EXPECT_NEAR(w.omega(0, 0), 4.0 / 3.0, 1e-15);
  EXPECT_NEAR(w.omega(0, 1), 2.0 / 3.0, 1e-15);
  const OddsRatios r1 = odds_ratios(Intensity(RealMatrix::from_rows({{2, 4, 6}, {3, 6, 9}})));
  for (double v : r1.omega.flat()) EXPECT_NEAR(v, 1.0, 1e-14);
  Rng rng(2);
  const Intensity lam = intensity_total(testutil::random_vector(4, rng, -1, 1), {1.0, 0.0}, 9.0,
                                        testutil::random_cost(3, 4, rng));
  const OddsRatios w0 = odds_ratios(lam);
  for (double v : w0.omega.flat()) EXPECT_NEAR(v, 1.0, 1e-13);
  EXPECT_THROW(odds_ratios(Intensity(RealMatrix::from_rows({{0, 1}, {0, 2}}))), SingularError);
}

TEST(Errors, ValidatedInputs) {
  EXPECT_THROW(CostMatrix(RealMatrix(1, 1, -1.0)), DimensionError);
  EXPECT_THROW(Observation(std::vector<double>{1.0, 0.0}), DimensionError);
  HarrisWilsonParams hw;
  hw.kappa = 0.0;
  EXPECT_THROW(hw.validate(), ConfigError);
}
