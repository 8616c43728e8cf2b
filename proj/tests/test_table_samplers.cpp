#include <gtest/gtest.h>

#include <map>

#include "test_util.hpp"

using namespace odmx;

TEST(SelectTarget, Families) {
  EXPECT_EQ(select_target(ConstraintSet(2, 2)).family, TableFamily::Unconstrained);
  EXPECT_EQ(select_target(ConstraintSet(2, 2, {{GrandTotal{}, {3}}})).family, TableFamily::TotalConstrained);
  EXPECT_EQ(select_target(ConstraintSet(2, 2, {{RowMargins{}, {1, 2}}})).family, TableFamily::RowConstrained);
  const TableTarget col = select_target(ConstraintSet(2, 2, {{ColMargins{}, {1, 2}}}));
  EXPECT_EQ(col.family, TableFamily::RowConstrained);
  EXPECT_TRUE(col.transposed);
  EXPECT_EQ(likelihood_kind(col), TableLikelihoodKind::ColMargins);
  const TableTarget d =
      select_target(testutil::doubly({1, 2}, {2, 1}, {{CellValues(CellSet{{0, 0}}), {1}}}));
  EXPECT_EQ(d.family, TableFamily::DoublyConstrained);
  EXPECT_FALSE(d.tractable());
  EXPECT_EQ(d.fixed.size(), 1u);
}

TEST(ClosedForm, EdgeCases) {
  Rng rng(41);
  EXPECT_EQ(sample_poisson(RealMatrix(2, 2, 0.0), rng), Table(2, 2));
  EXPECT_EQ(sample_multinomial(RealMatrix(2, 2, 1.0), 0, rng), Table(2, 2));
  RealMatrix one(2, 3, 0.0);
  one(1, 2) = 0.3;
  EXPECT_EQ(sample_multinomial(one, 7, rng)(1, 2), 7);
  EXPECT_THROW(sample_multinomial(RealMatrix(2, 2, 0.0), 3, rng), SupportError);
  EXPECT_EQ(sample_product_multinomial(RealMatrix(2, 2, 1.0), std::vector<Count>{0, 0}, rng), Table(2, 2));
  const Table col = sample_product_multinomial(RealMatrix(3, 1, 1.0), std::vector<Count>{4, 0, 2}, rng);
  EXPECT_EQ(col, Table::from_rows({{4}, {0}, {2}}));
}

TEST(ClosedForm, MomentsWithinMonteCarloBounds) {
  Rng rng(42);
  const RealMatrix lam = testutil::random_positive(4, 4, rng, 0.2, 4.0);
  const Intensity L(lam);
  const std::vector<Count> rows{5, 9, 2, 7};
  const Count total = 20;
  const int n = 20000;
  RealMatrix sp(4, 4, 0.0), sm(4, 4, 0.0), spm(4, 4, 0.0);
  for (int k = 0; k < n; ++k) {
    const Table a = sample_poisson(L, rng), b = sample_multinomial(L, total, rng),
                c = sample_product_multinomial(L, rows, rng);
    for (std::size_t q = 0; q < 16; ++q) {
      sp.flat()[q] += static_cast<double>(a.matrix().flat()[q]);
      sm.flat()[q] += static_cast<double>(b.matrix().flat()[q]);
      spm.flat()[q] += static_cast<double>(c.matrix().flat()[q]);
    }
    EXPECT_EQ(b.total(), total);
    ASSERT_EQ(c.row_sums(), rows);
  }
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      const double pm = lam(i, j);
      EXPECT_LT(std::abs(sp(i, j) / n - pm), 4.0 * std::sqrt(pm / n));
      const double p = lam(i, j) / L.total();
      EXPECT_LT(std::abs(sm(i, j) / n - total * p), 4.0 * std::sqrt(total * p * (1 - p) / n));
      const double pr = lam(i, j) / L.row_sums()[i];
      const double r = static_cast<double>(rows[i]);
      EXPECT_LT(std::abs(spm(i, j) / n - r * pr), 4.0 * std::sqrt(r * pr * (1 - pr) / n) + 1e-12);
    }
}

TEST(InitialiseAdmissible, Examples) {
  EXPECT_EQ(initialise_admissible(testutil::doubly({2, 1}, {1, 2})), Table::from_rows({{1, 1}, {0, 1}}));
  EXPECT_EQ(initialise_admissible(testutil::doubly({7}, {7})), Table::from_rows({{7}}));
  EXPECT_THROW(testutil::doubly({1, 1}, {1, 1}, {{CellValues(CellSet{{0, 0}}), {2}}}), InfeasibleConstraintsError);
  Rng rng(43);
  for (int rep = 0; rep < 50; ++rep) {
    const Table t = testutil::random_table(4, 5, rng, 4);
    std::vector<Cell> cells;
    std::vector<Count> vals;
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 5; ++j)
        if (rng.uniform() < 0.25) {
          cells.push_back({i, j});
          vals.push_back(t(i, j));
        }
    std::vector<TableConstraint> extra;
    if (!cells.empty()) extra.push_back({CellValues(CellSet(cells)), vals});
    const ConstraintSet c = testutil::doubly(t.row_sums(), t.col_sums(), extra);
    EXPECT_TRUE(is_admissible(initialise_admissible(c), c));
    const ConstraintSet rc(4, 5, {{ColMargins{}, t.col_sums()}});
    EXPECT_TRUE(is_admissible(initialise_admissible(rc), rc));
  }
}

TEST(FisherEta, UniformOmegaLaw) {
  const Table t = Table::from_rows({{1, 1}, {1, 1}});
  const BasisMove f = generate_basis(2, 2)[0];
  const EtaLaw law = fisher_eta_law(t, f, FisherMeasure(RealMatrix(2, 2, 1.0)));
  ASSERT_EQ(law.probs.size(), 3u);
  EXPECT_NEAR(law.probs[0], 0.25 / 1.5, 1e-14);
  EXPECT_NEAR(law.probs[1], 1.0 / 1.5, 1e-14);
  EXPECT_NEAR(law.probs[2], 0.25 / 1.5, 1e-14);
  Rng rng(44);
  const Table z = Table::from_rows({{0, 3}, {0, 0}});
  for (int k = 0; k < 100; ++k) EXPECT_EQ(fisher_eta_sample(z, f, OddsRatios{RealMatrix(2, 2, 2.0)}, rng), 0);
}

TEST(MbMh, RejectsNegativeProposals) {
  Rng rng(45);
  const MarkovBasis b = generate_basis(2, 2);
  const Table t = Table::from_rows({{0, 0}, {0, 0}});
  for (int k = 0; k < 100; ++k) EXPECT_EQ(mb_mh_step(t, b, UniformMeasure{}, rng), t);
}

namespace {

double tv_distance(const std::map<Table, double>& emp, const Fiber& f, const std::vector<double>& p) {
  double tv = 0.0;
  for (std::size_t k = 0; k < f.tables.size(); ++k) {
    const auto it = emp.find(f.tables[k]);
    tv += std::abs((it == emp.end() ? 0.0 : it->second) - p[k]);
  }
  return 0.5 * tv;
}

}  // namespace

TEST(MarkovChains, MatchExactFisherLawOnSmallFiber) {
  const ConstraintSet c = testutil::doubly({3, 2, 2}, {2, 3, 2}, {{CellValues(CellSet{{2, 2}}), {1}}});
  Rng rng(46);
  const Intensity lam(testutil::random_positive(3, 3, rng, 0.3, 3.0));
  const Fiber f = enumerate_fiber(c);
  const auto p = exact_distribution(f, lam);
  for (MarkovProposal prop : {MarkovProposal::Gibbs, MarkovProposal::MetropolisHastings}) {
    const ConstrainedTableSampler s(c, prop);
    Table t = s.initial();
    std::map<Table, double> emp;
    const int n = 200000;
    for (int k = 0; k < n; ++k) {
      s.draw_inplace(lam, t, rng);
      emp[t] += 1.0 / n;
    }
    EXPECT_LT(tv_distance(emp, f, p), 0.02) << (prop == MarkovProposal::Gibbs ? "gibbs" : "mh");
  }
}

TEST(MarkovChains, MhTargetsArbitraryMeasure) {
  const ConstraintSet c = testutil::doubly({2, 2}, {2, 2});
  const Fiber f = enumerate_fiber(c);
  LogMeasureFn mu{[](const Table& t) { return 0.7 * static_cast<double>(t(0, 0)); }};
  std::vector<double> p(f.tables.size());
  double z = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) z += (p[k] = std::exp(mu.log_mu(f.tables[k])));
  for (double& v : p) v /= z;
  Rng rng(47);
  const MarkovBasis b = generate_basis(2, 2);
  Table t = f.tables[0];
  std::map<Table, double> emp;
  const int n = 100000;
  for (int k = 0; k < n; ++k) {
    mb_mh_step(t, b, mu, rng);
    emp[t] += 1.0 / n;
  }
  EXPECT_LT(tv_distance(emp, f, p), 0.02);
}

TEST(ConstrainedSampler, ReproducesConstraints) {
  Rng rng(48);
  const Intensity lam(testutil::random_positive(3, 4, rng));
  const std::vector<ConstraintSet> sets{
      ConstraintSet(3, 4, {{GrandTotal{}, {12}}, {CellValues(CellSet{{0, 1}}), {4}}}),
      ConstraintSet(3, 4, {{RowMargins{}, {3, 0, 5}}, {CellValues(CellSet{{2, 0}}), {2}}}),
      ConstraintSet(3, 4, {{ColMargins{}, {1, 2, 3, 4}}, {CellValues(CellSet{{1, 3}}), {3}}}),
      testutil::doubly({4, 3, 3}, {2, 2, 3, 3}, {{CellValues(CellSet{{0, 0}, {2, 3}}), {1, 2}}}),
      ConstraintSet(3, 4, {{CellValues(CellSet{{1, 1}}), {9}}})};
  for (const auto& c : sets) {
    const ConstrainedTableSampler s(c);
    Table t = s.initial();
    for (int k = 0; k < 500; ++k) {
      s.draw_inplace(lam, t, rng);
      ASSERT_TRUE(is_admissible(t, c)) << constraint_signature(c);
    }
  }
}
