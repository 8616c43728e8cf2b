#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace odmx;

TEST(Basis, Sizes) {
  EXPECT_EQ(generate_basis(2, 2).size(), 1u);
  EXPECT_EQ(generate_basis(2, 3).size(), 3u);
  const MarkovBasis b = generate_basis(2, 3, CellSet{{0, 0}});
  ASSERT_EQ(b.size(), 1u);
  EXPECT_EQ(b[0].j1, 1u);
  EXPECT_EQ(b[0].j2, 2u);
  EXPECT_EQ(generate_basis(4, 5).size(), 6u * 10u);
  EXPECT_TRUE(generate_basis(1, 5).empty());
}

TEST(Basis, MovesAreNullAdmissible) {
  const MarkovBasis b = generate_basis(3, 4);
  for (const BasisMove& f : b.moves()) {
    const CountMatrix m = f.as_matrix(3, 4, 2);
    for (Count s : m.row_sums()) EXPECT_EQ(s, 0);
    for (Count s : m.col_sums()) EXPECT_EQ(s, 0);
  }
}

TEST(ApplyMove, Examples) {
  const Table t = Table::from_rows({{1, 0}, {0, 1}});
  const BasisMove f = generate_basis(2, 2)[0];
  EXPECT_EQ(apply_move(t, f, -1), Table::from_rows({{0, 1}, {1, 0}}));
  EXPECT_EQ(apply_move(t, f, 0), t);
  Table copy = t;
  EXPECT_THROW(apply_move_inplace(copy, f, 1), InvalidStepError);
  EXPECT_EQ(copy, t);
}

TEST(EtaSupport, Examples) {
  const BasisMove f = generate_basis(2, 2)[0];
  const EtaInterval s = eta_support(Table::from_rows({{1, 1}, {1, 1}}), f);
  EXPECT_EQ(s.lo, -1);
  EXPECT_EQ(s.hi, 1);
  EXPECT_EQ(eta_support(Table::from_rows({{0, 3}, {2, 5}}), f).lo, 0);
  EXPECT_EQ(eta_support(Table::from_rows({{0, 3}, {2, 5}}), f).hi, 2);
}

TEST(Connectivity, SmallFibers) {
  EXPECT_TRUE(verify_connectivity(testutil::doubly({1, 1}, {1, 1})));
  EXPECT_TRUE(verify_connectivity(testutil::doubly({1, 1, 1}, {1, 1, 1})));
  EXPECT_TRUE(verify_connectivity(testutil::doubly({3, 2, 4}, {2, 5, 2})));
  EXPECT_TRUE(verify_connectivity(
      testutil::doubly({3, 2, 4}, {2, 5, 2}, {{CellValues(CellSet{{0, 0}, {2, 2}}), {1, 1}}})));
}

TEST(Connectivity, EmptyBasisWithSeveralTablesIsDisconnected) {
  // Zero diagonal on 3x3: every rectangle touches it, yet both cyclic
  // permutations remain admissible.
  const ConstraintSet c = testutil::doubly({1, 1, 1}, {1, 1, 1}, {{CellValues(CellSet{{0, 0}, {1, 1}, {2, 2}}), {0, 0, 0}}});
  EXPECT_TRUE(generate_basis(3, 3, c.fixed_cells()).empty());
  EXPECT_EQ(enumerate_fiber(c).tables.size(), 2u);
  EXPECT_FALSE(verify_connectivity(c));
}
