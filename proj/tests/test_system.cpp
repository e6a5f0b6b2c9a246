#include <gtest/gtest.h>

#include <set>

#include "common.hpp"

using namespace fbsde;

TEST(IndexSet, BasicsAndPrinting) {
  const IndexSet s = IndexSet::from_indices({0, 2});
  EXPECT_TRUE(s.contains(0));
  EXPECT_FALSE(s.contains(1));
  EXPECT_EQ(s.size(), 2);
  EXPECT_EQ(s.min_index(), 0);
  EXPECT_EQ(s.str(), "{1,3}");
  EXPECT_EQ(s.without(0), IndexSet::single(2));
  EXPECT_TRUE(IndexSet::single(2).subset_of(s));
  EXPECT_EQ(IndexSet().min_index(), -1);
}

TEST(EnumerateConfigs, SizesAreNondecreasingAndComplete) {
  for (int n = 1; n <= 6; ++n) {
    const auto configs = enumerate_configs(n);
    ASSERT_EQ(configs.size(), std::size_t{1} << n);
    std::set<std::uint32_t> seen;
    for (std::size_t k = 0; k < configs.size(); ++k) {
      seen.insert(configs[k].bits());
      if (k > 0) {
        EXPECT_GE(configs[k].size(), configs[k - 1].size());
      }
    }
    EXPECT_EQ(seen.size(), configs.size());
  }
  EXPECT_THROW(enumerate_configs(21), Error);
  EXPECT_THROW(enumerate_configs(0), Error);
}

TEST(Network, ValidationErrors) {
  auto code = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::IoError;
  };
  EXPECT_EQ(code([] { build_network({{0, 1}, {1}}); }), ErrorCode::NonSquare);
  EXPECT_EQ(code([] { build_network({{0, -1}, {1, 0}}); }), ErrorCode::NegativeEntry);
  EXPECT_EQ(code([] { build_network(std::vector<std::vector<double>>(21, std::vector<double>(21))); }),
            ErrorCode::CapacityExceeded);
}

TEST(Network, RowSumsAndSymmetricFamilies) {
  const AdjacencyMatrix D = build_network({{0, 1, 2}, {0.5, 0, 0}, {0, 0, 0}});
  EXPECT_DOUBLE_EQ(D.row_sum(0), 3.0);
  EXPECT_DOUBLE_EQ(D.row_sum(2), 0.0);
  EXPECT_DOUBLE_EQ(D.row_sum_max(), 3.0);
  EXPECT_DOUBLE_EQ(D.col_sum(0), 0.5);
  const AdjacencyMatrix S = symmetric_network(4, 2.0, true);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(S.row_sum(i), 2.0, 1e-15);
  const AdjacencyMatrix U = symmetric_network(2, 1.0, false);
  EXPECT_DOUBLE_EQ(U.row_sum(0), 2.0);
  EXPECT_TRUE(zero_network(3).is_zero());
}

TEST(InitialData, Validation) {
  const SystemParams p = make_params(2, 1.0, 1.0);
  EXPECT_NO_THROW(validate_initial_data(p, {0.0, {1.0, 2.0}, IndexSet::full(2)}));
  try {
    validate_initial_data(p, {0.0, {1.0}, IndexSet::full(2)});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::StateCountMismatch);
  }
  try {
    validate_initial_data(p, {1.5, {1.0, 1.0}, IndexSet::full(2)});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TimeOutOfRange);
  }
  try {
    validate_initial_data(p, {0.0, {1.0, 1.0}, IndexSet::from_indices({3})});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AliveSetOutOfRange);
  }
  EXPECT_THROW(make_params(2, -1.0, 1.0), Error);
}
