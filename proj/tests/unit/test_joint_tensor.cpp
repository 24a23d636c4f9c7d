#include <noiseid/errors.hpp>
#include <noiseid/joint_tensor.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

using namespace noiseid;

namespace {

JointTensor random_tensor(std::mt19937_64& gen, std::vector<int> dims) {
  JointTensor t(std::move(dims));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& v : t.values()) v = u(gen);
  const double total = t.total();
  for (double& v : t.values()) v /= total;
  return t;
}

}  // namespace

TEST(JointTensor, RowMajorLayout) {
  JointTensor t({2, 3, 4});
  EXPECT_EQ(t.size(), 24u);
  const std::vector<int> idx{1, 2, 3};
  EXPECT_EQ(t.offset(idx), 1u * 12 + 2 * 4 + 3);
  for (std::size_t off = 0; off < t.size(); ++off) EXPECT_EQ(t.offset(t.unravel(off)), off);
  EXPECT_THROW(JointTensor({2, 2}, std::vector<double>(3, 0.0)), DimensionError);
}

TEST(JointTensor, CommonCardinality) {
  EXPECT_EQ(JointTensor::cube(3, 4).K(), 4);
  EXPECT_THROW(JointTensor({2, 3}).K(), DimensionError);
}

TEST(JointTensor, MarginalizeMatchesLoops) {
  std::mt19937_64 gen(1);
  const auto t = random_tensor(gen, {2, 3, 4});
  for (int axis = 0; axis < 3; ++axis) {
    const auto m = t.marginalize(axis);
    ASSERT_EQ(m.order(), 2);
    // Oracle: accumulate each cell of t into its reduced index.
    std::vector<double> expected(m.size(), 0.0);
    for (std::size_t off = 0; off < t.size(); ++off) {
      auto idx = t.unravel(off);
      idx.erase(idx.begin() + axis);
      expected[m.offset(idx)] += t.values()[off];
    }
    for (std::size_t i = 0; i < m.size(); ++i) EXPECT_NEAR(m.values()[i], expected[i], 1e-15);
    EXPECT_NEAR(m.total(), 1.0, 1e-12);
  }
}

TEST(JointTensor, SymmetrizedAveragesPermutations) {
  std::mt19937_64 gen(2);
  const auto t = random_tensor(gen, {3, 3, 3});
  const auto s = t.symmetrized();
  std::vector<int> perm{0, 1, 2};
  std::vector<double> expected(t.size(), 0.0);
  int count = 0;
  do {
    for (std::size_t off = 0; off < t.size(); ++off) {
      const auto idx = t.unravel(off);
      std::vector<int> moved(3);
      for (int a = 0; a < 3; ++a) moved[static_cast<std::size_t>(a)] = idx[static_cast<std::size_t>(perm[static_cast<std::size_t>(a)])];
      expected[off] += t(moved);
    }
    ++count;
  } while (std::next_permutation(perm.begin(), perm.end()));
  EXPECT_EQ(count, 6);
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_NEAR(s.values()[i], expected[i] / 6, 1e-15);
  EXPECT_LT(s.symmetry_defect(), 1e-15);
  EXPECT_GT(t.symmetry_defect(), 1e-3);
  EXPECT_NEAR(s.total(), 1.0, 1e-12);
}

TEST(JointTensor, SymmetrizeRequiresEqualAxes) {
  EXPECT_THROW(JointTensor({2, 3}).symmetrized(), DimensionError);
}

TEST(JointTensor, DistributionValidation) {
  auto t = JointTensor::cube(2, 2);
  EXPECT_THROW(t.validate_distribution(), ValidationError);
  for (double& v : t.values()) v = 0.25;
  EXPECT_NO_THROW(t.validate_distribution());
  t.values()[0] = -0.1;
  t.values()[1] = 0.35;
  EXPECT_THROW(t.validate_distribution(), ValidationError);
  EXPECT_DOUBLE_EQ(t.min_value(), -0.1);
}
