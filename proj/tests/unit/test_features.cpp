#include <noiseid/errors.hpp>
#include <noiseid/features.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace noiseid;

namespace {

Matrix random_stochastic(std::mt19937_64& gen, int rows, int cols, double diagonal_boost = 0.0) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = u(gen) + (i == j ? diagonal_boost : 0.0);
    m.row(i) /= m.row(i).sum();
  }
  return m;
}

FeatureModel identity_features(int K, int d) {
  FeatureModel fm;
  fm.hidden = {1, K};
  for (int i = 0; i < d; ++i) fm.models.emplace_back(Matrix::Identity(K, K));
  return fm;
}

double max_abs(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST(GenFeatureModel, Examples) {
  const auto one = gen_feature_model({1, 2}, 1, {2}, 2, 1);
  ASSERT_EQ(one.d(), 1);
  EXPECT_EQ(one.models[0].entries().rows(), 2);
  EXPECT_EQ(one.models[0].entries().cols(), 2);
  EXPECT_EQ(kruskal_rank(one.models[0].entries()), 2);

  const auto three = gen_feature_model({1, 3}, 3, {3}, 2, 2);
  ASSERT_EQ(three.d(), 3);
  for (const auto& m : three.models) EXPECT_TRUE(is_informative_feature(m));
}

TEST(GenFeatureModel, PerFeatureCardinalitiesAndGroups) {
  const auto fm = gen_feature_model({2, 3}, 3, {2, 4, 5}, 2, 3);
  EXPECT_EQ(fm.K_hidden(), 6);
  EXPECT_EQ(fm.cardinalities(), (std::vector<int>{2, 4, 5}));
  for (const auto& m : fm.models) {
    EXPECT_EQ(m.hidden(), 6);
    EXPECT_LT((m.entries().rowwise().sum() - Vector::Ones(6)).cwiseAbs().maxCoeff(), 1e-12);
  }
  EXPECT_THROW(gen_feature_model({1, 2}, 3, {2, 3}, 2, 1), DimensionError);
}

TEST(GenFeatureModel, Deterministic) {
  const auto a = gen_feature_model({1, 4}, 4, {3}, 3, 17);
  const auto b = gen_feature_model({1, 4}, 4, {3}, 3, 17);
  const auto c = gen_feature_model({1, 4}, 4, {3}, 3, 18);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(a.models[static_cast<std::size_t>(i)].entries(), b.models[static_cast<std::size_t>(i)].entries());
  EXPECT_NE(a.models[0].entries(), c.models[0].entries());
  for (const auto& m : a.models) EXPECT_GE(kruskal_rank(m.entries()), 3);
}

TEST(GenFeatureModel, ImpossibleRankExhausts) {
  // A K x 2 matrix never has Kruskal rank 3.
  EXPECT_THROW(gen_feature_model({1, 3}, 1, {2}, 3, 1), Error);
}

TEST(SampleWithFeatures, IdentityFeaturesRevealHiddenState) {
  const auto ds = sample_with_features(Prior::uniform(3), asymmetric_T(3, 0.2), identity_features(3, 2), 5000, 4);
  ASSERT_EQ(ds.d(), 2);
  ASSERT_EQ(ds.p(), 1);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(ds.r(i)[0], ds.y(i));
    EXPECT_EQ(ds.r(i)[1], ds.y(i));
  }
  EXPECT_EQ(ds.provenance.model, "features");
}

TEST(SampleWithFeatures, ConditionalsAndIndependence) {
  const auto fm = gen_feature_model({1, 3}, 2, {3, 4}, 2, 5);
  Vector w(3);
  w << 0.3, 0.5, 0.2;
  const auto ds = sample_with_features(Prior(w), asymmetric_T(3, 0.3), fm, 1000000, 6);
  for (int f = 0; f < 2; ++f) {
    const Matrix& M = fm.models[static_cast<std::size_t>(f)].entries();
    Matrix counts = Matrix::Zero(3, M.cols());
    for (std::size_t i = 0; i < ds.size(); ++i) counts(ds.y(i), ds.r(i)[static_cast<std::size_t>(f)]) += 1;
    for (int j = 0; j < 3; ++j) counts.row(j) /= counts.row(j).sum();
    EXPECT_LT(max_abs(counts, M), 0.005) << "feature " << f;
  }
  for (int y = 0; y < 3; ++y) {
    double n = 0, s1 = 0, s2 = 0, s12 = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (ds.y(i) != y) continue;
      const double a = ds.r(i)[0], b = ds.r(i)[1];
      n += 1;
      s1 += a;
      s2 += b;
      s12 += a * b;
    }
    EXPECT_LT(std::abs(s12 / n - (s1 / n) * (s2 / n)), 0.01) << "class " << y;
  }
}

TEST(SampleWithFeatures, WithoutLabel) {
  const auto ds = sample_with_features(Prior::uniform(2), std::nullopt, identity_features(2, 3), 10, 7);
  EXPECT_EQ(ds.p(), 0);
  EXPECT_EQ(ds.d(), 3);
}

TEST(StackObservations, OrderAndVerdicts) {
  const auto fm = gen_feature_model({1, 3}, 3, {2}, 2, 8);
  const auto stacked = stack_observations(asymmetric_T(3, 0.2), fm);
  ASSERT_EQ(stacked.size(), 4);
  EXPECT_EQ(stacked.models()[0].entries(), asymmetric_T(3, 0.2).entries());
  EXPECT_TRUE(check_kruskal_sum(stacked).identifiable());

  const auto single = stack_observations(std::nullopt, gen_feature_model({1, 2}, 1, {2}, 2, 9));
  EXPECT_FALSE(check_kruskal_sum(single).identifiable());

  EXPECT_THROW(stack_observations(asymmetric_T(2, 0.1), fm), DimensionError);
}

TEST(StackObservations, ProductSpaceWithoutLabel) {
  for (int groups = 1; groups <= 2; ++groups) {
    const int K = 2;
    const int d = 2 * groups * K - 1;
    const auto fm = gen_feature_model({groups, K}, d, {2}, 2, 10);
    EXPECT_TRUE(check_kruskal_sum(stack_observations(std::nullopt, fm)).identifiable());
    EXPECT_EQ(check_unknown_groups(groups, K, d).identifiable(), true);
    const auto fewer = gen_feature_model({groups, K}, d - 1, {2}, 2, 11);
    EXPECT_FALSE(check_kruskal_sum(stack_observations(std::nullopt, fewer)).identifiable());
  }
}

TEST(StackObservations, KruskalSumMatchesGroupCheckAcrossBoundary) {
  for (int trial = 0; trial < 50; ++trial) {
    const int K = 2 + trial % 4;
    const int d = std::max(1, K - 1 + trial % 3);  // K - 1, K, K + 1
    const auto fm = gen_feature_model({1, K}, d, {2}, 2, 100 + static_cast<std::uint64_t>(trial));
    const auto T = asymmetric_T(K, 0.3);
    const bool via_sum = check_kruskal_sum(stack_observations(T, fm)).identifiable();
    ObservationModel features(fm.models);
    EXPECT_EQ(via_sum, check_group_features(T, features).identifiable()) << "K=" << K << " d=" << d;
    EXPECT_EQ(via_sum, d >= K);
  }
}

TEST(MetaFeatures, SingletonSidesAreOriginals) {
  const auto fm = gen_feature_model({1, 2}, 2, {2}, 2, 12);
  const auto [a, b] = group_meta_features(fm, {0}, {1});
  EXPECT_EQ(a.entries(), fm.models[0].entries());
  EXPECT_EQ(b.entries(), fm.models[1].entries());
}

TEST(MetaFeatures, OuterProductRows) {
  FeatureModel fm;
  fm.hidden = {1, 2};
  Matrix f1(2, 2), f2(2, 2), f3(2, 3);
  f1 << 0.9, 0.1, 0.2, 0.8;
  f2 << 0.7, 0.3, 0.4, 0.6;
  f3 << 0.2, 0.3, 0.5, 0.6, 0.3, 0.1;
  fm.models = {ObsMatrix(f1), ObsMatrix(f2), ObsMatrix(f3)};
  const auto [a, b] = group_meta_features(fm, {0, 1}, {2});
  ASSERT_EQ(a.outcomes(), 4);
  for (int j = 0; j < 2; ++j) {
    for (int k1 = 0; k1 < 2; ++k1) {
      for (int k2 = 0; k2 < 2; ++k2) EXPECT_NEAR(a.entries()(j, k1 * 2 + k2), f1(j, k1) * f2(j, k2), 1e-15);
    }
  }
  EXPECT_EQ(b.entries(), f3);
}

TEST(MetaFeatures, CardinalityRankAndStochasticity) {
  for (int trial = 0; trial < 40; ++trial) {
    const int K = 2 + trial % 4;
    const auto fm = gen_feature_model({1, K}, 4, {2, 3, 2, 3}, 2, 200 + static_cast<std::uint64_t>(trial));
    std::vector<int> side_a, side_b;
    for (int i = 0; i < 4; ++i) ((trial >> i) & 1 ? side_a : side_b).push_back(i);
    if (side_a.empty() || side_b.empty()) {
      side_a = {0};
      side_b = {1, 2, 3};
    }
    const auto [a, b] = group_meta_features(fm, side_a, side_b);
    int tau_a = 1, tau_b = 1, kr_a = 0, kr_b = 0;
    for (int i : side_a) {
      tau_a *= fm.cardinalities()[static_cast<std::size_t>(i)];
      kr_a = std::max(kr_a, kruskal_rank(fm.models[static_cast<std::size_t>(i)].entries()));
    }
    for (int i : side_b) {
      tau_b *= fm.cardinalities()[static_cast<std::size_t>(i)];
      kr_b = std::max(kr_b, kruskal_rank(fm.models[static_cast<std::size_t>(i)].entries()));
    }
    EXPECT_EQ(a.outcomes(), tau_a);
    EXPECT_EQ(b.outcomes(), tau_b);
    EXPECT_GE(kruskal_rank(a.entries()), kr_a);
    EXPECT_GE(kruskal_rank(b.entries()), kr_b);
    EXPECT_LT((a.entries().rowwise().sum() - Vector::Ones(K)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(MetaFeatures, InvalidSplits) {
  const auto fm = gen_feature_model({1, 2}, 3, {2}, 2, 14);
  EXPECT_THROW(group_meta_features(fm, {}, {0, 1, 2}), ValidationError);
  EXPECT_THROW(group_meta_features(fm, {0}, {1}), ValidationError);
  EXPECT_THROW(group_meta_features(fm, {0, 1}, {1, 2}), ValidationError);
  EXPECT_THROW(group_meta_features(fm, {0, 1}, {3}), ValidationError);
}

TEST(EstimateFromJoint, RecoversAllThreeMatrices) {
  std::mt19937_64 gen(15);
  const Matrix Ma = random_stochastic(gen, 2, 2, 1.0), Mb = random_stochastic(gen, 2, 3, 1.0);
  const Matrix T = asymmetric_T(2, 0.2).entries();
  Vector w(2);
  w << 0.35, 0.65;
  const auto joint = exact_joint(Prior(w), {ObsMatrix(Ma), ObsMatrix(Mb), ObsMatrix(T)});
  const auto r = estimate_from_joint(joint, 2);
  EXPECT_LE(r.residual, 1e-8);
  EXPECT_LT(max_abs(r.scenario.T.entries(), T), 1e-6);
  EXPECT_LT(max_abs(r.M_a, Ma), 1e-6);
  EXPECT_LT(max_abs(r.M_b, Mb), 1e-6);
  EXPECT_NEAR(r.scenario.prior[0], 0.35, 1e-6);
}

TEST(EstimateFromJoint, ExactInputsReachSmallResidual) {
  std::mt19937_64 gen(16);
  int good = 0;
  const int trials = 100;
  for (int trial = 0; trial < trials; ++trial) {
    const int K = 2 + trial % 2;
    Vector w(K);
    for (int k = 0; k < K; ++k) w(k) = 0.2 + 0.8 * std::uniform_real_distribution<double>(0, 1)(gen);
    w /= w.sum();
    const auto fm = gen_feature_model({1, K}, 2, {K + trial % 2}, K, 300 + static_cast<std::uint64_t>(trial));
    const Matrix T = random_stochastic(gen, K, K, 1.0);
    const auto joint = exact_joint(Prior(w), {fm.models[0], fm.models[1], ObsMatrix(T)});
    EstimateOptions opts;
    opts.seed = static_cast<std::uint64_t>(trial);
    opts.truth = T;
    const auto r = estimate_from_joint(joint, K, opts);
    good += r.residual <= 1e-8 && max_abs(r.scenario.T.entries(), T) < 1e-6;
  }
  EXPECT_GE(good, 95);
}

TEST(EstimateFromFeatures, SampledPipeline) {
  const auto fm = gen_feature_model({1, 2}, 2, {3}, 2, 17);
  const auto T = asymmetric_T(2, 0.3);
  const auto ds = sample_with_features(Prior::uniform(2), T, fm, 1000000, 18);
  EstimateOptions opts;
  opts.seed = 18;
  const auto r = estimate_from_features(ds, opts);
  EXPECT_LE(err_metric(r.scenario.T.entries(), T.entries()), 3.0);
}

TEST(EstimateFromFeatures, UninformativeFeaturesWarn) {
  FeatureModel fm;
  fm.hidden = {1, 2};
  fm.models = {ObsMatrix(Matrix::Constant(2, 2, 0.5)), ObsMatrix(Matrix::Constant(2, 3, 1.0 / 3))};
  const auto ds = sample_with_features(Prior::uniform(2), asymmetric_T(2, 0.2), fm, 20000, 19);
  const auto r = estimate_from_features(ds);
  EXPECT_FALSE(r.warnings.empty());
}

TEST(EstimateFromFeatures, NeedsTwoFeaturesAndALabel) {
  const auto one = sample_with_features(Prior::uniform(2), asymmetric_T(2, 0.2), identity_features(2, 1), 10, 20);
  EXPECT_THROW(estimate_from_features(one), CapabilityError);
  const auto unlabeled = sample_with_features(Prior::uniform(2), std::nullopt, identity_features(2, 2), 10, 21);
  EXPECT_THROW(estimate_from_features(unlabeled), CapabilityError);
}

TEST(EstimateFromFeatures, JsonFields) {
  const auto ds = sample_with_features(Prior::uniform(2), asymmetric_T(2, 0.2), gen_feature_model({1, 2}, 2, {2}, 2, 22), 5000, 22);
  nlohmann::json j = estimate_from_features(ds);
  for (const char* key : {"prior", "T", "M_a", "M_b", "residual", "warnings"}) EXPECT_TRUE(j.contains(key)) << key;
}
