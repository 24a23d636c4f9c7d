#include <noiseid/errors.hpp>
#include <noiseid/identifiability.hpp>
#include <noiseid/noisegen.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace noiseid;

namespace {

ObsMatrix identity_obs(int K) { return ObsMatrix(Matrix::Identity(K, K)); }

ObsMatrix flat_obs(int K, int outcomes) {
  return ObsMatrix(Matrix::Constant(K, outcomes, 1.0 / outcomes));
}

ObsMatrix random_obs(std::mt19937_64& gen, int K, int outcomes) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Matrix m(K, outcomes);
  for (int i = 0; i < K; ++i) {
    for (int j = 0; j < outcomes; ++j) m(i, j) = u(gen);
    m.row(i) /= m.row(i).sum();
  }
  return ObsMatrix(m);
}

// Best split score by trying every assignment of features to two non-empty
// sides, both orientations included.
long long generic_oracle(int K, const std::vector<int>& cards) {
  const int d = static_cast<int>(cards.size());
  long long best = -1;
  for (int mask = 1; mask < (1 << d) - 1; ++mask) {
    double t1 = 1, t2 = 1;
    for (int i = 0; i < d; ++i) ((mask >> i) & 1 ? t1 : t2) *= cards[static_cast<std::size_t>(i)];
    const long long s = static_cast<long long>(std::min<double>(K, t1) + std::min<double>(K, t2)) + K;
    best = std::max(best, s);
  }
  return best;
}

}  // namespace

TEST(KruskalSum, IdentityModelsWithThreeViews) {
  const ObservationModel obs({identity_obs(4), identity_obs(4), identity_obs(4)});
  const auto r = check_kruskal_sum(obs);
  EXPECT_EQ(r.lhs, 12);
  EXPECT_EQ(r.rhs, 10);
  EXPECT_TRUE(r.identifiable());
  EXPECT_EQ(r.per_model_kruskal, (std::vector<int>{4, 4, 4}));
}

TEST(KruskalSum, TwoViewsFallShort) {
  const auto r = check_kruskal_sum(ObservationModel({identity_obs(2), identity_obs(2)}));
  EXPECT_EQ(r.lhs, 4);
  EXPECT_EQ(r.rhs, 5);
  EXPECT_EQ(r.verdict, Verdict::not_guaranteed);
  EXPECT_NE(r.notes.find("sufficient"), std::string::npos);
}

TEST(KruskalSum, SingleView) {
  const auto r = check_kruskal_sum(ObservationModel({identity_obs(2)}));
  EXPECT_EQ(r.lhs, 2);
  EXPECT_EQ(r.rhs, 4);
  EXPECT_FALSE(r.identifiable());
}

TEST(KruskalSum, MixedHiddenSizesRejected) {
  ObservationModel obs({identity_obs(2)});
  EXPECT_THROW(obs.add(identity_obs(3)), DimensionError);
}

TEST(KruskalSum, VerdictAgreesWithSumOnRandomModels) {
  std::mt19937_64 gen(201);
  for (int trial = 0; trial < 50; ++trial) {
    const int K = 2 + trial % 3;
    const int p = 1 + trial % 4;
    ObservationModel obs;
    long long sum = 0;
    for (int i = 0; i < p; ++i) {
      const ObsMatrix m = (trial + i) % 3 == 0 ? flat_obs(K, 3) : random_obs(gen, K, 2 + (trial + i) % 3);
      sum += kruskal_rank(m.entries());
      obs.add(m);
    }
    const auto r = check_kruskal_sum(obs);
    EXPECT_EQ(r.lhs, sum);
    EXPECT_EQ(r.rhs, 2LL * K + p - 1);
    EXPECT_EQ(r.identifiable(), r.lhs >= r.rhs);
  }
}

TEST(InformativeLabel, RankDecides) {
  EXPECT_TRUE(is_informative_label(asymmetric_T(3, 0.2)));
  EXPECT_FALSE(is_informative_label(TransitionMatrix(Matrix::Constant(3, 3, 1.0 / 3))));
  Matrix half(2, 2);
  half << 0.5, 0.5, 0.5, 0.5;
  EXPECT_FALSE(is_informative_label(TransitionMatrix(half)));
}

TEST(InformativeFeature, KruskalAtLeastTwo) {
  EXPECT_TRUE(is_informative_feature(identity_obs(3)));
  EXPECT_FALSE(is_informative_feature(flat_obs(3, 4)));
  Matrix dup(3, 2);
  dup << 0.3, 0.7, 0.3, 0.7, 0.9, 0.1;
  EXPECT_FALSE(is_informative_feature(ObsMatrix(dup)));
}

TEST(InstanceThreeLabels, FullRankFive) {
  const auto r = check_instance_three_labels(asymmetric_T(5, 0.3));
  EXPECT_EQ(r.lhs, 15);
  EXPECT_EQ(r.rhs, 12);
  EXPECT_TRUE(r.identifiable());
}

TEST(InstanceThreeLabels, RankDeficientIsNotGuaranteed) {
  Matrix m(3, 3);
  m << 0.8, 0.1, 0.1, 0.8, 0.1, 0.1, 0.1, 0.1, 0.8;
  const auto r = check_instance_three_labels(TransitionMatrix(m));
  EXPECT_EQ(r.lhs, 3);
  EXPECT_EQ(r.verdict, Verdict::not_guaranteed);
  EXPECT_NE(r.notes.find("not informative"), std::string::npos);
}

TEST(InstanceThreeLabels, FullRankAlwaysIdentifiable) {
  for (int K = 2; K <= 7; ++K) {
    for (double eps : {0.05, 0.2, 0.4}) {
      const auto T = asymmetric_T(K, eps);
      const auto r = check_instance_three_labels(T);
      EXPECT_EQ(r.lhs, 3LL * K);
      EXPECT_TRUE(r.identifiable()) << "K=" << K << " eps=" << eps;
    }
  }
}

TEST(GroupFeatures, ThreeFeaturesSufficeForThreeClasses) {
  const auto T = asymmetric_T(3, 0.2);
  const auto yes = check_group_features(T, ObservationModel({identity_obs(3), identity_obs(3), identity_obs(3)}));
  EXPECT_TRUE(yes.identifiable());
  EXPECT_EQ(yes.lhs, 3 + 2 * 3);
  EXPECT_EQ(yes.rhs, 6 + 3);
  const auto no = check_group_features(T, ObservationModel({identity_obs(3), identity_obs(3)}));
  EXPECT_FALSE(no.identifiable());
  EXPECT_EQ(no.lhs, 7);
  EXPECT_EQ(no.rhs, 8);
}

TEST(GroupFeatures, UninformativeFeatureIsNotCounted) {
  const auto T = asymmetric_T(2, 0.2);
  const auto r = check_group_features(T, ObservationModel({identity_obs(2), flat_obs(2, 3)}));
  EXPECT_FALSE(r.identifiable());
  EXPECT_EQ(r.lhs, 2 + 2);
  EXPECT_EQ(r.rhs, 4 + 1);
  EXPECT_NE(r.notes.find("uninformative"), std::string::npos);
  EXPECT_EQ(r.per_model_kruskal, (std::vector<int>{2, 2, 1}));
}

TEST(GroupFeatures, InformativeLabelMeansDStarAtLeastK) {
  std::mt19937_64 gen(202);
  for (int K = 2; K <= 5; ++K) {
    const auto T = asymmetric_T(K, 0.25);
    for (int d = 0; d <= K + 1; ++d) {
      ObservationModel features;
      for (int i = 0; i < d; ++i) features.add(random_obs(gen, K, 2 + i % 3));
      const auto r = check_group_features(T, features);
      EXPECT_EQ(r.identifiable(), d >= K) << "K=" << K << " d=" << d;
      EXPECT_EQ(r.identifiable(), r.lhs >= r.rhs);
    }
  }
}

TEST(GroupFeatures, HiddenSizeMismatch) {
  EXPECT_THROW(check_group_features(asymmetric_T(3, 0.1), ObservationModel({identity_obs(2)})), DimensionError);
}

TEST(UnknownGroups, Examples) {
  const auto a = check_unknown_groups(2, 2, 7);
  EXPECT_TRUE(a.identifiable());
  EXPECT_EQ(a.lhs, 15);
  EXPECT_EQ(a.rhs, 15);
  EXPECT_TRUE(check_unknown_groups(1, 2, 3).identifiable());
  const auto c = check_unknown_groups(2, 2, 6);
  EXPECT_FALSE(c.identifiable());
  EXPECT_EQ(c.lhs, 13);
  EXPECT_EQ(c.rhs, 14);
}

TEST(UnknownGroups, ThresholdIsTwoGKMinusOne) {
  for (int g = 1; g <= 4; ++g) {
    for (int K = 2; K <= 5; ++K) {
      for (int d = 0; d <= 2 * g * K + 1; ++d) {
        EXPECT_EQ(check_unknown_groups(g, K, d).identifiable(), d >= 2 * g * K - 1);
      }
    }
  }
  EXPECT_THROW(check_unknown_groups(0, 2, 3), ValidationError);
  EXPECT_THROW(check_unknown_groups(1, 1, 3), ValidationError);
}

TEST(Generic, TenClassesThreeBinaryFeatures) {
  const auto r = check_generic(10, {2, 2, 2});
  EXPECT_EQ(r.lhs, generic_oracle(10, {2, 2, 2}));
  EXPECT_EQ(r.lhs, 4 + 2 + 10);
  EXPECT_EQ(r.rhs, 22);
  EXPECT_FALSE(r.identifiable());
  EXPECT_NE(r.notes.find("grouping choice"), std::string::npos);
}

TEST(Generic, SingleFeatureHasNoSplit) {
  const auto r = check_generic(2, {2});
  EXPECT_EQ(r.verdict, Verdict::not_guaranteed);
  EXPECT_EQ(r.lhs, 4);
  EXPECT_EQ(r.rhs, 6);
  const auto none = check_generic(2, {});
  EXPECT_EQ(none.verdict, Verdict::not_guaranteed);
  EXPECT_EQ(none.lhs, 2);
}

TEST(Generic, MatchesExhaustiveSplitOracle) {
  std::mt19937_64 gen(203);
  std::uniform_int_distribution<int> card(2, 5), count(2, 8), klass(2, 12);
  for (int trial = 0; trial < 200; ++trial) {
    const int K = klass(gen);
    std::vector<int> cards(static_cast<std::size_t>(count(gen)));
    for (auto& c : cards) c = card(gen);
    const auto r = check_generic(K, cards);
    EXPECT_EQ(r.lhs, generic_oracle(K, cards));
    EXPECT_EQ(r.rhs, 2LL * K + 2);
    EXPECT_EQ(r.identifiable(), r.lhs >= r.rhs);
  }
}

TEST(Generic, AddingAFeatureNeverHurts) {
  std::mt19937_64 gen(204);
  std::uniform_int_distribution<int> card(2, 4), klass(2, 20);
  for (int trial = 0; trial < 100; ++trial) {
    const int K = klass(gen);
    std::vector<int> cards{card(gen), card(gen)};
    long long previous = check_generic(K, cards).lhs;
    for (int extra = 0; extra < 5; ++extra) {
      cards.push_back(card(gen));
      const long long now = check_generic(K, cards).lhs;
      EXPECT_GE(now, previous);
      previous = now;
    }
  }
}

TEST(Generic, ThresholdMakesBinaryFeaturesSufficient) {
  for (int K = 2; K <= 64; ++K) {
    const int t = generic_feature_threshold(K);
    EXPECT_EQ(t, static_cast<int>(std::ceil(std::log2((K + 2) / 2.0) - 1e-12)));
    // With 2t binary features an even split gives two meta-features of 2^t >= (K+2)/2 states.
    const auto r = check_generic(K, std::vector<int>(static_cast<std::size_t>(2 * t), 2));
    EXPECT_GE(r.lhs, K + 2 * std::min<long long>(K, 1LL << t));
  }
}

TEST(Generic, InvalidInput) {
  EXPECT_THROW(check_generic(1, {2, 2}), ValidationError);
  EXPECT_THROW(check_generic(3, {2, 1}), ValidationError);
}

TEST(Report, JsonFields) {
  nlohmann::json j = check_unknown_groups(1, 2, 3);
  EXPECT_EQ(j["condition_name"], "unknown_groups");
  EXPECT_EQ(j["verdict"], "identifiable");
  EXPECT_EQ(j["lhs"], 7);
  EXPECT_EQ(j["rhs"], 7);
  EXPECT_TRUE(j.contains("per_model_kruskal"));
  EXPECT_TRUE(j.contains("notes"));
}
