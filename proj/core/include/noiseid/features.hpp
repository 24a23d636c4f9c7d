#pragma once

#include "noiseid/consensus.hpp"
#include "noiseid/identifiability.hpp"
#include "noiseid/matrices.hpp"
#include "noiseid/noisegen.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace noiseid {

/// Hidden space of a feature model: plain labels (groups = 1) or the
/// group x label product, with hidden index g * labels + y.
struct HiddenSpace {
  int groups = 1;
  int labels = 2;

  int size() const { return groups * labels; }
};

/// Categorical features that are conditionally independent given the hidden
/// state; models[i] is P(R_i | hidden).
struct FeatureModel {
  HiddenSpace hidden;
  std::vector<ObsMatrix> models;

  int K_hidden() const { return hidden.size(); }
  int d() const { return static_cast<int>(models.size()); }
  std::vector<int> cardinalities() const;
};

/// Draws d_star matrices with Dirichlet(1) rows, redrawing each until its
/// Kruskal rank reaches min_kruskal. `cardinalities` holds one entry per
/// feature or a single entry shared by all. Throws SearchExhaustedError
/// after 1000 draws of one matrix.
FeatureModel gen_feature_model(HiddenSpace hidden, int d_star, const std::vector<int>& cardinalities,
                               int min_kruskal, std::uint64_t seed);

/// n records: hidden ~ prior, R_i ~ row of M_i, and one noisy label from
/// row hidden of T when T is given. The clean-label column holds the hidden index.
NoisyDataset sample_with_features(const Prior& prior, const std::optional<TransitionMatrix>& T,
                                  const FeatureModel& fm, std::size_t n, std::uint64_t seed);

/// [T, M_1, ..., M_d] (T first when present).
ObservationModel stack_observations(const std::optional<TransitionMatrix>& T, const FeatureModel& fm);

/// Meta observation matrices of a two-way split of the features, with
/// M*[j, (k_1..k_m)] = prod_i M_i[j, k_i]; the first member of a side varies
/// slowest. Indices are 0-based. Throws ValidationError unless the sides are
/// non-empty and partition the features.
std::pair<ObsMatrix, ObsMatrix> group_meta_features(const FeatureModel& fm, const std::vector<int>& side_a,
                                                    const std::vector<int>& side_b);

struct FeatureEstimate {
  Scenario scenario;
  Matrix M_a;
  Matrix M_b;
  double residual = 0.0;
  std::vector<int> permutation;
  std::vector<StartSummary> starts;
  int best_start = 0;
  std::vector<std::string> warnings;
};

/// Fits (prior, M_a, M_b, T) to a joint over (R_a, R_b, noisy label), the
/// label on the last axis. Hidden states are ordered to maximise trace(T),
/// or to match `options.truth` when given.
FeatureEstimate estimate_from_joint(const JointTensor& joint, int K, const EstimateOptions& options = {});

/// Builds the (R_a, R_b, first noisy label) joint of a dataset and fits it.
/// Throws CapabilityError with fewer than two features or no noisy label.
FeatureEstimate estimate_from_features(const NoisyDataset& ds, const EstimateOptions& options = {}, int a = 0,
                                       int b = 1);

void to_json(nlohmann::json& j, const FeatureEstimate& r);

}  // namespace noiseid
