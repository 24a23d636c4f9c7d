#pragma once

#include "noiseid/matrices.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <string_view>
#include <vector>

namespace noiseid {

/// Observation matrices of p observed variables sharing one hidden variable.
/// Noisy labels and categorical features are both observed variables.
class ObservationModel {
 public:
  ObservationModel() = default;
  /// Throws DimensionError if the models disagree on the hidden cardinality.
  explicit ObservationModel(std::vector<ObsMatrix> models);

  void add(ObsMatrix model);

  int K() const { return models_.empty() ? 0 : models_.front().hidden(); }
  int size() const { return static_cast<int>(models_.size()); }
  const std::vector<ObsMatrix>& models() const { return models_; }
  std::vector<int> cardinalities() const;

 private:
  std::vector<ObsMatrix> models_;
};

enum class Verdict { identifiable, not_guaranteed };

std::string_view to_string(Verdict v);

/// Outcome of one identifiability condition. `verdict` is identifiable
/// exactly when lhs >= rhs; a failed sufficient condition is reported as
/// not_guaranteed, never as "not identifiable".
struct IdentifiabilityReport {
  std::string condition_name;
  long long lhs = 0;
  long long rhs = 0;
  std::vector<int> per_model_kruskal;
  Verdict verdict = Verdict::not_guaranteed;
  std::string notes;

  bool identifiable() const { return verdict == Verdict::identifiable; }
};

void to_json(nlohmann::json& j, const IdentifiabilityReport& r);

/// Kruskal's sufficient condition: sum_i Kr(M_i) >= 2K + p - 1.
IdentifiabilityReport check_kruskal_sum(const ObservationModel& obs,
                                        double tolerance = kRankTolerance);

/// rank(T) == K.
bool is_informative_label(const TransitionMatrix& T, double tolerance = kRankTolerance);

/// Three i.i.d. noisy labels sharing T: M_1 = M_2 = M_3 = T, so the Kruskal
/// sum is 3 Kr(T) against 2K + 2.
IdentifiabilityReport check_instance_three_labels(const TransitionMatrix& T,
                                                  double tolerance = kRankTolerance);

/// Kr(M) >= 2.
bool is_informative_feature(const ObsMatrix& M, double tolerance = kRankTolerance);

/// One group with a single noisy label and disentangled categorical features.
/// Uninformative features are dropped before counting d*.
IdentifiabilityReport check_group_features(const TransitionMatrix& T,
                                           const ObservationModel& features,
                                           double tolerance = kRankTolerance);

/// Hidden groups: features observed over the |G|*K product space, with only
/// Kr(T) >= 1 assumed. Identifiable when d* >= 2|G|K - 1.
IdentifiabilityReport check_unknown_groups(int num_groups, int K, int d_star);

/// Generic identifiability from feature cardinalities alone: every two-way
/// split of the features into meta-variables is scored with
/// min(K, tau_1) + min(K, tau_2) + K against 2K + 2 and the best is kept.
IdentifiabilityReport check_generic(int K, const std::vector<int>& cardinalities);

/// ceil(log2((K + 2) / 2)), the feature count sufficient for generic
/// identifiability with binary features.
int generic_feature_threshold(int K);

}  // namespace noiseid
