#pragma once

#include "noiseid/matrices.hpp"
#include "noiseid/random.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace noiseid {

/// Where a dataset came from: generating model, seed and its parameters.
struct Provenance {
  std::string model;
  std::uint64_t seed = 0;
  nlohmann::json parameters = nlohmann::json::object();
};

/// Columnar storage of n records, each holding S continuous
/// features x, d categorical features r, a clean label y and p noisy labels.
///
/// Labels and categories are 0-based in memory; the CSV form is 1-based.
/// The clean-label column may be absent for data read from disk.
class NoisyDataset {
 public:
  NoisyDataset(int K, int p, int S, std::vector<int> feature_cardinalities = {});

  int K() const { return K_; }
  int p() const { return p_; }
  int S() const { return S_; }
  int d() const { return static_cast<int>(cardinalities_.size()); }
  std::size_t size() const { return n_; }
  bool has_clean_labels() const { return has_clean_; }
  const std::vector<int>& feature_cardinalities() const { return cardinalities_; }

  std::span<const double> x(std::size_t i) const { return {x_.data() + i * S_, static_cast<std::size_t>(S_)}; }
  std::span<const int> r(std::size_t i) const {
    return {r_.data() + i * cardinalities_.size(), cardinalities_.size()};
  }
  int y(std::size_t i) const { return y_[i]; }
  std::span<const int> noisy(std::size_t i) const { return {noisy_.data() + i * p_, static_cast<std::size_t>(p_)}; }

  /// Appends one record; throws ValidationError on out-of-range labels or
  /// wrong field lengths. Pass y = -1 only for datasets without clean labels.
  void push_back(std::span<const double> x, std::span<const int> r, int y, std::span<const int> noisy);
  void reserve(std::size_t n);

  Provenance provenance;

 private:
  int K_, p_, S_;
  std::vector<int> cardinalities_;
  std::size_t n_ = 0;
  bool has_clean_ = true;
  std::vector<double> x_;
  std::vector<int> r_;
  std::vector<int> y_;
  std::vector<int> noisy_;
};

/// T[i, i] = 1 - eps, T[i, (i + 1) mod K] = eps: each clean label moves to its
/// cyclic neighbour with probability eps.
TransitionMatrix asymmetric_T(int K, double eps);

/// n records with y ~ prior and p noisy labels drawn independently from row y of T.
NoisyDataset sample_iid_noisy(const Prior& prior, const TransitionMatrix& T, int p, std::size_t n,
                              std::uint64_t seed);

/// Test hooks that pin the random parts of instance_noise.
struct InstanceNoiseOverrides {
  std::optional<double> flip_rate;  // every q_n
  std::optional<Matrix> weights;    // W, S x K
};

struct InstanceNoise {
  std::vector<int> noisy;
  Matrix rows;                     // n x K, row n is the instance's row of T(X)
  std::vector<double> flip_rates;  // q_n
  Matrix weights;                  // W
};

/// Instance-dependent label noise:
///   q_n ~ N(eps, 0.1^2) truncated to [0, 1]; W ~ N(0, 1)^{S x K};
///   s = x_n W, s[y_n] = -inf, row = q_n softmax(s), row[y_n] = 1 - q_n,
///   noisy_n ~ row.
/// eps = 0 still flips labels, since the truncated normal keeps mass above 0.
InstanceNoise instance_noise(const Matrix& features, std::span<const int> clean, double eps, int K,
                             std::uint64_t seed, const InstanceNoiseOverrides& overrides = {});

/// Truncated normal N(mean, sd^2) on [lo, hi] by rejection.
double sample_truncated_normal(Rng& rng, double mean, double sd, double lo, double hi);

/// Full instance-noise dataset: x ~ N(0, I_S), y ~ prior, the first noisy label
/// from instance_noise and labels 2..p drawn i.i.d. from the same instance row.
/// When `rows_out` is set it receives the per-instance rows and flip rates.
NoisyDataset sample_instance_noisy(const Prior& prior, int S, double eps, int p, std::size_t n,
                                   std::uint64_t seed, InstanceNoise* rows_out = nullptr);

/// T(X) = sum_i w_i T_i for part matrices T_i.
struct PartModel {
  explicit PartModel(std::vector<TransitionMatrix> parts);
  std::vector<TransitionMatrix> parts;
};

/// Convex combination of the parts; throws ValidationError when `weights`
/// leaves the simplex by more than 1e-9.
TransitionMatrix part_dependent_T(std::span<const double> weights, const PartModel& model);

/// Discrete, unstructured domain of `domain_size` points X_0..X_{m-1} at
/// integer coordinates. Each point gets q_X drawn uniformly from `lambda`, and
/// a clean label drawn once from `label_prior`; the three noisy labels of a
/// triplet are drawn i.i.d. from row Y of `noise`.
struct UnstructuredParams {
  std::vector<double> lambda;
  int domain_size = 0;  // 0 means lambda.size()
  std::size_t N = 0;
  double epsilon_close = 0.0;
  Prior label_prior = Prior::uniform(2);
  TransitionMatrix noise = TransitionMatrix(Matrix::Identity(2, 2));

  int resolved_domain_size() const;
  void validate() const;
};

struct Triplet {
  std::array<std::size_t, 3> members{};  // anchor, nearest, second nearest
  std::array<int, 3> clean{};
  std::array<int, 3> noisy{};
  int y = 0;  // label shared by the tuple (the anchor's)
};

struct TripletDataset {
  int K = 2;
  std::vector<double> q;                 // per domain point
  std::vector<int> values;               // domain index of each instance
  std::vector<int> labels;               // clean label of each instance
  std::vector<Triplet> triplets;
  Provenance provenance;

  /// Smallest number of occurrences over all domain points.
  std::size_t min_occurrences() const;
  /// One record per triplet: x = anchor coordinate, y = tuple label, noisy = 3 labels.
  NoisyDataset to_noisy_dataset() const;
};

/// 4 sum(q) / min(q), the sample size above which every point recurs.
double two_nn_threshold(std::span<const double> q);

/// Samples the unstructured generation process. Nearest neighbours are taken
/// among the other instances; distance ties go to the lower instance index.
/// Throws ValidationError when N < 3.
TripletDataset unstructured_process(const UnstructuredParams& params, std::uint64_t seed);

struct TwoNNCheck {
  double fraction = 1.0;
  std::size_t triplets = 0;
  std::string warning;
};

/// Fraction of triplets whose three clean labels agree; 1.0 with a warning
/// for an empty triplet set.
TwoNNCheck check_2nn(const TripletDataset& ds);

}  // namespace noiseid
