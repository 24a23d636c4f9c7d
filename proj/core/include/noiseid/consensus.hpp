#pragma once

#include "noiseid/joint_tensor.hpp"
#include "noiseid/latent_class.hpp"
#include "noiseid/matrices.hpp"
#include "noiseid/noisegen.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace noiseid {

// Binary convention: label index 0 is +1, index 1 is -1.

/// prior = (gamma, 1 - gamma), T = [[1 - e+, e+], [e-, 1 - e-]].
Scenario binary_scenario(double gamma, double e_plus, double e_minus);

/// P(noisy_1..noisy_p) = sum_y prior[y] prod_i T[y, noisy_i].
JointTensor exact_joint(const Scenario& s, int p);

/// Latent class tensor over distinct observation matrices.
JointTensor exact_joint(const Prior& prior, const std::vector<ObsMatrix>& models);

/// Frequencies of the noisy-label tuples, averaged over axis permutations.
/// Throws ValidationError on an empty dataset or one without noisy labels.
JointTensor empirical_joint(const NoisyDataset& ds);

struct BinaryStats {
  double posterior = 0.0;     // P(noisy = +1)
  double pos_consensus = 0.0; // P(noisy_1 = noisy_2 = +1)
  double neg_consensus = 0.0; // P(noisy_1 = noisy_2 = -1)
};

BinaryStats binary_stats(double gamma, double e_plus, double e_minus);

struct EstimateOptions {
  int restarts = 20;
  int max_iterations = 5000;
  double gradient_tolerance = 1e-10;
  double residual_warning = 1e-8;
  double symmetry_tolerance = 1e-8;
  std::uint64_t seed = 0;
  bool spectral_start = true;
  /// Align to this matrix instead of maximising the trace.
  std::optional<Matrix> truth;
};

struct EstimateResult {
  Scenario scenario;
  double residual = 0.0;
  std::vector<int> permutation;  // hidden relabelling applied to the raw fit
  std::vector<StartSummary> starts;
  int best_start = 0;
  std::vector<std::string> warnings;
};

/// Recovers (prior, T) from a symmetric joint of p >= 3 i.i.d. noisy labels
/// by multi-start moment matching. Throws CapabilityError for p < 3 and
/// ValidationError when the tensor is not a symmetric distribution. Poor
/// fits and degenerate solutions produce warnings, not errors.
EstimateResult estimate(const JointTensor& joint, const EstimateOptions& options = {});

void to_json(nlohmann::json& j, const EstimateResult& r);

struct Witness {
  double gamma = 0.0;
  double e_plus = 0.0;
  double e_minus = 0.0;
  double residual = 0.0;  // max-abs statistic difference from the input
  double distance = 0.0;  // max-abs parameter distance from the input
  int candidates = 0;     // gamma' values tried
};

/// A second binary parameter triple with the same two-label statistics,
/// found at max-abs distance >= 0.01 from the input and from its label swap
/// (1 - gamma, 1 - e-, 1 - e+). Candidates must keep gamma' inside
/// [1e-3, 1 - 1e-3] and |1 - e+' - e-'| >= 1e-3. Throws SearchExhaustedError
/// when none exists, ValidationError for parameters outside [0, 1].
Witness witness_p2(double gamma, double e_plus, double e_minus, std::uint64_t seed = 0);

void to_json(nlohmann::json& j, const Witness& w);

struct InverseRates {
  double pi_minus = 0.0;
  double pi_plus = 0.0;
};

/// pi- = pt-(1 - pt+)/(1 - pt- pt+), pi+ = pt+(1 - pt-)/(1 - pt- pt+).
/// Throws DegenerateError when pt- pt+ >= 1.
InverseRates mpe_forward(double pi_tilde_minus, double pi_tilde_plus);

struct MixtureProportions {
  double pi_tilde_minus = 0.0;
  double pi_tilde_plus = 0.0;
};

/// pt- = pi-/(1 - pi+), pt+ = pi+/(1 - pi-).
MixtureProportions mpe_inverse(double pi_minus, double pi_plus);

struct NoiseRates {
  double e_minus = 0.0;  // P(noisy = +1 | clean = -1)
  double e_plus = 0.0;   // P(noisy = -1 | clean = +1)
};

/// Noise rates from inverse noise rates and P(noisy = +1) via Bayes' rule.
/// Throws DegenerateError when a clean class has zero mass.
NoiseRates mpe_noise_rates(double pi_minus, double pi_plus, double p_tilde);

struct MpeRates {
  double pi_tilde_minus = 0.0;
  double pi_tilde_plus = 0.0;
  double pi_minus = 0.0;
  double pi_plus = 0.0;
  double e_minus = 0.0;
  double e_plus = 0.0;
  double p_tilde = 0.0;
};

/// All MPE quantities of a binary scenario, computed from the forward model.
MpeRates mpe_rates(const Scenario& s);

/// 100 * sum |T_hat - T| / K^2, optionally after aligning the rows of T_hat.
double err_metric(const Matrix& T_hat, const Matrix& T, bool permutation_invariant = false);

struct MixingBound {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = true;
};

/// lhs = |T1 - T*| + |T2 - T*|, rhs = |T1 - T2| / sqrt(2) (Frobenius).
MixingBound mixing_bound(const Matrix& T1, const Matrix& T2, const Matrix& T_star);

}  // namespace noiseid
