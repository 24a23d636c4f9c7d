#pragma once

#include "noiseid/joint_tensor.hpp"
#include "noiseid/matrices.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace noiseid {

/// P[j_1..j_p] = sum_y prior[y] prod_a F_a[y, j_a] for factor matrices F_a
/// (hidden x cardinality of axis a).
JointTensor latent_class_tensor(const Vector& prior, std::span<const Matrix> factors);

struct FitOptions {
  int restarts = 20;
  int max_iterations = 5000;
  double gradient_tolerance = 1e-10;
  std::uint64_t seed = 0;
  /// Adds a simultaneous-diagonalisation start ahead of the random ones
  /// (order-3 tensors with two axes of cardinality K only).
  bool spectral_start = true;
};

struct StartSummary {
  int index = 0;
  std::string origin;  // "spectral" or "random"
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct LatentClassFit {
  Vector prior;
  std::vector<Matrix> factors;  // one per axis (a single shared one when tied)
  double residual = 0.0;        // sum of squared cell differences
  int best_start = 0;
  std::vector<StartSummary> starts;
};

/// Least-squares moment matching of a latent class model to `target`.
///
/// Prior and factor rows live on simplices through softmax coordinates. Each
/// start is refined by Levenberg-Marquardt until the gradient norm drops
/// below the tolerance, the iteration budget is spent, or damping stalls.
/// Random start r uses Rng::substream(seed, r), so the result depends only on
/// the options. With `tied`, all axes share one factor (i.i.d. labels).
LatentClassFit fit_latent_class(const JointTensor& target, int hidden, bool tied,
                                const FitOptions& options);

}  // namespace noiseid
