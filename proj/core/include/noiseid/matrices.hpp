#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace noiseid {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Row sums and simplex totals must match 1 within this.
inline constexpr double kStochasticTolerance = 1e-9;
/// Relative singular-value threshold for linear independence.
inline constexpr double kRankTolerance = 1e-8;
/// Exhaustive permutation search is limited to this many labels.
inline constexpr int kMaxAlignClasses = 10;

/// K x kappa matrix whose row j is the distribution of one observed variable
/// given hidden state j.
class ObsMatrix {
 public:
  /// Throws ValidationError unless every entry lies in [0, 1] and every row
  /// sums to 1 within `tolerance`.
  explicit ObsMatrix(Matrix entries, double tolerance = kStochasticTolerance);

  const Matrix& entries() const { return entries_; }
  int hidden() const { return static_cast<int>(entries_.rows()); }
  int outcomes() const { return static_cast<int>(entries_.cols()); }
  double operator()(int row, int col) const { return entries_(row, col); }

  std::span<const double> row(int r) const {
    return {entries_.data() + static_cast<std::ptrdiff_t>(r) * entries_.cols(),
            static_cast<std::size_t>(entries_.cols())};
  }

 protected:
  Matrix entries_;
};

/// Row-stochastic K x K noise transition matrix, entry (i, j) = P(noisy = j | clean = i).
class TransitionMatrix : public ObsMatrix {
 public:
  explicit TransitionMatrix(Matrix entries, double tolerance = kStochasticTolerance);

  int K() const { return hidden(); }
};

/// Class prior on K hidden labels.
class Prior {
 public:
  explicit Prior(Vector weights, double tolerance = kStochasticTolerance);

  static Prior uniform(int K);

  const Vector& weights() const { return weights_; }
  int size() const { return static_cast<int>(weights_.size()); }
  double operator[](int i) const { return weights_(i); }

  /// Every class has strictly positive mass.
  bool non_degenerate() const { return weights_.minCoeff() > 0.0; }

  std::span<const double> span() const {
    return {weights_.data(), static_cast<std::size_t>(weights_.size())};
  }

 private:
  Vector weights_;
};

/// One parameter point: a transition matrix together with a clean-label prior.
struct Scenario {
  Scenario(TransitionMatrix transition, Prior class_prior);

  int K() const { return T.K(); }

  TransitionMatrix T;
  Prior prior;
};

/// Largest I such that every set of I rows is linearly independent.
///
/// A subset counts as independent when its smallest singular value exceeds
/// `tolerance` times its largest. A (numerically) zero row makes the rank 0.
/// Subsets are enumerated by size, so the cost is exponential in the row
/// count; intended for the small K used throughout (at most 12 rows).
int kruskal_rank(const Matrix& m, double tolerance = kRankTolerance);

struct KruskalAnalysis {
  int rank = 0;
  /// Smallest sigma_min / sigma_max over all subsets judged independent.
  double independent_margin = 1.0;
  /// sigma_min / sigma_max of the first subset judged dependent; 0 for a zero
  /// row, and -1 when every examined subset was independent.
  double dependent_ratio = -1.0;
};

/// kruskal_rank plus the singular-value margins that decided it.
KruskalAnalysis analyze_kruskal(const Matrix& m, double tolerance = kRankTolerance);

/// Number of singular values above `tolerance` times the largest.
int numerical_rank(const Matrix& m, double tolerance = kRankTolerance);

/// Throws DimensionError on shape mismatch.
double frobenius_distance(const Matrix& a, const Matrix& b);

/// aligned.row(i) == source.row(permutation[i]).
Matrix permute_rows(const Matrix& source, std::span<const int> permutation);

struct Alignment {
  std::vector<int> permutation;
  Matrix aligned;
  double distance = 0.0;
};

/// Row permutation of `estimate` closest to `reference` in Frobenius norm.
/// Exhaustive search; exact ties resolve to the lexicographically smallest
/// permutation. Throws CapabilityError above kMaxAlignClasses rows.
Alignment align_permutation(const Matrix& estimate, const Matrix& reference);

/// Row permutation of a square matrix maximising its trace (diagonal
/// dominance convention for recovered noise matrices). Same limits and tie
/// rule as align_permutation.
std::vector<int> max_trace_permutation(const Matrix& m);

}  // namespace noiseid
