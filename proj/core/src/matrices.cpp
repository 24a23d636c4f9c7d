#include "noiseid/matrices.hpp"

#include "noiseid/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace noiseid {

namespace {

void validate_stochastic(const Matrix& m, double tolerance, const char* what) {
  if (m.rows() < 1 || m.cols() < 1) {
    throw ValidationError(std::string(what) + " must be non-empty");
  }
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double v = m(i, j);
      if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
        std::ostringstream msg;
        msg << what << " entry (" << i << ", " << j << ") = " << v << " is outside [0, 1]";
        throw ValidationError(msg.str());
      }
    }
    const double sum = m.row(i).sum();
    if (std::abs(sum - 1.0) > tolerance) {
      std::ostringstream msg;
      msg << what << " row " << i << " sums to " << sum << ", expected 1";
      throw ValidationError(msg.str());
    }
  }
}

// Ratio sigma_min / sigma_max of the selected rows, or 0 when the subset is
// wider than the column space.
double subset_ratio(const Matrix& m, std::span<const int> rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  if (n > m.cols()) return 0.0;
  Matrix sub(n, m.cols());
  for (Eigen::Index i = 0; i < n; ++i) sub.row(i) = m.row(rows[static_cast<std::size_t>(i)]);
  Eigen::JacobiSVD<Matrix> svd(sub);
  const auto& s = svd.singularValues();
  if (s(0) <= 0.0) return 0.0;
  return s(n - 1) / s(0);
}

// Advances `idx` to the next size-k combination of [0, n); false when done.
bool next_combination(std::vector<int>& idx, int n) {
  const int k = static_cast<int>(idx.size());
  int i = k - 1;
  while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - k + i) --i;
  if (i < 0) return false;
  ++idx[static_cast<std::size_t>(i)];
  for (int j = i + 1; j < k; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
  return true;
}

template <typename Score>
std::vector<int> best_permutation(int n, Score score) {
  if (n > kMaxAlignClasses) {
    throw CapabilityError("exhaustive permutation search supports at most " +
                          std::to_string(kMaxAlignClasses) + " labels, got " + std::to_string(n));
  }
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  double best_score = score(perm);
  // next_permutation walks in lexicographic order, so keeping the first
  // strict improvement resolves ties towards the smallest permutation.
  while (std::next_permutation(perm.begin(), perm.end())) {
    const double s = score(perm);
    if (s < best_score) {
      best_score = s;
      best = perm;
    }
  }
  return best;
}

}  // namespace

ObsMatrix::ObsMatrix(Matrix entries, double tolerance) : entries_(std::move(entries)) {
  validate_stochastic(entries_, tolerance, "observation matrix");
}

TransitionMatrix::TransitionMatrix(Matrix entries, double tolerance)
    : ObsMatrix(std::move(entries), tolerance) {
  if (entries_.rows() != entries_.cols()) {
    throw ValidationError("transition matrix must be square, got " + std::to_string(entries_.rows()) +
                          "x" + std::to_string(entries_.cols()));
  }
  if (entries_.rows() < 2) throw ValidationError("transition matrix needs K >= 2");
}

Prior::Prior(Vector weights, double tolerance) : weights_(std::move(weights)) {
  if (weights_.size() < 1) throw ValidationError("prior must be non-empty");
  for (Eigen::Index i = 0; i < weights_.size(); ++i) {
    if (!std::isfinite(weights_(i)) || weights_(i) < 0.0 || weights_(i) > 1.0) {
      throw ValidationError("prior entry " + std::to_string(i) + " is outside [0, 1]");
    }
  }
  const double sum = weights_.sum();
  if (std::abs(sum - 1.0) > tolerance) {
    std::ostringstream msg;
    msg << "prior sums to " << sum << ", expected 1";
    throw ValidationError(msg.str());
  }
}

Prior Prior::uniform(int K) { return Prior(Vector::Constant(K, 1.0 / K)); }

Scenario::Scenario(TransitionMatrix transition, Prior class_prior)
    : T(std::move(transition)), prior(std::move(class_prior)) {
  if (T.K() != prior.size()) {
    throw DimensionError("scenario prior has " + std::to_string(prior.size()) +
                         " classes but T is " + std::to_string(T.K()) + "x" + std::to_string(T.K()));
  }
}

KruskalAnalysis analyze_kruskal(const Matrix& m, double tolerance) {
  KruskalAnalysis out;
  const int rows = static_cast<int>(m.rows());
  if (rows == 0) return out;

  const double max_norm = m.rowwise().norm().maxCoeff();
  for (int i = 0; i < rows; ++i) {
    if (m.row(i).norm() <= tolerance * max_norm || max_norm == 0.0) {
      out.dependent_ratio = 0.0;
      return out;
    }
  }
  out.rank = 1;

  const int limit = std::min<int>(rows, static_cast<int>(m.cols()));
  for (int size = 2; size <= rows; ++size) {
    if (size > limit) {
      out.dependent_ratio = 0.0;
      return out;
    }
    std::vector<int> idx(static_cast<std::size_t>(size));
    std::iota(idx.begin(), idx.end(), 0);
    do {
      const double ratio = subset_ratio(m, idx);
      if (ratio <= tolerance) {
        out.dependent_ratio = ratio;
        return out;
      }
      out.independent_margin = std::min(out.independent_margin, ratio);
    } while (next_combination(idx, rows));
    out.rank = size;
  }
  return out;
}

int kruskal_rank(const Matrix& m, double tolerance) { return analyze_kruskal(m, tolerance).rank; }

int numerical_rank(const Matrix& m, double tolerance) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  if (s(0) <= 0.0) return 0;
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > tolerance * s(0)) ++rank;
  }
  return rank;
}

double frobenius_distance(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError("frobenius_distance: shapes " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()) + " differ");
  }
  return (a - b).norm();
}

Matrix permute_rows(const Matrix& source, std::span<const int> permutation) {
  if (static_cast<Eigen::Index>(permutation.size()) != source.rows()) {
    throw DimensionError("permutation length does not match row count");
  }
  Matrix out(source.rows(), source.cols());
  for (Eigen::Index i = 0; i < source.rows(); ++i) {
    out.row(i) = source.row(permutation[static_cast<std::size_t>(i)]);
  }
  return out;
}

Alignment align_permutation(const Matrix& estimate, const Matrix& reference) {
  if (estimate.rows() != reference.rows() || estimate.cols() != reference.cols()) {
    throw DimensionError("align_permutation: shapes differ");
  }
  const int n = static_cast<int>(estimate.rows());
  // Squared row distances precomputed once; each permutation is then O(n).
  Matrix cost(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) cost(i, j) = (reference.row(i) - estimate.row(j)).squaredNorm();
  }
  auto perm = best_permutation(n, [&](const std::vector<int>& p) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += cost(i, p[static_cast<std::size_t>(i)]);
    return s;
  });
  Alignment out;
  out.aligned = permute_rows(estimate, perm);
  out.distance = frobenius_distance(out.aligned, reference);
  out.permutation = std::move(perm);
  return out;
}

std::vector<int> max_trace_permutation(const Matrix& m) {
  if (m.rows() != m.cols()) throw DimensionError("max_trace_permutation needs a square matrix");
  const int n = static_cast<int>(m.rows());
  return best_permutation(n, [&](const std::vector<int>& p) {
    double trace = 0.0;
    for (int i = 0; i < n; ++i) trace += m(p[static_cast<std::size_t>(i)], i);
    return -trace;
  });
}

}  // namespace noiseid
