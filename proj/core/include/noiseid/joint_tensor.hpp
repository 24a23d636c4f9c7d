#pragma once

#include <initializer_list>
#include <span>
#include <vector>

namespace noiseid {

/// Probability tensor over the joint outcomes of p observed variables,
/// stored row-major (the last axis varies fastest).
class JointTensor {
 public:
  JointTensor() = default;
  /// Zero tensor of the given shape.
  explicit JointTensor(std::vector<int> dims);
  /// Throws DimensionError when values.size() does not match the shape.
  JointTensor(std::vector<int> dims, std::vector<double> values);

  /// p-fold tensor with K outcomes on every axis.
  static JointTensor cube(int p, int K);

  int order() const { return static_cast<int>(dims_.size()); }
  const std::vector<int>& dims() const { return dims_; }
  /// Common axis cardinality; throws DimensionError if the axes differ.
  int K() const;
  std::size_t size() const { return values_.size(); }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  double operator()(std::span<const int> index) const { return values_[offset(index)]; }
  double& operator()(std::span<const int> index) { return values_[offset(index)]; }
  double operator()(std::initializer_list<int> index) const {
    return (*this)(std::span<const int>(index.begin(), index.size()));
  }

  std::size_t offset(std::span<const int> index) const;
  /// Multi-index of a flat offset.
  std::vector<int> unravel(std::size_t offset) const;

  double total() const;
  double min_value() const;

  /// Sums out one axis.
  JointTensor marginalize(int axis) const;

  /// Average over all p! axis permutations; requires equal cardinalities.
  JointTensor symmetrized() const;
  /// max |P - P o sigma| over axis permutations sigma.
  double symmetry_defect() const;

  /// Throws ValidationError unless entries are non-negative (down to
  /// -tolerance) and sum to 1 within `tolerance`.
  void validate_distribution(double tolerance = 1e-9) const;

 private:
  std::vector<int> dims_;
  std::vector<std::size_t> strides_;
  std::vector<double> values_;

  void init_strides();
};

}  // namespace noiseid
