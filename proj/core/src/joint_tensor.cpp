#include "noiseid/joint_tensor.hpp"

#include "noiseid/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace noiseid {

namespace {

std::size_t product(const std::vector<int>& dims) {
  std::size_t n = 1;
  for (int d : dims) {
    if (d < 1) throw DimensionError("tensor axes need at least one outcome");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

}  // namespace

JointTensor::JointTensor(std::vector<int> dims) : dims_(std::move(dims)) {
  values_.assign(product(dims_), 0.0);
  init_strides();
}

JointTensor::JointTensor(std::vector<int> dims, std::vector<double> values)
    : dims_(std::move(dims)), values_(std::move(values)) {
  if (values_.size() != product(dims_)) {
    throw DimensionError("tensor has " + std::to_string(values_.size()) + " values, shape needs " +
                         std::to_string(product(dims_)));
  }
  init_strides();
}

JointTensor JointTensor::cube(int p, int K) {
  if (p < 1) throw ValidationError("tensor order must be >= 1");
  return JointTensor(std::vector<int>(static_cast<std::size_t>(p), K));
}

void JointTensor::init_strides() {
  strides_.assign(dims_.size(), 1);
  for (int a = static_cast<int>(dims_.size()) - 2; a >= 0; --a) {
    const auto u = static_cast<std::size_t>(a);
    strides_[u] = strides_[u + 1] * static_cast<std::size_t>(dims_[u + 1]);
  }
}

int JointTensor::K() const {
  if (dims_.empty()) throw DimensionError("empty tensor has no cardinality");
  for (int d : dims_) {
    if (d != dims_.front()) throw DimensionError("tensor axes have different cardinalities");
  }
  return dims_.front();
}

std::size_t JointTensor::offset(std::span<const int> index) const {
  if (index.size() != dims_.size()) throw DimensionError("index order does not match tensor order");
  std::size_t off = 0;
  for (std::size_t a = 0; a < dims_.size(); ++a) {
    if (index[a] < 0 || index[a] >= dims_[a]) throw DimensionError("tensor index out of range");
    off += static_cast<std::size_t>(index[a]) * strides_[a];
  }
  return off;
}

std::vector<int> JointTensor::unravel(std::size_t off) const {
  std::vector<int> idx(dims_.size());
  for (std::size_t a = 0; a < dims_.size(); ++a) {
    idx[a] = static_cast<int>(off / strides_[a]);
    off %= strides_[a];
  }
  return idx;
}

double JointTensor::total() const { return std::accumulate(values_.begin(), values_.end(), 0.0); }

double JointTensor::min_value() const {
  return values_.empty() ? 0.0 : *std::min_element(values_.begin(), values_.end());
}

JointTensor JointTensor::marginalize(int axis) const {
  if (axis < 0 || axis >= order()) throw DimensionError("marginalize: axis out of range");
  if (order() == 1) throw DimensionError("cannot marginalize the only axis");
  std::vector<int> dims = dims_;
  dims.erase(dims.begin() + axis);
  JointTensor out(dims);
  std::vector<int> reduced(dims.size());
  for (std::size_t off = 0; off < values_.size(); ++off) {
    const auto idx = unravel(off);
    std::size_t k = 0;
    for (int a = 0; a < order(); ++a) {
      if (a != axis) reduced[k++] = idx[static_cast<std::size_t>(a)];
    }
    out(reduced) += values_[off];
  }
  return out;
}

JointTensor JointTensor::symmetrized() const {
  K();
  std::vector<int> perm(dims_.size());
  std::iota(perm.begin(), perm.end(), 0);
  JointTensor out(dims_);
  std::vector<int> permuted(dims_.size());
  std::size_t count = 0;
  do {
    ++count;
    for (std::size_t off = 0; off < values_.size(); ++off) {
      const auto idx = unravel(off);
      for (std::size_t a = 0; a < idx.size(); ++a) permuted[a] = idx[static_cast<std::size_t>(perm[a])];
      out.values_[off] += values_[offset(permuted)];
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  for (auto& v : out.values_) v /= static_cast<double>(count);
  return out;
}

double JointTensor::symmetry_defect() const {
  for (int d : dims_) {
    if (d != dims_.front()) return std::numeric_limits<double>::infinity();
  }
  std::vector<int> perm(dims_.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> permuted(dims_.size());
  double worst = 0.0;
  while (std::next_permutation(perm.begin(), perm.end())) {
    for (std::size_t off = 0; off < values_.size(); ++off) {
      const auto idx = unravel(off);
      for (std::size_t a = 0; a < idx.size(); ++a) permuted[a] = idx[static_cast<std::size_t>(perm[a])];
      worst = std::max(worst, std::abs(values_[off] - values_[offset(permuted)]));
    }
  }
  return worst;
}

void JointTensor::validate_distribution(double tolerance) const {
  if (values_.empty()) throw ValidationError("tensor is empty");
  for (double v : values_) {
    if (!std::isfinite(v) || v < -tolerance) throw ValidationError("tensor has a negative or non-finite entry");
  }
  const double t = total();
  if (std::abs(t - 1.0) > tolerance) {
    std::ostringstream s;
    s << "tensor sums to " << t << ", expected 1";
    throw ValidationError(s.str());
  }
}

}  // namespace noiseid
