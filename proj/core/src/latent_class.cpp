#include "noiseid/latent_class.hpp"

#include "noiseid/errors.hpp"
#include "noiseid/random.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace noiseid {

namespace {

// Parameter vector layout: prior logits, then the rows of each distinct
// factor, each row a softmax block.
struct Layout {
  int hidden = 0;
  int order = 0;
  bool tied = false;
  std::vector<int> dims;
  std::vector<int> factor_of_axis;   // axis -> distinct factor
  std::vector<int> factor_cols;      // distinct factor -> cardinality
  std::vector<int> factor_offset;    // distinct factor -> first parameter
  int size = 0;

  Layout(const std::vector<int>& axis_dims, int K, bool tie) : hidden(K), order(static_cast<int>(axis_dims.size())), tied(tie), dims(axis_dims) {
    int offset = K;
    for (int a = 0; a < order; ++a) {
      if (tied && a > 0) {
        factor_of_axis.push_back(0);
        continue;
      }
      factor_of_axis.push_back(static_cast<int>(factor_cols.size()));
      factor_cols.push_back(dims[static_cast<std::size_t>(a)]);
      factor_offset.push_back(offset);
      offset += K * dims[static_cast<std::size_t>(a)];
    }
    size = offset;
  }

  int factor_count() const { return static_cast<int>(factor_cols.size()); }
};

struct Params {
  Vector prior;
  std::vector<Matrix> factors;
};

void softmax_block(const double* logits, double* out, int n) {
  double peak = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) peak = std::max(peak, logits[i]);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    out[i] = std::exp(logits[i] - peak);
    total += out[i];
  }
  for (int i = 0; i < n; ++i) out[i] /= total;
}

Params decode(const Layout& L, const Vector& theta) {
  Params p;
  p.prior.resize(L.hidden);
  softmax_block(theta.data(), p.prior.data(), L.hidden);
  for (int f = 0; f < L.factor_count(); ++f) {
    const int cols = L.factor_cols[static_cast<std::size_t>(f)];
    Matrix m(L.hidden, cols);
    for (int y = 0; y < L.hidden; ++y) {
      softmax_block(theta.data() + L.factor_offset[static_cast<std::size_t>(f)] + y * cols,
                    m.data() + static_cast<std::ptrdiff_t>(y) * cols, cols);
    }
    p.factors.push_back(std::move(m));
  }
  return p;
}

Vector encode(const Layout& L, const Vector& prior, const std::vector<Matrix>& factors) {
  constexpr double floor = 1e-12;
  Vector theta(L.size);
  for (int y = 0; y < L.hidden; ++y) theta(y) = std::log(std::max(prior(y), floor));
  for (int f = 0; f < L.factor_count(); ++f) {
    const int cols = L.factor_cols[static_cast<std::size_t>(f)];
    for (int y = 0; y < L.hidden; ++y) {
      for (int j = 0; j < cols; ++j) {
        theta(L.factor_offset[static_cast<std::size_t>(f)] + y * cols + j) =
            std::log(std::max(factors[static_cast<std::size_t>(f)](y, j), floor));
      }
    }
  }
  return theta;
}

class Problem {
 public:
  Problem(const JointTensor& target, Layout layout) : L_(std::move(layout)) {
    const auto vals = target.values();
    target_ = Eigen::Map<const Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
    cells_.reserve(vals.size() * static_cast<std::size_t>(L_.order));
    for (std::size_t off = 0; off < vals.size(); ++off) {
      const auto idx = target.unravel(off);
      cells_.insert(cells_.end(), idx.begin(), idx.end());
    }
  }

  const Layout& layout() const { return L_; }

  // Residual (model - target) and, when requested, its Jacobian with respect
  // to the logits.
  double evaluate(const Vector& theta, Vector& residual, Matrix* jacobian) const {
    const Params p = decode(L_, theta);
    const auto n = target_.size();
    residual.resize(n);
    Matrix jp;
    if (jacobian) jp = Matrix::Zero(n, L_.size);
    std::vector<double> term(static_cast<std::size_t>(L_.order));
    for (Eigen::Index c = 0; c < n; ++c) {
      const int* idx = cells_.data() + c * L_.order;
      double value = 0.0;
      for (int y = 0; y < L_.hidden; ++y) {
        double prod = 1.0;
        for (int a = 0; a < L_.order; ++a) {
          term[static_cast<std::size_t>(a)] = p.factors[static_cast<std::size_t>(L_.factor_of_axis[static_cast<std::size_t>(a)])](y, idx[a]);
          prod *= term[static_cast<std::size_t>(a)];
        }
        value += p.prior(y) * prod;
        if (!jacobian) continue;
        jp(c, y) += prod;
        for (int a = 0; a < L_.order; ++a) {
          double others = p.prior(y);
          for (int b = 0; b < L_.order; ++b) {
            if (b != a) others *= term[static_cast<std::size_t>(b)];
          }
          const int f = L_.factor_of_axis[static_cast<std::size_t>(a)];
          const int cols = L_.factor_cols[static_cast<std::size_t>(f)];
          jp(c, L_.factor_offset[static_cast<std::size_t>(f)] + y * cols + idx[a]) += others;
        }
      }
      residual(c) = value - target_(c);
    }
    if (jacobian) {
      // Chain through each softmax block: d p_k / d theta_l = p_k (delta_kl - p_l).
      jacobian->resize(n, L_.size);
      auto chain = [&](int start, const double* probs, int width) {
        for (Eigen::Index c = 0; c < n; ++c) {
          double mean = 0.0;
          for (int l = 0; l < width; ++l) mean += jp(c, start + l) * probs[l];
          for (int k = 0; k < width; ++k) (*jacobian)(c, start + k) = probs[k] * (jp(c, start + k) - mean);
        }
      };
      chain(0, p.prior.data(), L_.hidden);
      for (int f = 0; f < L_.factor_count(); ++f) {
        const int cols = L_.factor_cols[static_cast<std::size_t>(f)];
        for (int y = 0; y < L_.hidden; ++y) {
          chain(L_.factor_offset[static_cast<std::size_t>(f)] + y * cols,
                p.factors[static_cast<std::size_t>(f)].data() + static_cast<std::ptrdiff_t>(y) * cols, cols);
        }
      }
    }
    return residual.squaredNorm();
  }

 private:
  Layout L_;
  Vector target_;
  std::vector<int> cells_;
};

struct LocalResult {
  Vector theta;
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
};

LocalResult levenberg_marquardt(const Problem& problem, Vector theta, const FitOptions& options) {
  Vector r, r_new;
  Matrix J;
  double cost = problem.evaluate(theta, r, &J);
  Matrix H = J.transpose() * J;
  Vector g = J.transpose() * r;
  double mu = 1e-3 * std::max(H.diagonal().maxCoeff(), 1e-12);
  LocalResult out;
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    if (2.0 * g.norm() < options.gradient_tolerance || cost < 1e-30) {
      out.converged = true;
      break;
    }
    bool accepted = false;
    while (!accepted) {
      Matrix A = H;
      A.diagonal().array() += mu;
      const Vector step = A.ldlt().solve(-g);
      const Vector trial = theta + step;
      const double trial_cost = problem.evaluate(trial, r_new, nullptr);
      if (std::isfinite(trial_cost) && trial_cost < cost) {
        theta = trial;
        cost = problem.evaluate(theta, r, &J);
        H = J.transpose() * J;
        g = J.transpose() * r;
        mu = std::max(mu / 3.0, 1e-20);
        accepted = true;
      } else {
        mu *= 4.0;
        if (mu > 1e20) break;
      }
    }
    if (!accepted) {
      // No descent direction left at machine precision.
      out.converged = 2.0 * g.norm() < std::sqrt(options.gradient_tolerance);
      break;
    }
  }
  out.theta = std::move(theta);
  out.cost = cost;
  out.iterations = it;
  return out;
}

// Simultaneous diagonalisation of two random contractions of an order-3
// tensor (Jennrich). Needs two axes of cardinality K; the hidden rows of the
// first such factor are the eigenvectors, the rest follow from one unfolding.
std::optional<Params> spectral_start(const JointTensor& target, int K, bool tied, std::uint64_t seed) {
  if (target.order() != 3) return std::nullopt;
  const auto& dims = target.dims();
  std::vector<int> square_axes;
  for (int a = 0; a < 3; ++a) {
    if (dims[static_cast<std::size_t>(a)] == K) square_axes.push_back(a);
  }
  if (square_axes.size() < 2) return std::nullopt;
  const int ax = square_axes[0], bx = square_axes[1];
  const int cx = 3 - ax - bx;
  const int kc = dims[static_cast<std::size_t>(cx)];

  auto at = [&](int i, int j, int k) {
    int idx[3];
    idx[ax] = i;
    idx[bx] = j;
    idx[cx] = k;
    return target(std::span<const int>(idx, 3));
  };

  Rng rng = Rng::substream(seed, 0x5eed5eedULL);
  Vector w1(kc), w2(kc);
  for (int k = 0; k < kc; ++k) {
    w1(k) = rng.uniform(0.5, 1.5);
    w2(k) = rng.uniform(0.5, 1.5);
  }
  Eigen::MatrixXd M1 = Eigen::MatrixXd::Zero(K, K), M2 = Eigen::MatrixXd::Zero(K, K);
  for (int i = 0; i < K; ++i) {
    for (int j = 0; j < K; ++j) {
      for (int k = 0; k < kc; ++k) {
        M1(i, j) += at(i, j, k) * w1(k);
        M2(i, j) += at(i, j, k) * w2(k);
      }
    }
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu2(M2);
  if (!lu2.isInvertible() || std::abs(lu2.rcond()) < 1e-12) return std::nullopt;
  Eigen::EigenSolver<Eigen::MatrixXd> eig(M1 * lu2.inverse());
  if (eig.info() != Eigen::Success) return std::nullopt;
  const Eigen::MatrixXd vectors = eig.eigenvectors().real();

  Matrix A(K, K);
  for (int y = 0; y < K; ++y) {
    const double sum = vectors.col(y).sum();
    if (std::abs(sum) < 1e-12) return std::nullopt;
    A.row(y) = vectors.col(y).transpose() / sum;
  }
  Eigen::FullPivLU<Eigen::MatrixXd> luA(A.transpose());
  if (!luA.isInvertible() || std::abs(luA.rcond()) < 1e-12) return std::nullopt;

  // Unfold along ax: P_(a) = A^T diag(prior) (B kr C)^T.
  const int kb = dims[static_cast<std::size_t>(bx)];
  Eigen::MatrixXd unfold(K, kb * kc);
  for (int i = 0; i < K; ++i) {
    for (int j = 0; j < kb; ++j) {
      for (int k = 0; k < kc; ++k) unfold(i, j * kc + k) = at(i, j, k);
    }
  }
  const Eigen::MatrixXd G = luA.solve(unfold);

  auto positive_row = [](Eigen::RowVectorXd v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = std::max(v(i), 1e-9);
    return Eigen::RowVectorXd(v / v.sum());
  };

  Vector prior(K);
  Matrix B(K, kb), C(K, kc);
  for (int y = 0; y < K; ++y) {
    const Eigen::RowVectorXd flat = G.row(y);
    const Eigen::MatrixXd s =
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(flat.data(), kb, kc);
    const double mass = s.sum();
    prior(y) = std::max(mass, 1e-9);
    const double scale = std::abs(mass) > 1e-12 ? mass : 1.0;
    B.row(y) = positive_row(s.rowwise().sum().transpose() / scale);
    C.row(y) = positive_row(s.colwise().sum() / scale);
    A.row(y) = positive_row(A.row(y));
  }
  prior /= prior.sum();

  Params p;
  p.prior = prior;
  if (tied) {
    p.factors.push_back(A);
  } else {
    p.factors.resize(3);
    p.factors[static_cast<std::size_t>(ax)] = A;
    p.factors[static_cast<std::size_t>(bx)] = B;
    p.factors[static_cast<std::size_t>(cx)] = C;
  }
  return p;
}

Vector random_start(const Layout& L, Rng& rng) {
  Vector theta(L.size);
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) = rng.normal();
  return theta;
}

}  // namespace

JointTensor latent_class_tensor(const Vector& prior, std::span<const Matrix> factors) {
  if (factors.empty()) throw DimensionError("latent class tensor needs at least one factor");
  std::vector<int> dims;
  for (const auto& f : factors) {
    if (f.rows() != prior.size()) throw DimensionError("factor rows must match the prior length");
    dims.push_back(static_cast<int>(f.cols()));
  }
  JointTensor out(dims);
  auto vals = out.values();
  for (std::size_t off = 0; off < vals.size(); ++off) {
    const auto idx = out.unravel(off);
    double v = 0.0;
    for (Eigen::Index y = 0; y < prior.size(); ++y) {
      double prod = prior(y);
      for (std::size_t a = 0; a < factors.size(); ++a) prod *= factors[a](y, idx[a]);
      v += prod;
    }
    vals[off] = v;
  }
  return out;
}

LatentClassFit fit_latent_class(const JointTensor& target, int hidden, bool tied,
                                const FitOptions& options) {
  if (hidden < 1) throw ValidationError("hidden cardinality must be >= 1");
  if (target.order() < 1) throw ValidationError("target tensor is empty");
  if (tied) target.K();
  if (options.restarts < 0) throw ValidationError("restarts must be >= 0");
  const Problem problem(target, Layout(target.dims(), hidden, tied));
  const Layout& L = problem.layout();

  struct Start {
    std::string origin;
    Vector theta;
  };
  std::vector<Start> starts;
  if (options.spectral_start) {
    if (auto s = spectral_start(target, hidden, tied, options.seed)) {
      starts.push_back({"spectral", encode(L, s->prior, s->factors)});
    }
  }
  for (int r = 0; r < options.restarts; ++r) {
    Rng rng = Rng::substream(options.seed, static_cast<std::uint64_t>(r));
    starts.push_back({"random", random_start(L, rng)});
  }
  if (starts.empty()) throw ValidationError("no starting points: restarts = 0 and no spectral start");

  LatentClassFit fit;
  Vector best_theta;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < starts.size(); ++i) {
    const LocalResult local = levenberg_marquardt(problem, starts[i].theta, options);
    fit.starts.push_back({static_cast<int>(i), starts[i].origin, local.cost, local.iterations, local.converged});
    if (local.cost < best) {
      best = local.cost;
      best_theta = local.theta;
      fit.best_start = static_cast<int>(i);
    }
  }
  Params p = decode(L, best_theta);
  fit.prior = std::move(p.prior);
  if (tied) {
    fit.factors.assign(static_cast<std::size_t>(L.order), p.factors.front());
  } else {
    fit.factors = std::move(p.factors);
  }
  fit.residual = best;
  return fit;
}

}  // namespace noiseid
