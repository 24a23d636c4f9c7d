#include "noiseid/consensus.hpp"

#include "noiseid/dataset_io.hpp"
#include "noiseid/errors.hpp"
#include "noiseid/random.hpp"

#include <algorithm>
#include <cmath>

namespace noiseid {

namespace {

void require_unit(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) throw ValidationError(std::string(name) + " must lie in [0, 1]");
}

double max_abs(std::initializer_list<double> values) {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

constexpr double kSnapThreshold = 1e-7;

double squared_residual(const JointTensor& a, const JointTensor& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.values()[i] - b.values()[i];
    sum += d * d;
  }
  return sum;
}

// P(noisy_1, noisy_2) as a K x K matrix.
Matrix pairwise_moments(const JointTensor& joint) {
  JointTensor t = joint;
  while (t.order() > 2) t = t.marginalize(t.order() - 1);
  const int K = t.K();
  Matrix m(K, K);
  for (int i = 0; i < K; ++i) {
    for (int j = 0; j < K; ++j) m(i, j) = t({i, j});
  }
  return m;
}

}  // namespace

Scenario binary_scenario(double gamma, double e_plus, double e_minus) {
  require_unit(gamma, "gamma");
  require_unit(e_plus, "e_plus");
  require_unit(e_minus, "e_minus");
  Matrix T(2, 2);
  T << 1.0 - e_plus, e_plus, e_minus, 1.0 - e_minus;
  Vector prior(2);
  prior << gamma, 1.0 - gamma;
  return Scenario(TransitionMatrix(T), Prior(prior));
}

JointTensor exact_joint(const Scenario& s, int p) {
  if (p < 1) throw ValidationError("exact_joint needs p >= 1");
  const std::vector<Matrix> factors(static_cast<std::size_t>(p), s.T.entries());
  return latent_class_tensor(s.prior.weights(), factors);
}

JointTensor exact_joint(const Prior& prior, const std::vector<ObsMatrix>& models) {
  std::vector<Matrix> factors;
  factors.reserve(models.size());
  for (const auto& m : models) factors.push_back(m.entries());
  return latent_class_tensor(prior.weights(), factors);
}

JointTensor empirical_joint(const NoisyDataset& ds) {
  if (ds.size() == 0) throw ValidationError("empirical_joint: dataset is empty");
  if (ds.p() < 1) throw ValidationError("empirical_joint: dataset has no noisy labels");
  JointTensor counts = JointTensor::cube(ds.p(), ds.K());
  const double w = 1.0 / static_cast<double>(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) counts(ds.noisy(i)) += w;
  return counts.symmetrized();
}

BinaryStats binary_stats(double gamma, double e_plus, double e_minus) {
  require_unit(gamma, "gamma");
  require_unit(e_plus, "e_plus");
  require_unit(e_minus, "e_minus");
  BinaryStats s;
  s.posterior = gamma * (1.0 - e_plus) + (1.0 - gamma) * e_minus;
  s.pos_consensus = gamma * (1.0 - e_plus) * (1.0 - e_plus) + (1.0 - gamma) * e_minus * e_minus;
  s.neg_consensus = gamma * e_plus * e_plus + (1.0 - gamma) * (1.0 - e_minus) * (1.0 - e_minus);
  return s;
}

EstimateResult estimate(const JointTensor& joint, const EstimateOptions& options) {
  if (joint.order() < 3) {
    throw CapabilityError("estimation needs at least three noisy labels per instance; got " +
                          std::to_string(joint.order()));
  }
  const int K = joint.K();
  if (K < 2) throw ValidationError("estimation needs K >= 2");
  joint.validate_distribution(1e-6);
  const double defect = joint.symmetry_defect();
  if (defect > options.symmetry_tolerance) {
    throw ValidationError("joint tensor is not symmetric under axis permutations (defect " +
                          std::to_string(defect) + ")");
  }

  FitOptions fo;
  fo.restarts = options.restarts;
  fo.max_iterations = options.max_iterations;
  fo.gradient_tolerance = options.gradient_tolerance;
  fo.seed = options.seed;
  fo.spectral_start = options.spectral_start;
  const LatentClassFit fit = fit_latent_class(joint, K, true, fo);

  const Matrix& raw = fit.factors.front();
  std::vector<int> perm;
  if (options.truth) {
    perm = align_permutation(raw, *options.truth).permutation;
  } else {
    perm = max_trace_permutation(raw);
  }
  Matrix T = permute_rows(raw, perm);
  Vector prior(K);
  for (int i = 0; i < K; ++i) prior(i) = fit.prior(perm[static_cast<std::size_t>(i)]);
  // Clean up softmax rounding so the result passes the stochastic checks.
  for (int i = 0; i < K; ++i) T.row(i) /= T.row(i).sum();
  prior /= prior.sum();

  // Softmax coordinates never reach the simplex boundary; snap tiny entries
  // to zero and keep the snapped point when it fits no worse.
  double residual = fit.residual;
  {
    Matrix T0 = (T.array() < kSnapThreshold).select(0.0, T);
    Vector p0 = (prior.array() < kSnapThreshold).select(0.0, prior);
    for (int i = 0; i < K; ++i) T0.row(i) /= T0.row(i).sum();
    p0 /= p0.sum();
    const Scenario candidate{TransitionMatrix(T0), Prior(p0)};
    const double snapped = squared_residual(exact_joint(candidate, joint.order()), joint);
    if (snapped <= residual) {
      T = T0;
      prior = p0;
      residual = snapped;
    }
  }

  EstimateResult r{Scenario(TransitionMatrix(T), Prior(prior)), residual, perm, fit.starts,
                   fit.best_start, {}};
  const int moment_rank = numerical_rank(pairwise_moments(joint));
  if (moment_rank < K) {
    r.warnings.push_back("pairwise moment matrix has rank " + std::to_string(moment_rank) + " < K = " +
                         std::to_string(K) + ": the label is not informative or the prior is degenerate");
  }
  if (prior.minCoeff() < 1e-6) {
    r.warnings.push_back("recovered prior is degenerate; uniqueness is not guaranteed");
  }
  if (numerical_rank(T) < K) {
    r.warnings.push_back("recovered T is not full rank; the label is not informative and uniqueness is not guaranteed");
  }
  if (residual > options.residual_warning) {
    r.warnings.push_back("no start reached residual " + format_double(options.residual_warning) +
                         "; returning the best fit (residual " + format_double(residual) + ")");
  }
  return r;
}

void to_json(nlohmann::json& j, const EstimateResult& r) {
  nlohmann::json T = nlohmann::json::array();
  for (int i = 0; i < r.scenario.K(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < r.scenario.K(); ++c) row.push_back(r.scenario.T(i, c));
    T.push_back(row);
  }
  nlohmann::json starts = nlohmann::json::array();
  for (const auto& s : r.starts) {
    starts.push_back({{"index", s.index},
                      {"origin", s.origin},
                      {"residual", s.residual},
                      {"iterations", s.iterations},
                      {"converged", s.converged}});
  }
  j = {{"prior", std::vector<double>(r.scenario.prior.span().begin(), r.scenario.prior.span().end())},
       {"T", T},
       {"residual", r.residual},
       {"permutation", r.permutation},
       {"best_start", r.best_start},
       {"starts", starts},
       {"warnings", r.warnings}};
}

Witness witness_p2(double gamma, double e_plus, double e_minus, std::uint64_t seed) {
  const BinaryStats target = binary_stats(gamma, e_plus, e_minus);
  const double P = target.posterior;
  const double spread = target.pos_consensus - P * P;  // variance-like term, >= 0

  std::vector<double> candidates;
  for (double step : {0.1, 0.05, 0.2, 0.15, 0.25, 0.3, 0.02, 0.4}) {
    candidates.push_back(gamma + step);
    candidates.push_back(gamma - step);
  }
  for (int k = 1; k < 100; ++k) candidates.push_back(0.01 * k);
  Rng rng(seed);
  for (int k = 0; k < 200; ++k) candidates.push_back(rng.uniform(1e-3, 1.0 - 1e-3));

  const double sg = 1.0 - gamma, sp = 1.0 - e_minus, sm = 1.0 - e_plus;  // label swap
  Witness w;
  for (double g : candidates) {
    ++w.candidates;
    if (g < 1e-3 || g > 1.0 - 1e-3) continue;
    // With gamma' fixed, posterior and positive consensus pin a = 1 - e+' and
    // b = e-' through a quadratic; negative consensus then follows.
    const double root_a = std::sqrt(std::max(0.0, (1.0 - g) * spread / g));
    const double root_b = std::sqrt(std::max(0.0, g * spread / (1.0 - g)));
    for (int sign : {1, -1}) {
      const double a = P + sign * root_a;
      const double b = P - sign * root_b;
      const double ep = 1.0 - a, em = b;
      if (ep < 0.0 || ep > 1.0 || em < 0.0 || em > 1.0) continue;
      if (std::abs(1.0 - ep - em) < 1e-3) continue;
      const double d_in = max_abs({g - gamma, ep - e_plus, em - e_minus});
      const double d_swap = max_abs({g - sg, ep - sp, em - sm});
      if (d_in < 0.01 || d_swap < 0.01) continue;
      const BinaryStats s = binary_stats(g, ep, em);
      const double residual = max_abs({s.posterior - target.posterior, s.pos_consensus - target.pos_consensus,
                                       s.neg_consensus - target.neg_consensus});
      if (residual > 1e-8) continue;
      w.gamma = g;
      w.e_plus = ep;
      w.e_minus = em;
      w.residual = residual;
      w.distance = d_in;
      return w;
    }
  }
  throw SearchExhaustedError("no alternative parameters found after " + std::to_string(w.candidates) +
                             " candidate priors");
}

void to_json(nlohmann::json& j, const Witness& w) {
  j = {{"gamma", w.gamma},         {"e_plus", w.e_plus},     {"e_minus", w.e_minus},
       {"residual", w.residual},   {"distance", w.distance}, {"candidates", w.candidates}};
}

InverseRates mpe_forward(double pi_tilde_minus, double pi_tilde_plus) {
  const double denom = 1.0 - pi_tilde_minus * pi_tilde_plus;
  if (denom <= 0.0) throw DegenerateError("mpe_forward: pi_tilde_minus * pi_tilde_plus must be < 1");
  return {pi_tilde_minus * (1.0 - pi_tilde_plus) / denom, pi_tilde_plus * (1.0 - pi_tilde_minus) / denom};
}

MixtureProportions mpe_inverse(double pi_minus, double pi_plus) {
  if (pi_plus >= 1.0 || pi_minus >= 1.0) throw DegenerateError("mpe_inverse: inverse noise rates must be < 1");
  return {pi_minus / (1.0 - pi_plus), pi_plus / (1.0 - pi_minus)};
}

NoiseRates mpe_noise_rates(double pi_minus, double pi_plus, double p_tilde) {
  const double neg_mass = pi_plus * p_tilde + (1.0 - pi_minus) * (1.0 - p_tilde);
  const double pos_mass = (1.0 - pi_plus) * p_tilde + pi_minus * (1.0 - p_tilde);
  if (neg_mass <= 0.0 || pos_mass <= 0.0) throw DegenerateError("mpe_noise_rates: a clean class has zero mass");
  return {pi_plus * p_tilde / neg_mass, pi_minus * (1.0 - p_tilde) / pos_mass};
}

MpeRates mpe_rates(const Scenario& s) {
  if (s.K() != 2) throw DimensionError("mpe_rates needs a binary scenario");
  const double gamma = s.prior[0];
  const double e_plus = s.T(0, 1), e_minus = s.T(1, 0);
  MpeRates m;
  m.p_tilde = gamma * (1.0 - e_plus) + (1.0 - gamma) * e_minus;
  if (m.p_tilde <= 0.0 || m.p_tilde >= 1.0) throw DegenerateError("mpe_rates: a noisy class has zero mass");
  m.pi_minus = gamma * e_plus / (1.0 - m.p_tilde);
  m.pi_plus = (1.0 - gamma) * e_minus / m.p_tilde;
  const MixtureProportions mp = mpe_inverse(m.pi_minus, m.pi_plus);
  m.pi_tilde_minus = mp.pi_tilde_minus;
  m.pi_tilde_plus = mp.pi_tilde_plus;
  m.e_minus = e_minus;
  m.e_plus = e_plus;
  return m;
}

double err_metric(const Matrix& T_hat, const Matrix& T, bool permutation_invariant) {
  if (T_hat.rows() != T.rows() || T_hat.cols() != T.cols()) {
    throw DimensionError("err_metric: shapes differ");
  }
  const Matrix est = permutation_invariant ? align_permutation(T_hat, T).aligned : T_hat;
  const double K = static_cast<double>(T.rows());
  return (est - T).cwiseAbs().sum() / (K * K) * 100.0;
}

MixingBound mixing_bound(const Matrix& T1, const Matrix& T2, const Matrix& T_star) {
  MixingBound b;
  b.lhs = frobenius_distance(T1, T_star) + frobenius_distance(T2, T_star);
  b.rhs = frobenius_distance(T1, T2) / std::sqrt(2.0);
  b.holds = b.lhs >= b.rhs - 1e-12;
  return b;
}

}  // namespace noiseid
