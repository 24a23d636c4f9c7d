#include "noiseid/features.hpp"

#include "noiseid/dataset_io.hpp"
#include "noiseid/errors.hpp"
#include "noiseid/latent_class.hpp"
#include "noiseid/random.hpp"

#include <algorithm>

namespace noiseid {

namespace {

constexpr int kMaxFeatureDraws = 1000;

nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
    out.push_back(row);
  }
  return out;
}

}  // namespace

std::vector<int> FeatureModel::cardinalities() const {
  std::vector<int> out;
  for (const auto& m : models) out.push_back(m.outcomes());
  return out;
}

FeatureModel gen_feature_model(HiddenSpace hidden, int d_star, const std::vector<int>& cardinalities,
                               int min_kruskal, std::uint64_t seed) {
  if (hidden.groups < 1 || hidden.labels < 2) throw ValidationError("hidden space needs >= 1 group and >= 2 labels");
  if (d_star < 1) throw ValidationError("d_star must be >= 1");
  if (cardinalities.size() != 1 && cardinalities.size() != static_cast<std::size_t>(d_star)) {
    throw DimensionError("cardinalities must have one entry or d_star entries");
  }
  const int K = hidden.size();
  FeatureModel fm{hidden, {}};
  for (int i = 0; i < d_star; ++i) {
    const int kappa = cardinalities.size() == 1 ? cardinalities.front() : cardinalities[static_cast<std::size_t>(i)];
    if (kappa < 2) throw ValidationError("feature cardinalities must be >= 2");
    if (min_kruskal > std::min(K, kappa)) {
      throw ValidationError("min_kruskal exceeds min(K_hidden, cardinality) for feature " + std::to_string(i + 1));
    }
    Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(i));
    bool done = false;
    for (int attempt = 0; attempt < kMaxFeatureDraws && !done; ++attempt) {
      Matrix m(K, kappa);
      for (int y = 0; y < K; ++y) {
        for (int k = 0; k < kappa; ++k) m(y, k) = rng.exponential();
        m.row(y) /= m.row(y).sum();
      }
      if (kruskal_rank(m) >= min_kruskal) {
        fm.models.emplace_back(std::move(m));
        done = true;
      }
    }
    if (!done) {
      throw SearchExhaustedError("feature " + std::to_string(i + 1) + ": no matrix with Kruskal rank >= " +
                                 std::to_string(min_kruskal) + " in " + std::to_string(kMaxFeatureDraws) +
                                 " draws");
    }
  }
  return fm;
}

NoisyDataset sample_with_features(const Prior& prior, const std::optional<TransitionMatrix>& T,
                                  const FeatureModel& fm, std::size_t n, std::uint64_t seed) {
  const int K = fm.K_hidden();
  if (prior.size() != K) throw DimensionError("prior length must equal the hidden cardinality");
  if (T && T->K() != K) throw DimensionError("T must share the hidden cardinality");
  NoisyDataset ds(K, T ? 1 : 0, 0, fm.cardinalities());
  ds.reserve(n);
  ds.provenance.model = "features";
  ds.provenance.seed = seed;
  nlohmann::json matrices = nlohmann::json::array();
  for (const auto& m : fm.models) matrices.push_back(matrix_json(m.entries()));
  ds.provenance.parameters["feature_matrices"] = matrices;
  ds.provenance.parameters["groups"] = fm.hidden.groups;
  Rng rng(seed);
  std::vector<int> r(static_cast<std::size_t>(fm.d()));
  std::vector<int> noisy(T ? 1 : 0);
  for (std::size_t i = 0; i < n; ++i) {
    const int h = rng.categorical(prior.span());
    for (int f = 0; f < fm.d(); ++f) r[static_cast<std::size_t>(f)] = rng.categorical(fm.models[static_cast<std::size_t>(f)].row(h));
    if (T) noisy[0] = rng.categorical(T->row(h));
    ds.push_back({}, r, h, noisy);
  }
  return ds;
}

ObservationModel stack_observations(const std::optional<TransitionMatrix>& T, const FeatureModel& fm) {
  ObservationModel obs;
  if (T) {
    if (T->K() != fm.K_hidden()) throw DimensionError("T must share the hidden cardinality");
    obs.add(*T);
  }
  for (const auto& m : fm.models) obs.add(m);
  return obs;
}

std::pair<ObsMatrix, ObsMatrix> group_meta_features(const FeatureModel& fm, const std::vector<int>& side_a,
                                                    const std::vector<int>& side_b) {
  if (side_a.empty() || side_b.empty()) throw ValidationError("both sides of a split must be non-empty");
  std::vector<int> seen(static_cast<std::size_t>(fm.d()), 0);
  for (const auto* side : {&side_a, &side_b}) {
    for (int i : *side) {
      if (i < 0 || i >= fm.d()) throw ValidationError("split index out of range");
      if (seen[static_cast<std::size_t>(i)]++) throw ValidationError("split sides overlap");
    }
  }
  if (std::count(seen.begin(), seen.end(), 0) != 0) throw ValidationError("split must cover every feature");

  const int K = fm.K_hidden();
  auto meta = [&](const std::vector<int>& side) {
    Matrix acc = Matrix::Ones(K, 1);
    for (int i : side) {
      const Matrix& m = fm.models[static_cast<std::size_t>(i)].entries();
      Matrix next(K, acc.cols() * m.cols());
      for (int y = 0; y < K; ++y) {
        for (Eigen::Index u = 0; u < acc.cols(); ++u) {
          for (Eigen::Index v = 0; v < m.cols(); ++v) next(y, u * m.cols() + v) = acc(y, u) * m(y, v);
        }
      }
      acc = std::move(next);
    }
    return ObsMatrix(acc, 1e-8);
  };
  return {meta(side_a), meta(side_b)};
}

FeatureEstimate estimate_from_joint(const JointTensor& joint, int K, const EstimateOptions& options) {
  if (joint.order() != 3) throw CapabilityError("feature estimation needs exactly three observed variables");
  if (joint.dims().back() != K) throw DimensionError("the last axis must be the noisy label with K outcomes");
  joint.validate_distribution(1e-6);

  FitOptions fo;
  fo.restarts = options.restarts;
  fo.max_iterations = options.max_iterations;
  fo.gradient_tolerance = options.gradient_tolerance;
  fo.seed = options.seed;
  fo.spectral_start = options.spectral_start;
  const LatentClassFit fit = fit_latent_class(joint, K, false, fo);

  const Matrix& rawT = fit.factors[2];
  const std::vector<int> perm =
      options.truth ? align_permutation(rawT, *options.truth).permutation : max_trace_permutation(rawT);
  auto tidy = [&](const Matrix& m) {
    Matrix out = permute_rows(m, perm);
    for (Eigen::Index i = 0; i < out.rows(); ++i) out.row(i) /= out.row(i).sum();
    return out;
  };
  Vector prior(K);
  for (int i = 0; i < K; ++i) prior(i) = fit.prior(perm[static_cast<std::size_t>(i)]);
  prior /= prior.sum();
  const Matrix T = tidy(rawT);

  FeatureEstimate r{Scenario(TransitionMatrix(T), Prior(prior)),
                    tidy(fit.factors[0]),
                    tidy(fit.factors[1]),
                    fit.residual,
                    perm,
                    fit.starts,
                    fit.best_start,
                    {}};
  const int kr_sum = kruskal_rank(r.M_a) + kruskal_rank(r.M_b) + kruskal_rank(T);
  if (kr_sum < 2 * K + 2) {
    r.warnings.push_back("fitted Kruskal ranks sum to " + std::to_string(kr_sum) + " < 2K + 2 = " +
                         std::to_string(2 * K + 2) + "; the recovered matrices are not unique");
  }
  if (prior.minCoeff() < 1e-6) r.warnings.push_back("recovered prior is degenerate");
  if (fit.residual > options.residual_warning) {
    r.warnings.push_back("no start reached residual " + format_double(options.residual_warning) +
                         "; returning the best fit (residual " + format_double(fit.residual) + ")");
  }
  if (!options.truth) {
    // A row swap that keeps the trace within 1e-6 makes the labelling ambiguous.
    bool ambiguous = false;
    for (int i = 0; i < K && !ambiguous; ++i) {
      for (int j = i + 1; j < K && !ambiguous; ++j) {
        ambiguous = T(i, j) + T(j, i) - T(i, i) - T(j, j) > -1e-6;
      }
    }
    if (ambiguous) r.warnings.push_back("T is not diagonally dominant; the label permutation is ambiguous");
  }
  return r;
}

FeatureEstimate estimate_from_features(const NoisyDataset& ds, const EstimateOptions& options, int a, int b) {
  if (ds.d() < 2) {
    throw CapabilityError("feature estimation needs at least two categorical features and one noisy label");
  }
  if (ds.p() < 1) throw CapabilityError("feature estimation needs a noisy-label column");
  if (a < 0 || b < 0 || a >= ds.d() || b >= ds.d() || a == b) throw ValidationError("feature indices are invalid");
  if (ds.size() == 0) throw ValidationError("dataset is empty");
  const auto& cards = ds.feature_cardinalities();
  JointTensor joint({cards[static_cast<std::size_t>(a)], cards[static_cast<std::size_t>(b)], ds.K()});
  const double w = 1.0 / static_cast<double>(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const int idx[3] = {ds.r(i)[static_cast<std::size_t>(a)], ds.r(i)[static_cast<std::size_t>(b)], ds.noisy(i)[0]};
    joint(std::span<const int>(idx, 3)) += w;
  }
  return estimate_from_joint(joint, ds.K(), options);
}

void to_json(nlohmann::json& j, const FeatureEstimate& r) {
  nlohmann::json starts = nlohmann::json::array();
  for (const auto& s : r.starts) {
    starts.push_back({{"index", s.index},
                      {"origin", s.origin},
                      {"residual", s.residual},
                      {"iterations", s.iterations},
                      {"converged", s.converged}});
  }
  j = {{"prior", std::vector<double>(r.scenario.prior.span().begin(), r.scenario.prior.span().end())},
       {"T", matrix_json(r.scenario.T.entries())},
       {"M_a", matrix_json(r.M_a)},
       {"M_b", matrix_json(r.M_b)},
       {"residual", r.residual},
       {"permutation", r.permutation},
       {"best_start", r.best_start},
       {"starts", starts},
       {"warnings", r.warnings}};
}

}  // namespace noiseid
