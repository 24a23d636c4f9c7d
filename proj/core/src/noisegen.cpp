#include "noiseid/noisegen.hpp"

#include "noiseid/errors.hpp"
#include "noiseid/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace noiseid {

NoisyDataset::NoisyDataset(int K, int p, int S, std::vector<int> feature_cardinalities)
    : K_(K), p_(p), S_(S), cardinalities_(std::move(feature_cardinalities)) {
  if (K < 2) throw ValidationError("dataset needs K >= 2");
  if (p < 0 || S < 0) throw ValidationError("dataset p and S must be non-negative");
  for (int c : cardinalities_) {
    if (c < 2) throw ValidationError("feature cardinalities must be >= 2");
  }
}

void NoisyDataset::reserve(std::size_t n) {
  x_.reserve(n * static_cast<std::size_t>(S_));
  r_.reserve(n * cardinalities_.size());
  y_.reserve(n);
  noisy_.reserve(n * static_cast<std::size_t>(p_));
}

void NoisyDataset::push_back(std::span<const double> x, std::span<const int> r, int y,
                             std::span<const int> noisy) {
  if (x.size() != static_cast<std::size_t>(S_) || r.size() != cardinalities_.size() ||
      noisy.size() != static_cast<std::size_t>(p_)) {
    throw ValidationError("record " + std::to_string(n_) + " has the wrong number of fields");
  }
  if (y < -1 || y >= K_) throw ValidationError("record " + std::to_string(n_) + ": clean label out of range");
  if (y == -1) {
    if (n_ > 0 && has_clean_) throw ValidationError("clean labels must be present for all records or none");
    has_clean_ = false;
  } else if (!has_clean_) {
    throw ValidationError("clean labels must be present for all records or none");
  }
  for (int v : noisy) {
    if (v < 0 || v >= K_) throw ValidationError("record " + std::to_string(n_) + ": noisy label out of range");
  }
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (r[i] < 0 || r[i] >= cardinalities_[i]) {
      throw ValidationError("record " + std::to_string(n_) + ": feature " + std::to_string(i + 1) +
                            " category out of range");
    }
  }
  x_.insert(x_.end(), x.begin(), x.end());
  r_.insert(r_.end(), r.begin(), r.end());
  y_.push_back(y);
  noisy_.insert(noisy_.end(), noisy.begin(), noisy.end());
  ++n_;
}

TransitionMatrix asymmetric_T(int K, double eps) {
  if (K < 2) throw ValidationError("asymmetric_T needs K >= 2");
  if (!(eps >= 0.0 && eps <= 1.0)) throw ValidationError("asymmetric noise rate must lie in [0, 1]");
  Matrix T = Matrix::Zero(K, K);
  for (int i = 0; i < K; ++i) {
    T(i, i) += 1.0 - eps;
    T(i, (i + 1) % K) += eps;
  }
  return TransitionMatrix(std::move(T));
}

NoisyDataset sample_iid_noisy(const Prior& prior, const TransitionMatrix& T, int p, std::size_t n,
                              std::uint64_t seed) {
  if (prior.size() != T.K()) throw DimensionError("prior and T disagree on K");
  if (p < 1) throw ValidationError("sample_iid_noisy needs p >= 1");
  if (n < 1) throw ValidationError("sample_iid_noisy needs n >= 1");
  NoisyDataset ds(T.K(), p, 0);
  ds.reserve(n);
  Rng rng(seed);
  std::vector<int> labels(static_cast<std::size_t>(p));
  for (std::size_t i = 0; i < n; ++i) {
    const int y = rng.categorical(prior.span());
    for (auto& l : labels) l = rng.categorical(T.row(y));
    ds.push_back({}, {}, y, labels);
  }
  ds.provenance.model = "iid";
  ds.provenance.seed = seed;
  return ds;
}

double sample_truncated_normal(Rng& rng, double mean, double sd, double lo, double hi) {
  for (;;) {
    const double v = rng.normal(mean, sd);
    if (v >= lo && v <= hi) return v;
  }
}

InstanceNoise instance_noise(const Matrix& features, std::span<const int> clean, double eps, int K,
                             std::uint64_t seed, const InstanceNoiseOverrides& overrides) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw ValidationError("instance noise rate must lie in [0, 1]");
  if (K < 2) throw ValidationError("instance_noise needs K >= 2");
  const auto n = static_cast<std::size_t>(features.rows());
  if (n == 0) throw ValidationError("instance_noise needs at least one example");
  if (clean.size() != n) throw DimensionError("features and clean labels differ in length");
  if (!features.allFinite()) throw ValidationError("features must be finite");
  for (int y : clean) {
    if (y < 0 || y >= K) throw ValidationError("clean label out of range");
  }
  const auto S = features.cols();
  if (overrides.flip_rate && !(*overrides.flip_rate >= 0.0 && *overrides.flip_rate <= 1.0)) {
    throw ValidationError("flip rate override must lie in [0, 1]");
  }
  if (overrides.weights && (overrides.weights->rows() != S || overrides.weights->cols() != K)) {
    throw DimensionError("weight override must be S x K");
  }

  Rng rng(seed);
  InstanceNoise out;
  out.flip_rates.resize(n);
  for (auto& q : out.flip_rates) {
    q = overrides.flip_rate ? *overrides.flip_rate : sample_truncated_normal(rng, eps, 0.1, 0.0, 1.0);
  }
  if (overrides.weights) {
    out.weights = *overrides.weights;
  } else {
    out.weights.resize(S, K);
    for (Eigen::Index i = 0; i < S; ++i) {
      for (int j = 0; j < K; ++j) out.weights(i, j) = rng.normal();
    }
  }

  out.rows.resize(static_cast<Eigen::Index>(n), K);
  out.noisy.resize(n);
  Eigen::RowVectorXd scores(K);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const int y = clean[i];
    const double q = out.flip_rates[i];
    scores = features.row(row) * out.weights;
    scores(y) = -std::numeric_limits<double>::infinity();
    double peak = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < K; ++j) peak = std::max(peak, scores(j));
    double total = 0.0;
    for (int j = 0; j < K; ++j) {
      scores(j) = j == y ? 0.0 : std::exp(scores(j) - peak);
      total += scores(j);
    }
    for (int j = 0; j < K; ++j) out.rows(row, j) = q * scores(j) / total;
    out.rows(row, y) = 1.0 - q;
    out.noisy[i] = rng.categorical({out.rows.data() + row * K, static_cast<std::size_t>(K)});
  }
  return out;
}

NoisyDataset sample_instance_noisy(const Prior& prior, int S, double eps, int p, std::size_t n,
                                   std::uint64_t seed, InstanceNoise* rows_out) {
  if (S < 1) throw ValidationError("instance noise needs S >= 1 features");
  if (p < 1) throw ValidationError("instance noise needs p >= 1");
  if (n < 1) throw ValidationError("instance noise needs n >= 1");
  const int K = prior.size();
  Rng rng = Rng::substream(seed, 0);
  Matrix features(static_cast<Eigen::Index>(n), S);
  std::vector<int> clean(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int s = 0; s < S; ++s) features(static_cast<Eigen::Index>(i), s) = rng.normal();
    clean[i] = rng.categorical(prior.span());
  }
  InstanceNoise noise = instance_noise(features, clean, eps, K, Rng::substream(seed, 1)(), {});

  Rng extra = Rng::substream(seed, 2);
  NoisyDataset ds(K, p, S);
  ds.reserve(n);
  std::vector<int> labels(static_cast<std::size_t>(p));
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    labels[0] = noise.noisy[i];
    for (int k = 1; k < p; ++k) {
      labels[static_cast<std::size_t>(k)] =
          extra.categorical({noise.rows.data() + row * K, static_cast<std::size_t>(K)});
    }
    ds.push_back({features.data() + row * S, static_cast<std::size_t>(S)}, {}, clean[i], labels);
  }
  ds.provenance.model = "instance";
  ds.provenance.seed = seed;
  ds.provenance.parameters = {{"eps", eps}, {"S", S}};
  if (rows_out) *rows_out = std::move(noise);
  return ds;
}

PartModel::PartModel(std::vector<TransitionMatrix> matrices) : parts(std::move(matrices)) {
  if (parts.empty()) throw ValidationError("part model needs at least one part");
  for (const auto& t : parts) {
    if (t.K() != parts.front().K()) throw DimensionError("part matrices disagree on K");
  }
}

TransitionMatrix part_dependent_T(std::span<const double> weights, const PartModel& model) {
  if (weights.size() != model.parts.size()) {
    throw DimensionError("got " + std::to_string(weights.size()) + " weights for " +
                         std::to_string(model.parts.size()) + " parts");
  }
  double sum = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < -1e-9) throw ValidationError("part weights must be non-negative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("part weights must sum to 1");
  const int K = model.parts.front().K();
  Matrix T = Matrix::Zero(K, K);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    T += std::max(weights[i], 0.0) * model.parts[i].entries();
  }
  return TransitionMatrix(std::move(T));
}

int UnstructuredParams::resolved_domain_size() const {
  return domain_size > 0 ? domain_size : static_cast<int>(lambda.size());
}

void UnstructuredParams::validate() const {
  if (lambda.empty()) throw ValidationError("lambda must be non-empty");
  for (double l : lambda) {
    if (!(l > 0.0) || !std::isfinite(l)) throw ValidationError("lambda entries must be positive");
  }
  if (domain_size < 0) throw ValidationError("domain_size must be non-negative");
  if (N < 3) throw ValidationError("unstructured process needs N >= 3 instances");
  if (!(epsilon_close >= 0.0)) throw ValidationError("epsilon_close must be >= 0");
  if (label_prior.size() != noise.K()) throw DimensionError("label prior and noise model disagree on K");
}

std::size_t TripletDataset::min_occurrences() const {
  std::vector<std::size_t> counts(q.size(), 0);
  for (int v : values) ++counts[static_cast<std::size_t>(v)];
  return counts.empty() ? 0 : *std::min_element(counts.begin(), counts.end());
}

NoisyDataset TripletDataset::to_noisy_dataset() const {
  NoisyDataset ds(K, 3, 1);
  ds.reserve(triplets.size());
  for (const auto& t : triplets) {
    const double coord = values[t.members[0]];
    ds.push_back({&coord, 1}, {}, t.y, t.noisy);
  }
  ds.provenance = provenance;
  return ds;
}

double two_nn_threshold(std::span<const double> q) {
  if (q.empty()) throw ValidationError("two_nn_threshold needs a non-empty domain");
  const double total = std::accumulate(q.begin(), q.end(), 0.0);
  return 4.0 * total / *std::min_element(q.begin(), q.end());
}

TripletDataset unstructured_process(const UnstructuredParams& params, std::uint64_t seed) {
  params.validate();
  const int m = params.resolved_domain_size();
  const int K = params.noise.K();
  Rng rng(seed);

  TripletDataset out;
  out.K = K;
  out.q.resize(static_cast<std::size_t>(m));
  for (auto& q : out.q) q = params.lambda[rng.below(params.lambda.size())];
  std::vector<int> point_label(static_cast<std::size_t>(m));
  for (auto& y : point_label) y = rng.categorical(params.label_prior.span());

  std::vector<double> cumulative(out.q.size());
  std::partial_sum(out.q.begin(), out.q.end(), cumulative.begin());
  out.values.resize(params.N);
  out.labels.resize(params.N);
  std::vector<std::vector<std::size_t>> occurrences(static_cast<std::size_t>(m));
  for (std::size_t i = 0; i < params.N; ++i) {
    const double u = rng.uniform() * cumulative.back();
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    if (it == cumulative.end()) --it;
    const int v = static_cast<int>(it - cumulative.begin());
    out.values[i] = v;
    out.labels[i] = point_label[static_cast<std::size_t>(v)];
    occurrences[static_cast<std::size_t>(v)].push_back(i);
  }

  struct Candidate {
    int distance;
    std::size_t index;
  };
  std::vector<Candidate> ring;
  for (std::size_t i = 0; i < params.N; ++i) {
    const int v = out.values[i];
    std::array<Candidate, 2> nearest{};
    int found = 0;
    // Grow rings of equal distance until two neighbours are fixed; the
    // lowest indices win within a ring.
    for (int dist = 0; found < 2 && dist < m; ++dist) {
      ring.clear();
      for (int w : {v - dist, v + dist}) {
        if (w < 0 || w >= m || (dist == 0 && w != v) || (dist > 0 && w == v)) continue;
        int taken = 0;
        for (std::size_t j : occurrences[static_cast<std::size_t>(w)]) {
          if (j == i) continue;
          ring.push_back({dist, j});
          if (++taken == 2) break;
        }
        if (dist == 0) break;
      }
      std::sort(ring.begin(), ring.end(), [](const Candidate& a, const Candidate& b) { return a.index < b.index; });
      for (const auto& c : ring) {
        if (found == 2) break;
        nearest[static_cast<std::size_t>(found++)] = c;
      }
    }
    if (found < 2) continue;
    if (nearest[0].distance > params.epsilon_close || nearest[1].distance > params.epsilon_close) continue;

    Triplet t;
    t.members = {i, nearest[0].index, nearest[1].index};
    for (std::size_t k = 0; k < 3; ++k) t.clean[k] = out.labels[t.members[k]];
    t.y = t.clean[0];
    for (auto& label : t.noisy) label = rng.categorical(params.noise.row(t.y));
    out.triplets.push_back(t);
  }

  out.provenance.model = "unstructured";
  out.provenance.seed = seed;
  out.provenance.parameters = {{"lambda", params.lambda},
                               {"domain_size", m},
                               {"N", params.N},
                               {"epsilon_close", params.epsilon_close}};
  return out;
}

TwoNNCheck check_2nn(const TripletDataset& ds) {
  TwoNNCheck out;
  out.triplets = ds.triplets.size();
  if (ds.triplets.empty()) {
    out.fraction = 1.0;
    out.warning = "no triplets were formed; 2-NN satisfaction is vacuously 1.0";
    return out;
  }
  std::size_t agree = 0;
  for (const auto& t : ds.triplets) {
    if (t.clean[0] == t.clean[1] && t.clean[1] == t.clean[2]) ++agree;
  }
  out.fraction = static_cast<double>(agree) / static_cast<double>(ds.triplets.size());
  return out;
}

}  // namespace noiseid
