#include "noiseid/identifiability.hpp"

#include "noiseid/errors.hpp"

#include <algorithm>
#include <cstdint>
#include <sstream>

namespace noiseid {

namespace {

IdentifiabilityReport make_report(std::string name, long long lhs, long long rhs,
                                  std::vector<int> kruskal) {
  IdentifiabilityReport r;
  r.condition_name = std::move(name);
  r.lhs = lhs;
  r.rhs = rhs;
  r.per_model_kruskal = std::move(kruskal);
  r.verdict = lhs >= rhs ? Verdict::identifiable : Verdict::not_guaranteed;
  return r;
}

void append_note(IdentifiabilityReport& r, const std::string& note) {
  if (!r.notes.empty()) r.notes += "\n";
  r.notes += note;
}

std::string margin_note(const std::string& label, const KruskalAnalysis& a) {
  std::ostringstream s;
  s << label << ": Kr = " << a.rank << ", smallest independent sigma ratio "
    << a.independent_margin;
  if (a.dependent_ratio >= 0.0) s << ", first dependent subset ratio " << a.dependent_ratio;
  return s.str();
}

// min(cap, product of values) without overflow.
long long capped_product(const std::vector<int>& values, std::uint32_t mask, long long cap) {
  long long p = 1;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if ((mask >> i) & 1U) {
      p *= values[i];
      if (p >= cap) return cap;
    }
  }
  return p;
}

}  // namespace

ObservationModel::ObservationModel(std::vector<ObsMatrix> models) {
  for (auto& m : models) add(std::move(m));
}

void ObservationModel::add(ObsMatrix model) {
  if (!models_.empty() && model.hidden() != K()) {
    throw DimensionError("observation model hidden cardinality " + std::to_string(model.hidden()) +
                         " differs from " + std::to_string(K()));
  }
  models_.push_back(std::move(model));
}

std::vector<int> ObservationModel::cardinalities() const {
  std::vector<int> out;
  out.reserve(models_.size());
  for (const auto& m : models_) out.push_back(m.outcomes());
  return out;
}

std::string_view to_string(Verdict v) {
  return v == Verdict::identifiable ? "identifiable" : "not_guaranteed";
}

void to_json(nlohmann::json& j, const IdentifiabilityReport& r) {
  j = nlohmann::json{{"condition_name", r.condition_name},
                     {"lhs", r.lhs},
                     {"rhs", r.rhs},
                     {"per_model_kruskal", r.per_model_kruskal},
                     {"verdict", std::string(to_string(r.verdict))},
                     {"notes", r.notes}};
}

IdentifiabilityReport check_kruskal_sum(const ObservationModel& obs, double tolerance) {
  if (obs.size() < 1) throw ValidationError("check_kruskal_sum needs at least one observed variable");
  const int K = obs.K();
  const int p = obs.size();
  std::vector<int> ranks;
  long long sum = 0;
  for (const auto& m : obs.models()) {
    ranks.push_back(kruskal_rank(m.entries(), tolerance));
    sum += ranks.back();
  }
  auto r = make_report("kruskal_sum", sum, 2LL * K + p - 1, std::move(ranks));
  std::ostringstream s;
  s << "sum of Kruskal ranks " << sum << " vs 2K + p - 1 = " << r.rhs << " (K = " << K
    << ", p = " << p << ")";
  append_note(r, s.str());
  if (!r.identifiable()) {
    append_note(r, "the Kruskal condition is sufficient, not necessary: failing it does not prove "
                   "non-identifiability");
  }
  return r;
}

bool is_informative_label(const TransitionMatrix& T, double tolerance) {
  return numerical_rank(T.entries(), tolerance) == T.K();
}

IdentifiabilityReport check_instance_three_labels(const TransitionMatrix& T, double tolerance) {
  const int K = T.K();
  const auto analysis = analyze_kruskal(T.entries(), tolerance);
  const bool informative = is_informative_label(T, tolerance);
  auto r = make_report("instance_three_labels", 3LL * analysis.rank, 2LL * K + 2,
                       {analysis.rank, analysis.rank, analysis.rank});
  std::ostringstream s;
  s << "M_1 = M_2 = M_3 = T; Kr(M_1) + Kr(M_2) + Kr(M_3) = " << r.lhs << " vs 2K + 2 = " << r.rhs;
  append_note(r, s.str());
  append_note(r, margin_note("T", analysis));
  if (informative) {
    append_note(r, "T has full rank: the noisy label is informative, 3K >= 2K + 2 holds");
  } else {
    append_note(r, "T is rank deficient: the noisy label is not informative");
    if (r.identifiable()) {
      append_note(r, "Kruskal's sufficient condition still holds through Kr(T) = K - 1 >= 4");
    }
  }
  return r;
}

bool is_informative_feature(const ObsMatrix& M, double tolerance) {
  return kruskal_rank(M.entries(), tolerance) >= 2;
}

IdentifiabilityReport check_group_features(const TransitionMatrix& T,
                                           const ObservationModel& features, double tolerance) {
  const int K = T.K();
  if (features.size() > 0 && features.K() != K) {
    throw DimensionError("feature models have hidden cardinality " + std::to_string(features.K()) +
                         " but T is " + std::to_string(K) + "x" + std::to_string(K));
  }
  const auto t_analysis = analyze_kruskal(T.entries(), tolerance);
  std::vector<int> ranks{t_analysis.rank};
  int d_star = 0;
  long long actual_sum = t_analysis.rank;
  std::vector<std::string> feature_notes;
  for (int i = 0; i < features.size(); ++i) {
    const auto a = analyze_kruskal(features.models()[static_cast<std::size_t>(i)].entries(), tolerance);
    ranks.push_back(a.rank);
    if (a.rank >= 2) {
      ++d_star;
      actual_sum += a.rank;
    } else {
      feature_notes.push_back("feature " + std::to_string(i + 1) + " is uninformative (Kr = " +
                              std::to_string(a.rank) + ") and is not counted");
    }
  }
  // Each informative feature contributes at least 2; the noisy label
  // contributes Kr(T), which is K when T is informative.
  auto r = make_report("group_features", t_analysis.rank + 2LL * d_star, 2LL * K + d_star,
                       std::move(ranks));
  std::ostringstream s;
  s << "d* = " << d_star << " informative features; Kr(T) + 2 d* = " << r.lhs
    << " vs 2K + d* = " << r.rhs << " (K = " << K << ")";
  append_note(r, s.str());
  for (const auto& n : feature_notes) append_note(r, n);
  append_note(r, margin_note("T", t_analysis));
  if (is_informative_label(T, tolerance)) {
    append_note(r, "T is informative: the condition reduces to d* >= K = " + std::to_string(K));
  } else {
    append_note(r, "T is not informative: the single-informative-label premise fails; the verdict "
                   "rests on the Kruskal sum with Kr(T) = " + std::to_string(t_analysis.rank));
  }
  append_note(r, "actual Kruskal sum over T and informative features = " + std::to_string(actual_sum));
  return r;
}

IdentifiabilityReport check_unknown_groups(int num_groups, int K, int d_star) {
  if (num_groups < 1) throw ValidationError("num_groups must be >= 1");
  if (K < 2) throw ValidationError("K must be >= 2");
  if (d_star < 0) throw ValidationError("d_star must be >= 0");
  const long long hidden = static_cast<long long>(num_groups) * K;
  std::vector<int> ranks{1};
  ranks.insert(ranks.end(), static_cast<std::size_t>(d_star), 2);
  auto r = make_report("unknown_groups", 1 + 2LL * d_star, 2 * hidden + d_star, std::move(ranks));
  std::ostringstream s;
  s << "hidden space G x Y has |G| K = " << hidden << " states; Kr(T) + sum Kr(M_i) >= 1 + 2 d* = "
    << r.lhs << " vs 2 |G| K + d* = " << r.rhs << ", i.e. d* >= 2|G|K - 1 = " << 2 * hidden - 1;
  append_note(r, s.str());
  append_note(r, "uses only Kr(T) >= 1 for the noisy label, whereas the known-group check uses "
                 "Kr(T) = K; the two thresholds are reported as derived, not reconciled");
  return r;
}

int generic_feature_threshold(int K) {
  // Smallest t with 2^t >= (K + 2) / 2.
  int t = 0;
  while ((2LL << t) < K + 2) ++t;
  return t;
}

IdentifiabilityReport check_generic(int K, const std::vector<int>& cardinalities) {
  if (K < 2) throw ValidationError("K must be >= 2");
  for (std::size_t i = 0; i < cardinalities.size(); ++i) {
    if (cardinalities[i] < 2) {
      throw ValidationError("feature " + std::to_string(i + 1) + " has cardinality " +
                            std::to_string(cardinalities[i]) + " < 2");
    }
  }
  const int d = static_cast<int>(cardinalities.size());
  if (d > 24) throw CapabilityError("check_generic enumerates splits of at most 24 features");
  const int threshold = generic_feature_threshold(K);
  const long long rhs = 2LL * K + 2;

  if (d < 2) {
    // Fewer than three observed variables: the label plus at most one feature.
    const long long lhs = K + (d == 1 ? std::min<long long>(K, cardinalities[0]) : 0);
    std::vector<int> ranks{K};
    if (d == 1) ranks.push_back(static_cast<int>(std::min<long long>(K, cardinalities[0])));
    auto r = make_report("generic", lhs, rhs, std::move(ranks));
    append_note(r, "d* = " + std::to_string(d) +
                       ": no two-way split into meta-features exists, so the three-variable "
                       "generic condition cannot be met");
    append_note(r, "feature-count threshold ceil(log2((K+2)/2)) = " + std::to_string(threshold) +
                       (d >= threshold ? " is met" : " is not met"));
    return r;
  }

  // Feature 1 is pinned to side one so mirrored splits are not revisited.
  const std::uint32_t all = (1U << d) - 1U;
  long long best = -1, worst = -1;
  std::uint32_t best_mask = 0;
  long long best_tau1 = 0, best_tau2 = 0;
  const int even_size = (d + 1) / 2;
  long long even_score = -1;
  for (std::uint32_t mask = 1; mask < all; mask += 2) {
    const long long tau1 = capped_product(cardinalities, mask, K);
    const long long tau2 = capped_product(cardinalities, all & ~mask, K);
    const long long score = tau1 + tau2 + K;
    if (score > best) {
      best = score;
      best_mask = mask;
      best_tau1 = tau1;
      best_tau2 = tau2;
    }
    worst = worst < 0 ? score : std::min(worst, score);
    if (even_score < 0 && __builtin_popcount(mask) == even_size) even_score = score;
  }

  auto r = make_report("generic", best, rhs,
                       {static_cast<int>(best_tau1), static_cast<int>(best_tau2), K});
  std::ostringstream split;
  split << "best split: group 1 = {";
  std::ostringstream g2;
  g2 << "}, group 2 = {";
  bool first1 = true, first2 = true;
  long long full1 = 1, full2 = 1;
  for (int i = 0; i < d; ++i) {
    if ((best_mask >> i) & 1U) {
      split << (first1 ? "" : ",") << i + 1;
      first1 = false;
      full1 = std::min<long long>(full1 * cardinalities[static_cast<std::size_t>(i)], 1LL << 40);
    } else {
      g2 << (first2 ? "" : ",") << i + 1;
      first2 = false;
      full2 = std::min<long long>(full2 * cardinalities[static_cast<std::size_t>(i)], 1LL << 40);
    }
  }
  split << g2.str() << "}; meta-cardinalities (" << full1 << ", " << full2 << "); min(K,tau1) + "
        << "min(K,tau2) + min(K,K) = " << best_tau1 << " + " << best_tau2 << " + " << K << " = "
        << best << " vs 2K + 2 = " << rhs;
  append_note(r, split.str());
  if (best != worst) {
    std::ostringstream s;
    s << "grouping choice matters: split scores range from " << worst << " to " << best
      << "; the even split scores " << even_score;
    append_note(r, s.str());
  } else {
    append_note(r, "grouping choice matters in general; here every two-way split scores " +
                       std::to_string(best));
  }
  append_note(r, "feature-count threshold ceil(log2((K+2)/2)) = " + std::to_string(threshold) +
                     (d >= threshold ? " is met" : " is not met") + " (d* = " + std::to_string(d) + ")");
  append_note(r, "generic identifiability: holds outside a measure-zero set of parameters");
  return r;
}

}  // namespace noiseid
