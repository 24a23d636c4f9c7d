#include "cli.hpp"

#include "scenario.hpp"

#include <noiseid/consensus.hpp>
#include <noiseid/dataset_io.hpp>
#include <noiseid/errors.hpp>
#include <noiseid/features.hpp>
#include <noiseid/identifiability.hpp>
#include <noiseid/noisegen.hpp>
#include <noiseid/random.hpp>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

namespace noiseid::cli {

namespace {

using ojson = nlohmann::ordered_json;

struct Globals {
  bool json = false;
  bool no_timestamp = false;
  bool strict = false;
  std::optional<std::uint64_t> seed;
};

ojson matrix_json(const Matrix& m) {
  ojson out = ojson::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    ojson row = ojson::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
    out.push_back(row);
  }
  return out;
}

ojson vector_json(std::span<const double> v) { return ojson(std::vector<double>(v.begin(), v.end())); }

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string scalar_text(const ojson& v) {
  if (v.is_number_float()) return format_double(v.get<double>());
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

bool is_flat_array(const ojson& v) {
  if (!v.is_array()) return false;
  for (const auto& x : v) {
    if (x.is_structured()) return false;
  }
  return true;
}

std::string flat_text(const ojson& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += scalar_text(v[i]);
  }
  return s + "]";
}

void render_text(std::ostream& out, const ojson& doc, const std::string& indent) {
  for (const auto& [key, v] : doc.items()) {
    if (!v.is_structured()) {
      out << indent << key << ": " << scalar_text(v) << '\n';
    } else if (is_flat_array(v) && !(key == "warnings" || key == "notes")) {
      out << indent << key << ": " << flat_text(v) << '\n';
    } else if (v.is_array()) {
      out << indent << key << ":";
      if (v.empty()) out << " none";
      out << '\n';
      for (const auto& item : v) {
        if (is_flat_array(item)) {
          out << indent << "  " << flat_text(item) << '\n';
        } else if (item.is_object()) {
          std::string line;
          for (const auto& [k, x] : item.items()) {
            line += (line.empty() ? "" : ", ") + k + "=" + (is_flat_array(x) ? flat_text(x) : scalar_text(x));
          }
          out << indent << "  - " << line << '\n';
        } else {
          out << indent << "  - " << scalar_text(item) << '\n';
        }
      }
    } else {
      out << indent << key << ":\n";
      render_text(out, v, indent + "  ");
    }
  }
}

void emit(std::ostream& out, const Globals& g, ojson report) {
  if (!g.no_timestamp) {
    ojson stamped;
    stamped["generated"] = timestamp();
    for (auto& [k, v] : report.items()) stamped[k] = v;
    report = std::move(stamped);
  }
  if (g.json) {
    out << report.dump(2) << '\n';
  } else {
    render_text(out, report, "");
  }
}

std::uint64_t require_seed(const Globals& g, std::optional<std::uint64_t> fallback) {
  if (g.seed) return *g.seed;
  if (g.strict) throw ValidationError("--seed is required in --strict mode");
  return fallback.value_or(0);
}

ojson report_json(const IdentifiabilityReport& r) {
  return {{"condition", r.condition_name}, {"lhs", r.lhs},
          {"rhs", r.rhs},                  {"per_model_kruskal", r.per_model_kruskal},
          {"verdict", std::string(to_string(r.verdict))}, {"notes", r.notes}};
}

ojson starts_summary(const std::vector<StartSummary>& starts, int best) {
  int converged = 0;
  for (const auto& s : starts) converged += s.converged ? 1 : 0;
  const auto& b = starts[static_cast<std::size_t>(best)];
  return {{"count", starts.size()},
          {"converged", converged},
          {"best_index", best},
          {"best_origin", b.origin},
          {"best_iterations", b.iterations}};
}

// ---- check ------------------------------------------------------------------

int cmd_check(const Globals& g, const std::string& path, const std::string& mode, std::ostream& out) {
  const ScenarioFile s = load_scenario(path);
  IdentifiabilityReport r;
  if (mode == "instance3") {
    r = check_instance_three_labels(s.transition());
  } else if (mode == "kruskal") {
    ObservationModel obs;
    if (s.T) {
      for (int i = 0; i < s.p; ++i) obs.add(*s.T);
    }
    if (s.features) {
      const FeatureModel fm = s.feature_model(require_seed(g, s.seed));
      for (const auto& m : fm.models) obs.add(m);
    }
    if (obs.size() == 0) throw ValidationError("kruskal mode needs T or features");
    r = check_kruskal_sum(obs);
  } else if (mode == "group") {
    if (!s.features) throw ValidationError("group mode needs a features section");
    if (s.groups != 1) throw ValidationError("group mode checks a single known group; use unknown-groups");
    const FeatureModel fm = s.feature_model(require_seed(g, s.seed));
    r = check_group_features(s.transition(), ObservationModel(fm.models));
  } else if (mode == "unknown-groups") {
    if (!s.features) throw ValidationError("unknown-groups mode needs a features section");
    int d_star = s.features->d_star;
    if (!s.features->matrices.empty()) {
      d_star = 0;
      for (const auto& m : s.features->matrices) d_star += is_informative_feature(m) ? 1 : 0;
    }
    r = check_unknown_groups(s.groups, s.K, d_star);
  } else if (mode == "generic") {
    r = check_generic(s.K, s.features ? s.features->cardinalities : std::vector<int>{});
  } else {
    throw ValidationError("unknown check mode '" + mode + "'");
  }
  ojson report = {{"command", "check"}, {"mode", mode}, {"scenario", path}};
  const ojson details = report_json(r);
  for (const auto& [k, v] : details.items()) report[k] = v;
  emit(out, g, report);
  return kOk;
}

// ---- generate ---------------------------------------------------------------

int cmd_generate(const Globals& g, const std::string& path, const std::string& out_path, bool emit_rows,
                 std::ostream& out) {
  const ScenarioFile s = load_scenario(path);
  const std::uint64_t seed = require_seed(g, s.seed);
  if (emit_rows && s.noise_model.type != "instance") {
    throw ValidationError("--emit-rows applies to the instance noise model only");
  }

  std::optional<NoisyDataset> ds;
  InstanceNoise rows;
  if (s.features) {
    if (s.groups != 1) throw CapabilityError("datasets with unknown groups are not generated");
    if (s.p != 1) throw ValidationError("feature datasets carry exactly one noisy label; set p to 1");
    const FeatureModel fm = s.feature_model(seed);
    ds = sample_with_features(s.prior, s.transition(), fm, s.n, seed);
  } else if (s.noise_model.type == "instance") {
    ds = sample_instance_noisy(s.prior, s.noise_model.S, s.noise_model.eps, s.p, s.n, seed,
                               emit_rows ? &rows : nullptr);
  } else {
    ds = sample_iid_noisy(s.prior, s.transition(), s.p, s.n, seed);
  }
  auto& params = ds->provenance.parameters;
  params["noise_model"] = s.noise_model.type;
  params["prior"] = std::vector<double>(s.prior.span().begin(), s.prior.span().end());
  if (s.T) params["T"] = nlohmann::json::parse(matrix_json(s.T->entries()).dump());
  if (s.noise_model.type == "asymmetric") params["eps"] = s.noise_model.eps;
  save_dataset(out_path, *ds);

  ojson report = {{"command", "generate"},
                  {"scenario", path},
                  {"dataset", out_path},
                  {"sidecar", sidecar_path(out_path).string()},
                  {"model", ds->provenance.model},
                  {"seed", seed},
                  {"rows", ds->size()},
                  {"noisy_labels", ds->p()},
                  {"continuous_features", ds->S()},
                  {"categorical_features", ds->d()}};
  if (emit_rows) {
    const std::string rows_path = out_path + ".rows.csv";
    std::ofstream f(rows_path, std::ios::binary);
    if (!f) throw Error("cannot write " + rows_path);
    f << "q";
    for (int k = 1; k <= ds->K(); ++k) f << ",p_" << k;
    f << '\n';
    for (Eigen::Index i = 0; i < rows.rows.rows(); ++i) {
      f << format_double(rows.flip_rates[static_cast<std::size_t>(i)]);
      for (Eigen::Index k = 0; k < rows.rows.cols(); ++k) f << ',' << format_double(rows.rows(i, k));
      f << '\n';
    }
    if (!f) throw Error("write failed for " + rows_path);
    report["rows_file"] = rows_path;
  }
  emit(out, g, report);
  return kOk;
}

// ---- estimate ---------------------------------------------------------------

struct EstimateFlags {
  bool exact = false;
  bool from_features = false;
  int restarts = 20;
  std::string truth;
};

int cmd_estimate(const Globals& g, const std::string& input, const EstimateFlags& f, std::ostream& out) {
  EstimateOptions opts;
  opts.restarts = f.restarts;
  std::optional<Matrix> truth;
  if (!f.truth.empty()) truth = load_matrix(f.truth);

  ojson report = {{"command", "estimate"}, {"input", input}};
  std::optional<std::uint64_t> fallback_seed;
  std::optional<JointTensor> joint;
  std::optional<NoisyDataset> ds;
  if (f.exact) {
    const ScenarioFile s = load_scenario(input);
    fallback_seed = s.seed;
    const TransitionMatrix& T = s.transition();
    if (!truth) truth = T.entries();
    if (f.from_features) {
      if (!s.features) throw CapabilityError("--from-features needs a features section");
      if (s.groups != 1) throw CapabilityError("feature estimation needs a single known group");
      const FeatureModel fm = s.feature_model(require_seed(g, s.seed));
      if (fm.d() < 2) throw CapabilityError("feature estimation needs at least two categorical features and one noisy label");
      joint = exact_joint(s.prior, {fm.models[0], fm.models[1], T});
    } else {
      if (s.p < 3) {
        throw CapabilityError("estimation needs at least three noisy labels per instance (p = " +
                              std::to_string(s.p) + "); two labels do not identify T");
      }
      joint = exact_joint(Scenario(T, s.prior), s.p);
    }
    report["source"] = "exact";
  } else {
    ds = load_dataset(input);
    fallback_seed = ds->provenance.seed;
    report["source"] = "dataset";
    report["rows"] = ds->size();
    if (!f.from_features && ds->p() < 3) {
      throw CapabilityError("estimation needs at least three noisy labels per instance (dataset has " +
                            std::to_string(ds->p()) + "); two labels do not identify T");
    }
  }
  opts.seed = require_seed(g, f.exact ? fallback_seed : std::nullopt);
  opts.truth = truth;
  report["seed"] = opts.seed;
  report["restarts"] = opts.restarts;

  auto finish = [&](const Scenario& sc, double residual, const std::vector<int>& perm,
                    const std::vector<StartSummary>& starts, int best, const std::vector<std::string>& warnings) {
    report["prior"] = vector_json(sc.prior.span());
    report["T"] = matrix_json(sc.T.entries());
    report["residual"] = residual;
    report["permutation"] = perm;
    report["alignment"] = truth ? "truth" : "max_trace";
    report["starts"] = starts_summary(starts, best);
    if (truth) report["err"] = err_metric(sc.T.entries(), *truth, true);
    report["warnings"] = warnings;
  };

  if (f.from_features) {
    const FeatureEstimate r = joint ? estimate_from_joint(*joint, joint->dims().back(), opts)
                                    : estimate_from_features(*ds, opts);
    finish(r.scenario, r.residual, r.permutation, r.starts, r.best_start, r.warnings);
    report["M_a"] = matrix_json(r.M_a);
    report["M_b"] = matrix_json(r.M_b);
  } else {
    const EstimateResult r = estimate(joint ? *joint : empirical_joint(*ds), opts);
    finish(r.scenario, r.residual, r.permutation, r.starts, r.best_start, r.warnings);
  }
  emit(out, g, report);
  return kOk;
}

// ---- witness ----------------------------------------------------------------

int cmd_witness(const Globals& g, double gamma, double e_plus, double e_minus, std::ostream& out) {
  const std::uint64_t seed = require_seed(g, std::nullopt);
  const Witness w = witness_p2(gamma, e_plus, e_minus, seed);
  const BinaryStats a = binary_stats(gamma, e_plus, e_minus);
  const BinaryStats b = binary_stats(w.gamma, w.e_plus, w.e_minus);
  const double check = std::max({std::abs(a.posterior - b.posterior), std::abs(a.pos_consensus - b.pos_consensus),
                                 std::abs(a.neg_consensus - b.neg_consensus)});
  if (check > 1e-8) throw Error("witness failed re-verification (statistic gap " + format_double(check) + ")");
  auto stats = [](const BinaryStats& s) {
    return ojson{{"posterior", s.posterior}, {"pos_consensus", s.pos_consensus}, {"neg_consensus", s.neg_consensus}};
  };
  ojson report = {{"command", "witness"},
                  {"seed", seed},
                  {"input", {{"gamma", gamma}, {"e_plus", e_plus}, {"e_minus", e_minus}}},
                  {"witness", {{"gamma", w.gamma}, {"e_plus", w.e_plus}, {"e_minus", w.e_minus}}},
                  {"input_stats", stats(a)},
                  {"witness_stats", stats(b)},
                  {"statistic_residual", check},
                  {"parameter_distance", w.distance},
                  {"candidates_tried", w.candidates}};
  emit(out, g, report);
  return kOk;
}

// ---- simulate-2nn -----------------------------------------------------------

int cmd_simulate_2nn(const Globals& g, const std::string& path, int trials, std::ostream& out) {
  if (trials < 1) throw ValidationError("--trials must be >= 1");
  const TwoNNFile file = load_2nn_params(path);
  const std::uint64_t seed = require_seed(g, file.seed);
  const auto N = static_cast<double>(file.params.N);

  int clears = 0, satisfied = 0;
  double worst_threshold = 0.0, fraction_sum = 0.0;
  std::size_t triplets = 0;
  std::vector<std::string> warnings;
  for (int t = 0; t < trials; ++t) {
    const TripletDataset ds = unstructured_process(file.params, Rng::substream(seed, static_cast<std::uint64_t>(t))());
    const double threshold = two_nn_threshold(ds.q);
    worst_threshold = std::max(worst_threshold, threshold);
    if (N > threshold) ++clears;
    const TwoNNCheck c = check_2nn(ds);
    if (c.fraction == 1.0) ++satisfied;
    fraction_sum += c.fraction;
    triplets += c.triplets;
    if (!c.warning.empty() && warnings.empty()) warnings.push_back("trial " + std::to_string(t) + ": " + c.warning);
  }
  if (clears < trials) {
    warnings.insert(warnings.begin(), "N = " + std::to_string(file.params.N) + " is below the recurrence threshold in " +
                                          std::to_string(trials - clears) + " of " + std::to_string(trials) +
                                          " trials; 2-NN clusterability is not guaranteed");
  }
  ojson report = {{"command", "simulate-2nn"},
                  {"params", path},
                  {"seed", seed},
                  {"trials", trials},
                  {"N", file.params.N},
                  {"threshold_max", worst_threshold},
                  {"trials_above_threshold", clears},
                  {"trials_fully_satisfied", satisfied},
                  {"satisfaction_rate", static_cast<double>(satisfied) / trials},
                  {"mean_fraction", fraction_sum / trials},
                  {"mean_triplets", static_cast<double>(triplets) / trials},
                  {"warnings", warnings}};
  emit(out, g, report);
  return kOk;
}

// ---- bound ------------------------------------------------------------------

int cmd_bound(const Globals& g, const std::string& a, const std::string& b, const std::string& star,
              std::ostream& out) {
  const Matrix T1 = load_matrix(a), T2 = load_matrix(b), Ts = load_matrix(star);
  const MixingBound m = mixing_bound(T1, T2, Ts);
  ojson report = {{"command", "bound"},
                  {"lhs", m.lhs},
                  {"rhs", m.rhs},
                  {"ratio", m.rhs > 0.0 ? ojson(m.lhs / m.rhs) : ojson(nullptr)},
                  {"holds", m.holds}};
  emit(out, g, report);
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Identifiability checks, synthetic data and transition-matrix estimation for noisy labels",
               "noise-id"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  std::uint64_t seed_value = 0;
  app.add_flag("--json", g.json, "Emit the report as JSON");
  app.add_flag("--no-timestamp", g.no_timestamp, "Omit the generation timestamp");
  app.add_flag("--strict", g.strict, "Require an explicit --seed");
  auto* seed_opt = app.add_option("--seed", seed_value, "Seed for every random choice");

  std::string scenario, mode, out_path, input, truth, params;
  bool emit_rows = false;
  EstimateFlags ef;
  double gamma = 0.0, e_plus = 0.0, e_minus = 0.0;
  int trials = 100;
  std::string m1, m2, m3;

  auto* check = app.add_subcommand("check", "Evaluate an identifiability condition for a scenario");
  check->add_option("scenario", scenario, "Scenario file")->required();
  check->add_option("--mode", mode, "instance3 | kruskal | group | unknown-groups | generic")
      ->required()
      ->check(CLI::IsMember({"instance3", "kruskal", "group", "unknown-groups", "generic"}));

  auto* gen = app.add_subcommand("generate", "Sample a noisy-label dataset from a scenario");
  gen->add_option("scenario", scenario, "Scenario file")->required();
  gen->add_option("out", out_path, "Output CSV path")->required();
  gen->add_flag("--emit-rows", emit_rows, "Also write per-instance flip rows (instance model)");

  auto* est = app.add_subcommand("estimate", "Recover the prior and transition matrix");
  est->add_option("input", input, "Dataset CSV, or a scenario file with --exact")->required();
  est->add_flag("--exact", ef.exact, "Use the exact joint of a scenario file");
  est->add_flag("--from-features", ef.from_features, "Use two categorical features and one noisy label");
  est->add_option("--restarts", ef.restarts, "Random restarts")->check(CLI::NonNegativeNumber);
  est->add_option("--truth", ef.truth, "Matrix file with the true T, used for alignment and err");

  auto* wit = app.add_subcommand("witness", "Find binary parameters indistinguishable from two labels");
  wit->add_option("gamma", gamma)->required();
  wit->add_option("e_plus", e_plus)->required();
  wit->add_option("e_minus", e_minus)->required();

  auto* sim = app.add_subcommand("simulate-2nn", "Check 2-NN clusterability on the unstructured process");
  sim->add_option("params", params, "Parameter file")->required();
  sim->add_option("--trials", trials, "Number of trials");

  auto* bnd = app.add_subcommand("bound", "Evaluate the two-mixture estimation error bound");
  bnd->add_option("T1", m1)->required();
  bnd->add_option("T2", m2)->required();
  bnd->add_option("T_star", m3)->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kOk;
    }
    err << "noise-id: " << e.what() << '\n';
    return kValidation;
  }
  if (seed_opt->count() > 0) g.seed = seed_value;

  try {
    if (check->parsed()) return cmd_check(g, scenario, mode, out);
    if (gen->parsed()) return cmd_generate(g, scenario, out_path, emit_rows, out);
    if (est->parsed()) return cmd_estimate(g, input, ef, out);
    if (wit->parsed()) return cmd_witness(g, gamma, e_plus, e_minus, out);
    if (sim->parsed()) return cmd_simulate_2nn(g, params, trials, out);
    if (bnd->parsed()) return cmd_bound(g, m1, m2, m3, out);
  } catch (const CapabilityError& e) {
    err << "noise-id: " << e.what() << '\n';
    return kCapability;
  } catch (const SearchExhaustedError& e) {
    err << "noise-id: " << e.what() << '\n';
    return kSearchExhausted;
  } catch (const ValidationError& e) {
    err << "noise-id: " << e.what() << '\n';
    return kValidation;
  } catch (const DimensionError& e) {
    err << "noise-id: " << e.what() << '\n';
    return kValidation;
  } catch (const DegenerateError& e) {
    err << "noise-id: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    err << "noise-id: internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kInternal;
}

}  // namespace noiseid::cli
