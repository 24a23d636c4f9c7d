#include "scenario.hpp"

#include <noiseid/errors.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace noiseid::cli {

namespace {

using nlohmann::json;

class Source {
 public:
  Source(const std::string& text, std::string name) : text_(text), name_(std::move(name)) {}

  int line_at(std::size_t byte) const {
    byte = std::min(byte, text_.size());
    return 1 + static_cast<int>(std::count(text_.begin(), text_.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
  }

  // First line containing "key"; 1 when the key never appears literally.
  int line_of(const std::string& key) const {
    const auto pos = text_.find('"' + key + '"');
    return pos == std::string::npos ? 1 : line_at(pos);
  }

  [[noreturn]] void fail(const std::string& key, const std::string& message) const {
    throw ValidationError(name_ + ":" + std::to_string(line_of(key)) + ": " + key + ": " + message);
  }

  json parse() const {
    try {
      return json::parse(text_);
    } catch (const json::parse_error& e) {
      // e.byte is 1-based and points one past the offending character.
      const std::size_t byte = e.byte > 0 ? e.byte - 1 : 0;
      std::string what = e.what();
      const auto cut = what.find("parse error");
      if (cut != std::string::npos) what = what.substr(cut);
      throw ValidationError(name_ + ":" + std::to_string(line_at(byte)) + ": " + what);
    }
  }

 private:
  const std::string& text_;
  std::string name_;
};

void reject_unknown(const Source& src, const json& obj, const std::string& where,
                    std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) src.fail(where, "expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& item : obj.items()) {
    if (!ok.count(item.key())) src.fail(item.key(), "unknown field in " + where);
  }
}

double number(const Source& src, const json& v, const std::string& key) {
  if (!v.is_number()) src.fail(key, "expected a number");
  return v.get<double>();
}

long long integer(const Source& src, const json& v, const std::string& key) {
  if (!v.is_number_integer() && !v.is_number_unsigned()) src.fail(key, "expected an integer");
  return v.get<long long>();
}

std::vector<double> number_list(const Source& src, const json& v, const std::string& key) {
  if (!v.is_array()) src.fail(key, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) out.push_back(number(src, x, key));
  return out;
}

Matrix matrix(const Source& src, const json& v, const std::string& key) {
  if (!v.is_array() || v.empty()) src.fail(key, "expected a non-empty nested array");
  const std::size_t cols = v.front().is_array() ? v.front().size() : 0;
  if (cols == 0) src.fail(key, "expected a non-empty nested array");
  Matrix m(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_array() || v[i].size() != cols) src.fail(key, "rows must all have " + std::to_string(cols) + " entries");
    for (std::size_t j = 0; j < cols; ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = number(src, v[i][j], key);
    }
  }
  return m;
}

template <typename F>
auto checked(const Source& src, const std::string& key, F&& make) {
  try {
    return make();
  } catch (const ValidationError& e) {
    src.fail(key, e.what());
  } catch (const DimensionError& e) {
    src.fail(key, e.what());
  }
}

std::uint64_t seed_value(const Source& src, const json& v, const std::string& key) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    src.fail(key, "expected a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

}  // namespace

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

const TransitionMatrix& ScenarioFile::transition() const {
  if (!T) throw ValidationError("scenario has no single transition matrix (noise model '" + noise_model.type + "')");
  return *T;
}

FeatureModel ScenarioFile::feature_model(std::uint64_t seed_used) const {
  if (!features) throw ValidationError("scenario has no features section");
  const HiddenSpace hidden{groups, K};
  if (!features->matrices.empty()) {
    FeatureModel fm{hidden, features->matrices};
    for (const auto& m : fm.models) {
      if (m.hidden() != hidden.size()) {
        throw DimensionError("feature matrices need " + std::to_string(hidden.size()) + " rows");
      }
    }
    return fm;
  }
  return gen_feature_model(hidden, features->d_star, features->cardinalities, features->min_kruskal, seed_used);
}

ScenarioFile parse_scenario(const std::string& text, const std::string& source) {
  const Source src(text, source);
  const json doc = src.parse();
  reject_unknown(src, doc, "scenario", {"K", "prior", "T", "noise_model", "features", "groups", "seed", "n", "p"});

  ScenarioFile s;
  if (!doc.contains("K")) src.fail("K", "required field is missing");
  const long long K = integer(src, doc["K"], "K");
  if (K < 2) src.fail("K", "must be >= 2");
  s.K = static_cast<int>(K);

  if (doc.contains("seed")) s.seed = seed_value(src, doc["seed"], "seed");
  if (doc.contains("n")) {
    const long long n = integer(src, doc["n"], "n");
    if (n < 1) src.fail("n", "must be >= 1");
    s.n = static_cast<std::size_t>(n);
  }
  if (doc.contains("p")) {
    const long long p = integer(src, doc["p"], "p");
    if (p < 1) src.fail("p", "must be >= 1");
    s.p = static_cast<int>(p);
  }
  if (doc.contains("groups")) {
    reject_unknown(src, doc["groups"], "groups", {"count"});
    if (!doc["groups"].contains("count")) src.fail("groups", "count is required");
    const long long g = integer(src, doc["groups"]["count"], "count");
    if (g < 1) src.fail("count", "must be >= 1");
    s.groups = static_cast<int>(g);
  }

  if (doc.contains("prior")) {
    const auto w = number_list(src, doc["prior"], "prior");
    s.prior = checked(src, "prior", [&] { return Prior(Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()))); });
  } else {
    s.prior = Prior::uniform(s.K);
  }
  if (s.prior.size() != s.K) src.fail("prior", "length must equal K");

  if (doc.contains("T")) {
    const Matrix m = matrix(src, doc["T"], "T");
    s.T = checked(src, "T", [&] { return TransitionMatrix(m); });
    if (s.T->K() != s.K) src.fail("T", "must be K x K");
  }

  if (doc.contains("noise_model")) {
    const json& nm = doc["noise_model"];
    reject_unknown(src, nm, "noise_model", {"type", "eps", "S", "parts", "weights"});
    if (!nm.contains("type") || !nm["type"].is_string()) src.fail("noise_model", "type must be a string");
    s.noise_model.type = nm["type"].get<std::string>();
    const std::string& type = s.noise_model.type;
    auto need = [&](const char* key) -> const json& {
      if (!nm.contains(key)) src.fail("noise_model", std::string(key) + " is required for type " + type);
      return nm[key];
    };
    auto forbid = [&](std::initializer_list<const char*> keys) {
      for (const char* k : keys) {
        if (nm.contains(k)) src.fail(k, "not used by noise model " + type);
      }
    };
    if (type == "asymmetric") {
      forbid({"S", "parts", "weights"});
      s.noise_model.eps = number(src, need("eps"), "eps");
      if (s.noise_model.eps < 0.0 || s.noise_model.eps > 1.0) src.fail("eps", "must lie in [0, 1]");
      if (s.T) src.fail("T", "conflicts with the asymmetric noise model");
      s.T = asymmetric_T(s.K, s.noise_model.eps);
    } else if (type == "instance") {
      forbid({"parts", "weights"});
      s.noise_model.eps = number(src, need("eps"), "eps");
      if (s.noise_model.eps < 0.0 || s.noise_model.eps > 1.0) src.fail("eps", "must lie in [0, 1]");
      const long long S = integer(src, need("S"), "S");
      if (S < 1) src.fail("S", "must be >= 1");
      s.noise_model.S = static_cast<int>(S);
      if (s.T) src.fail("T", "conflicts with the instance noise model");
    } else if (type == "part_dependent") {
      forbid({"eps", "S"});
      const json& parts = need("parts");
      if (!parts.is_array() || parts.empty()) src.fail("parts", "expected a non-empty array of matrices");
      for (const auto& part : parts) {
        const Matrix m = matrix(src, part, "parts");
        s.noise_model.parts.push_back(checked(src, "parts", [&] { return TransitionMatrix(m); }));
        if (s.noise_model.parts.back().K() != s.K) src.fail("parts", "every part must be K x K");
      }
      s.noise_model.weights = number_list(src, need("weights"), "weights");
      if (s.noise_model.weights.size() != s.noise_model.parts.size()) {
        src.fail("weights", "needs one weight per part");
      }
      if (s.T) src.fail("T", "conflicts with the part_dependent noise model");
      s.T = checked(src, "weights", [&] { return part_dependent_T(s.noise_model.weights, PartModel(s.noise_model.parts)); });
    } else if (type == "explicit") {
      forbid({"eps", "S", "parts", "weights"});
      if (!s.T) src.fail("T", "the explicit noise model needs T");
    } else {
      src.fail("type", "unknown noise model '" + type + "'");
    }
  }

  if (doc.contains("features")) {
    const json& f = doc["features"];
    reject_unknown(src, f, "features", {"d_star", "cardinalities", "min_kruskal", "matrices"});
    FeatureSpec fs;
    if (f.contains("matrices")) {
      const json& ms = f["matrices"];
      if (!ms.is_array() || ms.empty()) src.fail("matrices", "expected a non-empty array of matrices");
      for (const auto& mj : ms) {
        const Matrix m = matrix(src, mj, "matrices");
        fs.matrices.push_back(checked(src, "matrices", [&] { return ObsMatrix(m); }));
        if (fs.matrices.back().hidden() != s.K * s.groups) {
          src.fail("matrices", "each feature matrix needs K * groups rows");
        }
      }
      fs.d_star = static_cast<int>(fs.matrices.size());
      for (const auto& m : fs.matrices) fs.cardinalities.push_back(m.outcomes());
    }
    if (f.contains("d_star")) {
      const long long d = integer(src, f["d_star"], "d_star");
      if (d < 1) src.fail("d_star", "must be >= 1");
      if (!fs.matrices.empty() && d != fs.d_star) src.fail("d_star", "does not match the number of matrices");
      fs.d_star = static_cast<int>(d);
    }
    if (fs.d_star < 1) src.fail("features", "d_star or matrices is required");
    if (f.contains("cardinalities")) {
      const auto cards = number_list(src, f["cardinalities"], "cardinalities");
      std::vector<int> ints;
      for (double c : cards) {
        if (c != static_cast<int>(c) || c < 2) src.fail("cardinalities", "entries must be integers >= 2");
        ints.push_back(static_cast<int>(c));
      }
      if (ints.size() != 1 && ints.size() != static_cast<std::size_t>(fs.d_star)) {
        src.fail("cardinalities", "needs one entry or d_star entries");
      }
      if (!fs.matrices.empty()) {
        for (int i = 0; i < fs.d_star; ++i) {
          const int c = ints.size() == 1 ? ints.front() : ints[static_cast<std::size_t>(i)];
          if (c != fs.matrices[static_cast<std::size_t>(i)].outcomes()) {
            src.fail("cardinalities", "disagree with the given matrices");
          }
        }
      } else {
        fs.cardinalities.clear();
        for (int i = 0; i < fs.d_star; ++i) {
          fs.cardinalities.push_back(ints.size() == 1 ? ints.front() : ints[static_cast<std::size_t>(i)]);
        }
      }
    } else if (fs.matrices.empty()) {
      fs.cardinalities.assign(static_cast<std::size_t>(fs.d_star), 2);
    }
    if (f.contains("min_kruskal")) {
      const long long mk = integer(src, f["min_kruskal"], "min_kruskal");
      if (mk < 0) src.fail("min_kruskal", "must be >= 0");
      fs.min_kruskal = static_cast<int>(mk);
    }
    if (fs.matrices.empty()) {
      for (int c : fs.cardinalities) {
        if (fs.min_kruskal > std::min(s.K * s.groups, c)) {
          src.fail("min_kruskal", "exceeds min(K_hidden, cardinality)");
        }
      }
    }
    s.features = std::move(fs);
  }

  if (!doc.contains("noise_model") && s.T) s.noise_model.type = "explicit";
  return s;
}

ScenarioFile load_scenario(const std::filesystem::path& path) {
  return parse_scenario(read_text(path), path.string());
}

Matrix load_matrix(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  const Source src(text, path.string());
  const json doc = src.parse();
  if (doc.is_object()) {
    if (doc.contains("K")) return parse_scenario(text, path.string()).transition().entries();
    if (!doc.contains("T")) src.fail("T", "matrix file object needs a T field");
    return matrix(src, doc["T"], "T");
  }
  return matrix(src, doc, "matrix");
}

TwoNNFile load_2nn_params(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  const Source src(text, path.string());
  const json doc = src.parse();
  reject_unknown(src, doc, "2-NN parameters",
                 {"lambda", "domain_size", "N", "epsilon_close", "label_prior", "noise", "seed"});
  TwoNNFile out;
  auto& p = out.params;
  if (!doc.contains("lambda")) src.fail("lambda", "required field is missing");
  p.lambda = number_list(src, doc["lambda"], "lambda");
  if (doc.contains("domain_size")) p.domain_size = static_cast<int>(integer(src, doc["domain_size"], "domain_size"));
  if (!doc.contains("N")) src.fail("N", "required field is missing");
  const long long N = integer(src, doc["N"], "N");
  if (N < 0) src.fail("N", "must be non-negative");
  p.N = static_cast<std::size_t>(N);
  if (!doc.contains("epsilon_close")) src.fail("epsilon_close", "required field is missing");
  p.epsilon_close = number(src, doc["epsilon_close"], "epsilon_close");
  if (doc.contains("noise")) {
    const Matrix m = matrix(src, doc["noise"], "noise");
    p.noise = checked(src, "noise", [&] { return TransitionMatrix(m); });
  }
  if (doc.contains("label_prior")) {
    const auto w = number_list(src, doc["label_prior"], "label_prior");
    p.label_prior = checked(src, "label_prior", [&] {
      return Prior(Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size())));
    });
  } else {
    p.label_prior = Prior::uniform(p.noise.K());
  }
  if (doc.contains("seed")) out.seed = seed_value(src, doc["seed"], "seed");
  checked(src, "N", [&] {
    p.validate();
    return 0;
  });
  return out;
}

}  // namespace noiseid::cli
