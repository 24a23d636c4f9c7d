#pragma once

#include <noiseid/features.hpp>
#include <noiseid/matrices.hpp>
#include <noiseid/noisegen.hpp>

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace noiseid::cli {

struct NoiseModelSpec {
  std::string type = "explicit";  // asymmetric | instance | part_dependent | explicit
  double eps = 0.0;
  int S = 0;
  std::vector<TransitionMatrix> parts;
  std::vector<double> weights;
};

struct FeatureSpec {
  int d_star = 0;
  std::vector<int> cardinalities;
  int min_kruskal = 2;
  std::vector<ObsMatrix> matrices;  // empty when they are to be generated
};

/// Parsed and validated scenario document.
struct ScenarioFile {
  int K = 0;
  Prior prior = Prior::uniform(2);
  std::optional<TransitionMatrix> T;  // explicit or derived from the noise model
  NoiseModelSpec noise_model;
  std::optional<FeatureSpec> features;
  int groups = 1;
  std::optional<std::uint64_t> seed;
  std::size_t n = 1000;
  int p = 3;

  /// T, or a ValidationError naming the noise model that lacks one.
  const TransitionMatrix& transition() const;
  /// Given matrices, or a model drawn with `seed`.
  FeatureModel feature_model(std::uint64_t seed) const;
};

/// Errors carry "<path>:<line>: " prefixes. Syntax errors point at the
/// offending byte; semantic errors at the first line mentioning the field.
ScenarioFile load_scenario(const std::filesystem::path& path);
ScenarioFile parse_scenario(const std::string& text, const std::string& source = "<scenario>");

/// A matrix file: a bare nested array, an object with a "T" field, or a
/// scenario file (its transition matrix).
Matrix load_matrix(const std::filesystem::path& path);

/// Parameters of the unstructured 2-NN process plus an optional seed.
struct TwoNNFile {
  UnstructuredParams params;
  std::optional<std::uint64_t> seed;
};

TwoNNFile load_2nn_params(const std::filesystem::path& path);

/// Reads a whole file; throws ValidationError when it cannot be opened.
std::string read_text(const std::filesystem::path& path);

}  // namespace noiseid::cli
