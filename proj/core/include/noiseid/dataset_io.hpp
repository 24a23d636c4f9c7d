#pragma once

#include "noiseid/noisegen.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>

namespace noiseid {

/// CSV with header x_1..x_S, r_1..r_d, y, ytilde_1..ytilde_p. Labels and
/// categories are written 1-based; doubles use the shortest round-trip form,
/// so the bytes depend only on the dataset.
void write_csv(std::ostream& out, const NoisyDataset& ds);

/// Inverse of write_csv. The y column is optional. K and the feature
/// cardinalities come from the arguments when given, otherwise from the
/// largest value seen in each column (at least 2).
NoisyDataset read_csv(std::istream& in, std::optional<int> K = std::nullopt,
                      std::optional<std::vector<int>> feature_cardinalities = std::nullopt);

/// Provenance sidecar: model, seed, parameters, and the dataset shape.
nlohmann::json provenance_document(const NoisyDataset& ds);

/// `<dataset>.provenance.json`
std::filesystem::path sidecar_path(const std::filesystem::path& dataset);

/// Writes the CSV and its provenance sidecar; throws Error on I/O failure.
void save_dataset(const std::filesystem::path& path, const NoisyDataset& ds);

/// Reads a CSV, taking K and feature cardinalities from the sidecar when one exists.
NoisyDataset load_dataset(const std::filesystem::path& path);

/// Shortest decimal string that round-trips `v`.
std::string format_double(double v);

}  // namespace noiseid
