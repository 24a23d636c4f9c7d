#include "noiseid/dataset_io.hpp"

#include "noiseid/errors.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace noiseid {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream s(line);
  while (std::getline(s, field, ',')) {
    if (!field.empty() && field.back() == '\r') field.pop_back();
    out.push_back(field);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <typename T>
T parse_number(const std::string& text, std::size_t line_no) {
  T value{};
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw ValidationError("line " + std::to_string(line_no) + ": cannot parse '" + text + "'");
  }
  return value;
}

enum class Column { x, r, y, noisy };

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error("format_double failed");
  return std::string(buf, ptr);
}

void write_csv(std::ostream& out, const NoisyDataset& ds) {
  std::string header;
  auto add = [&header](const std::string& name) {
    if (!header.empty()) header += ',';
    header += name;
  };
  for (int s = 1; s <= ds.S(); ++s) add("x_" + std::to_string(s));
  for (int k = 1; k <= ds.d(); ++k) add("r_" + std::to_string(k));
  if (ds.has_clean_labels()) add("y");
  for (int k = 1; k <= ds.p(); ++k) add("ytilde_" + std::to_string(k));
  out << header << '\n';

  std::string line;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    line.clear();
    auto field = [&line](const std::string& v) {
      if (!line.empty()) line += ',';
      line += v;
    };
    for (double v : ds.x(i)) field(format_double(v));
    for (int v : ds.r(i)) field(std::to_string(v + 1));
    if (ds.has_clean_labels()) field(std::to_string(ds.y(i) + 1));
    for (int v : ds.noisy(i)) field(std::to_string(v + 1));
    out << line << '\n';
  }
}

NoisyDataset read_csv(std::istream& in, std::optional<int> K,
                      std::optional<std::vector<int>> feature_cardinalities) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("dataset is empty: missing header");
  const auto header = split_line(line);
  std::vector<std::pair<Column, int>> layout;
  int S = 0, d = 0, p = 0;
  bool has_y = false;
  for (const auto& name : header) {
    auto expect_index = [&](const std::string& prefix, int& counter, Column c) {
      const int idx = parse_number<int>(name.substr(prefix.size()), 1);
      if (idx != counter + 1) throw ValidationError("line 1: column '" + name + "' is out of order");
      layout.emplace_back(c, counter++);
    };
    if (name.rfind("x_", 0) == 0) {
      expect_index("x_", S, Column::x);
    } else if (name.rfind("r_", 0) == 0) {
      expect_index("r_", d, Column::r);
    } else if (name.rfind("ytilde_", 0) == 0) {
      expect_index("ytilde_", p, Column::noisy);
    } else if (name == "y") {
      if (has_y) throw ValidationError("line 1: duplicate y column");
      has_y = true;
      layout.emplace_back(Column::y, 0);
    } else {
      throw ValidationError("line 1: unknown column '" + name + "'");
    }
  }

  struct Row {
    std::vector<double> x;
    std::vector<int> r;
    int y = -1;
    std::vector<int> noisy;
  };
  std::vector<Row> rows;
  int max_label = 1;
  std::vector<int> max_category(static_cast<std::size_t>(d), 2);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_line(line);
    if (fields.size() != layout.size()) {
      throw ValidationError("line " + std::to_string(line_no) + ": expected " + std::to_string(layout.size()) +
                            " fields, got " + std::to_string(fields.size()));
    }
    Row row;
    row.x.resize(static_cast<std::size_t>(S));
    row.r.resize(static_cast<std::size_t>(d));
    row.noisy.resize(static_cast<std::size_t>(p));
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const auto [kind, idx] = layout[c];
      const auto u = static_cast<std::size_t>(idx);
      switch (kind) {
        case Column::x:
          row.x[u] = parse_number<double>(fields[c], line_no);
          break;
        case Column::r:
          row.r[u] = parse_number<int>(fields[c], line_no) - 1;
          max_category[u] = std::max(max_category[u], row.r[u] + 1);
          break;
        case Column::y:
          row.y = parse_number<int>(fields[c], line_no) - 1;
          max_label = std::max(max_label, row.y + 1);
          break;
        case Column::noisy:
          row.noisy[u] = parse_number<int>(fields[c], line_no) - 1;
          max_label = std::max(max_label, row.noisy[u] + 1);
          break;
      }
    }
    rows.push_back(std::move(row));
  }

  NoisyDataset ds(K.value_or(std::max(max_label, 2)), p, S,
                  feature_cardinalities.value_or(max_category));
  ds.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    try {
      ds.push_back(rows[i].x, rows[i].r, has_y ? rows[i].y : -1, rows[i].noisy);
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(i + 2) + ": " + e.what());
    }
  }
  return ds;
}

nlohmann::json provenance_document(const NoisyDataset& ds) {
  return nlohmann::json{{"model", ds.provenance.model},
                        {"seed", ds.provenance.seed},
                        {"parameters", ds.provenance.parameters},
                        {"K", ds.K()},
                        {"p", ds.p()},
                        {"S", ds.S()},
                        {"n", ds.size()},
                        {"feature_cardinalities", ds.feature_cardinalities()}};
}

std::filesystem::path sidecar_path(const std::filesystem::path& dataset) {
  auto p = dataset;
  p += ".provenance.json";
  return p;
}

void save_dataset(const std::filesystem::path& path, const NoisyDataset& ds) {
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    write_csv(out, ds);
    if (!out) throw Error("failed writing " + path.string());
  }
  std::ofstream side(sidecar_path(path), std::ios::binary);
  if (!side) throw Error("cannot open " + sidecar_path(path).string() + " for writing");
  side << provenance_document(ds).dump(2) << '\n';
  if (!side) throw Error("failed writing " + sidecar_path(path).string());
}

NoisyDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::optional<int> K;
  std::optional<std::vector<int>> cards;
  Provenance provenance;
  if (std::filesystem::exists(sidecar_path(path))) {
    std::ifstream side(sidecar_path(path));
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(side);
      K = doc.at("K").get<int>();
      cards = doc.value("feature_cardinalities", std::vector<int>{});
      provenance.model = doc.value("model", "");
      provenance.seed = doc.value("seed", std::uint64_t{0});
      provenance.parameters = doc.value("parameters", nlohmann::json::object());
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(sidecar_path(path).string() + ": " + e.what());
    }
  }
  auto ds = read_csv(in, K, cards);
  ds.provenance = std::move(provenance);
  return ds;
}

}  // namespace noiseid
