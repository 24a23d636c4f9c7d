#include <noiseid/dataset_io.hpp>
#include <noiseid/errors.hpp>
#include <noiseid/noisegen.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

using namespace noiseid;
namespace fs = std::filesystem;

namespace {

NoisyDataset mixed_dataset(std::uint64_t seed) {
  NoisyDataset ds(3, 2, 2, {2, 4});
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> n(0.0, 10.0);
  std::uniform_int_distribution<int> label(0, 2), two(0, 1), four(0, 3);
  for (int i = 0; i < 200; ++i) {
    const std::vector<double> x{n(gen), n(gen) * 1e-7};
    const std::vector<int> r{two(gen), four(gen)};
    const std::vector<int> noisy{label(gen), label(gen)};
    ds.push_back(x, r, label(gen), noisy);
  }
  ds.provenance.model = "test";
  ds.provenance.seed = seed;
  return ds;
}

void expect_same(const NoisyDataset& a, const NoisyDataset& b) {
  ASSERT_EQ(a.size(), b.size());
  ASSERT_EQ(a.K(), b.K());
  ASSERT_EQ(a.p(), b.p());
  ASSERT_EQ(a.S(), b.S());
  ASSERT_EQ(a.feature_cardinalities(), b.feature_cardinalities());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (int s = 0; s < a.S(); ++s) EXPECT_EQ(a.x(i)[static_cast<std::size_t>(s)], b.x(i)[static_cast<std::size_t>(s)]);
    EXPECT_TRUE(std::equal(a.r(i).begin(), a.r(i).end(), b.r(i).begin()));
    EXPECT_EQ(a.y(i), b.y(i));
    EXPECT_TRUE(std::equal(a.noisy(i).begin(), a.noisy(i).end(), b.noisy(i).begin()));
  }
}

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("noiseid_io_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
                                                ::testing::UnitTest::GetInstance()->current_test_info()->name())) {
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

}  // namespace

TEST(FormatDouble, RoundTrips) {
  std::mt19937_64 gen(1);
  std::uniform_int_distribution<std::uint64_t> bits;
  for (int i = 0; i < 10000; ++i) {
    double v = 0.0;
    const std::uint64_t b = bits(gen);
    std::memcpy(&v, &b, sizeof v);
    if (!std::isfinite(v)) continue;
    EXPECT_EQ(std::strtod(format_double(v).c_str(), nullptr), v) << format_double(v);
  }
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(3.0), "3");
}

TEST(Csv, HeaderAndOneBasedLabels) {
  NoisyDataset ds(2, 3, 1);
  const std::vector<double> x{1.5};
  const std::vector<int> none, noisy{0, 1, 1};
  ds.push_back(x, none, 1, noisy);
  std::ostringstream out;
  write_csv(out, ds);
  EXPECT_EQ(out.str(), "x_1,y,ytilde_1,ytilde_2,ytilde_3\n1.5,2,1,2,2\n");
}

TEST(Csv, RoundTripPreservesEveryField) {
  const auto ds = mixed_dataset(3);
  std::stringstream buffer;
  write_csv(buffer, ds);
  const auto back = read_csv(buffer, 3, std::vector<int>{2, 4});
  expect_same(ds, back);
}

TEST(Csv, RoundTripOfSampledData) {
  const auto ds = sample_instance_noisy(Prior::uniform(4), 3, 0.3, 3, 500, 8);
  std::stringstream buffer;
  write_csv(buffer, ds);
  expect_same(ds, read_csv(buffer, 4));
}

TEST(Csv, MissingCleanLabelColumn) {
  std::istringstream in("ytilde_1,ytilde_2,ytilde_3\n1,2,2\n2,2,1\n");
  const auto ds = read_csv(in);
  EXPECT_EQ(ds.size(), 2u);
  EXPECT_FALSE(ds.has_clean_labels());
  EXPECT_EQ(ds.K(), 2);
  EXPECT_EQ(ds.noisy(1)[0], 1);
}

TEST(Csv, MalformedInputRejected) {
  std::istringstream short_row("y,ytilde_1\n1\n");
  EXPECT_THROW(read_csv(short_row), ValidationError);
  std::istringstream bad_label("y,ytilde_1\n1,0\n");
  EXPECT_THROW(read_csv(bad_label), ValidationError);
  std::istringstream bad_number("x_1,y,ytilde_1\nabc,1,1\n");
  EXPECT_THROW(read_csv(bad_number), ValidationError);
  std::istringstream out_of_range("y,ytilde_1\n1,3\n");
  EXPECT_THROW(read_csv(out_of_range, 2), ValidationError);
}

TEST(Files, SaveLoadWithSidecar) {
  TempDir dir;
  const auto ds = mixed_dataset(4);
  const auto path = dir.path() / "data.csv";
  save_dataset(path, ds);
  ASSERT_TRUE(fs::exists(sidecar_path(path)));
  EXPECT_EQ(sidecar_path(path).filename(), "data.csv.provenance.json");
  const auto back = load_dataset(path);
  expect_same(ds, back);
  EXPECT_EQ(back.provenance.model, "test");
  EXPECT_EQ(back.provenance.seed, 4u);
}

TEST(Files, SameDatasetSameBytes) {
  TempDir dir;
  const auto T = asymmetric_T(3, 0.25);
  save_dataset(dir.path() / "a.csv", sample_iid_noisy(Prior::uniform(3), T, 3, 1000, 9));
  save_dataset(dir.path() / "b.csv", sample_iid_noisy(Prior::uniform(3), T, 3, 1000, 9));
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  EXPECT_EQ(slurp(dir.path() / "a.csv"), slurp(dir.path() / "b.csv"));
  EXPECT_EQ(slurp(sidecar_path(dir.path() / "a.csv")), slurp(sidecar_path(dir.path() / "b.csv")));
}

TEST(Files, MissingFileIsAnError) {
  EXPECT_THROW(load_dataset("/nonexistent/dir/data.csv"), Error);
}

TEST(Provenance, DocumentFields) {
  const auto ds = sample_iid_noisy(Prior::uniform(2), asymmetric_T(2, 0.1), 3, 10, 77);
  const auto doc = provenance_document(ds);
  EXPECT_EQ(doc["seed"], 77);
  EXPECT_TRUE(doc.contains("model"));
  EXPECT_TRUE(doc.contains("parameters"));
}
