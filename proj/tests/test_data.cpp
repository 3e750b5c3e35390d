#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "argf/data.hpp"
#include "oracles.hpp"

using namespace argf;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

}  // namespace

TEST_CASE("synthetic generation is bitwise deterministic") {
  SyntheticSpec spec;
  spec.count = 100;
  spec.dim = 6;
  spec.seed = 77;
  FeatureBundle a = generate_synthetic(spec);
  FeatureBundle b = generate_synthetic(spec);
  CHECK(a.features[0] == b.features[0]);
  CHECK(a.features[2] == b.features[2]);
  CHECK(a.labels == b.labels);
  CHECK(a.splits == b.splits);
}

TEST_CASE("noiseless well-separated task is perfectly classifiable") {
  SyntheticSpec spec;
  spec.count = 300;
  spec.dim = 8;
  spec.separation = 5.0;
  spec.noise = {1e-4, 1e-4, 1e-4};
  spec.seed = 78;
  FeatureBundle bundle = generate_synthetic(spec);
  CHECK(oracles::nearest_mean_accuracy(bundle, Split::Train) == doctest::Approx(1.0));
}

TEST_CASE("class priors are uniform within one sample") {
  SyntheticSpec spec;
  spec.num_classes = 3;
  spec.count = 1000;
  spec.dim = 4;
  spec.seed = 79;
  FeatureBundle bundle = generate_synthetic(spec);
  std::vector<std::size_t> counts(3, 0);
  for (int label : bundle.labels) counts[static_cast<std::size_t>(label)]++;
  const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
  CHECK(*hi - *lo <= 1);
}

TEST_CASE("empirical class means converge to the construction means") {
  SyntheticSpec spec;
  spec.count = 10000;
  spec.dim = 6;
  spec.noise = {0.5, 0.5, 0.5};
  spec.seed = 80;
  SyntheticModel model;
  FeatureBundle bundle = generate_synthetic(spec, &model);

  std::array<std::vector<std::vector<double>>, 3> sums;
  std::vector<std::size_t> counts(2, 0);
  for (auto& s : sums) s.assign(2, std::vector<double>(spec.dim, 0.0));
  for (std::size_t i = 0; i < bundle.count; ++i) {
    const std::size_t c = static_cast<std::size_t>(bundle.labels[i]);
    if (c == 0) counts[0]++; else counts[1]++;
    for (std::size_t m = 0; m < 3; ++m) {
      const double* row = bundle.row(static_cast<Modality>(m), i);
      for (std::size_t j = 0; j < spec.dim; ++j) sums[m][c][j] += row[j];
    }
  }
  for (std::size_t m = 0; m < 3; ++m) {
    for (std::size_t c = 0; c < 2; ++c) {
      const double bound = 3.0 * spec.noise[m] / std::sqrt(static_cast<double>(counts[c]));
      const auto& truth = model.class_mean(static_cast<Modality>(m), static_cast<int>(c));
      for (std::size_t j = 0; j < spec.dim; ++j) {
        const double emp = sums[m][c][j] / static_cast<double>(counts[c]);
        CHECK(std::fabs(emp - truth[j]) <= bound);
      }
    }
  }
}

TEST_CASE("invalid synthetic specs are rejected") {
  SyntheticSpec spec;
  spec.num_classes = 1;
  CHECK_THROWS_AS(generate_synthetic(spec), std::runtime_error);
  spec = {};
  spec.separation = 0.0;
  CHECK_THROWS_AS(generate_synthetic(spec), std::runtime_error);
  spec = {};
  spec.redundancy = 1.5;
  CHECK_THROWS_AS(generate_synthetic(spec), std::runtime_error);
}

TEST_CASE("bundle save and load round-trips exactly") {
  TempDir dir("argf_bundle_roundtrip");
  SyntheticSpec spec;
  spec.count = 50;
  spec.dim = 5;
  spec.seed = 81;
  FeatureBundle bundle = generate_synthetic(spec);
  save_bundle(bundle, dir.str());
  FeatureBundle loaded = load_bundle(dir.str());
  CHECK(loaded.count == bundle.count);
  CHECK(loaded.num_classes == bundle.num_classes);
  CHECK(loaded.dims == bundle.dims);
  CHECK(loaded.features[0] == bundle.features[0]);
  CHECK(loaded.features[1] == bundle.features[1]);
  CHECK(loaded.features[2] == bundle.features[2]);
  CHECK(loaded.labels == bundle.labels);
  CHECK(loaded.splits == bundle.splits);
}

TEST_CASE("missing splits.csv falls back to a fixed seeded 70/10/20 split") {
  TempDir dir("argf_bundle_nosplits");
  SyntheticSpec spec;
  spec.count = 200;
  spec.dim = 4;
  spec.seed = 82;
  FeatureBundle bundle = generate_synthetic(spec);
  save_bundle(bundle, dir.str());
  fs::remove(dir.path / "splits.csv");
  FeatureBundle a = load_bundle(dir.str());
  FeatureBundle b = load_bundle(dir.str());
  CHECK(a.splits == b.splits);
  CHECK(a.indices_of(Split::Train).size() == 140);
  CHECK(a.indices_of(Split::Val).size() == 20);
  CHECK(a.indices_of(Split::Test).size() == 40);
}

TEST_CASE("corrupted bundles are rejected with named diagnostics") {
  TempDir dir("argf_bundle_fuzz");
  SyntheticSpec spec;
  spec.count = 20;
  spec.dim = 3;
  spec.seed = 83;
  FeatureBundle bundle = generate_synthetic(spec);

  auto fresh = [&] {
    fs::remove_all(dir.path);
    save_bundle(bundle, dir.str());
  };
  auto overwrite = [&](const std::string& file, const std::string& content) {
    std::ofstream out(dir.path / file);
    out << content;
  };
  auto append_line = [&](const std::string& file, const std::string& line) {
    std::ofstream out(dir.path / file, std::ios::app);
    out << line << '\n';
  };

  SUBCASE("missing manifest") {
    fresh();
    fs::remove(dir.path / "manifest.json");
    CHECK_THROWS_WITH_AS(load_bundle(dir.str()), doctest::Contains("manifest.json"),
                         std::runtime_error);
  }
  SUBCASE("manifest is not json") {
    fresh();
    overwrite("manifest.json", "not json at all {{{");
    CHECK_THROWS_WITH_AS(load_bundle(dir.str()), doctest::Contains("invalid JSON"),
                         std::runtime_error);
  }
  SUBCASE("manifest with two modalities") {
    fresh();
    overwrite("manifest.json",
              R"({"modalities":[{"name":"a","dim":3},{"name":"b","dim":3}],)"
              R"("num_classes":2,"count":20})");
    CHECK_THROWS_WITH_AS(load_bundle(dir.str()), doctest::Contains("3 modalities"),
                         std::runtime_error);
  }
  SUBCASE("dimension mismatch across modalities") {
    fresh();
    overwrite("manifest.json",
              R"({"modalities":[{"name":"acoustic","dim":3},{"name":"visual","dim":4},)"
              R"({"name":"language","dim":3}],"num_classes":2,"count":20})");
    CHECK_THROWS_WITH_AS(load_bundle(dir.str()), doctest::Contains("dims differ"),
                         std::runtime_error);
  }
  SUBCASE("truncated labels file") {
    fresh();
    overwrite("labels.csv", "0\n1\n0\n");
    CHECK_THROWS_WITH_AS(load_bundle(dir.str()), doctest::Contains("labels.csv"),
                         std::runtime_error);
    CHECK_THROWS_WITH_AS(load_bundle(dir.str()), doctest::Contains("expected 20"),
                         std::runtime_error);
  }
  SUBCASE("label out of range") {
    fresh();
    std::string labels;
    for (int i = 0; i < 19; ++i) labels += "0\n";
    labels += "2\n";  // num_classes is 2
    overwrite("labels.csv", labels);
    CHECK_THROWS_WITH_AS(load_bundle(dir.str()), doctest::Contains("out of range"),
                         std::runtime_error);
  }
  SUBCASE("ragged feature row") {
    fresh();
    auto lines_path = dir.path / "acoustic.csv";
    std::ifstream in(lines_path);
    std::string all, line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (lineno == 5) line += ",99.0";
      all += line + "\n";
    }
    in.close();
    overwrite("acoustic.csv", all);
    CHECK_THROWS_WITH_AS(load_bundle(dir.str()), doctest::Contains("acoustic.csv line 5"),
                         std::runtime_error);
  }
  SUBCASE("garbage number in features") {
    fresh();
    std::ifstream in(dir.path / "visual.csv");
    std::string all, line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (lineno == 2) line = "1.0,banana,3.0";
      all += line + "\n";
    }
    in.close();
    overwrite("visual.csv", all);
    CHECK_THROWS_WITH_AS(load_bundle(dir.str()), doctest::Contains("banana"),
                         std::runtime_error);
  }
  SUBCASE("missing feature rows") {
    fresh();
    overwrite("language.csv", "1.0,2.0,3.0\n");
    CHECK_THROWS_WITH_AS(load_bundle(dir.str()), doctest::Contains("language.csv"),
                         std::runtime_error);
  }
  SUBCASE("bad split tag") {
    fresh();
    overwrite("splits.csv", [] {
      std::string s;
      for (int i = 0; i < 19; ++i) s += std::to_string(i) + ",train\n";
      s += "19,validation\n";
      return s;
    }());
    CHECK_THROWS_WITH_AS(load_bundle(dir.str()), doctest::Contains("validation"),
                         std::runtime_error);
  }
  SUBCASE("duplicate split index") {
    fresh();
    overwrite("splits.csv", [] {
      std::string s;
      for (int i = 0; i < 19; ++i) s += std::to_string(i) + ",train\n";
      s += "3,test\n";
      return s;
    }());
    CHECK_THROWS_WITH_AS(load_bundle(dir.str()), doctest::Contains("duplicate"),
                         std::runtime_error);
  }
  SUBCASE("split index out of range") {
    fresh();
    append_line("splits.csv", "99,test");
    CHECK_THROWS_AS(load_bundle(dir.str()), std::runtime_error);
  }
}

TEST_CASE("batcher covers the split exactly once per epoch") {
  SyntheticSpec spec;
  spec.count = 103;
  spec.dim = 4;
  spec.seed = 84;
  FeatureBundle bundle = generate_synthetic(spec);
  Batcher batcher(bundle, Split::Train, 16, 7);
  const auto train_indices = bundle.indices_of(Split::Train);

  auto batches = batcher.epoch();
  std::size_t total = 0;
  std::multiset<int> seen_labels, expected_labels;
  for (const auto& b : batches) {
    total += b.size();
    for (int label : b.labels) seen_labels.insert(label);
    // one-hot rows sum to 1 and match the label column
    for (std::size_t r = 0; r < b.size(); ++r) {
      double sum = 0.0;
      for (std::size_t c = 0; c < b.y.cols(); ++c) sum += b.y.values()[r * b.y.cols() + c];
      CHECK(sum == doctest::Approx(1.0));
      CHECK(b.y.values()[r * b.y.cols() + static_cast<std::size_t>(b.labels[r])] == 1.0);
    }
  }
  for (std::size_t i : train_indices) expected_labels.insert(bundle.labels[i]);
  CHECK(total == train_indices.size());
  CHECK(seen_labels == expected_labels);
  // last partial batch kept
  CHECK(batches.back().size() == train_indices.size() % 16);
}

TEST_CASE("batcher order is seed-deterministic and varies per epoch") {
  SyntheticSpec spec;
  spec.count = 60;
  spec.dim = 3;
  spec.seed = 85;
  FeatureBundle bundle = generate_synthetic(spec);
  Batcher a(bundle, Split::Train, 8, 42);
  Batcher b(bundle, Split::Train, 8, 42);
  auto ea = a.epoch();
  auto eb = b.epoch();
  REQUIRE(ea.size() == eb.size());
  for (std::size_t i = 0; i < ea.size(); ++i) CHECK(ea[i].labels == eb[i].labels);

  auto ea2 = a.epoch();
  bool same = true;
  for (std::size_t i = 0; i < ea.size() && same; ++i) same = ea[i].labels == ea2[i].labels;
  CHECK_FALSE(same);  // reshuffled between epochs
}
