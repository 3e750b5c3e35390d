#include "argf/data.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace argf {

namespace fs = std::filesystem;
using nlohmann::json;

std::string split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "unknown";
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "val") return Split::Val;
  if (name == "test") return Split::Test;
  throw std::runtime_error("unknown split name: '" + name + "' (expected train|val|test)");
}

std::vector<std::size_t> FeatureBundle::indices_of(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < splits.size(); ++i) {
    if (splits[i] == s) out.push_back(i);
  }
  return out;
}

void FeatureBundle::validate() const {
  if (count == 0) throw std::runtime_error("bundle: empty (count=0)");
  if (num_classes < 2) {
    throw std::runtime_error("bundle: num_classes must be >= 2, got " +
                             std::to_string(num_classes));
  }
  if (dims[0] == 0 || dims[0] != dims[1] || dims[0] != dims[2]) {
    throw std::runtime_error("bundle: modality dims must be equal and nonzero, got " +
                             std::to_string(dims[0]) + "/" + std::to_string(dims[1]) + "/" +
                             std::to_string(dims[2]) +
                             " (preprocess features to a shared dimensionality)");
  }
  for (std::size_t m = 0; m < 3; ++m) {
    if (features[m].size() != count * dims[m]) {
      throw std::runtime_error("bundle: modality '" + modality_names[m] + "' holds " +
                               std::to_string(features[m].size()) + " values, expected " +
                               std::to_string(count * dims[m]));
    }
  }
  if (labels.size() != count) {
    throw std::runtime_error("bundle: " + std::to_string(labels.size()) + " labels for " +
                             std::to_string(count) + " samples");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
      throw std::runtime_error("bundle: label " + std::to_string(labels[i]) + " at row " +
                               std::to_string(i) + " out of range [0," +
                               std::to_string(num_classes) + ")");
    }
  }
  if (splits.size() != count) {
    throw std::runtime_error("bundle: " + std::to_string(splits.size()) +
                             " split assignments for " + std::to_string(count) + " samples");
  }
}

void SyntheticSpec::validate() const {
  if (num_classes < 2) throw std::runtime_error("synthetic: num_classes must be >= 2");
  if (dim == 0) throw std::runtime_error("synthetic: dim must be >= 1");
  if (count == 0) throw std::runtime_error("synthetic: count must be >= 1");
  if (!(separation > 0.0)) throw std::runtime_error("synthetic: separation must be > 0");
  for (double s : noise) {
    if (!(s > 0.0)) throw std::runtime_error("synthetic: noise sigma must be > 0");
  }
  if (redundancy < 0.0 || redundancy > 1.0) {
    throw std::runtime_error("synthetic: redundancy must be in [0,1]");
  }
}

namespace {

// index,tag rows; also reused to seed default assignments.
std::vector<Split> default_splits(std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_train = static_cast<std::size_t>(std::llround(count * 0.7));
  const std::size_t n_val = static_cast<std::size_t>(std::llround(count * 0.1));
  std::vector<Split> splits(count, Split::Test);
  for (std::size_t i = 0; i < count; ++i) {
    if (i < n_train) {
      splits[order[i]] = Split::Train;
    } else if (i < n_train + n_val) {
      splits[order[i]] = Split::Val;
    }
  }
  return splits;
}

std::vector<double> random_matrix(std::size_t rows, std::size_t cols, double scale, Rng& rng) {
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<double> out(rows * cols);
  for (auto& v : out) v = dist(rng);
  return out;
}

void matvec(const std::vector<double>& m, const std::vector<double>& x, std::size_t d,
            std::vector<double>& out) {
  for (std::size_t r = 0; r < d; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < d; ++c) acc += m[r * d + c] * x[c];
    out[r] = acc;
  }
}

}  // namespace

FeatureBundle generate_synthetic(const SyntheticSpec& spec, SyntheticModel* model) {
  spec.validate();
  const std::size_t d = spec.dim, N = spec.num_classes;
  Rng rng(spec.seed);

  // Fixed projections: A_m mixes the shared class latent, B_m the private one.
  std::array<std::vector<double>, 3> proj_shared, proj_private;
  const double proj_scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (std::size_t m = 0; m < 3; ++m) {
    proj_shared[m] = random_matrix(d, d, proj_scale, rng);
    proj_private[m] = random_matrix(d, d, proj_scale, rng);
  }

  // Class latents: one shared z_c, one private u_{c,m} per modality.
  std::normal_distribution<double> latent(0.0, spec.separation);
  std::vector<std::vector<double>> z(N, std::vector<double>(d));
  std::array<std::vector<std::vector<double>>, 3> u;
  for (auto& per_m : u) per_m.assign(N, std::vector<double>(d));
  for (std::size_t c = 0; c < N; ++c) {
    for (auto& v : z[c]) v = latent(rng);
    for (std::size_t m = 0; m < 3; ++m) {
      for (auto& v : u[m][c]) v = latent(rng);
    }
  }

  // Class means: rho * A_m z_c + (1-rho) * B_m u_{c,m}.
  std::array<std::vector<std::vector<double>>, 3> means;
  std::vector<double> tmp_shared(d), tmp_private(d);
  for (std::size_t m = 0; m < 3; ++m) {
    means[m].assign(N, std::vector<double>(d));
    for (std::size_t c = 0; c < N; ++c) {
      matvec(proj_shared[m], z[c], d, tmp_shared);
      matvec(proj_private[m], u[m][c], d, tmp_private);
      for (std::size_t i = 0; i < d; ++i) {
        means[m][c][i] = spec.redundancy * tmp_shared[i] + (1.0 - spec.redundancy) * tmp_private[i];
      }
    }
  }

  FeatureBundle bundle;
  bundle.dims = {d, d, d};
  bundle.num_classes = N;
  bundle.count = spec.count;
  bundle.labels.resize(spec.count);
  for (auto& f : bundle.features) f.resize(spec.count * d);

  // Round-robin labels keep priors uniform within one sample.
  for (std::size_t i = 0; i < spec.count; ++i) bundle.labels[i] = static_cast<int>(i % N);
  std::shuffle(bundle.labels.begin(), bundle.labels.end(), rng);

  std::normal_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < spec.count; ++i) {
    const int c = bundle.labels[i];
    for (std::size_t m = 0; m < 3; ++m) {
      double* row = bundle.features[m].data() + i * d;
      const auto& mu = means[m][c];
      for (std::size_t j = 0; j < d; ++j) row[j] = mu[j] + spec.noise[m] * unit(rng);
    }
  }

  bundle.splits = default_splits(spec.count, rng());
  bundle.validate();

  if (model) {
    model->dim = d;
    model->num_classes = N;
    model->mean = means;
  }
  return bundle;
}

// -- bundle IO -----------------------------------------------------------------

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_matrix_csv(const std::string& path, const std::vector<double>& data, std::size_t rows,
                      std::size_t cols) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (c) out << ',';
      out << fmt_double(data[r * cols + c]);
    }
    out << '\n';
  }
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

double parse_double(const std::string& field, const std::string& file, std::size_t lineno) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  // ERANGE on underflow still yields a usable (sub)normal; only reject
  // outright parse failures, trailing garbage and overflow.
  if (end == field.c_str() || *end != '\0' || !std::isfinite(v)) {
    throw std::runtime_error(file + " line " + std::to_string(lineno) + ": bad number '" +
                             field + "'");
  }
  return v;
}

long parse_int(const std::string& field, const std::string& file, std::size_t lineno) {
  errno = 0;
  char* end = nullptr;
  const long v = std::strtol(field.c_str(), &end, 10);
  if (end == field.c_str() || *end != '\0' || errno == ERANGE) {
    throw std::runtime_error(file + " line " + std::to_string(lineno) + ": bad integer '" +
                             field + "'");
  }
  return v;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

}  // namespace

void save_bundle(const FeatureBundle& bundle, const std::string& dir) {
  bundle.validate();
  fs::create_directories(dir);

  json manifest;
  manifest["modalities"] = json::array();
  for (std::size_t m = 0; m < 3; ++m) {
    manifest["modalities"].push_back(
        {{"name", bundle.modality_names[m]}, {"dim", bundle.dims[m]}});
  }
  manifest["num_classes"] = bundle.num_classes;
  manifest["count"] = bundle.count;
  std::ofstream mf(dir + "/manifest.json");
  if (!mf) throw std::runtime_error("cannot write " + dir + "/manifest.json");
  mf << manifest.dump(2) << '\n';

  for (std::size_t m = 0; m < 3; ++m) {
    write_matrix_csv(dir + "/" + bundle.modality_names[m] + ".csv", bundle.features[m],
                     bundle.count, bundle.dims[m]);
  }

  std::ofstream lf(dir + "/labels.csv");
  if (!lf) throw std::runtime_error("cannot write " + dir + "/labels.csv");
  for (int label : bundle.labels) lf << label << '\n';

  std::ofstream sf(dir + "/splits.csv");
  if (!sf) throw std::runtime_error("cannot write " + dir + "/splits.csv");
  for (std::size_t i = 0; i < bundle.count; ++i) {
    sf << i << ',' << split_name(bundle.splits[i]) << '\n';
  }
}

FeatureBundle load_bundle(const std::string& dir) {
  const std::string manifest_path = dir + "/manifest.json";
  std::ifstream mf(manifest_path);
  if (!mf) throw std::runtime_error("cannot open " + manifest_path);
  json manifest;
  try {
    mf >> manifest;
  } catch (const json::exception& e) {
    throw std::runtime_error(manifest_path + ": invalid JSON: " + e.what());
  }

  FeatureBundle bundle;
  try {
    const auto& mods = manifest.at("modalities");
    if (!mods.is_array() || mods.size() != 3) {
      throw std::runtime_error(manifest_path + ": expected exactly 3 modalities, found " +
                               std::to_string(mods.is_array() ? mods.size() : 0));
    }
    for (std::size_t m = 0; m < 3; ++m) {
      bundle.modality_names[m] = mods[m].at("name").get<std::string>();
      bundle.dims[m] = mods[m].at("dim").get<std::size_t>();
    }
    bundle.num_classes = manifest.at("num_classes").get<std::size_t>();
    bundle.count = manifest.at("count").get<std::size_t>();
  } catch (const json::exception& e) {
    throw std::runtime_error(manifest_path + ": " + e.what());
  }
  if (bundle.count == 0) throw std::runtime_error(manifest_path + ": count must be >= 1");
  if (bundle.dims[0] != bundle.dims[1] || bundle.dims[0] != bundle.dims[2]) {
    throw std::runtime_error(manifest_path + ": modality dims differ (" +
                             std::to_string(bundle.dims[0]) + "/" +
                             std::to_string(bundle.dims[1]) + "/" +
                             std::to_string(bundle.dims[2]) +
                             "); preprocess features to a shared dimensionality");
  }

  for (std::size_t m = 0; m < 3; ++m) {
    const std::string path = dir + "/" + bundle.modality_names[m] + ".csv";
    const auto lines = read_lines(path);
    if (lines.size() != bundle.count) {
      throw std::runtime_error(path + ": expected " + std::to_string(bundle.count) +
                               " rows, found " + std::to_string(lines.size()));
    }
    auto& dst = bundle.features[m];
    dst.reserve(bundle.count * bundle.dims[m]);
    for (std::size_t r = 0; r < lines.size(); ++r) {
      const auto fields = split_fields(lines[r]);
      if (fields.size() != bundle.dims[m]) {
        throw std::runtime_error(path + " line " + std::to_string(r + 1) + ": expected " +
                                 std::to_string(bundle.dims[m]) + " values, found " +
                                 std::to_string(fields.size()));
      }
      for (const auto& f : fields) dst.push_back(parse_double(f, path, r + 1));
    }
  }

  {
    const std::string path = dir + "/labels.csv";
    const auto lines = read_lines(path);
    if (lines.size() != bundle.count) {
      throw std::runtime_error(path + ": expected " + std::to_string(bundle.count) +
                               " labels, found " + std::to_string(lines.size()));
    }
    bundle.labels.reserve(bundle.count);
    for (std::size_t r = 0; r < lines.size(); ++r) {
      const long v = parse_int(lines[r], path, r + 1);
      if (v < 0 || static_cast<std::size_t>(v) >= bundle.num_classes) {
        throw std::runtime_error(path + " line " + std::to_string(r + 1) + ": label " +
                                 std::to_string(v) + " out of range [0," +
                                 std::to_string(bundle.num_classes) + ")");
      }
      bundle.labels.push_back(static_cast<int>(v));
    }
  }

  const std::string splits_path = dir + "/splits.csv";
  if (fs::exists(splits_path)) {
    const auto lines = read_lines(splits_path);
    if (lines.size() != bundle.count) {
      throw std::runtime_error(splits_path + ": expected " + std::to_string(bundle.count) +
                               " rows, found " + std::to_string(lines.size()));
    }
    bundle.splits.assign(bundle.count, Split::Train);
    std::vector<bool> seen(bundle.count, false);
    for (std::size_t r = 0; r < lines.size(); ++r) {
      const auto fields = split_fields(lines[r]);
      if (fields.size() != 2) {
        throw std::runtime_error(splits_path + " line " + std::to_string(r + 1) +
                                 ": expected 'index,split'");
      }
      const long idx = parse_int(fields[0], splits_path, r + 1);
      if (idx < 0 || static_cast<std::size_t>(idx) >= bundle.count) {
        throw std::runtime_error(splits_path + " line " + std::to_string(r + 1) + ": index " +
                                 std::to_string(idx) + " out of range [0," +
                                 std::to_string(bundle.count) + ")");
      }
      if (seen[idx]) {
        throw std::runtime_error(splits_path + " line " + std::to_string(r + 1) +
                                 ": duplicate index " + std::to_string(idx));
      }
      seen[idx] = true;
      try {
        bundle.splits[idx] = split_from_name(fields[1]);
      } catch (const std::runtime_error& e) {
        throw std::runtime_error(splits_path + " line " + std::to_string(r + 1) + ": " +
                                 e.what());
      }
    }
  } else {
    bundle.splits = default_splits(bundle.count, kDefaultSplitSeed);
  }

  bundle.validate();
  return bundle;
}

// -- batching -----------------------------------------------------------------

ModalityBatch make_batch(const FeatureBundle& bundle, const std::vector<std::size_t>& indices) {
  const std::size_t B = indices.size();
  const std::size_t d = bundle.dim();
  const std::size_t N = bundle.num_classes;
  ModalityBatch batch;
  batch.labels.reserve(B);
  for (std::size_t m = 0; m < 3; ++m) {
    std::vector<double> x(B * d);
    for (std::size_t r = 0; r < B; ++r) {
      const double* src = bundle.row(static_cast<Modality>(m), indices[r]);
      std::copy(src, src + d, x.begin() + r * d);
    }
    batch.x[m] = Tensor::from({B, d}, std::move(x));
  }
  std::vector<double> y(B * N, 0.0);
  for (std::size_t r = 0; r < B; ++r) {
    const int label = bundle.labels[indices[r]];
    batch.labels.push_back(label);
    y[r * N + static_cast<std::size_t>(label)] = 1.0;
  }
  batch.y = Tensor::from({B, N}, std::move(y));
  return batch;
}

Batcher::Batcher(const FeatureBundle& bundle, Split split, std::size_t batch_size,
                 std::uint64_t seed)
    : bundle_(bundle), indices_(bundle.indices_of(split)), batch_size_(batch_size), rng_(seed) {
  if (batch_size_ == 0) throw std::invalid_argument("batch_size must be >= 1");
}

std::vector<ModalityBatch> Batcher::epoch() {
  std::shuffle(indices_.begin(), indices_.end(), rng_);
  std::vector<ModalityBatch> batches;
  for (std::size_t start = 0; start < indices_.size(); start += batch_size_) {
    const std::size_t end = std::min(indices_.size(), start + batch_size_);
    std::vector<std::size_t> chunk(indices_.begin() + start, indices_.begin() + end);
    batches.push_back(make_batch(bundle_, chunk));
  }
  return batches;
}

}  // namespace argf
