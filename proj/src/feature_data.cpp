#include "driftbench/feature_data.hpp"

#include "driftbench/error.hpp"
#include "driftbench/random.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <string>

namespace driftbench {

static_assert(std::endian::native == std::endian::little,
              "FSET1 I/O assumes a little-endian host");

FeatureSet::FeatureSet(std::size_t dim, std::size_t num_classes, std::vector<Example> examples)
    : dim_(dim), num_classes_(num_classes), examples_(std::move(examples)) {
  if (dim_ == 0) throw ValidationError("feature set dimension must be positive");
  if (num_classes_ == 0) throw ValidationError("feature set must declare at least one class");
  for (std::size_t i = 0; i < examples_.size(); ++i) {
    const Example& ex = examples_[i];
    if (static_cast<std::size_t>(ex.features.size()) != dim_) {
      throw ValidationError("example " + std::to_string(i) + " has length " +
                            std::to_string(ex.features.size()) + ", expected " +
                            std::to_string(dim_));
    }
    if (ex.class_label >= num_classes_) {
      throw ValidationError("example " + std::to_string(i) + " has class label " +
                            std::to_string(ex.class_label) + " >= num_classes " +
                            std::to_string(num_classes_));
    }
    if (!ex.features.allFinite()) {
      throw ValidationError("example " + std::to_string(i) + " has non-finite features");
    }
  }
}

std::vector<std::uint32_t> FeatureSet::observed_classes() const {
  std::set<std::uint32_t> labels;
  for (const auto& ex : examples_) labels.insert(ex.class_label);
  return {labels.begin(), labels.end()};
}

std::vector<std::uint32_t> FeatureSet::observed_domains() const {
  std::set<std::uint32_t> labels;
  for (const auto& ex : examples_) labels.insert(ex.domain_label);
  return {labels.begin(), labels.end()};
}

FeatureSet FeatureSet::select(const std::vector<std::size_t>& indices) const {
  std::vector<Example> picked;
  picked.reserve(indices.size());
  for (std::size_t i : indices) picked.push_back(examples_.at(i));
  return FeatureSet(dim_, num_classes_, std::move(picked));
}

void SyntheticSpec::validate() const {
  auto require = [](bool ok, const char* key, const char* what) {
    if (!ok) throw ConfigError(std::string("invalid value for ") + key + ": " + what);
  };
  require(num_classes > 0, "classes", "must be positive");
  require(modes_per_class > 0, "modes", "must be positive");
  require(dim > 0, "dim", "must be positive");
  require(std::isfinite(center_scale) && center_scale > 0, "center-scale", "must be > 0");
  require(std::isfinite(stddev) && stddev > 0, "stddev", "must be > 0");
  require(train_per_mode > 0, "train-per-mode", "must be positive");
  require(test_per_mode > 0, "test-per-mode", "must be positive");
  require(num_classes <= UINT32_MAX && modes_per_class <= UINT32_MAX, "classes",
          "label range exceeds u32");
}

namespace {

// Samples are rounded through float so in-memory values equal what FSET1 stores.
Vector sample_around(const Vector& center, double stddev, Rng& rng) {
  Vector z(center.size());
  for (Eigen::Index d = 0; d < center.size(); ++d) {
    z[d] = static_cast<double>(static_cast<float>(center[d] + stddev * rng.normal()));
  }
  return z;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t clusters = spec.num_classes * spec.modes_per_class;

  Rng center_rng(derive_seed(spec.seed, 0));
  std::vector<Vector> centers(clusters, Vector(spec.dim));
  for (auto& center : centers) {
    for (Eigen::Index d = 0; d < center.size(); ++d) center[d] = spec.center_scale * center_rng.normal();
  }

  auto draw = [&](std::uint64_t stream, std::size_t per_mode) {
    Rng rng(derive_seed(spec.seed, stream));
    std::vector<Example> examples;
    examples.reserve(clusters * per_mode);
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
      for (std::size_t m = 0; m < spec.modes_per_class; ++m) {
        const Vector& center = centers[c * spec.modes_per_class + m];
        for (std::size_t i = 0; i < per_mode; ++i) {
          examples.push_back({sample_around(center, spec.stddev, rng), static_cast<std::uint32_t>(c),
                              static_cast<std::uint32_t>(m)});
        }
      }
    }
    return FeatureSet(spec.dim, spec.num_classes, std::move(examples));
  };

  return {draw(1, spec.train_per_mode), draw(2, spec.test_per_mode)};
}

namespace {

constexpr std::array<char, 4> kFsetMagic{'F', 'S', 'E', 'T'};
constexpr std::uint32_t kFsetVersion = 1;

template <typename T>
void put(std::string& out, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out.append(bytes, sizeof(T));
}

template <typename T>
T get(const std::string& in, std::size_t& offset) {
  T value;
  std::memcpy(&value, in.data() + offset, sizeof(T));
  offset += sizeof(T);
  return value;
}

}  // namespace

void write_feature_file(const FeatureSet& set, const std::filesystem::path& path) {
  if (set.dim() > UINT32_MAX || set.num_classes() > UINT32_MAX) {
    throw ValidationError("feature set metadata exceeds u32 range");
  }
  std::string buffer;
  buffer.reserve(kFsetHeaderBytes + set.size() * (8 + 4 * set.dim()));
  buffer.append(kFsetMagic.data(), kFsetMagic.size());
  put<std::uint32_t>(buffer, kFsetVersion);
  put<std::uint32_t>(buffer, static_cast<std::uint32_t>(set.dim()));
  put<std::uint32_t>(buffer, static_cast<std::uint32_t>(set.num_classes()));
  put<std::uint64_t>(buffer, set.size());
  for (const auto& ex : set.examples()) {
    put<std::uint32_t>(buffer, ex.class_label);
    put<std::uint32_t>(buffer, ex.domain_label);
    for (Eigen::Index d = 0; d < ex.features.size(); ++d) put<float>(buffer, static_cast<float>(ex.features[d]));
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

FeatureSet read_feature_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("failed reading " + path.string());

  if (data.size() < kFsetHeaderBytes) {
    if (data.size() >= 4 && std::memcmp(data.data(), kFsetMagic.data(), 4) != 0) {
      throw FormatError(path.string() + ": bad magic");
    }
    throw CorruptionError(path.string() + ": truncated header");
  }
  if (std::memcmp(data.data(), kFsetMagic.data(), 4) != 0) {
    throw FormatError(path.string() + ": bad magic, expected FSET");
  }
  std::size_t offset = 4;
  const auto version = get<std::uint32_t>(data, offset);
  if (version != kFsetVersion) {
    throw FormatError(path.string() + ": unsupported version " + std::to_string(version));
  }
  const auto dim = get<std::uint32_t>(data, offset);
  const auto num_classes = get<std::uint32_t>(data, offset);
  const auto count = get<std::uint64_t>(data, offset);

  const std::uint64_t record_bytes = 8 + 4ULL * dim;
  const std::uint64_t body = data.size() - kFsetHeaderBytes;
  if (dim == 0 || count > body / record_bytes || body != count * record_bytes) {
    throw CorruptionError(path.string() + ": header declares " + std::to_string(count) +
                          " records but body holds " + std::to_string(body) + " bytes");
  }

  std::vector<Example> examples;
  examples.reserve(count);
  for (std::uint64_t r = 0; r < count; ++r) {
    Example ex;
    ex.class_label = get<std::uint32_t>(data, offset);
    ex.domain_label = get<std::uint32_t>(data, offset);
    ex.features.resize(dim);
    for (std::uint32_t d = 0; d < dim; ++d) ex.features[d] = get<float>(data, offset);
    examples.push_back(std::move(ex));
  }
  return FeatureSet(dim, num_classes, std::move(examples));
}

}  // namespace driftbench
