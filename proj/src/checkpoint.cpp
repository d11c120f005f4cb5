#include "driftbench/checkpoint.hpp"

#include "driftbench/error.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <string>

namespace driftbench {

namespace {

constexpr std::array<char, 4> kMagic{'H', 'E', 'A', 'D'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  template <typename T>
  void put(T value) {
    char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    buffer_.append(bytes, sizeof(T));
  }
  void put_matrix(const Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) put<double>(m(i, j));
    }
  }
  void put_vector(const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) put<double>(v[i]);
  }
  std::string& buffer() { return buffer_; }

 private:
  std::string buffer_;
};

class Reader {
 public:
  Reader(std::string data, std::string name) : data_(std::move(data)), name_(std::move(name)) {}

  template <typename T>
  T get() {
    if (data_.size() - offset_ < sizeof(T)) throw CorruptionError(name_ + ": truncated checkpoint");
    T value;
    std::memcpy(&value, data_.data() + offset_, sizeof(T));
    offset_ += sizeof(T);
    return value;
  }
  Matrix get_matrix(std::size_t rows, std::size_t cols) {
    require(rows * cols * sizeof(double));
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = get<double>();
    }
    return m;
  }
  Vector get_vector(std::size_t n) {
    require(n * sizeof(double));
    Vector v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = get<double>();
    return v;
  }
  void require(std::uint64_t bytes) const {
    if (data_.size() - offset_ < bytes) throw CorruptionError(name_ + ": truncated checkpoint");
  }
  void finish() const {
    if (offset_ != data_.size()) throw CorruptionError(name_ + ": trailing bytes after payload");
  }

 private:
  std::string data_;
  std::string name_;
  std::size_t offset_ = 0;
};

void header(Writer& w, std::uint8_t kind, std::uint8_t mask, std::size_t n, std::size_t h) {
  w.buffer().append(kMagic.data(), kMagic.size());
  w.put<std::uint32_t>(kVersion);
  w.put<std::uint8_t>(kind);
  w.put<std::uint8_t>(mask);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(n));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(h));
}

}  // namespace

void save_checkpoint(const Classifier& head, const std::filesystem::path& path) {
  Writer w;
  if (const auto* g = std::get_if<GradientHead>(&head)) {
    header(w, static_cast<std::uint8_t>(g->kind()), static_cast<std::uint8_t>(g->mask()), g->num_classes(), g->dim());
    w.put_matrix(g->params().weights);
    w.put_vector(g->params().bias);
    w.put_vector(g->params().gamma);
  } else if (const auto* p = std::get_if<PrototypeHead>(&head)) {
    const bool mean = p->mode() == PrototypeMode::mean;
    header(w, static_cast<std::uint8_t>(mean ? CheckpointKind::mean_layer : CheckpointKind::median_layer), 0,
           p->num_classes(), p->dim());
    if (mean) w.put_matrix(p->means());
    for (auto c : p->counts()) w.put<std::uint64_t>(c);
    if (!mean) {
      for (const auto& pool : p->exemplars()) {
        for (const auto& z : pool) w.put_vector(z);
      }
    }
  } else if (const auto* k = std::get_if<KnnHead>(&head)) {
    header(w, static_cast<std::uint8_t>(CheckpointKind::knn), 0, k->num_classes(), k->dim());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(k->k()));
    w.put<std::uint64_t>(k->size());
    for (std::size_t i = 0; i < k->size(); ++i) {
      w.put<std::uint32_t>(k->labels()[i]);
      w.put_vector(k->exemplars()[i]);
    }
  } else {
    const auto& s = std::get<SldaHead>(head);
    header(w, static_cast<std::uint8_t>(CheckpointKind::slda), 0, s.num_classes(), s.dim());
    w.put_matrix(s.means());
    for (auto c : s.counts()) w.put<std::uint64_t>(c);
    w.put_matrix(s.covariance());
    w.put<std::uint64_t>(s.total());
    w.put<double>(s.shrinkage());
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
  if (!out) throw IoError("failed writing " + path.string());
}

Classifier load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() < 4 || std::memcmp(data.data(), kMagic.data(), 4) != 0) {
    throw FormatError(path.string() + ": bad magic, expected HEAD");
  }
  Reader r(std::move(data), path.string());
  r.get<std::uint32_t>();  // magic
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) throw FormatError(path.string() + ": unsupported version " + std::to_string(version));
  const auto kind = r.get<std::uint8_t>();
  const auto mask = r.get<std::uint8_t>();
  const std::size_t n = r.get<std::uint32_t>();
  const std::size_t h = r.get<std::uint32_t>();
  if (n == 0 || h == 0) throw CorruptionError(path.string() + ": empty head shape");

  auto read_counts = [&] {
    r.require(n * sizeof(std::uint64_t));
    std::vector<std::uint64_t> counts(n);
    for (auto& c : counts) c = r.get<std::uint64_t>();
    return counts;
  };

  if (kind <= static_cast<std::uint8_t>(HeadKind::original_weight_norm)) {
    if (mask > static_cast<std::uint8_t>(MaskMode::group)) throw FormatError(path.string() + ": unknown mask byte");
    HeadParams params{r.get_matrix(n, h), r.get_vector(n), r.get_vector(n)};
    r.finish();
    return GradientHead(static_cast<HeadKind>(kind), static_cast<MaskMode>(mask), std::move(params));
  }
  switch (static_cast<CheckpointKind>(kind)) {
    case CheckpointKind::mean_layer: {
      Matrix means = r.get_matrix(n, h);
      auto counts = read_counts();
      r.finish();
      return PrototypeHead::from_means(std::move(means), std::move(counts));
    }
    case CheckpointKind::median_layer: {
      auto counts = read_counts();
      PrototypeHead head(n, h, PrototypeMode::median);
      for (std::size_t k = 0; k < n; ++k) {
        for (std::uint64_t i = 0; i < counts[k]; ++i) head.observe(r.get_vector(h), static_cast<std::uint32_t>(k));
      }
      r.finish();
      return head;
    }
    case CheckpointKind::knn: {
      const auto k = r.get<std::uint32_t>();
      const auto count = r.get<std::uint64_t>();
      KnnHead head(n, h, k);
      for (std::uint64_t i = 0; i < count; ++i) {
        const auto label = r.get<std::uint32_t>();
        head.observe(r.get_vector(h), label);
      }
      r.finish();
      return head;
    }
    case CheckpointKind::slda: {
      Matrix means = r.get_matrix(n, h);
      auto counts = read_counts();
      Matrix cov = r.get_matrix(h, h);
      const auto total = r.get<std::uint64_t>();
      const auto shrinkage = r.get<double>();
      r.finish();
      return SldaHead::from_state(std::move(means), std::move(counts), std::move(cov), total, shrinkage);
    }
  }
  throw FormatError(path.string() + ": unknown head kind byte " + std::to_string(kind));
}

}  // namespace driftbench
