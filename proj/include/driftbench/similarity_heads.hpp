#pragma once

#include "driftbench/feature_data.hpp"

#include <cstdint>
#include <limits>
#include <mutex>
#include <vector>

namespace driftbench {

namespace detail {

// Copyable mutex holder so heads with lazily rebuilt caches stay value types.
// Copies get a fresh mutex; the cache they guard is copied by the owner.
struct CacheMutex {
  mutable std::mutex mutex;
  CacheMutex() = default;
  CacheMutex(const CacheMutex&) {}
  CacheMutex& operator=(const CacheMutex&) { return *this; }
};

}  // namespace detail

/// k-nearest-neighbour vote over every stored exemplar (brute force).
class KnnHead {
 public:
  KnnHead(std::size_t num_classes, std::size_t dim, std::size_t k);

  void observe(const Vector& z, std::uint32_t label);
  // Majority label among the k closest exemplars. Distance ties go to the
  // earlier insertion, vote ties to the lowest label. k is truncated to the
  // store size.
  std::uint32_t predict(const Vector& z) const;

  std::size_t k() const noexcept { return k_; }
  std::size_t num_classes() const noexcept { return num_classes_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return labels_.size(); }
  const std::vector<Vector>& exemplars() const noexcept { return exemplars_; }
  const std::vector<std::uint32_t>& labels() const noexcept { return labels_; }

 private:
  std::size_t num_classes_;
  std::size_t dim_;
  std::size_t k_;
  std::vector<Vector> exemplars_;
  std::vector<std::uint32_t> labels_;
};

enum class PrototypeMode : std::uint8_t { mean, median };

/// Nearest-prototype classifier. Mean mode keeps a streaming mean per class;
/// median mode keeps every exemplar and uses the coordinate-wise median.
class PrototypeHead {
 public:
  PrototypeHead(std::size_t num_classes, std::size_t dim, PrototypeMode mode);

  void observe(const Vector& z, std::uint32_t label);
  // argmin_k |z - prototype_k| over observed classes, lowest label on ties.
  std::uint32_t predict(const Vector& z) const;

  // Row k is class k's prototype (zero for unobserved classes).
  Matrix prototypes() const;

  PrototypeMode mode() const noexcept { return mode_; }
  std::size_t num_classes() const noexcept { return num_classes_; }
  std::size_t dim() const noexcept { return dim_; }
  const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }
  const Matrix& means() const noexcept { return means_; }
  const std::vector<std::vector<Vector>>& exemplars() const noexcept { return exemplars_; }

  // Rebuild a mean-mode head from saved statistics.
  static PrototypeHead from_means(Matrix means, std::vector<std::uint64_t> counts);

 private:
  const Matrix& cached_prototypes() const;

  std::size_t num_classes_;
  std::size_t dim_;
  PrototypeMode mode_;
  std::vector<std::uint64_t> counts_;
  Matrix means_;
  std::vector<std::vector<Vector>> exemplars_;

  detail::CacheMutex cache_mutex_;
  mutable Matrix median_cache_;
  mutable bool median_stale_ = true;
};

inline constexpr double kSldaShrinkage = 1e-4;

/// Streaming linear discriminant analysis.
///
/// Keeps one running mean per class, a shared h x h covariance and the total
/// count. Each observation costs O(h^2) and nothing is stored per sample.
/// Scoring solves [(1 - eps) Sigma + eps I] w_k = mu_k, b_k = -mu_k.w_k / 2,
/// o_k = <z, w_k> + b_k; the solve is cached until the next observation.
class SldaHead {
 public:
  SldaHead(std::size_t num_classes, std::size_t dim, double shrinkage = kSldaShrinkage);

  void observe(const Vector& z, std::uint32_t label);

  // Scores for every class; classes never observed get -infinity.
  Vector logits(const Vector& z) const;
  std::uint32_t predict(const Vector& z) const;

  // Rebuilds the cached discriminant now. Calling it at task boundaries keeps
  // later concurrent predictions free of the lazy rebuild.
  void refresh() const;

  // Discriminant weights (row k = w_k) and biases; refreshed if stale.
  Matrix weights() const;
  Vector biases() const;

  std::size_t num_classes() const noexcept { return num_classes_; }
  std::size_t dim() const noexcept { return dim_; }
  double shrinkage() const noexcept { return shrinkage_; }
  const Matrix& means() const noexcept { return means_; }
  const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }
  const Matrix& covariance() const noexcept { return covariance_; }
  std::uint64_t total() const noexcept { return total_; }

  static SldaHead from_state(Matrix means, std::vector<std::uint64_t> counts, Matrix covariance,
                             std::uint64_t total, double shrinkage);

 private:
  void rebuild_locked() const;

  std::size_t num_classes_;
  std::size_t dim_;
  double shrinkage_;
  Matrix means_;
  std::vector<std::uint64_t> counts_;
  Matrix covariance_;
  std::uint64_t total_ = 0;

  detail::CacheMutex cache_mutex_;
  mutable Matrix weights_;
  mutable Vector biases_;
  mutable bool stale_ = true;
};

}  // namespace driftbench
