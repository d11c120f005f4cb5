#include "driftbench/similarity_heads.hpp"

#include "driftbench/error.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <numeric>
#include <string>

namespace driftbench {

namespace {

void check_input(std::size_t dim, std::size_t num_classes, const Vector& z, std::uint32_t label) {
  if (static_cast<std::size_t>(z.size()) != dim) {
    throw ShapeError("feature length " + std::to_string(z.size()) + " != " + std::to_string(dim));
  }
  if (label >= num_classes) throw ValidationError("label " + std::to_string(label) + " out of range");
  if (!z.allFinite()) throw ValidationError("non-finite feature vector");
}

void check_query(std::size_t dim, const Vector& z) {
  if (static_cast<std::size_t>(z.size()) != dim) {
    throw ShapeError("feature length " + std::to_string(z.size()) + " != " + std::to_string(dim));
  }
}

void check_shape(std::size_t num_classes, std::size_t dim) {
  if (num_classes == 0 || dim == 0) throw ShapeError("classifier needs N >= 1 and h >= 1");
}

}  // namespace

// ---------------------------------------------------------------- KNN

KnnHead::KnnHead(std::size_t num_classes, std::size_t dim, std::size_t k)
    : num_classes_(num_classes), dim_(dim), k_(k) {
  check_shape(num_classes, dim);
  if (k == 0) throw ConfigError("KNN requires k >= 1");
}

void KnnHead::observe(const Vector& z, std::uint32_t label) {
  check_input(dim_, num_classes_, z, label);
  exemplars_.push_back(z);
  labels_.push_back(label);
}

std::uint32_t KnnHead::predict(const Vector& z) const {
  check_query(dim_, z);
  if (exemplars_.empty()) throw StateError("KNN has no stored exemplars");
  const std::size_t k = std::min(k_, exemplars_.size());

  std::vector<std::pair<double, std::size_t>> dist(exemplars_.size());
  for (std::size_t i = 0; i < exemplars_.size(); ++i) dist[i] = {(exemplars_[i] - z).squaredNorm(), i};
  // Pair ordering breaks distance ties by insertion index.
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());

  std::vector<std::size_t> votes(num_classes_, 0);
  for (std::size_t i = 0; i < k; ++i) ++votes[labels_[dist[i].second]];
  return static_cast<std::uint32_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

// ---------------------------------------------------------- Prototypes

PrototypeHead::PrototypeHead(std::size_t num_classes, std::size_t dim, PrototypeMode mode)
    : num_classes_(num_classes),
      dim_(dim),
      mode_(mode),
      counts_(num_classes, 0),
      means_(Matrix::Zero(static_cast<Eigen::Index>(num_classes), static_cast<Eigen::Index>(dim))) {
  check_shape(num_classes, dim);
  if (mode_ == PrototypeMode::median) exemplars_.resize(num_classes);
}

PrototypeHead PrototypeHead::from_means(Matrix means, std::vector<std::uint64_t> counts) {
  PrototypeHead head(static_cast<std::size_t>(means.rows()), static_cast<std::size_t>(means.cols()),
                     PrototypeMode::mean);
  if (counts.size() != head.num_classes_) throw ShapeError("count vector length mismatch");
  head.means_ = std::move(means);
  head.counts_ = std::move(counts);
  return head;
}

void PrototypeHead::observe(const Vector& z, std::uint32_t label) {
  check_input(dim_, num_classes_, z, label);
  const auto k = static_cast<Eigen::Index>(label);
  const double c = static_cast<double>(counts_[label]);
  means_.row(k) = (c * means_.row(k) + z.transpose()) / (c + 1.0);
  ++counts_[label];
  if (mode_ == PrototypeMode::median) {
    exemplars_[label].push_back(z);
    std::lock_guard lock(cache_mutex_.mutex);
    median_stale_ = true;
  }
}

const Matrix& PrototypeHead::cached_prototypes() const {
  if (mode_ == PrototypeMode::mean) return means_;
  std::lock_guard lock(cache_mutex_.mutex);
  if (median_stale_) {
    median_cache_ = Matrix::Zero(static_cast<Eigen::Index>(num_classes_), static_cast<Eigen::Index>(dim_));
    std::vector<double> column;
    for (std::size_t k = 0; k < num_classes_; ++k) {
      const auto& pool = exemplars_[k];
      if (pool.empty()) continue;
      for (std::size_t d = 0; d < dim_; ++d) {
        column.clear();
        for (const auto& z : pool) column.push_back(z[static_cast<Eigen::Index>(d)]);
        const std::size_t mid = column.size() / 2;
        std::nth_element(column.begin(), column.begin() + static_cast<std::ptrdiff_t>(mid), column.end());
        double value = column[mid];
        if (column.size() % 2 == 0) {
          // Even count: average the two middle order statistics.
          const double lower = *std::max_element(column.begin(), column.begin() + static_cast<std::ptrdiff_t>(mid));
          value = 0.5 * (lower + value);
        }
        median_cache_(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d)) = value;
      }
    }
    median_stale_ = false;
  }
  return median_cache_;
}

Matrix PrototypeHead::prototypes() const { return cached_prototypes(); }

std::uint32_t PrototypeHead::predict(const Vector& z) const {
  check_query(dim_, z);
  const Matrix& protos = cached_prototypes();
  std::uint32_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t k = 0; k < num_classes_; ++k) {
    if (counts_[k] == 0) continue;
    const double d = (protos.row(static_cast<Eigen::Index>(k)).transpose() - z).squaredNorm();
    if (!any || d < best_dist) {
      best_dist = d;
      best = static_cast<std::uint32_t>(k);
      any = true;
    }
  }
  if (!any) throw StateError("prototype classifier has no observations");
  return best;
}

// ---------------------------------------------------------------- SLDA

SldaHead::SldaHead(std::size_t num_classes, std::size_t dim, double shrinkage)
    : num_classes_(num_classes),
      dim_(dim),
      shrinkage_(shrinkage),
      means_(Matrix::Zero(static_cast<Eigen::Index>(num_classes), static_cast<Eigen::Index>(dim))),
      counts_(num_classes, 0),
      covariance_(Matrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim))) {
  check_shape(num_classes, dim);
  if (!(shrinkage > 0.0 && shrinkage <= 1.0)) throw ConfigError("SLDA shrinkage must lie in (0, 1]");
}

SldaHead SldaHead::from_state(Matrix means, std::vector<std::uint64_t> counts, Matrix covariance,
                              std::uint64_t total, double shrinkage) {
  SldaHead head(static_cast<std::size_t>(means.rows()), static_cast<std::size_t>(means.cols()), shrinkage);
  if (counts.size() != head.num_classes_ || covariance.rows() != means.cols() ||
      covariance.cols() != means.cols()) {
    throw ShapeError("SLDA state shapes are inconsistent");
  }
  if (std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}) != total) {
    throw ValidationError("SLDA total count differs from the sum of class counts");
  }
  head.means_ = std::move(means);
  head.counts_ = std::move(counts);
  head.covariance_ = std::move(covariance);
  head.total_ = total;
  return head;
}

void SldaHead::observe(const Vector& z, std::uint32_t label) {
  check_input(dim_, num_classes_, z, label);
  const auto k = static_cast<Eigen::Index>(label);
  const double t = static_cast<double>(total_);

  // Delta uses the mean before this sample is folded in.
  const Vector diff = z - means_.row(k).transpose();
  covariance_ = (t * covariance_ + (t / (t + 1.0)) * (diff * diff.transpose())) / (t + 1.0);

  const double c = static_cast<double>(counts_[label]);
  means_.row(k) = (c * means_.row(k) + z.transpose()) / (c + 1.0);
  ++counts_[label];
  ++total_;

  std::lock_guard lock(cache_mutex_.mutex);
  stale_ = true;
}

void SldaHead::rebuild_locked() const {
  const auto h = static_cast<Eigen::Index>(dim_);
  const Matrix system = (1.0 - shrinkage_) * covariance_ + shrinkage_ * Matrix::Identity(h, h);
  Eigen::LLT<Matrix> llt(system);
  if (llt.info() != Eigen::Success) throw NumericalError("shrunk SLDA covariance is not positive definite");
  const Matrix w = llt.solve(means_.transpose());  // h x N, column k = w_k
  weights_ = w.transpose();
  biases_ = -0.5 * means_.cwiseProduct(weights_).rowwise().sum();
  if (!weights_.allFinite() || !biases_.allFinite()) throw NumericalError("SLDA solve produced non-finite values");
  stale_ = false;
}

void SldaHead::refresh() const {
  std::lock_guard lock(cache_mutex_.mutex);
  if (stale_) rebuild_locked();
}

Matrix SldaHead::weights() const {
  refresh();
  return weights_;
}

Vector SldaHead::biases() const {
  refresh();
  return biases_;
}

Vector SldaHead::logits(const Vector& z) const {
  check_query(dim_, z);
  if (total_ == 0) throw StateError("SLDA has no observations");
  Vector out;
  {
    std::lock_guard lock(cache_mutex_.mutex);
    if (stale_) rebuild_locked();
    out = weights_ * z + biases_;
  }
  for (std::size_t k = 0; k < num_classes_; ++k) {
    if (counts_[k] == 0) out[static_cast<Eigen::Index>(k)] = -std::numeric_limits<double>::infinity();
  }
  return out;
}

std::uint32_t SldaHead::predict(const Vector& z) const {
  Eigen::Index best;
  logits(z).maxCoeff(&best);
  return static_cast<std::uint32_t>(best);
}

}  // namespace driftbench
