#include "driftbench/gradient_head.hpp"

#include "driftbench/error.hpp"
#include "driftbench/random.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace driftbench {

std::string_view to_string(HeadKind kind) {
  switch (kind) {
    case HeadKind::linear: return "Linear";
    case HeadKind::linear_no_bias: return "LinearNoBias";
    case HeadKind::weight_norm: return "WeightNorm";
    case HeadKind::cos_layer: return "CosLayer";
    case HeadKind::original_weight_norm: return "OriginalWeightNorm";
  }
  return "unknown";
}

std::string_view to_string(MaskMode mask) {
  switch (mask) {
    case MaskMode::none: return "none";
    case MaskMode::single: return "single";
    case MaskMode::group: return "group";
  }
  return "unknown";
}

HeadKind parse_head_kind(std::string_view name) {
  for (HeadKind kind : kAllHeadKinds) {
    if (name == to_string(kind)) return kind;
  }
  throw ConfigError("unknown head kind '" + std::string(name) + "'");
}

MaskMode parse_mask_mode(std::string_view name) {
  if (name == "none") return MaskMode::none;
  if (name == "single") return MaskMode::single;
  if (name == "group") return MaskMode::group;
  throw ConfigError("unknown mask mode '" + std::string(name) + "'");
}

bool uses_bias(HeadKind kind) {
  return kind == HeadKind::linear || kind == HeadKind::original_weight_norm;
}

bool uses_gamma(HeadKind kind) { return kind == HeadKind::original_weight_norm; }

double default_learning_rate(HeadKind kind) {
  return (kind == HeadKind::linear || kind == HeadKind::linear_no_bias) ? 0.01 : 0.1;
}

HeadParams HeadParams::zeros(std::size_t num_classes, std::size_t dim) {
  const auto n = static_cast<Eigen::Index>(num_classes);
  return {Matrix::Zero(n, static_cast<Eigen::Index>(dim)), Vector::Zero(n), Vector::Zero(n)};
}

bool HeadParams::operator==(const HeadParams& other) const {
  return weights.rows() == other.weights.rows() && weights.cols() == other.weights.cols() &&
         bias.size() == other.bias.size() && gamma.size() == other.gamma.size() &&
         weights == other.weights && bias == other.bias && gamma == other.gamma;
}

std::vector<Sample> make_batch(const FeatureSet& set, std::span<const std::size_t> indices) {
  std::vector<Sample> batch;
  batch.reserve(indices.size());
  for (std::size_t i : indices) batch.push_back({std::cref(set[i].features), set[i].class_label});
  return batch;
}

GradientHead::GradientHead(HeadKind kind, MaskMode mask, HeadParams params)
    : kind_(kind), mask_(mask), params_(std::move(params)) {
  const auto n = params_.weights.rows();
  if (n == 0 || params_.weights.cols() == 0) throw ShapeError("head needs N >= 1 and h >= 1");
  if (params_.bias.size() != n || params_.gamma.size() != n) {
    throw ShapeError("bias/gamma length must equal the number of classes");
  }
  if (!params_.weights.allFinite() || !params_.bias.allFinite() || !params_.gamma.allFinite()) {
    throw ValidationError("head parameters must be finite");
  }
  velocity_ = HeadParams::zeros(num_classes(), dim());
}

void GradientHead::set_params(HeadParams params) {
  *this = GradientHead(kind_, mask_, std::move(params));
}

GradientHead init_head(HeadKind kind, std::size_t num_classes, std::size_t dim, std::uint64_t seed,
                       MaskMode mask) {
  if (num_classes == 0 || dim == 0) throw ShapeError("head needs N >= 1 and h >= 1");
  HeadParams params = HeadParams::zeros(num_classes, dim);
  Rng rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  for (Eigen::Index i = 0; i < params.weights.rows(); ++i) {
    for (Eigen::Index j = 0; j < params.weights.cols(); ++j) params.weights(i, j) = scale * rng.normal();
  }
  params.gamma.setOnes();
  return GradientHead(kind, mask, std::move(params));
}

namespace {

void check_dim(const GradientHead& head, const Vector& z) {
  if (static_cast<std::size_t>(z.size()) != head.dim()) {
    throw ShapeError("feature length " + std::to_string(z.size()) + " does not match head dim " +
                     std::to_string(head.dim()));
  }
}

// Quantities shared by the forward and backward passes for one example.
struct Forward {
  Vector dots;        // <z, A_i>
  Vector out;         // logits
  double z_scale;     // 1 / max(|z|, eps) for CosLayer, 1 otherwise
};

Forward forward(const GradientHead& head, const Vector& z, const Vector& row_denoms) {
  const HeadParams& p = head.params();
  Forward f;
  f.dots.noalias() = p.weights * z;
  f.z_scale = 1.0;
  switch (head.kind()) {
    case HeadKind::linear:
      f.out = f.dots + p.bias;
      break;
    case HeadKind::linear_no_bias:
      f.out = f.dots;
      break;
    case HeadKind::weight_norm:
      f.out = f.dots.cwiseQuotient(row_denoms);
      break;
    case HeadKind::cos_layer:
      f.z_scale = 1.0 / std::max(z.norm(), kNormEpsilon);
      f.out = f.dots.cwiseQuotient(row_denoms) * f.z_scale;
      break;
    case HeadKind::original_weight_norm:
      f.out = p.gamma.cwiseProduct(f.dots.cwiseQuotient(row_denoms)) + p.bias;
      break;
  }
  return f;
}

Vector row_denominators(const GradientHead& head) {
  return head.params().weights.rowwise().norm().cwiseMax(kNormEpsilon);
}

}  // namespace

Vector logits(const GradientHead& head, const Vector& z) {
  check_dim(head, z);
  return forward(head, z, row_denominators(head)).out;
}

std::uint32_t predict(const GradientHead& head, const Vector& z) {
  Eigen::Index best;
  logits(head, z).maxCoeff(&best);  // Eigen returns the first maximum
  return static_cast<std::uint32_t>(best);
}

HeadGradient loss_and_gradient(const GradientHead& head, std::span<const Sample> batch) {
  if (batch.empty()) throw ValidationError("gradient requested for an empty batch");
  const std::size_t n = head.num_classes();
  const HeadParams& p = head.params();
  const Vector row_norms = p.weights.rowwise().norm();
  const Vector denoms = row_norms.cwiseMax(kNormEpsilon);
  const bool normalized = head.kind() == HeadKind::weight_norm || head.kind() == HeadKind::cos_layer ||
                          head.kind() == HeadKind::original_weight_norm;

  HeadGradient g{0.0, HeadParams::zeros(n, head.dim()), HeadParams::zeros(n, head.dim())};
  // For normalized kinds dA_i = c_i (z / n_i - <z,A_i> A_i / n_i^3); the A_i
  // term is accumulated as a per-row coefficient and applied once at the end.
  Vector full_row_coef = Vector::Zero(static_cast<Eigen::Index>(n));
  Vector own_row_coef = Vector::Zero(static_cast<Eigen::Index>(n));
  const double inv_batch = 1.0 / static_cast<double>(batch.size());

  for (const Sample& s : batch) {
    const Vector& z = s.features.get();
    check_dim(head, z);
    if (s.label >= n) {
      throw ValidationError("label " + std::to_string(s.label) + " out of range for " +
                            std::to_string(n) + " classes");
    }
    const Forward f = forward(head, z, denoms);
    const double top = f.out.maxCoeff();
    Vector prob = (f.out.array() - top).exp().matrix();
    const double total = prob.sum();
    g.loss += (std::log(total) + top - f.out[s.label]) * inv_batch;
    prob /= total;

    Vector delta = prob * inv_batch;  // dL/do
    delta[s.label] -= inv_batch;

    // dL/dA_i = delta_i * (z_coef_i * z - row_coef_i * A_i)
    Vector z_coef(static_cast<Eigen::Index>(n));
    Vector row_coef = Vector::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      double scale = 1.0;
      if (head.kind() == HeadKind::cos_layer) scale = f.z_scale;
      if (head.kind() == HeadKind::original_weight_norm) scale = p.gamma[k];
      if (normalized) {
        z_coef[k] = delta[k] * scale / denoms[k];
        // The epsilon guard is a constant when active.
        if (row_norms[k] >= kNormEpsilon) {
          row_coef[k] = delta[k] * scale * f.dots[k] / (denoms[k] * denoms[k] * denoms[k]);
        }
      } else {
        z_coef[k] = delta[k];
      }
    }
    g.full.weights.noalias() += z_coef * z.transpose();
    full_row_coef += row_coef;
    const auto y = static_cast<Eigen::Index>(s.label);
    g.own_target.weights.row(y) += z_coef[y] * z.transpose();
    own_row_coef[y] += row_coef[y];

    if (uses_bias(head.kind())) {
      g.full.bias += delta;
      g.own_target.bias[y] += delta[y];
    }
    if (uses_gamma(head.kind())) {
      const Vector dgamma = delta.cwiseProduct(f.dots.cwiseQuotient(denoms));
      g.full.gamma += dgamma;
      g.own_target.gamma[y] += dgamma[y];
    }
  }
  if (normalized) {
    g.full.weights -= full_row_coef.asDiagonal() * p.weights;
    g.own_target.weights -= own_row_coef.asDiagonal() * p.weights;
  }
  return g;
}

HeadParams apply_mask(const HeadGradient& grads, std::span<const std::uint32_t> batch_targets,
                      MaskMode mask) {
  switch (mask) {
    case MaskMode::none:
      return grads.full;
    case MaskMode::single:
      return grads.own_target;
    case MaskMode::group: {
      HeadParams masked = grads.full;
      const auto keep = updatable_rows(batch_targets, mask, static_cast<std::size_t>(masked.weights.rows()));
      for (std::size_t i = 0; i < keep.size(); ++i) {
        if (keep[i]) continue;
        const auto k = static_cast<Eigen::Index>(i);
        masked.weights.row(k).setZero();
        masked.bias[k] = 0.0;
        masked.gamma[k] = 0.0;
      }
      return masked;
    }
  }
  return grads.full;
}

std::vector<bool> updatable_rows(std::span<const std::uint32_t> batch_targets, MaskMode mask,
                                 std::size_t num_classes) {
  if (mask == MaskMode::none) return std::vector<bool>(num_classes, true);
  std::vector<bool> rows(num_classes, false);
  for (std::uint32_t y : batch_targets) {
    if (y < num_classes) rows[y] = true;
  }
  return rows;
}

void sgd_momentum_step(GradientHead& head, const HeadParams& grads, double lr, double momentum,
                       const std::vector<bool>& active_rows) {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  const std::size_t n = head.num_classes();
  if (static_cast<std::size_t>(grads.weights.rows()) != n ||
      static_cast<std::size_t>(grads.weights.cols()) != head.dim() ||
      static_cast<std::size_t>(grads.bias.size()) != n || static_cast<std::size_t>(grads.gamma.size()) != n) {
    throw ShapeError("gradient shape does not match head");
  }
  if (!active_rows.empty() && active_rows.size() != n) throw ShapeError("row mask length mismatch");

  const bool bias = uses_bias(head.kind());
  const bool gamma = uses_gamma(head.kind());
  HeadParams& v = head.velocity_;
  HeadParams& p = head.params_;
  for (std::size_t i = 0; i < n; ++i) {
    if (!active_rows.empty() && !active_rows[i]) continue;
    const auto k = static_cast<Eigen::Index>(i);
    v.weights.row(k) = momentum * v.weights.row(k) + grads.weights.row(k);
    p.weights.row(k) -= lr * v.weights.row(k);
    if (bias) {
      v.bias[k] = momentum * v.bias[k] + grads.bias[k];
      p.bias[k] -= lr * v.bias[k];
    }
    if (gamma) {
      v.gamma[k] = momentum * v.gamma[k] + grads.gamma[k];
      p.gamma[k] -= lr * v.gamma[k];
    }
  }
}

}  // namespace driftbench
