#pragma once

#include "driftbench/feature_data.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace driftbench {

// Output-layer parameterizations trained by gradient descent.
//   linear                o_i = <z, A_i> + b_i
//   linear_no_bias        o_i = <z, A_i>
//   weight_norm           o_i = <z, A_i> / |A_i|
//   cos_layer             o_i = <z, A_i> / (|z| |A_i|)
//   original_weight_norm  o_i = gamma_i <z, A_i> / |A_i| + b_i
enum class HeadKind : std::uint8_t {
  linear = 0,
  linear_no_bias = 1,
  weight_norm = 2,
  cos_layer = 3,
  original_weight_norm = 4,
};

enum class MaskMode : std::uint8_t { none = 0, single = 1, group = 2 };

inline constexpr HeadKind kAllHeadKinds[] = {HeadKind::linear, HeadKind::linear_no_bias,
                                             HeadKind::weight_norm, HeadKind::cos_layer,
                                             HeadKind::original_weight_norm};

// Guard for norms in denominators.
inline constexpr double kNormEpsilon = 1e-12;

std::string_view to_string(HeadKind kind);
std::string_view to_string(MaskMode mask);
HeadKind parse_head_kind(std::string_view name);
MaskMode parse_mask_mode(std::string_view name);

bool uses_bias(HeadKind kind);
bool uses_gamma(HeadKind kind);

// Learning rate selected on i.i.d. data: 0.01 for the plain linear layers,
// 0.1 for the normalized ones.
double default_learning_rate(HeadKind kind);

/// Weight matrix (N x h, row i is class i's output vector), bias and
/// per-class scale. Also used for gradients and optimizer velocity.
struct HeadParams {
  Matrix weights;
  Vector bias;
  Vector gamma;

  static HeadParams zeros(std::size_t num_classes, std::size_t dim);
  bool operator==(const HeadParams& other) const;
};

struct Sample {
  std::reference_wrapper<const Vector> features;
  std::uint32_t label;
};

std::vector<Sample> make_batch(const FeatureSet& set, std::span<const std::size_t> indices);

class GradientHead {
 public:
  GradientHead(HeadKind kind, MaskMode mask, HeadParams params);

  HeadKind kind() const noexcept { return kind_; }
  MaskMode mask() const noexcept { return mask_; }
  std::size_t num_classes() const noexcept { return static_cast<std::size_t>(params_.weights.rows()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(params_.weights.cols()); }
  const HeadParams& params() const noexcept { return params_; }
  const HeadParams& velocity() const noexcept { return velocity_; }

  // Direct parameter access for tests and checkpoint loading. Resets velocity.
  void set_params(HeadParams params);

 private:
  friend void sgd_momentum_step(GradientHead&, const HeadParams&, double, double,
                                const std::vector<bool>&);

  HeadKind kind_;
  MaskMode mask_;
  HeadParams params_;
  HeadParams velocity_;
};

// A ~ N(0, 1/h), b = 0, gamma = 1, zero velocity. Deterministic per seed.
GradientHead init_head(HeadKind kind, std::size_t num_classes, std::size_t dim, std::uint64_t seed,
                       MaskMode mask = MaskMode::none);

Vector logits(const GradientHead& head, const Vector& z);
// Argmax of the logits, lowest index on ties.
std::uint32_t predict(const GradientHead& head, const Vector& z);

/// Mean softmax cross-entropy over a batch and its exact gradient.
///
/// `full` is the ordinary gradient. `own_target` accumulates, for every
/// example, only the contribution to the row (and bias/gamma entry) of that
/// example's own label; it is what single masking trains on.
struct HeadGradient {
  double loss = 0.0;
  HeadParams full;
  HeadParams own_target;
};

HeadGradient loss_and_gradient(const GradientHead& head, std::span<const Sample> batch);

HeadParams apply_mask(const HeadGradient& grads, std::span<const std::uint32_t> batch_targets,
                      MaskMode mask);

// Rows the optimizer may touch for this batch: every row without masking,
// otherwise only the classes present among the batch targets.
std::vector<bool> updatable_rows(std::span<const std::uint32_t> batch_targets, MaskMode mask,
                                 std::size_t num_classes);

/// Heavy-ball step: v <- momentum * v + g; theta <- theta - lr * v.
///
/// Rows flagged false in `active_rows` keep both their parameters and their
/// velocity, so masked classes are frozen even when they carry momentum from
/// earlier tasks. Empty `active_rows` means all rows. Bias and gamma are only
/// updated for kinds that use them.
void sgd_momentum_step(GradientHead& head, const HeadParams& grads, double lr, double momentum,
                       const std::vector<bool>& active_rows = {});

}  // namespace driftbench
