#pragma once

#include "driftbench/gradient_head.hpp"
#include "driftbench/similarity_heads.hpp"

#include <string>
#include <string_view>
#include <variant>

namespace driftbench {

// Any output layer the trainer can drive.
using Classifier = std::variant<GradientHead, KnnHead, PrototypeHead, SldaHead>;

enum class HeadFamily { gradient, knn, mean, median, slda };

/// Parsed head description from a config entry.
///
/// Accepted forms: "<Kind>" or "<Kind>+<mask>" for gradient heads (e.g.
/// "CosLayer+single"), "KNN" or "KNN:<k>", "MeanLayer", "MedianLayer", "SLDA".
struct HeadSpec {
  HeadFamily family = HeadFamily::gradient;
  HeadKind kind = HeadKind::linear;
  MaskMode mask = MaskMode::none;
  std::size_t k = 5;

  static HeadSpec parse(std::string_view text);
  // Value for the report's head column ("WeightNorm", "KNN:5", "SLDA", ...).
  std::string head_name() const;
  std::string mask_name() const;
  // Round-trips through parse().
  std::string to_string() const;
};

Classifier make_classifier(const HeadSpec& spec, std::size_t num_classes, std::size_t dim,
                           std::uint64_t seed);

std::uint32_t predict(const Classifier& head, const Vector& z);
std::size_t num_classes(const Classifier& head);
std::size_t dim(const Classifier& head);
bool is_gradient(const Classifier& head);

}  // namespace driftbench
