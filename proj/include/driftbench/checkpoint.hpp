#pragma once

#include "driftbench/classifier.hpp"

#include <cstdint>
#include <filesystem>

namespace driftbench {

// Kind byte of the HEAD envelope. Values 0-4 are the gradient HeadKind
// values; similarity heads use the reserved range from 16.
enum class CheckpointKind : std::uint8_t {
  mean_layer = 16,
  median_layer = 17,
  knn = 18,
  slda = 19,
};

/// HEAD checkpoint, little-endian: magic "HEAD", version u32 = 1, kind u8,
/// mask u8, N u32, h u32, then a kind-specific payload. Gradient heads store
/// A row-major f64, b f64 x N, gamma f64 x N. Optimizer velocity is not saved.
void save_checkpoint(const Classifier& head, const std::filesystem::path& path);
Classifier load_checkpoint(const std::filesystem::path& path);

}  // namespace driftbench
