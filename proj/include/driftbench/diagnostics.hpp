#pragma once

#include "driftbench/gradient_head.hpp"

#include <filesystem>

namespace driftbench {

struct NormBiasReport {
  Vector row_norms;
  Vector biases;
};

NormBiasReport norm_bias_report(const GradientHead& head);

struct Snapshot {
  std::size_t task_index = 0;
  HeadParams params;
};

Snapshot take_snapshot(const GradientHead& head, std::size_t task_index);

// after - before for weights, bias and gamma.
HeadParams weight_delta(const Snapshot& before, const Snapshot& after);

// Angle in degrees through a clamped arccosine; NaN if either vector is zero.
double angle_degrees(const Vector& u, const Vector& v);

/// Angular interference picture of a trained head against a dataset.
///
/// vector_angles(i, j): angle between output vectors A_i and A_j.
/// class_to_vector(c, i): mean angle between class-c samples and A_i.
/// risk(c, j) = class_to_vector(c, c) / class_to_vector(c, j) for j != c and
/// 0 on the diagonal, so larger values mean a wrong output vector is about as
/// well aligned with class c as its own one.
///
/// Zero-norm output vectors yield NaN entries and are counted in
/// excluded_vectors; zero-norm samples are skipped and counted in
/// excluded_samples. Classes without usable samples get NaN rows.
struct InterferenceReport {
  static constexpr const char* kRiskOrientation = "target_angle/wrong_angle";

  Matrix vector_angles;
  Matrix class_to_vector;
  Matrix risk;
  std::size_t excluded_vectors = 0;
  std::size_t excluded_samples = 0;
};

InterferenceReport interference_report(const GradientHead& head, const FeatureSet& dataset);

// norm_bias.csv has a "class,row_norm,bias" header; the matrix files
// (interference_vector_angles.csv, interference_class_to_vector.csv,
// interference_risk.csv, weight_delta.csv) are headerless; the bias and gamma
// deltas go to weight_delta_bias.csv as "class,bias,gamma".
void write_norm_bias_csv(const NormBiasReport& report, const std::filesystem::path& path);
void write_interference_csvs(const InterferenceReport& report, const std::filesystem::path& dir);
void write_weight_delta_csvs(const HeadParams& delta, const std::filesystem::path& dir);

}  // namespace driftbench
