#include "driftbench/diagnostics.hpp"

#include "driftbench/csv.hpp"
#include "driftbench/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

namespace driftbench {

NormBiasReport norm_bias_report(const GradientHead& head) {
  return {head.params().weights.rowwise().norm(), head.params().bias};
}

Snapshot take_snapshot(const GradientHead& head, std::size_t task_index) { return {task_index, head.params()}; }

HeadParams weight_delta(const Snapshot& before, const Snapshot& after) {
  const HeadParams& a = before.params;
  const HeadParams& b = after.params;
  if (a.weights.rows() != b.weights.rows() || a.weights.cols() != b.weights.cols() ||
      a.bias.size() != b.bias.size() || a.gamma.size() != b.gamma.size()) {
    throw ShapeError("snapshots have different shapes");
  }
  return {b.weights - a.weights, b.bias - a.bias, b.gamma - a.gamma};
}

double angle_degrees(const Vector& u, const Vector& v) {
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0) return std::numeric_limits<double>::quiet_NaN();
  const double cosine = std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0);
  return std::acos(cosine) * 180.0 / std::numbers::pi;
}

InterferenceReport interference_report(const GradientHead& head, const FeatureSet& dataset) {
  if (dataset.dim() != head.dim()) throw ShapeError("dataset dimension does not match head");
  const auto n = static_cast<Eigen::Index>(head.num_classes());
  const Matrix& a = head.params().weights;
  const double nan = std::numeric_limits<double>::quiet_NaN();

  InterferenceReport report;
  std::vector<bool> usable(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    usable[static_cast<std::size_t>(i)] = a.row(i).norm() > 0.0;
    if (!usable[static_cast<std::size_t>(i)]) ++report.excluded_vectors;
  }

  report.vector_angles = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double angle = angle_degrees(a.row(i).transpose(), a.row(j).transpose());
      report.vector_angles(i, j) = angle;
      report.vector_angles(j, i) = angle;
    }
    if (!usable[static_cast<std::size_t>(i)]) report.vector_angles(i, i) = nan;
  }

  Matrix sums = Matrix::Zero(n, n);
  std::vector<std::size_t> counts(static_cast<std::size_t>(n), 0);
  for (const Example& ex : dataset.examples()) {
    if (ex.class_label >= static_cast<std::size_t>(n)) continue;
    if (ex.features.norm() == 0.0) {
      ++report.excluded_samples;
      continue;
    }
    const auto c = static_cast<Eigen::Index>(ex.class_label);
    for (Eigen::Index i = 0; i < n; ++i) sums(c, i) += angle_degrees(ex.features, a.row(i).transpose());
    ++counts[ex.class_label];
  }

  report.class_to_vector = Matrix::Constant(n, n, nan);
  report.risk = Matrix::Constant(n, n, nan);
  for (Eigen::Index c = 0; c < n; ++c) {
    report.risk(c, c) = 0.0;
    const std::size_t count = counts[static_cast<std::size_t>(c)];
    if (count == 0) continue;
    report.class_to_vector.row(c) = sums.row(c) / static_cast<double>(count);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != c) report.risk(c, j) = report.class_to_vector(c, c) / report.class_to_vector(c, j);
    }
  }
  return report;
}

void write_norm_bias_csv(const NormBiasReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "class,row_norm,bias\n";
  for (Eigen::Index i = 0; i < report.row_norms.size(); ++i) {
    out << i << ',' << format_real(report.row_norms[i]) << ',' << format_real(report.biases[i]) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

void write_interference_csvs(const InterferenceReport& report, const std::filesystem::path& dir) {
  write_matrix_csv(report.vector_angles, dir / "interference_vector_angles.csv");
  write_matrix_csv(report.class_to_vector, dir / "interference_class_to_vector.csv");
  write_matrix_csv(report.risk, dir / "interference_risk.csv");
}

void write_weight_delta_csvs(const HeadParams& delta, const std::filesystem::path& dir) {
  write_matrix_csv(delta.weights, dir / "weight_delta.csv");
  std::ofstream out(dir / "weight_delta_bias.csv", std::ios::trunc);
  if (!out) throw IoError("cannot open weight_delta_bias.csv for writing");
  out << "class,bias,gamma\n";
  for (Eigen::Index i = 0; i < delta.bias.size(); ++i) {
    out << i << ',' << format_real(delta.bias[i]) << ',' << format_real(delta.gamma[i]) << '\n';
  }
}

}  // namespace driftbench
