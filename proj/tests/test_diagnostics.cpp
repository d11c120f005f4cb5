#include "driftbench/csv.hpp"
#include "driftbench/diagnostics.hpp"
#include "driftbench/error.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

namespace fs = std::filesystem;
using namespace driftbench;

namespace {

GradientHead identity_head(std::size_t n) {
  return GradientHead(HeadKind::linear, MaskMode::none,
                      HeadParams{Matrix::Identity(n, n), Vector::Zero(n), Vector::Ones(n)});
}

double naive_angle(const std::vector<double>& u, const std::vector<double>& v) {
  double c = oracle::dot(u, v) / (oracle::norm(u) * oracle::norm(v));
  c = std::min(1.0, std::max(-1.0, c));
  return std::acos(c) * 180.0 / std::numbers::pi;
}

GradientHead trained_on_class(MaskMode mask, std::uint32_t cls) {
  auto head = init_head(HeadKind::linear, 10, 4, 3, mask);
  Rng rng(4);
  std::vector<Vector> zs;
  for (int i = 0; i < 16; ++i) {
    Vector z(4);
    for (int d = 0; d < 4; ++d) z[d] = rng.normal();
    zs.push_back(z);
  }
  for (int epoch = 0; epoch < 3; ++epoch) {
    std::vector<Sample> batch;
    std::vector<std::uint32_t> targets;
    for (const auto& z : zs) {
      batch.push_back({std::cref(z), cls});
      targets.push_back(cls);
    }
    const auto grads = apply_mask(loss_and_gradient(head, batch), targets, mask);
    sgd_momentum_step(head, grads, 0.1, 0.9, updatable_rows(targets, mask, 10));
  }
  return head;
}

}  // namespace

TEST(NormBias, IdentityAndFreshHead) {
  const auto r = norm_bias_report(identity_head(4));
  EXPECT_EQ(r.row_norms, Vector::Ones(4));
  EXPECT_EQ(norm_bias_report(init_head(HeadKind::linear, 5, 3, 9)).biases, Vector::Zero(5));
}

TEST(WeightDelta, IdenticalSnapshotsAreZero) {
  const auto head = init_head(HeadKind::original_weight_norm, 4, 3, 1);
  const auto d = weight_delta(take_snapshot(head, 0), take_snapshot(head, 1));
  EXPECT_EQ(d, HeadParams::zeros(4, 3));
}

TEST(WeightDelta, ShapeMismatch) {
  EXPECT_THROW(weight_delta(take_snapshot(init_head(HeadKind::linear, 3, 2, 0), 0),
                            take_snapshot(init_head(HeadKind::linear, 4, 2, 0), 1)),
               ShapeError);
}

TEST(WeightDelta, SingleMaskTouchesOnlyTheTaskClass) {
  const auto before = take_snapshot(init_head(HeadKind::linear, 10, 4, 3), 0);
  const auto masked = weight_delta(before, take_snapshot(trained_on_class(MaskMode::single, 7), 1));
  for (Eigen::Index i = 0; i < 10; ++i) {
    if (i == 7) continue;
    EXPECT_TRUE(masked.weights.row(i).isZero(0)) << i;
    EXPECT_EQ(masked.bias[i], 0.0);
  }
  EXPECT_FALSE(masked.weights.row(7).isZero(0));

  const auto unmasked = weight_delta(before, take_snapshot(trained_on_class(MaskMode::none, 7), 1));
  bool other_changed = false;
  for (Eigen::Index i = 0; i < 10; ++i)
    if (i != 7) other_changed |= !unmasked.weights.row(i).isZero(0);
  EXPECT_TRUE(other_changed);
}

TEST(Angles, Basics) {
  Vector u(3);
  u << 1, -2, 0.5;
  EXPECT_NEAR(angle_degrees(u, u), 0.0, 1e-6);
  EXPECT_NEAR(angle_degrees(u, -u), 180.0, 1e-6);
  EXPECT_TRUE(std::isnan(angle_degrees(u, Vector::Zero(3))));
}

TEST(Interference, OrthonormalAxes) {
  const FeatureSet data(4, 4, {Example{Vector::Unit(4, 0), 0, 0}});
  const auto r = interference_report(identity_head(4), data);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(r.vector_angles(i, j), i == j ? 0.0 : 90.0, 1e-9);
}

TEST(Interference, PerfectAlignment) {
  std::vector<Example> ex;
  for (std::uint32_t c = 0; c < 3; ++c)
    for (double s : {0.5, 2.0, 7.0}) ex.push_back({s * Vector::Unit(3, c), c, 0});
  const auto r = interference_report(identity_head(3), FeatureSet(3, 3, ex));
  for (int c = 0; c < 3; ++c) {
    EXPECT_NEAR(r.class_to_vector(c, c), 0.0, 1e-9);
    for (int j = 0; j < 3; ++j) {
      if (j != c) EXPECT_NEAR(r.class_to_vector(c, j), 90.0, 1e-9);
      EXPECT_NEAR(r.risk(c, j), 0.0, 1e-9);
    }
  }
  EXPECT_EQ(r.excluded_samples, 0u);
}

TEST(Interference, MatchesNaiveDoubleLoop) {
  Rng rng(31);
  const std::size_t n = 5, h = 6;
  const auto head = init_head(HeadKind::weight_norm, n, h, 17);
  std::vector<Example> ex;
  for (int i = 0; i < 80; ++i) {
    Vector z(h);
    for (std::size_t d = 0; d < h; ++d) z[d] = rng.normal();
    ex.push_back({z, static_cast<std::uint32_t>(rng.below(n)), 0});
  }
  const FeatureSet data(h, n, ex);
  const auto r = interference_report(head, data);
  const auto a = oracle::to_rows(head.params().weights);

  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double expected = i == j ? 0.0 : naive_angle(a[i], a[j]);
      EXPECT_NEAR(r.vector_angles(i, j), expected, 1e-9);
      EXPECT_NEAR(r.vector_angles(i, j), r.vector_angles(j, i), 1e-9);
    }
  oracle::Rows ctv(n, std::vector<double>(n, 0.0));
  std::vector<double> count(n, 0.0);
  for (const auto& e : ex) {
    count[e.class_label] += 1.0;
    for (std::size_t i = 0; i < n; ++i) ctv[e.class_label][i] += naive_angle(oracle::to_std(e.features), a[i]);
  }
  for (std::size_t c = 0; c < n; ++c)
    for (std::size_t i = 0; i < n; ++i) {
      const double mean = ctv[c][i] / count[c];
      EXPECT_NEAR(r.class_to_vector(c, i), mean, 1e-9);
      const double risk = c == i ? 0.0 : (ctv[c][c] / count[c]) / mean;
      EXPECT_NEAR(r.risk(c, i), risk, 1e-9);
    }
}

TEST(Interference, ExclusionsAndEmptyClasses) {
  Matrix a = Matrix::Identity(3, 3);
  a.row(2).setZero();
  const GradientHead head(HeadKind::linear, MaskMode::none, HeadParams{a, Vector::Zero(3), Vector::Ones(3)});
  const FeatureSet data(3, 3, {Example{Vector::Zero(3), 0, 0}, Example{Vector::Unit(3, 1), 1, 0}});
  const auto r = interference_report(head, data);
  EXPECT_EQ(r.excluded_vectors, 1u);
  EXPECT_EQ(r.excluded_samples, 1u);
  EXPECT_TRUE(std::isnan(r.class_to_vector(0, 0)));
  EXPECT_TRUE(std::isnan(r.vector_angles(0, 2)));
  EXPECT_NEAR(r.class_to_vector(1, 1), 0.0, 1e-9);
}

TEST(DiagnosticCsv, MatricesRoundTripExactly) {
  const auto dir = fs::temp_directory_path() / "driftbench_tests" / "diag_csv";
  fs::create_directories(dir);
  const auto head = init_head(HeadKind::cos_layer, 4, 5, 2);
  Rng rng(3);
  std::vector<Example> ex;
  for (int i = 0; i < 20; ++i) {
    Vector z(5);
    for (int d = 0; d < 5; ++d) z[d] = rng.normal();
    ex.push_back({z, static_cast<std::uint32_t>(i % 4), 0});
  }
  const auto r = interference_report(head, FeatureSet(5, 4, ex));
  write_interference_csvs(r, dir);
  EXPECT_EQ(read_matrix_csv(dir / "interference_vector_angles.csv"), r.vector_angles);
  EXPECT_EQ(read_matrix_csv(dir / "interference_class_to_vector.csv"), r.class_to_vector);
  EXPECT_EQ(read_matrix_csv(dir / "interference_risk.csv"), r.risk);

  const auto delta = weight_delta(take_snapshot(init_head(HeadKind::linear, 4, 5, 1), 0), take_snapshot(head, 1));
  write_weight_delta_csvs(delta, dir);
  EXPECT_EQ(read_matrix_csv(dir / "weight_delta.csv"), delta.weights);
}
