#include "driftbench/error.hpp"
#include "driftbench/similarity_heads.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

using namespace driftbench;

namespace {

Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

Vector random_vector(Rng& rng, std::size_t h, double scale = 1.0) {
  Vector v(static_cast<Eigen::Index>(h));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = scale * rng.normal();
  return v;
}

}  // namespace

TEST(Knn, NearestAndMajority) {
  KnnHead one(2, 2, 1);
  one.observe(vec({0, 0}), 0);
  one.observe(vec({10, 10}), 1);
  EXPECT_EQ(one.predict(vec({1, 1})), 0u);

  KnnHead three(2, 1, 3);
  three.observe(vec({0}), 0);
  three.observe(vec({1}), 0);
  three.observe(vec({2}), 1);
  three.observe(vec({50}), 1);
  EXPECT_EQ(three.predict(vec({1})), 0u);
}

TEST(Knn, TieRules) {
  KnnHead head(3, 1, 1);
  head.observe(vec({1}), 2);
  head.observe(vec({-1}), 0);
  EXPECT_EQ(head.predict(vec({0})), 2u);  // equal distance, earlier insertion

  KnnHead vote(3, 1, 2);
  vote.observe(vec({1}), 2);
  vote.observe(vec({-1}), 1);
  EXPECT_EQ(vote.predict(vec({0})), 1u);  // one vote each, lowest label
}

TEST(Knn, EmptyStoreAndBadInput) {
  KnnHead head(2, 2, 3);
  EXPECT_THROW(head.predict(vec({0, 0})), StateError);
  EXPECT_THROW(head.observe(vec({0, 0, 0}), 0), ShapeError);
  EXPECT_THROW(head.observe(vec({0, 0}), 2), ValidationError);
  EXPECT_THROW(KnnHead(2, 2, 0), ConfigError);
}

TEST(Knn, MatchesFullSortOracle) {
  Rng rng(21);
  for (std::size_t n : {200u, 500u}) {
    for (std::size_t k : {1u, 3u, 5u}) {
      KnnHead head(6, 4, k);
      oracle::Rows points;
      std::vector<std::uint32_t> labels;
      for (std::size_t i = 0; i < n; ++i) {
        const Vector z = random_vector(rng, 4);
        const auto y = static_cast<std::uint32_t>(rng.below(6));
        head.observe(z, y);
        points.push_back(oracle::to_std(z));
        labels.push_back(y);
      }
      for (int q = 0; q < 100; ++q) {
        const Vector z = random_vector(rng, 4);
        ASSERT_EQ(head.predict(z), oracle::knn_full_sort(points, labels, oracle::to_std(z), k, 6));
      }
    }
  }
}

TEST(Prototype, OwnObservationPredictsOwnClass) {
  for (PrototypeMode mode : {PrototypeMode::mean, PrototypeMode::median}) {
    PrototypeHead head(3, 2, mode);
    const std::vector<Vector> pts{vec({0, 0}), vec({5, 1}), vec({-3, 4})};
    for (std::uint32_t c = 0; c < 3; ++c) head.observe(pts[c], c);
    for (std::uint32_t c = 0; c < 3; ++c) EXPECT_EQ(head.predict(pts[c]), c);
  }
}

TEST(Prototype, MedianOfThree) {
  PrototypeHead head(1, 1, PrototypeMode::median);
  for (double x : {1.0, 100.0, 2.0}) head.observe(vec({x}), 0);
  EXPECT_DOUBLE_EQ(head.prototypes()(0, 0), 2.0);
  head.observe(vec({3.0}), 0);
  EXPECT_DOUBLE_EQ(head.prototypes()(0, 0), 2.5);
}

TEST(Prototype, NoObservationsIsStateError) {
  PrototypeHead head(2, 2, PrototypeMode::mean);
  EXPECT_THROW(head.predict(vec({0, 0})), StateError);
}

TEST(Prototype, UnobservedClassesNeverPredicted) {
  PrototypeHead head(3, 1, PrototypeMode::mean);
  head.observe(vec({10}), 2);
  EXPECT_EQ(head.predict(vec({0})), 2u);
}

TEST(Prototype, StreamingMeanMatchesBatchMean) {
  Rng rng(22);
  std::vector<Vector> pts;
  for (int i = 0; i < 50; ++i) pts.push_back(random_vector(rng, 7, 3.0));
  std::vector<std::size_t> order(50);
  for (std::size_t i = 0; i < 50; ++i) order[i] = i;
  rng.shuffle(std::span<std::size_t>(order));

  PrototypeHead head(1, 7, PrototypeMode::mean);
  for (std::size_t i : order) head.observe(pts[i], 0);
  std::vector<double> batch(7, 0.0);
  for (const auto& p : pts)
    for (int d = 0; d < 7; ++d) batch[d] += p[d];
  for (int d = 0; d < 7; ++d) EXPECT_LE(std::abs(head.means()(0, d) - batch[d] / 50.0), 1e-10);
}

TEST(Prototype, MeanIsOrderInvariant) {
  Rng rng(23);
  std::vector<std::pair<Vector, std::uint32_t>> data;
  for (int i = 0; i < 300; ++i) data.emplace_back(random_vector(rng, 5, 10.0), static_cast<std::uint32_t>(rng.below(4)));
  PrototypeHead a(4, 5, PrototypeMode::mean), b(4, 5, PrototypeMode::mean);
  for (const auto& [z, y] : data) a.observe(z, y);
  rng.shuffle(std::span<std::pair<Vector, std::uint32_t>>(data));
  for (const auto& [z, y] : data) b.observe(z, y);
  EXPECT_LE((a.means() - b.means()).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_EQ(a.counts(), b.counts());
}

TEST(Slda, FirstObservation) {
  SldaHead head(2, 3);
  head.observe(vec({1, 2, 3}), 1);
  EXPECT_TRUE(head.covariance().isZero(0));
  EXPECT_EQ(head.means().row(1), vec({1, 2, 3}).transpose());
  EXPECT_EQ(head.counts()[1], 1u);
  EXPECT_EQ(head.total(), 1u);
}

TEST(Slda, MatchesRecursionReplayAndExplicitInverse) {
  Rng rng(24);
  const std::size_t h = 8, classes = 4;
  SldaHead head(classes, h);
  oracle::SldaReplay ref(classes, h);
  for (int i = 0; i < 200; ++i) {
    const auto y = static_cast<std::uint32_t>(i % classes);
    Vector z = random_vector(rng, h);
    z[y] += 2.0;
    head.observe(z, y);
    ref.observe(oracle::to_std(z), y);
  }
  double sigma_err = 0.0;
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < h; ++j)
      sigma_err = std::max(sigma_err, std::abs(head.covariance()(i, j) - ref.sigma[i][j]));
  EXPECT_LE(sigma_err, 1e-8);

  const auto [w, b] = ref.discriminant(kSldaShrinkage);
  const Matrix weights = head.weights();
  const Vector biases = head.biases();
  for (std::size_t k = 0; k < classes; ++k) {
    for (std::size_t d = 0; d < h; ++d) EXPECT_LE(std::abs(weights(k, d) - w[k][d]), 1e-8);
    EXPECT_LE(std::abs(biases[k] - b[k]), 1e-8);
  }
}

TEST(Slda, CovarianceStaysSymmetric) {
  Rng rng(25);
  SldaHead head(5, 6);
  for (int i = 0; i < 1000; ++i) head.observe(random_vector(rng, 6, 4.0), static_cast<std::uint32_t>(rng.below(5)));
  EXPECT_LE((head.covariance() - head.covariance().transpose()).cwiseAbs().maxCoeff(), 1e-12);
  std::uint64_t sum = 0;
  for (auto c : head.counts()) sum += c;
  EXPECT_EQ(sum, head.total());
}

TEST(Slda, IdentityCovarianceClosedForm) {
  Matrix means(2, 3);
  means << 1, 0, 0, 0, 2, -1;
  const auto head = SldaHead::from_state(means, {4, 4}, Matrix::Identity(3, 3), 8, kSldaShrinkage);
  const Vector z = vec({0.3, -0.2, 0.9});
  const Vector o = head.logits(z);
  for (Eigen::Index k = 0; k < 2; ++k) {
    const Vector mu = means.row(k).transpose();
    EXPECT_NEAR(o[k], z.dot(mu) - 0.5 * mu.squaredNorm(), 1e-14);
  }
}

TEST(Slda, PerpendicularBisector) {
  Matrix means(2, 2);
  means << 0, 0, 1, 0;
  const auto head = SldaHead::from_state(means, {3, 3}, Matrix::Identity(2, 2), 6, kSldaShrinkage);
  const Vector mid = vec({0.5, 0.0});
  const Vector o = head.logits(mid);
  EXPECT_NEAR(o[0], o[1], 1e-14);
  EXPECT_EQ(head.predict(vec({0.49, 3.0})), 0u);
  EXPECT_EQ(head.predict(vec({0.51, -3.0})), 1u);
}

TEST(Slda, SolverMatchesExplicitInverseOnRandomSpd) {
  Rng rng(26);
  const std::size_t h = 6;
  Matrix r(h, h);
  for (Eigen::Index i = 0; i < r.size(); ++i) r.data()[i] = rng.normal();
  const Matrix sigma = r * r.transpose() / static_cast<double>(h) + 0.1 * Matrix::Identity(h, h);
  Matrix means(3, h);
  for (Eigen::Index i = 0; i < means.size(); ++i) means.data()[i] = rng.normal();
  const auto head = SldaHead::from_state(means, {2, 2, 2}, sigma, 6, kSldaShrinkage);

  oracle::SldaReplay ref(3, h);
  ref.sigma = oracle::to_rows(sigma);
  ref.means = oracle::to_rows(means);
  const auto [w, b] = ref.discriminant(kSldaShrinkage);
  const Matrix weights = head.weights();
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t d = 0; d < h; ++d) EXPECT_LE(std::abs(weights(k, d) - w[k][d]), 1e-8);
}

TEST(Slda, UnobservedClassesScoreNegativeInfinity) {
  SldaHead head(3, 2);
  head.observe(vec({1, 1}), 1);
  head.observe(vec({2, 0}), 1);
  const Vector o = head.logits(vec({0, 0}));
  EXPECT_EQ(o[0], -std::numeric_limits<double>::infinity());
  EXPECT_EQ(o[2], -std::numeric_limits<double>::infinity());
  EXPECT_TRUE(std::isfinite(o[1]));
  EXPECT_EQ(head.predict(vec({0, 0})), 1u);
  EXPECT_THROW(SldaHead(3, 2).predict(vec({0, 0})), StateError);
}

TEST(Slda, IdentityCovarianceAgreesWithNearestMean) {
  Rng rng(27);
  const std::size_t h = 5, classes = 6;
  Matrix means(classes, h);
  for (Eigen::Index i = 0; i < means.size(); ++i) means.data()[i] = 2.0 * rng.normal();
  const auto head = SldaHead::from_state(means, std::vector<std::uint64_t>(classes, 10),
                                         2.5 * Matrix::Identity(h, h), 10 * classes, kSldaShrinkage);
  const auto rows = oracle::to_rows(means);
  const std::vector<bool> present(classes, true);
  for (int q = 0; q < 100; ++q) {
    const Vector z = random_vector(rng, h, 2.0);
    EXPECT_EQ(head.predict(z), oracle::nearest_mean(rows, present, oracle::to_std(z)));
  }
}
