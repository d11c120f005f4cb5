// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include "driftbench/diagnostics.hpp"
#include "driftbench/error.hpp"
#include "driftbench/trainer.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using namespace driftbench;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

constexpr std::uint64_t kSeeds = 8;

SyntheticSpec separable_spec() {
  SyntheticSpec spec;
  spec.num_classes = 10;
  spec.modes_per_class = 5;
  spec.dim = 32;
  spec.center_scale = 1.0;
  spec.stddev = 0.25;
  spec.train_per_mode = 100;
  spec.test_per_mode = 20;
  spec.seed = 0;
  return spec;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}

std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", x);
  return buf;
}

Vector random_vector(Rng& rng, std::size_t h) {
  Vector v(static_cast<Eigen::Index>(h));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
  return v;
}

Verdict gradient_correctness() {
  double worst = 0.0;
  Rng pick(2024);
  for (HeadKind kind : kAllHeadKinds) {
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t n = 1 + pick.below(5);
      const std::size_t h = 1 + pick.below(16);
      const std::size_t batch = 1 + pick.below(8);
      const auto r = oracle::gradient_check(kind, n, h, batch, 7919 * static_cast<std::uint64_t>(kind) + trial);
      worst = std::max(worst, r.max_relative_error);
    }
  }
  return {worst <= 1e-4, "max relative error " + sci(worst) + " over 5 kinds x 20 configs"};
}

Verdict masking_conservation() {
  SyntheticSpec spec = separable_spec();
  spec.modes_per_class = 2;
  spec.train_per_mode = 30;
  spec.test_per_mode = 2;
  const auto data = generate_synthetic(spec);
  const auto train = std::make_shared<const FeatureSet>(data.train);
  const Scenario scenario = build_incremental(train, 5);
  std::size_t checked_rows = 0;
  std::size_t violations = 0;
  for (HeadKind kind : kAllHeadKinds) {
    for (MaskMode mask : {MaskMode::single, MaskMode::group}) {
      Classifier head = init_head(kind, 10, 32, 3, mask);
      std::optional<HeadParams> start;
      RunOptions options;
      options.on_task_start = [&](std::size_t, const Classifier& h) { start = std::get<GradientHead>(h).params(); };
      options.on_task_end = [&](std::size_t t, const Classifier& h) {
        const HeadParams& end = std::get<GradientHead>(h).params();
        const auto& present = scenario.tasks()[t].classes_present;
        for (Eigen::Index j = 0; j < 10; ++j) {
          if (std::find(present.begin(), present.end(), static_cast<std::uint32_t>(j)) != present.end()) continue;
          ++checked_rows;
          const bool same = end.weights.row(j) == start->weights.row(j) && end.bias[j] == start->bias[j] &&
                            end.gamma[j] == start->gamma[j];
          violations += !same;
        }
      };
      TrainConfig tc;
      tc.eval_every_epoch = false;
      tc.shuffle_seed = 1;
      train_scenario(head, scenario, data.test, tc, options);
    }
  }
  return {violations == 0 && checked_rows > 0,
          std::to_string(checked_rows) + " absent-class rows checked, " + std::to_string(violations) + " modified"};
}

Verdict slda_equivalence() {
  Rng rng(77);
  const std::size_t h = 8, classes = 5;
  SldaHead head(classes, h);
  oracle::SldaReplay ref(classes, h);
  for (int i = 0; i < 200; ++i) {
    const auto y = static_cast<std::uint32_t>(rng.below(classes));
    Vector z = random_vector(rng, h);
    z[y] += 1.5;
    head.observe(z, y);
    ref.observe(oracle::to_std(z), y);
  }
  double err = 0.0;
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < h; ++j) err = std::max(err, std::abs(head.covariance()(i, j) - ref.sigma[i][j]));
  const auto [w, b] = ref.discriminant(kSldaShrinkage);
  const Matrix weights = head.weights();
  const Vector biases = head.biases();
  for (std::size_t k = 0; k < classes; ++k) {
    if (head.counts()[k] == 0) continue;
    for (std::size_t d = 0; d < h; ++d) err = std::max(err, std::abs(weights(k, d) - w[k][d]));
    err = std::max(err, std::abs(biases[k] - b[k]));
  }
  return {err <= 1e-8, "max abs deviation " + sci(err)};
}

Verdict similarity_oracles() {
  Rng rng(88);
  std::size_t knn_mismatch = 0;
  for (std::size_t k : {1u, 3u, 5u}) {
    KnnHead knn(7, 4, k);
    oracle::Rows points;
    std::vector<std::uint32_t> labels;
    for (int i = 0; i < 500; ++i) {
      const Vector z = random_vector(rng, 4);
      const auto y = static_cast<std::uint32_t>(rng.below(7));
      knn.observe(z, y);
      points.push_back(oracle::to_std(z));
      labels.push_back(y);
    }
    for (int q = 0; q < 200; ++q) {
      const Vector z = random_vector(rng, 4);
      knn_mismatch += knn.predict(z) != oracle::knn_full_sort(points, labels, oracle::to_std(z), k, 7);
    }
  }

  PrototypeHead mean(3, 6, PrototypeMode::mean);
  oracle::Rows sums(3, std::vector<double>(6, 0.0));
  std::vector<double> counts(3, 0.0);
  for (int i = 0; i < 500; ++i) {
    const Vector z = 5.0 * random_vector(rng, 6);
    const auto y = static_cast<std::uint32_t>(rng.below(3));
    mean.observe(z, y);
    for (int d = 0; d < 6; ++d) sums[y][d] += z[d];
    counts[y] += 1.0;
  }
  double mean_err = 0.0;
  for (int c = 0; c < 3; ++c)
    for (int d = 0; d < 6; ++d) mean_err = std::max(mean_err, std::abs(mean.means()(c, d) - sums[c][d] / counts[c]));

  const std::size_t h = 5, classes = 6;
  Matrix mus(classes, h);
  for (Eigen::Index i = 0; i < mus.size(); ++i) mus.data()[i] = 2.0 * rng.normal();
  const auto slda = SldaHead::from_state(mus, std::vector<std::uint64_t>(classes, 20), Matrix::Identity(h, h),
                                         20 * classes, kSldaShrinkage);
  const auto rows = oracle::to_rows(mus);
  const std::vector<bool> present(classes, true);
  std::size_t slda_mismatch = 0;
  for (int q = 0; q < 100; ++q) {
    const Vector z = 2.0 * random_vector(rng, h);
    slda_mismatch += slda.predict(z) != oracle::nearest_mean(rows, present, oracle::to_std(z));
  }
  return {knn_mismatch == 0 && mean_err <= 1e-10 && slda_mismatch == 0,
          "knn mismatches " + std::to_string(knn_mismatch) + ", mean error " + sci(mean_err) +
              ", slda/nearest-mean mismatches " + std::to_string(slda_mismatch)};
}

struct IncrementalResults {
  double iid_weight_norm = 0, iid_slda = 0, iid_mean = 0;
  double inc_linear = 0, inc_cos_single = 0, inc_slda = 0, inc_mean = 0;
  int norm_seeds = 0, bias_seeds = 0;
};

double final_accuracy(const char* head_spec, const Scenario& scenario, const FeatureSet& test, std::uint64_t seed,
                      Classifier* out = nullptr) {
  Classifier head = make_classifier(HeadSpec::parse(head_spec), 10, scenario.source().dim(), seed);
  TrainConfig tc;
  tc.shuffle_seed = seed;
  tc.eval_every_epoch = false;
  const double acc = train_scenario(head, scenario, test, tc).back().overall_accuracy;
  if (out) *out = std::move(head);
  return acc;
}

IncrementalResults incremental_runs() {
  const auto data = generate_synthetic(separable_spec());
  const auto train = std::make_shared<const FeatureSet>(data.train);
  const Scenario iid = build_incremental(train, 1);
  IncrementalResults r;
  for (std::uint64_t s = 0; s < kSeeds; ++s) {
    const Scenario inc = permute_tasks(build_incremental(train, 5), s);
    r.iid_weight_norm += final_accuracy("WeightNorm", iid, data.test, s) / kSeeds;
    r.iid_slda += final_accuracy("SLDA", iid, data.test, s) / kSeeds;
    r.iid_mean += final_accuracy("MeanLayer", iid, data.test, s) / kSeeds;
    Classifier linear = init_head(HeadKind::linear, 1, 1, 0);
    r.inc_linear += final_accuracy("Linear", inc, data.test, s, &linear) / kSeeds;
    r.inc_cos_single += final_accuracy("CosLayer+single", inc, data.test, s) / kSeeds;
    r.inc_slda += final_accuracy("SLDA", inc, data.test, s) / kSeeds;
    r.inc_mean += final_accuracy("MeanLayer", inc, data.test, s) / kSeeds;

    const auto nb = norm_bias_report(std::get<GradientHead>(linear));
    double norm_first = 0, norm_last = 0, bias_first = 0, bias_last = 0;
    for (auto c : inc.tasks().front().classes_present) {
      norm_first += nb.row_norms[c];
      bias_first += nb.biases[c];
    }
    for (auto c : inc.tasks().back().classes_present) {
      norm_last += nb.row_norms[c];
      bias_last += nb.biases[c];
    }
    r.norm_seeds += norm_last > norm_first;
    r.bias_seeds += bias_last > bias_first;
  }
  return r;
}

Verdict central_incremental(const IncrementalResults& r) {
  const bool precondition = r.iid_weight_norm >= 0.95;
  const bool ordering = r.inc_linear < r.inc_cos_single && r.inc_linear < r.inc_slda;
  const bool retention = r.inc_slda >= 0.9 * r.iid_slda && r.inc_mean >= 0.9 * r.iid_mean;
  return {precondition && ordering && retention,
          "iid WeightNorm " + fmt(r.iid_weight_norm) + "; final Linear " + fmt(r.inc_linear) + ", CosLayer+single " +
              fmt(r.inc_cos_single) + ", SLDA " + fmt(r.inc_slda) + " (iid " + fmt(r.iid_slda) + "), MeanLayer " +
              fmt(r.inc_mean) + " (iid " + fmt(r.iid_mean) + ")"};
}

Verdict norm_bias_unbalance(const IncrementalResults& r) {
  return {r.norm_seeds >= 6 && r.bias_seeds >= 6,
          "last-task norm larger in " + std::to_string(r.norm_seeds) + "/8 seeds, bias larger in " +
              std::to_string(r.bias_seeds) + "/8 seeds"};
}

Verdict lifelong_masking() {
  SyntheticSpec spec = separable_spec();
  spec.modes_per_class = 8;
  spec.train_per_mode = 60;
  const auto data = generate_synthetic(spec);
  const auto train = std::make_shared<const FeatureSet>(data.train);
  double plain = 0, single = 0;
  for (std::uint64_t s = 0; s < kSeeds; ++s) {
    const Scenario life = permute_tasks(build_lifelong(train, 8), s);
    plain += final_accuracy("WeightNorm", life, data.test, s) / kSeeds;
    single += final_accuracy("WeightNorm+single", life, data.test, s) / kSeeds;
  }
  return {plain >= single - 0.02, "WeightNorm " + fmt(plain) + " vs WeightNorm+single " + fmt(single)};
}

Verdict subset_monotonicity() {
  const auto data = generate_synthetic(separable_spec());
  const std::size_t sizes[] = {100, 200, 500, 1000, data.train.size()};
  bool all_ok = true;
  std::ostringstream detail;
  for (const char* name : {"WeightNorm", "Linear", "MeanLayer", "SLDA"}) {
    detail << name;
    double previous = -1.0;
    for (std::size_t size : sizes) {
      double acc = 0.0;
      for (std::uint64_t s = 0; s < kSeeds; ++s) {
        Classifier head = make_classifier(HeadSpec::parse(name), 10, 32, s);
        TrainConfig tc;
        tc.shuffle_seed = s;
        acc += train_subset(head, data.train, data.test, size, s, tc).overall_accuracy / kSeeds;
      }
      all_ok &= acc >= previous;
      previous = acc;
      detail << ' ' << fmt(acc);
    }
    detail << "; ";
  }
  return {all_ok, detail.str()};
}

Verdict replay_balance() {
  const auto data = generate_synthetic(separable_spec());
  const auto train = std::make_shared<const FeatureSet>(data.train);
  double plain = 0, group = 0;
  for (std::uint64_t s = 0; s < 3; ++s) {
    const Scenario inc = permute_tasks(build_incremental(train, 5), s);
    for (const char* name : {"WeightNorm", "WeightNorm+group"}) {
      Classifier head = make_classifier(HeadSpec::parse(name), 10, 32, s);
      TrainConfig tc;
      tc.batch_size = 8;
      tc.shuffle_seed = s;
      tc.eval_every_epoch = false;
      ReplayConfig rc;
      rc.replay_balance = 0.25;
      rc.selection_seed = s;
      const double acc = train_with_replay(head, inc, data.test, tc, rc).back().overall_accuracy / 3.0;
      (std::string(name) == "WeightNorm" ? plain : group) += acc;
    }
  }
  return {group >= plain, "WeightNorm+group " + fmt(group) + " vs WeightNorm " + fmt(plain)};
}

Verdict file_format() {
  const auto dir = fs::temp_directory_path() / "driftbench_acceptance";
  fs::create_directories(dir);
  const auto path = dir / "set.fset";
  Rng rng(10);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t dim = 1 + rng.below(16);
    const std::size_t classes = 1 + rng.below(12);
    const std::size_t count = rng.below(30);
    std::vector<Example> ex;
    for (std::size_t i = 0; i < count; ++i) {
      Vector z(static_cast<Eigen::Index>(dim));
      for (Eigen::Index d = 0; d < z.size(); ++d) z[d] = static_cast<float>(50.0 * rng.normal());
      ex.push_back({z, static_cast<std::uint32_t>(rng.below(classes)), static_cast<std::uint32_t>(rng.below(9))});
    }
    const FeatureSet set(dim, classes, std::move(ex));
    write_feature_file(set, path);
    mismatches += !(read_feature_file(path) == set);
  }

  std::vector<Example> ex;
  for (int i = 0; i < 10; ++i) ex.push_back({Vector::Constant(3, i), 0, 0});
  write_feature_file(FeatureSet(3, 1, ex), path);
  std::string good;
  {
    std::ifstream in(path, std::ios::binary);
    good.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  auto rejected_as = [&](std::string bytes, auto tag) {
    std::ofstream(path, std::ios::binary | std::ios::trunc).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    try {
      read_feature_file(path);
    } catch (const decltype(tag)&) {
      return true;
    } catch (...) {
      return false;
    }
    return false;
  };
  std::string magic = good;
  magic.replace(0, 4, "XXXX");
  std::string truncated = good.substr(0, good.size() - (8 + 3 * 4));
  std::string nan = good;
  const float q = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(nan.data() + kFsetHeaderBytes + 8, &q, 4);
  const int negatives = rejected_as(magic, FormatError("")) + rejected_as(truncated, CorruptionError("")) +
                        rejected_as(nan, ValidationError(""));
  return {mismatches == 0 && negatives == 3,
          "1000 roundtrips, " + std::to_string(mismatches) + " mismatches; " + std::to_string(negatives) +
              "/3 corrupted files rejected with the expected error"};
}

}  // namespace

int main() {
  using Clock = std::chrono::steady_clock;
  int failures = 0;
  std::optional<IncrementalResults> incremental;
  const auto shared_incremental = [&] {
    if (!incremental) incremental = incremental_runs();
    return *incremental;
  };

  struct Criterion {
    int id;
    const char* name;
    double limit_s;  // 0 means no runtime bound
    std::function<Verdict()> check;
  };
  const std::vector<Criterion> criteria{
      {1, "gradient correctness", 10, gradient_correctness},
      {2, "masking conservation", 5, masking_conservation},
      {3, "SLDA streaming equivalence", 5, slda_equivalence},
      {4, "similarity-head oracles", 10, similarity_oracles},
      {5, "incremental forgetting ordering", 120, [&] { return central_incremental(shared_incremental()); }},
      {6, "norm/bias unbalance", 0, [&] { return norm_bias_unbalance(shared_incremental()); }},
      {7, "lifelong masking", 0, lifelong_masking},
      {8, "subset monotonicity", 120, subset_monotonicity},
      {9, "replay balance with group masking", 0, replay_balance},
      {10, "feature file format", 0, file_format},
  };

  for (const auto& c : criteria) {
    const auto start = Clock::now();
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
    const bool in_time = c.limit_s <= 0 || seconds < c.limit_s;
    const bool pass = v.pass && in_time;
    failures += !pass;
    std::printf("criterion %2d %-34s %s  %s (%.2f s%s)\n", c.id, c.name, pass ? "PASS" : "FAIL", v.detail.c_str(),
                seconds, in_time ? "" : ", over time limit");
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
