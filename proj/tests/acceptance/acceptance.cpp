// Acceptance suite. Prints one PASS / FAIL / SKIP line per criterion and
// exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "hsicnn/checkpoint.hpp"
#include "hsicnn/data.hpp"
#include "hsicnn/evaluation.hpp"
#include "hsicnn/gradcheck.hpp"
#include "hsicnn/training.hpp"
#include "test_support.hpp"

using namespace hsicnn;
namespace fs = std::filesystem;

namespace {

enum class Status { Pass, Fail, Skip };

struct Outcome {
  Status status;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v;
  return s.str();
}

std::string sci(double v) {
  std::ostringstream s;
  s << std::scientific << std::setprecision(2) << v;
  return s.str();
}

// ---------------------------------------------------------------------------
// 1. gradient check

Outcome gradient_check() {
  const auto start = Clock::now();
  double worst = 0;
  bool ok = true;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto inst = make_tiny_instance(seed);
    const auto report = grad_check(inst.model, inst.patch, inst.label, 1e-5, 1e-6);
    worst = std::max(worst, report.max_relative_error());
    ok = ok && report.passed();
  }
  const double elapsed = seconds_since(start);
  ok = ok && elapsed < 10.0;
  return {ok ? Status::Pass : Status::Fail,
          "max relative error " + sci(worst) + " over 10 seeds (< 1e-6), " + fmt(elapsed, 2) + " s (< 10 s)"};
}

// ---------------------------------------------------------------------------
// 2. shape table

Outcome shape_table() {
  struct Row {
    const char* name;
    Index L, n1, h1, n2, ph, pw, flatten;
  };
  const Row rows[] = {{"ksc", 17, 30, 15, 28, 7, 14, 6272},
                      {"ip", 20, 60, 18, 58, 9, 29, 16704},
                      {"pu", 9, 90, 7, 88, 3, 44, 8448},
                      {"sa", 21, 60, 19, 58, 9, 29, 16704}};
  std::string detail;
  bool ok = true;
  for (const auto& r : rows) {
    const auto s = derive_shapes(find_preset(r.name)->config);
    const bool match = s.reshape_rows == r.L && s.reshape_cols == r.n1 && s.conv2_rows == r.h1 &&
                       s.conv2_cols == r.n2 && s.conv2_channels == 64 && s.pool_rows == r.ph &&
                       s.pool_cols == r.pw && s.pool_channels == 64 && s.flatten == r.flatten;
    ok = ok && match;
    if (!detail.empty()) detail += "; ";
    detail += std::string(r.name) + " " + std::to_string(s.reshape_rows) + "x" + std::to_string(s.reshape_cols) +
              " -> " + std::to_string(s.conv2_rows) + "x" + std::to_string(s.conv2_cols) + "x64 -> " +
              std::to_string(s.pool_rows) + "x" + std::to_string(s.pool_cols) + "x64 -> " +
              std::to_string(s.flatten);
  }
  return {ok ? Status::Pass : Status::Fail, detail};
}

// ---------------------------------------------------------------------------
// shared synthetic scene for 3-5

struct Prepared {
  HsiCube cube;
  SampleSet set;
  std::vector<Sample> train, test;
  ArchConfig arch;
};

constexpr std::uint64_t kSceneSeed = 7;
constexpr std::uint64_t kModelSeed = 11;
constexpr Index kSyntheticIterations = 2000;

Prepared prepare_synthetic() {
  SynthConfig sc;  // 8 classes, 176 bands, 64x64, noise 0.1
  sc.seed = kSceneSeed;
  const auto scene = synth_generate(sc);
  Prepared p;
  p.cube = normalize_cube(scene.cube).cube;
  p.set = enumerate_samples(scene.labels);
  const auto split = stratified_split(p.set, 0.8, kSceneSeed);
  p.train = p.set.select(split.train);
  p.test = p.set.select(split.test);
  p.arch = resolve_preset("ksc-like", p.cube.bands, p.set.class_count());
  return p;
}

struct Run {
  Model<float> model;
  TrainHistory history;
  double seconds;
};

Run train_synthetic(const Prepared& p) {
  TrainConfig tc;
  tc.max_iterations = kSyntheticIterations;
  tc.seed = kModelSeed;
  tc.eval_every = 500;
  auto model = build_model<float>(p.arch, kModelSeed);
  const auto start = Clock::now();
  auto history = train(model, p.cube, p.train, {}, tc);
  return {std::move(model), std::move(history), seconds_since(start)};
}

// ---------------------------------------------------------------------------
// 3. synthetic end to end

Outcome synthetic_end_to_end(const Prepared& p, const Run& run) {
  const auto report = metrics_report(confusion_matrix(run.model, p.test, p.cube));
  const double min_recall = *std::min_element(report.per_class.begin(), report.per_class.end());
  const bool ok = report.overall >= 0.99 && min_recall >= 0.94 && run.seconds < 300.0;
  return {ok ? Status::Pass : Status::Fail,
          "OA " + fmt(report.overall) + " (>= 0.99), AA " + fmt(report.average) + ", min class recall " +
              fmt(min_recall) + " (>= 0.94), " + std::to_string(p.test.size()) + " test samples, " +
              std::to_string(kSyntheticIterations) + " iterations in " + fmt(run.seconds, 1) +
              " s (< 300 s)"};
}

// ---------------------------------------------------------------------------
// 4. overfit

Outcome overfit(const Prepared& p) {
  constexpr Index kSubsets = 3, kSubsetSize = 100, kLimit = 1500, kCheckEvery = 25;
  std::string detail;
  bool ok = true;
  for (Index k = 0; k < kSubsets; ++k) {
    std::mt19937_64 rng(100 + static_cast<std::uint64_t>(k));
    std::vector<Sample> subset = p.train;
    std::shuffle(subset.begin(), subset.end(), rng);
    subset.resize(kSubsetSize);

    TrainConfig tc;
    tc.max_iterations = kLimit;
    tc.batch_size = kSubsetSize;
    tc.eval_every = kCheckEvery;
    tc.seed = 200 + static_cast<std::uint64_t>(k);
    auto model = build_model<float>(p.arch, 300 + static_cast<std::uint64_t>(k));
    Index reached = -1;
    double last = 0;
    TrainCallbacks<float> cb;
    cb.on_record = [&](const Model<float>& m, const HistoryRecord& r) {
      last = overall_accuracy(confusion_matrix(m, subset, p.cube));
      if (last == 1.0) {
        reached = r.iteration;
        return false;
      }
      return true;
    };
    train(model, p.cube, subset, {}, tc, cb);
    ok = ok && reached > 0;
    if (!detail.empty()) detail += "; ";
    detail += "subset " + std::to_string(k + 1) + ": " +
              (reached > 0 ? "train acc 1.0 at iteration " + std::to_string(reached)
                           : "train acc " + fmt(last) + " after " + std::to_string(kLimit));
  }
  return {ok ? Status::Pass : Status::Fail, detail + " (limit " + std::to_string(kLimit) + ")"};
}

// ---------------------------------------------------------------------------
// 5. determinism: the synthetic run repeated in full

Outcome determinism(const Prepared& p, const Run& first) {
  const auto second = train_synthetic(p);
  const auto a = encode_checkpoint(to_checkpoint(first.model));
  const auto b = encode_checkpoint(to_checkpoint(second.model));
  const bool same_ckpt = a == b;
  const bool same_csv = first.history.csv() == second.history.csv() &&
                        first.history.batch_losses == second.history.batch_losses;
  return {same_ckpt && same_csv ? Status::Pass : Status::Fail,
          std::string("two ") + std::to_string(kSyntheticIterations) + "-iteration runs: checkpoint " +
              (same_ckpt ? "identical" : "DIFFERS") + " (" + std::to_string(a.size()) + " bytes), history CSV " +
              (same_csv ? "identical" : "DIFFERS")};
}

// ---------------------------------------------------------------------------
// 6. property suites (compact; the unit tests cover them in more depth)

Outcome properties() {
  std::mt19937_64 rng(2024);
  std::vector<std::string> failures;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok && std::find(failures.begin(), failures.end(), what) == failures.end()) failures.push_back(what);
  };

  for (int t = 0; t < 200; ++t) {
    const Index c = 2 + t % 15;
    const auto z = testing::random_tensor<double>({c}, rng, 5.0);
    const Index label = t % c;
    const auto r = softmax_xent(z, label);
    expect(std::abs(r.probs.values().sum() - 1.0) < 1e-12, "softmax sums to 1");
    expect((r.probs.values().array() > 0).all() && (r.probs.values().array() < 1).all(), "softmax in (0,1)");
    const auto s = softmax_xent(Tensor<double>(z.shape(), z.values().array() + 3.25), label);
    expect((s.probs.values() - r.probs.values()).cwiseAbs().maxCoeff() < 1e-12 && std::abs(s.loss - r.loss) < 1e-12,
           "softmax shift invariance");
    const auto u = softmax_xent(Tensor<double>::constant({c}, z[0]), label);
    expect(std::abs(u.loss - std::log(static_cast<double>(c))) < 1e-12, "uniform loss = ln C");
  }

  for (int t = 0; t < 50; ++t) {
    const auto x = testing::random_tensor<double>({1 + t % 9, 1 + t % 13}, rng);
    expect(reshape_stack_backward(reshape_stack(x)) == x, "reshape bijectivity");

    const auto in = testing::random_tensor<double>({4 + t % 5, 4 + t % 7, 3}, rng);
    const auto pool = maxpool2d_forward(in, 2, 2);
    expect(pool.output == testing::naive_maxpool(in, 2, 2), "maxpool matches window max");
    const auto g = testing::random_tensor<double>(pool.output.shape(), rng);
    const auto back = maxpool2d_backward(g, pool.argmax, in.shape());
    Tensor<double> routed(in.shape());
    for (Index o = 0; o < g.size(); ++o) routed[pool.argmax[static_cast<std::size_t>(o)]] += g[o];
    expect(back == routed, "maxpool argmax routing");
  }

  for (int t = 0; t < 5; ++t) {
    HsiCube cube(11 + t, 7, 5);
    std::normal_distribution<float> normal(static_cast<float>(t), 2.0f + static_cast<float>(t));
    for (auto& v : cube.values) v = normal(rng);
    const auto n = normalize_cube(cube).cube;
    for (Index b = 0; b < 5; ++b) {
      double sum = 0, sq = 0;
      const double count = static_cast<double>(cube.width * cube.height);
      for (Index y = 0; y < cube.height; ++y) {
        for (Index x = 0; x < cube.width; ++x) sum += n.at(x, y, b);
      }
      const double mean = sum / count;
      for (Index y = 0; y < cube.height; ++y) {
        for (Index x = 0; x < cube.width; ++x) sq += std::pow(n.at(x, y, b) - mean, 2);
      }
      expect(std::abs(mean) < 1e-5 && std::abs(sq / count - 1.0) < 1e-4, "normalization mean/variance");
    }
  }

  for (int t = 0; t < 20; ++t) {
    LabelRaster r{0, 1, 0, {}};
    const Index classes = 2 + t % 6;
    std::vector<Index> counts;
    for (Index c = 0; c < classes; ++c) {
      counts.push_back(2 + static_cast<Index>(rng() % 50));
      r.labels.insert(r.labels.end(), static_cast<std::size_t>(counts.back()), static_cast<std::uint8_t>(c + 1));
    }
    r.width = static_cast<Index>(r.labels.size());
    r.declared_classes = static_cast<int>(classes);
    const auto set = enumerate_samples(r);
    const double ratio = 0.05 + 0.9 * static_cast<double>(t) / 19.0;
    const auto split = stratified_split(set, ratio, rng());
    std::vector<Index> tr(static_cast<std::size_t>(classes)), te(static_cast<std::size_t>(classes));
    std::set<Index> seen;
    for (auto i : split.train) {
      ++tr[static_cast<std::size_t>(set.samples[static_cast<std::size_t>(i)].label)];
      seen.insert(i);
    }
    for (auto i : split.test) {
      ++te[static_cast<std::size_t>(set.samples[static_cast<std::size_t>(i)].label)];
      expect(seen.insert(i).second, "split disjoint");
    }
    expect(seen.size() == set.samples.size(), "split covers all samples");
    for (std::size_t c = 0; c < counts.size(); ++c) {
      const Index want = std::clamp<Index>(
          static_cast<Index>(std::floor(ratio * static_cast<double>(counts[c]) + 1e-9)), 1, counts[c] - 1);
      expect(tr[c] == want && tr[c] + te[c] == counts[c], "split count rule");
    }
  }

  if (failures.empty()) {
    return {Status::Pass,
            "softmax sum/range/shift/ln C, reshape bijectivity, maxpool routing, normalization moments, split counts"};
  }
  std::string detail = "failed:";
  for (const auto& f : failures) detail += " [" + f + "]";
  return {Status::Fail, detail};
}

// ---------------------------------------------------------------------------
// 7. real scenes (optional)

Outcome real_scene(const std::string& dir_name, const std::string& preset) {
  const char* root = std::getenv("HSICNN_DATA_DIR");
  if (!root || !*root) return {Status::Skip, "HSICNN_DATA_DIR not set"};
  const fs::path dir = fs::path(root) / dir_name;
  const auto cube_path = dir / "cube.hsic", labels_path = dir / "labels.pgm";
  if (!fs::exists(cube_path) || !fs::exists(labels_path)) {
    return {Status::Skip, "no " + cube_path.string() + " / " + labels_path.filename().string()};
  }
  const auto start = Clock::now();
  const auto raw = load_cube(cube_path.string());
  const auto labels = load_labels(labels_path.string());
  require_aligned(raw, labels);
  const auto cube = normalize_cube(raw).cube;
  const auto set = enumerate_samples(labels);
  const auto split = stratified_split(set, 0.8, 1);
  const auto train_set = set.select(split.train), test_set = set.select(split.test);
  auto model = build_model<float>(resolve_preset(preset, cube.bands, set.class_count()), 1);
  TrainConfig tc;  // 7500 iterations, batch 100, lr 0.1, decay 0.09
  tc.seed = 1;
  tc.eval_every = 500;
  tc.threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  train(model, cube, train_set, {}, tc);
  const auto report = metrics_report(confusion_matrix(model, test_set, cube, tc.threads));
  const double elapsed = seconds_since(start);
  const bool ok = report.overall >= 0.95 && elapsed <= 3600.0;
  return {ok ? Status::Pass : Status::Fail,
          "OA " + fmt(report.overall) + " (>= 0.95), AA " + fmt(report.average) + ", " + fmt(elapsed, 0) + " s"};
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](const std::string& name, const std::function<Outcome()>& check) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {Status::Fail, std::string("exception: ") + e.what()};
    }
    const char* tag = o.status == Status::Pass ? "PASS" : o.status == Status::Fail ? "FAIL" : "SKIP";
    failed += o.status == Status::Fail;
    std::cout << "[" << tag << "] " << name << ": " << o.detail << std::endl;
  };

  report("1 gradient check", gradient_check);
  report("2 shape table", shape_table);

  const auto prepared = prepare_synthetic();
  std::optional<Run> run;
  report("3 synthetic end-to-end", [&] {
    run = train_synthetic(prepared);
    return synthetic_end_to_end(prepared, *run);
  });
  report("4 overfit 100-sample subsets", [&] { return overfit(prepared); });
  report("5 determinism", [&] {
    if (!run) return Outcome{Status::Fail, "reference run unavailable"};
    return determinism(prepared, *run);
  });
  report("6 property suites", properties);
  report("7a Indian Pines reproduction", [] { return real_scene("indian_pines", "ip"); });
  report("7b KSC reproduction", [] { return real_scene("ksc", "ksc"); });

  std::cout << (failed ? std::to_string(failed) + " criterion(s) failed" : std::string("all criteria met"))
            << std::endl;
  return failed ? 1 : 0;
}
