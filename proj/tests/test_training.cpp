#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "hsicnn/checkpoint.hpp"
#include "hsicnn/data.hpp"
#include "hsicnn/errors.hpp"
#include "hsicnn/training.hpp"

using namespace hsicnn;

namespace {

// Small synthetic problem that trains in well under a second.
struct Problem {
  HsiCube cube;
  SampleSet set;
  std::vector<Sample> train, test;
  ArchConfig arch;
};

Problem make_problem(std::uint64_t seed = 5) {
  SynthConfig sc;
  sc.n_classes = 4;
  sc.bands = 40;
  sc.width = 16;
  sc.height = 8;
  sc.seed = seed;
  auto scene = synth_generate(sc);
  Problem p;
  p.cube = normalize_cube(scene.cube).cube;
  p.set = enumerate_samples(scene.labels);
  const auto split = stratified_split(p.set, 0.5, seed);
  p.train = p.set.select(split.train);
  p.test = p.set.select(split.test);
  p.arch.n_bands = 40;
  p.arch.n_k1 = 8;
  p.arch.s_1 = 4;
  p.arch.n_1 = 6;
  p.arch.conv2_kernels = 4;
  p.arch.n_3 = 32;
  p.arch.n_4 = 16;
  p.arch.n_classes = 4;
  return p;
}

TrainConfig small_config(Index iterations) {
  TrainConfig c;
  c.batch_size = 16;
  c.max_iterations = iterations;
  c.eval_every = 20;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_CASE("learning-rate schedule") {
  TrainConfig c;
  CHECK(lr_at(c, 0) == 0.1);
  CHECK(lr_at(c, 10) == doctest::Approx(0.1 / 1.9).epsilon(1e-12));
  CHECK(lr_at(c, 10) == doctest::Approx(0.052632).epsilon(1e-5));
  c.decay = 0;
  for (Index e : {0, 1, 50, 1000}) CHECK(lr_at(c, e) == 0.1);
}

TEST_CASE("sgd update") {
  auto params = zero_parameters<double>(make_problem().arch);
  params.fc2.weights.values().setConstant(1.0);
  auto grads = Parameters<double>::zeros_like(params);
  grads.fc2.weights.values().setConstant(0.5);

  auto p = params;
  sgd_update(p, grads, 0.1);
  CHECK(p.fc2.weights.values().isConstant(0.95, 1e-15));
  CHECK(p.conv1 == params.conv1);

  p = params;
  sgd_update(p, Parameters<double>::zeros_like(params), 0.1);
  CHECK(p == params);
  sgd_update(p, grads, 0.0);
  CHECK(p == params);

  auto other = make_problem().arch;
  other.n_3 = 7;
  CHECK_THROWS_AS(sgd_update(p, zero_parameters<double>(other), 0.1), UsageError);
}

TEST_CASE("batch sampler visits every sample once per epoch") {
  for (auto [n, b] : {std::pair<Index, Index>{10, 3}, {12, 4}, {5, 10}, {1, 1}}) {
    BatchSampler sampler(n, b, 9);
    const Index per_epoch = iterations_per_epoch(n, b);
    CHECK(per_epoch == (n + b - 1) / b);
    for (Index epoch = 0; epoch < 4; ++epoch) {
      std::multiset<Index> seen;
      for (Index i = 0; i < per_epoch; ++i) {
        CHECK(sampler.epoch() == epoch);
        const auto batch = sampler.next();
        CHECK(static_cast<Index>(batch.size()) == (i + 1 < per_epoch ? b : n - b * (per_epoch - 1)));
        seen.insert(batch.begin(), batch.end());
      }
      CHECK(static_cast<Index>(seen.size()) == n);
      CHECK(static_cast<Index>(std::set<Index>(seen.begin(), seen.end()).size()) == n);
    }
  }
}

TEST_CASE("training reduces the loss from ln C") {
  const auto p = make_problem();
  auto model = build_model<float>(p.arch, 1);
  const auto history = train(model, p.cube, p.train, p.test, small_config(200));
  REQUIRE(history.batch_losses.size() == 200);
  CHECK(std::abs(history.batch_losses[0] - std::log(4.0)) < 1e-3);
  const double mean = std::accumulate(history.batch_losses.begin(), history.batch_losses.end(), 0.0) / 200;
  CHECK(mean < history.batch_losses[0]);
  CHECK(model.iteration == 200);

  REQUIRE(history.records.size() == 10);
  for (std::size_t i = 0; i < history.records.size(); ++i) {
    CHECK(history.records[i].iteration == static_cast<Index>(20 * (i + 1)));
    CHECK(history.records[i].train_accuracy >= 0.0);
    CHECK(history.records[i].train_accuracy <= 1.0);
    CHECK(!std::isnan(history.records[i].test_accuracy));
  }
  CHECK(history.records.back().test_accuracy > 0.9);
}

TEST_CASE("training is deterministic and thread invariant") {
  const auto p = make_problem();
  auto run = [&](int threads) {
    auto model = build_model<float>(p.arch, 2);
    auto cfg = small_config(60);
    cfg.threads = threads;
    const auto history = train(model, p.cube, p.train, p.test, cfg);
    return std::pair{history.csv(), encode_checkpoint(to_checkpoint(model))};
  };
  const auto a = run(1);
  const auto b = run(1);
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  const auto c = run(3);
  CHECK(a.first == c.first);
  CHECK(a.second == c.second);
}

TEST_CASE("history csv") {
  TrainHistory h;
  h.records.push_back({100, 0.5, 0.75, std::numeric_limits<double>::quiet_NaN()});
  h.records.push_back({200, 0.25, 1.0, 0.5});
  const auto csv = h.csv();
  CHECK(csv.rfind("iteration,loss,train_acc,test_acc\n", 0) == 0);
  CHECK(csv.find("100,") != std::string::npos);
  CHECK(csv.find("nan") != std::string::npos);
}

TEST_CASE("callbacks can stop training and receive checkpoints") {
  const auto p = make_problem();
  auto model = build_model<float>(p.arch, 2);
  auto cfg = small_config(200);
  cfg.checkpoint_every = 30;
  int checkpoints = 0;
  TrainCallbacks<float> cb;
  cb.on_record = [](const Model<float>&, const HistoryRecord& r) { return r.iteration < 60; };
  cb.on_checkpoint = [&](const Model<float>&) { ++checkpoints; };
  const auto h = train(model, p.cube, p.train, {}, cfg, cb);
  CHECK(h.records.size() == 3);
  CHECK(model.iteration == 60);
  CHECK(checkpoints == 1);  // at 30; iteration 60 stops before its checkpoint
  CHECK(std::isnan(h.records.front().test_accuracy));
}

TEST_CASE("training input errors") {
  const auto p = make_problem();
  auto model = build_model<float>(p.arch, 1);
  CHECK_THROWS_AS(train(model, p.cube, {}, p.test, small_config(5)), DataError);

  HsiCube wrong(16, 8, 39);
  CHECK_THROWS_AS(train(model, wrong, p.train, p.test, small_config(5)), DimensionError);

  auto bad = p.train;
  bad[0].label = 4;
  CHECK_THROWS(train(model, p.cube, bad, p.test, small_config(5)));

  auto cfg = small_config(5);
  cfg.batch_size = 0;
  CHECK_THROWS_AS(train(model, p.cube, p.train, p.test, cfg), ConfigError);
  cfg = small_config(0);
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_config(5);
  cfg.learning_rate = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("training config json round trip") {
  TrainConfig c;
  c.learning_rate = 0.05;
  c.decay = 0.0;
  c.batch_size = 32;
  c.max_iterations = 123;
  c.seed = 77;
  c.checkpoint_every = 10;
  c.eval_every = 5;
  const auto back = train_from_json(train_to_json(c));
  CHECK(back.learning_rate == 0.05);
  CHECK(back.decay == 0.0);
  CHECK(back.batch_size == 32);
  CHECK(back.max_iterations == 123);
  CHECK(back.seed == 77);
  CHECK(back.checkpoint_every == 10);
  CHECK(back.eval_every == 5);

  const auto partial = train_from_json(R"({"train": {"batch_size": 8}})");
  CHECK(partial.batch_size == 8);
  CHECK(partial.learning_rate == 0.1);
  CHECK_THROWS_AS(train_from_json("{not json"), FormatError);
}
