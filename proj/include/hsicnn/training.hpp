#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hsicnn/data.hpp"
#include "hsicnn/evaluation.hpp"
#include "hsicnn/model.hpp"

namespace hsicnn {

struct TrainConfig {
  double learning_rate = 0.1;
  double decay = 0.09;          ///< inverse-time decay per epoch
  Index batch_size = 100;
  Index max_iterations = 7500;
  std::uint64_t seed = 0;       ///< drives the per-epoch shuffles
  Index checkpoint_every = 0;   ///< 0 disables periodic checkpoints
  Index eval_every = 100;
  int threads = 1;

  void validate() const;
};

std::string train_to_json(const TrainConfig& config);
/// Reads a `{"train": {...}}` block or a bare object; missing fields keep `base`.
TrainConfig train_from_json(std::string_view text, TrainConfig base = {});

/// lr0 / (1 + decay * epoch)
double lr_at(const TrainConfig& config, Index epoch);

/// Batches per epoch, ceil(n_train / batch_size).
inline Index iterations_per_epoch(Index n_train, Index batch_size) {
  return (n_train + batch_size - 1) / batch_size;
}

template <typename Scalar>
void sgd_update(Parameters<Scalar>& params, const Parameters<Scalar>& grads, Scalar lr) {
  if (!params.congruent_with(grads)) throw UsageError("sgd_update: gradients are not shape-congruent with parameters");
  auto p = params.layers();
  const auto g = grads.layers();
  for (std::size_t l = 0; l < p.size(); ++l) {
    p[l]->weights.values() -= lr * g[l]->weights.values();
    p[l]->biases.values() -= lr * g[l]->biases.values();
  }
}

struct HistoryRecord {
  Index iteration = 0;      ///< updates completed
  double loss = 0;          ///< mean batch loss since the previous record
  double train_accuracy = 0;  ///< accuracy of the batches since the previous record, before their update
  double test_accuracy = std::numeric_limits<double>::quiet_NaN();
};

struct TrainHistory {
  std::vector<HistoryRecord> records;
  std::vector<double> batch_losses;  ///< one per iteration

  void write_csv(std::ostream& out) const;
  std::string csv() const;
};

/// Seeded per-epoch shuffling: every epoch visits each of the n indices once,
/// in batches of batch_size with a possibly short final batch.
class BatchSampler {
 public:
  BatchSampler(Index n, Index batch_size, std::uint64_t seed)
      : n_(n), batch_size_(batch_size), per_epoch_(iterations_per_epoch(n, batch_size)), rng_(seed),
        order_(static_cast<std::size_t>(n)) {
    std::iota(order_.begin(), order_.end(), Index{0});
  }

  /// Epoch of the batch the next call to next() returns.
  Index epoch() const { return drawn_ / per_epoch_; }

  std::span<const Index> next() {
    const Index slot = drawn_ % per_epoch_;
    if (slot == 0) std::shuffle(order_.begin(), order_.end(), rng_);
    ++drawn_;
    const Index begin = slot * batch_size_;
    const Index end = std::min(n_, begin + batch_size_);
    return {order_.data() + begin, static_cast<std::size_t>(end - begin)};
  }

 private:
  Index n_, batch_size_, per_epoch_;
  Index drawn_ = 0;
  std::mt19937_64 rng_;
  std::vector<Index> order_;
};

template <typename Scalar>
struct TrainCallbacks {
  /// Called at every record; return false to stop training early.
  std::function<bool(const Model<Scalar>&, const HistoryRecord&)> on_record;
  std::function<void(const Model<Scalar>&)> on_checkpoint;
};

/// Mini-batch SGD. Each epoch visits every training sample once in a seeded
/// shuffled order (the last batch may be short); gradients are averaged over
/// the batch. Results do not depend on `config.threads`.
template <typename Scalar>
TrainHistory train(Model<Scalar>& model, const HsiCube& cube, std::span<const Sample> train_set,
                   std::span<const Sample> test_set, const TrainConfig& config,
                   const TrainCallbacks<Scalar>& callbacks = {}) {
  config.validate();
  if (train_set.empty()) throw DataError("training set is empty");
  if (cube.bands != model.config.n_bands) {
    throw DimensionError("cube has " + std::to_string(cube.bands) + " bands, model expects " +
                         std::to_string(model.config.n_bands));
  }
  for (const auto& s : train_set) {
    if (s.label < 0 || s.label >= model.config.n_classes) {
      throw DataError("training label " + std::to_string(s.label) + " outside the model's " +
                      std::to_string(model.config.n_classes) + " classes");
    }
  }

  BatchSampler sampler(static_cast<Index>(train_set.size()), config.batch_size, config.seed);

  TrainHistory history;
  history.batch_losses.reserve(static_cast<std::size_t>(config.max_iterations));
  double window_loss = 0;
  Index window_batches = 0, window_correct = 0, window_seen = 0;

  for (Index it = 0; it < config.max_iterations; ++it) {
    const Index epoch = sampler.epoch();
    const auto batch = sampler.next();

    std::vector<Tensor<Scalar>> patches(batch.size());
    std::vector<Index> labels(patches.size());
    parallel_for(static_cast<Index>(batch.size()), config.threads, [&](Index i) {
      const auto& s = train_set[static_cast<std::size_t>(batch[static_cast<std::size_t>(i)])];
      patches[static_cast<std::size_t>(i)] = extract_patch<Scalar>(cube, s.x, s.y);
      labels[static_cast<std::size_t>(i)] = s.label;
    });

    const auto cache = forward_batch<Scalar>(model, patches, config.threads);
    const auto grads = backward<Scalar>(model, cache, labels, false, config.threads);
    const auto predicted = argmax_rows(cache.probs);
    for (std::size_t i = 0; i < labels.size(); ++i) window_correct += predicted[i] == labels[i];
    window_seen += static_cast<Index>(labels.size());
    window_loss += static_cast<double>(grads.loss);
    ++window_batches;
    history.batch_losses.push_back(static_cast<double>(grads.loss));

    sgd_update(model.params, grads.grads, static_cast<Scalar>(lr_at(config, epoch)));
    ++model.iteration;

    const Index done = it + 1;
    if (done % config.eval_every == 0 || done == config.max_iterations) {
      HistoryRecord record{static_cast<Index>(model.iteration), window_loss / static_cast<double>(window_batches),
                           static_cast<double>(window_correct) / static_cast<double>(window_seen)};
      if (!test_set.empty()) {
        record.test_accuracy = overall_accuracy(confusion_matrix(model, test_set, cube, config.threads));
      }
      history.records.push_back(record);
      window_loss = 0;
      window_batches = window_correct = window_seen = 0;
      if (callbacks.on_record && !callbacks.on_record(model, record)) break;
    }
    if (config.checkpoint_every > 0 && done % config.checkpoint_every == 0 && callbacks.on_checkpoint) {
      callbacks.on_checkpoint(model);
    }
  }
  return history;
}

}  // namespace hsicnn
