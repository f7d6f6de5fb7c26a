#pragma once

// The assembled network:
//   Conv1 (spectral) -> reshape -> ReLU -> Conv2 -> ReLU -> maxpool -> flatten
//   -> FC1 -> ReLU -> FC2 -> ReLU -> output FC -> softmax
//
// Convolution stages run per sample; the dense stages run on the whole batch
// as matrix products.

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hsicnn/arch.hpp"
#include "hsicnn/layers.hpp"
#include "hsicnn/parallel.hpp"

namespace hsicnn {

inline constexpr std::array<const char*, 5> kLayerNames = {"conv1", "conv2", "fc1", "fc2", "output"};

/// Parameters of every trainable layer. Also used as the gradient set, which
/// is shape-congruent with the parameters it differentiates.
template <typename Scalar>
struct Parameters {
  LayerParams<Scalar> conv1, conv2, fc1, fc2, output;

  std::array<LayerParams<Scalar>*, 5> layers() { return {&conv1, &conv2, &fc1, &fc2, &output}; }
  std::array<const LayerParams<Scalar>*, 5> layers() const {
    return {&conv1, &conv2, &fc1, &fc2, &output};
  }

  Index count() const {
    Index n = 0;
    for (const auto* l : layers()) n += l->count();
    return n;
  }

  static Parameters zeros_like(const Parameters& p) {
    return {LayerParams<Scalar>::zeros_like(p.conv1), LayerParams<Scalar>::zeros_like(p.conv2),
            LayerParams<Scalar>::zeros_like(p.fc1), LayerParams<Scalar>::zeros_like(p.fc2),
            LayerParams<Scalar>::zeros_like(p.output)};
  }

  bool congruent_with(const Parameters& other) const {
    const auto a = layers();
    const auto b = other.layers();
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i]->weights.shape() != b[i]->weights.shape() ||
          a[i]->biases.shape() != b[i]->biases.shape()) {
        return false;
      }
    }
    return true;
  }

  template <typename Other>
  Parameters<Other> cast() const {
    return {conv1.template cast<Other>(), conv2.template cast<Other>(), fc1.template cast<Other>(),
            fc2.template cast<Other>(), output.template cast<Other>()};
  }

  friend bool operator==(const Parameters&, const Parameters&) = default;
};

template <typename Scalar>
struct Model {
  ArchConfig config;
  LayerShapes shapes;
  Parameters<Scalar> params;
  std::uint64_t seed = 0;       ///< seed the parameters were initialized from
  std::uint64_t iteration = 0;  ///< SGD updates applied so far

  template <typename Other>
  Model<Other> cast() const {
    return {config, shapes, params.template cast<Other>(), seed, iteration};
  }
};

enum class Init {
  /// He-uniform weights scaled by fan-in, zero biases, zero output-layer weights.
  He,
  Zero,
};

/// Zero-valued parameters with the shapes `config` implies.
template <typename Scalar>
Parameters<Scalar> zero_parameters(const ArchConfig& config) {
  const LayerShapes s = derive_shapes(config);
  auto layer = [](Shape w, Index outputs) {
    return LayerParams<Scalar>{Tensor<Scalar>(std::move(w)), Tensor<Scalar>({outputs})};
  };
  return {layer({config.n_1, kPatchSize, kPatchSize, config.n_k1}, config.n_1),
          layer({config.conv2_kernels, kConv2KernelSize, kConv2KernelSize}, config.conv2_kernels),
          layer({s.fc1, s.flatten}, s.fc1), layer({s.fc2, s.fc1}, s.fc2),
          layer({s.classes, s.fc2}, s.classes)};
}

template <typename Scalar>
Model<Scalar> build_model(const ArchConfig& config, std::uint64_t seed, Init init = Init::He) {
  config.validate();
  Model<Scalar> model{config, derive_shapes(config), zero_parameters<Scalar>(config), seed, 0};
  if (init == Init::Zero) return model;

  std::mt19937_64 rng(seed);
  // The output layer starts at zero so a fresh model predicts the uniform
  // distribution; gradients reach the hidden layers after the first update.
  for (auto* layer : {&model.params.conv1, &model.params.conv2, &model.params.fc1, &model.params.fc2}) {
    const Index fan_in = layer->weights.size() / layer->weights.dim(0);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (Index i = 0; i < layer->weights.size(); ++i) {
      layer->weights[i] = static_cast<Scalar>(bound * dist(rng));
    }
  }
  return model;
}

template <typename Scalar>
struct SampleActivations {
  Tensor<Scalar> patch;        ///< [3, 3, bands]
  Tensor<Scalar> conv1;        ///< [n_1, L]
  Tensor<Scalar> stacked;      ///< [L, n_1] before ReLU
  Tensor<Scalar> stacked_act;  ///< [L, n_1]
  Tensor<Scalar> conv2;        ///< [h_1, n_2, kernels] before ReLU
  Tensor<Scalar> conv2_act;
  std::vector<Index> pool_argmax;
};

/// Every intermediate of a batched forward pass; dense activations are [batch, width].
template <typename Scalar>
struct ActivationCache {
  std::vector<SampleActivations<Scalar>> samples;
  Tensor<Scalar> flat, fc1, fc1_act, fc2, fc2_act, logits, probs;

  Index batch() const { return static_cast<Index>(samples.size()); }
  bool complete() const { return !samples.empty() && !probs.empty(); }
};

namespace detail {

template <typename Scalar>
Tensor<Scalar> softmax_rows(const Tensor<Scalar>& logits) {
  Tensor<Scalar> probs(logits.shape());
  auto z = logits.matrix();
  auto p = probs.matrix();
  for (Index r = 0; r < z.rows(); ++r) {
    p.row(r) = (z.row(r).array() - z.row(r).maxCoeff()).exp();
    p.row(r) /= p.row(r).sum();
  }
  return probs;
}

template <typename Scalar>
void check_patch(const Model<Scalar>& model, const Tensor<Scalar>& patch) {
  if (patch.shape() != Shape{kPatchSize, kPatchSize, model.config.n_bands}) {
    throw DimensionError("model expects a patch of shape " +
                         shape_string({kPatchSize, kPatchSize, model.config.n_bands}) + ", got " +
                         shape_string(patch.shape()));
  }
}

}  // namespace detail

template <typename Scalar>
ActivationCache<Scalar> forward_batch(const Model<Scalar>& model,
                                      std::span<const Tensor<Scalar>> patches, int threads = 1) {
  if (patches.empty()) throw UsageError("forward: empty batch");
  const auto& s = model.shapes;
  const auto& p = model.params;
  const Index batch = static_cast<Index>(patches.size());
  for (const auto& patch : patches) detail::check_patch(model, patch);

  ActivationCache<Scalar> cache;
  cache.samples.resize(patches.size());
  cache.flat = Tensor<Scalar>({batch, s.flatten});
  parallel_for(batch, threads, [&](Index i) {
    auto& a = cache.samples[static_cast<std::size_t>(i)];
    a.patch = patches[static_cast<std::size_t>(i)];
    a.conv1 = conv_spectral_forward(a.patch, p.conv1, model.config.s_1);
    a.stacked = reshape_stack(a.conv1);
    a.stacked_act = relu(a.stacked);
    a.conv2 = conv2d_forward(a.stacked_act, p.conv2, model.config.s_2);
    a.conv2_act = relu(a.conv2);
    auto pooled = maxpool2d_forward(a.conv2_act, model.config.pool_window, model.config.pool_stride);
    a.pool_argmax = std::move(pooled.argmax);
    cache.flat.matrix().row(i) = pooled.output.values().transpose();
  });

  cache.fc1 = fc_forward(cache.flat, p.fc1);
  cache.fc1_act = relu(cache.fc1);
  cache.fc2 = fc_forward(cache.fc1_act, p.fc2);
  cache.fc2_act = relu(cache.fc2);
  cache.logits = fc_forward(cache.fc2_act, p.output);
  cache.probs = detail::softmax_rows(cache.logits);
  return cache;
}

template <typename Scalar>
struct ForwardResult {
  Tensor<Scalar> probs;  ///< [n_classes]
  ActivationCache<Scalar> cache;
};

template <typename Scalar>
ForwardResult<Scalar> forward(const Model<Scalar>& model, const Tensor<Scalar>& patch) {
  auto cache = forward_batch(model, std::span<const Tensor<Scalar>>(&patch, 1));
  Tensor<Scalar> probs({model.shapes.classes}, cache.probs.values());
  return {std::move(probs), std::move(cache)};
}

/// Index of the largest entry of each row; ties go to the lowest index.
template <typename Scalar>
std::vector<Index> argmax_rows(const Tensor<Scalar>& probs) {
  const auto m = probs.rank() == 1 ? probs.matrix(1, probs.size()) : probs.matrix();
  std::vector<Index> out(static_cast<std::size_t>(m.rows()));
  for (Index r = 0; r < m.rows(); ++r) {
    Index best = 0;
    for (Index c = 1; c < m.cols(); ++c) {
      if (m(r, c) > m(r, best)) best = c;
    }
    out[static_cast<std::size_t>(r)] = best;
  }
  return out;
}

template <typename Scalar>
Index predict(const Model<Scalar>& model, const Tensor<Scalar>& patch) {
  return argmax_rows(forward(model, patch).probs).front();
}

template <typename Scalar>
std::vector<Index> predict_batch(const Model<Scalar>& model,
                                 std::span<const Tensor<Scalar>> patches, int threads = 1) {
  return argmax_rows(forward_batch(model, patches, threads).probs);
}

template <typename Scalar>
struct BackwardResult {
  Parameters<Scalar> grads;              ///< mean over the batch
  std::vector<Tensor<Scalar>> input_grads;  ///< per sample, only when requested
  Scalar loss = 0;                       ///< mean cross-entropy over the batch
};

/// Exact gradients of the mean batch cross-entropy. Per-sample convolution
/// gradients are reduced in sample order, so the result does not depend on
/// `threads`.
template <typename Scalar>
BackwardResult<Scalar> backward(const Model<Scalar>& model, const ActivationCache<Scalar>& cache,
                                std::span<const Index> labels, bool want_input_grads = false,
                                int threads = 1) {
  if (!cache.complete()) throw UsageError("backward: activation cache is incomplete");
  const Index batch = cache.batch();
  if (static_cast<Index>(labels.size()) != batch) {
    throw UsageError("backward: " + std::to_string(labels.size()) + " labels for a batch of " +
                     std::to_string(batch));
  }
  const auto& p = model.params;
  const auto& s = model.shapes;
  BackwardResult<Scalar> result{Parameters<Scalar>::zeros_like(p), {}, Scalar(0)};
  auto& g = result.grads;

  Tensor<Scalar> dlogits = cache.probs;
  auto dl = dlogits.matrix();
  const auto logits = cache.logits.matrix();
  Scalar loss_sum = 0;
  for (Index r = 0; r < batch; ++r) {
    const Index label = labels[static_cast<std::size_t>(r)];
    Tensor<Scalar> row({s.classes}, logits.row(r).transpose());
    loss_sum += softmax_xent(row, label).loss;
    dl(r, label) -= Scalar(1);
  }
  dlogits.values() /= static_cast<Scalar>(batch);
  result.loss = loss_sum / static_cast<Scalar>(batch);

  auto d = fc_backward(cache.fc2_act, p.output, dlogits, g.output);
  d = relu_backward(cache.fc2, d);
  d = fc_backward(cache.fc1_act, p.fc2, d, g.fc2);
  d = relu_backward(cache.fc1, d);
  const Tensor<Scalar> dflat = fc_backward(cache.flat, p.fc1, d, g.fc1);

  std::vector<LayerParams<Scalar>> conv1_slots(static_cast<std::size_t>(batch));
  std::vector<LayerParams<Scalar>> conv2_slots(static_cast<std::size_t>(batch));
  if (want_input_grads) result.input_grads.resize(static_cast<std::size_t>(batch));
  const Shape pool_shape{s.pool_rows, s.pool_cols, s.pool_channels};

  parallel_for(batch, threads, [&](Index i) {
    const auto idx = static_cast<std::size_t>(i);
    const auto& a = cache.samples[idx];
    auto& slot1 = conv1_slots[idx];
    auto& slot2 = conv2_slots[idx];
    slot1 = LayerParams<Scalar>::zeros_like(p.conv1);
    slot2 = LayerParams<Scalar>::zeros_like(p.conv2);

    Tensor<Scalar> dpool(pool_shape, dflat.matrix().row(i).transpose());
    auto dconv2 = relu_backward(a.conv2, maxpool2d_backward(dpool, a.pool_argmax, a.conv2_act.shape()));
    auto dstacked = relu_backward(
        a.stacked, conv2d_backward(a.stacked_act, p.conv2, model.config.s_2, dconv2, slot2));
    auto dpatch = conv_spectral_backward(a.patch, p.conv1, model.config.s_1,
                                         reshape_stack_backward(dstacked), slot1);
    if (want_input_grads) result.input_grads[idx] = std::move(dpatch);
  });

  for (Index i = 0; i < batch; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    g.conv1.weights.values() += conv1_slots[idx].weights.values();
    g.conv1.biases.values() += conv1_slots[idx].biases.values();
    g.conv2.weights.values() += conv2_slots[idx].weights.values();
    g.conv2.biases.values() += conv2_slots[idx].biases.values();
  }
  return result;
}

/// Single-sample loss gradient with respect to every parameter and the input patch.
template <typename Scalar>
BackwardResult<Scalar> backward_pass(const Model<Scalar>& model, const ActivationCache<Scalar>& cache,
                                     Index label) {
  return backward(model, cache, std::span<const Index>(&label, 1), true);
}

}  // namespace hsicnn
