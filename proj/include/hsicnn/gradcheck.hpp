#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "hsicnn/model.hpp"

namespace hsicnn {

struct GradCheckEntry {
  std::string name;            ///< e.g. "conv1.weights", "input"
  double max_relative_error = 0;
  Index worst_index = 0;
  bool flagged = false;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tolerance = 0;

  double max_relative_error() const {
    double m = 0;
    for (const auto& e : entries) m = std::max(m, e.max_relative_error);
    return m;
  }
  bool passed() const {
    return std::none_of(entries.begin(), entries.end(), [](const auto& e) { return e.flagged; });
  }
};

/// |a - n| / max(|a|, |n|, 1e-12)
inline double relative_error(double analytic, double numeric, double floor = 1e-12) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

template <typename Scalar>
Scalar sample_loss(const Model<Scalar>& model, const Tensor<Scalar>& patch, Index label) {
  const auto cache = forward(model, patch).cache;
  return softmax_xent(Tensor<Scalar>({model.shapes.classes}, cache.logits.values()), label).loss;
}

/// Central differences of the sample loss for every parameter.
template <typename Scalar>
Parameters<Scalar> numeric_gradients(Model<Scalar> model, const Tensor<Scalar>& patch, Index label,
                                     Scalar step) {
  auto grads = Parameters<Scalar>::zeros_like(model.params);
  auto params = model.params.layers();
  auto out = grads.layers();
  for (std::size_t l = 0; l < params.size(); ++l) {
    for (auto [value, grad] : {std::pair{&params[l]->weights, &out[l]->weights},
                               std::pair{&params[l]->biases, &out[l]->biases}}) {
      for (Index i = 0; i < value->size(); ++i) {
        const Scalar saved = (*value)[i];
        (*value)[i] = saved + step;
        const Scalar up = sample_loss(model, patch, label);
        (*value)[i] = saved - step;
        const Scalar down = sample_loss(model, patch, label);
        (*value)[i] = saved;
        (*grad)[i] = (up - down) / (2 * step);
      }
    }
  }
  return grads;
}

template <typename Scalar>
Tensor<Scalar> numeric_input_gradient(const Model<Scalar>& model, Tensor<Scalar> patch, Index label,
                                      Scalar step) {
  Tensor<Scalar> grad(patch.shape());
  for (Index i = 0; i < patch.size(); ++i) {
    const Scalar saved = patch[i];
    patch[i] = saved + step;
    const Scalar up = sample_loss(model, patch, label);
    patch[i] = saved - step;
    const Scalar down = sample_loss(model, patch, label);
    patch[i] = saved;
    grad[i] = (up - down) / (2 * step);
  }
  return grad;
}

template <typename Scalar>
GradCheckEntry compare_tensor(std::string name, const Tensor<Scalar>& analytic,
                              const Tensor<Scalar>& numeric, double tolerance, double floor = 1e-12) {
  if (analytic.shape() != numeric.shape()) {
    throw DimensionError("gradient check: " + name + " analytic " + shape_string(analytic.shape()) +
                         " vs numeric " + shape_string(numeric.shape()));
  }
  GradCheckEntry entry{std::move(name)};
  for (Index i = 0; i < analytic.size(); ++i) {
    const double err = relative_error(static_cast<double>(analytic[i]), static_cast<double>(numeric[i]), floor);
    if (err > entry.max_relative_error) {
      entry.max_relative_error = err;
      entry.worst_index = i;
    }
  }
  entry.flagged = !(entry.max_relative_error < tolerance);
  return entry;
}

template <typename Scalar>
GradCheckReport compare_gradients(const Parameters<Scalar>& analytic,
                                  const Parameters<Scalar>& numeric, double tolerance) {
  GradCheckReport report{{}, tolerance};
  const auto a = analytic.layers();
  const auto n = numeric.layers();
  for (std::size_t l = 0; l < a.size(); ++l) {
    const std::string layer = kLayerNames[l];
    report.entries.push_back(compare_tensor(layer + ".weights", a[l]->weights, n[l]->weights, tolerance));
    report.entries.push_back(compare_tensor(layer + ".biases", a[l]->biases, n[l]->biases, tolerance));
  }
  return report;
}

/// Compares backward_pass against central differences for every parameter.
/// Intended for 64-bit models.
template <typename Scalar>
GradCheckReport grad_check(const Model<Scalar>& model, const Tensor<Scalar>& patch, Index label,
                           Scalar step = Scalar(1e-5), double tolerance = 1e-6) {
  const auto fwd = forward(model, patch);
  const auto analytic = backward_pass(model, fwd.cache, label);
  return compare_gradients(analytic.grads, numeric_gradients(model, patch, label, step), tolerance);
}

/// Same comparison for the gradient with respect to the input patch. Some
/// input entries are ~1e-6 while the loss is ~1, so central differences carry
/// round-off near 1e-12 absolute; the error floor is therefore tied to the
/// largest entry instead of fixed at 1e-12.
template <typename Scalar>
GradCheckEntry input_grad_check(const Model<Scalar>& model, const Tensor<Scalar>& patch, Index label,
                                Scalar step = Scalar(1e-5), double tolerance = 1e-6,
                                double relative_floor = 1e-3) {
  const auto fwd = forward(model, patch);
  const auto analytic = backward_pass(model, fwd.cache, label);
  const auto& a = analytic.input_grads.front();
  const double floor =
      std::max(1e-12, relative_floor * static_cast<double>(a.values().cwiseAbs().maxCoeff()));
  return compare_tensor("input", a, numeric_input_gradient(model, patch, label, step), tolerance, floor);
}

/// The small configuration used for gradient checking.
inline ArchConfig tiny_arch() {
  ArchConfig c;
  c.n_bands = 10;
  c.n_k1 = 4;
  c.s_1 = 2;
  c.n_1 = 4;
  c.s_2 = 1;
  c.conv2_kernels = 2;
  c.n_3 = 8;
  c.n_4 = 6;
  c.n_classes = 3;
  return c;
}

/// Random 64-bit instance of the tiny network: He-initialized weights, random
/// output layer and biases, standard-normal patch and a random label.
struct TinyInstance {
  Model<double> model;
  Tensor<double> patch;
  Index label;
};

inline TinyInstance make_tiny_instance(std::uint64_t seed) {
  auto model = build_model<double>(tiny_arch(), seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(-0.5, 0.5);
  for (Index i = 0; i < model.params.output.weights.size(); ++i) {
    model.params.output.weights[i] = normal(rng) / std::sqrt(6.0);
  }
  for (auto* layer : model.params.layers()) {
    for (Index i = 0; i < layer->biases.size(); ++i) layer->biases[i] = uniform(rng) * 0.2;
  }
  Tensor<double> patch({kPatchSize, kPatchSize, model.config.n_bands});
  for (Index i = 0; i < patch.size(); ++i) patch[i] = normal(rng);
  const Index label = std::uniform_int_distribution<Index>(0, model.config.n_classes - 1)(rng);
  return {std::move(model), std::move(patch), label};
}

}  // namespace hsicnn
