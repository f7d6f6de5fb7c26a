#pragma once

// Forward and backward kernels for the layer types of the network. Every
// function is a pure free function over Tensor values; backward functions
// return the input gradient and *accumulate* into the supplied parameter
// gradients so callers can sum over samples in a fixed order.
//
// Layouts (row-major):
//   spectral patch      [rows, cols, bands]
//   spectral kernels    [filters, rows, cols, depth]
//   spectral output     [filters, positions]
//   2-D input           [height, width]
//   2-D kernels         [filters, kh, kw]
//   2-D / pool output   [height, width, channels]
//   dense weights       [outputs, inputs]; input [n] or [batch, n]

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "hsicnn/tensor.hpp"

namespace hsicnn {

template <typename Scalar>
struct LayerParams {
  Tensor<Scalar> weights;
  Tensor<Scalar> biases;

  Index count() const { return weights.size() + biases.size(); }

  static LayerParams zeros_like(const LayerParams& other) {
    return {Tensor<Scalar>(other.weights.shape()), Tensor<Scalar>(other.biases.shape())};
  }

  template <typename Other>
  LayerParams<Other> cast() const {
    return {weights.template cast<Other>(), biases.template cast<Other>()};
  }

  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

/// Valid-convolution output length.
constexpr Index valid_output_size(Index input, Index kernel, Index stride) {
  return input < kernel ? 0 : (input - kernel) / stride + 1;
}

namespace detail {

inline void require_stride(Index stride) {
  if (stride < 1) throw DimensionError("stride must be >= 1, got " + std::to_string(stride));
}

template <typename Scalar>
void require_bias(const LayerParams<Scalar>& params, Index outputs, const char* layer) {
  if (params.biases.shape() != Shape{outputs}) {
    throw DimensionError(std::string(layer) + ": bias shape " +
                         shape_string(params.biases.shape()) + " does not match " +
                         std::to_string(outputs) + " outputs");
  }
}

struct SpectralGeometry {
  Index rows, cols, bands, filters, depth, positions;
};

template <typename Scalar>
SpectralGeometry spectral_geometry(const Tensor<Scalar>& patch, const LayerParams<Scalar>& params,
                                   Index stride) {
  require_stride(stride);
  if (patch.rank() != 3) {
    throw DimensionError("spectral conv: patch must be rank 3, got " + shape_string(patch.shape()));
  }
  const auto& w = params.weights.shape();
  if (w.size() != 4) {
    throw DimensionError("spectral conv: kernels must be rank 4, got " + shape_string(w));
  }
  if (w[1] != patch.dim(0) || w[2] != patch.dim(1)) {
    throw DimensionError("spectral conv: kernel spatial size " + std::to_string(w[1]) + "x" +
                         std::to_string(w[2]) + " does not match patch " +
                         shape_string(patch.shape()));
  }
  if (patch.dim(2) < w[3]) {
    throw DimensionError("spectral conv: " + std::to_string(patch.dim(2)) +
                         " bands is fewer than kernel depth " + std::to_string(w[3]));
  }
  require_bias(params, w[0], "spectral conv");
  return {patch.dim(0), patch.dim(1), patch.dim(2), w[0], w[3],
          valid_output_size(patch.dim(2), w[3], stride)};
}

// [rows*cols*depth, positions]; column j holds the window at band offset j*stride.
template <typename Scalar>
RowMatrix<Scalar> spectral_columns(const Tensor<Scalar>& patch, const SpectralGeometry& g,
                                   Index stride) {
  RowMatrix<Scalar> cols(g.rows * g.cols * g.depth, g.positions);
  for (Index px = 0; px < g.rows * g.cols; ++px) {
    const Scalar* spectrum = patch.data() + px * g.bands;
    for (Index t = 0; t < g.depth; ++t) {
      for (Index j = 0; j < g.positions; ++j) cols(px * g.depth + t, j) = spectrum[j * stride + t];
    }
  }
  return cols;
}

struct PlanarGeometry {
  Index height, width, filters, kh, kw, out_h, out_w;
};

template <typename Scalar>
PlanarGeometry planar_geometry(const Tensor<Scalar>& input, const LayerParams<Scalar>& params,
                               Index stride) {
  require_stride(stride);
  if (input.rank() != 2) {
    throw DimensionError("conv2d: input must be a single-channel matrix, got " +
                         shape_string(input.shape()));
  }
  const auto& w = params.weights.shape();
  if (w.size() != 3) throw DimensionError("conv2d: kernels must be rank 3, got " + shape_string(w));
  if (input.dim(0) < w[1] || input.dim(1) < w[2]) {
    throw DimensionError("conv2d: input " + shape_string(input.shape()) +
                         " is smaller than kernel " + std::to_string(w[1]) + "x" +
                         std::to_string(w[2]));
  }
  require_bias(params, w[0], "conv2d");
  return {input.dim(0),
          input.dim(1),
          w[0],
          w[1],
          w[2],
          valid_output_size(input.dim(0), w[1], stride),
          valid_output_size(input.dim(1), w[2], stride)};
}

// [kh*kw, out_h*out_w]
template <typename Scalar>
RowMatrix<Scalar> planar_columns(const Tensor<Scalar>& input, const PlanarGeometry& g,
                                 Index stride) {
  RowMatrix<Scalar> cols(g.kh * g.kw, g.out_h * g.out_w);
  for (Index a = 0; a < g.kh; ++a) {
    for (Index b = 0; b < g.kw; ++b) {
      for (Index i = 0; i < g.out_h; ++i) {
        const Scalar* row = input.data() + (i * stride + a) * g.width + b;
        for (Index j = 0; j < g.out_w; ++j) cols(a * g.kw + b, i * g.out_w + j) = row[j * stride];
      }
    }
  }
  return cols;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Spectral convolution: 3-D kernels that span the full spatial window and slide
// along the band axis only.

template <typename Scalar>
Tensor<Scalar> conv_spectral_forward(const Tensor<Scalar>& patch, const LayerParams<Scalar>& params,
                                     Index stride) {
  const auto g = detail::spectral_geometry(patch, params, stride);
  const auto cols = detail::spectral_columns(patch, g, stride);
  Tensor<Scalar> out({g.filters, g.positions});
  const auto kernels = params.weights.matrix(g.filters, g.rows * g.cols * g.depth);
  out.matrix().noalias() = kernels * cols;
  out.matrix().colwise() += params.biases.values();
  return out;
}

template <typename Scalar>
Tensor<Scalar> conv_spectral_backward(const Tensor<Scalar>& patch,
                                      const LayerParams<Scalar>& params, Index stride,
                                      const Tensor<Scalar>& grad_out,
                                      LayerParams<Scalar>& grad_params) {
  const auto g = detail::spectral_geometry(patch, params, stride);
  require_shape(grad_out, {g.filters, g.positions}, "spectral conv backward");
  const auto cols = detail::spectral_columns(patch, g, stride);
  const auto dout = grad_out.matrix();
  const Index window = g.rows * g.cols * g.depth;

  grad_params.weights.matrix(g.filters, window).noalias() += dout * cols.transpose();
  grad_params.biases.values() += dout.rowwise().sum();

  const RowMatrix<Scalar> dcols = params.weights.matrix(g.filters, window).transpose() * dout;
  Tensor<Scalar> grad_in(patch.shape());
  for (Index px = 0; px < g.rows * g.cols; ++px) {
    Scalar* spectrum = grad_in.data() + px * g.bands;
    for (Index t = 0; t < g.depth; ++t) {
      for (Index j = 0; j < g.positions; ++j) spectrum[j * stride + t] += dcols(px * g.depth + t, j);
    }
  }
  return grad_in;
}

// ---------------------------------------------------------------------------
// Reshape: feature vector c of [n, L] becomes column c of an [L, n] matrix.

template <typename Scalar>
Tensor<Scalar> reshape_stack(const Tensor<Scalar>& vectors) {
  if (vectors.rank() != 2) {
    throw DimensionError("reshape_stack: expected [vectors, length], got " +
                         shape_string(vectors.shape()));
  }
  Tensor<Scalar> out({vectors.dim(1), vectors.dim(0)});
  out.matrix() = vectors.matrix().transpose();
  return out;
}

template <typename Scalar>
Tensor<Scalar> reshape_stack_backward(const Tensor<Scalar>& grad_out) {
  return reshape_stack(grad_out);
}

// ---------------------------------------------------------------------------
// Single-channel 2-D valid convolution producing [out_h, out_w, filters].

template <typename Scalar>
Tensor<Scalar> conv2d_forward(const Tensor<Scalar>& input, const LayerParams<Scalar>& params,
                              Index stride) {
  const auto g = detail::planar_geometry(input, params, stride);
  const auto cols = detail::planar_columns(input, g, stride);
  Tensor<Scalar> out({g.out_h, g.out_w, g.filters});
  auto view = out.matrix(g.out_h * g.out_w, g.filters);
  view.noalias() = cols.transpose() * params.weights.matrix(g.filters, g.kh * g.kw).transpose();
  view.rowwise() += params.biases.values().transpose();
  return out;
}

template <typename Scalar>
Tensor<Scalar> conv2d_backward(const Tensor<Scalar>& input, const LayerParams<Scalar>& params,
                               Index stride, const Tensor<Scalar>& grad_out,
                               LayerParams<Scalar>& grad_params) {
  const auto g = detail::planar_geometry(input, params, stride);
  require_shape(grad_out, {g.out_h, g.out_w, g.filters}, "conv2d backward");
  const auto cols = detail::planar_columns(input, g, stride);
  const auto dout = grad_out.matrix(g.out_h * g.out_w, g.filters);

  grad_params.weights.matrix(g.filters, g.kh * g.kw).noalias() += dout.transpose() * cols.transpose();
  grad_params.biases.values() += dout.colwise().sum().transpose();

  // [kh*kw, positions]
  const RowMatrix<Scalar> dcols =
      params.weights.matrix(g.filters, g.kh * g.kw).transpose() * dout.transpose();
  Tensor<Scalar> grad_in(input.shape());
  for (Index a = 0; a < g.kh; ++a) {
    for (Index b = 0; b < g.kw; ++b) {
      for (Index i = 0; i < g.out_h; ++i) {
        Scalar* row = grad_in.data() + (i * stride + a) * g.width + b;
        for (Index j = 0; j < g.out_w; ++j) row[j * stride] += dcols(a * g.kw + b, i * g.out_w + j);
      }
    }
  }
  return grad_in;
}

// ---------------------------------------------------------------------------
// Max pooling over [H, W, C]. `argmax` holds, per output cell, the flat input
// index that won; ties go to the first index in window scan order.

template <typename Scalar>
struct PoolResult {
  Tensor<Scalar> output;
  std::vector<Index> argmax;
};

template <typename Scalar>
PoolResult<Scalar> maxpool2d_forward(const Tensor<Scalar>& input, Index window, Index stride) {
  detail::require_stride(stride);
  if (input.rank() != 3) {
    throw DimensionError("maxpool: expected [H, W, C], got " + shape_string(input.shape()));
  }
  const Index h = input.dim(0), w = input.dim(1), c = input.dim(2);
  if (window < 1 || h < window || w < window) {
    throw DimensionError("maxpool: window " + std::to_string(window) + " does not fit input " +
                         shape_string(input.shape()));
  }
  const Index out_h = valid_output_size(h, window, stride);
  const Index out_w = valid_output_size(w, window, stride);
  PoolResult<Scalar> result{Tensor<Scalar>({out_h, out_w, c}),
                            std::vector<Index>(static_cast<std::size_t>(out_h * out_w * c))};
  for (Index i = 0; i < out_h; ++i) {
    for (Index j = 0; j < out_w; ++j) {
      for (Index ch = 0; ch < c; ++ch) {
        Index best = (i * stride * w + j * stride) * c + ch;
        for (Index a = 0; a < window; ++a) {
          for (Index b = 0; b < window; ++b) {
            const Index at = ((i * stride + a) * w + j * stride + b) * c + ch;
            if (input[at] > input[best]) best = at;
          }
        }
        const Index o = (i * out_w + j) * c + ch;
        result.output[o] = input[best];
        result.argmax[static_cast<std::size_t>(o)] = best;
      }
    }
  }
  return result;
}

template <typename Scalar>
Tensor<Scalar> maxpool2d_backward(const Tensor<Scalar>& grad_out, const std::vector<Index>& argmax,
                                  const Shape& input_shape) {
  if (static_cast<Index>(argmax.size()) != grad_out.size()) {
    throw DimensionError("maxpool backward: argmax map has " + std::to_string(argmax.size()) +
                         " entries for " + std::to_string(grad_out.size()) + " outputs");
  }
  Tensor<Scalar> grad_in(input_shape);
  for (Index o = 0; o < grad_out.size(); ++o) grad_in[argmax[static_cast<std::size_t>(o)]] += grad_out[o];
  return grad_in;
}

// ---------------------------------------------------------------------------
// Fully connected: y = W x + b for [n] inputs, Y = X W^T + 1 b^T for [batch, n].

template <typename Scalar>
Tensor<Scalar> fc_forward(const Tensor<Scalar>& input, const LayerParams<Scalar>& params) {
  const auto& w = params.weights.shape();
  if (w.size() != 2) throw DimensionError("fc: weights must be a matrix, got " + shape_string(w));
  detail::require_bias(params, w[0], "fc");
  const Index n = input.rank() == 1 ? input.dim(0) : input.rank() == 2 ? input.dim(1) : -1;
  if (n != w[1]) {
    throw DimensionError("fc: input " + shape_string(input.shape()) + " does not match " +
                         std::to_string(w[1]) + " weight columns");
  }
  const Index batch = input.rank() == 1 ? 1 : input.dim(0);
  Tensor<Scalar> out(input.rank() == 1 ? Shape{w[0]} : Shape{batch, w[0]});
  auto y = out.matrix(batch, w[0]);
  y.noalias() = input.matrix(batch, n) * params.weights.matrix().transpose();
  y.rowwise() += params.biases.values().transpose();
  return out;
}

template <typename Scalar>
Tensor<Scalar> fc_backward(const Tensor<Scalar>& input, const LayerParams<Scalar>& params,
                           const Tensor<Scalar>& grad_out, LayerParams<Scalar>& grad_params) {
  const Index m = params.weights.dim(0), n = params.weights.dim(1);
  const Index batch = input.size() / n;
  if (grad_out.size() != batch * m) {
    throw DimensionError("fc backward: gradient " + shape_string(grad_out.shape()) +
                         " does not match output size " + std::to_string(batch * m));
  }
  const auto dy = grad_out.matrix(batch, m);
  const auto x = input.matrix(batch, n);
  grad_params.weights.matrix().noalias() += dy.transpose() * x;
  grad_params.biases.values() += dy.colwise().sum().transpose();
  Tensor<Scalar> grad_in(input.shape());
  grad_in.matrix(batch, n).noalias() = dy * params.weights.matrix();
  return grad_in;
}

// ---------------------------------------------------------------------------

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& input) {
  return Tensor<Scalar>(input.shape(), input.values().cwiseMax(Scalar(0)));
}

template <typename Scalar>
Tensor<Scalar> relu_backward(const Tensor<Scalar>& forward_input, const Tensor<Scalar>& grad_out) {
  require_shape(grad_out, forward_input.shape(), "relu backward");
  return Tensor<Scalar>(forward_input.shape(),
                        (forward_input.values().array() > Scalar(0))
                            .select(grad_out.values(), Scalar(0)));
}

// ---------------------------------------------------------------------------
// Softmax with cross-entropy, computed with max subtraction.

template <typename Scalar>
struct SoftmaxLoss {
  Scalar loss;
  Tensor<Scalar> probs;
};

template <typename Scalar>
SoftmaxLoss<Scalar> softmax_xent(const Tensor<Scalar>& logits, Index label) {
  if (logits.rank() != 1) {
    throw DimensionError("softmax: logits must be a vector, got " + shape_string(logits.shape()));
  }
  if (label < 0 || label >= logits.size()) {
    throw RangeError("softmax: label " + std::to_string(label) + " outside [0, " +
                     std::to_string(logits.size()) + ")");
  }
  const auto& z = logits.values();
  const Vector<Scalar> shifted = z.array() - z.maxCoeff();
  // The max term contributes exactly 1; log1p keeps saturated losses accurate.
  const Scalar rest = shifted.array().exp().sum() - Scalar(1);
  const Scalar log_sum = std::log1p(std::max(rest, Scalar(0)));
  Tensor<Scalar> probs(logits.shape(), (shifted.array() - log_sum).exp().matrix());
  return {log_sum - shifted[label], std::move(probs)};
}

/// d(loss)/d(logits) = probs - onehot(label).
template <typename Scalar>
Tensor<Scalar> softmax_xent_backward(const Tensor<Scalar>& probs, Index label) {
  Tensor<Scalar> grad = probs;
  grad[label] -= Scalar(1);
  return grad;
}

}  // namespace hsicnn
