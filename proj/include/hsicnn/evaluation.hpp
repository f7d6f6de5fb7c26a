#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hsicnn/data.hpp"
#include "hsicnn/model.hpp"

namespace hsicnn {

/// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  using Counts = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

  explicit ConfusionMatrix(Index classes) : counts_(Counts::Zero(classes, classes)) {}
  explicit ConfusionMatrix(Counts counts);

  void add(Index truth, Index predicted);

  Index classes() const { return counts_.rows(); }
  std::int64_t total() const { return counts_.sum(); }
  std::int64_t operator()(Index truth, Index predicted) const { return counts_(truth, predicted); }
  const Counts& counts() const { return counts_; }

 private:
  Counts counts_;
};

/// trace / total; throws UsageError on an empty matrix.
double overall_accuracy(const ConfusionMatrix& cm);
/// Mean per-class recall; throws DataError if any class row is empty.
double average_accuracy(const ConfusionMatrix& cm);

struct MetricsReport {
  double overall = 0;
  double average = 0;
  std::vector<double> per_class;       ///< recall per class
  std::vector<std::int64_t> support;   ///< true samples per class
  std::int64_t total = 0;
};

MetricsReport metrics_report(const ConfusionMatrix& cm);

/// Table-style text: OA and AA, then one line per class with its raw label.
std::string format_report(const MetricsReport& report, std::span<const int> raw_labels,
                          const std::string& dataset);
void write_metrics_csv(std::ostream& out, const MetricsReport& report, std::span<const int> raw_labels);

inline constexpr Index kInferenceChunk = 256;

template <typename Scalar>
std::vector<Index> predict_samples(const Model<Scalar>& model, std::span<const Sample> samples,
                                   const HsiCube& cube, int threads = 1) {
  if (cube.bands != model.config.n_bands) {
    throw DimensionError("cube has " + std::to_string(cube.bands) + " bands, model expects " +
                         std::to_string(model.config.n_bands));
  }
  std::vector<Index> out;
  out.reserve(samples.size());
  const Index n = static_cast<Index>(samples.size());
  for (Index begin = 0; begin < n; begin += kInferenceChunk) {
    const Index end = std::min(n, begin + kInferenceChunk);
    std::vector<Tensor<Scalar>> patches(static_cast<std::size_t>(end - begin));
    parallel_for(end - begin, threads, [&](Index i) {
      const auto& s = samples[static_cast<std::size_t>(begin + i)];
      patches[static_cast<std::size_t>(i)] = extract_patch<Scalar>(cube, s.x, s.y);
    });
    const auto predicted = predict_batch<Scalar>(model, patches, threads);
    out.insert(out.end(), predicted.begin(), predicted.end());
  }
  return out;
}

template <typename Scalar>
ConfusionMatrix confusion_matrix(const Model<Scalar>& model, std::span<const Sample> samples,
                                 const HsiCube& cube, int threads = 1) {
  ConfusionMatrix cm(model.config.n_classes);
  const auto predicted = predict_samples(model, samples, cube, threads);
  for (std::size_t i = 0; i < samples.size(); ++i) cm.add(samples[i].label, predicted[i]);
  return cm;
}

// ---------------------------------------------------------------------------
// Classification maps

using Rgb = std::array<std::uint8_t, 3>;

struct RgbImage {
  Index width = 0;
  Index height = 0;
  std::vector<Rgb> pixels;  ///< row-major

  Rgb at(Index x, Index y) const { return pixels[static_cast<std::size_t>(y * width + x)]; }
  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

/// Raw label 0 is black; raw label r >= 1 uses palette entry (r - 1) mod 16.
const std::array<Rgb, 16>& palette();
Rgb label_color(int raw_label);

/// Ground-truth rendering of a raster.
RgbImage render_labels(const LabelRaster& labels);

enum class MapMode { Full, LabeledOnly };

/// Predicts every pixel (Full) or only nonzero-label pixels (LabeledOnly) and
/// colours each prediction by its raw label.
template <typename Scalar>
RgbImage render_map(const Model<Scalar>& model, const HsiCube& cube, const LabelRaster& labels,
                    std::span<const int> raw_labels, MapMode mode, int threads = 1) {
  require_aligned(cube, labels);
  if (static_cast<Index>(raw_labels.size()) != model.config.n_classes) {
    throw DimensionError("class mapping has " + std::to_string(raw_labels.size()) +
                         " entries, model predicts " + std::to_string(model.config.n_classes) + " classes");
  }
  std::vector<Sample> pixels;
  for (Index y = 0; y < cube.height; ++y) {
    for (Index x = 0; x < cube.width; ++x) {
      if (mode == MapMode::Full || labels.at(x, y) != 0) pixels.push_back({x, y, 0});
    }
  }
  RgbImage image{cube.width, cube.height,
                 std::vector<Rgb>(static_cast<std::size_t>(cube.width * cube.height), Rgb{0, 0, 0})};
  const auto predicted = predict_samples(model, pixels, cube, threads);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    image.pixels[static_cast<std::size_t>(pixels[i].y * cube.width + pixels[i].x)] =
        label_color(raw_labels[static_cast<std::size_t>(predicted[i])]);
  }
  return image;
}

std::vector<char> encode_ppm(const RgbImage& image);
void write_ppm(const RgbImage& image, const std::string& path);

// ---------------------------------------------------------------------------
// Feature export

struct FeatureTable {
  std::string layer;
  std::vector<Index> sample_ids;
  std::vector<Index> labels;
  RowMatrix<float> values;  ///< one row per sample

  void write_csv(std::ostream& out) const;
};

/// Post-activation outputs of `layer` ("fc1" or "fc2") for every sample.
/// `sample_ids` label the rows; when empty, rows are numbered 0..n-1.
template <typename Scalar>
FeatureTable export_features(const Model<Scalar>& model, std::span<const Sample> samples,
                             const HsiCube& cube, const std::string& layer,
                             std::span<const Index> sample_ids = {}, int threads = 1) {
  if (layer != "fc1" && layer != "fc2") {
    throw UsageError("unknown feature layer '" + layer + "' (expected fc1 or fc2)");
  }
  if (!sample_ids.empty() && sample_ids.size() != samples.size()) {
    throw UsageError("export_features: sample id count does not match sample count");
  }
  if (cube.bands != model.config.n_bands) {
    throw DimensionError("cube has " + std::to_string(cube.bands) + " bands, model expects " +
                         std::to_string(model.config.n_bands));
  }
  const Index n = static_cast<Index>(samples.size());
  const Index width = layer == "fc1" ? model.shapes.fc1 : model.shapes.fc2;
  FeatureTable table{layer, {}, {}, RowMatrix<float>(n, width)};
  for (Index begin = 0; begin < n; begin += kInferenceChunk) {
    const Index end = std::min(n, begin + kInferenceChunk);
    std::vector<Tensor<Scalar>> patches(static_cast<std::size_t>(end - begin));
    parallel_for(end - begin, threads, [&](Index i) {
      const auto& s = samples[static_cast<std::size_t>(begin + i)];
      patches[static_cast<std::size_t>(i)] = extract_patch<Scalar>(cube, s.x, s.y);
    });
    const auto cache = forward_batch<Scalar>(model, patches, threads);
    const auto& act = layer == "fc1" ? cache.fc1_act : cache.fc2_act;
    table.values.middleRows(begin, end - begin) = act.matrix().template cast<float>();
  }
  for (Index i = 0; i < n; ++i) {
    table.sample_ids.push_back(sample_ids.empty() ? i : sample_ids[static_cast<std::size_t>(i)]);
    table.labels.push_back(samples[static_cast<std::size_t>(i)].label);
  }
  return table;
}

}  // namespace hsicnn
