#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hsicnn/tensor.hpp"

namespace hsicnn {

/// Hyperspectral volume. Values are stored pixel-interleaved, index
/// ((y * width) + x) * bands + band, so a pixel's spectrum is contiguous.
struct HsiCube {
  Index width = 0;
  Index height = 0;
  Index bands = 0;
  std::vector<float> values;

  HsiCube() = default;
  HsiCube(Index width, Index height, Index bands);

  float& at(Index x, Index y, Index band) { return values[offset(x, y) + static_cast<std::size_t>(band)]; }
  float at(Index x, Index y, Index band) const {
    return values[offset(x, y) + static_cast<std::size_t>(band)];
  }
  std::span<const float> spectrum(Index x, Index y) const {
    return {values.data() + offset(x, y), static_cast<std::size_t>(bands)};
  }

  /// Throws FormatError on zero dimensions, length mismatch or non-finite values.
  void validate() const;

  friend bool operator==(const HsiCube&, const HsiCube&) = default;

 private:
  std::size_t offset(Index x, Index y) const { return static_cast<std::size_t>((y * width + x) * bands); }
};

/// Per-pixel class IDs; 0 is unlabeled background.
struct LabelRaster {
  Index width = 0;
  Index height = 0;
  int declared_classes = 0;  ///< upper bound on label values (the PGM maxval)
  std::vector<std::uint8_t> labels;

  std::uint8_t at(Index x, Index y) const { return labels[static_cast<std::size_t>(y * width + x)]; }
  std::uint8_t& at(Index x, Index y) { return labels[static_cast<std::size_t>(y * width + x)]; }

  void validate() const;
  friend bool operator==(const LabelRaster&, const LabelRaster&) = default;
};

// "HSIC" | u32 version | u32 width | u32 height | u32 bands | u32 dtype (0 = f32)
// | band-sequential f32 payload, little-endian.
inline constexpr std::uint32_t kCubeVersion = 1;

void save_cube(const HsiCube& cube, const std::string& path);
HsiCube load_cube(const std::string& path);
std::vector<char> encode_cube(const HsiCube& cube);
HsiCube decode_cube(const std::vector<char>& bytes);

/// Binary PGM (P5), 8-bit, class IDs as gray levels.
void save_labels(const LabelRaster& labels, const std::string& path);
LabelRaster load_labels(const std::string& path);

/// Throws DimensionError if the raster does not cover the cube exactly.
void require_aligned(const HsiCube& cube, const LabelRaster& labels);

struct BandStats {
  double mean = 0;
  double std = 0;  ///< population standard deviation
};

struct NormalizedCube {
  HsiCube cube;
  std::vector<BandStats> stats;
};

inline constexpr double kStdEpsilon = 1e-12;

/// Per-band z-score over the whole scene; bands with std < 1e-12 become 0.
NormalizedCube normalize_cube(const HsiCube& cube);

/// 3x3 window centred on (x, y), all bands, as a [row, col, band] tensor.
/// Rows follow y, columns follow x. Neighbours outside the scene are mirrored
/// about the border pixel (index -1 reads 1, index n reads n - 2).
template <typename Scalar = float>
Tensor<Scalar> extract_patch(const HsiCube& cube, Index x, Index y);

struct Sample {
  Index x = 0;
  Index y = 0;
  Index label = 0;  ///< compacted class index, 0-based

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct SampleSet {
  std::vector<Sample> samples;
  std::vector<int> raw_labels;  ///< class index -> raw raster label

  Index class_count() const { return static_cast<Index>(raw_labels.size()); }
  std::vector<Sample> select(std::span<const Index> indices) const;
};

/// One sample per nonzero pixel in scan order; raw labels are compacted to
/// 0..C-1 in ascending raw-label order. Throws DataError on an empty raster.
SampleSet enumerate_samples(const LabelRaster& labels);

struct SplitIndices {
  std::vector<Index> train;
  std::vector<Index> test;
  std::uint64_t seed = 0;
  double ratio = 0;

  friend bool operator==(const SplitIndices&, const SplitIndices&) = default;
};

/// Per class: floor(ratio * n) training samples clamped to [1, n - 1], chosen
/// uniformly without replacement. Index lists are sorted ascending.
SplitIndices stratified_split(const SampleSet& samples, double ratio, std::uint64_t seed);

/// Per-class training count used by stratified_split.
Index stratified_train_count(Index class_size, double ratio);

struct SynthConfig {
  Index n_classes = 8;
  Index bands = 176;
  Index width = 64;
  Index height = 64;
  double noise_std = 0.1;
  std::uint64_t seed = 0;
};

struct SyntheticScene {
  HsiCube cube;
  LabelRaster labels;
};

/// Scene of vertical class stripes; each class has a smooth random spectral
/// signature, and every pixel is its class signature plus Gaussian noise.
SyntheticScene synth_generate(const SynthConfig& config);

/// What `prepare` persists: the normalized cube it wrote, the class mapping,
/// the normalization statistics and the split.
struct SplitManifest {
  std::string cube_path;     ///< normalized cube
  std::string labels_path;
  std::string source_cube_path;
  std::vector<int> raw_labels;
  std::vector<BandStats> band_stats;
  SplitIndices split;
  std::string created;       ///< timestamp, informational only
};

void save_manifest(const SplitManifest& manifest, const std::string& path);
SplitManifest load_manifest(const std::string& path);

}  // namespace hsicnn
