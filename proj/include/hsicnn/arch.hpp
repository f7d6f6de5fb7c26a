#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hsicnn/tensor.hpp"

namespace hsicnn {

/// Network hyperparameters. Field names follow the usual notation for this
/// architecture (n_bands, n_k1, s_1, ...).
struct ArchConfig {
  Index n_bands = 0;          ///< spectral bands of the input cube
  Index n_k1 = 24;            ///< Conv1 kernel spectral height
  Index s_1 = 9;              ///< Conv1 spectral stride
  Index n_1 = 30;             ///< Conv1 kernel count
  Index s_2 = 1;              ///< Conv2 stride
  Index conv2_kernels = 64;
  Index pool_window = 2;
  Index pool_stride = 2;
  Index n_3 = 1024;           ///< FC1 nodes
  Index n_4 = 100;            ///< FC2 nodes
  Index n_classes = 0;

  /// Throws ConfigError when a field is out of range or a derived dimension collapses.
  void validate() const;

  friend bool operator==(const ArchConfig&, const ArchConfig&) = default;
};

inline constexpr Index kPatchSize = 3;
inline constexpr Index kConv2KernelSize = 3;

struct LayerShapes {
  Index conv1_length = 0;   ///< L, positions per Conv1 filter
  Index reshape_rows = 0;   ///< L
  Index reshape_cols = 0;   ///< n_1
  Index conv2_rows = 0;     ///< h_1
  Index conv2_cols = 0;     ///< n_2
  Index conv2_channels = 0;
  Index pool_rows = 0;
  Index pool_cols = 0;
  Index pool_channels = 0;
  Index flatten = 0;
  Index fc1 = 0;
  Index fc2 = 0;
  Index classes = 0;

  friend bool operator==(const LayerShapes&, const LayerShapes&) = default;
};

/// Every stage uses out = floor((in - k) / s) + 1. Throws ConfigError naming
/// the first stage whose output would be empty.
LayerShapes derive_shapes(const ArchConfig& config);

/// Nominal band and class counts of a preset's reference scene.
struct Preset {
  std::string name;
  ArchConfig config;
};

/// Built-in presets: ksc, ip, pu, sa.
const std::vector<Preset>& presets();

/// Looks up `ksc`, `ip`, `pu`, `sa`, or any of them with a `-like` suffix.
/// Returns nullopt for unknown names.
std::optional<Preset> find_preset(std::string_view name);

/// Resolves a preset against data: plain names require the data's band and
/// class counts to match the reference scene, `-like` names adopt them.
/// The result is not validated, so config overrides can still be layered on.
ArchConfig resolve_preset(std::string_view name, Index data_bands, Index data_classes);

std::string arch_to_json(const ArchConfig& config);
/// Fields missing from `text` keep the values in `base`.
ArchConfig arch_from_json(std::string_view text, ArchConfig base = {});

}  // namespace hsicnn
