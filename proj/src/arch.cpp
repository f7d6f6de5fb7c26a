#include "hsicnn/arch.hpp"

#include <json.hpp>

#include "hsicnn/errors.hpp"
#include "hsicnn/layers.hpp"

namespace hsicnn {
namespace {

using nlohmann::json;

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

Index stage(Index input, Index kernel, Index stride, const char* name) {
  const Index out = valid_output_size(input, kernel, stride);
  require(out >= 1, std::string(name) + ": input extent " + std::to_string(input) +
                        " is smaller than kernel " + std::to_string(kernel));
  return out;
}

ArchConfig preset_config(Index bands, Index filters, Index classes) {
  ArchConfig c;
  c.n_bands = bands;
  c.n_1 = filters;
  c.n_classes = classes;
  return c;
}

#define HSICNN_ARCH_FIELDS(X) \
  X(n_bands) X(n_k1) X(s_1) X(n_1) X(s_2) X(conv2_kernels) X(pool_window) X(pool_stride) \
  X(n_3) X(n_4) X(n_classes)

}  // namespace

void ArchConfig::validate() const {
  require(n_k1 >= 1, "n_k1 must be >= 1");
  require(n_bands > n_k1, "n_bands (" + std::to_string(n_bands) + ") must exceed n_k1 (" +
                              std::to_string(n_k1) + ")");
  require(s_1 >= 1 && s_2 >= 1, "strides s_1 and s_2 must be >= 1");
  require(n_1 >= kConv2KernelSize, "n_1 must be >= 3 so Conv2 fits the reshaped width");
  require(conv2_kernels >= 1, "conv2_kernels must be >= 1");
  require(pool_window >= 1 && pool_stride >= 1, "pool window and stride must be >= 1");
  require(n_3 >= 1 && n_4 >= 1, "fully connected widths must be >= 1");
  require(n_classes >= 2, "n_classes must be >= 2");
  derive_shapes(*this);
}

LayerShapes derive_shapes(const ArchConfig& c) {
  require(c.n_k1 >= 1 && c.s_1 >= 1 && c.s_2 >= 1 && c.pool_window >= 1 && c.pool_stride >= 1,
          "kernel sizes and strides must be >= 1");
  LayerShapes s;
  s.conv1_length = stage(c.n_bands, c.n_k1, c.s_1, "conv1");
  s.reshape_rows = s.conv1_length;
  s.reshape_cols = c.n_1;
  s.conv2_rows = stage(s.reshape_rows, kConv2KernelSize, c.s_2, "conv2 rows");
  s.conv2_cols = stage(s.reshape_cols, kConv2KernelSize, c.s_2, "conv2 cols");
  s.conv2_channels = c.conv2_kernels;
  require(s.conv2_channels >= 1, "conv2: kernel count must be >= 1");
  s.pool_rows = stage(s.conv2_rows, c.pool_window, c.pool_stride, "pool rows");
  s.pool_cols = stage(s.conv2_cols, c.pool_window, c.pool_stride, "pool cols");
  s.pool_channels = s.conv2_channels;
  s.flatten = s.pool_rows * s.pool_cols * s.pool_channels;
  s.fc1 = c.n_3;
  s.fc2 = c.n_4;
  s.classes = c.n_classes;
  require(s.fc1 >= 1, "fc1: width must be >= 1");
  require(s.fc2 >= 1, "fc2: width must be >= 1");
  require(s.classes >= 1, "output: class count must be >= 1");
  return s;
}

const std::vector<Preset>& presets() {
  static const std::vector<Preset> table = {
      {"ksc", preset_config(176, 30, 13)},
      {"ip", preset_config(200, 60, 16)},
      {"pu", preset_config(103, 90, 9)},
      {"sa", preset_config(204, 60, 16)},
  };
  return table;
}

std::optional<Preset> find_preset(std::string_view name) {
  if (name.ends_with("-like")) name.remove_suffix(5);
  for (const auto& p : presets()) {
    if (p.name == name) return p;
  }
  return std::nullopt;
}

ArchConfig resolve_preset(std::string_view name, Index data_bands, Index data_classes) {
  const auto preset = find_preset(name);
  if (!preset) throw ConfigError("unknown preset '" + std::string(name) + "' (expected ksc, ip, pu, sa, optionally with -like)");
  ArchConfig config = preset->config;
  if (name.ends_with("-like")) {
    config.n_bands = data_bands;
    config.n_classes = data_classes;
  } else if (config.n_bands != data_bands || config.n_classes != data_classes) {
    throw ConfigError("preset '" + std::string(name) + "' expects " +
                      std::to_string(config.n_bands) + " bands and " +
                      std::to_string(config.n_classes) + " classes, data has " +
                      std::to_string(data_bands) + " and " + std::to_string(data_classes) +
                      " (use '" + std::string(name) + "-like' to adopt the data's counts)");
  }
  return config;
}

std::string arch_to_json(const ArchConfig& config) {
  json j;
#define X(field) j[#field] = config.field;
  HSICNN_ARCH_FIELDS(X)
#undef X
  return j.dump(2);
}

ArchConfig arch_from_json(std::string_view text, ArchConfig base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("architecture config is not valid JSON: ") + e.what());
  }
  const json& arch = j.contains("arch") ? j.at("arch") : j;
  try {
#define X(field) \
  if (arch.contains(#field)) base.field = arch.at(#field).get<Index>();
    HSICNN_ARCH_FIELDS(X)
#undef X
  } catch (const json::exception& e) {
    throw FormatError(std::string("architecture config field has the wrong type: ") + e.what());
  }
  return base;
}

}  // namespace hsicnn
