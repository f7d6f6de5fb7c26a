#include "hsicnn/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include <json.hpp>

#include "binary_io.hpp"
#include "hsicnn/errors.hpp"

namespace hsicnn {
namespace {

constexpr std::string_view kCubeMagic = "HSIC";
constexpr std::uint32_t kDtypeFloat32 = 0;

Index mirror(Index i, Index n) {
  if (n == 1) return 0;
  if (i < 0) return -i;
  if (i >= n) return 2 * (n - 1) - i;
  return i;
}

}  // namespace

HsiCube::HsiCube(Index w, Index h, Index b)
    : width(w), height(h), bands(b), values(static_cast<std::size_t>(w * h * b), 0.0f) {}

void HsiCube::validate() const {
  if (width < 1 || height < 1 || bands < 1) {
    throw FormatError("cube dimensions must be positive, got " + std::to_string(width) + "x" +
                      std::to_string(height) + "x" + std::to_string(bands));
  }
  if (values.size() != static_cast<std::size_t>(width * height * bands)) {
    throw FormatError("cube holds " + std::to_string(values.size()) + " values, dimensions imply " +
                      std::to_string(width * height * bands));
  }
  const auto bad = std::find_if(values.begin(), values.end(), [](float v) { return !std::isfinite(v); });
  if (bad != values.end()) {
    const auto i = static_cast<Index>(bad - values.begin());
    throw FormatError("cube value at pixel (" + std::to_string((i / bands) % width) + ", " +
                      std::to_string(i / bands / width) + "), band " + std::to_string(i % bands) +
                      " is not finite");
  }
}

void LabelRaster::validate() const {
  if (width < 1 || height < 1) throw FormatError("label raster dimensions must be positive");
  if (labels.size() != static_cast<std::size_t>(width * height)) {
    throw FormatError("label raster holds " + std::to_string(labels.size()) +
                      " pixels, dimensions imply " + std::to_string(width * height));
  }
  const int top = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
  if (top > declared_classes) {
    throw FormatError("label " + std::to_string(top) + " exceeds the declared class count " +
                      std::to_string(declared_classes));
  }
}

std::vector<char> encode_cube(const HsiCube& cube) {
  cube.validate();
  std::vector<char> out;
  out.reserve(24 + cube.values.size() * sizeof(float));
  io::put_bytes(out, kCubeMagic);
  io::put_le(out, kCubeVersion);
  io::put_le(out, static_cast<std::uint32_t>(cube.width));
  io::put_le(out, static_cast<std::uint32_t>(cube.height));
  io::put_le(out, static_cast<std::uint32_t>(cube.bands));
  io::put_le(out, kDtypeFloat32);
  std::vector<float> plane(static_cast<std::size_t>(cube.width * cube.height));
  for (Index b = 0; b < cube.bands; ++b) {
    for (Index y = 0; y < cube.height; ++y) {
      for (Index x = 0; x < cube.width; ++x) plane[static_cast<std::size_t>(y * cube.width + x)] = cube.at(x, y, b);
    }
    io::put_floats(out, plane);
  }
  return out;
}

HsiCube decode_cube(const std::vector<char>& bytes) {
  io::Reader in(bytes, "cube");
  if (in.remaining() < kCubeMagic.size() || in.get_bytes(kCubeMagic.size(), "magic") != kCubeMagic) {
    throw FormatError("cube: bad magic (expected \"HSIC\")");
  }
  const auto version = in.get_le<std::uint32_t>("version");
  if (version != kCubeVersion) throw FormatError("cube: unsupported version " + std::to_string(version));
  const Index width = in.get_le<std::uint32_t>("width");
  const Index height = in.get_le<std::uint32_t>("height");
  const Index bands = in.get_le<std::uint32_t>("bands");
  const auto dtype = in.get_le<std::uint32_t>("dtype");
  if (width == 0 || height == 0 || bands == 0) {
    throw FormatError("cube: header declares zero extent (" + std::to_string(width) + "x" +
                      std::to_string(height) + "x" + std::to_string(bands) + ")");
  }
  if (dtype != kDtypeFloat32) throw FormatError("cube: unsupported dtype code " + std::to_string(dtype));
  const std::size_t expected = static_cast<std::size_t>(width * height * bands) * sizeof(float);
  if (in.remaining() != expected) {
    throw FormatError("cube: payload is " + std::to_string(in.remaining()) + " bytes, header implies " +
                      std::to_string(expected));
  }
  HsiCube cube(width, height, bands);
  for (Index b = 0; b < bands; ++b) {
    const auto plane = in.get_floats(static_cast<std::size_t>(width * height), "band");
    for (Index y = 0; y < height; ++y) {
      for (Index x = 0; x < width; ++x) cube.at(x, y, b) = plane[static_cast<std::size_t>(y * width + x)];
    }
  }
  cube.validate();
  return cube;
}

void save_cube(const HsiCube& cube, const std::string& path) { io::write_file(path, encode_cube(cube)); }

HsiCube load_cube(const std::string& path) { return decode_cube(io::read_file(path)); }

void save_labels(const LabelRaster& labels, const std::string& path) {
  labels.validate();
  const std::string header = "P5\n" + std::to_string(labels.width) + " " + std::to_string(labels.height) +
                             "\n" + std::to_string(std::max(labels.declared_classes, 1)) + "\n";
  std::vector<char> out(header.begin(), header.end());
  out.insert(out.end(), labels.labels.begin(), labels.labels.end());
  io::write_file(path, out);
}

LabelRaster load_labels(const std::string& path) {
  const auto bytes = io::read_file(path);
  std::size_t pos = 0;
  auto token = [&](const char* field) {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    std::string t;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) t += bytes[pos++];
    if (t.empty()) throw FormatError("labels '" + path + "': missing PGM " + field);
    return t;
  };
  auto number = [&](const char* field) {
    const std::string t = token(field);
    if (!std::all_of(t.begin(), t.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      throw FormatError("labels '" + path + "': PGM " + field + " '" + t + "' is not a number");
    }
    return std::stol(t);
  };
  if (token("magic") != "P5") throw FormatError("labels '" + path + "': not a binary PGM (P5)");
  LabelRaster raster;
  raster.width = number("width");
  raster.height = number("height");
  const long maxval = number("maxval");
  if (maxval < 1 || maxval > 255) {
    throw FormatError("labels '" + path + "': maxval " + std::to_string(maxval) + " is not an 8-bit raster");
  }
  raster.declared_classes = static_cast<int>(maxval);
  ++pos;  // single whitespace after maxval
  const std::size_t expected = static_cast<std::size_t>(raster.width * raster.height);
  if (pos > bytes.size() || bytes.size() - pos != expected) {
    throw FormatError("labels '" + path + "': payload is " +
                      std::to_string(pos > bytes.size() ? 0 : bytes.size() - pos) +
                      " bytes, header implies " + std::to_string(expected));
  }
  raster.labels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
  raster.validate();
  return raster;
}

void require_aligned(const HsiCube& cube, const LabelRaster& labels) {
  if (cube.width != labels.width || cube.height != labels.height) {
    throw DimensionError("label raster " + std::to_string(labels.width) + "x" +
                         std::to_string(labels.height) + " does not match cube " +
                         std::to_string(cube.width) + "x" + std::to_string(cube.height));
  }
}

NormalizedCube normalize_cube(const HsiCube& cube) {
  const Index pixels = cube.width * cube.height;
  // Rows are pixels, columns are bands.
  const RowMatrix<double> data =
      Eigen::Map<const RowMatrix<float>>(cube.values.data(), pixels, cube.bands).cast<double>();
  const Eigen::RowVectorXd mean = data.colwise().mean();
  const Eigen::RowVectorXd sd =
      ((data.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(pixels)).sqrt();

  NormalizedCube out{cube, {}};
  const Eigen::RowVectorXd scale =
      (sd.array() < kStdEpsilon).select(0.0, sd.array().max(kStdEpsilon).inverse());
  Eigen::Map<RowMatrix<float>>(out.cube.values.data(), pixels, cube.bands) =
      ((data.rowwise() - mean).array().rowwise() * scale.array()).cast<float>();
  for (Index b = 0; b < cube.bands; ++b) out.stats.push_back({mean[b], sd[b]});
  return out;
}

template <typename Scalar>
Tensor<Scalar> extract_patch(const HsiCube& cube, Index x, Index y) {
  if (x < 0 || y < 0 || x >= cube.width || y >= cube.height) {
    throw RangeError("patch centre (" + std::to_string(x) + ", " + std::to_string(y) +
                     ") outside a " + std::to_string(cube.width) + "x" + std::to_string(cube.height) +
                     " scene");
  }
  Tensor<Scalar> patch({3, 3, cube.bands});
  for (Index r = 0; r < 3; ++r) {
    const Index sy = mirror(y + r - 1, cube.height);
    for (Index c = 0; c < 3; ++c) {
      const auto spectrum = cube.spectrum(mirror(x + c - 1, cube.width), sy);
      Scalar* dst = patch.data() + (r * 3 + c) * cube.bands;
      std::copy(spectrum.begin(), spectrum.end(), dst);
    }
  }
  return patch;
}

template Tensor<float> extract_patch<float>(const HsiCube&, Index, Index);
template Tensor<double> extract_patch<double>(const HsiCube&, Index, Index);

std::vector<Sample> SampleSet::select(std::span<const Index> indices) const {
  std::vector<Sample> out;
  out.reserve(indices.size());
  for (Index i : indices) out.push_back(samples.at(static_cast<std::size_t>(i)));
  return out;
}

SampleSet enumerate_samples(const LabelRaster& labels) {
  std::set<int> present(labels.labels.begin(), labels.labels.end());
  present.erase(0);
  if (present.empty()) throw DataError("label raster has no labeled pixels");
  SampleSet set;
  set.raw_labels.assign(present.begin(), present.end());
  std::map<int, Index> compact;
  for (std::size_t i = 0; i < set.raw_labels.size(); ++i) compact[set.raw_labels[i]] = static_cast<Index>(i);
  for (Index y = 0; y < labels.height; ++y) {
    for (Index x = 0; x < labels.width; ++x) {
      if (const int raw = labels.at(x, y); raw != 0) set.samples.push_back({x, y, compact[raw]});
    }
  }
  return set;
}

Index stratified_train_count(Index class_size, double ratio) {
  // Tolerance so products such as 0.29 * 100 floor to 29.
  const auto wanted = static_cast<Index>(std::floor(ratio * static_cast<double>(class_size) + 1e-9));
  return std::clamp<Index>(wanted, 1, class_size - 1);
}

SplitIndices stratified_split(const SampleSet& samples, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must lie in (0, 1), got " + std::to_string(ratio));
  std::vector<std::vector<Index>> by_class(static_cast<std::size_t>(samples.class_count()));
  for (std::size_t i = 0; i < samples.samples.size(); ++i) {
    by_class.at(static_cast<std::size_t>(samples.samples[i].label)).push_back(static_cast<Index>(i));
  }
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    if (by_class[c].size() < 2) {
      throw DataError("class " + std::to_string(samples.raw_labels[c]) + " has " +
                      std::to_string(by_class[c].size()) + " sample(s); stratified splitting needs at least 2");
    }
  }
  SplitIndices split{{}, {}, seed, ratio};
  std::mt19937_64 rng(seed);
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    const auto n_train = static_cast<std::ptrdiff_t>(stratified_train_count(static_cast<Index>(members.size()), ratio));
    split.train.insert(split.train.end(), members.begin(), members.begin() + n_train);
    split.test.insert(split.test.end(), members.begin() + n_train, members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

SyntheticScene synth_generate(const SynthConfig& config) {
  if (config.n_classes < 2 || config.n_classes > 255) {
    throw ConfigError("synthetic scene needs 2..255 classes, got " + std::to_string(config.n_classes));
  }
  if (config.bands < 1) throw ConfigError("synthetic scene needs at least one band");
  if (config.width < config.n_classes || config.height < 1) {
    throw ConfigError("synthetic scene of width " + std::to_string(config.width) +
                      " cannot hold one stripe per class (" + std::to_string(config.n_classes) + ")");
  }
  if (!(config.noise_std >= 0.0) || !std::isfinite(config.noise_std)) {
    throw ConfigError("noise_std must be finite and >= 0");
  }

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const auto bands = static_cast<std::size_t>(config.bands);

  // Sum of a few low-frequency sinusoids; redraw if too close to an earlier class.
  auto draw_signature = [&] {
    std::vector<double> s(bands, 1.0 + uniform(rng));
    for (int k = 0; k < 3; ++k) {
      const double amp = 0.3 + 0.7 * uniform(rng);
      const double freq = 0.5 + 2.5 * uniform(rng);
      const double phase = 2.0 * std::numbers::pi * uniform(rng);
      for (std::size_t b = 0; b < bands; ++b) {
        const double t = bands == 1 ? 0.0 : static_cast<double>(b) / static_cast<double>(bands - 1);
        s[b] += amp * std::sin(2.0 * std::numbers::pi * freq * t + phase);
      }
    }
    return s;
  };
  auto rms_distance = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0;
    for (std::size_t i = 0; i < bands; ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(d / static_cast<double>(bands));
  };
  std::vector<std::vector<double>> signatures;
  for (Index c = 0; c < config.n_classes; ++c) {
    auto s = draw_signature();
    for (int attempt = 0; attempt < 100; ++attempt) {
      const bool distinct = std::all_of(signatures.begin(), signatures.end(),
                                        [&](const auto& other) { return rms_distance(s, other) >= 0.3; });
      if (distinct) break;
      s = draw_signature();
    }
    signatures.push_back(std::move(s));
  }

  SyntheticScene scene{HsiCube(config.width, config.height, config.bands),
                       LabelRaster{config.width, config.height, static_cast<int>(config.n_classes),
                                   std::vector<std::uint8_t>(static_cast<std::size_t>(config.width * config.height))}};
  std::normal_distribution<double> noise(0.0, 1.0);
  for (Index y = 0; y < config.height; ++y) {
    for (Index x = 0; x < config.width; ++x) {
      const Index cls = x * config.n_classes / config.width;
      scene.labels.at(x, y) = static_cast<std::uint8_t>(cls + 1);
      const auto& sig = signatures[static_cast<std::size_t>(cls)];
      for (Index b = 0; b < config.bands; ++b) {
        const double n = config.noise_std > 0.0 ? config.noise_std * noise(rng) : 0.0;
        scene.cube.at(x, y, b) = static_cast<float>(sig[static_cast<std::size_t>(b)] + n);
      }
    }
  }
  return scene;
}

void save_manifest(const SplitManifest& m, const std::string& path) {
  nlohmann::json j;
  j["cube"] = m.cube_path;
  j["labels"] = m.labels_path;
  j["source_cube"] = m.source_cube_path;
  j["raw_labels"] = m.raw_labels;
  j["band_mean"] = nlohmann::json::array();
  j["band_std"] = nlohmann::json::array();
  for (const auto& s : m.band_stats) {
    j["band_mean"].push_back(s.mean);
    j["band_std"].push_back(s.std);
  }
  j["seed"] = m.split.seed;
  j["ratio"] = m.split.ratio;
  j["train"] = m.split.train;
  j["test"] = m.split.test;
  j["created"] = m.created;
  const std::string text = j.dump(1) + "\n";
  io::write_file(path, std::span<const char>(text.data(), text.size()));
}

SplitManifest load_manifest(const std::string& path) {
  const auto bytes = io::read_file(path);
  try {
    const auto j = nlohmann::json::parse(bytes.begin(), bytes.end());
    SplitManifest m;
    m.cube_path = j.at("cube").get<std::string>();
    m.labels_path = j.at("labels").get<std::string>();
    m.source_cube_path = j.value("source_cube", std::string());
    m.raw_labels = j.at("raw_labels").get<std::vector<int>>();
    const auto means = j.value("band_mean", std::vector<double>());
    const auto stds = j.value("band_std", std::vector<double>());
    if (means.size() != stds.size()) throw FormatError("manifest '" + path + "': band statistics disagree in length");
    for (std::size_t i = 0; i < means.size(); ++i) m.band_stats.push_back({means[i], stds[i]});
    m.split.seed = j.at("seed").get<std::uint64_t>();
    m.split.ratio = j.at("ratio").get<double>();
    m.split.train = j.at("train").get<std::vector<Index>>();
    m.split.test = j.at("test").get<std::vector<Index>>();
    m.created = j.value("created", std::string());
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest '" + path + "': " + e.what());
  }
}

}  // namespace hsicnn
