#include "hsicnn/checkpoint.hpp"

#include "binary_io.hpp"

namespace hsicnn {
namespace {

constexpr std::string_view kMagic = "HSNN";

std::string blob_name(std::size_t index) {
  return std::string(kLayerNames[index / 2]) + (index % 2 ? ".biases" : ".weights");
}

}  // namespace

std::vector<char> encode_checkpoint(const CheckpointData& data) {
  const auto expected = zero_parameters<float>(data.config);
  if (data.blobs.size() != 2 * kLayerNames.size()) {
    throw UsageError("checkpoint: expected 10 parameter blobs, got " + std::to_string(data.blobs.size()));
  }
  std::vector<char> out;
  io::put_bytes(out, kMagic);
  io::put_le(out, kCheckpointVersion);
  const std::string config = arch_to_json(data.config);
  io::put_le(out, static_cast<std::uint32_t>(config.size()));
  io::put_bytes(out, config);
  io::put_le(out, data.iteration);
  io::put_le(out, data.seed);
  std::size_t b = 0;
  for (const auto* layer : expected.layers()) {
    for (const auto* t : {&layer->weights, &layer->biases}) {
      const auto& blob = data.blobs[b];
      if (static_cast<Index>(blob.size()) != t->size()) {
        throw UsageError("checkpoint: " + blob_name(b) + " has " + std::to_string(blob.size()) +
                         " values, config implies " + std::to_string(t->size()));
      }
      io::put_le(out, static_cast<std::uint64_t>(blob.size() * sizeof(float)));
      io::put_floats(out, blob);
      ++b;
    }
  }
  return out;
}

CheckpointData decode_checkpoint(const std::vector<char>& bytes) {
  io::Reader in(bytes, "checkpoint");
  if (in.remaining() < kMagic.size() || in.get_bytes(kMagic.size(), "magic") != kMagic) {
    throw FormatError("checkpoint: bad magic (expected \"HSNN\")");
  }
  const auto version = in.get_le<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  const auto config_len = in.get_le<std::uint32_t>("config length");
  CheckpointData data;
  data.config = arch_from_json(in.get_bytes(config_len, "config block"));
  data.config.validate();
  data.iteration = in.get_le<std::uint64_t>("iteration counter");
  data.seed = in.get_le<std::uint64_t>("seed");

  const auto expected = zero_parameters<float>(data.config);
  std::size_t b = 0;
  for (const auto* layer : expected.layers()) {
    for (const auto* t : {&layer->weights, &layer->biases}) {
      const std::string name = blob_name(b++);
      const std::uint64_t want = static_cast<std::uint64_t>(t->size()) * sizeof(float);
      const auto declared = in.get_le<std::uint64_t>(name + " length");
      if (declared != want) {
        throw FormatError("checkpoint: " + name + " declares " + std::to_string(declared) +
                          " bytes, config demands " + std::to_string(want));
      }
      data.blobs.push_back(in.get_floats(static_cast<std::size_t>(t->size()), name));
    }
  }
  if (in.remaining() != 0) {
    throw FormatError("checkpoint: " + std::to_string(in.remaining()) + " trailing bytes after the last blob");
  }
  return data;
}

void write_checkpoint_file(const std::string& path, const CheckpointData& data) {
  io::write_file(path, encode_checkpoint(data));
}

CheckpointData read_checkpoint_file(const std::string& path) {
  return decode_checkpoint(io::read_file(path));
}

}  // namespace hsicnn
