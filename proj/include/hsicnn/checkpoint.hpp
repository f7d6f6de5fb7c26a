#pragma once

// Checkpoint file layout (little-endian):
//   "HSNN" | u32 version | u32 config length | config JSON
//   | u64 iteration | u64 seed
//   | 10 x (u64 byte length | f32 values)   conv1 w,b  conv2 w,b  fc1 w,b  fc2 w,b  output w,b

#include <cstdint>
#include <string>
#include <vector>

#include "hsicnn/model.hpp"

namespace hsicnn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointData {
  ArchConfig config;
  std::uint64_t iteration = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<float>> blobs;  ///< weights and biases per layer, in layer order
};

std::vector<char> encode_checkpoint(const CheckpointData& data);
CheckpointData decode_checkpoint(const std::vector<char>& bytes);

template <typename Scalar>
CheckpointData to_checkpoint(const Model<Scalar>& model) {
  CheckpointData data{model.config, model.iteration, model.seed, {}};
  for (const auto* layer : model.params.layers()) {
    for (const auto* t : {&layer->weights, &layer->biases}) {
      const Vector<float> v = t->values().template cast<float>();
      data.blobs.emplace_back(v.data(), v.data() + v.size());
    }
  }
  return data;
}

template <typename Scalar>
Model<Scalar> from_checkpoint(const CheckpointData& data) {
  auto model = build_model<Scalar>(data.config, data.seed, Init::Zero);
  model.iteration = data.iteration;
  std::size_t b = 0;
  for (auto* layer : model.params.layers()) {
    for (auto* t : {&layer->weights, &layer->biases}) {
      const auto& blob = data.blobs.at(b++);
      t->values() = Eigen::Map<const Vector<float>>(blob.data(), static_cast<Index>(blob.size()))
                        .template cast<Scalar>();
    }
  }
  return model;
}

void write_checkpoint_file(const std::string& path, const CheckpointData& data);
CheckpointData read_checkpoint_file(const std::string& path);

template <typename Scalar>
void save_checkpoint(const Model<Scalar>& model, const std::string& path) {
  write_checkpoint_file(path, to_checkpoint(model));
}

template <typename Scalar = float>
Model<Scalar> load_checkpoint(const std::string& path) {
  return from_checkpoint<Scalar>(read_checkpoint_file(path));
}

}  // namespace hsicnn
