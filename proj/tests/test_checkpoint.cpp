#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>

#include "hsicnn/checkpoint.hpp"
#include "hsicnn/errors.hpp"
#include "test_support.hpp"

using namespace hsicnn;
namespace fs = std::filesystem;

namespace {

Model<float> small_model(std::uint64_t seed) {
  auto m = build_model<float>(resolve_preset("ip-like", 60, 5), seed);
  std::mt19937_64 rng(seed);
  for (auto* layer : m.params.layers()) {
    layer->biases = testing::random_tensor<float>(layer->biases.shape(), rng, 0.1);
  }
  m.params.output.weights = testing::random_tensor<float>(m.params.output.weights.shape(), rng, 0.1);
  m.iteration = 1234;
  return m;
}

std::string message_of(const std::vector<char>& bytes) {
  try {
    decode_checkpoint(bytes);
  } catch (const FormatError& e) {
    return e.what();
  }
  return "";
}

// Offset of the first blob's length field.
std::size_t first_blob_offset(const std::vector<char>& bytes) {
  std::uint32_t config_len = 0;
  std::memcpy(&config_len, bytes.data() + 8, 4);
  return 12 + config_len + 16;
}

}  // namespace

TEST_CASE("checkpoint round trip is bit exact") {
  const auto m = small_model(3);
  const auto path = (fs::temp_directory_path() / "hsicnn_ckpt_roundtrip.hsnn").string();
  save_checkpoint(m, path);
  const auto loaded = load_checkpoint(path);
  CHECK(loaded.config == m.config);
  CHECK(loaded.shapes == m.shapes);
  CHECK(loaded.seed == 3);
  CHECK(loaded.iteration == 1234);
  const auto a = m.params.layers();
  const auto b = loaded.params.layers();
  for (std::size_t l = 0; l < a.size(); ++l) {
    CHECK(std::memcmp(a[l]->weights.data(), b[l]->weights.data(), sizeof(float) * a[l]->weights.size()) == 0);
    CHECK(std::memcmp(a[l]->biases.data(), b[l]->biases.data(), sizeof(float) * a[l]->biases.size()) == 0);
  }

  std::mt19937_64 rng(1);
  const auto patch = testing::random_tensor<float>({3, 3, 60}, rng);
  CHECK(forward(m, patch).probs == forward(loaded, patch).probs);

  // saving what was loaded reproduces the file byte for byte
  CHECK(encode_checkpoint(to_checkpoint(loaded)) == encode_checkpoint(to_checkpoint(m)));
  fs::remove(path);
}

TEST_CASE("layout starts with magic, version and config block") {
  const auto bytes = encode_checkpoint(to_checkpoint(small_model(1)));
  CHECK(std::string(bytes.data(), 4) == "HSNN");
  std::uint32_t version = 0;
  std::memcpy(&version, bytes.data() + 4, 4);
  CHECK(version == 1);
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + first_blob_offset(bytes), 8);
  CHECK(len == 60 * 9 * 24 * sizeof(float));
}

TEST_CASE("malformed checkpoints are rejected") {
  const auto good = encode_checkpoint(to_checkpoint(small_model(2)));

  SUBCASE("bad magic") {
    auto bytes = good;
    bytes[0] = 'X';
    CHECK(message_of(bytes).find("magic") != std::string::npos);
  }
  SUBCASE("unsupported version") {
    auto bytes = good;
    bytes[4] = 9;
    CHECK(message_of(bytes).find("version 9") != std::string::npos);
  }
  SUBCASE("truncated blob reports expected and actual byte counts") {
    auto bytes = good;
    bytes.resize(bytes.size() - 10);
    const auto msg = message_of(bytes);
    CHECK(msg.find("truncated") != std::string::npos);
    CHECK(msg.find("expected 20 bytes, got 10") != std::string::npos);  // output biases: 5 floats
  }
  SUBCASE("declared blob length disagrees with the config") {
    auto bytes = good;
    const std::uint64_t wrong = 4;
    std::memcpy(bytes.data() + first_blob_offset(bytes), &wrong, 8);
    const auto msg = message_of(bytes);
    CHECK(msg.find("declares 4 bytes") != std::string::npos);
  }
  SUBCASE("invalid embedded config is rejected before blobs") {
    auto data = to_checkpoint(small_model(2));
    auto bytes = encode_checkpoint(data);
    // rewrite n_1 in the JSON to a value that fails validation
    std::string text(bytes.begin(), bytes.end());
    const auto at = text.find("\"n_1\": 60");
    REQUIRE(at != std::string::npos);
    text.replace(at, 9, "\"n_1\":  1");
    CHECK_THROWS_AS(decode_checkpoint(std::vector<char>(text.begin(), text.end())), ConfigError);
  }
  SUBCASE("trailing bytes") {
    auto bytes = good;
    bytes.push_back(0);
    CHECK(message_of(bytes).find("trailing") != std::string::npos);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/model.hsnn"), FormatError);
  }
}
