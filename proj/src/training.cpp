#include "hsicnn/training.hpp"

#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace hsicnn {
namespace {

#define HSICNN_TRAIN_FIELDS(X) \
  X(learning_rate) X(decay) X(batch_size) X(max_iterations) X(seed) X(checkpoint_every) \
  X(eval_every) X(threads)

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be > 0");
  if (!(decay >= 0.0) || !std::isfinite(decay)) throw ConfigError("decay must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

std::string train_to_json(const TrainConfig& config) {
  nlohmann::json j;
#define X(field) j[#field] = config.field;
  HSICNN_TRAIN_FIELDS(X)
#undef X
  return j.dump(2);
}

TrainConfig train_from_json(std::string_view text, TrainConfig base) {
  try {
    const auto j = nlohmann::json::parse(text);
    const auto& t = j.contains("train") ? j.at("train") : j;
#define X(field) \
  if (t.contains(#field)) base.field = t.at(#field).get<decltype(base.field)>();
    HSICNN_TRAIN_FIELDS(X)
#undef X
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("training config: ") + e.what());
  }
  return base;
}

double lr_at(const TrainConfig& config, Index epoch) {
  return config.learning_rate / (1.0 + config.decay * static_cast<double>(epoch));
}

void TrainHistory::write_csv(std::ostream& out) const {
  out << "iteration,loss,train_acc,test_acc\n";
  out << std::setprecision(9);
  for (const auto& r : records) {
    out << r.iteration << ',' << r.loss << ',' << r.train_accuracy << ',';
    if (std::isnan(r.test_accuracy)) {
      out << "nan";
    } else {
      out << r.test_accuracy;
    }
    out << '\n';
  }
}

std::string TrainHistory::csv() const {
  std::ostringstream out;
  write_csv(out);
  return out.str();
}

}  // namespace hsicnn
