#include "hsicnn/evaluation.hpp"

#include <iomanip>
#include <ostream>
#include <sstream>

#include "binary_io.hpp"

namespace hsicnn {

ConfusionMatrix::ConfusionMatrix(Counts counts) : counts_(std::move(counts)) {
  if (counts_.rows() != counts_.cols()) throw DimensionError("confusion matrix must be square");
  if ((counts_.array() < 0).any()) throw DataError("confusion matrix counts must be non-negative");
}

void ConfusionMatrix::add(Index truth, Index predicted) {
  if (truth < 0 || truth >= classes() || predicted < 0 || predicted >= classes()) {
    throw RangeError("confusion matrix entry (" + std::to_string(truth) + ", " +
                     std::to_string(predicted) + ") outside " + std::to_string(classes()) + " classes");
  }
  ++counts_(truth, predicted);
}

double overall_accuracy(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw UsageError("overall accuracy of an empty confusion matrix");
  return static_cast<double>(cm.counts().trace()) / static_cast<double>(cm.total());
}

double average_accuracy(const ConfusionMatrix& cm) {
  const auto rows = cm.counts().rowwise().sum();
  double sum = 0;
  for (Index c = 0; c < cm.classes(); ++c) {
    if (rows(c) == 0) throw DataError("class " + std::to_string(c) + " has no samples; average accuracy undefined");
    sum += static_cast<double>(cm(c, c)) / static_cast<double>(rows(c));
  }
  return sum / static_cast<double>(cm.classes());
}

MetricsReport metrics_report(const ConfusionMatrix& cm) {
  MetricsReport r;
  r.total = cm.total();
  r.overall = overall_accuracy(cm);
  const auto rows = cm.counts().rowwise().sum();
  double sum = 0;
  Index present = 0;
  for (Index c = 0; c < cm.classes(); ++c) {
    r.support.push_back(rows(c));
    const double recall = rows(c) == 0 ? 0.0 : static_cast<double>(cm(c, c)) / static_cast<double>(rows(c));
    r.per_class.push_back(recall);
    if (rows(c) > 0) {
      sum += recall;
      ++present;
    }
  }
  // Classes absent from the evaluated set do not count toward AA.
  r.average = present ? sum / static_cast<double>(present) : 0.0;
  return r;
}

std::string format_report(const MetricsReport& report, std::span<const int> raw_labels,
                          const std::string& dataset) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << "Method    Dataset         OA       AA       Samples\n";
  out << "HSI-CNN   " << std::left << std::setw(14) << dataset << "  " << report.overall << "   "
      << report.average << "   " << report.total << "\n\n";
  out << "Class  Label  Samples  Recall\n";
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    out << std::right << std::setw(5) << c << "  " << std::setw(5)
        << (c < raw_labels.size() ? raw_labels[c] : static_cast<int>(c) + 1) << "  " << std::setw(7)
        << report.support[c] << "  " << report.per_class[c] << "\n";
  }
  return out.str();
}

void write_metrics_csv(std::ostream& out, const MetricsReport& report, std::span<const int> raw_labels) {
  out << std::setprecision(9);
  out << "metric,class,label,support,value\n";
  out << "OA,,," << report.total << ',' << report.overall << '\n';
  out << "AA,,," << report.total << ',' << report.average << '\n';
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    out << "recall," << c << ',' << (c < raw_labels.size() ? raw_labels[c] : static_cast<int>(c) + 1)
        << ',' << report.support[c] << ',' << report.per_class[c] << '\n';
  }
}

const std::array<Rgb, 16>& palette() {
  static const std::array<Rgb, 16> colors = {{
      {230, 25, 75},   {60, 180, 75},   {255, 225, 25},  {0, 130, 200},
      {245, 130, 48},  {145, 30, 180},  {70, 240, 240},  {240, 50, 230},
      {210, 245, 60},  {250, 190, 212}, {0, 128, 128},   {220, 190, 255},
      {170, 110, 40},  {255, 250, 200}, {128, 0, 0},     {170, 255, 195},
  }};
  return colors;
}

Rgb label_color(int raw_label) {
  if (raw_label <= 0) return {0, 0, 0};
  return palette()[static_cast<std::size_t>((raw_label - 1) % 16)];
}

RgbImage render_labels(const LabelRaster& labels) {
  RgbImage image{labels.width, labels.height, {}};
  image.pixels.reserve(labels.labels.size());
  for (auto l : labels.labels) image.pixels.push_back(label_color(l));
  return image;
}

std::vector<char> encode_ppm(const RgbImage& image) {
  const std::string header = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<char> out(header.begin(), header.end());
  for (const auto& p : image.pixels) out.insert(out.end(), p.begin(), p.end());
  return out;
}

void write_ppm(const RgbImage& image, const std::string& path) { io::write_file(path, encode_ppm(image)); }

void FeatureTable::write_csv(std::ostream& out) const {
  out << "sample,class";
  for (Index j = 0; j < values.cols(); ++j) out << ',' << layer << '_' << j;
  out << '\n' << std::setprecision(9);
  for (Index i = 0; i < values.rows(); ++i) {
    out << sample_ids[static_cast<std::size_t>(i)] << ',' << labels[static_cast<std::size_t>(i)];
    for (Index j = 0; j < values.cols(); ++j) out << ',' << values(i, j);
    out << '\n';
  }
}

}  // namespace hsicnn
