// hsicnn: command-line driver for synthetic data generation, dataset
// preparation, training, evaluation, map rendering, feature export and
// gradient checking.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hsicnn/checkpoint.hpp"
#include "hsicnn/data.hpp"
#include "hsicnn/evaluation.hpp"
#include "hsicnn/gradcheck.hpp"
#include "hsicnn/training.hpp"

namespace fs = std::filesystem;
using namespace hsicnn;

namespace {

std::string data_root() {
  const char* env = std::getenv("HSICNN_DATA_DIR");
  return env && *env ? env : ".";
}

std::string in_root(const std::string& name) { return (fs::path(data_root()) / name).string(); }

std::string or_default(const std::string& value, const std::string& name) {
  return value.empty() ? in_root(name) : value;
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

void require_file(const std::string& path, const char* what) {
  if (!fs::exists(path)) throw UsageError(std::string(what) + " '" + path + "' does not exist");
}

std::string read_text(const std::string& path) {
  require_file(path, "config file");
  std::ifstream in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out << text;
}

struct Options {
  std::string cube, labels, split, preset = "ksc-like", config, checkpoint, out, mode = "labeled-only";
  std::string layer = "fc2", subset = "test";
  std::uint64_t seed = 0;
  int threads = 1;
  Index iterations = 0, batch = 0, eval_every = 0, checkpoint_every = -1;
  double lr = 0, decay = -1, ratio = 0.8, noise = 0.1, step = 1e-5, tolerance = 1e-6;
  Index classes = 8, bands = 176, size = 64, width = 0, height = 0, runs = 10;
};

/// Everything the evaluation-side commands need from a prepared dataset.
struct Prepared {
  SplitManifest manifest;
  HsiCube cube;
  LabelRaster labels;
  SampleSet samples;
};

Prepared load_prepared(const std::string& manifest_path) {
  require_file(manifest_path, "split manifest");
  Prepared p;
  p.manifest = load_manifest(manifest_path);
  require_file(p.manifest.cube_path, "normalized cube");
  require_file(p.manifest.labels_path, "label raster");
  p.cube = load_cube(p.manifest.cube_path);
  p.labels = load_labels(p.manifest.labels_path);
  require_aligned(p.cube, p.labels);
  p.samples = enumerate_samples(p.labels);
  if (p.samples.raw_labels != p.manifest.raw_labels) {
    throw DataError("label raster classes no longer match the split manifest");
  }
  return p;
}

std::vector<Index> subset_indices(const Prepared& p, const std::string& subset) {
  if (subset == "train") return p.manifest.split.train;
  if (subset == "test") return p.manifest.split.test;
  if (subset == "all") {
    std::vector<Index> all(p.samples.samples.size());
    std::iota(all.begin(), all.end(), Index{0});
    return all;
  }
  throw UsageError("unknown subset '" + subset + "' (expected train, test or all)");
}

Model<float> load_model_for(const Prepared& p, const std::string& path) {
  require_file(path, "checkpoint");
  auto model = load_checkpoint<float>(path);
  if (model.config.n_bands != p.cube.bands) {
    throw DimensionError("checkpoint expects " + std::to_string(model.config.n_bands) +
                         " bands, cube has " + std::to_string(p.cube.bands));
  }
  if (model.config.n_classes != p.samples.class_count()) {
    throw DimensionError("checkpoint predicts " + std::to_string(model.config.n_classes) +
                         " classes, labels have " + std::to_string(p.samples.class_count()));
  }
  return model;
}

int cmd_synth(const Options& o) {
  SynthConfig config{o.classes, o.bands, o.width ? o.width : o.size, o.height ? o.height : o.size,
                     o.noise, o.seed};
  const auto scene = synth_generate(config);
  const auto cube = or_default(o.cube, "cube.hsic");
  const auto labels = or_default(o.labels, "labels.pgm");
  save_cube(scene.cube, cube);
  save_labels(scene.labels, labels);
  std::cout << "wrote " << cube << " (" << scene.cube.width << "x" << scene.cube.height << "x"
            << scene.cube.bands << ") and " << labels << "\n";
  return 0;
}

int cmd_prepare(const Options& o) {
  const auto cube_path = or_default(o.cube, "cube.hsic");
  const auto labels_path = or_default(o.labels, "labels.pgm");
  const auto manifest_path = or_default(o.out, "split.json");
  require_file(cube_path, "cube");
  require_file(labels_path, "label raster");
  const auto cube = load_cube(cube_path);
  const auto labels = load_labels(labels_path);
  require_aligned(cube, labels);

  const auto samples = enumerate_samples(labels);
  const auto split = stratified_split(samples, o.ratio, o.seed);
  const auto normalized = normalize_cube(cube);
  const auto normalized_path = (fs::path(manifest_path).parent_path() / "normalized.hsic").string();
  save_cube(normalized.cube, normalized_path);

  SplitManifest manifest{fs::absolute(normalized_path).string(), fs::absolute(labels_path).string(),
                         fs::absolute(cube_path).string(), samples.raw_labels, normalized.stats, split,
                         timestamp()};
  save_manifest(manifest, manifest_path);
  std::cout << samples.samples.size() << " labeled samples in " << samples.class_count() << " classes: "
            << split.train.size() << " train, " << split.test.size() << " test\n"
            << "wrote " << manifest_path << "\n";
  return 0;
}

int cmd_train(const Options& o) {
  const auto manifest_path = or_default(o.split, "split.json");
  const auto prepared = load_prepared(manifest_path);

  ArchConfig arch = resolve_preset(o.preset, prepared.cube.bands, prepared.samples.class_count());
  TrainConfig tc;
  if (!o.config.empty()) {
    const auto text = read_text(o.config);
    arch = arch_from_json(text, arch);
    tc = train_from_json(text, tc);
  }
  tc.seed = o.seed;
  tc.threads = o.threads;
  if (o.iterations) tc.max_iterations = o.iterations;
  if (o.batch) tc.batch_size = o.batch;
  if (o.lr > 0) tc.learning_rate = o.lr;
  if (o.decay >= 0) tc.decay = o.decay;
  if (o.eval_every) tc.eval_every = o.eval_every;
  if (o.checkpoint_every >= 0) tc.checkpoint_every = o.checkpoint_every;
  arch.validate();
  tc.validate();

  const auto checkpoint = or_default(o.checkpoint, "model.hsnn");
  const auto history_path = or_default(o.out, "history.csv");
  const auto train_set = prepared.samples.select(prepared.manifest.split.train);
  const auto test_set = prepared.samples.select(prepared.manifest.split.test);

  auto model = build_model<float>(arch, o.seed);
  std::cout << "parameters: " << model.params.count() << ", "
            << iterations_per_epoch(static_cast<Index>(train_set.size()), tc.batch_size)
            << " batches per epoch\n";
  const std::string started = timestamp();
  TrainCallbacks<float> callbacks;
  callbacks.on_record = [](const Model<float>&, const HistoryRecord& r) {
    std::cout << "iter " << r.iteration << "  loss " << std::fixed << std::setprecision(5) << r.loss
              << "  train_acc " << r.train_accuracy << "  test_acc " << r.test_accuracy << std::endl;
    return true;
  };
  callbacks.on_checkpoint = [&](const Model<float>& m) { save_checkpoint(m, checkpoint); };
  const auto history = train(model, prepared.cube, train_set, test_set, tc, callbacks);

  save_checkpoint(model, checkpoint);
  write_text(history_path, history.csv());

  nlohmann::json run;
  run["manifest"] = fs::absolute(manifest_path).string();
  run["cube"] = prepared.manifest.cube_path;
  run["labels"] = prepared.manifest.labels_path;
  run["checkpoint"] = fs::absolute(checkpoint).string();
  run["history"] = fs::absolute(history_path).string();
  run["preset"] = o.preset;
  run["arch"] = nlohmann::json::parse(arch_to_json(arch));
  run["train"] = nlohmann::json::parse(train_to_json(tc));
  run["seed"] = o.seed;
  run["started"] = started;
  run["finished"] = timestamp();
  write_text((fs::path(checkpoint).parent_path() / "run.json").string(), run.dump(2) + "\n");
  std::cout << "wrote " << checkpoint << " and " << history_path << "\n";
  return 0;
}

int cmd_eval(const Options& o) {
  const auto prepared = load_prepared(or_default(o.split, "split.json"));
  const auto model = load_model_for(prepared, or_default(o.checkpoint, "model.hsnn"));
  const auto indices = subset_indices(prepared, o.subset);
  const auto samples = prepared.samples.select(indices);
  const auto report = metrics_report(confusion_matrix(model, samples, prepared.cube, o.threads));
  std::cout << format_report(report, prepared.samples.raw_labels,
                             fs::path(prepared.manifest.source_cube_path).stem().string() + "/" + o.subset);
  if (!o.out.empty()) {
    std::ofstream out(o.out, std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + o.out + "' for writing");
    write_metrics_csv(out, report, prepared.samples.raw_labels);
  }
  return 0;
}

int cmd_map(const Options& o) {
  const auto prepared = load_prepared(or_default(o.split, "split.json"));
  const auto out = or_default(o.out, "map.ppm");
  RgbImage image;
  if (o.mode == "ground-truth") {
    image = render_labels(prepared.labels);
  } else {
    const auto model = load_model_for(prepared, or_default(o.checkpoint, "model.hsnn"));
    const auto mode = o.mode == "full" ? MapMode::Full : MapMode::LabeledOnly;
    image = render_map(model, prepared.cube, prepared.labels, prepared.samples.raw_labels, mode, o.threads);
  }
  write_ppm(image, out);
  std::cout << "wrote " << out << "\n";
  return 0;
}

int cmd_export(const Options& o) {
  const auto prepared = load_prepared(or_default(o.split, "split.json"));
  const auto model = load_model_for(prepared, or_default(o.checkpoint, "model.hsnn"));
  const auto indices = subset_indices(prepared, o.subset);
  const auto samples = prepared.samples.select(indices);
  const auto table = export_features(model, samples, prepared.cube, o.layer, indices, o.threads);
  const auto out = or_default(o.out, "features_" + o.layer + ".csv");
  std::ofstream file(out, std::ios::trunc);
  if (!file) throw FormatError("cannot open '" + out + "' for writing");
  table.write_csv(file);
  std::cout << "wrote " << table.values.rows() << " rows x " << table.values.cols() << " features to " << out << "\n";
  return 0;
}

int cmd_gradcheck(const Options& o) {
  bool passed = true;
  double worst = 0;
  for (Index r = 0; r < o.runs; ++r) {
    const auto seed = o.seed + static_cast<std::uint64_t>(r);
    const auto inst = make_tiny_instance(seed);
    auto report = grad_check(inst.model, inst.patch, inst.label, o.step, o.tolerance);
    report.entries.push_back(input_grad_check(inst.model, inst.patch, inst.label, o.step, o.tolerance));
    for (const auto& e : report.entries) {
      if (e.flagged) {
        std::cout << "seed " << seed << ": " << e.name << " max relative error " << e.max_relative_error
                  << " at index " << e.worst_index << "\n";
      }
    }
    worst = std::max(worst, report.max_relative_error());
    passed = passed && report.passed();
  }
  std::cout << "max relative error " << std::scientific << std::setprecision(3) << worst << " over "
            << o.runs << " run(s): " << (passed ? "PASS" : "FAIL") << "\n";
  return passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HSI-CNN hyperspectral classification toolkit"};
  app.require_subcommand(1);
  Options o;

  auto seed = [&](CLI::App* c) { c->add_option("--seed", o.seed, "Seed for every random choice"); };
  auto threads = [&](CLI::App* c) {
    c->add_option("--threads", o.threads, "Worker threads for per-sample work")->check(CLI::PositiveNumber);
  };

  auto* synth = app.add_subcommand("synth", "Generate a synthetic labeled scene");
  synth->add_option("--classes", o.classes, "Number of classes");
  synth->add_option("--bands", o.bands, "Spectral bands");
  synth->add_option("--size", o.size, "Square scene edge in pixels");
  synth->add_option("--width", o.width, "Scene width (overrides --size)");
  synth->add_option("--height", o.height, "Scene height (overrides --size)");
  synth->add_option("--noise", o.noise, "Gaussian noise standard deviation");
  synth->add_option("--cube", o.cube, "Output cube path");
  synth->add_option("--labels", o.labels, "Output label raster path");
  seed(synth);

  auto* prepare = app.add_subcommand("prepare", "Validate, normalize and split a dataset");
  prepare->add_option("--cube", o.cube, "Input cube (HSIC)");
  prepare->add_option("--labels", o.labels, "Input labels (P5 PGM)");
  prepare->add_option("--split", o.ratio, "Training fraction per class")->check(CLI::Range(0.0, 1.0));
  prepare->add_option("--out", o.out, "Split manifest path");
  seed(prepare);

  auto* train_cmd = app.add_subcommand("train", "Train a model on a prepared dataset");
  train_cmd->add_option("--split", o.split, "Split manifest path");
  train_cmd->add_option("--preset", o.preset, "ksc, ip, pu, sa (append -like to adopt data sizes)");
  train_cmd->add_option("--config", o.config, "JSON file with arch and/or train overrides");
  train_cmd->add_option("--checkpoint", o.checkpoint, "Output checkpoint path");
  train_cmd->add_option("--out", o.out, "Output history CSV path");
  train_cmd->add_option("--iterations", o.iterations, "Number of SGD iterations");
  train_cmd->add_option("--batch", o.batch, "Batch size");
  train_cmd->add_option("--lr", o.lr, "Initial learning rate");
  train_cmd->add_option("--decay", o.decay, "Inverse-time learning-rate decay per epoch");
  train_cmd->add_option("--eval-every", o.eval_every, "Iterations between history records");
  train_cmd->add_option("--checkpoint-every", o.checkpoint_every, "Iterations between checkpoints (0 = end only)");
  seed(train_cmd);
  threads(train_cmd);

  auto* eval = app.add_subcommand("eval", "Report OA, AA and per-class accuracy");
  eval->add_option("--split", o.split, "Split manifest path");
  eval->add_option("--checkpoint", o.checkpoint, "Checkpoint path");
  eval->add_option("--subset", o.subset, "train, test or all");
  eval->add_option("--out", o.out, "Optional metrics CSV path");
  threads(eval);

  auto* map = app.add_subcommand("map", "Render a classification map (PPM)");
  map->add_option("--split", o.split, "Split manifest path");
  map->add_option("--checkpoint", o.checkpoint, "Checkpoint path");
  map->add_option("--mode", o.mode, "full, labeled-only or ground-truth")
      ->check(CLI::IsMember({"full", "labeled-only", "ground-truth"}));
  map->add_option("--out", o.out, "Output PPM path");
  threads(map);

  auto* exp = app.add_subcommand("export-features", "Write FC1/FC2 activations as CSV");
  exp->add_option("--split", o.split, "Split manifest path");
  exp->add_option("--checkpoint", o.checkpoint, "Checkpoint path");
  exp->add_option("--layer", o.layer, "fc1 or fc2")->check(CLI::IsMember({"fc1", "fc2"}));
  exp->add_option("--subset", o.subset, "train, test or all");
  exp->add_option("--out", o.out, "Output CSV path");
  threads(exp);

  auto* gc = app.add_subcommand("gradcheck", "Check analytic gradients against finite differences");
  gc->add_option("--runs", o.runs, "Number of seeded tiny networks");
  gc->add_option("--step", o.step, "Central-difference step");
  gc->add_option("--tolerance", o.tolerance, "Maximum relative error");
  seed(gc);
  o.seed = 0;

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  if (gc->parsed() && gc->count("--seed") == 0) o.seed = 1;

  try {
    if (synth->parsed()) return cmd_synth(o);
    if (prepare->parsed()) return cmd_prepare(o);
    if (train_cmd->parsed()) return cmd_train(o);
    if (eval->parsed()) return cmd_eval(o);
    if (map->parsed()) return cmd_map(o);
    if (exp->parsed()) return cmd_export(o);
    if (gc->parsed()) return cmd_gradcheck(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
