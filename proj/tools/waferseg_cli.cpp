// waferseg: generate synthetic wafer datasets, train and evaluate the
// segmentation network, and export visualization images.
//
// Subcommands: generate, train, eval, predict, xval, ablate. Every command
// accepts --config FILE (flat key=value text); explicit command-line flags win
// over the file, the file wins over built-in defaults, and the fully resolved
// configuration is echoed into the output directory for provenance.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "waferseg/binio.hpp"
#include "waferseg/checkpoint.hpp"
#include "waferseg/config.hpp"
#include "waferseg/crossval.hpp"
#include "waferseg/dataset_io.hpp"
#include "waferseg/image_io.hpp"
#include "waferseg/metrics.hpp"
#include "waferseg/training.hpp"

using namespace waferseg;
namespace fs = std::filesystem;

namespace {

// Bridges CLI11 options and the Settings precedence chain: every option is
// registered under a key; after parsing, flags the user actually passed are
// promoted to overrides, then typed getters read through Settings.
struct Bound {
  CLI::App* cmd;
  Settings settings;
  std::string configPath;
  std::map<std::string, std::string*> storage;

  explicit Bound(CLI::App* c) : cmd(c) {
    cmd->add_option("--config", configPath, "flat key=value config file");
  }

  CLI::Option* opt(const std::string& key, const std::string& def, const std::string& help) {
    settings.set_default(key, def);
    auto* slot = new std::string;  // lives as long as the process; CLI11 keeps the pointer
    storage[key] = slot;
    return cmd->add_option("--" + key, *slot, help + " [" + def + "]");
  }

  void resolve(const std::vector<std::string>& sets) {
    if (!configPath.empty()) settings.load_file(configPath);
    for (auto& [key, slot] : storage)
      if (cmd->count("--" + key) > 0) settings.set_override(key, *slot);
    settings.apply_overrides(sets);
  }
};

std::string require(const Settings& s, const std::string& key) {
  const std::string v = s.get_string(key, "");
  if (v.empty()) throw std::runtime_error("missing required option --" + key);
  return v;
}

void echo_config(const Settings& s, const std::string& outDir, const char* command) {
  fs::create_directories(outDir);
  binio::atomic_write(outDir + "/run_config.txt",
                      std::string("# waferseg ") + command + "\n" + s.resolved_text());
}

std::pair<int, int> parse_split(const std::string& s, int count) {
  const auto colon = s.find(':');
  if (colon == std::string::npos)
    throw CLI::ValidationError("--split", "expected TRAIN:VAL, e.g. 106:39");
  const int a = std::stoi(s.substr(0, colon)), b = std::stoi(s.substr(colon + 1));
  if (a < 0 || b < 0 || a + b != count)
    throw CLI::ValidationError("--split", "train+val must equal --count");
  return {a, b};
}

std::array<double, 3> parse_weights(const std::string& s) {
  if (s == "none" || s == "uniform") return {1, 1, 1};
  std::array<double, 3> w;
  std::istringstream is(s);
  char comma;
  if (!(is >> w[0] >> comma >> w[1] >> comma >> w[2]))
    throw CLI::ValidationError("--weights", "expected W0,W1,W2 or 'none'");
  return w;
}

std::vector<int> parse_angles(const std::string& s) {
  if (s.empty() || s == "none") return {};
  std::vector<int> out;
  std::istringstream is(s);
  std::string tok;
  while (std::getline(is, tok, ',')) out.push_back(std::stoi(tok));
  return out;
}

WaferGenConfig generator_from(const Settings& s) {
  WaferGenConfig g;
  g.height = int(s.get_int("height", g.height));
  g.width = int(s.get_int("width", g.width));
  g.discMarginFrac = s.get_double("disc-margin", g.discMarginFrac);
  g.brightnessField = brightness_field_from_string(
      s.get_string("brightness-field", to_string(g.brightnessField)));
  g.brightnessAmplitude = s.get_double("brightness-amplitude", g.brightnessAmplitude);
  g.markerCount = int(s.get_int("markers", g.markerCount));
  g.singleDefectRate = s.get_double("single-rate", g.singleDefectRate);
  g.linearDefectCount = int(s.get_int("linears", g.linearDefectCount));
  g.voidCount = int(s.get_int("voids", g.voidCount));
  g.clusterShape = cluster_shape_from_string(s.get_string("cluster-shape", to_string(g.clusterShape)));
  g.voidLabelInflation = s.get_double("void-inflation", g.voidLabelInflation);
  g.ultrasonicEmbedding = s.get_bool("embedding", g.ultrasonicEmbedding);
  g.noiseSigma = s.get_double("noise", g.noiseSigma);
  g.minDefectContrast = s.get_double("min-contrast", g.minDefectContrast);
  g.validate();
  return g;
}

ModelConfig model_from(const Settings& s) {
  ModelConfig mc;
  mc.variant = variant_from_string(s.get_string("variant", "vaughan"));
  mc.skipCount = int(s.get_int("skips", mc.variant == Variant::broomstick ? 4 : 5));
  mc.residualShortcuts = s.get_bool("shortcuts", true);
  mc.initMode = init_mode_from_string(s.get_string("init", "he"));
  mc.validate();
  return mc;
}

TrainConfig train_from(const Settings& s) {
  TrainConfig tc;
  tc.classWeights = parse_weights(s.get_string("weights", "100,100,2000"));
  tc.lr0 = s.get_double("lr", tc.lr0);
  tc.lrDecayPerEpoch = s.get_double("decay", tc.lrDecayPerEpoch);
  tc.weightDecay = s.get_double("weight-decay", tc.weightDecay);
  tc.epochs = int(s.get_int("epochs", tc.epochs));
  tc.batchSize = int(s.get_int("batch", tc.batchSize));
  tc.seed = s.get_u64("seed", 0);
  tc.maskBackgroundLoss = s.get_bool("mask-background", false);
  tc.evalEvery = int(s.get_int("eval-every", 1));
  tc.checkpointEvery = int(s.get_int("checkpoint-every", 0));
  tc.validate();
  return tc;
}

PreprocessConfig preprocess_from(const Settings& s) {
  PreprocessConfig pc;
  pc.rotations = parse_angles(s.get_string("rotations", "90,180,270"));
  pc.padToSquare = s.get_bool("pad-to-square", false);
  pc.validate();
  return pc;
}

std::vector<Preprocessed> preprocess_all(const std::vector<WaferSample>& in,
                                         const PreprocessConfig& pc) {
  std::vector<Preprocessed> out;
  out.reserve(in.size());
  for (const auto& s : in) out.push_back(preprocess(s, pc));
  return out;
}

void write_report(const std::string& path, double loss, const ConfusionMatrix& cm,
                  const MetricsReport& r) {
  std::ostringstream os;
  os.precision(6);
  os << "loss\t" << loss << "\n"
     << "pixel_accuracy\t" << r.pixelAccuracy << "\n"
     << "mean_pixel_accuracy\t" << r.meanPixelAccuracy << "\n"
     << "mean_iou\t" << r.meanIoU << "\n"
     << "defect_class_accuracy\t" << r.defectClassAccuracy << "\n"
     << "confusion_matrix (rows true class, columns predicted)\n";
  for (int j = 0; j < 3; ++j) {
    for (int i = 0; i < 3; ++i) os << cm.counts[j][i] << (i == 2 ? "\n" : "\t");
  }
  binio::atomic_write(path, os.str());
}

std::string metrics_cells(const MetricsReport& r) {
  std::ostringstream os;
  os.precision(6);
  os << r.pixelAccuracy << "\t" << r.meanPixelAccuracy << "\t" << r.meanIoU << "\t"
     << r.defectClassAccuracy;
  return os.str();
}

// ------------------------------------------------------------------ commands

int cmd_generate(Bound& b, const std::vector<std::string>& sets) {
  b.resolve(sets);
  const Settings& s = b.settings;
  const std::string out = s.get_string("out", default_output_root() + "/dataset");
  const int count = int(s.get_int("count", 145));
  std::string split = s.get_string("split", "");
  if (split.empty()) {
    const int t = (count * 106 + 72) / 145;  // the reference 106:39 ratio
    split = std::to_string(t) + ":" + std::to_string(count - t);
  }
  const auto [trainCount, valCount] = parse_split(split, count);
  (void)valCount;
  const double clusterFraction = s.get_double("cluster-fraction", 0.25);
  WaferGenConfig g = generator_from(s);
  Dataset ds = generate_dataset(g, count, clusterFraction, trainCount, s.get_u64("seed", 0));
  save_dataset(out, ds);
  echo_config(s, out, "generate");
  int clusters = 0;
  for (const auto& e : ds.entries) clusters += e.isCluster;
  std::cout << "wrote " << count << " wafers (" << clusters << " cluster, " << trainCount
            << " train) to " << out << "\n";
  return 0;
}

int cmd_train(Bound& b, const std::vector<std::string>& sets) {
  b.resolve(sets);
  const Settings& s = b.settings;
  const std::string dataDir = require(s, "data");
  const std::string out = s.get_string("out", default_output_root() + "/run");
  fs::create_directories(out);

  Dataset ds = load_dataset(dataDir);
  PreprocessConfig pc = preprocess_from(s);
  auto trainSet = preprocess_all(augment_rotations(split_of(ds, "train"), pc), pc);
  auto valSet = preprocess_all(split_of(ds, "val"), pc);
  if (trainSet.empty()) throw std::runtime_error("dataset at " + dataDir + " has no train split");

  TrainConfig tc = train_from(s);
  tc.checkpointDir = out;

  Model model = [&] {
    const std::string resume = s.get_string("resume", "");
    if (!resume.empty()) return model_from_checkpoint(load_checkpoint(resume));
    return Model::build(model_from(s), s.get_u64("seed", 0),
                        s.get_string("import-source", ""));
  }();

  echo_config(s, out, "train");
  std::ofstream history(out + "/history.tsv");
  history << history_header() << "\n";
  int startEpoch = 0;
  const AdamState* resumeOpt = nullptr;
  CheckpointData resumeData;
  if (!s.get_string("resume", "").empty()) {
    resumeData = load_checkpoint(s.get_string("resume"));
    startEpoch = int(resumeData.epoch);
    if (resumeData.has_optimizer) resumeOpt = &resumeData.optimizer;
  }
  TrainResult r = train(model, trainSet, valSet, tc,
                        [&](const HistoryRecord& rec, Model&) {
                          history << history_line(rec) << "\n";
                          history.flush();
                          std::cout << history_line(rec) << "\n";
                          return true;
                        },
                        resumeOpt, startEpoch);
  std::cout << "finished " << r.epochsRun << " epochs; checkpoints in " << out << "\n";
  return 0;
}

// Shared by eval and predict: model + optional ensemble prediction.
LabelMap predict_one(Model& model, const Tensor& image, const std::vector<int>& angles) {
  if (angles.empty() || angles == std::vector<int>{0}) {
    NoGradGuard ng;
    return predict_classes(model.forward(image, false)->value);
  }
  return ensemble_predict(model, image, angles);
}

int cmd_eval(Bound& b, const std::vector<std::string>& sets) {
  b.resolve(sets);
  const Settings& s = b.settings;
  const std::string out = s.get_string("out", default_output_root() + "/eval");
  fs::create_directories(out);
  Model model = model_from_checkpoint(load_checkpoint(require(s, "checkpoint")));
  Dataset ds = load_dataset(require(s, "data"));
  const std::string split = s.get_string("split", "val");
  auto wafers = split_of(ds, split);
  if (wafers.empty()) throw std::runtime_error("no wafers in split '" + split + "'");
  const auto angles = parse_angles(s.get_string("ensemble", "none"));
  PreprocessConfig pc;
  pc.rotations = {};

  TrainConfig tc = train_from(s);
  ConfusionMatrix cm;
  double loss = 0;
  for (size_t i = 0; i < wafers.size(); ++i) {
    Preprocessed p = preprocess(wafers[i], pc);
    NoGradGuard ng;
    Var probs = model.forward(p.image, false);
    loss += weighted_cross_entropy(probs, p.oneHot, tc.classWeights)->value[0];
    LabelMap pred = predict_one(model, p.image, angles);
    cm += confusion(pred, p.labels);
    const std::string stem = out + "/wafer_" + std::to_string(i);
    write_class_ppm(stem + "_pred.ppm", pred);
    write_class_ppm(stem + "_truth.ppm", p.labels);
    write_diff_ppm(stem + "_diff.ppm", pred, p.labels);
    write_pgm(stem + ".pgm", wafers[i].image, wafers[i].height, wafers[i].width);
  }
  loss /= double(wafers.size());
  MetricsReport r = metrics(cm);
  write_report(out + "/report.txt", loss, cm, r);
  echo_config(s, out, "eval");
  std::cout << "PA " << r.pixelAccuracy << "  MPA " << r.meanPixelAccuracy << "  mIoU "
            << r.meanIoU << "  DCA " << r.defectClassAccuracy << "\nreport in " << out << "\n";
  return 0;
}

int cmd_predict(Bound& b, const std::vector<std::string>& sets) {
  b.resolve(sets);
  const Settings& s = b.settings;
  const std::string out = s.get_string("out", default_output_root() + "/predict");
  fs::create_directories(out);
  Model model = model_from_checkpoint(load_checkpoint(require(s, "checkpoint")));
  WaferSample wafer = load_wafer(require(s, "input"));
  PreprocessConfig pc;
  pc.rotations = {};
  Preprocessed p = preprocess(wafer, pc);
  const auto angles = parse_angles(s.get_string("ensemble", "none"));
  LabelMap pred = predict_one(model, p.image, angles);
  write_class_ppm(out + "/prediction.ppm", pred);
  write_class_ppm(out + "/truth.ppm", p.labels);
  write_diff_ppm(out + "/diff.ppm", pred, p.labels);
  write_pgm(out + "/input.pgm", wafer.image, wafer.height, wafer.width);
  echo_config(s, out, "predict");
  MetricsReport r = metrics(confusion(pred, p.labels));
  std::cout << "PA " << r.pixelAccuracy << "  DCA " << r.defectClassAccuracy
            << "\nimages in " << out << "\n";
  return 0;
}

int cmd_xval(Bound& b, const std::vector<std::string>& sets) {
  b.resolve(sets);
  const Settings& s = b.settings;
  const std::string out = s.get_string("out", default_output_root() + "/xval");
  fs::create_directories(out);
  Dataset ds = load_dataset(require(s, "data"));
  const int folds = int(s.get_int("folds", 4));
  CrossValResult r = cross_validate(ds.samples, folds, s.get_bool("stratify", true),
                                    s.get_u64("seed", 0), model_from(s), train_from(s),
                                    preprocess_from(s));
  std::ostringstream os;
  os << "fold\tPA\tMPA\tmIoU\tDCA\tval_wafers\n";
  for (const auto& f : r.folds)
    os << f.fold << "\t" << metrics_cells(f.val) << "\t" << f.validationIndices.size() << "\n";
  os << "mean\t" << metrics_cells(r.mean) << "\t-\n";
  os << "stddev\t" << metrics_cells(r.stddev) << "\t-\n";
  binio::atomic_write(out + "/folds.tsv", os.str());
  for (const auto& f : r.folds)
    write_report(out + "/fold_" + std::to_string(f.fold) + ".txt", 0.0, f.cm, f.val);
  echo_config(s, out, "xval");
  std::cout << os.str() << "reports in " << out << "\n";
  return 0;
}

int cmd_ablate(Bound& b, const std::vector<std::string>& sets) {
  b.resolve(sets);
  const Settings& s = b.settings;
  const std::string out = s.get_string("out", default_output_root() + "/ablate");
  fs::create_directories(out);
  Dataset ds = load_dataset(require(s, "data"));
  PreprocessConfig pc = preprocess_from(s);
  auto trainSet = preprocess_all(augment_rotations(split_of(ds, "train"), pc), pc);
  auto valSet = preprocess_all(split_of(ds, "val"), pc);
  TrainConfig base = train_from(s);
  const uint64_t seed = s.get_u64("seed", 0);
  const std::string importSource = s.get_string("import-source", "");

  std::ostringstream table;
  table << "experiment\tvariant\tinit\tskips\tweights\tPA\tMPA\tmIoU\tDCA\tnote\n";
  auto run_row = [&](const std::string& exp, const ModelConfig& mc, const TrainConfig& tc,
                     const std::string& weightsLabel) {
    std::ostringstream row;
    row << exp << "\t" << to_string(mc.variant) << "\t" << to_string(mc.initMode) << "\t"
        << mc.skipCount << "\t" << weightsLabel << "\t";
    if (mc.initMode != InitMode::he && importSource.empty()) {
      row << "-\t-\t-\t-\tskipped: no import source";
      table << row.str() << "\n";
      std::cout << row.str() << "\n";
      return;
    }
    Model model = Model::build(mc, seed, importSource);
    TrainResult r = train(model, trainSet, valSet, tc);
    row << metrics_cells(r.history.back().val) << "\t-";
    table << row.str() << "\n";
    std::cout << row.str() << "\n";
  };

  // Initialization grid: variants x init modes.
  const std::string variantList = "," + s.get_string("variants", "standard,vaughan,broomstick") + ",";
  for (Variant v : {Variant::standard, Variant::vaughan, Variant::broomstick}) {
    if (variantList.find("," + to_string(v) + ",") == std::string::npos) continue;
    for (InitMode init : {InitMode::he, InitMode::import4, InitMode::import10}) {
      ModelConfig mc;
      mc.variant = v;
      mc.skipCount = v == Variant::broomstick ? 4 : 5;
      mc.initMode = init;
      run_row("init", mc, base, "100,100,2000");
    }
  }
  // Skip-connection ablation.
  for (int skips : {0, 3, 5}) {
    ModelConfig mc;
    mc.variant = Variant::vaughan;
    mc.skipCount = skips;
    run_row("skips", mc, base, "100,100,2000");
  }
  // Table 4 grid: defect-class weight values.
  for (const char* wv : {"none", "500", "2000", "15000"}) {
    ModelConfig mc;
    mc.variant = Variant::vaughan;
    TrainConfig tc = base;
    tc.classWeights = std::string(wv) == "none"
                          ? std::array<double, 3>{1, 1, 1}
                          : std::array<double, 3>{100, 100, std::stod(wv)};
    run_row("weights", mc, tc, wv);
  }
  binio::atomic_write(out + "/ablation.tsv", table.str());
  echo_config(s, out, "ablate");
  std::cout << "table in " << out << "/ablation.tsv\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"chip-wise wafer defect segmentation"};
  app.require_subcommand(1);

  struct Sub {
    Bound* bound;
    std::vector<std::string> sets;
    int (*fn)(Bound&, const std::vector<std::string>&);
  };
  std::vector<Sub> subs;
  subs.reserve(8);  // Bound/sets pointers are handed to CLI11; no reallocation allowed

  auto make = [&](const char* name, const char* desc,
                  int (*fn)(Bound&, const std::vector<std::string>&)) -> Bound& {
    CLI::App* c = app.add_subcommand(name, desc);
    auto* bound = new Bound(c);
    subs.push_back({bound, {}, fn});
    c->add_option("--set", subs.back().sets, "extra key=value override (repeatable)");
    return *bound;
  };

  {
    Bound& g = make("generate", "write a synthetic wafer dataset", cmd_generate);
    g.opt("out", default_output_root() + "/dataset", "output directory");
    g.opt("count", "145", "number of wafers");
    g.opt("split", "", "TRAIN:VAL counts (default ~106:39 ratio)");
    g.opt("cluster-fraction", "0.25", "fraction of wafers carrying a defect cluster");
    g.opt("seed", "0", "master seed");
    g.opt("height", "112", "grid height in chips");
    g.opt("width", "112", "grid width in chips");
    g.opt("voids", "2", "void defects per wafer");
    g.opt("linears", "2", "linear defects per wafer");
    g.opt("markers", "12", "orientation markers");
    g.opt("single-rate", "0.004", "per-chip single defect probability");
    g.opt("brightness-field", "radialGradient", "uniform|radialGradient|linearGradient|blotchy");
    g.opt("brightness-amplitude", "0.3", "brightness field amplitude");
    g.opt("cluster-shape", "blob", "blob|elongated|ring");
    g.opt("void-inflation", "1.6", "label/visible ellipse ratio for voids");
    g.opt("embedding", "0", "darken the full inflated void label region");
    g.opt("noise", "0.02", "additive gaussian noise sigma");
    g.opt("min-contrast", "0.12", "minimum defect-vs-local brightness gap");
    g.opt("disc-margin", "0.04", "disc margin as a fraction of the grid");
  }
  {
    Bound& t = make("train", "train a model on a generated dataset", cmd_train);
    t.opt("data", "", "dataset directory (required)");
    t.opt("out", default_output_root() + "/run", "output directory");
    t.opt("variant", "vaughan", "standard|vaughan|broomstick");
    t.opt("skips", "5", "number of skip connections");
    t.opt("shortcuts", "1", "residual shortcuts in deep encoder stacks");
    t.opt("init", "he", "he|import4|import10");
    t.opt("import-source", "", "checkpoint supplying imported encoder weights");
    t.opt("weights", "100,100,2000", "class weights W0,W1,W2 or 'none'");
    t.opt("lr", "0.0008", "initial learning rate");
    t.opt("decay", "0.97", "per-epoch exponential lr decay");
    t.opt("weight-decay", "0.0005", "L2 weight decay on conv weights");
    t.opt("epochs", "200", "training epochs");
    t.opt("batch", "1", "batch size (gradient accumulation)");
    t.opt("seed", "0", "global seed");
    t.opt("rotations", "90,180,270", "training rotation augmentation, or 'none'");
    t.opt("pad-to-square", "0", "pad non-square wafers before 90/270 rotations");
    t.opt("mask-background", "0", "zero the background class loss weight");
    t.opt("eval-every", "1", "validation cadence in epochs");
    t.opt("checkpoint-every", "0", "periodic checkpoint cadence (0: final only)");
    t.opt("resume", "", "resume from this checkpoint");
  }
  {
    Bound& e = make("eval", "evaluate a checkpoint on a dataset split", cmd_eval);
    e.opt("data", "", "dataset directory (required)");
    e.opt("checkpoint", "", "checkpoint path (required)");
    e.opt("out", default_output_root() + "/eval", "output directory");
    e.opt("split", "val", "dataset split to evaluate");
    e.opt("ensemble", "none", "rotation ensemble angles, e.g. 0,90,180,270");
    e.opt("weights", "100,100,2000", "class weights for the reported loss");
  }
  {
    Bound& p = make("predict", "segment a single wafer file", cmd_predict);
    p.opt("input", "", "wafer .wfr file (required)");
    p.opt("checkpoint", "", "checkpoint path (required)");
    p.opt("out", default_output_root() + "/predict", "output directory");
    p.opt("ensemble", "none", "rotation ensemble angles, e.g. 0,90,180,270");
  }
  {
    Bound& x = make("xval", "k-fold cross-validation on a dataset", cmd_xval);
    x.opt("data", "", "dataset directory (required)");
    x.opt("out", default_output_root() + "/xval", "output directory");
    x.opt("folds", "4", "number of folds");
    x.opt("stratify", "1", "balance cluster wafers across folds");
    x.opt("variant", "vaughan", "standard|vaughan|broomstick");
    x.opt("skips", "5", "number of skip connections");
    x.opt("weights", "100,100,2000", "class weights");
    x.opt("epochs", "200", "epochs per fold");
    x.opt("lr", "0.0008", "initial learning rate");
    x.opt("decay", "0.97", "per-epoch lr decay");
    x.opt("seed", "0", "master seed");
    x.opt("rotations", "90,180,270", "training rotation augmentation, or 'none'");
  }
  {
    Bound& a = make("ablate", "run the variant/skip/weight ablation grids", cmd_ablate);
    a.opt("data", "", "dataset directory (required)");
    a.opt("out", default_output_root() + "/ablate", "output directory");
    a.opt("import-source", "", "checkpoint for the import init modes (optional)");
    a.opt("epochs", "20", "epochs per grid cell");
    a.opt("lr", "0.0008", "initial learning rate");
    a.opt("seed", "0", "global seed");
    a.opt("rotations", "none", "training rotation augmentation");
    a.opt("variants", "standard,vaughan,broomstick",
          "variants to include in the init grid (comma list; the standard "
          "variant needs roughly 8 GB of RAM to train)");
  }

  CLI11_PARSE(app, argc, argv);
  for (auto& sub : subs)
    if (sub.bound->cmd->parsed()) {
      try {
        return sub.fn(*sub.bound, sub.sets);
      } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
      }
    }
  return 2;
}
