#pragma once

#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dismax/checkpoint.hpp"
#include "dismax/data.hpp"
#include "dismax/evaluation.hpp"
#include "dismax/scoring.hpp"
#include "dismax/train.hpp"

namespace dismax::commands {

// Dataset refs of the form "cache:NAME" resolve inside DISMAX_CACHE_DIR
// (default ".dismax-cache"); anything else is a filesystem path.
std::string resolve_dataset_ref(const std::string& ref);

// Loads IDX images (labels path optional) or the JSON cache format,
// dispatching on extension with a content sniff as fallback.
Dataset load_any_dataset(const std::string& ref,
                         const std::string& labels_ref = "");

nlohmann::json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);
// Presets: "desk" (50 epochs, decay at 25/40) and "paper" (300 epochs,
// decay at 150/200/250).
void apply_preset(TrainConfig& c, const std::string& preset);

struct TrainCommand {
  TrainConfig config;
  std::string data_ref;
  std::string labels_ref;
  std::string out_checkpoint;
};

Checkpoint run_train(const TrainCommand& cmd, std::ostream& log);

// Per-example inference scores. For DisMax checkpoints the logits are
// logits+ with the entropic scale removed; for the baseline they are the
// plain classifier logits and distances are their negatives.
struct ScoredExample {
  std::vector<double> logits;
  std::vector<double> distances;
  Tensor probs;  // softmax(logits), T = 1
  int pred = 0;
  double mps = 0.0;
  double mds = 0.0;
  double mmles = 0.0;
  double entropy = 0.0;
};

ScoredExample score_example(const Checkpoint& ckpt, const Tensor& example);

struct EvaluateCommand {
  std::string checkpoint_path;
  std::string id_ref;
  std::string id_labels_ref;
  std::vector<std::pair<std::string, std::string>> ood_sets;  // name -> ref
  std::vector<std::string> score_kinds = {"mps", "mds", "mmles"};
  bool with_ece = false;
  std::string dump_path;
  std::string report_json_path;
};

DetectionReport run_evaluate(const EvaluateCommand& cmd, std::ostream& log);

struct CalibrateCommand {
  std::string checkpoint_path;
  std::string data_ref;
  std::string labels_ref;
  double val_fraction = 0.1;
  std::size_t bins = 15;
  std::string out_checkpoint;  // empty: rewrite in place
};

CalibrationResult run_calibrate(const CalibrateCommand& cmd, std::ostream& log);

struct ReportCommand {
  std::vector<std::string> dump_paths;
  std::string json_out;
};

std::vector<DetectionReport> run_report(const ReportCommand& cmd);

struct SynthCommand {
  std::string kind = "blobs";  // blobs | ood | images
  std::size_t n_classes = 10;
  std::size_t dim = 16;
  std::size_t n_per_class = 100;
  std::size_t n = 1000;
  std::size_t height = 28;
  std::size_t width = 28;
  double spread = 0.25;
  double offset = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t family = 0;
  bool drop_labels = false;
  std::string format = "json";  // json | idx
  std::string out;
};

void run_synth(const SynthCommand& cmd, std::ostream& log);

std::string render_report_text(const std::vector<DetectionReport>& reports);
nlohmann::json reports_to_json(const std::vector<DetectionReport>& reports);

}  // namespace dismax::commands
