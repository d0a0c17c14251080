#include "dismax/commands.hpp"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <iomanip>
#include <sstream>

#include "dismax/errors.hpp"
#include "dismax/io_util.hpp"
#include "dismax/kernels.hpp"
#include "dismax/numerics.hpp"
#include "dismax/rng.hpp"
#include "dismax/serialize_util.hpp"

namespace dismax::commands {

namespace {

constexpr std::uint64_t kCalibrationSplitStream = 0x63616c73706cull;

std::string path_stem(const std::string& path) {
  const std::size_t slash = path.find_last_of("/\\");
  std::string name = (slash == std::string::npos) ? path : path.substr(slash + 1);
  const std::size_t dot = name.find_last_of('.');
  return (dot == std::string::npos) ? name : name.substr(0, dot);
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void write_manifest(const std::string& artifact_path,
                    const std::string& command, const nlohmann::json& args,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& artifacts,
                    std::uint64_t seed) {
  nlohmann::json m;
  m["command"] = command;
  m["args"] = args;
  m["config_hash"] = fnv1a_hex(args.dump());
  m["seed"] = seed;
  m["inputs"] = inputs;
  m["artifacts"] = artifacts;
  m["kernel_backend"] = kernels::active().name;
  write_file_atomic(artifact_path + ".manifest.json", m.dump(2) + "\n");
}

Tensor flatten_example(const Tensor& example) {
  return example.rank() == 1 ? example : example.reshaped({example.size()});
}

}  // namespace

std::string resolve_dataset_ref(const std::string& ref) {
  const std::string prefix = "cache:";
  if (ref.rfind(prefix, 0) != 0) return ref;
  const char* dir = std::getenv("DISMAX_CACHE_DIR");
  const std::string base = (dir != nullptr && dir[0] != '\0')
                               ? std::string(dir)
                               : std::string(".dismax-cache");
  return base + "/" + ref.substr(prefix.size()) + ".json";
}

Dataset load_any_dataset(const std::string& ref,
                         const std::string& labels_ref) {
  const std::string path = resolve_dataset_ref(ref);
  if (!labels_ref.empty() || ends_with(path, ".idx")) {
    return load_idx(path, labels_ref.empty() ? std::string()
                                             : resolve_dataset_ref(labels_ref));
  }
  if (ends_with(path, ".json")) return load_dataset(path);
  const std::string head = read_file(path).substr(0, 1);
  if (head == "{") return load_dataset(path);
  return load_idx(path);
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  nlohmann::json j;
  j["loss"] = c.loss;
  j["n_classes"] = c.n_classes;
  j["layer_dims"] = c.layer_dims;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["lr"] = c.lr;
  j["momentum"] = c.momentum;
  j["weight_decay"] = c.weight_decay;
  j["lr_decay_epochs"] = c.lr_decay_epochs;
  j["lr_decay_factor"] = c.lr_decay_factor;
  j["entropic_scale"] = c.entropic_scale;
  j["alpha"] = c.alpha;
  j["seed"] = c.seed;
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    if (j.contains("preset")) apply_preset(c, j.at("preset").get<std::string>());
    c.loss = j.value("loss", c.loss);
    c.n_classes = j.value("n_classes", c.n_classes);
    c.layer_dims = j.value("layer_dims", c.layer_dims);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr = j.value("lr", c.lr);
    c.momentum = j.value("momentum", c.momentum);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.lr_decay_epochs = j.value("lr_decay_epochs", c.lr_decay_epochs);
    c.lr_decay_factor = j.value("lr_decay_factor", c.lr_decay_factor);
    c.entropic_scale = j.value("entropic_scale", c.entropic_scale);
    c.alpha = j.value("alpha", c.alpha);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw format_error(std::string("train config: ") + e.what());
  }
  return c;
}

void apply_preset(TrainConfig& c, const std::string& preset) {
  if (preset == "desk") {
    c.epochs = 50;
    c.lr_decay_epochs = {25, 40};
  } else if (preset == "paper") {
    c.epochs = 300;
    c.lr_decay_epochs = {150, 200, 250};
  } else {
    throw config_error("unknown preset '" + preset + "'");
  }
}

Checkpoint run_train(const TrainCommand& cmd, std::ostream& log) {
  if (cmd.out_checkpoint.empty()) {
    throw config_error("train: missing output checkpoint path");
  }
  Dataset data = load_any_dataset(cmd.data_ref, cmd.labels_ref);
  const nlohmann::json config_json = train_config_to_json(cmd.config);
  Checkpoint ckpt = train(cmd.config, data, &log);
  ckpt.config_hash = fnv1a_hex(config_json.dump());
  save_checkpoint(cmd.out_checkpoint, ckpt);
  std::vector<std::string> inputs = {resolve_dataset_ref(cmd.data_ref)};
  if (!cmd.labels_ref.empty()) inputs.push_back(resolve_dataset_ref(cmd.labels_ref));
  write_manifest(cmd.out_checkpoint, "train", config_json, inputs,
                 {cmd.out_checkpoint}, cmd.config.seed);
  return ckpt;
}

ScoredExample score_example(const Checkpoint& ckpt, const Tensor& example) {
  const Tensor features =
      forward_features(flatten_example(example), ckpt.extractor);
  const std::size_t n = ckpt.n_classes();
  ScoredExample out;
  Tensor logit_vec({n});
  Tensor dist_vec({n});
  if (ckpt.is_dismax()) {
    dist_vec = isometric_distances(features, ckpt.head);
    const LogitsPlus lp = logits_plus(dist_vec);
    logit_vec = lp.values;
    // Entropic scale removed, T = 1 for every score.
    out.probs = stable_softmax(lp.values, 1.0);
    out.mds = score_mds(dist_vec);
    out.mmles = score_mmles(lp, out.probs);
  } else {
    detail::matmul_accumulate(1, features.size(), n, features.data(),
                              ckpt.classifier_w.data(), logit_vec.data());
    kernels::active().add(n, logit_vec.data(), ckpt.classifier_b.data(),
                          logit_vec.data());
    // The baseline has no prototypes; negative logits stand in for
    // distances, making MDS the max-logit score.
    kernels::active().scale(n, -1.0, logit_vec.data(), dist_vec.data());
    out.probs = stable_softmax(logit_vec, 1.0);
    out.mds = score_mds(dist_vec);
    LogitsPlus lp;
    lp.values = logit_vec;
    lp.source_distances = dist_vec;
    out.mmles = score_mmles(lp, out.probs);
  }
  out.mps = score_mps(out.probs);
  out.entropy = entropy(out.probs);
  out.logits.assign(logit_vec.data(), logit_vec.data() + n);
  out.distances.assign(dist_vec.data(), dist_vec.data() + n);
  std::size_t arg = 0;
  for (std::size_t j = 1; j < n; ++j) {
    if (out.probs[j] > out.probs[arg]) arg = j;
  }
  out.pred = static_cast<int>(arg);
  return out;
}

namespace {

double kind_score(const ScoredExample& s, const std::string& kind) {
  if (kind == "mps") return s.mps;
  if (kind == "mds") return s.mds;
  if (kind == "mmles") return s.mmles;
  throw config_error("unknown score kind '" + kind + "'");
}

}  // namespace

DetectionReport run_evaluate(const EvaluateCommand& cmd, std::ostream& log) {
  const Checkpoint ckpt = load_checkpoint(cmd.checkpoint_path);
  Dataset id_test = load_any_dataset(cmd.id_ref, cmd.id_labels_ref);
  if (!id_test.has_labels()) {
    throw data_error("evaluate: ID test set needs labels for ACC");
  }
  for (std::size_t label : id_test.labels) {
    if (label >= ckpt.n_classes()) {
      throw config_error("evaluate: ID label out of range for checkpoint");
    }
  }
  if (id_test.flat_dim() != ckpt.extractor.input_dim()) {
    throw config_error("evaluate: ID input dim mismatch with checkpoint");
  }
  if (cmd.with_ece && !ckpt.calibration) {
    throw config_error(
        "evaluate: checkpoint has no calibrated temperature; run "
        "`dismax calibrate` first");
  }

  std::vector<ScoreRow> rows;
  std::vector<int> preds, trues;
  std::vector<double> confidences_numer;  // max softmax(logits / T*)
  std::vector<std::uint8_t> correct;
  std::vector<std::vector<double>> id_scores(cmd.score_kinds.size());
  const double t_star = ckpt.calibrated_temperature();

  for (std::size_t i = 0; i < id_test.size(); ++i) {
    const ScoredExample s = score_example(ckpt, id_test.examples[i]);
    ScoreRow row;
    row.split = "id";
    row.true_class = static_cast<int>(id_test.labels[i]);
    row.pred_class = s.pred;
    row.mps = s.mps;
    row.mds = s.mds;
    row.mmles = s.mmles;
    row.entropy = s.entropy;
    row.logits_plus = s.logits;
    rows.push_back(std::move(row));
    preds.push_back(s.pred);
    trues.push_back(static_cast<int>(id_test.labels[i]));
    for (std::size_t k = 0; k < cmd.score_kinds.size(); ++k) {
      id_scores[k].push_back(kind_score(s, cmd.score_kinds[k]));
    }
    if (cmd.with_ece) {
      const Tensor logits = Tensor::from_vector(s.logits);
      const Tensor p = stable_softmax(logits, 1.0 / t_star);
      confidences_numer.push_back(kernels::active().max(p.size(), p.data()));
      correct.push_back(s.pred == static_cast<int>(id_test.labels[i]) ? 1 : 0);
    }
  }

  DetectionReport report;
  report.method = ckpt.loss_kind;
  report.n_id = id_test.size();
  report.acc = accuracy(preds, trues);
  if (cmd.with_ece) {
    report.ece = ece(confidences_numer, correct, ckpt.calibration->bins);
  }
  for (const std::string& kind : cmd.score_kinds) {
    report.scores.push_back({kind, {}});
  }

  for (const auto& [set_name, ref] : cmd.ood_sets) {
    Dataset ood = load_any_dataset(ref);
    if (ood.flat_dim() != ckpt.extractor.input_dim()) {
      throw config_error("evaluate: OOD set '" + set_name +
                         "' input dim mismatch with checkpoint");
    }
    std::vector<std::vector<double>> ood_scores(cmd.score_kinds.size());
    for (std::size_t i = 0; i < ood.size(); ++i) {
      const ScoredExample s = score_example(ckpt, ood.examples[i]);
      ScoreRow row;
      row.split = set_name;
      row.true_class = -1;
      row.pred_class = s.pred;
      row.mps = s.mps;
      row.mds = s.mds;
      row.mmles = s.mmles;
      row.entropy = s.entropy;
      row.logits_plus = s.logits;
      rows.push_back(std::move(row));
      for (std::size_t k = 0; k < cmd.score_kinds.size(); ++k) {
        ood_scores[k].push_back(kind_score(s, cmd.score_kinds[k]));
      }
    }
    for (std::size_t k = 0; k < cmd.score_kinds.size(); ++k) {
      OodSetMetrics m;
      m.ood_set = set_name;
      m.n_ood = ood.size();
      m.auroc = auroc(id_scores[k], ood_scores[k]);
      m.aupr = aupr(id_scores[k], ood_scores[k]);
      m.tnr_at_tpr95 = tnr_at_tpr95(id_scores[k], ood_scores[k]);
      report.scores[k].per_set.push_back(std::move(m));
    }
  }

  if (!cmd.dump_path.empty()) {
    write_score_dump(cmd.dump_path, rows);
    report.method = path_stem(cmd.dump_path);
  }
  if (!cmd.report_json_path.empty()) {
    write_file_atomic(cmd.report_json_path,
                      reports_to_json({report}).dump(2) + "\n");
  }
  const std::string anchor =
      !cmd.dump_path.empty() ? cmd.dump_path : cmd.checkpoint_path;
  nlohmann::json args;
  args["checkpoint"] = cmd.checkpoint_path;
  args["id"] = cmd.id_ref;
  args["score_kinds"] = cmd.score_kinds;
  args["with_ece"] = cmd.with_ece;
  nlohmann::json ood_json = nlohmann::json::object();
  for (const auto& [name, ref] : cmd.ood_sets) ood_json[name] = ref;
  args["ood"] = ood_json;
  std::vector<std::string> artifacts;
  if (!cmd.dump_path.empty()) artifacts.push_back(cmd.dump_path);
  if (!cmd.report_json_path.empty()) artifacts.push_back(cmd.report_json_path);
  write_manifest(anchor, "evaluate", args, {cmd.checkpoint_path, cmd.id_ref},
                 artifacts, ckpt.seed);
  log << render_report_text({report});
  return report;
}

CalibrationResult run_calibrate(const CalibrateCommand& cmd,
                                std::ostream& log) {
  Checkpoint ckpt = load_checkpoint(cmd.checkpoint_path);
  Dataset data = load_any_dataset(cmd.data_ref, cmd.labels_ref);
  if (!data.has_labels()) throw data_error("calibrate: dataset has no labels");
  if (data.size() == 0) throw data_error("calibrate: empty dataset");
  if (cmd.val_fraction <= 0.0 || cmd.val_fraction > 1.0) {
    throw config_error("calibrate: val_fraction must be in (0, 1]");
  }

  // Seeded held-out split keyed on the checkpoint seed, so recalibration is
  // idempotent.
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng = Rng::fork(ckpt.seed, kCalibrationSplitStream);
  rng.shuffle(order);
  std::size_t n_val = static_cast<std::size_t>(
      cmd.val_fraction * static_cast<double>(data.size()));
  if (n_val < 1) n_val = 1;

  const std::size_t n_classes = ckpt.n_classes();
  Tensor logits({n_val, n_classes});
  std::vector<std::size_t> labels(n_val);
  for (std::size_t i = 0; i < n_val; ++i) {
    const std::size_t idx = order[i];
    const ScoredExample s = score_example(ckpt, data.examples[idx]);
    std::memcpy(logits.data() + i * n_classes, s.logits.data(),
                n_classes * sizeof(double));
    labels[i] = data.labels[idx];
  }

  const CalibrationResult result =
      calibrate_temperature(logits, labels, cmd.bins);
  ckpt.calibration = result;
  if (ckpt.is_dismax()) ckpt.head.temperature = result.t_star;
  const std::string out =
      cmd.out_checkpoint.empty() ? cmd.checkpoint_path : cmd.out_checkpoint;
  save_checkpoint(out, ckpt);

  nlohmann::json args;
  args["checkpoint"] = cmd.checkpoint_path;
  args["data"] = cmd.data_ref;
  args["val_fraction"] = cmd.val_fraction;
  args["bins"] = cmd.bins;
  write_manifest(out, "calibrate", args, {cmd.checkpoint_path, cmd.data_ref},
                 {out}, ckpt.seed);
  log << "calibrated T* = " << result.t_star << "  ECE " << result.ece_before
      << " -> " << result.ece_after << "  (" << result.evaluations
      << " evaluations, " << result.bins << " bins)\n";
  return result;
}

std::vector<DetectionReport> run_report(const ReportCommand& cmd) {
  if (cmd.dump_paths.empty()) throw config_error("report: no dump files");
  std::vector<DetectionReport> reports;
  for (const std::string& path : cmd.dump_paths) {
    const std::vector<ScoreRow> rows = read_score_dump(path);
    DetectionReport rep;
    rep.method = path_stem(path);

    std::vector<int> preds, trues;
    std::vector<std::string> set_order;
    struct SetScores {
      std::vector<double> mps, mds, mmles;
    };
    SetScores id;
    std::vector<std::pair<std::string, SetScores>> ood;
    for (const ScoreRow& r : rows) {
      if (r.split == "id") {
        id.mps.push_back(r.mps);
        id.mds.push_back(r.mds);
        id.mmles.push_back(r.mmles);
        preds.push_back(r.pred_class);
        trues.push_back(r.true_class);
      } else {
        auto it = std::find_if(ood.begin(), ood.end(),
                               [&](const auto& p) { return p.first == r.split; });
        if (it == ood.end()) {
          ood.push_back({r.split, {}});
          it = ood.end() - 1;
        }
        it->second.mps.push_back(r.mps);
        it->second.mds.push_back(r.mds);
        it->second.mmles.push_back(r.mmles);
      }
    }
    if (preds.empty()) throw data_error(path + ": dump has no id rows");
    rep.n_id = preds.size();
    rep.acc = accuracy(preds, trues);
    const std::vector<std::pair<std::string, const std::vector<double> SetScores::*>>
        kinds = {{"mps", &SetScores::mps},
                 {"mds", &SetScores::mds},
                 {"mmles", &SetScores::mmles}};
    for (const auto& [kind, member] : kinds) {
      ScoreKindReport skr;
      skr.score_kind = kind;
      for (const auto& [set_name, scores] : ood) {
        OodSetMetrics m;
        m.ood_set = set_name;
        m.n_ood = (scores.*member).size();
        m.auroc = auroc(id.*member, scores.*member);
        m.aupr = aupr(id.*member, scores.*member);
        m.tnr_at_tpr95 = tnr_at_tpr95(id.*member, scores.*member);
        skr.per_set.push_back(std::move(m));
      }
      rep.scores.push_back(std::move(skr));
    }
    reports.push_back(std::move(rep));
  }
  if (!cmd.json_out.empty()) {
    write_file_atomic(cmd.json_out, reports_to_json(reports).dump(2) + "\n");
  }
  return reports;
}

void run_synth(const SynthCommand& cmd, std::ostream& log) {
  if (cmd.out.empty()) throw config_error("synth: missing output path");
  Dataset ds;
  if (cmd.kind == "blobs") {
    ds = synth_blobs(cmd.n_classes, cmd.dim, cmd.n_per_class, cmd.spread,
                     cmd.seed);
  } else if (cmd.kind == "ood") {
    ds = synth_ood(cmd.dim, cmd.n, cmd.offset, cmd.seed);
  } else if (cmd.kind == "images") {
    ds = synth_images(cmd.n_classes, cmd.height, cmd.width, cmd.n_per_class,
                      cmd.seed, cmd.family);
  } else {
    throw config_error("synth: unknown kind '" + cmd.kind + "'");
  }
  if (cmd.drop_labels) ds.labels.clear();

  nlohmann::json args;
  args["kind"] = cmd.kind;
  args["seed"] = cmd.seed;
  args["format"] = cmd.format;
  std::vector<std::string> artifacts;
  if (cmd.format == "json") {
    const std::string path = resolve_dataset_ref(cmd.out);
    save_dataset(path, ds);
    artifacts = {path};
    write_manifest(path, "synth", args, {}, artifacts, cmd.seed);
    log << "wrote " << ds.size() << " examples to " << path << "\n";
  } else if (cmd.format == "idx") {
    if (cmd.kind != "images") {
      throw config_error("synth: idx format is only for images");
    }
    const std::string images_path = cmd.out + "-images.idx";
    const std::string labels_path =
        cmd.drop_labels ? std::string() : cmd.out + "-labels.idx";
    write_idx(images_path, labels_path, ds);
    artifacts = {images_path};
    if (!labels_path.empty()) artifacts.push_back(labels_path);
    write_manifest(images_path, "synth", args, {}, artifacts, cmd.seed);
    log << "wrote " << ds.size() << " images to " << images_path << "\n";
  } else {
    throw config_error("synth: unknown format '" + cmd.format + "'");
  }
}

std::string render_report_text(const std::vector<DetectionReport>& reports) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  for (const DetectionReport& rep : reports) {
    out << "method " << rep.method << "  (n_id " << rep.n_id << ")  ACC "
        << rep.acc;
    if (rep.ece) out << "  ECE " << *rep.ece;
    out << "\n";
    out << std::left << std::setw(22) << "  score";
    if (!rep.scores.empty()) {
      for (const OodSetMetrics& m : rep.scores.front().per_set) {
        out << std::setw(30) << (m.ood_set + " auroc/aupr/tnr95");
      }
    }
    out << "\n";
    for (const ScoreKindReport& skr : rep.scores) {
      out << std::left << std::setw(22) << ("  " + skr.score_kind);
      for (const OodSetMetrics& m : skr.per_set) {
        std::ostringstream cell;
        cell << std::fixed << std::setprecision(4) << m.auroc << " / "
             << m.aupr << " / " << m.tnr_at_tpr95;
        out << std::setw(30) << cell.str();
      }
      out << "\n";
    }
  }
  return out.str();
}

nlohmann::json reports_to_json(const std::vector<DetectionReport>& reports) {
  nlohmann::json arr = nlohmann::json::array();
  for (const DetectionReport& rep : reports) {
    nlohmann::json j;
    j["method"] = rep.method;
    j["n_id"] = rep.n_id;
    j["acc"] = rep.acc;
    if (rep.ece) j["ece"] = *rep.ece;
    nlohmann::json scores = nlohmann::json::array();
    for (const ScoreKindReport& skr : rep.scores) {
      nlohmann::json sj;
      sj["score_kind"] = skr.score_kind;
      nlohmann::json sets = nlohmann::json::array();
      for (const OodSetMetrics& m : skr.per_set) {
        sets.push_back({{"ood_set", m.ood_set},
                        {"n_ood", m.n_ood},
                        {"auroc", m.auroc},
                        {"aupr", m.aupr},
                        {"tnr_at_tpr95", m.tnr_at_tpr95}});
      }
      sj["per_set"] = std::move(sets);
      scores.push_back(std::move(sj));
    }
    j["scores"] = std::move(scores);
    arr.push_back(std::move(j));
  }
  return arr;
}

}  // namespace dismax::commands
