#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dismax/commands.hpp"
#include "dismax/errors.hpp"
#include "dismax/io_util.hpp"

namespace {

using dismax::TrainConfig;
using dismax::commands::CalibrateCommand;
using dismax::commands::EvaluateCommand;
using dismax::commands::ReportCommand;
using dismax::commands::SynthCommand;
using dismax::commands::TrainCommand;

int run(int argc, char** argv) {
  CLI::App app{
      "DisMax training, calibration, scoring and OOD evaluation pipeline"};
  app.require_subcommand(1);

  // ---- train ----
  TrainCommand train_cmd;
  std::string train_config_path;
  std::string train_preset;
  auto* train = app.add_subcommand("train", "Train a model");
  train->add_option("--config", train_config_path,
                    "JSON config file (flags override it)");
  train->add_option("--preset", train_preset, "desk | paper");
  auto* loss_opt = train->add_option("--loss", train_cmd.config.loss,
                                     "softmax-baseline | dismax | dismax-fpr");
  auto* classes_opt =
      train->add_option("--classes", train_cmd.config.n_classes);
  auto* dims_opt = train->add_option("--dims", train_cmd.config.layer_dims,
                                     "layer dims: input hidden... feature");
  auto* epochs_opt = train->add_option("--epochs", train_cmd.config.epochs);
  auto* batch_opt = train->add_option("--batch", train_cmd.config.batch_size);
  auto* lr_opt = train->add_option("--lr", train_cmd.config.lr);
  auto* momentum_opt =
      train->add_option("--momentum", train_cmd.config.momentum);
  auto* wd_opt =
      train->add_option("--weight-decay", train_cmd.config.weight_decay);
  auto* decay_epochs_opt = train->add_option(
      "--lr-decay-epochs", train_cmd.config.lr_decay_epochs);
  auto* decay_factor_opt = train->add_option(
      "--lr-decay-factor", train_cmd.config.lr_decay_factor);
  auto* es_opt = train->add_option("--entropic-scale",
                                   train_cmd.config.entropic_scale);
  auto* alpha_opt = train->add_option("--alpha", train_cmd.config.alpha);
  auto* seed_opt = train->add_option("--seed", train_cmd.config.seed);
  train->add_option("--data", train_cmd.data_ref, "dataset path or cache:NAME")
      ->required();
  train->add_option("--labels", train_cmd.labels_ref,
                    "IDX labels path (for IDX data)");
  train->add_option("--out", train_cmd.out_checkpoint, "checkpoint path")
      ->required();

  // ---- calibrate ----
  CalibrateCommand cal_cmd;
  auto* calibrate =
      app.add_subcommand("calibrate", "Temperature-calibrate a checkpoint");
  calibrate->add_option("--checkpoint", cal_cmd.checkpoint_path)->required();
  calibrate->add_option("--data", cal_cmd.data_ref)->required();
  calibrate->add_option("--labels", cal_cmd.labels_ref);
  calibrate->add_option("--val-fraction", cal_cmd.val_fraction);
  calibrate->add_option("--bins", cal_cmd.bins);
  calibrate->add_option("--out", cal_cmd.out_checkpoint,
                        "defaults to rewriting the input checkpoint");

  // ---- evaluate ----
  EvaluateCommand eval_cmd;
  std::vector<std::string> ood_specs;
  std::string kinds_csv;
  auto* evaluate = app.add_subcommand(
      "evaluate", "Score ID/OOD sets and compute detection metrics");
  evaluate->add_option("--checkpoint", eval_cmd.checkpoint_path)->required();
  evaluate->add_option("--id", eval_cmd.id_ref, "labeled ID test set")
      ->required();
  evaluate->add_option("--id-labels", eval_cmd.id_labels_ref);
  evaluate->add_option("--ood", ood_specs,
                       "OOD set as name=path (repeatable)");
  evaluate->add_option("--scores", kinds_csv,
                       "comma-separated subset of mps,mds,mmles");
  evaluate->add_flag("--ece", eval_cmd.with_ece,
                     "report ECE (needs a calibrated checkpoint)");
  evaluate->add_option("--dump", eval_cmd.dump_path, "score dump CSV path");
  evaluate->add_option("--report", eval_cmd.report_json_path,
                       "detection report JSON path");

  // ---- report ----
  ReportCommand report_cmd;
  auto* report =
      app.add_subcommand("report", "Render metric tables from score dumps");
  report->add_option("dumps", report_cmd.dump_paths, "score dump CSV files")
      ->required();
  report->add_option("--json", report_cmd.json_out, "JSON output path");

  // ---- synth ----
  SynthCommand synth_cmd;
  auto* synth = app.add_subcommand("synth", "Generate datasets");
  synth->add_option("--kind", synth_cmd.kind, "blobs | ood | images")
      ->required();
  synth->add_option("--classes", synth_cmd.n_classes);
  synth->add_option("--dim", synth_cmd.dim);
  synth->add_option("--per-class", synth_cmd.n_per_class);
  synth->add_option("--n", synth_cmd.n);
  synth->add_option("--height", synth_cmd.height);
  synth->add_option("--width", synth_cmd.width);
  synth->add_option("--spread", synth_cmd.spread);
  synth->add_option("--offset", synth_cmd.offset);
  synth->add_option("--seed", synth_cmd.seed);
  synth->add_option("--family", synth_cmd.family);
  synth->add_flag("--drop-labels", synth_cmd.drop_labels);
  synth->add_option("--format", synth_cmd.format, "json | idx");
  synth->add_option("--out", synth_cmd.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (train->parsed()) {
      if (!train_config_path.empty()) {
        nlohmann::json j;
        try {
          j = nlohmann::json::parse(dismax::read_file(train_config_path));
        } catch (const nlohmann::json::exception& e) {
          throw dismax::format_error(train_config_path + ": " + e.what());
        }
        // Flags explicitly given on the command line win over the file.
        TrainConfig merged = dismax::commands::train_config_from_json(j);
        if (loss_opt->count()) merged.loss = train_cmd.config.loss;
        if (classes_opt->count()) merged.n_classes = train_cmd.config.n_classes;
        if (dims_opt->count()) merged.layer_dims = train_cmd.config.layer_dims;
        if (epochs_opt->count()) merged.epochs = train_cmd.config.epochs;
        if (batch_opt->count()) merged.batch_size = train_cmd.config.batch_size;
        if (lr_opt->count()) merged.lr = train_cmd.config.lr;
        if (momentum_opt->count()) merged.momentum = train_cmd.config.momentum;
        if (wd_opt->count()) merged.weight_decay = train_cmd.config.weight_decay;
        if (decay_epochs_opt->count())
          merged.lr_decay_epochs = train_cmd.config.lr_decay_epochs;
        if (decay_factor_opt->count())
          merged.lr_decay_factor = train_cmd.config.lr_decay_factor;
        if (es_opt->count())
          merged.entropic_scale = train_cmd.config.entropic_scale;
        if (alpha_opt->count()) merged.alpha = train_cmd.config.alpha;
        if (seed_opt->count()) merged.seed = train_cmd.config.seed;
        train_cmd.config = merged;
      }
      if (!train_preset.empty()) {
        dismax::commands::apply_preset(train_cmd.config, train_preset);
      }
      dismax::commands::run_train(train_cmd, std::cout);
    } else if (calibrate->parsed()) {
      dismax::commands::run_calibrate(cal_cmd, std::cout);
    } else if (evaluate->parsed()) {
      for (const std::string& spec : ood_specs) {
        const std::size_t eq = spec.find('=');
        if (eq == std::string::npos || eq == 0) {
          throw dismax::config_error("evaluate: --ood expects name=path, got '" +
                                     spec + "'");
        }
        eval_cmd.ood_sets.push_back(
            {spec.substr(0, eq), spec.substr(eq + 1)});
      }
      if (!kinds_csv.empty()) {
        eval_cmd.score_kinds.clear();
        std::size_t pos = 0;
        while (pos <= kinds_csv.size()) {
          const std::size_t comma = kinds_csv.find(',', pos);
          const std::string kind =
              kinds_csv.substr(pos, comma == std::string::npos
                                        ? std::string::npos
                                        : comma - pos);
          if (!kind.empty()) eval_cmd.score_kinds.push_back(kind);
          if (comma == std::string::npos) break;
          pos = comma + 1;
        }
        if (eval_cmd.score_kinds.empty()) {
          throw dismax::config_error("evaluate: --scores parsed to nothing");
        }
      }
      dismax::commands::run_evaluate(eval_cmd, std::cout);
    } else if (report->parsed()) {
      const auto reports = dismax::commands::run_report(report_cmd);
      std::cout << dismax::commands::render_report_text(reports);
    } else if (synth->parsed()) {
      dismax::commands::run_synth(synth_cmd, std::cout);
    }
  } catch (const dismax::numeric_error& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 3;
  } catch (const dismax::format_error& e) {
    std::fprintf(stderr, "format error: %s\n", e.what());
    return 2;
  } catch (const dismax::data_error& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 2;
  } catch (const dismax::config_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const dismax::shape_error& e) {
    std::fprintf(stderr, "shape error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
