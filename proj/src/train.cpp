#include "dismax/train.hpp"

#include <cmath>
#include <cstring>
#include <iomanip>
#include <string>

#include "dismax/errors.hpp"
#include "dismax/fpr.hpp"
#include "dismax/kernels.hpp"
#include "dismax/numerics.hpp"
#include "dismax/rng.hpp"
#include "dismax/warnings.hpp"

namespace dismax {

namespace {

constexpr std::uint64_t kShuffleStream = 0x73687566ull;
constexpr std::uint64_t kClassifierStream = 0x636c617373ull;

struct Param {
  Tensor value;
  Tensor velocity;
};

// PyTorch-style Nesterov step with weight decay folded into the gradient:
// g += wd*theta; v = mu*v + g; theta -= lr*(g + mu*v).
void sgd_step(Param& p, Tensor& grad_scratch, double lr, double momentum,
              double weight_decay) {
  const kernels::Table& K = kernels::active();
  const std::size_t n = p.value.size();
  double* g = grad_scratch.data();
  K.axpy(n, weight_decay, p.value.data(), g);
  K.scale(n, momentum, p.velocity.data(), p.velocity.data());
  K.add(n, p.velocity.data(), g, p.velocity.data());
  K.axpy(n, -lr, g, p.value.data());
  K.axpy(n, -lr * momentum, p.velocity.data(), p.value.data());
}

Tensor gather_rows(const Dataset& data, const std::vector<std::size_t>& order,
                   std::size_t begin, std::size_t count) {
  const std::size_t dim = data.flat_dim();
  Tensor out({count, dim});
  for (std::size_t i = 0; i < count; ++i) {
    const Tensor& ex = data.examples[order[begin + i]];
    std::memcpy(out.data() + i * dim, ex.data(), dim * sizeof(double));
  }
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (loss != "softmax-baseline" && loss != "dismax" && loss != "dismax-fpr") {
    throw config_error("train: unknown loss '" + loss + "'");
  }
  if (n_classes < 2) throw config_error("train: n_classes must be >= 2");
  if (layer_dims.size() < 2) {
    throw config_error("train: layer_dims needs input and feature dims");
  }
  if (batch_size < 1) throw config_error("train: batch_size must be >= 1");
  if (loss == "dismax-fpr" && batch_size % 2 != 0) {
    throw config_error("train: dismax-fpr needs an even batch_size");
  }
  if (lr <= 0.0) throw config_error("train: lr must be positive");
  if (momentum < 0.0 || momentum >= 1.0) {
    throw config_error("train: momentum must be in [0,1)");
  }
  if (weight_decay < 0.0) {
    throw config_error("train: weight_decay must be >= 0");
  }
  if (lr_decay_factor <= 0.0) {
    throw config_error("train: lr_decay_factor must be positive");
  }
  if (entropic_scale <= 0.0) {
    throw config_error("train: entropic_scale must be positive");
  }
  if (alpha < 0.0) throw config_error("train: alpha must be >= 0");
}

Checkpoint train(const TrainConfig& config, const Dataset& train_data,
                 std::ostream* log, std::vector<EpochStats>* stats) {
  config.validate();
  if (!train_data.has_labels()) {
    throw config_error("train: dataset has no labels");
  }
  if (train_data.size() == 0) throw config_error("train: empty dataset");
  if (train_data.flat_dim() != config.layer_dims.front()) {
    throw config_error("train: dataset dim " +
                       std::to_string(train_data.flat_dim()) +
                       " != input dim " +
                       std::to_string(config.layer_dims.front()));
  }
  for (std::size_t label : train_data.labels) {
    if (label >= config.n_classes) {
      throw config_error("train: label out of range for configured classes");
    }
  }

  const bool use_fpr = config.loss == "dismax-fpr";
  const bool is_dismax = config.loss != "softmax-baseline";
  const std::size_t feature_dim = config.layer_dims.back();

  Checkpoint ckpt;
  ckpt.loss_kind = config.loss;
  ckpt.seed = config.seed;
  ckpt.epochs = config.epochs;
  ckpt.extractor = init_extractor(config.layer_dims, config.seed);

  std::vector<Param> params;
  for (std::size_t l = 0; l < ckpt.extractor.layer_count(); ++l) {
    params.push_back({ckpt.extractor.weights[l],
                      Tensor(ckpt.extractor.weights[l].shape())});
    params.push_back(
        {ckpt.extractor.biases[l], Tensor(ckpt.extractor.biases[l].shape())});
  }
  const std::size_t head_param_base = params.size();
  if (is_dismax) {
    DisMaxHead head = init_head(config.n_classes, feature_dim,
                                config.entropic_scale, config.seed);
    params.push_back({head.prototypes, Tensor(head.prototypes.shape())});
    params.push_back(
        {Tensor::scalar(head.distance_scale), Tensor::scalar(0.0)});
    ckpt.head = std::move(head);
  } else {
    Rng rng = Rng::fork(config.seed, kClassifierStream);
    Tensor w({feature_dim, config.n_classes});
    const double sigma = 1.0 / std::sqrt(static_cast<double>(feature_dim));
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = sigma * rng.normal();
    params.push_back({std::move(w), Tensor({feature_dim, config.n_classes})});
    params.push_back({Tensor({config.n_classes}), Tensor({config.n_classes})});
  }

  std::vector<std::size_t> order(train_data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<Tensor> grad_scratch;
  for (const Param& p : params) grad_scratch.push_back(Tensor(p.value.shape()));

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng shuffle_rng = Rng::fork(config.seed, kShuffleStream ^ epoch);
    shuffle_rng.shuffle(order);
    double lr = config.lr;
    for (std::size_t decay_epoch : config.lr_decay_epochs) {
      if (epoch >= decay_epoch) lr /= config.lr_decay_factor;
    }

    double loss_sum = 0.0;
    std::size_t batches = 0;
    std::size_t acc_hits = 0;
    std::size_t acc_total = 0;

    for (std::size_t start = 0; start < train_data.size();
         start += config.batch_size) {
      const std::size_t b =
          std::min(config.batch_size, train_data.size() - start);

      // The dismax-fpr batch splits into a cross-entropy half and a half
      // consumed in groups of four as compound examples; leftovers fall
      // back to cross-entropy.
      std::size_t ce_count = b;
      std::size_t group_count = 0;
      if (use_fpr) {
        const std::size_t second = b / 2;
        group_count = second / 4;
        ce_count = b - group_count * 4;
      }

      Tape tape;
      ExtractorVars exvars;
      for (std::size_t l = 0; l < ckpt.extractor.layer_count(); ++l) {
        exvars.weights.push_back(tape.input(params[2 * l].value, true));
        exvars.biases.push_back(tape.input(params[2 * l + 1].value, true));
      }

      // Cross-entropy examples: the first half plus any leftover tail.
      std::vector<std::size_t> ce_labels(ce_count);
      const std::size_t first_count = b - (use_fpr ? b / 2 : 0);
      for (std::size_t i = 0; i < ce_count; ++i) {
        const std::size_t pos =
            (i < first_count) ? i : i + group_count * 4;  // skip compounds
        ce_labels[i] = train_data.labels[order[start + pos]];
      }
      Tensor x_ce({ce_count, train_data.flat_dim()});
      for (std::size_t i = 0; i < ce_count; ++i) {
        const std::size_t pos = (i < first_count) ? i : i + group_count * 4;
        const Tensor& ex = train_data.examples[order[start + pos]];
        std::memcpy(x_ce.data() + i * train_data.flat_dim(), ex.data(),
                    train_data.flat_dim() * sizeof(double));
      }

      Var features = forward_features(
          tape, tape.constant(std::move(x_ce)), exvars);
      Var probs;
      HeadVars headvars;
      Var cls_w, cls_b;
      if (is_dismax) {
        headvars.prototypes = tape.input(params[head_param_base].value, true);
        headvars.distance_scale =
            tape.input(params[head_param_base + 1].value, true);
        Var logits = logits_plus_graph(tape, features, headvars);
        probs = tape.softmax_rows(logits, config.entropic_scale);
      } else {
        cls_w = tape.input(params[head_param_base].value, true);
        cls_b = tape.input(params[head_param_base + 1].value, true);
        Var logits = tape.add_rowvec(tape.matmul(features, cls_w), cls_b);
        probs = tape.softmax_rows(logits, 1.0);
      }
      Var picked = tape.pick_per_row(probs, ce_labels);
      Var floored = tape.clamp_min(picked, kProbFloor,
                                   &warnings::probability_floor_clamps());
      Var loss = tape.mean(tape.neg(tape.log(floored)));

      if (use_fpr && group_count > 0) {
        std::vector<CompoundExample> compounds;
        compounds.reserve(group_count);
        const std::size_t dim = train_data.flat_dim();
        for (std::size_t g = 0; g < group_count; ++g) {
          std::array<Tensor, 4> imgs;
          std::array<const Tensor*, 4> img_ptrs{};
          std::array<std::size_t, 4> labels{};
          for (std::size_t k = 0; k < 4; ++k) {
            const std::size_t idx = order[start + first_count + g * 4 + k];
            const Tensor& ex = train_data.examples[idx];
            imgs[k] = (ex.rank() == 1) ? ex.reshaped({1, dim}) : ex;
            img_ptrs[k] = &imgs[k];
            labels[k] = train_data.labels[idx];
          }
          compounds.push_back(
              make_compound(img_ptrs, labels, config.n_classes));
        }
        Var kl = fpr_batch_loss_graph(tape, compounds, exvars, headvars,
                                      config.entropic_scale, config.alpha);
        loss = tape.add(loss, kl);
      }

      const double batch_loss = tape.value(loss)[0];
      if (!std::isfinite(batch_loss)) {
        throw numeric_error("train: non-finite loss at epoch " +
                            std::to_string(epoch));
      }
      loss_sum += batch_loss;
      ++batches;

      // Training accuracy over the cross-entropy examples only; compound
      // examples never enter the bookkeeping.
      const Tensor& pv = tape.value(probs);
      for (std::size_t i = 0; i < ce_count; ++i) {
        const double* row = pv.data() + i * config.n_classes;
        std::size_t arg = 0;
        for (std::size_t j = 1; j < config.n_classes; ++j) {
          if (row[j] > row[arg]) arg = j;
        }
        if (arg == ce_labels[i]) ++acc_hits;
      }
      acc_total += ce_count;

      tape.backward(loss);

      std::vector<Var> param_vars;
      for (std::size_t l = 0; l < ckpt.extractor.layer_count(); ++l) {
        param_vars.push_back(exvars.weights[l]);
        param_vars.push_back(exvars.biases[l]);
      }
      if (is_dismax) {
        param_vars.push_back(headvars.prototypes);
        param_vars.push_back(headvars.distance_scale);
      } else {
        param_vars.push_back(cls_w);
        param_vars.push_back(cls_b);
      }
      for (std::size_t p = 0; p < params.size(); ++p) {
        const Tensor& g = tape.grad(param_vars[p]);
        std::memcpy(grad_scratch[p].data(), g.data(),
                    g.size() * sizeof(double));
        sgd_step(params[p], grad_scratch[p], lr, config.momentum,
                 config.weight_decay);
      }
    }

    const double mean_loss =
        (batches > 0) ? loss_sum / static_cast<double>(batches) : 0.0;
    const double acc =
        (acc_total > 0)
            ? static_cast<double>(acc_hits) / static_cast<double>(acc_total)
            : 0.0;
    if (log != nullptr) {
      *log << "epoch " << epoch << "/" << config.epochs << "  loss "
           << std::fixed << std::setprecision(6) << mean_loss << "  acc "
           << std::setprecision(4) << acc << std::defaultfloat << "\n";
    }
    if (stats != nullptr) stats->push_back({epoch, mean_loss, acc});
  }

  for (std::size_t l = 0; l < ckpt.extractor.layer_count(); ++l) {
    ckpt.extractor.weights[l] = params[2 * l].value;
    ckpt.extractor.biases[l] = params[2 * l + 1].value;
  }
  if (is_dismax) {
    ckpt.head.prototypes = params[head_param_base].value;
    ckpt.head.distance_scale = params[head_param_base + 1].value[0];
    ckpt.head.entropic_scale = config.entropic_scale;
    ckpt.head.temperature = 1.0;
  } else {
    ckpt.classifier_w = params[head_param_base].value;
    ckpt.classifier_b = params[head_param_base + 1].value;
  }
  return ckpt;
}

}  // namespace dismax
