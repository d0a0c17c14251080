#include "dismax/fpr.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "dismax/errors.hpp"
#include "dismax/kernels.hpp"
#include "dismax/numerics.hpp"
#include "dismax/warnings.hpp"

namespace dismax {

namespace {

struct ImageDims {
  std::size_t h, w, c;
};

ImageDims image_dims(const Tensor& t, const char* op) {
  if (t.rank() == 2) return {t.dim(0), t.dim(1), 1};
  if (t.rank() == 3) return {t.dim(0), t.dim(1), t.dim(2)};
  throw shape_error(std::string(op) + ": expected rank 2 or 3 image, got " +
                    shape_to_string(t.shape()));
}

void check_distribution(const Tensor& p, const char* what) {
  if (p.rank() != 1 || p.size() == 0) {
    throw shape_error(std::string(what) + ": expected nonempty rank-1");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0)) {
      throw data_error(std::string(what) + ": negative or NaN entry");
    }
    total += p[i];
  }
  if (std::fabs(total - 1.0) > 1e-9) {
    throw data_error(std::string(what) + ": entries sum to " +
                     std::to_string(total) + ", not 1");
  }
}

}  // namespace

Tensor compose_mosaic(const Tensor& top_left, const Tensor& top_right,
                      const Tensor& bottom_left, const Tensor& bottom_right) {
  const ImageDims dims = image_dims(top_left, "compose_mosaic");
  const Tensor* imgs[4] = {&top_left, &top_right, &bottom_left, &bottom_right};
  for (const Tensor* img : imgs) {
    if (!img->same_shape(top_left)) {
      throw shape_error("compose_mosaic: source shapes differ: " +
                        shape_to_string(top_left.shape()) + " vs " +
                        shape_to_string(img->shape()));
    }
  }
  const std::size_t h_top = dims.h / 2;
  const std::size_t w_left = dims.w / 2;
  Tensor out(top_left.shape());
  const std::size_t row_stride = dims.w * dims.c;
  // Quadrant order: top-left, top-right, bottom-left, bottom-right.
  const struct {
    std::size_t r0, r1, c0, c1;
    const Tensor* src;
  } quads[4] = {
      {0, h_top, 0, w_left, imgs[0]},
      {0, h_top, w_left, dims.w, imgs[1]},
      {h_top, dims.h, 0, w_left, imgs[2]},
      {h_top, dims.h, w_left, dims.w, imgs[3]},
  };
  for (const auto& q : quads) {
    const std::size_t run = (q.c1 - q.c0) * dims.c;
    if (run == 0) continue;
    for (std::size_t r = q.r0; r < q.r1; ++r) {
      const std::size_t off = r * row_stride + q.c0 * dims.c;
      std::memcpy(out.data() + off, q.src->data() + off, run * sizeof(double));
    }
  }
  return out;
}

Tensor fpr_target(const std::array<std::size_t, 4>& source_labels,
                  std::size_t n_classes) {
  Tensor q({n_classes});
  for (std::size_t label : source_labels) {
    if (label >= n_classes) {
      throw data_error("fpr_target: label " + std::to_string(label) +
                       " out of range for " + std::to_string(n_classes) +
                       " classes");
    }
    q[label] += 0.25;
  }
  return q;
}

double kl_regularizer(const Tensor& predicted, const Tensor& target) {
  check_distribution(predicted, "kl_regularizer predicted");
  check_distribution(target, "kl_regularizer target");
  if (!predicted.same_shape(target)) {
    throw shape_error("kl_regularizer: shape mismatch");
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double q = target[i];
    if (q <= 0.0) continue;
    double p = predicted[i];
    if (p < kProbFloor) {
      p = kProbFloor;
      ++warnings::kl_floor_clamps();
    }
    kl += q * (std::log(q) - std::log(p));
  }
  return kl;
}

CompoundExample make_compound(const std::array<const Tensor*, 4>& images,
                              const std::array<std::size_t, 4>& labels,
                              std::size_t n_classes) {
  CompoundExample out;
  out.image = compose_mosaic(*images[0], *images[1], *images[2], *images[3]);
  out.source_labels = labels;
  out.target = fpr_target(labels, n_classes);
  return out;
}

double fpr_batch_loss(const std::vector<CompoundExample>& batch,
                      const FeatureExtractor& extractor,
                      const DisMaxHead& head, double alpha) {
  if (alpha < 0.0) throw config_error("fpr_batch_loss: alpha must be >= 0");
  if (batch.empty() || alpha == 0.0) return 0.0;
  double total = 0.0;
  for (const CompoundExample& ex : batch) {
    const Tensor flat = ex.image.reshaped({ex.image.size()});
    const Tensor features = forward_features(flat, extractor);
    const LogitsPlus lp = logits_plus(isometric_distances(features, head));
    const Tensor p = dismax_probabilities(lp, head.entropic_scale, 1.0);
    total += kl_regularizer(p, ex.target);
  }
  return alpha * (total / static_cast<double>(batch.size()));
}

Var fpr_batch_loss_graph(Tape& tape, const std::vector<CompoundExample>& batch,
                         const ExtractorVars& extractor_vars,
                         const HeadVars& head_vars, double entropic_scale,
                         double alpha) {
  if (alpha < 0.0) throw config_error("fpr_batch_loss: alpha must be >= 0");
  if (batch.empty()) return tape.constant(Tensor::scalar(0.0));
  const std::size_t n_classes = batch.front().target.size();
  const std::size_t flat_dim = batch.front().image.size();
  Tensor x({batch.size(), flat_dim});
  Tensor q({batch.size(), n_classes});
  Tensor q_entropy({batch.size()});
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const CompoundExample& ex = batch[b];
    std::memcpy(x.data() + b * flat_dim, ex.image.data(),
                flat_dim * sizeof(double));
    double ent = 0.0;
    for (std::size_t i = 0; i < n_classes; ++i) {
      const double qi = ex.target[i];
      q.at(b, i) = qi;
      if (qi > 0.0) ent += qi * std::log(qi);
    }
    q_entropy[b] = ent;  // sum of q log q (negated entropy)
  }
  Var features =
      forward_features(tape, tape.constant(std::move(x)), extractor_vars);
  Var logits = logits_plus_graph(tape, features, head_vars);
  Var probs = tape.softmax_rows(logits, entropic_scale);
  // The floor applies to every entry for log safety, but only clamps on the
  // target support are worth flagging (zero-target terms vanish anyway).
  const Tensor& pv = tape.value(probs);
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] > 0.0 && pv[i] < kProbFloor) ++warnings::kl_floor_clamps();
  }
  Var floored = tape.clamp_min(probs, kProbFloor);
  Var cross = tape.row_sum(tape.mul(tape.constant(std::move(q)),
                                    tape.log(floored)));
  Var kl_rows = tape.sub(tape.constant(std::move(q_entropy)), cross);
  return tape.scale(tape.mean(kl_rows), alpha);
}

}  // namespace dismax
