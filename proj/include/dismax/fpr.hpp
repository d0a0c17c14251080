#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "dismax/autodiff.hpp"
#include "dismax/head.hpp"
#include "dismax/model.hpp"
#include "dismax/tensor.hpp"

namespace dismax {

// 2x2 mosaic of four same-shape images (rank 2 H×W or rank 3 H×W×C). Each
// source contributes its own quadrant, cropped not resized; odd H or W split
// as floor for the top/left quadrants.
Tensor compose_mosaic(const Tensor& top_left, const Tensor& top_right,
                      const Tensor& bottom_left, const Tensor& bottom_right);

// Q[i] = (count of i among the four source labels) / 4.
Tensor fpr_target(const std::array<std::size_t, 4>& source_labels,
                  std::size_t n_classes);

// Divergence measured from the target: sum over Q[i] > 0 of
// Q[i] * (log Q[i] - log P[i]); P entries are floored at kProbFloor
// (counted in warnings) so zero-support targets stay finite.
double kl_regularizer(const Tensor& predicted, const Tensor& target);

// Mosaic image plus its fractional target distribution.
struct CompoundExample {
  Tensor image;
  std::array<std::size_t, 4> source_labels{};
  Tensor target;  // length N, sums to 1 exactly
};

CompoundExample make_compound(const std::array<const Tensor*, 4>& images,
                              const std::array<std::size_t, 4>& labels,
                              std::size_t n_classes);

// alpha * mean over the batch of KL(Q || P) with P = probabilities at E_s,
// T=1; returns 0 for an empty batch.
double fpr_batch_loss(const std::vector<CompoundExample>& batch,
                      const FeatureExtractor& extractor,
                      const DisMaxHead& head, double alpha);

// Differentiable form on an existing tape with registered parameters.
Var fpr_batch_loss_graph(Tape& tape, const std::vector<CompoundExample>& batch,
                         const ExtractorVars& extractor_vars,
                         const HeadVars& head_vars, double entropic_scale,
                         double alpha);

}  // namespace dismax
