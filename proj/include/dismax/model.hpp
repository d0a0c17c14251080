#pragma once

#include <cstdint>
#include <vector>

#include "dismax/autodiff.hpp"
#include "dismax/tensor.hpp"

namespace dismax {

// Feedforward feature extractor: ReLU on hidden layers, identity on the
// feature layer. Weight i has shape (layer_dims[i] × layer_dims[i+1]).
struct FeatureExtractor {
  std::vector<std::size_t> layer_dims;
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;

  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t feature_dim() const { return layer_dims.back(); }
  std::size_t layer_count() const { return weights.size(); }
};

// Weights ~ N(0, 1/fan_in), biases zero; deterministic per seed.
FeatureExtractor init_extractor(const std::vector<std::size_t>& layer_dims,
                                std::uint64_t seed);

// Inference forward pass; x is rank 1 (input_dim) or rank 2 (B×input_dim).
// Bit-identical to the tape forward below.
Tensor forward_features(const Tensor& x, const FeatureExtractor& extractor);

// Extractor parameters registered on a tape.
struct ExtractorVars {
  std::vector<Var> weights;
  std::vector<Var> biases;
};

ExtractorVars extractor_inputs(Tape& tape, const FeatureExtractor& extractor,
                               bool trainable);

// Differentiable forward; x must be rank 2 (B×input_dim).
Var forward_features(Tape& tape, Var x, const ExtractorVars& vars);

}  // namespace dismax
