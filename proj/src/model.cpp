#include "dismax/model.hpp"

#include <cmath>
#include <string>

#include "dismax/errors.hpp"
#include "dismax/kernels.hpp"
#include "dismax/numerics.hpp"
#include "dismax/rng.hpp"

namespace dismax {

namespace {
constexpr std::uint64_t kExtractorStream = 0x657874726163ull;
}

FeatureExtractor init_extractor(const std::vector<std::size_t>& layer_dims,
                                std::uint64_t seed) {
  if (layer_dims.size() < 2) {
    throw config_error("init_extractor: need at least input and feature dims");
  }
  for (std::size_t d : layer_dims) {
    if (d < 1) throw config_error("init_extractor: layer dim < 1");
  }
  if (layer_dims.back() < 2) {
    throw config_error("init_extractor: feature_dim must be >= 2");
  }
  FeatureExtractor ex;
  ex.layer_dims = layer_dims;
  Rng rng = Rng::fork(seed, kExtractorStream);
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const std::size_t fan_in = layer_dims[l];
    const std::size_t fan_out = layer_dims[l + 1];
    const double sigma = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor w({fan_in, fan_out});
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = sigma * rng.normal();
    ex.weights.push_back(std::move(w));
    ex.biases.push_back(Tensor({fan_out}));
  }
  return ex;
}

Tensor forward_features(const Tensor& x, const FeatureExtractor& extractor) {
  const bool single = x.rank() == 1;
  if (x.rank() != 1 && x.rank() != 2) {
    throw shape_error("forward_features: expected rank 1 or 2, got " +
                      shape_to_string(x.shape()));
  }
  const std::size_t in = single ? x.dim(0) : x.dim(1);
  if (in != extractor.input_dim()) {
    throw shape_error("forward_features: input dim " + std::to_string(in) +
                      " != extractor input dim " +
                      std::to_string(extractor.input_dim()));
  }
  const std::size_t batch = single ? 1 : x.dim(0);
  const kernels::Table& K = kernels::active();
  Tensor h = single ? x.reshaped({1, in}) : x;
  for (std::size_t l = 0; l < extractor.layer_count(); ++l) {
    const Tensor& w = extractor.weights[l];
    const Tensor& b = extractor.biases[l];
    const std::size_t n = w.dim(1);
    Tensor next({batch, n});
    detail::matmul_accumulate(batch, w.dim(0), n, h.data(), w.data(),
                              next.data());
    for (std::size_t r = 0; r < batch; ++r) {
      K.add(n, next.data() + r * n, b.data(), next.data() + r * n);
    }
    if (l + 1 < extractor.layer_count()) {
      K.relu(next.size(), next.data(), next.data());
    }
    h = std::move(next);
  }
  return single ? h.reshaped({extractor.feature_dim()}) : h;
}

ExtractorVars extractor_inputs(Tape& tape, const FeatureExtractor& extractor,
                               bool trainable) {
  ExtractorVars vars;
  for (std::size_t l = 0; l < extractor.layer_count(); ++l) {
    vars.weights.push_back(tape.input(extractor.weights[l], trainable));
    vars.biases.push_back(tape.input(extractor.biases[l], trainable));
  }
  return vars;
}

Var forward_features(Tape& tape, Var x, const ExtractorVars& vars) {
  Var h = x;
  for (std::size_t l = 0; l < vars.weights.size(); ++l) {
    h = tape.add_rowvec(tape.matmul(h, vars.weights[l]), vars.biases[l]);
    if (l + 1 < vars.weights.size()) h = tape.relu(h);
  }
  return h;
}

}  // namespace dismax
