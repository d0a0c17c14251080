#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "dismax/checkpoint.hpp"
#include "dismax/data.hpp"

namespace dismax {

// SGD protocol: Nesterov momentum, uniform weight decay (no layer is
// exempted, prototypes and the distance scale included), learning rate
// divided by lr_decay_factor at each listed epoch.
struct TrainConfig {
  std::string loss = "dismax";  // softmax-baseline | dismax | dismax-fpr
  std::size_t n_classes = 0;
  std::vector<std::size_t> layer_dims;  // input, hidden..., feature
  std::size_t epochs = 50;
  std::size_t batch_size = 64;
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::vector<std::size_t> lr_decay_epochs = {25, 40};  // 1-based
  double lr_decay_factor = 10.0;
  double entropic_scale = 10.0;
  double alpha = 1.0;
  std::uint64_t seed = 0;

  void validate() const;  // throws config_error
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;      // mean batch loss
  double acc = 0.0;       // over cross-entropy examples only
};

// Deterministic per (config, seed, data). Logs one line per epoch when
// `log` is given.
Checkpoint train(const TrainConfig& config, const Dataset& train_data,
                 std::ostream* log = nullptr,
                 std::vector<EpochStats>* stats = nullptr);

}  // namespace dismax
