#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "dismax/calibration.hpp"
#include "dismax/head.hpp"
#include "dismax/model.hpp"
#include "dismax/tensor.hpp"

namespace dismax {

// Trained model state. Serialized as a single JSON document with
// base64-encoded little-endian float payloads; round-trips bit-exactly.
struct Checkpoint {
  int format_version = 1;
  std::string loss_kind;  // softmax-baseline | dismax | dismax-fpr
  FeatureExtractor extractor;
  // DisMax head (used unless loss_kind == "softmax-baseline"):
  DisMaxHead head;
  // Linear classifier head for the baseline:
  Tensor classifier_w;  // (feature_dim × N)
  Tensor classifier_b;  // (N)
  std::optional<CalibrationResult> calibration;
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  std::string config_hash;

  bool is_dismax() const { return loss_kind != "softmax-baseline"; }
  std::size_t n_classes() const {
    return is_dismax() ? head.n_classes() : classifier_b.dim(0);
  }
  double calibrated_temperature() const {
    return calibration ? calibration->t_star : 1.0;
  }
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace dismax
