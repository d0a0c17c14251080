#pragma once

#include <cstdint>
#include <vector>

#include "dismax/tensor.hpp"

namespace dismax {

struct CalibrationResult {
  double t_star = 1.0;
  double ece_before = 0.0;
  double ece_after = 0.0;
  std::size_t evaluations = 0;  // objective calls
  std::size_t bins = 15;
};

// Expected calibration error over equal-width confidence bins on [0,1].
// A sample sitting on a bin's right edge belongs to that bin; 1.0 belongs to
// the last bin; empty bins contribute 0.
double ece(const std::vector<double>& confidences,
           const std::vector<std::uint8_t>& correct, std::size_t bins);

// Finds T in [t_lo, t_hi] minimizing ECE of confidences
// max stable_softmax(logits_row / T). Deterministic coarse-to-fine search:
// log-spaced grid then golden-section refinement on the best bracket.
// val_logits must be (n × N) with the entropic scale already removed.
CalibrationResult calibrate_temperature(const Tensor& val_logits,
                                        const std::vector<std::size_t>& labels,
                                        std::size_t bins = 15,
                                        double t_lo = 0.001,
                                        double t_hi = 100.0);

}  // namespace dismax
