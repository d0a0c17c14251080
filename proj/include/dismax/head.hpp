#pragma once

#include <cstdint>

#include "dismax/autodiff.hpp"
#include "dismax/tensor.hpp"

namespace dismax {

inline constexpr double kTemperatureMin = 0.001;
inline constexpr double kTemperatureMax = 100.0;

// Prototype head: learnable prototypes and distance scale, a constant
// entropic scale used during training only, and a temperature that stays 1
// until calibration replaces it. |d_s| is used wherever d_s appears.
struct DisMaxHead {
  Tensor prototypes;             // (N × feature_dim)
  double distance_scale = 1.0;   // d_s, learnable
  double entropic_scale = 10.0;  // E_s > 0
  double temperature = 1.0;      // T in [kTemperatureMin, kTemperatureMax]

  std::size_t n_classes() const { return prototypes.dim(0); }
  std::size_t feature_dim() const { return prototypes.dim(1); }
};

// Prototypes ~ N(0, 0.1^2) seeded, d_s = 1; n_classes >= 2.
DisMaxHead init_head(std::size_t n_classes, std::size_t feature_dim,
                     double entropic_scale, std::uint64_t seed);

// Enhanced logits and the distances they came from.
struct LogitsPlus {
  Tensor values;            // length N, values[j] = -(D_j + mean(D))
  Tensor source_distances;  // length N
};

// D_j = |d_s| * ||normalize(f) - normalize(p_j)||; f is rank-1 feature_dim.
Tensor isometric_distances(const Tensor& features, const DisMaxHead& head);

LogitsPlus logits_plus(const Tensor& distances);

// stable_softmax(E_s * values / T).
Tensor dismax_probabilities(const LogitsPlus& lp, double entropic_scale,
                            double temperature);

// -log p_k with the probability materialized first and the logarithm applied
// afterwards; p_k is floored at kProbFloor (counted in warnings).
double cross_entropy_term(const LogitsPlus& lp, std::size_t correct_class,
                          double entropic_scale);

// Head parameters registered on a tape.
struct HeadVars {
  Var prototypes;      // (N × d)
  Var distance_scale;  // rank-0
};

HeadVars head_inputs(Tape& tape, const DisMaxHead& head, bool trainable);

// logits+ (B×N) for a batch of features (B×d).
Var logits_plus_graph(Tape& tape, Var features, const HeadVars& vars);

}  // namespace dismax
