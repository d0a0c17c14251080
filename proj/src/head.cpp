#include "dismax/head.hpp"

#include <cmath>
#include <string>

#include "dismax/errors.hpp"
#include "dismax/kernels.hpp"
#include "dismax/numerics.hpp"
#include "dismax/rng.hpp"
#include "dismax/warnings.hpp"

namespace dismax {

namespace warnings {

std::uint64_t& probability_floor_clamps() {
  static std::uint64_t count = 0;
  return count;
}

std::uint64_t& kl_floor_clamps() {
  static std::uint64_t count = 0;
  return count;
}

}  // namespace warnings

namespace {
constexpr std::uint64_t kHeadStream = 0x70726f746full;
constexpr double kPrototypeSigma = 0.1;

void check_scales(double entropic_scale, double temperature) {
  if (entropic_scale <= 0.0) {
    throw config_error("dismax head: entropic scale must be positive");
  }
  if (temperature <= 0.0) {
    throw config_error("dismax head: temperature must be positive");
  }
}
}  // namespace

DisMaxHead init_head(std::size_t n_classes, std::size_t feature_dim,
                     double entropic_scale, std::uint64_t seed) {
  if (n_classes < 2) throw config_error("dismax head: need >= 2 classes");
  if (feature_dim < 1) throw config_error("dismax head: feature_dim < 1");
  if (entropic_scale <= 0.0) {
    throw config_error("dismax head: entropic scale must be positive");
  }
  DisMaxHead head;
  head.prototypes = Tensor({n_classes, feature_dim});
  Rng rng = Rng::fork(seed, kHeadStream);
  for (std::size_t i = 0; i < head.prototypes.size(); ++i) {
    head.prototypes[i] = kPrototypeSigma * rng.normal();
  }
  head.distance_scale = 1.0;
  head.entropic_scale = entropic_scale;
  head.temperature = 1.0;
  return head;
}

Tensor isometric_distances(const Tensor& features, const DisMaxHead& head) {
  if (features.rank() != 1 || features.dim(0) != head.feature_dim()) {
    throw shape_error("isometric_distances: feature shape " +
                      shape_to_string(features.shape()) +
                      " does not match head feature_dim " +
                      std::to_string(head.feature_dim()));
  }
  features.require_finite("isometric_distances input");
  const std::size_t n = head.n_classes();
  const std::size_t d = head.feature_dim();
  const double ds = std::fabs(head.distance_scale);
  const Tensor fhat = l2_normalize(features);
  Tensor out({n});
  std::vector<double> phat(d);
  for (std::size_t j = 0; j < n; ++j) {
    const double* proto = head.prototypes.data() + j * d;
    const double s = 1.0 / (detail::l2norm(d, proto) + kNormEps);
    kernels::active().scale(d, s, proto, phat.data());
    out[j] = ds * std::sqrt(kernels::active().sqdist(d, fhat.data(),
                                                     phat.data()));
  }
  return out;
}

LogitsPlus logits_plus(const Tensor& distances) {
  if (distances.rank() != 1 || distances.size() == 0) {
    throw shape_error("logits_plus: expected nonempty rank-1 distances");
  }
  for (std::size_t j = 0; j < distances.size(); ++j) {
    if (!(distances[j] >= 0.0)) {
      throw data_error("logits_plus: negative or NaN distance");
    }
  }
  const std::size_t n = distances.size();
  const double mean =
      kernels::active().sum(n, distances.data()) / static_cast<double>(n);
  LogitsPlus lp;
  lp.source_distances = distances;
  lp.values = Tensor({n});
  for (std::size_t j = 0; j < n; ++j) {
    lp.values[j] = -(distances[j] + mean);
  }
  return lp;
}

Tensor dismax_probabilities(const LogitsPlus& lp, double entropic_scale,
                            double temperature) {
  check_scales(entropic_scale, temperature);
  return stable_softmax(lp.values, entropic_scale / temperature);
}

double cross_entropy_term(const LogitsPlus& lp, std::size_t correct_class,
                          double entropic_scale) {
  if (correct_class >= lp.values.size()) {
    throw data_error("cross_entropy_term: class index out of range");
  }
  const Tensor p = dismax_probabilities(lp, entropic_scale, 1.0);
  double pk = p[correct_class];
  if (pk < kProbFloor) {
    pk = kProbFloor;
    ++warnings::probability_floor_clamps();
  }
  return -std::log(pk);
}

HeadVars head_inputs(Tape& tape, const DisMaxHead& head, bool trainable) {
  HeadVars vars;
  vars.prototypes = tape.input(head.prototypes, trainable);
  vars.distance_scale =
      tape.input(Tensor::scalar(head.distance_scale), trainable);
  return vars;
}

Var logits_plus_graph(Tape& tape, Var features, const HeadVars& vars) {
  Var fhat = tape.l2_normalize_rows(features);
  Var phat = tape.l2_normalize_rows(vars.prototypes);
  Var dist = tape.pairwise_distance(fhat, phat);
  Var scaled = tape.mul_scalar(dist, tape.abs(vars.distance_scale));
  Var mean = tape.row_mean(scaled);
  return tape.neg(tape.add_colvec(scaled, mean));
}

}  // namespace dismax
