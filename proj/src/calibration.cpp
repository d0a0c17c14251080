#include "dismax/calibration.hpp"

#include <cmath>
#include <string>

#include "dismax/errors.hpp"
#include "dismax/kernels.hpp"
#include "dismax/numerics.hpp"

namespace dismax {

double ece(const std::vector<double>& confidences,
           const std::vector<std::uint8_t>& correct, std::size_t bins) {
  if (bins < 1) throw config_error("ece: bins must be >= 1");
  if (confidences.empty()) throw data_error("ece: empty inputs");
  if (confidences.size() != correct.size()) {
    throw data_error("ece: confidences and correctness lengths differ");
  }
  std::vector<std::size_t> count(bins, 0);
  std::vector<double> conf_sum(bins, 0.0);
  std::vector<std::size_t> acc_sum(bins, 0);
  for (std::size_t i = 0; i < confidences.size(); ++i) {
    const double c = confidences[i];
    if (!(c >= 0.0 && c <= 1.0)) {
      throw data_error("ece: confidence outside [0,1]");
    }
    // Right edge belongs to the bin; 1.0 lands in the last bin.
    long b = static_cast<long>(
                 std::ceil(c * static_cast<double>(bins))) - 1;
    if (b < 0) b = 0;
    if (b >= static_cast<long>(bins)) b = static_cast<long>(bins) - 1;
    ++count[static_cast<std::size_t>(b)];
    conf_sum[static_cast<std::size_t>(b)] += c;
    acc_sum[static_cast<std::size_t>(b)] += correct[i] ? 1 : 0;
  }
  const double n = static_cast<double>(confidences.size());
  double total = 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    if (count[b] == 0) continue;
    const double nb = static_cast<double>(count[b]);
    const double acc = static_cast<double>(acc_sum[b]) / nb;
    const double conf = conf_sum[b] / nb;
    total += (nb / n) * std::fabs(acc - conf);
  }
  return total;
}

namespace {

struct Objective {
  const Tensor& logits;  // (n × N)
  const std::vector<std::uint8_t>& correct;
  std::size_t bins;
  std::size_t evaluations = 0;

  double operator()(double t) {
    ++evaluations;
    const std::size_t n = logits.dim(0);
    const std::size_t classes = logits.dim(1);
    std::vector<double> conf(n);
    std::vector<double> probs(classes);
    for (std::size_t i = 0; i < n; ++i) {
      detail::softmax_fill(classes, logits.data() + i * classes, 1.0 / t,
                           probs.data());
      conf[i] = kernels::active().max(classes, probs.data());
    }
    return ece(conf, correct, bins);
  }
};

}  // namespace

CalibrationResult calibrate_temperature(const Tensor& val_logits,
                                        const std::vector<std::size_t>& labels,
                                        std::size_t bins, double t_lo,
                                        double t_hi) {
  if (t_lo >= t_hi || t_lo <= 0.0) {
    throw config_error("calibrate_temperature: invalid bounds [" +
                       std::to_string(t_lo) + ", " + std::to_string(t_hi) +
                       "]");
  }
  if (val_logits.rank() != 2 || val_logits.dim(0) == 0) {
    throw data_error("calibrate_temperature: empty validation set");
  }
  if (labels.size() != val_logits.dim(0)) {
    throw data_error("calibrate_temperature: labels/logits count mismatch");
  }
  const std::size_t n = val_logits.dim(0);
  const std::size_t classes = val_logits.dim(1);

  // Argmax predictions are invariant under positive temperature scaling, so
  // correctness is fixed once.
  std::vector<std::uint8_t> correct(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = val_logits.data() + i * classes;
    std::size_t arg = 0;
    for (std::size_t j = 1; j < classes; ++j) {
      if (row[j] > row[arg]) arg = j;
    }
    if (labels[i] >= classes) {
      throw data_error("calibrate_temperature: label out of range");
    }
    correct[i] = (arg == labels[i]) ? 1 : 0;
  }

  Objective objective{val_logits, correct, bins, 0};
  const double ece_before = objective(1.0);

  // Coarse pass: 200-point log-spaced grid.
  constexpr std::size_t kGridPoints = 200;
  const double log_lo = std::log(t_lo);
  const double log_hi = std::log(t_hi);
  double best_t = t_lo;
  double best_e = 0.0;
  std::size_t best_idx = 0;
  std::vector<double> grid(kGridPoints);
  for (std::size_t k = 0; k < kGridPoints; ++k) {
    if (k == 0) {
      grid[k] = t_lo;
    } else if (k == kGridPoints - 1) {
      grid[k] = t_hi;
    } else {
      grid[k] =
          std::exp(log_lo + (log_hi - log_lo) * static_cast<double>(k) /
                                static_cast<double>(kGridPoints - 1));
    }
    const double e = objective(grid[k]);
    if (k == 0 || e < best_e) {
      best_e = e;
      best_t = grid[k];
      best_idx = k;
    }
  }

  // Golden-section refinement on the bracket around the best grid point.
  double a = (best_idx == 0) ? t_lo : grid[best_idx - 1];
  double b = (best_idx + 1 >= kGridPoints) ? t_hi : grid[best_idx + 1];
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - gr * (b - a);
  double d = a + gr * (b - a);
  double fc = objective(c);
  double fd = objective(d);
  while (b - a > 1e-4) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = objective(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = objective(d);
    }
  }
  const double refined_t = (a + b) / 2.0;
  const double refined_e = objective(refined_t);

  CalibrationResult result;
  result.bins = bins;
  result.ece_before = ece_before;
  // Deterministic final pick, strictly-better comparisons: T=1 guards the
  // ece_after <= ece_before invariant, then the grid best, then refinement.
  result.t_star = 1.0;
  result.ece_after = ece_before;
  if (best_e < result.ece_after) {
    result.t_star = best_t;
    result.ece_after = best_e;
  }
  if (refined_e < result.ece_after) {
    result.t_star = refined_t;
    result.ece_after = refined_e;
  }
  if (result.t_star < t_lo) result.t_star = t_lo;
  if (result.t_star > t_hi) result.t_star = t_hi;
  result.evaluations = objective.evaluations;
  return result;
}

}  // namespace dismax
