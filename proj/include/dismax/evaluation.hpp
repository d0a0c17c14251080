#pragma once

#include <optional>
#include <string>
#include <vector>

namespace dismax {

// Detection metrics treat in-distribution as the positive class and expect
// scores oriented higher-is-ID.

// Probability that a random ID score exceeds a random OOD score, ties at 0.5
// (rank formulation; equals the trapezoidal ROC area).
double auroc(const std::vector<double>& id_scores,
             const std::vector<double>& ood_scores);

// Area under precision-recall by descending-score sweep with step
// interpolation.
double aupr(const std::vector<double>& id_scores,
            const std::vector<double>& ood_scores);

// Fraction of OOD scores below the largest threshold that keeps >= 95% of ID
// scores at or above it.
double tnr_at_tpr95(const std::vector<double>& id_scores,
                    const std::vector<double>& ood_scores);

double accuracy(const std::vector<int>& pred, const std::vector<int>& truth);

struct OodSetMetrics {
  std::string ood_set;
  double auroc = 0.0;
  double aupr = 0.0;
  double tnr_at_tpr95 = 0.0;
  std::size_t n_ood = 0;
};

struct ScoreKindReport {
  std::string score_kind;  // mps | mds | mmles
  std::vector<OodSetMetrics> per_set;
};

struct DetectionReport {
  std::string method;  // label of the dump the report came from
  double acc = 0.0;
  std::optional<double> ece;
  std::size_t n_id = 0;
  std::vector<ScoreKindReport> scores;
};

}  // namespace dismax
