#include "dismax/evaluation.hpp"

#include <algorithm>
#include <cstddef>

#include "dismax/errors.hpp"

namespace dismax {

namespace {

void check_nonempty(const std::vector<double>& id_scores,
                    const std::vector<double>& ood_scores, const char* op) {
  if (id_scores.empty() || ood_scores.empty()) {
    throw data_error(std::string(op) + ": empty score list");
  }
}

}  // namespace

double auroc(const std::vector<double>& id_scores,
             const std::vector<double>& ood_scores) {
  check_nonempty(id_scores, ood_scores, "auroc");
  struct Entry {
    double score;
    bool is_id;
  };
  std::vector<Entry> all;
  all.reserve(id_scores.size() + ood_scores.size());
  for (double s : id_scores) all.push_back({s, true});
  for (double s : ood_scores) all.push_back({s, false});
  std::sort(all.begin(), all.end(),
            [](const Entry& a, const Entry& b) { return a.score < b.score; });
  // Midranks over tie groups; rank sums stay exact (integers and halves).
  double id_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].score == all[i].score) ++j;
    const double midrank = (static_cast<double>(i + 1) +
                            static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (all[k].is_id) id_rank_sum += midrank;
    }
    i = j;
  }
  const double n_id = static_cast<double>(id_scores.size());
  const double n_ood = static_cast<double>(ood_scores.size());
  const double u = id_rank_sum - n_id * (n_id + 1.0) / 2.0;
  return u / (n_id * n_ood);
}

double aupr(const std::vector<double>& id_scores,
            const std::vector<double>& ood_scores) {
  check_nonempty(id_scores, ood_scores, "aupr");
  struct Entry {
    double score;
    bool is_id;
  };
  std::vector<Entry> all;
  all.reserve(id_scores.size() + ood_scores.size());
  for (double s : id_scores) all.push_back({s, true});
  for (double s : ood_scores) all.push_back({s, false});
  std::sort(all.begin(), all.end(),
            [](const Entry& a, const Entry& b) { return a.score > b.score; });
  const double n_id = static_cast<double>(id_scores.size());
  std::size_t tp = 0, fp = 0;
  double area = 0.0;
  double prev_recall = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    // Equal scores are one threshold step.
    while (j < all.size() && all[j].score == all[i].score) ++j;
    for (std::size_t k = i; k < j; ++k) {
      if (all[k].is_id)
        ++tp;
      else
        ++fp;
    }
    const double recall = static_cast<double>(tp) / n_id;
    const double precision =
        static_cast<double>(tp) / static_cast<double>(tp + fp);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return area;
}

double tnr_at_tpr95(const std::vector<double>& id_scores,
                    const std::vector<double>& ood_scores) {
  check_nonempty(id_scores, ood_scores, "tnr_at_tpr95");
  // Largest threshold keeping TPR >= 0.95 is the k-th largest ID score with
  // k = ceil(0.95 * n), computed in integers.
  const std::size_t n = id_scores.size();
  const std::size_t k = (95 * n + 99) / 100;
  std::vector<double> sorted = id_scores;
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());
  const double threshold = sorted[k - 1];
  std::size_t below = 0;
  for (double s : ood_scores) {
    if (s < threshold) ++below;
  }
  return static_cast<double>(below) / static_cast<double>(ood_scores.size());
}

double accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size()) {
    throw data_error("accuracy: length mismatch");
  }
  if (pred.empty()) throw data_error("accuracy: empty inputs");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == truth[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

}  // namespace dismax
