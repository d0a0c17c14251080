#pragma once

#include <string>
#include <vector>

#include "dismax/head.hpp"
#include "dismax/tensor.hpp"

namespace dismax {

// All scores are oriented so that higher means more in-distribution.

// H = -sum p ln p with 0 ln 0 = 0; 0 <= H <= ln N.
double entropy(const Tensor& p);

// Maximum probability score.
double score_mps(const Tensor& p);

// Minimum distance score, negated so higher is more in-distribution.
double score_mds(const Tensor& distances);

// max logit+ + mean logit+ - H(P); P must come from the same example with
// the entropic scale removed and T = 1.
double score_mmles(const LogitsPlus& lp, const Tensor& p);

// One scored example; true_class is -1 for OOD rows.
struct ScoreRow {
  std::string split;  // "id" or the OOD set name
  int true_class = -1;
  int pred_class = -1;
  double mps = 0.0;
  double mds = 0.0;
  double mmles = 0.0;
  double entropy = 0.0;
  std::vector<double> logits_plus;
};

// CSV with header split,true_class,pred_class,score_mps,score_mds,
// score_mmles,entropy,logit_plus_0,...; floats carry 17 significant digits.
// Written atomically (temp file + rename).
void write_score_dump(const std::string& path,
                      const std::vector<ScoreRow>& rows);

// Parse errors carry the 1-based line number.
std::vector<ScoreRow> read_score_dump(const std::string& path);

}  // namespace dismax
