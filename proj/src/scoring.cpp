#include "dismax/scoring.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "dismax/errors.hpp"
#include "dismax/io_util.hpp"
#include "dismax/kernels.hpp"

namespace dismax {

namespace {

void check_distribution(const Tensor& p, const char* what) {
  if (p.rank() != 1 || p.size() == 0) {
    throw shape_error(std::string(what) + ": expected nonempty rank-1");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0)) {
      throw data_error(std::string(what) + ": negative or NaN entry");
    }
    total += p[i];
  }
  if (std::fabs(total - 1.0) > 1e-9) {
    throw data_error(std::string(what) + ": entries sum to " +
                     std::to_string(total) + ", not 1");
  }
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

double entropy(const Tensor& p) {
  check_distribution(p, "entropy");
  double h = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) h -= p[i] * std::log(p[i]);
  }
  return h;
}

double score_mps(const Tensor& p) {
  check_distribution(p, "score_mps");
  return kernels::active().max(p.size(), p.data());
}

double score_mds(const Tensor& distances) {
  if (distances.rank() != 1 || distances.size() == 0) {
    throw shape_error("score_mds: expected nonempty rank-1 distances");
  }
  double m = distances[0];
  for (std::size_t i = 1; i < distances.size(); ++i) {
    if (distances[i] < m) m = distances[i];
  }
  return -m;
}

double score_mmles(const LogitsPlus& lp, const Tensor& p) {
  if (!lp.values.same_shape(p)) {
    throw shape_error("score_mmles: logits and probabilities length mismatch");
  }
  const std::size_t n = lp.values.size();
  if (n == 0) throw shape_error("score_mmles: empty logits");
  const double max_logit = kernels::active().max(n, lp.values.data());
  const double mean_logit =
      kernels::active().sum(n, lp.values.data()) / static_cast<double>(n);
  return max_logit + mean_logit - entropy(p);
}

void write_score_dump(const std::string& path,
                      const std::vector<ScoreRow>& rows) {
  std::ostringstream out;
  const std::size_t n_logits = rows.empty() ? 0 : rows.front().logits_plus.size();
  out << "split,true_class,pred_class,score_mps,score_mds,score_mmles,entropy";
  for (std::size_t j = 0; j < n_logits; ++j) out << ",logit_plus_" << j;
  out << "\n";
  for (const ScoreRow& r : rows) {
    if (r.logits_plus.size() != n_logits) {
      throw data_error("write_score_dump: inconsistent logit column count");
    }
    out << r.split << "," << r.true_class << "," << r.pred_class << ","
        << fmt17(r.mps) << "," << fmt17(r.mds) << "," << fmt17(r.mmles) << ","
        << fmt17(r.entropy);
    for (double v : r.logits_plus) out << "," << fmt17(v);
    out << "\n";
  }
  write_file_atomic(path, out.str());
}

std::vector<ScoreRow> read_score_dump(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("read_score_dump: cannot open " + path);
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& msg) -> format_error {
    return format_error(path + ": line " + std::to_string(lineno) + ": " + msg);
  };
  if (!std::getline(in, line)) throw format_error(path + ": empty file");
  lineno = 1;
  const std::string prefix =
      "split,true_class,pred_class,score_mps,score_mds,score_mmles,entropy";
  if (line.rfind(prefix, 0) != 0) throw fail("unexpected header");

  std::vector<ScoreRow> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (line.back() == ',') fields.push_back("");
    if (fields.size() < 7) throw fail("expected at least 7 fields");
    ScoreRow r;
    r.split = fields[0];
    try {
      std::size_t pos = 0;
      r.true_class = std::stoi(fields[1], &pos);
      if (pos != fields[1].size()) throw fail("bad true_class");
      r.pred_class = std::stoi(fields[2], &pos);
      if (pos != fields[2].size()) throw fail("bad pred_class");
      r.mps = std::stod(fields[3], &pos);
      r.mds = std::stod(fields[4], &pos);
      r.mmles = std::stod(fields[5], &pos);
      r.entropy = std::stod(fields[6], &pos);
      for (std::size_t j = 7; j < fields.size(); ++j) {
        r.logits_plus.push_back(std::stod(fields[j], &pos));
      }
    } catch (const format_error&) {
      throw;
    } catch (const std::exception&) {
      throw fail("malformed numeric field");
    }
    if (!rows.empty() &&
        rows.front().logits_plus.size() != r.logits_plus.size()) {
      throw fail("inconsistent logit column count");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace dismax
