#include "dismax/autodiff.hpp"

#include <cmath>
#include <utility>

#include "dismax/errors.hpp"
#include "dismax/kernels.hpp"
#include "dismax/numerics.hpp"

namespace dismax {

namespace {

const kernels::Table& K() { return kernels::active(); }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw shape_error(std::string(op) + ": shape mismatch " +
                      shape_to_string(a.shape()) + " vs " +
                      shape_to_string(b.shape()));
  }
}

// Rows/cols view treating rank-1 as a single row.
struct RowView {
  std::size_t rows;
  std::size_t cols;
};

RowView as_rows(const Tensor& t, const char* op) {
  if (t.rank() == 1) return {1, t.dim(0)};
  if (t.rank() == 2) return {t.dim(0), t.dim(1)};
  throw shape_error(std::string(op) + ": expected rank 1 or 2, got " +
                    shape_to_string(t.shape()));
}

}  // namespace

Var Tape::push(Tensor value, bool needs_grad,
               std::function<void(Tape&, std::uint32_t)> back) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Tape::Node& Tape::at(Var v) {
  if (!v.valid() || v.id >= nodes_.size()) throw error("tape: invalid var");
  return nodes_[v.id];
}

const Tape::Node& Tape::at(Var v) const {
  if (!v.valid() || v.id >= nodes_.size()) throw error("tape: invalid var");
  return nodes_[v.id];
}

Var Tape::input(Tensor value, bool trainable) {
  return push(std::move(value), trainable, nullptr);
}

const Tensor& Tape::value(Var v) const { return at(v).value; }

const Tensor& Tape::grad(Var v) const {
  if (!ran_backward_) throw error("tape: grad() before backward()");
  return at(v).grad;
}

Var Tape::matmul(Var a, Var b) {
  const Tensor& av = at(a).value;
  const Tensor& bv = at(b).value;
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
    throw shape_error("matmul: incompatible shapes " +
                      shape_to_string(av.shape()) + " and " +
                      shape_to_string(bv.shape()));
  }
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor out({m, n});
  detail::matmul_accumulate(m, k, n, av.data(), bv.data(), out.data());
  bool ng = at(a).needs_grad || at(b).needs_grad;
  return push(std::move(out), ng, [a, b, m, k, n](Tape& t, std::uint32_t self) {
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& av2 = t.at(a).value;
    const Tensor& bv2 = t.at(b).value;
    if (t.at(a).needs_grad) {
      Tensor& ga = t.at(a).grad;
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = g.data() + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
          ga.data()[i * k + kk] += K().dot(n, grow, bv2.data() + kk * n);
        }
      }
    }
    if (t.at(b).needs_grad) {
      Tensor& gb = t.at(b).grad;
      for (std::size_t kk = 0; kk < k; ++kk) {
        double* gbrow = gb.data() + kk * n;
        for (std::size_t i = 0; i < m; ++i) {
          K().axpy(n, av2.at(i, kk), g.data() + i * n, gbrow);
        }
      }
    }
  });
}

Var Tape::add(Var a, Var b) {
  const Tensor& av = at(a).value;
  const Tensor& bv = at(b).value;
  require_same_shape(av, bv, "add");
  Tensor out(av.shape());
  K().add(av.size(), av.data(), bv.data(), out.data());
  bool ng = at(a).needs_grad || at(b).needs_grad;
  return push(std::move(out), ng, [a, b](Tape& t, std::uint32_t self) {
    const Tensor& g = t.nodes_[self].grad;
    if (t.at(a).needs_grad)
      K().axpy(g.size(), 1.0, g.data(), t.at(a).grad.data());
    if (t.at(b).needs_grad)
      K().axpy(g.size(), 1.0, g.data(), t.at(b).grad.data());
  });
}

Var Tape::add_rowvec(Var m, Var v) {
  const Tensor& mv = at(m).value;
  const Tensor& vv = at(v).value;
  if (mv.rank() != 2 || vv.rank() != 1 || mv.dim(1) != vv.dim(0)) {
    throw shape_error("add_rowvec: incompatible shapes " +
                      shape_to_string(mv.shape()) + " and " +
                      shape_to_string(vv.shape()));
  }
  const std::size_t rows = mv.dim(0), n = mv.dim(1);
  Tensor out({rows, n});
  for (std::size_t i = 0; i < rows; ++i) {
    K().add(n, mv.data() + i * n, vv.data(), out.data() + i * n);
  }
  bool ng = at(m).needs_grad || at(v).needs_grad;
  return push(std::move(out), ng, [m, v, rows, n](Tape& t, std::uint32_t self) {
    const Tensor& g = t.nodes_[self].grad;
    if (t.at(m).needs_grad)
      K().axpy(g.size(), 1.0, g.data(), t.at(m).grad.data());
    if (t.at(v).needs_grad) {
      double* gv = t.at(v).grad.data();
      for (std::size_t i = 0; i < rows; ++i) {
        K().axpy(n, 1.0, g.data() + i * n, gv);
      }
    }
  });
}

Var Tape::add_colvec(Var m, Var v) {
  const Tensor& mv = at(m).value;
  const Tensor& vv = at(v).value;
  if (mv.rank() != 2 || vv.rank() != 1 || mv.dim(0) != vv.dim(0)) {
    throw shape_error("add_colvec: incompatible shapes " +
                      shape_to_string(mv.shape()) + " and " +
                      shape_to_string(vv.shape()));
  }
  const std::size_t rows = mv.dim(0), n = mv.dim(1);
  Tensor out({rows, n});
  for (std::size_t i = 0; i < rows; ++i) {
    const double c = vv[i];
    const double* src = mv.data() + i * n;
    double* dst = out.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) dst[j] = src[j] + c;
  }
  bool ng = at(m).needs_grad || at(v).needs_grad;
  return push(std::move(out), ng, [m, v, rows, n](Tape& t, std::uint32_t self) {
    const Tensor& g = t.nodes_[self].grad;
    if (t.at(m).needs_grad)
      K().axpy(g.size(), 1.0, g.data(), t.at(m).grad.data());
    if (t.at(v).needs_grad) {
      double* gv = t.at(v).grad.data();
      for (std::size_t i = 0; i < rows; ++i) {
        gv[i] += K().sum(n, g.data() + i * n);
      }
    }
  });
}

Var Tape::sub(Var a, Var b) {
  const Tensor& av = at(a).value;
  const Tensor& bv = at(b).value;
  require_same_shape(av, bv, "sub");
  Tensor out(av.shape());
  K().sub(av.size(), av.data(), bv.data(), out.data());
  bool ng = at(a).needs_grad || at(b).needs_grad;
  return push(std::move(out), ng, [a, b](Tape& t, std::uint32_t self) {
    const Tensor& g = t.nodes_[self].grad;
    if (t.at(a).needs_grad)
      K().axpy(g.size(), 1.0, g.data(), t.at(a).grad.data());
    if (t.at(b).needs_grad)
      K().axpy(g.size(), -1.0, g.data(), t.at(b).grad.data());
  });
}

Var Tape::mul(Var a, Var b) {
  const Tensor& av = at(a).value;
  const Tensor& bv = at(b).value;
  require_same_shape(av, bv, "mul");
  Tensor out(av.shape());
  K().mul(av.size(), av.data(), bv.data(), out.data());
  bool ng = at(a).needs_grad || at(b).needs_grad;
  return push(std::move(out), ng, [a, b](Tape& t, std::uint32_t self) {
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& av2 = t.at(a).value;
    const Tensor& bv2 = t.at(b).value;
    if (t.at(a).needs_grad) {
      double* ga = t.at(a).grad.data();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv2[i];
    }
    if (t.at(b).needs_grad) {
      double* gb = t.at(b).grad.data();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av2[i];
    }
  });
}

Var Tape::scale(Var a, double c) {
  const Tensor& av = at(a).value;
  Tensor out(av.shape());
  K().scale(av.size(), c, av.data(), out.data());
  return push(std::move(out), at(a).needs_grad,
              [a, c](Tape& t, std::uint32_t self) {
                const Tensor& g = t.nodes_[self].grad;
                if (t.at(a).needs_grad)
                  K().axpy(g.size(), c, g.data(), t.at(a).grad.data());
              });
}

Var Tape::mul_scalar(Var a, Var s) {
  const Tensor& av = at(a).value;
  const Tensor& sv = at(s).value;
  if (sv.size() != 1) {
    throw shape_error("mul_scalar: scalar operand has shape " +
                      shape_to_string(sv.shape()));
  }
  Tensor out(av.shape());
  K().scale(av.size(), sv[0], av.data(), out.data());
  bool ng = at(a).needs_grad || at(s).needs_grad;
  return push(std::move(out), ng, [a, s](Tape& t, std::uint32_t self) {
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& av2 = t.at(a).value;
    const double sval = t.at(s).value[0];
    if (t.at(a).needs_grad)
      K().axpy(g.size(), sval, g.data(), t.at(a).grad.data());
    if (t.at(s).needs_grad)
      t.at(s).grad[0] += K().dot(g.size(), g.data(), av2.data());
  });
}

Var Tape::relu(Var a) {
  const Tensor& av = at(a).value;
  Tensor out(av.shape());
  K().relu(av.size(), av.data(), out.data());
  return push(std::move(out), at(a).needs_grad,
              [a](Tape& t, std::uint32_t self) {
                const Tensor& g = t.nodes_[self].grad;
                if (t.at(a).needs_grad) {
                  K().relu_grad(g.size(), t.at(a).value.data(), g.data(),
                                t.at(a).grad.data());
                }
              });
}

Var Tape::abs(Var a) {
  const Tensor& av = at(a).value;
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = std::fabs(av[i]);
  return push(std::move(out), at(a).needs_grad,
              [a](Tape& t, std::uint32_t self) {
                const Tensor& g = t.nodes_[self].grad;
                if (!t.at(a).needs_grad) return;
                const Tensor& av2 = t.at(a).value;
                double* ga = t.at(a).grad.data();
                for (std::size_t i = 0; i < g.size(); ++i) {
                  if (av2[i] > 0.0)
                    ga[i] += g[i];
                  else if (av2[i] < 0.0)
                    ga[i] -= g[i];
                }
              });
}

Var Tape::log(Var a) {
  const Tensor& av = at(a).value;
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = std::log(av[i]);
  return push(std::move(out), at(a).needs_grad,
              [a](Tape& t, std::uint32_t self) {
                const Tensor& g = t.nodes_[self].grad;
                if (!t.at(a).needs_grad) return;
                const Tensor& av2 = t.at(a).value;
                double* ga = t.at(a).grad.data();
                for (std::size_t i = 0; i < g.size(); ++i) {
                  if (g[i] != 0.0) ga[i] += g[i] / av2[i];
                }
              });
}

Var Tape::clamp_min(Var a, double lo, std::uint64_t* clamp_count) {
  const Tensor& av = at(a).value;
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) {
    if (av[i] < lo) {
      out[i] = lo;
      if (clamp_count != nullptr) ++*clamp_count;
    } else {
      out[i] = av[i];
    }
  }
  return push(std::move(out), at(a).needs_grad,
              [a, lo](Tape& t, std::uint32_t self) {
                const Tensor& g = t.nodes_[self].grad;
                if (!t.at(a).needs_grad) return;
                const Tensor& av2 = t.at(a).value;
                double* ga = t.at(a).grad.data();
                for (std::size_t i = 0; i < g.size(); ++i) {
                  if (av2[i] >= lo) ga[i] += g[i];
                }
              });
}

Var Tape::l2_normalize_rows(Var a) {
  const Tensor& av = at(a).value;
  const RowView rv = as_rows(av, "l2_normalize_rows");
  Tensor out(av.shape());
  for (std::size_t r = 0; r < rv.rows; ++r) {
    const double* x = av.data() + r * rv.cols;
    const double s = 1.0 / (detail::l2norm(rv.cols, x) + kNormEps);
    K().scale(rv.cols, s, x, out.data() + r * rv.cols);
  }
  return push(
      std::move(out), at(a).needs_grad,
      [a, rv](Tape& t, std::uint32_t self) {
        const Tensor& g = t.nodes_[self].grad;
        if (!t.at(a).needs_grad) return;
        const Tensor& av2 = t.at(a).value;
        double* ga = t.at(a).grad.data();
        for (std::size_t r = 0; r < rv.rows; ++r) {
          const double* x = av2.data() + r * rv.cols;
          const double* grow = g.data() + r * rv.cols;
          const double norm = detail::l2norm(rv.cols, x);
          const double s = 1.0 / (norm + kNormEps);
          const double d = K().dot(rv.cols, grow, x);
          // gx = s*g - (s^2 * <g,x> / ||x||) * x; the guarded norm keeps the
          // zero-row case finite (the dot product is zero there).
          const double factor =
              (d == 0.0) ? 0.0 : s * s * d / std::max(norm, kProbFloor);
          double* garow = ga + r * rv.cols;
          K().axpy(rv.cols, s, grow, garow);
          K().axpy(rv.cols, -factor, x, garow);
        }
      });
}

Var Tape::pairwise_distance(Var f, Var p) {
  const Tensor& fv = at(f).value;
  const Tensor& pv = at(p).value;
  if (fv.rank() != 2 || pv.rank() != 2 || fv.dim(1) != pv.dim(1)) {
    throw shape_error("pairwise_distance: incompatible shapes " +
                      shape_to_string(fv.shape()) + " and " +
                      shape_to_string(pv.shape()));
  }
  const std::size_t rows = fv.dim(0), n = pv.dim(0), d = fv.dim(1);
  Tensor out({rows, n});
  for (std::size_t b = 0; b < rows; ++b) {
    for (std::size_t j = 0; j < n; ++j) {
      out.at(b, j) =
          std::sqrt(K().sqdist(d, fv.data() + b * d, pv.data() + j * d));
    }
  }
  bool ng = at(f).needs_grad || at(p).needs_grad;
  return push(
      std::move(out), ng, [f, p, rows, n, d](Tape& t, std::uint32_t self) {
        const Tensor& g = t.nodes_[self].grad;
        const Tensor& dist = t.nodes_[self].value;
        const Tensor& fv2 = t.at(f).value;
        const Tensor& pv2 = t.at(p).value;
        const bool need_f = t.at(f).needs_grad;
        const bool need_p = t.at(p).needs_grad;
        std::vector<double> diff(d);
        for (std::size_t b = 0; b < rows; ++b) {
          for (std::size_t j = 0; j < n; ++j) {
            const double gv = g.at(b, j);
            if (gv == 0.0) continue;
            const double c = gv / std::max(dist.at(b, j), kNormEps);
            K().sub(d, fv2.data() + b * d, pv2.data() + j * d, diff.data());
            if (need_f) K().axpy(d, c, diff.data(), t.at(f).grad.data() + b * d);
            if (need_p)
              K().axpy(d, -c, diff.data(), t.at(p).grad.data() + j * d);
          }
        }
      });
}

Var Tape::softmax_rows(Var z, double sc) {
  const Tensor& zv = at(z).value;
  const RowView rv = as_rows(zv, "softmax_rows");
  if (zv.size() == 0) throw shape_error("softmax_rows: empty input");
  Tensor out(zv.shape());
  for (std::size_t r = 0; r < rv.rows; ++r) {
    detail::softmax_fill(rv.cols, zv.data() + r * rv.cols, sc,
                         out.data() + r * rv.cols);
  }
  return push(
      std::move(out), at(z).needs_grad,
      [z, sc, rv](Tape& t, std::uint32_t self) {
        if (!t.at(z).needs_grad) return;
        const Tensor& g = t.nodes_[self].grad;
        const Tensor& p = t.nodes_[self].value;
        double* gz = t.at(z).grad.data();
        for (std::size_t r = 0; r < rv.rows; ++r) {
          const double* prow = p.data() + r * rv.cols;
          const double* grow = g.data() + r * rv.cols;
          const double inner = K().dot(rv.cols, grow, prow);
          double* gzrow = gz + r * rv.cols;
          for (std::size_t j = 0; j < rv.cols; ++j) {
            gzrow[j] += sc * prow[j] * (grow[j] - inner);
          }
        }
      });
}

Var Tape::sum(Var a) {
  const Tensor& av = at(a).value;
  Tensor out = Tensor::scalar(K().sum(av.size(), av.data()));
  return push(std::move(out), at(a).needs_grad,
              [a](Tape& t, std::uint32_t self) {
                if (!t.at(a).needs_grad) return;
                const double gv = t.nodes_[self].grad[0];
                double* ga = t.at(a).grad.data();
                const std::size_t n = t.at(a).value.size();
                for (std::size_t i = 0; i < n; ++i) ga[i] += gv;
              });
}

Var Tape::mean(Var a) {
  const Tensor& av = at(a).value;
  if (av.size() == 0) throw shape_error("mean: empty input");
  const double inv = 1.0 / static_cast<double>(av.size());
  Tensor out = Tensor::scalar(K().sum(av.size(), av.data()) * inv);
  return push(std::move(out), at(a).needs_grad,
              [a, inv](Tape& t, std::uint32_t self) {
                if (!t.at(a).needs_grad) return;
                const double gv = t.nodes_[self].grad[0] * inv;
                double* ga = t.at(a).grad.data();
                const std::size_t n = t.at(a).value.size();
                for (std::size_t i = 0; i < n; ++i) ga[i] += gv;
              });
}

Var Tape::max(Var a) {
  const Tensor& av = at(a).value;
  if (av.size() == 0) throw shape_error("max: empty input");
  std::size_t arg = 0;
  for (std::size_t i = 1; i < av.size(); ++i) {
    if (av[i] > av[arg]) arg = i;
  }
  Tensor out = Tensor::scalar(av[arg]);
  return push(std::move(out), at(a).needs_grad,
              [a, arg](Tape& t, std::uint32_t self) {
                if (!t.at(a).needs_grad) return;
                t.at(a).grad[arg] += t.nodes_[self].grad[0];
              });
}

Var Tape::row_sum(Var a) {
  const Tensor& av = at(a).value;
  if (av.rank() != 2) {
    throw shape_error("row_sum: expected rank 2, got " +
                      shape_to_string(av.shape()));
  }
  const std::size_t rows = av.dim(0), n = av.dim(1);
  Tensor out({rows});
  for (std::size_t r = 0; r < rows; ++r) {
    out[r] = K().sum(n, av.data() + r * n);
  }
  return push(std::move(out), at(a).needs_grad,
              [a, rows, n](Tape& t, std::uint32_t self) {
                if (!t.at(a).needs_grad) return;
                const Tensor& g = t.nodes_[self].grad;
                double* ga = t.at(a).grad.data();
                for (std::size_t r = 0; r < rows; ++r) {
                  const double gv = g[r];
                  for (std::size_t j = 0; j < n; ++j) ga[r * n + j] += gv;
                }
              });
}

Var Tape::row_mean(Var a) {
  const Tensor& av = at(a).value;
  if (av.rank() != 2) {
    throw shape_error("row_mean: expected rank 2, got " +
                      shape_to_string(av.shape()));
  }
  const std::size_t rows = av.dim(0), n = av.dim(1);
  if (n == 0) throw shape_error("row_mean: empty rows");
  const double inv = 1.0 / static_cast<double>(n);
  Tensor out({rows});
  for (std::size_t r = 0; r < rows; ++r) {
    out[r] = K().sum(n, av.data() + r * n) * inv;
  }
  return push(std::move(out), at(a).needs_grad,
              [a, rows, n, inv](Tape& t, std::uint32_t self) {
                if (!t.at(a).needs_grad) return;
                const Tensor& g = t.nodes_[self].grad;
                double* ga = t.at(a).grad.data();
                for (std::size_t r = 0; r < rows; ++r) {
                  const double gv = g[r] * inv;
                  for (std::size_t j = 0; j < n; ++j) ga[r * n + j] += gv;
                }
              });
}

Var Tape::pick_per_row(Var m, std::vector<std::size_t> cols) {
  const Tensor& mv = at(m).value;
  if (mv.rank() != 2 || cols.size() != mv.dim(0)) {
    throw shape_error("pick_per_row: need (B×n) and B column indices");
  }
  const std::size_t rows = mv.dim(0), n = mv.dim(1);
  Tensor out({rows});
  for (std::size_t r = 0; r < rows; ++r) {
    if (cols[r] >= n) throw shape_error("pick_per_row: column out of range");
    out[r] = mv.at(r, cols[r]);
  }
  return push(std::move(out), at(m).needs_grad,
              [m, cols = std::move(cols), n](Tape& t, std::uint32_t self) {
                if (!t.at(m).needs_grad) return;
                const Tensor& g = t.nodes_[self].grad;
                double* gm = t.at(m).grad.data();
                for (std::size_t r = 0; r < cols.size(); ++r) {
                  gm[r * n + cols[r]] += g[r];
                }
              });
}

Var Tape::reshape(Var a, std::vector<std::size_t> shape) {
  Tensor out = at(a).value.reshaped(std::move(shape));
  return push(std::move(out), at(a).needs_grad,
              [a](Tape& t, std::uint32_t self) {
                if (!t.at(a).needs_grad) return;
                const Tensor& g = t.nodes_[self].grad;
                K().axpy(g.size(), 1.0, g.data(), t.at(a).grad.data());
              });
}

void Tape::backward(Var loss) {
  if (ran_backward_) throw error("tape: backward() already ran");
  Node& ln = at(loss);
  if (ln.value.size() != 1) {
    throw shape_error("backward: loss must hold a single element, got " +
                      shape_to_string(ln.value.shape()));
  }
  ran_backward_ = true;
  for (Node& n : nodes_) n.grad = Tensor(n.value.shape());
  ln.grad[0] = 1.0;
  for (std::uint32_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.back && n.needs_grad) n.back(*this, i);
  }
}

}  // namespace dismax
