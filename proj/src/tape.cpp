#include "cnenet/tape.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cnenet/error.hpp"

namespace cne {

// ---- Tape -----------------------------------------------------------------

Var Tape::constant(NdArray value) { return push(std::move(value), nullptr); }

Var Tape::parameter(const NdArray& param) {
  Node node;
  node.param = &param;
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Var Tape::push(NdArray value, BackwardFn backward) {
  Node node;
  node.owned = std::move(value);
  node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

const NdArray& Tape::value(Var v) const {
  const auto& n = nodes_.at(v.id);
  return n.param ? *n.param : n.owned;
}

std::span<const double> Tape::grad(Var v) const { return nodes_.at(v.id).grad; }

std::span<double> Tape::grad_mut(std::size_t id) {
  auto& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(value(Var{id}).size(), 0.0);
  return n.grad;
}

void Tape::backward(Var loss, double seed) {
  if (value(loss).size() != 1) {
    throw DimensionError("backward needs a single-element loss, got " +
                         shape_to_string(value(loss).shape()));
  }
  for (auto& n : nodes_) n.grad.clear();
  grad_mut(loss.id)[0] = seed;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (n.grad.empty()) continue;
    if (n.param) {
      n.param->accumulate_grad(n.grad);
    } else if (n.backward) {
      n.backward(*this, i);
    }
  }
}

// ---- kernels ----------------------------------------------------------------

namespace {

void require_2d(const NdArray& a, const char* op) {
  if (a.rank() == 0 || a.rank() > 2) {
    throw DimensionError(std::string(op) + ": expected a vector or matrix, got " +
                         shape_to_string(a.shape()));
  }
}

// c[m x n] += a[m x k] * b[k x n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// c[m x n] += a[m x k] * b[n x k]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      c[i * n + j] += s;
    }
  }
}

// c[m x n] += a[k x m]^T * b[k x n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* ap = a + p * m;
    const double* bp = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = ap[i];
      double* ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

Shape result_shape(const NdArray& a, std::size_t rows, std::size_t cols) {
  if (a.rank() == 1 && rows == 1) return {cols};
  return {rows, cols};
}

}  // namespace

NdArray matmul(const NdArray& a, const NdArray& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols();
  const std::size_t kb = b.rank() == 1 ? b.size() : b.rows();
  const std::size_t n = b.rank() == 1 ? 1 : b.cols();
  if (k != kb) {
    throw DimensionError("matmul: inner dimensions disagree for " + shape_to_string(a.shape()) +
                         " and " + shape_to_string(b.shape()));
  }
  NdArray c(result_shape(a, m, n));
  gemm_nn(a.ptr(), b.ptr(), c.ptr(), m, k, n);
  return c;
}

NdArray softmax(const NdArray& x, std::span<const std::uint8_t> key_mask) {
  require_2d(x, "softmax");
  const std::size_t rows = x.rows(), cols = x.cols();
  if (!key_mask.empty() && key_mask.size() != cols) {
    throw DimensionError("softmax: mask length " + std::to_string(key_mask.size()) +
                         " does not match " + shape_to_string(x.shape()));
  }
  for (double v : x.data()) {
    if (!std::isfinite(v)) throw NumericError("softmax: non-finite input");
  }
  NdArray y(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    auto in = x.row(r);
    auto out = y.row(r);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < cols; ++j) {
      if (key_mask.empty() || key_mask[j]) mx = std::max(mx, in[j]);
    }
    if (!std::isfinite(mx)) throw DimensionError("softmax: every column is masked");
    double total = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      if (key_mask.empty() || key_mask[j]) {
        out[j] = std::exp(in[j] - mx);
        total += out[j];
      }
    }
    for (auto& v : out) v /= total;
  }
  return y;
}

double cross_entropy(const NdArray& probs, const NdArray& y_onehot, double floor) {
  if (probs.size() != y_onehot.size()) {
    throw DimensionError("cross_entropy: " + shape_to_string(probs.shape()) + " vs " +
                         shape_to_string(y_onehot.shape()));
  }
  std::size_t ones = 0, target = 0;
  for (std::size_t i = 0; i < y_onehot.size(); ++i) {
    if (y_onehot[i] == 1.0) {
      ++ones;
      target = i;
    } else if (y_onehot[i] != 0.0) {
      ones = 2;
    }
  }
  if (ones != 1) throw DataError("cross_entropy: label vector is not one-hot");
  return -std::log(std::max(probs[target], floor));
}

// ---- differentiable ops -------------------------------------------------

Var matmul(Tape& t, Var a, Var b) {
  NdArray c = matmul(t.value(a), t.value(b));
  return t.push(std::move(c), [a, b](Tape& t, std::size_t self) {
    const auto& av = t.value(a);
    const auto& bv = t.value(b);
    const std::size_t m = av.rows(), k = av.cols();
    const std::size_t n = bv.rank() == 1 ? 1 : bv.cols();
    auto gc = t.grad_mut(self);
    // dA = dC * B^T, dB = A^T * dC
    gemm_nt(gc.data(), bv.ptr(), t.grad_mut(a.id).data(), m, n, k);
    gemm_tn(av.ptr(), gc.data(), t.grad_mut(b.id).data(), k, m, n);
  });
}

Var matmul_bt(Tape& t, Var a, Var b) {
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  require_2d(av, "matmul_bt");
  require_2d(bv, "matmul_bt");
  if (av.cols() != bv.cols()) {
    throw DimensionError("matmul_bt: column counts disagree for " + shape_to_string(av.shape()) +
                         " and " + shape_to_string(bv.shape()));
  }
  const std::size_t m = av.rows(), k = av.cols(), n = bv.rows();
  NdArray c(result_shape(av, m, n));
  gemm_nt(av.ptr(), bv.ptr(), c.ptr(), m, k, n);
  return t.push(std::move(c), [a, b, m, k, n](Tape& t, std::size_t self) {
    auto gc = t.grad_mut(self);
    // dA = dC * B, dB = dC^T * A
    gemm_nn(gc.data(), t.value(b).ptr(), t.grad_mut(a.id).data(), m, n, k);
    gemm_tn(gc.data(), t.value(a).ptr(), t.grad_mut(b.id).data(), n, m, k);
  });
}

Var add(Tape& t, Var a, Var b) {
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  if (av.shape() != bv.shape()) {
    throw DimensionError("add: " + shape_to_string(av.shape()) + " vs " +
                         shape_to_string(bv.shape()));
  }
  NdArray c = av;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] += bv[i];
  return t.push(std::move(c), [a, b](Tape& t, std::size_t self) {
    auto g = t.grad_mut(self);
    auto ga = t.grad_mut(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    auto gb = t.grad_mut(b.id);
    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
  });
}

Var add_bias(Tape& t, Var a, Var bias) {
  const auto& av = t.value(a);
  const auto& bv = t.value(bias);
  require_2d(av, "add_bias");
  if (bv.size() != av.cols()) {
    throw DimensionError("add_bias: bias " + shape_to_string(bv.shape()) + " does not fit " +
                         shape_to_string(av.shape()));
  }
  NdArray c = av;
  const std::size_t rows = c.rows(), cols = c.cols();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < cols; ++j) c.at(r, j) += bv[j];
  return t.push(std::move(c), [a, bias, rows, cols](Tape& t, std::size_t self) {
    auto g = t.grad_mut(self);
    auto ga = t.grad_mut(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    auto gb = t.grad_mut(bias.id);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < cols; ++j) gb[j] += g[r * cols + j];
  });
}

Var scale(Tape& t, Var a, double c) {
  NdArray y = t.value(a);
  for (auto& v : y.data()) v *= c;
  return t.push(std::move(y), [a, c](Tape& t, std::size_t self) {
    auto g = t.grad_mut(self);
    auto ga = t.grad_mut(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
  });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Var gelu(Tape& t, Var a) {
  NdArray y = t.value(a);
  for (auto& v : y.data()) {
    const double x = v;
    v = 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
  }
  return t.push(std::move(y), [a](Tape& t, std::size_t self) {
    auto g = t.grad_mut(self);
    auto ga = t.grad_mut(a.id);
    const auto& xv = t.value(a);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = xv[i];
      const double u = kGeluC * (x + kGeluA * x * x * x);
      const double th = std::tanh(u);
      const double du = kGeluC * (1.0 + 3.0 * kGeluA * x * x);
      ga[i] += g[i] * (0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * du);
    }
  });
}

Var softmax_rows(Tape& t, Var a, std::span<const std::uint8_t> key_mask) {
  NdArray y = softmax(t.value(a), key_mask);
  return t.push(std::move(y), [a](Tape& t, std::size_t self) {
    const auto& yv = t.value(Var{self});
    auto g = t.grad_mut(self);
    auto ga = t.grad_mut(a.id);
    const std::size_t rows = yv.rows(), cols = yv.cols();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* yr = yv.ptr() + r * cols;
      const double* gr = g.data() + r * cols;
      double dot = 0.0;
      for (std::size_t j = 0; j < cols; ++j) dot += yr[j] * gr[j];
      for (std::size_t j = 0; j < cols; ++j) ga[r * cols + j] += yr[j] * (gr[j] - dot);
    }
  });
}

Var layer_norm(Tape& t, Var a, Var gain, Var bias, double eps) {
  const auto& xv = t.value(a);
  require_2d(xv, "layer_norm");
  const std::size_t rows = xv.rows(), cols = xv.cols();
  if (t.value(gain).size() != cols || t.value(bias).size() != cols) {
    throw DimensionError("layer_norm: gain/bias do not fit " + shape_to_string(xv.shape()));
  }
  NdArray xhat(xv.shape());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    auto in = xv.row(r);
    double mean = 0.0;
    for (double v : in) mean += v;
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (double v : in) var += (v - mean) * (v - mean);
    var /= static_cast<double>(cols);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    auto out = xhat.row(r);
    for (std::size_t j = 0; j < cols; ++j) out[j] = (in[j] - mean) * inv_std[r];
  }
  NdArray y = xhat;
  const auto& gv = t.value(gain);
  const auto& bv = t.value(bias);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < cols; ++j) y.at(r, j) = xhat.at(r, j) * gv[j] + bv[j];
  return t.push(std::move(y), [a, gain, bias, rows, cols, xhat = std::move(xhat),
                               inv_std = std::move(inv_std)](Tape& t, std::size_t self) {
    auto g = t.grad_mut(self);
    auto ga = t.grad_mut(a.id);
    auto gg = t.grad_mut(gain.id);
    auto gb = t.grad_mut(bias.id);
    const auto& gv = t.value(gain);
    const double n = static_cast<double>(cols);
    std::vector<double> dxhat(cols);
    for (std::size_t r = 0; r < rows; ++r) {
      double mean_d = 0.0, mean_dx = 0.0;
      for (std::size_t j = 0; j < cols; ++j) {
        const double gy = g[r * cols + j];
        const double xh = xhat.at(r, j);
        gg[j] += gy * xh;
        gb[j] += gy;
        dxhat[j] = gy * gv[j];
        mean_d += dxhat[j];
        mean_dx += dxhat[j] * xh;
      }
      mean_d /= n;
      mean_dx /= n;
      for (std::size_t j = 0; j < cols; ++j) {
        ga[r * cols + j] += inv_std[r] * (dxhat[j] - mean_d - xhat.at(r, j) * mean_dx);
      }
    }
  });
}

Var dropout(Tape& t, Var a, double rate, Rng& rng) {
  if (rate <= 0.0) return a;
  if (rate >= 1.0) throw ConfigError("dropout rate must be below 1");
  const double keep_scale = 1.0 / (1.0 - rate);
  NdArray y = t.value(a);
  std::vector<double> mask(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    mask[i] = rng.uniform() < rate ? 0.0 : keep_scale;
    y[i] *= mask[i];
  }
  return t.push(std::move(y), [a, mask = std::move(mask)](Tape& t, std::size_t self) {
    auto g = t.grad_mut(self);
    auto ga = t.grad_mut(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * mask[i];
  });
}

Var gather_rows(Tape& t, Var table, std::span<const std::size_t> rows) {
  const auto& tv = t.value(table);
  require_2d(tv, "gather_rows");
  const std::size_t cols = tv.cols();
  if (rows.empty()) throw DimensionError("gather_rows: no rows requested");
  NdArray y({rows.size(), cols});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= tv.rows()) {
      throw DimensionError("gather_rows: row " + std::to_string(rows[i]) + " outside " +
                           shape_to_string(tv.shape()));
    }
    std::copy_n(tv.ptr() + rows[i] * cols, cols, y.ptr() + i * cols);
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return t.push(std::move(y), [table, cols, idx = std::move(idx)](Tape& t, std::size_t self) {
    auto g = t.grad_mut(self);
    auto gt = t.grad_mut(table.id);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < cols; ++j) gt[idx[i] * cols + j] += g[i * cols + j];
  });
}

Var slice_rows(Tape& t, Var a, std::size_t begin, std::size_t count) {
  const auto& av = t.value(a);
  require_2d(av, "slice_rows");
  if (count == 0 || begin + count > av.rows()) {
    throw DimensionError("slice_rows: [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") outside " +
                         shape_to_string(av.shape()));
  }
  const std::size_t cols = av.cols();
  NdArray y({count, cols});
  std::copy_n(av.ptr() + begin * cols, count * cols, y.ptr());
  return t.push(std::move(y), [a, begin, cols](Tape& t, std::size_t self) {
    auto g = t.grad_mut(self);
    auto ga = t.grad_mut(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[begin * cols + i] += g[i];
  });
}

Var slice_cols(Tape& t, Var a, std::size_t begin, std::size_t width) {
  const auto& av = t.value(a);
  require_2d(av, "slice_cols");
  const std::size_t rows = av.rows(), cols = av.cols();
  if (width == 0 || begin + width > cols) {
    throw DimensionError("slice_cols: columns outside " + shape_to_string(av.shape()));
  }
  NdArray y({rows, width});
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(av.ptr() + r * cols + begin, width, y.ptr() + r * width);
  return t.push(std::move(y), [a, begin, width, rows, cols](Tape& t, std::size_t self) {
    auto g = t.grad_mut(self);
    auto ga = t.grad_mut(a.id);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < width; ++j) ga[r * cols + begin + j] += g[r * width + j];
  });
}

Var concat_cols(Tape& t, std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: nothing to concatenate");
  const std::size_t rows = t.value(parts[0]).rows();
  std::size_t total = 0;
  std::vector<std::size_t> widths;
  for (auto p : parts) {
    const auto& v = t.value(p);
    if (v.rows() != rows) throw DimensionError("concat_cols: row counts disagree");
    widths.push_back(v.cols());
    total += v.cols();
  }
  NdArray y({rows, total});
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& v = t.value(parts[k]);
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(v.ptr() + r * widths[k], widths[k], y.ptr() + r * total + off);
    off += widths[k];
  }
  std::vector<Var> ins(parts.begin(), parts.end());
  return t.push(std::move(y), [ins = std::move(ins), widths = std::move(widths), rows,
                               total](Tape& t, std::size_t self) {
    auto g = t.grad_mut(self);
    std::size_t off = 0;
    for (std::size_t k = 0; k < ins.size(); ++k) {
      auto gk = t.grad_mut(ins[k].id);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < widths[k]; ++j) gk[r * widths[k] + j] += g[r * total + off + j];
      off += widths[k];
    }
  });
}

Var cross_entropy(Tape& t, Var probs, std::size_t target, double floor) {
  const auto& pv = t.value(probs);
  if (target >= pv.size()) {
    throw DataError("cross_entropy: class " + std::to_string(target) + " outside " +
                    shape_to_string(pv.shape()));
  }
  const double p = pv[target];
  NdArray y({1}, -std::log(std::max(p, floor)));
  return t.push(std::move(y), [probs, target, p, floor](Tape& t, std::size_t self) {
    if (p <= floor) return;
    t.grad_mut(probs.id)[target] += -t.grad_mut(self)[0] / p;
  });
}

Var sum(Tape& t, std::span<const Var> scalars) {
  double total = 0.0;
  for (auto s : scalars) {
    const auto& v = t.value(s);
    if (v.size() != 1) throw DimensionError("sum: expected scalars, got " + shape_to_string(v.shape()));
    total += v[0];
  }
  std::vector<Var> ins(scalars.begin(), scalars.end());
  return t.push(NdArray({1}, total), [ins = std::move(ins)](Tape& t, std::size_t self) {
    const double g = t.grad_mut(self)[0];
    for (auto s : ins) t.grad_mut(s.id)[0] += g;
  });
}

Var sum_squares(Tape& t, Var a) {
  double total = 0.0;
  for (double v : t.value(a).data()) total += v * v;
  return t.push(NdArray({1}, total), [a](Tape& t, std::size_t self) {
    const double g = t.grad_mut(self)[0];
    const auto& av = t.value(a);
    auto ga = t.grad_mut(a.id);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += 2.0 * g * av[i];
  });
}

// ---- grad_check ------------------------------------------------------------

GradCheckResult grad_check(const LossBuilder& loss, std::span<NdArray* const> params, double eps) {
  auto evaluate = [&]() {
    Tape t;
    const double v = t.value(loss(t))[0];
    if (!std::isfinite(v)) throw NumericError("grad_check: loss is not finite");
    return v;
  };

  for (auto* p : params) p->zero_grad();
  {
    Tape t;
    Var l = loss(t);
    if (!std::isfinite(t.value(l)[0])) throw NumericError("grad_check: loss is not finite");
    t.backward(l);
  }

  GradCheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    NdArray& p = *params[pi];
    const std::vector<double> analytic(p.grad().begin(), p.grad().end());
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p[i];
      p[i] = saved + eps;
      const double up = evaluate();
      p[i] = saved - eps;
      const double down = evaluate();
      p[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
      const double rel = std::abs(analytic[i] - numeric) / denom;
      ++result.entries;
      if (rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_param = pi;
        result.worst_index = i;
        result.analytic = analytic[i];
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace cne
