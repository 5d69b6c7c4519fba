#include "seldkd/nn/ops.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace seldkd::nn {

namespace {

void gemm_rm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a,
             int lda, const double* b, int ldb, double beta, double* c, int ldc) {
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

void check(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

std::vector<double>& scratch_buffer() {
  thread_local std::vector<double> buf;
  return buf;
}

constexpr double kProbClamp = 1e-7;

double clamp_prob(double p) { return std::min(1.0 - kProbClamp, std::max(kProbClamp, p)); }

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise

Tensor add(const Tensor& a, const Tensor& b) { return add_scaled(a, b, 1.0, 1.0); }
Tensor sub(const Tensor& a, const Tensor& b) { return add_scaled(a, b, 1.0, -1.0); }

Tensor add_scaled(const Tensor& a, const Tensor& b, double ca, double cb) {
  check_same_shape(a, b, "add_scaled");
  const std::int64_t n = a.numel();
  std::vector<double> v(static_cast<std::size_t>(n));
  const double* pa = a.data();
  const double* pb = b.data();
  for (std::int64_t i = 0; i < n; ++i) v[i] = ca * pa[i] + cb * pb[i];
  Tensor ta = a, tb = b;
  return make_op_node(a.shape(), std::move(v), {a, b}, [ta, tb, ca, cb](Node& out) mutable {
    const std::int64_t n = out.numel();
    if (ta.requires_grad()) {
      double* g = ta.grad();
      for (std::int64_t i = 0; i < n; ++i) g[i] += ca * out.grad[i];
    }
    if (tb.requires_grad()) {
      double* g = tb.grad();
      for (std::int64_t i = 0; i < n; ++i) g[i] += cb * out.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  const std::int64_t n = a.numel();
  std::vector<double> v(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) v[i] = a.data()[i] * b.data()[i];
  Tensor ta = a, tb = b;
  return make_op_node(a.shape(), std::move(v), {a, b}, [ta, tb](Node& out) mutable {
    const std::int64_t n = out.numel();
    if (ta.requires_grad()) {
      double* g = ta.grad();
      const double* pb = tb.data();
      for (std::int64_t i = 0; i < n; ++i) g[i] += pb[i] * out.grad[i];
    }
    if (tb.requires_grad()) {
      double* g = tb.grad();
      const double* pa = ta.data();
      for (std::int64_t i = 0; i < n; ++i) g[i] += pa[i] * out.grad[i];
    }
  });
}

Tensor scale(const Tensor& a, double c) {
  const std::int64_t n = a.numel();
  std::vector<double> v(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) v[i] = c * a.data()[i];
  Tensor ta = a;
  return make_op_node(a.shape(), std::move(v), {a}, [ta, c](Node& out) mutable {
    if (!ta.requires_grad()) return;
    double* g = ta.grad();
    const std::int64_t n = out.numel();
    for (std::int64_t i = 0; i < n; ++i) g[i] += c * out.grad[i];
  });
}

Tensor relu(const Tensor& x) {
  const std::int64_t n = x.numel();
  std::vector<double> v(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) v[i] = x.data()[i] > 0.0 ? x.data()[i] : 0.0;
  Tensor tx = x;
  return make_op_node(x.shape(), std::move(v), {x}, [tx](Node& out) mutable {
    if (!tx.requires_grad()) return;
    double* g = tx.grad();
    const double* px = tx.data();
    const std::int64_t n = out.numel();
    for (std::int64_t i = 0; i < n; ++i)
      if (px[i] > 0.0) g[i] += out.grad[i];
  });
}

Tensor sigmoid(const Tensor& x) {
  const std::int64_t n = x.numel();
  std::vector<double> v(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) v[i] = 1.0 / (1.0 + std::exp(-x.data()[i]));
  Tensor tx = x;
  return make_op_node(x.shape(), std::move(v), {x}, [tx](Node& out) mutable {
    if (!tx.requires_grad()) return;
    double* g = tx.grad();
    const std::int64_t n = out.numel();
    for (std::int64_t i = 0; i < n; ++i) {
      const double y = out.value[i];
      g[i] += out.grad[i] * y * (1.0 - y);
    }
  });
}

Tensor swish(const Tensor& x) {
  const std::int64_t n = x.numel();
  std::vector<double> v(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const double s = 1.0 / (1.0 + std::exp(-x.data()[i]));
    v[i] = x.data()[i] * s;
  }
  Tensor tx = x;
  return make_op_node(x.shape(), std::move(v), {x}, [tx](Node& out) mutable {
    if (!tx.requires_grad()) return;
    double* g = tx.grad();
    const double* px = tx.data();
    const std::int64_t n = out.numel();
    for (std::int64_t i = 0; i < n; ++i) {
      const double s = 1.0 / (1.0 + std::exp(-px[i]));
      g[i] += out.grad[i] * (s + px[i] * s * (1.0 - s));
    }
  });
}

Tensor glu_lastdim(const Tensor& x) {
  const auto& shape = x.shape();
  check(!shape.empty() && shape.back() % 2 == 0, "glu_lastdim: last dim must be even");
  const int d2 = shape.back();
  const int d = d2 / 2;
  const std::int64_t rows = x.numel() / d2;
  std::vector<int> out_shape = shape;
  out_shape.back() = d;
  std::vector<double> v(static_cast<std::size_t>(rows * d));
  const double* px = x.data();
  for (std::int64_t r = 0; r < rows; ++r)
    for (int i = 0; i < d; ++i) {
      const double a = px[r * d2 + i];
      const double s = 1.0 / (1.0 + std::exp(-px[r * d2 + d + i]));
      v[r * d + i] = a * s;
    }
  Tensor tx = x;
  return make_op_node(std::move(out_shape), std::move(v), {x}, [tx, rows, d, d2](Node& out) mutable {
    if (!tx.requires_grad()) return;
    double* g = tx.grad();
    const double* px = tx.data();
    for (std::int64_t r = 0; r < rows; ++r)
      for (int i = 0; i < d; ++i) {
        const double go = out.grad[r * d + i];
        const double a = px[r * d2 + i];
        const double s = 1.0 / (1.0 + std::exp(-px[r * d2 + d + i]));
        g[r * d2 + i] += go * s;
        g[r * d2 + d + i] += go * a * s * (1.0 - s);
      }
  });
}

Tensor softmax_lastdim(const Tensor& x) {
  const int d = x.shape().back();
  const std::int64_t rows = x.numel() / d;
  std::vector<double> v(x.values().size());
  const double* px = x.data();
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* row = px + r * d;
    double mx = row[0];
    for (int i = 1; i < d; ++i) mx = std::max(mx, row[i]);
    double sum = 0.0;
    for (int i = 0; i < d; ++i) {
      v[r * d + i] = std::exp(row[i] - mx);
      sum += v[r * d + i];
    }
    const double inv = 1.0 / sum;
    for (int i = 0; i < d; ++i) v[r * d + i] *= inv;
  }
  Tensor tx = x;
  return make_op_node(x.shape(), std::move(v), {x}, [tx, rows, d](Node& out) mutable {
    if (!tx.requires_grad()) return;
    double* g = tx.grad();
    for (std::int64_t r = 0; r < rows; ++r) {
      const double* y = out.value.data() + r * d;
      const double* go = out.grad.data() + r * d;
      double dot = 0.0;
      for (int i = 0; i < d; ++i) dot += y[i] * go[i];
      for (int i = 0; i < d; ++i) g[r * d + i] += y[i] * (go[i] - dot);
    }
  });
}

Tensor softmax_channel2(const Tensor& x) {
  check(x.shape().size() == 4 && x.dim(1) == 2, "softmax_channel2: expected [B,2,T,F]");
  const int b = x.dim(0), t = x.dim(2), f = x.dim(3);
  const std::int64_t plane = static_cast<std::int64_t>(t) * f;
  std::vector<double> v(x.values().size());
  const double* px = x.data();
  for (int bi = 0; bi < b; ++bi) {
    const double* x0 = px + (static_cast<std::int64_t>(bi) * 2) * plane;
    const double* x1 = x0 + plane;
    double* y0 = v.data() + (static_cast<std::int64_t>(bi) * 2) * plane;
    double* y1 = y0 + plane;
    for (std::int64_t i = 0; i < plane; ++i) {
      const double mx = std::max(x0[i], x1[i]);
      const double e0 = std::exp(x0[i] - mx);
      const double e1 = std::exp(x1[i] - mx);
      const double inv = 1.0 / (e0 + e1);
      y0[i] = e0 * inv;
      y1[i] = e1 * inv;
    }
  }
  Tensor tx = x;
  return make_op_node(x.shape(), std::move(v), {x}, [tx, b, plane](Node& out) mutable {
    if (!tx.requires_grad()) return;
    double* g = tx.grad();
    for (int bi = 0; bi < b; ++bi) {
      const std::int64_t base = static_cast<std::int64_t>(bi) * 2 * plane;
      for (std::int64_t i = 0; i < plane; ++i) {
        const double y0 = out.value[base + i];
        const double y1 = out.value[base + plane + i];
        const double g0 = out.grad[base + i];
        const double g1 = out.grad[base + plane + i];
        const double dot = y0 * g0 + y1 * g1;
        g[base + i] += y0 * (g0 - dot);
        g[base + plane + i] += y1 * (g1 - dot);
      }
    }
  });
}

Tensor dropout(const Tensor& x, double p, Rng& rng, bool training) {
  if (!training || p <= 0.0) return x;
  check(p < 1.0, "dropout: p must be < 1");
  const std::int64_t n = x.numel();
  auto mask = std::make_shared<std::vector<std::uint8_t>>(static_cast<std::size_t>(n));
  const double keep = 1.0 - p;
  const double inv_keep = 1.0 / keep;
  std::vector<double> v(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const bool on = rng.uniform() >= p;
    (*mask)[i] = on;
    v[i] = on ? x.data()[i] * inv_keep : 0.0;
  }
  Tensor tx = x;
  return make_op_node(x.shape(), std::move(v), {x}, [tx, mask, inv_keep](Node& out) mutable {
    if (!tx.requires_grad()) return;
    double* g = tx.grad();
    const std::int64_t n = out.numel();
    for (std::int64_t i = 0; i < n; ++i)
      if ((*mask)[i]) g[i] += out.grad[i] * inv_keep;
  });
}

// ---------------------------------------------------------------------------
// Linear algebra

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  check(w.shape().size() == 2, "linear: weight must be [out,in]");
  const int in = w.dim(1);
  const int out_dim = w.dim(0);
  check(x.shape().back() == in, "linear: input dim mismatch");
  const std::int64_t rows = x.numel() / in;
  std::vector<int> out_shape = x.shape();
  out_shape.back() = out_dim;
  std::vector<double> v(static_cast<std::size_t>(rows * out_dim));
  gemm_rm(false, true, static_cast<int>(rows), out_dim, in, 1.0, x.data(), in, w.data(), in, 0.0,
          v.data(), out_dim);
  if (b.defined()) {
    check(b.numel() == out_dim, "linear: bias dim mismatch");
    for (std::int64_t r = 0; r < rows; ++r)
      for (int e = 0; e < out_dim; ++e) v[r * out_dim + e] += b.data()[e];
  }
  Tensor tx = x, tw = w, tb = b;
  std::vector<Tensor> parents = b.defined() ? std::vector<Tensor>{x, w, b} : std::vector<Tensor>{x, w};
  return make_op_node(std::move(out_shape), std::move(v), std::move(parents),
                      [tx, tw, tb, rows, in, out_dim](Node& out) mutable {
                        const double* gy = out.grad.data();
                        if (tx.requires_grad())
                          gemm_rm(false, false, static_cast<int>(rows), in, out_dim, 1.0, gy,
                                  out_dim, tw.data(), in, 1.0, tx.grad(), in);
                        if (tw.requires_grad())
                          gemm_rm(true, false, out_dim, in, static_cast<int>(rows), 1.0, gy,
                                  out_dim, tx.data(), in, 1.0, tw.grad(), in);
                        if (tb.defined() && tb.requires_grad()) {
                          double* gb = tb.grad();
                          for (std::int64_t r = 0; r < rows; ++r)
                            for (int e = 0; e < out_dim; ++e) gb[e] += gy[r * out_dim + e];
                        }
                      });
}

Tensor bmm(const Tensor& a, const Tensor& b, bool transb) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  check(sa.size() >= 2 && sa.size() == sb.size(), "bmm: rank mismatch");
  std::int64_t batches = 1;
  for (std::size_t i = 0; i + 2 < sa.size(); ++i) {
    check(sa[i] == sb[i], "bmm: leading dims mismatch");
    batches *= sa[i];
  }
  const int m = sa[sa.size() - 2];
  const int k = sa[sa.size() - 1];
  const int n = transb ? sb[sb.size() - 2] : sb[sb.size() - 1];
  check(transb ? (sb.back() == k) : (sb[sb.size() - 2] == k), "bmm: inner dim mismatch");
  std::vector<int> out_shape(sa.begin(), sa.end() - 2);
  out_shape.push_back(m);
  out_shape.push_back(n);
  std::vector<double> v(static_cast<std::size_t>(batches * m * n));
  const std::int64_t a_stride = static_cast<std::int64_t>(m) * k;
  const std::int64_t b_stride = static_cast<std::int64_t>(k) * n;
  const std::int64_t y_stride = static_cast<std::int64_t>(m) * n;
  for (std::int64_t s = 0; s < batches; ++s)
    gemm_rm(false, transb, m, n, k, 1.0, a.data() + s * a_stride, k, b.data() + s * b_stride,
            transb ? k : n, 0.0, v.data() + s * y_stride, n);
  Tensor ta = a, tb = b;
  return make_op_node(std::move(out_shape), std::move(v), {a, b},
                      [ta, tb, transb, batches, m, n, k, a_stride, b_stride, y_stride](Node& out) mutable {
                        for (std::int64_t s = 0; s < batches; ++s) {
                          const double* gy = out.grad.data() + s * y_stride;
                          const double* pa = ta.data() + s * a_stride;
                          const double* pb = tb.data() + s * b_stride;
                          if (ta.requires_grad()) {
                            double* ga = ta.grad() + s * a_stride;
                            if (!transb)
                              gemm_rm(false, true, m, k, n, 1.0, gy, n, pb, n, 1.0, ga, k);
                            else
                              gemm_rm(false, false, m, k, n, 1.0, gy, n, pb, k, 1.0, ga, k);
                          }
                          if (tb.requires_grad()) {
                            double* gb = tb.grad() + s * b_stride;
                            if (!transb)
                              gemm_rm(true, false, k, n, m, 1.0, pa, k, gy, n, 1.0, gb, n);
                            else
                              gemm_rm(true, false, n, k, m, 1.0, gy, n, pa, k, 1.0, gb, k);
                          }
                        }
                      });
}

Tensor split_heads(const Tensor& x, int heads) {
  check(x.shape().size() == 3, "split_heads: expected [B,T,D]");
  const int b = x.dim(0), t = x.dim(1), d = x.dim(2);
  check(d % heads == 0, "split_heads: D not divisible by heads");
  const int dh = d / heads;
  std::vector<double> v(x.values().size());
  const double* px = x.data();
  for (int bi = 0; bi < b; ++bi)
    for (int h = 0; h < heads; ++h)
      for (int ti = 0; ti < t; ++ti) {
        const double* src = px + (static_cast<std::int64_t>(bi) * t + ti) * d + h * dh;
        double* dst = v.data() + ((static_cast<std::int64_t>(bi) * heads + h) * t + ti) * dh;
        std::memcpy(dst, src, sizeof(double) * dh);
      }
  Tensor tx = x;
  return make_op_node({b, heads, t, dh}, std::move(v), {x}, [tx, b, heads, t, d, dh](Node& out) mutable {
    if (!tx.requires_grad()) return;
    double* g = tx.grad();
    for (int bi = 0; bi < b; ++bi)
      for (int h = 0; h < heads; ++h)
        for (int ti = 0; ti < t; ++ti) {
          const double* src = out.grad.data() + ((static_cast<std::int64_t>(bi) * heads + h) * t + ti) * dh;
          double* dst = g + (static_cast<std::int64_t>(bi) * t + ti) * d + h * dh;
          for (int i = 0; i < dh; ++i) dst[i] += src[i];
        }
  });
}

Tensor merge_heads(const Tensor& x) {
  check(x.shape().size() == 4, "merge_heads: expected [B,H,T,dh]");
  const int b = x.dim(0), heads = x.dim(1), t = x.dim(2), dh = x.dim(3);
  const int d = heads * dh;
  std::vector<double> v(x.values().size());
  const double* px = x.data();
  for (int bi = 0; bi < b; ++bi)
    for (int h = 0; h < heads; ++h)
      for (int ti = 0; ti < t; ++ti) {
        const double* src = px + ((static_cast<std::int64_t>(bi) * heads + h) * t + ti) * dh;
        double* dst = v.data() + (static_cast<std::int64_t>(bi) * t + ti) * d + h * dh;
        std::memcpy(dst, src, sizeof(double) * dh);
      }
  Tensor tx = x;
  return make_op_node({b, t, d}, std::move(v), {x}, [tx, b, heads, t, d, dh](Node& out) mutable {
    if (!tx.requires_grad()) return;
    double* g = tx.grad();
    for (int bi = 0; bi < b; ++bi)
      for (int h = 0; h < heads; ++h)
        for (int ti = 0; ti < t; ++ti) {
          const double* src = out.grad.data() + (static_cast<std::int64_t>(bi) * t + ti) * d + h * dh;
          double* dst = g + ((static_cast<std::int64_t>(bi) * heads + h) * t + ti) * dh;
          for (int i = 0; i < dh; ++i) dst[i] += src[i];
        }
  });
}

// ---------------------------------------------------------------------------
// Convolution / pooling

namespace {

// Gathers a padded patch matrix: col[(c*kh+i)*kw+j][ot*of_out+of].
void im2col(const double* x, int c_in, int t_in, int f_in, int kh, int kw, int pad_t, int pad_f,
            int t_out, int f_out, double* col) {
  const std::int64_t cols = static_cast<std::int64_t>(t_out) * f_out;
  for (int c = 0; c < c_in; ++c)
    for (int i = 0; i < kh; ++i)
      for (int j = 0; j < kw; ++j) {
        double* dst = col + ((static_cast<std::int64_t>(c) * kh + i) * kw + j) * cols;
        const double* src = x + static_cast<std::int64_t>(c) * t_in * f_in;
        for (int ot = 0; ot < t_out; ++ot) {
          const int ti = ot + i - pad_t;
          double* drow = dst + static_cast<std::int64_t>(ot) * f_out;
          if (ti < 0 || ti >= t_in) {
            std::fill(drow, drow + f_out, 0.0);
            continue;
          }
          for (int of = 0; of < f_out; ++of) {
            const int fi = of + j - pad_f;
            drow[of] = (fi < 0 || fi >= f_in) ? 0.0 : src[static_cast<std::int64_t>(ti) * f_in + fi];
          }
        }
      }
}

void col2im_accum(const double* col, int c_in, int t_in, int f_in, int kh, int kw, int pad_t,
                  int pad_f, int t_out, int f_out, double* gx) {
  const std::int64_t cols = static_cast<std::int64_t>(t_out) * f_out;
  for (int c = 0; c < c_in; ++c)
    for (int i = 0; i < kh; ++i)
      for (int j = 0; j < kw; ++j) {
        const double* src = col + ((static_cast<std::int64_t>(c) * kh + i) * kw + j) * cols;
        double* dst = gx + static_cast<std::int64_t>(c) * t_in * f_in;
        for (int ot = 0; ot < t_out; ++ot) {
          const int ti = ot + i - pad_t;
          if (ti < 0 || ti >= t_in) continue;
          const double* srow = src + static_cast<std::int64_t>(ot) * f_out;
          for (int of = 0; of < f_out; ++of) {
            const int fi = of + j - pad_f;
            if (fi >= 0 && fi < f_in) dst[static_cast<std::int64_t>(ti) * f_in + fi] += srow[of];
          }
        }
      }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int pad_t, int pad_f) {
  check(x.shape().size() == 4, "conv2d: input must be [B,C,T,F]");
  check(w.shape().size() == 4, "conv2d: weight must be [Cout,Cin,kh,kw]");
  const int batch = x.dim(0), c_in = x.dim(1), t_in = x.dim(2), f_in = x.dim(3);
  const int c_out = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  check(w.dim(1) == c_in, "conv2d: channel mismatch");
  const int t_out = t_in + 2 * pad_t - kh + 1;
  const int f_out = f_in + 2 * pad_f - kw + 1;
  check(t_out > 0 && f_out > 0, "conv2d: kernel larger than padded input");
  const int k = c_in * kh * kw;
  const std::int64_t plane_out = static_cast<std::int64_t>(t_out) * f_out;
  std::vector<double> v(static_cast<std::size_t>(batch) * c_out * plane_out);
  auto& col = scratch_buffer();
  col.resize(static_cast<std::size_t>(k) * plane_out);
  for (int s = 0; s < batch; ++s) {
    im2col(x.data() + static_cast<std::int64_t>(s) * c_in * t_in * f_in, c_in, t_in, f_in, kh, kw,
           pad_t, pad_f, t_out, f_out, col.data());
    double* y = v.data() + static_cast<std::int64_t>(s) * c_out * plane_out;
    gemm_rm(false, false, c_out, static_cast<int>(plane_out), k, 1.0, w.data(), k, col.data(),
            static_cast<int>(plane_out), 0.0, y, static_cast<int>(plane_out));
    if (b.defined())
      for (int c = 0; c < c_out; ++c) {
        const double bc = b.data()[c];
        double* row = y + static_cast<std::int64_t>(c) * plane_out;
        for (std::int64_t i = 0; i < plane_out; ++i) row[i] += bc;
      }
  }
  Tensor tx = x, tw = w, tb = b;
  std::vector<Tensor> parents = b.defined() ? std::vector<Tensor>{x, w, b} : std::vector<Tensor>{x, w};
  return make_op_node(
      {batch, c_out, t_out, f_out}, std::move(v), std::move(parents),
      [tx, tw, tb, batch, c_in, t_in, f_in, c_out, kh, kw, pad_t, pad_f, t_out, f_out,
       k, plane_out](Node& out) mutable {
        auto& col = scratch_buffer();
        col.resize(static_cast<std::size_t>(k) * plane_out);
        std::vector<double> dcol;
        if (tx.requires_grad()) dcol.resize(static_cast<std::size_t>(k) * plane_out);
        for (int s = 0; s < batch; ++s) {
          const double* gy = out.grad.data() + static_cast<std::int64_t>(s) * c_out * plane_out;
          if (tw.requires_grad() || tx.requires_grad())
            im2col(tx.data() + static_cast<std::int64_t>(s) * c_in * t_in * f_in, c_in, t_in, f_in,
                   kh, kw, pad_t, pad_f, t_out, f_out, col.data());
          if (tw.requires_grad())
            gemm_rm(false, true, c_out, k, static_cast<int>(plane_out), 1.0, gy,
                    static_cast<int>(plane_out), col.data(), static_cast<int>(plane_out), 1.0,
                    tw.grad(), k);
          if (tx.requires_grad()) {
            gemm_rm(true, false, k, static_cast<int>(plane_out), c_out, 1.0, tw.data(), k, gy,
                    static_cast<int>(plane_out), 0.0, dcol.data(), static_cast<int>(plane_out));
            col2im_accum(dcol.data(), c_in, t_in, f_in, kh, kw, pad_t, pad_f, t_out, f_out,
                         tx.grad() + static_cast<std::int64_t>(s) * c_in * t_in * f_in);
          }
          if (tb.defined() && tb.requires_grad()) {
            double* gb = tb.grad();
            for (int c = 0; c < c_out; ++c) {
              const double* row = gy + static_cast<std::int64_t>(c) * plane_out;
              double sum = 0.0;
              for (std::int64_t i = 0; i < plane_out; ++i) sum += row[i];
              gb[c] += sum;
            }
          }
        }
      });
}

Tensor depthwise_conv_time(const Tensor& x, const Tensor& w, const Tensor& b) {
  check(x.shape().size() == 3, "depthwise_conv_time: expected [B,T,D]");
  check(w.shape().size() == 2 && w.dim(0) == x.dim(2), "depthwise_conv_time: weight must be [D,k]");
  const int batch = x.dim(0), t = x.dim(1), d = x.dim(2), k = w.dim(1);
  check(k % 2 == 1, "depthwise_conv_time: kernel must be odd");
  const int half = k / 2;
  std::vector<double> v(x.values().size());
  const double* px = x.data();
  for (int bi = 0; bi < batch; ++bi)
    for (int ti = 0; ti < t; ++ti)
      for (int di = 0; di < d; ++di) {
        double acc = b.defined() ? b.data()[di] : 0.0;
        for (int i = 0; i < k; ++i) {
          const int src_t = ti + i - half;
          if (src_t >= 0 && src_t < t)
            acc += w.data()[di * k + i] * px[(static_cast<std::int64_t>(bi) * t + src_t) * d + di];
        }
        v[(static_cast<std::int64_t>(bi) * t + ti) * d + di] = acc;
      }
  Tensor tx = x, tw = w, tb = b;
  std::vector<Tensor> parents = b.defined() ? std::vector<Tensor>{x, w, b} : std::vector<Tensor>{x, w};
  return make_op_node(x.shape(), std::move(v), std::move(parents),
                      [tx, tw, tb, batch, t, d, k, half](Node& out) mutable {
                        const double* gy = out.grad.data();
                        const bool need_x = tx.requires_grad();
                        const bool need_w = tw.requires_grad();
                        double* gx = need_x ? tx.grad() : nullptr;
                        double* gw = need_w ? tw.grad() : nullptr;
                        for (int bi = 0; bi < batch; ++bi)
                          for (int ti = 0; ti < t; ++ti)
                            for (int di = 0; di < d; ++di) {
                              const double go = gy[(static_cast<std::int64_t>(bi) * t + ti) * d + di];
                              for (int i = 0; i < k; ++i) {
                                const int src_t = ti + i - half;
                                if (src_t < 0 || src_t >= t) continue;
                                const std::int64_t xi =
                                    (static_cast<std::int64_t>(bi) * t + src_t) * d + di;
                                if (need_x) gx[xi] += go * tw.data()[di * k + i];
                                if (need_w) gw[di * k + i] += go * tx.data()[xi];
                              }
                            }
                        if (tb.defined() && tb.requires_grad()) {
                          double* gb = tb.grad();
                          for (int bi = 0; bi < batch; ++bi)
                            for (int ti = 0; ti < t; ++ti)
                              for (int di = 0; di < d; ++di)
                                gb[di] += gy[(static_cast<std::int64_t>(bi) * t + ti) * d + di];
                        }
                      });
}

Tensor maxpool_freq(const Tensor& x, int kf) {
  check(x.shape().size() == 4, "maxpool_freq: expected [B,C,T,F]");
  const int batch = x.dim(0), c = x.dim(1), t = x.dim(2), f = x.dim(3);
  check(f % kf == 0, "maxpool_freq: F not divisible by kernel");
  const int f_out = f / kf;
  const std::int64_t n_out = static_cast<std::int64_t>(batch) * c * t * f_out;
  std::vector<double> v(static_cast<std::size_t>(n_out));
  auto argmax = std::make_shared<std::vector<std::int32_t>>(static_cast<std::size_t>(n_out));
  const double* px = x.data();
  for (std::int64_t row = 0; row < static_cast<std::int64_t>(batch) * c * t; ++row) {
    const double* src = px + row * f;
    for (int of = 0; of < f_out; ++of) {
      int best = of * kf;
      double bv = src[best];
      for (int i = 1; i < kf; ++i)
        if (src[of * kf + i] > bv) {
          bv = src[of * kf + i];
          best = of * kf + i;
        }
      v[row * f_out + of] = bv;
      (*argmax)[row * f_out + of] = best;
    }
  }
  Tensor tx = x;
  return make_op_node({batch, c, t, f_out}, std::move(v), {x},
                      [tx, argmax, batch, c, t, f, f_out](Node& out) mutable {
                        if (!tx.requires_grad()) return;
                        double* g = tx.grad();
                        for (std::int64_t row = 0; row < static_cast<std::int64_t>(batch) * c * t; ++row)
                          for (int of = 0; of < f_out; ++of)
                            g[row * f + (*argmax)[row * f_out + of]] += out.grad[row * f_out + of];
                      });
}

Tensor avgpool_time(const Tensor& x, int k) {
  check(x.shape().size() == 3, "avgpool_time: expected [B,T,D]");
  const int batch = x.dim(0), t = x.dim(1), d = x.dim(2);
  check(t % k == 0, "avgpool_time: T not divisible by factor");
  const int t_out = t / k;
  std::vector<double> v(static_cast<std::size_t>(batch) * t_out * d, 0.0);
  const double inv = 1.0 / k;
  const double* px = x.data();
  for (int bi = 0; bi < batch; ++bi)
    for (int to = 0; to < t_out; ++to)
      for (int i = 0; i < k; ++i) {
        const double* src = px + (static_cast<std::int64_t>(bi) * t + to * k + i) * d;
        double* dst = v.data() + (static_cast<std::int64_t>(bi) * t_out + to) * d;
        for (int di = 0; di < d; ++di) dst[di] += src[di] * inv;
      }
  Tensor tx = x;
  return make_op_node({batch, t_out, d}, std::move(v), {x}, [tx, batch, t, d, k, t_out, inv](Node& out) mutable {
    if (!tx.requires_grad()) return;
    double* g = tx.grad();
    for (int bi = 0; bi < batch; ++bi)
      for (int to = 0; to < t_out; ++to)
        for (int i = 0; i < k; ++i) {
          double* dst = g + (static_cast<std::int64_t>(bi) * t + to * k + i) * d;
          const double* src = out.grad.data() + (static_cast<std::int64_t>(bi) * t_out + to) * d;
          for (int di = 0; di < d; ++di) dst[di] += src[di] * inv;
        }
  });
}

Tensor adaptive_avgpool2d(const Tensor& x, int out_t, int out_f) {
  check(x.shape().size() == 4, "adaptive_avgpool2d: expected [B,C,T,F]");
  const int batch = x.dim(0), c = x.dim(1), t = x.dim(2), f = x.dim(3);
  std::vector<double> v(static_cast<std::size_t>(batch) * c * out_t * out_f, 0.0);
  auto bin = [](int i, int in, int out) {
    return std::pair<int, int>{(i * in) / out, ((i + 1) * in + out - 1) / out};
  };
  const double* px = x.data();
  for (std::int64_t bc = 0; bc < static_cast<std::int64_t>(batch) * c; ++bc) {
    const double* src = px + bc * t * f;
    double* dst = v.data() + bc * out_t * out_f;
    for (int ot = 0; ot < out_t; ++ot) {
      const auto [t0, t1] = bin(ot, t, out_t);
      for (int of = 0; of < out_f; ++of) {
        const auto [f0, f1] = bin(of, f, out_f);
        double sum = 0.0;
        for (int ti = t0; ti < t1; ++ti)
          for (int fi = f0; fi < f1; ++fi) sum += src[static_cast<std::int64_t>(ti) * f + fi];
        dst[ot * out_f + of] = sum / ((t1 - t0) * (f1 - f0));
      }
    }
  }
  Tensor tx = x;
  return make_op_node({batch, c, out_t, out_f}, std::move(v), {x},
                      [tx, batch, c, t, f, out_t, out_f, bin](Node& out) mutable {
                        if (!tx.requires_grad()) return;
                        double* g = tx.grad();
                        for (std::int64_t bc = 0; bc < static_cast<std::int64_t>(batch) * c; ++bc) {
                          double* dst = g + bc * t * f;
                          const double* gy = out.grad.data() + bc * out_t * out_f;
                          for (int ot = 0; ot < out_t; ++ot) {
                            const auto [t0, t1] = bin(ot, t, out_t);
                            for (int of = 0; of < out_f; ++of) {
                              const auto [f0, f1] = bin(of, f, out_f);
                              const double go = gy[ot * out_f + of] / ((t1 - t0) * (f1 - f0));
                              for (int ti = t0; ti < t1; ++ti)
                                for (int fi = f0; fi < f1; ++fi)
                                  dst[static_cast<std::int64_t>(ti) * f + fi] += go;
                            }
                          }
                        }
                      });
}

Tensor upsample_freq_nearest(const Tensor& x, int out_f) {
  check(x.shape().size() == 4, "upsample_freq_nearest: expected [B,C,T,F]");
  const int batch = x.dim(0), c = x.dim(1), t = x.dim(2), f = x.dim(3);
  if (out_f == f) return x;
  std::vector<double> v(static_cast<std::size_t>(batch) * c * t * out_f);
  const double* px = x.data();
  for (std::int64_t row = 0; row < static_cast<std::int64_t>(batch) * c * t; ++row)
    for (int of = 0; of < out_f; ++of)
      v[row * out_f + of] = px[row * f + (of * f) / out_f];
  Tensor tx = x;
  return make_op_node({batch, c, t, out_f}, std::move(v), {x},
                      [tx, batch, c, t, f, out_f](Node& out) mutable {
                        if (!tx.requires_grad()) return;
                        double* g = tx.grad();
                        for (std::int64_t row = 0; row < static_cast<std::int64_t>(batch) * c * t; ++row)
                          for (int of = 0; of < out_f; ++of)
                            g[row * f + (of * f) / out_f] += out.grad[row * out_f + of];
                      });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  check(a.shape().size() == 4 && b.shape().size() == 4, "concat_channels: expected [B,C,T,F]");
  check(a.dim(0) == b.dim(0) && a.dim(2) == b.dim(2) && a.dim(3) == b.dim(3),
        "concat_channels: non-channel dims mismatch");
  const int batch = a.dim(0), c1 = a.dim(1), c2 = b.dim(1), t = a.dim(2), f = a.dim(3);
  const std::int64_t plane = static_cast<std::int64_t>(t) * f;
  std::vector<double> v(static_cast<std::size_t>(batch) * (c1 + c2) * plane);
  for (int bi = 0; bi < batch; ++bi) {
    std::memcpy(v.data() + static_cast<std::int64_t>(bi) * (c1 + c2) * plane,
                a.data() + static_cast<std::int64_t>(bi) * c1 * plane, sizeof(double) * c1 * plane);
    std::memcpy(v.data() + (static_cast<std::int64_t>(bi) * (c1 + c2) + c1) * plane,
                b.data() + static_cast<std::int64_t>(bi) * c2 * plane, sizeof(double) * c2 * plane);
  }
  Tensor ta = a, tb = b;
  return make_op_node({batch, c1 + c2, t, f}, std::move(v), {a, b},
                      [ta, tb, batch, c1, c2, plane](Node& out) mutable {
                        for (int bi = 0; bi < batch; ++bi) {
                          if (ta.requires_grad()) {
                            double* g = ta.grad() + static_cast<std::int64_t>(bi) * c1 * plane;
                            const double* src =
                                out.grad.data() + static_cast<std::int64_t>(bi) * (c1 + c2) * plane;
                            for (std::int64_t i = 0; i < static_cast<std::int64_t>(c1) * plane; ++i)
                              g[i] += src[i];
                          }
                          if (tb.requires_grad()) {
                            double* g = tb.grad() + static_cast<std::int64_t>(bi) * c2 * plane;
                            const double* src =
                                out.grad.data() +
                                (static_cast<std::int64_t>(bi) * (c1 + c2) + c1) * plane;
                            for (std::int64_t i = 0; i < static_cast<std::int64_t>(c2) * plane; ++i)
                              g[i] += src[i];
                          }
                        }
                      });
}

Tensor slice_channels(const Tensor& x, int c0, int c1) {
  check(x.shape().size() == 4, "slice_channels: expected [B,C,T,F]");
  const int batch = x.dim(0), c = x.dim(1), t = x.dim(2), f = x.dim(3);
  check(0 <= c0 && c0 < c1 && c1 <= c, "slice_channels: bad channel range");
  const int c_out = c1 - c0;
  const std::int64_t plane = static_cast<std::int64_t>(t) * f;
  std::vector<double> v(static_cast<std::size_t>(batch) * c_out * plane);
  for (int bi = 0; bi < batch; ++bi)
    std::memcpy(v.data() + static_cast<std::int64_t>(bi) * c_out * plane,
                x.data() + (static_cast<std::int64_t>(bi) * c + c0) * plane,
                sizeof(double) * c_out * plane);
  Tensor tx = x;
  return make_op_node({batch, c_out, t, f}, std::move(v), {x},
                      [tx, batch, c, c0, c_out, plane](Node& out) mutable {
                        if (!tx.requires_grad()) return;
                        for (int bi = 0; bi < batch; ++bi) {
                          double* g = tx.grad() + (static_cast<std::int64_t>(bi) * c + c0) * plane;
                          const double* src =
                              out.grad.data() + static_cast<std::int64_t>(bi) * c_out * plane;
                          for (std::int64_t i = 0; i < static_cast<std::int64_t>(c_out) * plane; ++i)
                            g[i] += src[i];
                        }
                      });
}

Tensor flatten_to_seq(const Tensor& x) {
  check(x.shape().size() == 4, "flatten_to_seq: expected [B,C,T,F]");
  const int batch = x.dim(0), c = x.dim(1), t = x.dim(2), f = x.dim(3);
  std::vector<double> v(x.values().size());
  const double* px = x.data();
  for (int bi = 0; bi < batch; ++bi)
    for (int ci = 0; ci < c; ++ci)
      for (int ti = 0; ti < t; ++ti)
        for (int fi = 0; fi < f; ++fi)
          v[(static_cast<std::int64_t>(bi) * t + ti) * (c * f) + ci * f + fi] =
              px[((static_cast<std::int64_t>(bi) * c + ci) * t + ti) * f + fi];
  Tensor tx = x;
  return make_op_node({batch, t, c * f}, std::move(v), {x}, [tx, batch, c, t, f](Node& out) mutable {
    if (!tx.requires_grad()) return;
    double* g = tx.grad();
    for (int bi = 0; bi < batch; ++bi)
      for (int ci = 0; ci < c; ++ci)
        for (int ti = 0; ti < t; ++ti)
          for (int fi = 0; fi < f; ++fi)
            g[((static_cast<std::int64_t>(bi) * c + ci) * t + ti) * f + fi] +=
                out.grad[(static_cast<std::int64_t>(bi) * t + ti) * (c * f) + ci * f + fi];
  });
}

Tensor mul_bcast_channel(const Tensor& x, const Tensor& w) {
  check(x.shape().size() == 4 && w.shape().size() == 4, "mul_bcast_channel: expected rank-4");
  check(w.dim(1) == 1 && x.dim(0) == w.dim(0) && x.dim(2) == w.dim(2) && x.dim(3) == w.dim(3),
        "mul_bcast_channel: weight must be [B,1,T,F] matching x");
  const int batch = x.dim(0), c = x.dim(1), t = x.dim(2), f = x.dim(3);
  const std::int64_t plane = static_cast<std::int64_t>(t) * f;
  std::vector<double> v(x.values().size());
  for (int bi = 0; bi < batch; ++bi) {
    const double* pw = w.data() + static_cast<std::int64_t>(bi) * plane;
    for (int ci = 0; ci < c; ++ci) {
      const double* px = x.data() + (static_cast<std::int64_t>(bi) * c + ci) * plane;
      double* pv = v.data() + (static_cast<std::int64_t>(bi) * c + ci) * plane;
      for (std::int64_t i = 0; i < plane; ++i) pv[i] = px[i] * pw[i];
    }
  }
  Tensor tx = x, tw = w;
  return make_op_node(x.shape(), std::move(v), {x, w}, [tx, tw, batch, c, plane](Node& out) mutable {
    for (int bi = 0; bi < batch; ++bi) {
      const double* pw = tw.data() + static_cast<std::int64_t>(bi) * plane;
      for (int ci = 0; ci < c; ++ci) {
        const std::int64_t base = (static_cast<std::int64_t>(bi) * c + ci) * plane;
        if (tx.requires_grad()) {
          double* g = tx.grad() + base;
          for (std::int64_t i = 0; i < plane; ++i) g[i] += out.grad[base + i] * pw[i];
        }
        if (tw.requires_grad()) {
          double* g = tw.grad() + static_cast<std::int64_t>(bi) * plane;
          const double* px = tx.data() + base;
          for (std::int64_t i = 0; i < plane; ++i) g[i] += out.grad[base + i] * px[i];
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Normalization

namespace {

Tensor batchnorm_generic(const Tensor& x, const Tensor& gamma, const Tensor& beta, BnState& state,
                         bool training, double momentum, double eps, int channels,
                         std::function<std::int64_t(std::int64_t, int)> index_of,
                         std::int64_t per_channel) {
  // index_of(sample_index, channel) yields the flat index of that element.
  if (state.running_mean.empty()) {
    state.running_mean.assign(channels, 0.0);
    state.running_var.assign(channels, 1.0);
  }
  const double* px = x.data();
  std::vector<double> mean(channels), invstd(channels);
  if (training) {
    for (int c = 0; c < channels; ++c) {
      double m = 0.0;
      for (std::int64_t i = 0; i < per_channel; ++i) m += px[index_of(i, c)];
      m /= static_cast<double>(per_channel);
      double var = 0.0;
      for (std::int64_t i = 0; i < per_channel; ++i) {
        const double d = px[index_of(i, c)] - m;
        var += d * d;
      }
      var /= static_cast<double>(per_channel);
      mean[c] = m;
      invstd[c] = 1.0 / std::sqrt(var + eps);
      state.running_mean[c] = (1.0 - momentum) * state.running_mean[c] + momentum * m;
      state.running_var[c] = (1.0 - momentum) * state.running_var[c] + momentum * var;
    }
  } else {
    for (int c = 0; c < channels; ++c) {
      mean[c] = state.running_mean[c];
      invstd[c] = 1.0 / std::sqrt(state.running_var[c] + eps);
    }
  }
  std::vector<double> v(x.values().size());
  for (int c = 0; c < channels; ++c) {
    const double g = gamma.data()[c], bta = beta.data()[c], m = mean[c], is = invstd[c];
    for (std::int64_t i = 0; i < per_channel; ++i) {
      const std::int64_t idx = index_of(i, c);
      v[idx] = g * (px[idx] - m) * is + bta;
    }
  }
  auto saved_mean = std::make_shared<std::vector<double>>(std::move(mean));
  auto saved_invstd = std::make_shared<std::vector<double>>(std::move(invstd));
  Tensor tx = x, tg = gamma, tb = beta;
  return make_op_node(
      x.shape(), std::move(v), {x, gamma, beta},
      [tx, tg, tb, saved_mean, saved_invstd, training, channels, per_channel,
       index_of](Node& out) mutable {
        const double* px = tx.data();
        const double inv_n = 1.0 / static_cast<double>(per_channel);
        for (int c = 0; c < channels; ++c) {
          const double m = (*saved_mean)[c], is = (*saved_invstd)[c], g = tg.data()[c];
          double sum_dy = 0.0, sum_dy_xhat = 0.0;
          for (std::int64_t i = 0; i < per_channel; ++i) {
            const std::int64_t idx = index_of(i, c);
            const double dy = out.grad[idx];
            sum_dy += dy;
            sum_dy_xhat += dy * (px[idx] - m) * is;
          }
          if (tg.requires_grad()) tg.grad()[c] += sum_dy_xhat;
          if (tb.requires_grad()) tb.grad()[c] += sum_dy;
          if (tx.requires_grad()) {
            double* gx = tx.grad();
            if (training) {
              for (std::int64_t i = 0; i < per_channel; ++i) {
                const std::int64_t idx = index_of(i, c);
                const double xhat = (px[idx] - m) * is;
                gx[idx] += g * is * (out.grad[idx] - inv_n * sum_dy - xhat * inv_n * sum_dy_xhat);
              }
            } else {
              for (std::int64_t i = 0; i < per_channel; ++i) {
                const std::int64_t idx = index_of(i, c);
                gx[idx] += g * is * out.grad[idx];
              }
            }
          }
        }
      });
}

}  // namespace

Tensor batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta, BnState& state,
                   bool training, double momentum, double eps) {
  check(x.shape().size() == 4, "batchnorm2d: expected [B,C,T,F]");
  const int batch = x.dim(0), c = x.dim(1), t = x.dim(2), f = x.dim(3);
  check(gamma.numel() == c && beta.numel() == c, "batchnorm2d: affine dims mismatch");
  const std::int64_t plane = static_cast<std::int64_t>(t) * f;
  const std::int64_t per_channel = static_cast<std::int64_t>(batch) * plane;
  auto index_of = [c, plane](std::int64_t i, int ch) {
    const std::int64_t b = i / plane;
    const std::int64_t r = i % plane;
    return (b * c + ch) * plane + r;
  };
  return batchnorm_generic(x, gamma, beta, state, training, momentum, eps, c, index_of, per_channel);
}

Tensor batchnorm_lastdim(const Tensor& x, const Tensor& gamma, const Tensor& beta, BnState& state,
                         bool training, double momentum, double eps) {
  check(x.shape().size() == 3, "batchnorm_lastdim: expected [B,T,D]");
  const int d = x.dim(2);
  check(gamma.numel() == d && beta.numel() == d, "batchnorm_lastdim: affine dims mismatch");
  const std::int64_t rows = x.numel() / d;
  auto index_of = [d](std::int64_t i, int ch) { return i * d + ch; };
  return batchnorm_generic(x, gamma, beta, state, training, momentum, eps, d, index_of, rows);
}

Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const int d = x.shape().back();
  check(gamma.numel() == d && beta.numel() == d, "layernorm: affine dims mismatch");
  const std::int64_t rows = x.numel() / d;
  std::vector<double> v(x.values().size());
  auto mu = std::make_shared<std::vector<double>>(rows);
  auto inv = std::make_shared<std::vector<double>>(rows);
  const double* px = x.data();
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* row = px + r * d;
    double m = 0.0;
    for (int i = 0; i < d; ++i) m += row[i];
    m /= d;
    double var = 0.0;
    for (int i = 0; i < d; ++i) {
      const double dd = row[i] - m;
      var += dd * dd;
    }
    var /= d;
    const double is = 1.0 / std::sqrt(var + eps);
    (*mu)[r] = m;
    (*inv)[r] = is;
    for (int i = 0; i < d; ++i) v[r * d + i] = gamma.data()[i] * (row[i] - m) * is + beta.data()[i];
  }
  Tensor tx = x, tg = gamma, tb = beta;
  return make_op_node(x.shape(), std::move(v), {x, gamma, beta},
                      [tx, tg, tb, mu, inv, rows, d](Node& out) mutable {
                        const double* px = tx.data();
                        for (std::int64_t r = 0; r < rows; ++r) {
                          const double m = (*mu)[r], is = (*inv)[r];
                          const double* go = out.grad.data() + r * d;
                          double mean_g = 0.0, mean_gx = 0.0;
                          for (int i = 0; i < d; ++i) {
                            const double xhat = (px[r * d + i] - m) * is;
                            const double gi = go[i] * tg.data()[i];
                            mean_g += gi;
                            mean_gx += gi * xhat;
                            if (tg.requires_grad()) tg.grad()[i] += go[i] * xhat;
                            if (tb.requires_grad()) tb.grad()[i] += go[i];
                          }
                          mean_g /= d;
                          mean_gx /= d;
                          if (tx.requires_grad()) {
                            double* gx = tx.grad();
                            for (int i = 0; i < d; ++i) {
                              const double xhat = (px[r * d + i] - m) * is;
                              const double gi = go[i] * tg.data()[i];
                              gx[r * d + i] += is * (gi - mean_g - xhat * mean_gx);
                            }
                          }
                        }
                      });
}

// ---------------------------------------------------------------------------
// Batch manipulation / mixing

Tensor permute_batch(const Tensor& x, const std::vector<int>& perm) {
  const int batch = x.dim(0);
  check(static_cast<int>(perm.size()) == batch, "permute_batch: permutation size mismatch");
  const std::int64_t stride = x.numel() / batch;
  std::vector<double> v(x.values().size());
  for (int i = 0; i < batch; ++i)
    std::memcpy(v.data() + i * stride, x.data() + static_cast<std::int64_t>(perm[i]) * stride,
                sizeof(double) * stride);
  Tensor tx = x;
  auto perm_copy = std::make_shared<std::vector<int>>(perm);
  return make_op_node(x.shape(), std::move(v), {x}, [tx, perm_copy, batch, stride](Node& out) mutable {
    if (!tx.requires_grad()) return;
    double* g = tx.grad();
    for (int i = 0; i < batch; ++i) {
      double* dst = g + static_cast<std::int64_t>((*perm_copy)[i]) * stride;
      const double* src = out.grad.data() + i * stride;
      for (std::int64_t j = 0; j < stride; ++j) dst[j] += src[j];
    }
  });
}

Tensor mix_mask_cf(const Tensor& a, const Tensor& b, const std::vector<std::uint8_t>& mask_cf) {
  check_same_shape(a, b, "mix_mask_cf");
  check(a.shape().size() == 4, "mix_mask_cf: expected [B,C,T,F]");
  const int batch = a.dim(0), c = a.dim(1), t = a.dim(2), f = a.dim(3);
  check(static_cast<int>(mask_cf.size()) == c * f, "mix_mask_cf: mask must cover (C,F)");
  std::vector<double> v(a.values().size());
  auto mask = std::make_shared<std::vector<std::uint8_t>>(mask_cf);
  for (int bi = 0; bi < batch; ++bi)
    for (int ci = 0; ci < c; ++ci)
      for (int ti = 0; ti < t; ++ti) {
        const std::int64_t base = ((static_cast<std::int64_t>(bi) * c + ci) * t + ti) * f;
        for (int fi = 0; fi < f; ++fi)
          v[base + fi] = mask_cf[ci * f + fi] ? a.data()[base + fi] : b.data()[base + fi];
      }
  Tensor ta = a, tb = b;
  return make_op_node(a.shape(), std::move(v), {a, b}, [ta, tb, mask, batch, c, t, f](Node& out) mutable {
    for (int bi = 0; bi < batch; ++bi)
      for (int ci = 0; ci < c; ++ci)
        for (int ti = 0; ti < t; ++ti) {
          const std::int64_t base = ((static_cast<std::int64_t>(bi) * c + ci) * t + ti) * f;
          for (int fi = 0; fi < f; ++fi) {
            Tensor& dst = (*mask)[ci * f + fi] ? ta : tb;
            if (dst.requires_grad()) dst.grad()[base + fi] += out.grad[base + fi];
          }
        }
  });
}

// ---------------------------------------------------------------------------
// Reductions / losses

Tensor mean_all(const Tensor& x) {
  const std::int64_t n = x.numel();
  double sum = 0.0;
  for (std::int64_t i = 0; i < n; ++i) sum += x.data()[i];
  Tensor tx = x;
  return make_op_node({1}, {sum / static_cast<double>(n)}, {x}, [tx, n](Node& out) mutable {
    if (!tx.requires_grad()) return;
    const double g = out.grad[0] / static_cast<double>(n);
    double* gx = tx.grad();
    for (std::int64_t i = 0; i < n; ++i) gx[i] += g;
  });
}

Tensor mse_mean(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mse_mean");
  const std::int64_t n = a.numel();
  double sum = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double d = a.data()[i] - b.data()[i];
    sum += d * d;
  }
  Tensor ta = a, tb = b;
  return make_op_node({1}, {sum / static_cast<double>(n)}, {a, b}, [ta, tb, n](Node& out) mutable {
    const double g = 2.0 * out.grad[0] / static_cast<double>(n);
    for (std::int64_t i = 0; i < n; ++i) {
      const double d = ta.data()[i] - tb.data()[i];
      if (ta.requires_grad()) ta.grad()[i] += g * d;
      if (tb.requires_grad()) tb.grad()[i] -= g * d;
    }
  });
}

Tensor bce_mean(const Tensor& p, std::span<const double> targets) {
  const std::int64_t n = p.numel();
  check(static_cast<std::int64_t>(targets.size()) == n, "bce_mean: target size mismatch");
  auto tgt = std::make_shared<std::vector<double>>(targets.begin(), targets.end());
  double sum = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double pc = clamp_prob(p.data()[i]);
    sum -= (*tgt)[i] * std::log(pc) + (1.0 - (*tgt)[i]) * std::log(1.0 - pc);
  }
  Tensor tp = p;
  return make_op_node({1}, {sum / static_cast<double>(n)}, {p}, [tp, tgt, n](Node& out) mutable {
    if (!tp.requires_grad()) return;
    const double g = out.grad[0] / static_cast<double>(n);
    double* gp = tp.grad();
    for (std::int64_t i = 0; i < n; ++i) {
      const double raw = tp.data()[i];
      if (raw <= kProbClamp || raw >= 1.0 - kProbClamp) continue;  // clamped, zero slope
      gp[i] += g * (-(*tgt)[i] / raw + (1.0 - (*tgt)[i]) / (1.0 - raw));
    }
  });
}

Tensor binary_kl_mean(std::span<const double> t, const Tensor& p) {
  const std::int64_t n = p.numel();
  check(static_cast<std::int64_t>(t.size()) == n, "binary_kl_mean: size mismatch");
  auto tc = std::make_shared<std::vector<double>>(n);
  double sum = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double pt = clamp_prob(t[i]);
    const double ps = clamp_prob(p.data()[i]);
    (*tc)[i] = pt;
    sum += pt * std::log(pt / ps) + (1.0 - pt) * std::log((1.0 - pt) / (1.0 - ps));
  }
  Tensor tp = p;
  return make_op_node({1}, {sum / static_cast<double>(n)}, {p}, [tp, tc, n](Node& out) mutable {
    if (!tp.requires_grad()) return;
    const double g = out.grad[0] / static_cast<double>(n);
    double* gp = tp.grad();
    for (std::int64_t i = 0; i < n; ++i) {
      const double raw = tp.data()[i];
      if (raw <= kProbClamp || raw >= 1.0 - kProbClamp) continue;
      gp[i] += g * (-(*tc)[i] / raw + (1.0 - (*tc)[i]) / (1.0 - raw));
    }
  });
}

Tensor masked_sq_mean(const Tensor& y, std::span<const double> ref, std::span<const double> act) {
  check(y.shape().size() == 3, "masked_sq_mean: expected [B,L,3N]");
  const int batch = y.dim(0), l = y.dim(1), d3n = y.dim(2);
  check(d3n % 3 == 0, "masked_sq_mean: last dim must be 3N");
  const int n_cls = d3n / 3;
  const std::int64_t cells = static_cast<std::int64_t>(batch) * l * n_cls;
  check(static_cast<std::int64_t>(ref.size()) == y.numel(), "masked_sq_mean: ref size mismatch");
  check(static_cast<std::int64_t>(act.size()) == cells, "masked_sq_mean: act size mismatch");
  auto refc = std::make_shared<std::vector<double>>(ref.begin(), ref.end());
  auto actc = std::make_shared<std::vector<double>>(act.begin(), act.end());
  double sum = 0.0;
  for (std::int64_t cell = 0; cell < cells; ++cell) {
    const double p = (*actc)[cell];
    const std::int64_t row = cell / n_cls;
    const int cls = static_cast<int>(cell % n_cls);
    for (int cc = 0; cc < 3; ++cc) {
      const std::int64_t idx = row * d3n + cls * 3 + cc;
      const double d = (y.data()[idx] - (*refc)[idx]) * p;
      sum += d * d;
    }
  }
  Tensor ty = y;
  return make_op_node({1}, {sum / static_cast<double>(cells)}, {y},
                      [ty, refc, actc, cells, n_cls, d3n](Node& out) mutable {
                        if (!ty.requires_grad()) return;
                        const double g = 2.0 * out.grad[0] / static_cast<double>(cells);
                        double* gy = ty.grad();
                        for (std::int64_t cell = 0; cell < cells; ++cell) {
                          const double p2 = (*actc)[cell] * (*actc)[cell];
                          const std::int64_t row = cell / n_cls;
                          const int cls = static_cast<int>(cell % n_cls);
                          for (int cc = 0; cc < 3; ++cc) {
                            const std::int64_t idx = row * d3n + cls * 3 + cc;
                            gy[idx] += g * p2 * (ty.data()[idx] - (*refc)[idx]);
                          }
                        }
                      });
}

// ---------------------------------------------------------------------------
// Initialization

void init_kaiming_normal(Tensor& w, int fan_in, Rng& rng) {
  const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (auto& v : w.values()) v = rng.normal(0.0, std);
}

void init_uniform_fan(Tensor& w, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : w.values()) v = rng.uniform(-bound, bound);
}

}  // namespace seldkd::nn
