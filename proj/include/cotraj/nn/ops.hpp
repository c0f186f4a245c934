/* Copyright 2026 The cotraj Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Differentiable tensor operations. Matrices are rank-2 row-major; rank-1
// tensors are treated as a single row wherever a matrix is expected.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "cotraj/nn/tensor.hpp"

namespace cotraj::nn {

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

inline void require_same_shape(const Tensor& a, const Tensor& b,
                               const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " +
                                      shape_string(a.shape()) + " vs " +
                                      shape_string(b.shape()));
}

// Grad slot of parent i, or nullptr when that parent is not differentiated.
inline double* pgrad(Node& n, std::size_t i) {
  auto& p = n.parents[i];
  return p->requires_grad ? p->grad.data() : nullptr;
}

inline const double* pval(Node& n, std::size_t i) {
  return n.parents[i]->value.data();
}

// C[m x n] += A[m x k] * B[k x n]
inline void gemm_nn(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// C[m x k] += G[m x n] * B[k x n]^T
inline void gemm_nt(const double* g, const double* b, double* c, std::size_t m,
                    std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* gi = g + i * n;
    double* ci = c + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* bp = b + p * n;
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += gi[j] * bp[j];
      ci[p] += s;
    }
  }
}

// C[k x n] += A[m x k]^T * G[m x n]
inline void gemm_tn(const double* a, const double* g, double* c, std::size_t m,
                    std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    const double* gi = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      double* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += av * gi[j];
    }
  }
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
  std::vector<double> out(x.size());
  const auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xv[i]);
  return make_result(x.shape(), std::move(out), {x}, [deriv](Node& n) {
    double* gx = pgrad(n, 0);
    if (!gx) return;
    const double* xv = pval(n, 0);
    for (std::size_t i = 0; i < n.value.size(); ++i) {
      gx[i] += n.grad[i] * deriv(xv[i], n.value[i]);
    }
  });
}

}  // namespace detail

inline Tensor detach(const Tensor& x) {
  return Tensor::from(x.shape(), std::vector<double>(x.values().begin(),
                                                     x.values().end()));
}

inline Tensor reshape(const Tensor& x, Shape shape) {
  detail::require(shape_size(shape) == x.size(),
                  "reshape: size mismatch " + shape_string(x.shape()) +
                      " -> " + shape_string(shape));
  return make_result(std::move(shape),
                     std::vector<double>(x.values().begin(), x.values().end()),
                     {x}, [](Node& n) {
                       double* gx = detail::pgrad(n, 0);
                       if (!gx) return;
                       for (std::size_t i = 0; i < n.grad.size(); ++i)
                         gx[i] += n.grad[i];
                     });
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  detail::require(b.rows() == k, "matmul: inner dimension mismatch " +
                                     shape_string(a.shape()) + " x " +
                                     shape_string(b.shape()));
  std::vector<double> out(m * n, 0.0);
  detail::gemm_nn(a.values().data(), b.values().data(), out.data(), m, k, n);
  return make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& nd) {
    if (double* ga = detail::pgrad(nd, 0)) {
      detail::gemm_nt(nd.grad.data(), detail::pval(nd, 1), ga, m, n, k);
    }
    if (double* gb = detail::pgrad(nd, 1)) {
      detail::gemm_tn(detail::pval(nd, 0), nd.grad.data(), gb, m, k, n);
    }
  });
}

// x * W + b with b broadcast over rows.
inline Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  const std::size_t m = x.rows(), k = x.cols(), n = w.cols();
  detail::require(w.rows() == k, "linear: weight rows " +
                                     std::to_string(w.rows()) +
                                     " != input cols " + std::to_string(k));
  detail::require(b.size() == n, "linear: bias size mismatch");
  std::vector<double> out(m * n);
  const auto bv = b.values();
  for (std::size_t i = 0; i < m; ++i)
    std::copy(bv.begin(), bv.end(), out.begin() + i * n);
  detail::gemm_nn(x.values().data(), w.values().data(), out.data(), m, k, n);
  return make_result({m, n}, std::move(out), {x, w, b}, [m, k, n](Node& nd) {
    if (double* gx = detail::pgrad(nd, 0)) {
      detail::gemm_nt(nd.grad.data(), detail::pval(nd, 1), gx, m, n, k);
    }
    if (double* gw = detail::pgrad(nd, 1)) {
      detail::gemm_tn(detail::pval(nd, 0), nd.grad.data(), gw, m, k, n);
    }
    if (double* gb = detail::pgrad(nd, 2)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gb[j] += nd.grad[i * n + j];
    }
  });
}

inline Tensor transpose(const Tensor& a) {
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  const auto av = a.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  return make_result({n, m}, std::move(out), {a}, [m, n](Node& nd) {
    double* ga = detail::pgrad(nd, 0);
    if (!ga) return;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += nd.grad[j * m + i];
  });
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& n) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (double* g = detail::pgrad(n, p))
        for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
    }
  });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& n) {
    if (double* g = detail::pgrad(n, 0))
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
    if (double* g = detail::pgrad(n, 1))
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] -= n.grad[i];
  });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& n) {
    const double* av = detail::pval(n, 0);
    const double* bv = detail::pval(n, 1);
    if (double* g = detail::pgrad(n, 0))
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * bv[i];
    if (double* g = detail::pgrad(n, 1))
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * av[i];
  });
}

inline Tensor scale(const Tensor& a, double s) {
  return detail::unary(
      a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

inline Tensor add_scalar(const Tensor& a, double s) {
  return detail::unary(
      a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

// a[m x n] + b broadcast across rows (b has n elements).
inline Tensor add_row(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows(), n = a.cols();
  detail::require(b.size() == n, "add_row: broadcast size mismatch");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a[i * n + j] + b[j];
  return make_result(a.shape(), std::move(out), {a, b}, [m, n](Node& nd) {
    if (double* g = detail::pgrad(nd, 0))
      for (std::size_t i = 0; i < nd.grad.size(); ++i) g[i] += nd.grad[i];
    if (double* g = detail::pgrad(nd, 1))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[j] += nd.grad[i * n + j];
  });
}

// Multiplies row i by the constant w[i].
inline Tensor scale_rows(const Tensor& a, std::vector<double> w) {
  const std::size_t m = a.rows(), n = a.cols();
  detail::require(w.size() == m, "scale_rows: weight count mismatch");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a[i * n + j] * w[i];
  return make_result(a.shape(), std::move(out), {a},
                     [m, n, w = std::move(w)](Node& nd) {
                       double* g = detail::pgrad(nd, 0);
                       if (!g) return;
                       for (std::size_t i = 0; i < m; ++i)
                         for (std::size_t j = 0; j < n; ++j)
                           g[i * n + j] += nd.grad[i * n + j] * w[i];
                     });
}

inline Tensor neg(const Tensor& a) { return scale(a, -1.0); }

inline Tensor exp(const Tensor& a) {
  return detail::unary(
      a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

inline Tensor log(const Tensor& a) {
  return detail::unary(
      a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

inline Tensor abs(const Tensor& a) {
  return detail::unary(
      a, [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

inline Tensor square(const Tensor& a) {
  return detail::unary(
      a, [](double x) { return x * x; },
      [](double x, double) { return 2.0 * x; });
}

inline Tensor sin(const Tensor& a) {
  return detail::unary(
      a, [](double x) { return std::sin(x); },
      [](double x, double) { return std::cos(x); });
}

inline Tensor cos(const Tensor& a) {
  return detail::unary(
      a, [](double x) { return std::cos(x); },
      [](double x, double) { return -std::sin(x); });
}

inline Tensor tanh(const Tensor& a) {
  return detail::unary(
      a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

inline double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// x * sigmoid(x)
inline Tensor silu(const Tensor& a) {
  return detail::unary(
      a, [](double x) { return x * sigmoid_scalar(x); },
      [](double x, double) {
        const double s = sigmoid_scalar(x);
        return s * (1.0 + x * (1.0 - s));
      });
}

inline Tensor softplus(const Tensor& a) {
  return detail::unary(
      a,
      [](double x) {
        return x > 30.0 ? x : std::log1p(std::exp(x));
      },
      [](double x, double) { return sigmoid_scalar(x); });
}

inline Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return make_result({1}, {s}, {a}, [](Node& n) {
    double* g = detail::pgrad(n, 0);
    if (!g) return;
    const std::size_t sz = n.parents[0]->value.size();
    for (std::size_t i = 0; i < sz; ++i) g[i] += n.grad[0];
  });
}

inline Tensor mean(const Tensor& a) {
  detail::require(a.size() > 0, "mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

// [m x n] -> [m x 1]
inline Tensor row_sum(const Tensor& a) {
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i] += a[i * n + j];
  return make_result({m, 1}, std::move(out), {a}, [m, n](Node& nd) {
    double* g = detail::pgrad(nd, 0);
    if (!g) return;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += nd.grad[i];
  });
}

// Weighted sum of all elements with constant weights.
inline Tensor weighted_sum(const Tensor& a, std::vector<double> w) {
  detail::require(w.size() == a.size(), "weighted_sum: weight size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * a[i];
  return make_result({1}, {s}, {a}, [w = std::move(w)](Node& n) {
    double* g = detail::pgrad(n, 0);
    if (!g) return;
    for (std::size_t i = 0; i < w.size(); ++i) g[i] += n.grad[0] * w[i];
  });
}

inline Tensor concat_cols(const std::vector<Tensor>& parts) {
  detail::require(!parts.empty(), "concat_cols: no inputs");
  const std::size_t m = parts[0].rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    detail::require(p.rows() == m, "concat_cols: row count mismatch");
    widths.push_back(p.cols());
    total += p.cols();
  }
  std::vector<double> out(m * total);
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto pv = parts[k].values();
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(pv.data() + i * widths[k], widths[k],
                  out.data() + i * total + off);
    off += widths[k];
  }
  return make_result({m, total}, std::move(out), parts,
                     [m, total, widths](Node& nd) {
                       std::size_t off = 0;
                       for (std::size_t k = 0; k < widths.size(); ++k) {
                         if (double* g = detail::pgrad(nd, k)) {
                           for (std::size_t i = 0; i < m; ++i)
                             for (std::size_t j = 0; j < widths[k]; ++j)
                               g[i * widths[k] + j] +=
                                   nd.grad[i * total + off + j];
                         }
                         off += widths[k];
                       }
                     });
}

inline Tensor concat_rows(const std::vector<Tensor>& parts) {
  detail::require(!parts.empty(), "concat_rows: no inputs");
  const std::size_t n = parts[0].cols();
  std::size_t m = 0;
  std::vector<std::size_t> counts;
  for (const auto& p : parts) {
    detail::require(p.cols() == n, "concat_rows: column count mismatch");
    counts.push_back(p.size());
    m += p.rows();
  }
  std::vector<double> out;
  out.reserve(m * n);
  for (const auto& p : parts)
    out.insert(out.end(), p.values().begin(), p.values().end());
  return make_result({m, n}, std::move(out), parts, [counts](Node& nd) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < counts.size(); ++k) {
      if (double* g = detail::pgrad(nd, k))
        for (std::size_t i = 0; i < counts[k]; ++i) g[i] += nd.grad[off + i];
      off += counts[k];
    }
  });
}

inline Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  const std::size_t m = a.rows(), n = a.cols();
  detail::require(begin < end && end <= n, "slice_cols: bad range");
  const std::size_t w = end - begin;
  std::vector<double> out(m * w);
  for (std::size_t i = 0; i < m; ++i)
    std::copy_n(a.values().data() + i * n + begin, w, out.data() + i * w);
  return make_result({m, w}, std::move(out), {a}, [m, n, w, begin](Node& nd) {
    double* g = detail::pgrad(nd, 0);
    if (!g) return;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j)
        g[i * n + begin + j] += nd.grad[i * w + j];
  });
}

// out[i] = a[index[i]]; backward scatter-adds.
inline Tensor gather_rows(const Tensor& a, std::vector<std::size_t> index) {
  const std::size_t n = a.cols();
  const std::size_t m = index.size();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    detail::require(index[i] < a.rows(), "gather_rows: index out of range");
    std::copy_n(a.values().data() + index[i] * n, n, out.data() + i * n);
  }
  return make_result({m, n}, std::move(out), {a},
                     [n, index = std::move(index)](Node& nd) {
                       double* g = detail::pgrad(nd, 0);
                       if (!g) return;
                       for (std::size_t i = 0; i < index.size(); ++i)
                         for (std::size_t j = 0; j < n; ++j)
                           g[index[i] * n + j] += nd.grad[i * n + j];
                     });
}

// Row i comes from a when take_a[i], otherwise from b.
inline Tensor select_rows(const std::vector<bool>& take_a, const Tensor& a,
                          const Tensor& b) {
  detail::require_same_shape(a, b, "select_rows");
  const std::size_t m = a.rows(), n = a.cols();
  detail::require(take_a.size() == m, "select_rows: mask size mismatch");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < m; ++i) {
    const auto& src = take_a[i] ? a : b;
    std::copy_n(src.values().data() + i * n, n, out.data() + i * n);
  }
  return make_result(a.shape(), std::move(out), {a, b},
                     [m, n, take_a](Node& nd) {
                       double* ga = detail::pgrad(nd, 0);
                       double* gb = detail::pgrad(nd, 1);
                       for (std::size_t i = 0; i < m; ++i) {
                         double* g = take_a[i] ? ga : gb;
                         if (!g) continue;
                         for (std::size_t j = 0; j < n; ++j)
                           g[i * n + j] += nd.grad[i * n + j];
                       }
                     });
}

// Row-wise layer normalization with learned gain and bias.
inline Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                         double eps = 1e-5) {
  const std::size_t m = x.rows(), n = x.cols();
  detail::require(gain.size() == n && bias.size() == n,
                  "layer_norm: parameter size mismatch");
  std::vector<double> out(x.size());
  std::vector<double> xhat(x.size());
  std::vector<double> inv_std(m);
  const auto xv = x.values();
  for (std::size_t i = 0; i < m; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += xv[i * n + j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = xv[i * n + j] - mu;
      var += d * d;
    }
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (xv[i * n + j] - mu) * inv_std[i];
      out[i * n + j] = xhat[i * n + j] * gain[j] + bias[j];
    }
  }
  return make_result(
      x.shape(), std::move(out), {x, gain, bias},
      [m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& nd) {
        const double* gv = detail::pval(nd, 1);
        double* gx = detail::pgrad(nd, 0);
        double* gg = detail::pgrad(nd, 1);
        double* gb = detail::pgrad(nd, 2);
        for (std::size_t i = 0; i < m; ++i) {
          const double* dy = nd.grad.data() + i * n;
          const double* xh = xhat.data() + i * n;
          if (gg)
            for (std::size_t j = 0; j < n; ++j) gg[j] += dy[j] * xh[j];
          if (gb)
            for (std::size_t j = 0; j < n; ++j) gb[j] += dy[j];
          if (gx) {
            double s1 = 0.0, s2 = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              const double d = dy[j] * gv[j];
              s1 += d;
              s2 += d * xh[j];
            }
            const double inv_n = 1.0 / static_cast<double>(n);
            for (std::size_t j = 0; j < n; ++j) {
              const double d = dy[j] * gv[j];
              gx[i * n + j] += inv_std[i] * (d - inv_n * s1 - inv_n * xh[j] * s2);
            }
          }
        }
      });
}

// Row-wise log-softmax.
inline Tensor log_softmax_rows(const Tensor& x) {
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, x[i * n + j]);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += std::exp(x[i * n + j] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = x[i * n + j] - lse;
  }
  return make_result(x.shape(), std::move(out), {x}, [m, n](Node& nd) {
    double* g = detail::pgrad(nd, 0);
    if (!g) return;
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += nd.grad[i * n + j];
      for (std::size_t j = 0; j < n; ++j)
        g[i * n + j] += nd.grad[i * n + j] - std::exp(nd.value[i * n + j]) * s;
    }
  });
}

// Row-wise softmax. Positions with mask false get exactly zero weight; rows
// with no unmasked entry are all zeros.
inline Tensor softmax_rows(const Tensor& x, const std::vector<bool>* mask = nullptr) {
  const std::size_t m = x.rows(), n = x.cols();
  if (mask) detail::require(mask->size() == x.size(), "softmax: mask size");
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (!mask || (*mask)[i * n + j]) mx = std::max(mx, x[i * n + j]);
    if (mx == -std::numeric_limits<double>::infinity()) continue;
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (mask && !(*mask)[i * n + j]) continue;
      out[i * n + j] = std::exp(x[i * n + j] - mx);
      s += out[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= s;
  }
  return make_result(x.shape(), std::move(out), {x}, [m, n](Node& nd) {
    double* g = detail::pgrad(nd, 0);
    if (!g) return;
    for (std::size_t i = 0; i < m; ++i) {
      double dotp = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        dotp += nd.grad[i * n + j] * nd.value[i * n + j];
      for (std::size_t j = 0; j < n; ++j)
        g[i * n + j] += nd.value[i * n + j] * (nd.grad[i * n + j] - dotp);
    }
  });
}

// Lower-triangular prefix-sum along each row's steps, where a row holds
// `steps` consecutive groups of `width` values: out[t] = sum_{s<=t} in[s].
inline Tensor cumsum_steps(const Tensor& x, std::size_t width) {
  const std::size_t m = x.rows(), n = x.cols();
  detail::require(width > 0 && n % width == 0, "cumsum_steps: bad width");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t c = 0; c < width; ++c) {
      double acc = 0.0;
      for (std::size_t t = c; t < n; t += width) {
        acc += x[i * n + t];
        out[i * n + t] = acc;
      }
    }
  }
  return make_result(x.shape(), std::move(out), {x}, [m, n, width](Node& nd) {
    double* g = detail::pgrad(nd, 0);
    if (!g) return;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t c = 0; c < width; ++c) {
        double acc = 0.0;
        for (std::ptrdiff_t t = static_cast<std::ptrdiff_t>(n - width + c);
             t >= 0; t -= static_cast<std::ptrdiff_t>(width)) {
          acc += nd.grad[i * n + static_cast<std::size_t>(t)];
          g[i * n + static_cast<std::size_t>(t)] += acc;
        }
      }
    }
  });
}

}  // namespace cotraj::nn
