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

// Multi-head scaled dot-product attention over an explicit edge list.
//
// Each edge e carries its own key and value row and points at one query row
// dst[e]; softmax normalizes over the edges sharing a destination. Dense
// masked attention is the special case where the edges are the unmasked
// (query, key) cells. A query with no incoming edge produces a zero row.

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "cotraj/nn/ops.hpp"
#include "cotraj/nn/tensor.hpp"

namespace cotraj::nn {

struct EdgeAttentionWeights {
  // weights[e * heads + h]
  std::vector<double> weights;
  std::size_t heads = 0;
};

inline Tensor edge_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                             const std::vector<std::size_t>& dst,
                             std::size_t heads,
                             EdgeAttentionWeights* weights_out = nullptr) {
  const std::size_t n = q.rows(), d = q.cols(), e_count = dst.size();
  detail::require(heads > 0 && d % heads == 0,
                  "attention: head count " + std::to_string(heads) +
                      " does not divide width " + std::to_string(d));
  detail::require(k.rows() == e_count && v.rows() == e_count,
                  "attention: key/value rows must equal edge count");
  detail::require(k.cols() == d && v.cols() == d,
                  "attention: key/value width mismatch");
  const std::size_t dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  // Group edges by destination, keeping input order inside a group.
  std::vector<std::size_t> offsets(n + 1, 0);
  for (std::size_t e = 0; e < e_count; ++e) {
    detail::require(dst[e] < n, "attention: edge destination out of range");
    ++offsets[dst[e] + 1];
  }
  for (std::size_t i = 0; i < n; ++i) offsets[i + 1] += offsets[i];
  std::vector<std::size_t> order(e_count);
  {
    std::vector<std::size_t> fill(offsets.begin(), offsets.end() - 1);
    for (std::size_t e = 0; e < e_count; ++e) order[fill[dst[e]]++] = e;
  }

  const auto qv = q.values(), kv = k.values(), vv = v.values();
  std::vector<double> alpha(e_count * heads, 0.0);
  std::vector<double> out(n * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t b = offsets[i], end = offsets[i + 1];
    if (b == end) continue;
    for (std::size_t h = 0; h < heads; ++h) {
      const double* qi = qv.data() + i * d + h * dh;
      double mx = -1e300;
      for (std::size_t p = b; p < end; ++p) {
        const std::size_t e = order[p];
        const double* ke = kv.data() + e * d + h * dh;
        double s = 0.0;
        for (std::size_t c = 0; c < dh; ++c) s += qi[c] * ke[c];
        s *= inv_sqrt;
        alpha[e * heads + h] = s;
        mx = std::max(mx, s);
      }
      double z = 0.0;
      for (std::size_t p = b; p < end; ++p) {
        double& a = alpha[order[p] * heads + h];
        a = std::exp(a - mx);
        z += a;
      }
      double* oi = out.data() + i * d + h * dh;
      for (std::size_t p = b; p < end; ++p) {
        const std::size_t e = order[p];
        double& a = alpha[e * heads + h];
        a /= z;
        const double* ve = vv.data() + e * d + h * dh;
        for (std::size_t c = 0; c < dh; ++c) oi[c] += a * ve[c];
      }
    }
  }
  if (weights_out) {
    weights_out->weights = alpha;
    weights_out->heads = heads;
  }
  return make_result(
      {n, d}, std::move(out), {q, k, v},
      [n, d, heads, dh, inv_sqrt, offsets = std::move(offsets),
       order = std::move(order), alpha = std::move(alpha)](Node& nd) {
        const double* qv = detail::pval(nd, 0);
        const double* kv = detail::pval(nd, 1);
        const double* vv = detail::pval(nd, 2);
        double* gq = detail::pgrad(nd, 0);
        double* gk = detail::pgrad(nd, 1);
        double* gv = detail::pgrad(nd, 2);
        std::vector<double> dalpha;
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t b = offsets[i], end = offsets[i + 1];
          if (b == end) continue;
          dalpha.assign(end - b, 0.0);
          for (std::size_t h = 0; h < heads; ++h) {
            const double* go = nd.grad.data() + i * d + h * dh;
            double weighted = 0.0;
            for (std::size_t p = b; p < end; ++p) {
              const std::size_t e = order[p];
              const double a = alpha[e * heads + h];
              const double* ve = vv + e * d + h * dh;
              double da = 0.0;
              for (std::size_t c = 0; c < dh; ++c) da += go[c] * ve[c];
              dalpha[p - b] = da;
              weighted += a * da;
              if (gv) {
                double* gve = gv + e * d + h * dh;
                for (std::size_t c = 0; c < dh; ++c) gve[c] += a * go[c];
              }
            }
            const double* qi = qv + i * d + h * dh;
            for (std::size_t p = b; p < end; ++p) {
              const std::size_t e = order[p];
              const double ds =
                  alpha[e * heads + h] * (dalpha[p - b] - weighted) * inv_sqrt;
              if (ds == 0.0) continue;
              const double* ke = kv + e * d + h * dh;
              if (gq) {
                double* gqi = gq + i * d + h * dh;
                for (std::size_t c = 0; c < dh; ++c) gqi[c] += ds * ke[c];
              }
              if (gk) {
                double* gke = gk + e * d + h * dh;
                for (std::size_t c = 0; c < dh; ++c) gke[c] += ds * qi[c];
              }
            }
          }
        }
      });
}

inline std::vector<bool> rows_with_edges(std::size_t rows,
                                         const std::vector<std::size_t>& dst) {
  std::vector<bool> has(rows, false);
  for (auto i : dst) has[i] = true;
  return has;
}

// Projection weights for one dense multi-head attention.
struct AttentionParams {
  Tensor w_q, w_k, w_v, w_o;  // each [d x d]
  std::size_t heads = 1;
};

struct AttentionResult {
  Tensor output;                    // [n_q x d]
  std::vector<bool> fully_masked;   // per query row
  EdgeAttentionWeights weights;     // per unmasked cell, row-major order
};

// Dense masked multi-head attention. mask is row-major [n_q x n_k]; true keeps
// the (query, key) cell. Fully masked query rows return zeros.
inline AttentionResult attention(const Tensor& query, const Tensor& keys,
                                 const Tensor& values,
                                 const std::vector<bool>& mask,
                                 const AttentionParams& p) {
  const std::size_t nq = query.rows(), nk = keys.rows(), d = query.cols();
  detail::require(keys.cols() == d && values.cols() == d,
                  "attention: width mismatch");
  detail::require(values.rows() == nk, "attention: key/value count mismatch");
  detail::require(mask.size() == nq * nk, "attention: mask shape mismatch");
  for (const Tensor* w : {&p.w_q, &p.w_k, &p.w_v, &p.w_o}) {
    detail::require(w->rows() == d && w->cols() == d,
                    "attention: projection must be [d x d]");
  }
  std::vector<std::size_t> src, dst;
  for (std::size_t i = 0; i < nq; ++i)
    for (std::size_t j = 0; j < nk; ++j)
      if (mask[i * nk + j]) {
        src.push_back(j);
        dst.push_back(i);
      }
  const Tensor qp = matmul(query, p.w_q);
  const Tensor kp = gather_rows(matmul(keys, p.w_k), src);
  const Tensor vp = gather_rows(matmul(values, p.w_v), src);
  AttentionResult r;
  const Tensor mixed = edge_attention(qp, kp, vp, dst, p.heads, &r.weights);
  r.output = matmul(mixed, p.w_o);
  const auto has = rows_with_edges(nq, dst);
  r.fully_masked.resize(nq);
  for (std::size_t i = 0; i < nq; ++i) r.fully_masked[i] = !has[i];
  return r;
}

}  // namespace cotraj::nn
