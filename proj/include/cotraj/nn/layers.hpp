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

// Parameterized building blocks. Each layer only remembers parameter ids; the
// tensors come from the Binding of the current forward pass.

#pragma once

#include <string>
#include <vector>

#include "cotraj/nn/attention.hpp"
#include "cotraj/nn/ops.hpp"
#include "cotraj/nn/params.hpp"
#include "cotraj/rng.hpp"

namespace cotraj::nn {

struct Linear {
  ParamId w = 0, b = 0;
  std::size_t in = 0, out = 0;

  static Linear make(ParameterStore& s, const std::string& name, std::size_t in,
                     std::size_t out, Rng& rng, double gain = 1.0) {
    Linear l;
    l.in = in;
    l.out = out;
    l.w = s.add_normal(name + ".w", {in, out}, rng, gain);
    l.b = s.add_constant(name + ".b", {out}, 0.0);
    return l;
  }

  static Linear make_zero(ParameterStore& s, const std::string& name,
                          std::size_t in, std::size_t out) {
    Linear l;
    l.in = in;
    l.out = out;
    l.w = s.add_constant(name + ".w", {in, out}, 0.0);
    l.b = s.add_constant(name + ".b", {out}, 0.0);
    return l;
  }

  Tensor operator()(Binding& p, const Tensor& x) const {
    return linear(x, p(w), p(b));
  }
};

struct LayerNorm {
  ParamId gain = 0, bias = 0;

  static LayerNorm make(ParameterStore& s, const std::string& name,
                        std::size_t d) {
    return {s.add_constant(name + ".g", {d}, 1.0),
            s.add_constant(name + ".b", {d}, 0.0)};
  }

  Tensor operator()(Binding& p, const Tensor& x) const {
    return layer_norm(x, p(gain), p(bias));
  }
};

// Two linear layers with a SiLU in between.
struct Mlp {
  Linear l1, l2;

  static Mlp make(ParameterStore& s, const std::string& name, std::size_t in,
                  std::size_t hidden, std::size_t out, Rng& rng,
                  double out_gain = 1.0) {
    return {Linear::make(s, name + ".l1", in, hidden, rng),
            Linear::make(s, name + ".l2", hidden, out, rng, out_gain)};
  }

  Tensor operator()(Binding& p, const Tensor& x) const {
    return l2(p, silu(l1(p, x)));
  }
};

// Random Fourier features with raw passthrough followed by an MLP:
//   [x, cos(2 pi x F), sin(2 pi x F)] -> MLP -> d
// F is drawn once from a seeded Gaussian, stored frozen and never trained.
struct FourierEmbed {
  std::size_t input_dim = 0;
  std::size_t n_freq = 0;
  ParamId freq = 0;  // [input_dim x n_freq]
  Mlp mlp;

  static FourierEmbed make(ParameterStore& s, const std::string& name,
                           std::size_t input_dim, std::size_t n_freq,
                           std::size_t d_model, Rng& rng,
                           double freq_sigma = 1.0) {
    FourierEmbed f;
    f.input_dim = input_dim;
    f.n_freq = n_freq;
    std::vector<double> w(input_dim * n_freq);
    for (auto& v : w) v = rng.normal(0.0, freq_sigma);
    f.freq = s.add_frozen(name + ".freq", {input_dim, n_freq}, std::move(w));
    f.mlp = Mlp::make(s, name + ".mlp", input_dim + 2 * n_freq, d_model,
                      d_model, rng);
    return f;
  }

  // Pre-MLP feature rows [m x (input_dim + 2 n_freq)].
  Tensor features(const ParameterStore& s, const Tensor& x) const {
    if (x.cols() != input_dim) {
      throw std::invalid_argument("fourier_embed: input has " +
                                  std::to_string(x.cols()) +
                                  " columns, embedding expects " +
                                  std::to_string(input_dim));
    }
    const auto& w = s[freq].value;
    std::vector<double> f(w.size());
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = 2.0 * kPi * w[i];
    const Tensor proj =
        matmul(x, Tensor::matrix(input_dim, n_freq, std::move(f)));
    return concat_cols({x, cos(proj), sin(proj)});
  }

  Tensor operator()(Binding& p, const Tensor& x) const {
    return mlp(p, features(p.store(), x));
  }
};

// Builds a constant [rows x cols] input from row-major values.
inline Tensor input_rows(std::size_t cols, std::vector<double> values) {
  const std::size_t rows = cols ? values.size() / cols : 0;
  return Tensor::matrix(rows, cols, std::move(values));
}

// Single embedding of one feature vector, returned as a [d] tensor.
inline Tensor fourier_embed(Binding& p, const FourierEmbed& embed,
                            const std::vector<double>& x) {
  if (x.size() != embed.input_dim) {
    throw std::invalid_argument("fourier_embed: dimension mismatch");
  }
  const Tensor out = embed(p, Tensor::matrix(1, x.size(), x));
  return reshape(out, {out.cols()});
}

// Pre-norm residual attention block over an edge list with optional
// per-edge relative embeddings and an extra query-side input:
//
//   q   = LN(x_dst) Wq [+ extra Wx]
//   k_e = LN(x_src)[src_e] Wk + r_e Wkr,  v_e likewise
//   y   = x_dst + (attn(q, k, v) Wo + bo)
//   out = y + FFN(LN(y))
//
// Destination rows without edges pass through unchanged.
struct RelAttentionBlock {
  std::size_t d = 0, heads = 1, extra_dim = 0;
  bool relative = true;
  LayerNorm ln_q, ln_src, ln_ff;
  ParamId wq = 0, wx = 0, wk = 0, wv = 0, wkr = 0, wvr = 0;
  Linear out;
  Mlp ffn;

  static RelAttentionBlock make(ParameterStore& s, const std::string& name,
                                std::size_t d, std::size_t heads,
                                std::size_t hidden, Rng& rng,
                                bool relative = true,
                                std::size_t extra_dim = 0) {
    if (heads == 0 || d % heads != 0) {
      throw ConfigError(name + ": head count must divide d_model");
    }
    RelAttentionBlock b;
    b.d = d;
    b.heads = heads;
    b.extra_dim = extra_dim;
    b.relative = relative;
    b.ln_q = LayerNorm::make(s, name + ".ln_q", d);
    b.ln_src = LayerNorm::make(s, name + ".ln_src", d);
    b.ln_ff = LayerNorm::make(s, name + ".ln_ff", d);
    b.wq = s.add_normal(name + ".wq", {d, d}, rng);
    if (extra_dim) b.wx = s.add_normal(name + ".wx", {extra_dim, d}, rng);
    b.wk = s.add_normal(name + ".wk", {d, d}, rng);
    b.wv = s.add_normal(name + ".wv", {d, d}, rng);
    if (relative) {
      b.wkr = s.add_normal(name + ".wkr", {d, d}, rng);
      b.wvr = s.add_normal(name + ".wvr", {d, d}, rng);
    }
    b.out = Linear::make(s, name + ".out", d, d, rng, 0.5);
    b.ffn = Mlp::make(s, name + ".ffn", d, hidden, d, rng, 0.5);
    return b;
  }

  Tensor operator()(Binding& p, const Tensor& x_dst, const Tensor& x_src,
                    const std::vector<std::size_t>& src,
                    const std::vector<std::size_t>& dst,
                    const Tensor* rel = nullptr,
                    const Tensor* extra = nullptr) const {
    if (src.size() != dst.size()) {
      throw std::invalid_argument("attention block: src/dst size mismatch");
    }
    if (src.empty()) return x_dst;
    Tensor q = matmul(ln_q(p, x_dst), p(wq));
    if (extra_dim) {
      if (!extra || extra->cols() != extra_dim || extra->rows() != x_dst.rows())
        throw std::invalid_argument("attention block: extra query input shape");
      q = add(q, matmul(*extra, p(wx)));
    }
    const Tensor hs = ln_src(p, x_src);
    Tensor k = gather_rows(matmul(hs, p(wk)), src);
    Tensor v = gather_rows(matmul(hs, p(wv)), src);
    if (relative) {
      if (!rel || rel->rows() != src.size() || rel->cols() != d)
        throw std::invalid_argument("attention block: relative embedding shape");
      k = add(k, matmul(*rel, p(wkr)));
      v = add(v, matmul(*rel, p(wvr)));
    }
    const Tensor mixed = edge_attention(q, k, v, dst, heads);
    const Tensor y = add(x_dst, out(p, mixed));
    const Tensor z = add(y, ffn(p, ln_ff(p, y)));
    return select_rows(rows_with_edges(x_dst.rows(), dst), z, x_dst);
  }
};

}  // namespace cotraj::nn
