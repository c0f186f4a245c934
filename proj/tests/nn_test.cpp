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

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>

#include "cotraj/nn/attention.hpp"
#include "cotraj/nn/layers.hpp"
#include "cotraj/nn/ops.hpp"
#include "cotraj/nn/params.hpp"
#include "test_util.hpp"

namespace cotraj::nn {
namespace {

using Builder = std::function<Tensor(const std::vector<Tensor>&)>;

struct Input {
  Shape shape;
  std::vector<double> values;
};

Input random_input(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(shape_size(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return {std::move(shape), std::move(v)};
}

double eval(const Builder& f, const std::vector<Input>& in) {
  NoGradGuard g;
  std::vector<Tensor> t;
  for (const auto& x : in) t.push_back(Tensor::from(x.shape, x.values));
  return f(t).item();
}

// Analytic gradient of every input coordinate against central differences.
void gradcheck(const Builder& f, std::vector<Input> in, double h = 1e-6, double rtol = 1e-6) {
  std::vector<Tensor> leaves;
  for (const auto& x : in) leaves.push_back(Tensor::from(x.shape, x.values, true));
  backward(f(leaves));
  for (std::size_t k = 0; k < in.size(); ++k) {
    for (std::size_t i = 0; i < in[k].values.size(); ++i) {
      const double keep = in[k].values[i];
      in[k].values[i] = keep + h;
      const double up = eval(f, in);
      in[k].values[i] = keep - h;
      const double down = eval(f, in);
      in[k].values[i] = keep;
      const double fd = (up - down) / (2 * h);
      const double an = leaves[k].has_grad() ? leaves[k].grad()[i] : 0.0;
      EXPECT_NEAR(an, fd, rtol * std::max(1.0, std::abs(fd))) << "input " << k << " coord " << i;
    }
  }
}

// Random weights so that every output coordinate matters.
Tensor project(const Tensor& y, std::uint64_t seed = 99) {
  Rng rng(seed);
  std::vector<double> w(y.size());
  for (auto& v : w) v = rng.uniform(-1, 1);
  return weighted_sum(y, w);
}

TEST(Backward, SumGivesOnes) {
  Tensor x = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}, true);
  backward(sum(x));
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, HalfSquaredNormGivesX) {
  Tensor x = Tensor::matrix(1, 4, {0.5, -2, 3, 7}, true);
  backward(scale(sum(mul(x, x)), 0.5));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(x.grad()[i], x[i]);
}

TEST(Backward, LeafGradientsAccumulate) {
  Tensor x = Tensor::matrix(1, 2, {1, 2}, true);
  const Tensor loss = sum(square(x));
  backward(loss);
  backward(loss);
  EXPECT_EQ(x.grad()[0], 4.0);
  EXPECT_EQ(x.grad()[1], 8.0);
}

TEST(Backward, DetachedGraphIsAnError) {
  Tensor x = Tensor::matrix(1, 2, {1, 2}, true);
  EXPECT_THROW(backward(sum(detach(x))), std::logic_error);
  EXPECT_THROW(backward(x), std::invalid_argument);
}

TEST(Backward, NoGradSkipsTape) {
  Tensor x = Tensor::matrix(1, 2, {1, 2}, true);
  NoGradGuard g;
  EXPECT_FALSE(sum(x).requires_grad());
}

TEST(GradCheck, Elementwise) {
  Rng rng(1);
  gradcheck([](const auto& t) { return project(exp(t[0])); }, {random_input({3, 4}, rng)});
  gradcheck([](const auto& t) { return project(log(t[0])); }, {random_input({3, 4}, rng, 0.5, 2.0)});
  gradcheck([](const auto& t) { return project(abs(t[0])); }, {random_input({3, 4}, rng)});
  gradcheck([](const auto& t) { return project(sin(t[0])); }, {random_input({3, 4}, rng)});
  gradcheck([](const auto& t) { return project(cos(t[0])); }, {random_input({3, 4}, rng)});
  gradcheck([](const auto& t) { return project(tanh(t[0])); }, {random_input({3, 4}, rng)});
  gradcheck([](const auto& t) { return project(silu(t[0])); }, {random_input({3, 4}, rng)});
  gradcheck([](const auto& t) { return project(softplus(t[0])); }, {random_input({3, 4}, rng)});
  gradcheck([](const auto& t) { return project(square(t[0])); }, {random_input({3, 4}, rng)});
  gradcheck([](const auto& t) { return project(add_scalar(scale(neg(t[0]), 3.0), 2.0)); }, {random_input({3, 4}, rng)});
}

TEST(GradCheck, Binary) {
  Rng rng(2);
  gradcheck([](const auto& t) { return project(add(t[0], t[1])); }, {random_input({2, 3}, rng), random_input({2, 3}, rng)});
  gradcheck([](const auto& t) { return project(sub(t[0], t[1])); }, {random_input({2, 3}, rng), random_input({2, 3}, rng)});
  gradcheck([](const auto& t) { return project(mul(t[0], t[1])); }, {random_input({2, 3}, rng), random_input({2, 3}, rng)});
  gradcheck([](const auto& t) { return project(add_row(t[0], t[1])); }, {random_input({4, 3}, rng), random_input({3}, rng)});
  gradcheck([](const auto& t) { return project(matmul(t[0], t[1])); }, {random_input({3, 4}, rng), random_input({4, 2}, rng)});
  gradcheck([](const auto& t) { return project(linear(t[0], t[1], t[2])); },
            {random_input({3, 4}, rng), random_input({4, 2}, rng), random_input({2}, rng)});
}

TEST(GradCheck, Structural) {
  Rng rng(3);
  gradcheck([](const auto& t) { return project(transpose(t[0])); }, {random_input({2, 5}, rng)});
  gradcheck([](const auto& t) { return project(reshape(t[0], {5, 2})); }, {random_input({2, 5}, rng)});
  gradcheck([](const auto& t) { return project(concat_cols({t[0], t[1]})); }, {random_input({3, 2}, rng), random_input({3, 4}, rng)});
  gradcheck([](const auto& t) { return project(concat_rows({t[0], t[1]})); }, {random_input({1, 3}, rng), random_input({2, 3}, rng)});
  gradcheck([](const auto& t) { return project(slice_cols(t[0], 1, 4)); }, {random_input({3, 5}, rng)});
  gradcheck([](const auto& t) { return project(gather_rows(t[0], {2, 0, 2, 1})); }, {random_input({3, 2}, rng)});
  gradcheck([](const auto& t) { return project(select_rows({true, false, true}, t[0], t[1])); },
            {random_input({3, 2}, rng), random_input({3, 2}, rng)});
  gradcheck([](const auto& t) { return project(scale_rows(t[0], {0.5, -2.0})); }, {random_input({2, 3}, rng)});
  gradcheck([](const auto& t) { return project(cumsum_steps(t[0], 2)); }, {random_input({2, 8}, rng)});
  gradcheck([](const auto& t) { return add(project(row_sum(t[0])), mean(t[0])); }, {random_input({3, 4}, rng)});
}

TEST(GradCheck, Normalizations) {
  Rng rng(4);
  gradcheck([](const auto& t) { return project(layer_norm(t[0], t[1], t[2])); },
            {random_input({3, 5}, rng), random_input({5}, rng), random_input({5}, rng)});
  gradcheck([](const auto& t) { return project(log_softmax_rows(t[0])); }, {random_input({3, 4}, rng, -3, 3)});
  gradcheck([](const auto& t) { return project(softmax_rows(t[0])); }, {random_input({3, 4}, rng, -3, 3)});
  const std::vector<bool> mask{true, false, true, true, false, false, false, false, true};
  gradcheck([&](const auto& t) { return project(softmax_rows(t[0], &mask)); }, {random_input({3, 3}, rng)});
}

TEST(Softmax, RowsSumToOneAndMaskedCellsAreZero) {
  Rng rng(5);
  const std::vector<bool> mask{true, false, true, false, false, false};
  const Tensor y = softmax_rows(Tensor::from({2, 3}, random_input({2, 3}, rng).values), &mask);
  EXPECT_NEAR(y.at(0, 0) + y.at(0, 2), 1.0, 1e-12);
  EXPECT_EQ(y.at(0, 1), 0.0);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(y.at(1, j), 0.0);
}

// Straight-line multi-head attention with explicit loops.
std::vector<double> scalar_attention(const std::vector<double>& q, const std::vector<double>& k,
                                     const std::vector<double>& v, const std::vector<bool>& mask,
                                     std::size_t nq, std::size_t nk, std::size_t d, std::size_t heads,
                                     const std::vector<double>& wq, const std::vector<double>& wk,
                                     const std::vector<double>& wv, const std::vector<double>& wo) {
  auto mm = [](const std::vector<double>& a, const std::vector<double>& b, std::size_t n, std::size_t m,
               std::size_t p) {
    std::vector<double> c(n * p, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < p; ++j)
        for (std::size_t r = 0; r < m; ++r) c[i * p + j] += a[i * m + r] * b[r * p + j];
    return c;
  };
  const auto Q = mm(q, wq, nq, d, d), K = mm(k, wk, nk, d, d), V = mm(v, wv, nk, d, d);
  const std::size_t dh = d / heads;
  std::vector<double> mixed(nq * d, 0.0);
  for (std::size_t i = 0; i < nq; ++i)
    for (std::size_t h = 0; h < heads; ++h) {
      std::vector<double> s(nk, 0.0);
      double mx = -1e300;
      bool any = false;
      for (std::size_t j = 0; j < nk; ++j) {
        if (!mask[i * nk + j]) continue;
        any = true;
        for (std::size_t c = 0; c < dh; ++c) s[j] += Q[i * d + h * dh + c] * K[j * d + h * dh + c];
        s[j] /= std::sqrt(static_cast<double>(dh));
        mx = std::max(mx, s[j]);
      }
      if (!any) continue;
      double z = 0.0;
      for (std::size_t j = 0; j < nk; ++j)
        if (mask[i * nk + j]) z += std::exp(s[j] - mx);
      for (std::size_t j = 0; j < nk; ++j) {
        if (!mask[i * nk + j]) continue;
        const double a = std::exp(s[j] - mx) / z;
        for (std::size_t c = 0; c < dh; ++c) mixed[i * d + h * dh + c] += a * V[j * d + h * dh + c];
      }
    }
  return mm(mixed, wo, nq, d, d);
}

AttentionParams random_params(std::size_t d, std::size_t heads, Rng& rng) {
  auto w = [&] { return Tensor::from({d, d}, random_input({d, d}, rng).values); };
  return {w(), w(), w(), w(), heads};
}

TEST(Attention, MatchesScalarReference) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t nq = 3, nk = 4, d = 4, heads = 2;
    const auto q = random_input({nq, d}, rng), k = random_input({nk, d}, rng), v = random_input({nk, d}, rng);
    std::vector<bool> mask(nq * nk);
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = rng.bernoulli(0.7);
    const auto p = random_params(d, heads, rng);
    const auto r = attention(Tensor::from(q.shape, q.values), Tensor::from(k.shape, k.values),
                             Tensor::from(v.shape, v.values), mask, p);
    auto vals = [](const Tensor& t) { return std::vector<double>(t.values().begin(), t.values().end()); };
    const auto ref = scalar_attention(q.values, k.values, v.values, mask, nq, nk, d, heads, vals(p.w_q),
                                      vals(p.w_k), vals(p.w_v), vals(p.w_o));
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(r.output[i], ref[i], 1e-12);
    for (std::size_t i = 0; i < nq; ++i) {
      bool any = false;
      for (std::size_t j = 0; j < nk; ++j) any = any || mask[i * nk + j];
      EXPECT_EQ(r.fully_masked[i], !any);
    }
  }
}

TEST(Attention, SingleKeyReturnsProjectedValue) {
  Rng rng(7);
  const std::size_t d = 4;
  const auto p = random_params(d, 2, rng);
  const Tensor q = Tensor::from({2, d}, random_input({2, d}, rng).values);
  const Tensor kv = Tensor::from({1, d}, random_input({1, d}, rng).values);
  const auto r = attention(q, kv, kv, {true, true}, p);
  const Tensor expect = matmul(matmul(kv, p.w_v), p.w_o);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t c = 0; c < d; ++c) EXPECT_NEAR(r.output.at(i, c), expect[c], 1e-12);
}

TEST(Attention, KeyPermutationInvariant) {
  Rng rng(8);
  const std::size_t d = 4;
  const auto p = random_params(d, 2, rng);
  const auto q = random_input({2, d}, rng), k = random_input({3, d}, rng), v = random_input({3, d}, rng);
  const std::vector<bool> all(6, true);
  const auto a = attention(Tensor::from(q.shape, q.values), Tensor::from(k.shape, k.values),
                           Tensor::from(v.shape, v.values), all, p);
  const std::vector<std::size_t> perm{2, 0, 1};
  const auto b = attention(Tensor::from(q.shape, q.values), gather_rows(Tensor::from(k.shape, k.values), perm),
                           gather_rows(Tensor::from(v.shape, v.values), perm), all, p);
  for (std::size_t i = 0; i < a.output.size(); ++i) EXPECT_NEAR(a.output[i], b.output[i], 1e-12);
}

TEST(Attention, MaskedKeysGetZeroWeightAndFullyMaskedRowsAreZero) {
  Rng rng(9);
  const std::size_t d = 4;
  const auto p = random_params(d, 1, rng);
  const auto q = random_input({2, d}, rng), k = random_input({3, d}, rng);
  const std::vector<bool> mask{true, false, true, false, false, false};
  const auto r = attention(Tensor::from(q.shape, q.values), Tensor::from(k.shape, k.values),
                           Tensor::from(k.shape, k.values), mask, p);
  EXPECT_EQ(r.weights.weights.size(), 2u);  // only unmasked cells carry weight
  EXPECT_NEAR(r.weights.weights[0] + r.weights.weights[1], 1.0, 1e-12);
  EXPECT_TRUE(r.fully_masked[1]);
  for (std::size_t c = 0; c < d; ++c) EXPECT_EQ(r.output.at(1, c), 0.0);
}

TEST(Attention, ShapeErrors) {
  Rng rng(10);
  const auto p = random_params(4, 3, rng);
  const Tensor x = Tensor::from({1, 4}, random_input({1, 4}, rng).values);
  EXPECT_THROW(attention(x, x, x, {true}, p), std::invalid_argument);
  const auto p2 = random_params(4, 2, rng);
  EXPECT_THROW(attention(x, x, x, {true, true}, p2), std::invalid_argument);
}

TEST(GradCheck, EdgeAttention) {
  Rng rng(11);
  const std::vector<std::size_t> dst{0, 0, 1, 2, 2, 2};
  gradcheck([&](const auto& t) { return project(edge_attention(t[0], t[1], t[2], dst, 2)); },
            {random_input({4, 4}, rng), random_input({6, 4}, rng), random_input({6, 4}, rng)});
}

TEST(FourierEmbed, ZeroInputFeatures) {
  ParameterStore s;
  Rng rng(12);
  const auto f = FourierEmbed::make(s, "f", 3, 5, 8, rng);
  const Tensor feat = f.features(s, Tensor::matrix(1, 3, {0, 0, 0}));
  ASSERT_EQ(feat.cols(), 13u);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(feat[j], 0.0);
  for (std::size_t j = 3; j < 8; ++j) EXPECT_EQ(feat[j], 1.0);
  for (std::size_t j = 8; j < 13; ++j) EXPECT_EQ(feat[j], 0.0);
}

TEST(FourierEmbed, DeterministicAndDimensionChecked) {
  ParameterStore s1, s2;
  Rng r1(13), r2(13);
  const auto f1 = FourierEmbed::make(s1, "f", 2, 4, 8, r1);
  const auto f2 = FourierEmbed::make(s2, "f", 2, 4, 8, r2);
  Binding b1(s1, false), b2(s2, false);
  const auto a = fourier_embed(b1, f1, {0.3, -1.2});
  const auto b = fourier_embed(b2, f2, {0.3, -1.2});
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
  EXPECT_THROW(fourier_embed(b1, f1, {1.0}), std::invalid_argument);
}

TEST(FourierEmbed, InputGradientMatchesFiniteDifference) {
  ParameterStore s;
  Rng rng(14);
  const auto f = FourierEmbed::make(s, "f", 3, 4, 8, rng);
  Binding p(s, false);
  gradcheck([&](const auto& t) { return project(f(p, t[0])); }, {random_input({2, 3}, rng)}, 1e-6, 1e-4);
}

TEST(FourierEmbed, FrequenciesAreFrozen) {
  ParameterStore s;
  Rng rng(15);
  const auto f = FourierEmbed::make(s, "f", 2, 3, 4, rng);
  EXPECT_TRUE(s[f.freq].frozen);
  const auto before = s[f.freq].value;
  Binding p(s, true);
  backward(sum(f(p, Tensor::matrix(1, 2, {0.2, 0.4}))));
  auto grads = zero_gradients(s);
  p.accumulate_grads(grads);
  for (double g : grads[f.freq]) EXPECT_EQ(g, 0.0);
  for (auto& g : grads) std::fill(g.begin(), g.end(), 1.0);
  AdamW opt({0.1});
  opt.step(s, grads);
  EXPECT_EQ(s[f.freq].value, before);
  std::size_t trainable = 0;
  for (const auto& q : s.all())
    if (!q.frozen) trainable += q.value.size();
  EXPECT_EQ(s.scalar_count(), trainable);
}

TEST(AdamW, ZeroGradientLeavesParameters) {
  std::vector<double> p{1.0, -2.0};
  AdamState st;
  adamw_step(p, std::vector<double>{0.0, 0.0}, st, {0.1});
  EXPECT_EQ(p, (std::vector<double>{1.0, -2.0}));
}

TEST(AdamW, FirstStepMovesByLearningRate) {
  std::vector<double> p{3.0};
  AdamState st;
  adamw_step(p, std::vector<double>{1.0}, st, {0.1, 0.9, 0.999, 1e-8, 0.0});
  // m_hat = 1, v_hat = 1, so the step is lr / (1 + eps).
  EXPECT_NEAR(p[0], 3.0 - 0.1 / (1.0 + 1e-8), 1e-15);
}

TEST(AdamW, DecoupledWeightDecay) {
  std::vector<double> p{2.0};
  AdamState st;
  adamw_step(p, std::vector<double>{0.0}, st, {0.1, 0.9, 0.999, 1e-8, 0.5});
  EXPECT_NEAR(p[0], 2.0 - 0.1 * 0.5 * 2.0, 1e-15);
}

TEST(AdamW, QuadraticBowlConverges) {
  std::vector<double> p{3.0, -4.0, 0.5};
  AdamState st;
  AdamWConfig hp{0.05};
  for (int i = 0; i < 500; ++i) {
    std::vector<double> g(p.size());
    for (std::size_t k = 0; k < p.size(); ++k) g[k] = 2.0 * p[k];
    hp.lr = 0.05 * (1.0 - i / 500.0);
    adamw_step(p, g, st, hp);
  }
  double f = 0.0;
  for (double x : p) f += x * x;
  EXPECT_LT(f, 1e-6);
}

TEST(Checkpoint, RoundTrip) {
  ParameterStore a, b;
  Rng r1(16), r2(17);
  Linear::make(a, "l", 3, 2, r1);
  FourierEmbed::make(a, "f", 2, 3, 4, r1);
  Linear::make(b, "l", 3, 2, r2);
  FourierEmbed::make(b, "f", 2, 3, 4, r2);
  const auto path = (std::filesystem::temp_directory_path() / "cotraj_ckpt_test.bin").string();
  checkpoint::save(a, path);
  const auto v0 = b.version();
  checkpoint::load(path, b);
  EXPECT_GT(b.version(), v0);
  for (ParamId i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].value, b[i].value);
  std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsCorruptInput) {
  ParameterStore a;
  Rng rng(18);
  Linear::make(a, "l", 3, 2, rng);
  std::string data = checkpoint::serialize(a);
  EXPECT_THROW(checkpoint::deserialize_into("NOTACKPT" + data.substr(8), a), DataError);
  EXPECT_THROW(checkpoint::deserialize_into(data.substr(0, data.size() - 3), a), DataError);
  EXPECT_THROW(checkpoint::deserialize_into(data + "x", a), DataError);
  std::string v2 = data;
  v2[8] = 2;
  EXPECT_THROW(checkpoint::deserialize_into(v2, a), SchemaError);
  ParameterStore other;
  Linear::make(other, "l", 3, 3, rng);
  EXPECT_THROW(checkpoint::deserialize_into(data, other), DataError);
}

TEST(Checkpoint, LittleEndianLayout) {
  ParameterStore a;
  a.add("x", {1}, {1.0});
  const std::string d = checkpoint::serialize(a);
  // magic(8) version(4) count(4) namelen(4) "x" rank(4) dim(8) value(8)
  ASSERT_EQ(d.size(), 8u + 4 + 4 + 4 + 1 + 4 + 8 + 8);
  EXPECT_EQ(static_cast<unsigned char>(d[8]), 1u);
  EXPECT_EQ(static_cast<unsigned char>(d[d.size() - 1]), 0x3fu);  // 1.0 = 0x3ff0...
  EXPECT_EQ(static_cast<unsigned char>(d[d.size() - 2]), 0xf0u);
}

TEST(Determinism, ForwardIsBitIdentical) {
  auto run = [] {
    ParameterStore s;
    Rng rng(19);
    const auto b = RelAttentionBlock::make(s, "b", 8, 2, 16, rng);
    const auto e = FourierEmbed::make(s, "e", 6, 4, 8, rng);
    Binding p(s, false);
    std::vector<double> x(5 * 8), r(4 * 6);
    for (auto& v : x) v = rng.normal();
    for (auto& v : r) v = rng.normal();
    const Tensor rel = e(p, Tensor::matrix(4, 6, r));
    const Tensor out = b(p, Tensor::matrix(5, 8, x), Tensor::matrix(5, 8, x), {0, 1, 2, 3}, {1, 1, 4, 4}, &rel);
    return std::vector<double>(out.values().begin(), out.values().end());
  };
  EXPECT_EQ(run(), run());
}

TEST(RelAttentionBlock, RowsWithoutEdgesPassThrough) {
  ParameterStore s;
  Rng rng(20);
  const auto b = RelAttentionBlock::make(s, "b", 4, 2, 8, rng, false);
  Binding p(s, false);
  const Tensor x = Tensor::from({3, 4}, random_input({3, 4}, rng).values);
  const Tensor y = b(p, x, x, {0, 2}, {1, 1});
  for (std::size_t c = 0; c < 4; ++c) {
    EXPECT_EQ(y.at(0, c), x.at(0, c));
    EXPECT_EQ(y.at(2, c), x.at(2, c));
  }
  EXPECT_THROW(RelAttentionBlock::make(s, "bad", 6, 4, 8, rng), ConfigError);
}

TEST(GradCheck, RelAttentionBlockParameters) {
  ParameterStore s;
  Rng rng(21);
  const auto b = RelAttentionBlock::make(s, "b", 4, 2, 8, rng, true, 3);
  const auto x = random_input({3, 4}, rng), rel = random_input({4, 4}, rng), extra = random_input({3, 3}, rng);
  const std::vector<std::size_t> src{0, 1, 2, 2}, dst{1, 1, 0, 2};
  auto loss = [&](Binding& p) {
    const Tensor r = Tensor::from(rel.shape, rel.values), e = Tensor::from(extra.shape, extra.values);
    const Tensor t = Tensor::from(x.shape, x.values);
    return project(b(p, t, t, src, dst, &r, &e));
  };
  Binding p(s, true);
  backward(loss(p));
  for (ParamId id = 0; id < s.size(); ++id) {
    const auto g = p.grad_of(id);
    for (std::size_t i = 0; i < g.size(); i += 3) {
      auto& v = s.mutable_param(id).value[i];
      const double keep = v;
      auto f = [&](double at) {
        v = at;
        NoGradGuard ng;
        Binding q(s, false);
        return loss(q).item();
      };
      const double fd = cotraj::testing::central_difference(f, keep, 1e-6);
      v = keep;
      EXPECT_NEAR(g[i], fd, 1e-6 * std::max(1.0, std::abs(fd))) << s[id].name << "[" << i << "]";
    }
  }
}

}  // namespace
}  // namespace cotraj::nn
