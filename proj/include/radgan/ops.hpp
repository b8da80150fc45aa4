#pragma once

#include <vector>

#include "radgan/autograd.hpp"

// Differentiable operations over Var. Layout conventions follow the usual
// channel-first convention: 1D signals are [B, C, L], 2D maps [B, C, H, W].
namespace radgan::ag {

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var add_scalar(const Var& a, double s);
Var scale(const Var& a, double s);
// Multiplies every element of `a` by the single element of `s`.
Var scale_by(const Var& a, const Var& s);
// Elementwise product with a constant of equal element count.
Var mul_const(const Var& a, const Tensor& w);

Var leaky_relu(const Var& a, double slope);
Var relu(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var log(const Var& a);
Var log1p(const Var& a);
Var abs(const Var& a);
Var sqrt(const Var& a);
Var square(const Var& a);
// max(a, lo); the gradient is zero where the floor is active.
Var clamp_min(const Var& a, double lo);

Var sum(const Var& a);
Var mean(const Var& a);
// Sums everything except axis 0: [B, ...] -> [B].
Var sum_per_sample(const Var& a);

Var reshape(const Var& a, Shape shape);
Var concat(const std::vector<Var>& parts, int axis);
// Elements [start, start + len) of the last axis.
Var slice_last(const Var& a, int64_t start, int64_t len);
// Reflect padding along the last axis.
Var pad_reflect(const Var& a, int64_t left, int64_t right);
// [M, K] x [B, K, N] -> [B, M, N] with a constant left factor.
Var left_matmul(const Tensor& m, const Var& x);

struct Conv1dOptions {
  int64_t stride = 1;
  int64_t padding = 0;
  int64_t dilation = 1;
  int64_t groups = 1;
};
// x [B, Cin, L], w [Cout, Cin/groups, K], bias [Cout] or undefined.
Var conv1d(const Var& x, const Var& w, const Var& bias, const Conv1dOptions& opt);

// x [B, Cin, L], w [Cin, Cout, K]. Output length (L-1)*stride - 2*padding + K.
Var conv_transpose1d(const Var& x, const Var& w, const Var& bias, int64_t stride, int64_t padding);

struct Conv2dOptions {
  int64_t stride_h = 1, stride_w = 1;
  int64_t pad_h = 0, pad_w = 0;
  int64_t dil_h = 1, dil_w = 1;
};
// x [B, Cin, H, W], w [Cout, Cin, KH, KW].
Var conv2d(const Var& x, const Var& w, const Var& bias, const Conv2dOptions& opt);

// Average pooling over the last axis counting only in-bounds samples.
Var avg_pool1d(const Var& x, int64_t kernel, int64_t stride, int64_t padding, bool ceil_mode);

// w[o] = g[o] * v[o] / ||v[o]|| over axis 0 slices. g has shape [O].
Var weight_norm(const Var& v, const Var& g);

// w / sigma with sigma = u^T W v and (u, v) held fixed, W viewed as [O, rest].
Var spectral_normalize(const Var& w, const Tensor& u, const Tensor& v);

int64_t conv_out_len(int64_t in, int64_t kernel, int64_t stride, int64_t padding, int64_t dilation = 1);

}  // namespace radgan::ag
