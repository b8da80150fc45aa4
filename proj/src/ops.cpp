#include "radgan/ops.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Core>

namespace radgan::ag {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                                shape_string(b.shape()));
  }
}

Tensor* grad_target(Node& self, size_t i) {
  Node& in = *self.inputs[i];
  return in.requires_grad ? &in.ensure_grad() : nullptr;
}

// Elementwise map with derivative expressed through input x and output y.
template <typename F, typename DF>
Var unary(const Var& a, F f, DF df) {
  Tensor out(a.shape());
  const double* x = a.value().data();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = f(x[i]);
  return make_result(std::move(out), {a}, [df](Node& self) {
    Tensor* ga = grad_target(self, 0);
    if (!ga) return;
    const double* xv = self.inputs[0]->value.data();
    const double* yv = self.value.data();
    const double* g = self.grad.data();
    for (int64_t i = 0; i < self.value.numel(); ++i) (*ga)[i] += g[i] * df(xv[i], yv[i]);
  });
}

int64_t reflect_index(int64_t i, int64_t n) {
  if (n == 1) return 0;
  const int64_t period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace

int64_t conv_out_len(int64_t in, int64_t kernel, int64_t stride, int64_t padding, int64_t dilation) {
  const int64_t span = dilation * (kernel - 1) + 1;
  if (in + 2 * padding < span) return 0;
  return (in + 2 * padding - span) / stride + 1;
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  out.add_(b.value());
  return make_result(std::move(out), {a, b}, [](Node& self) {
    for (size_t k = 0; k < 2; ++k)
      if (Tensor* g = grad_target(self, k)) g->add_(self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] -= b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    if (Tensor* g = grad_target(self, 0)) g->add_(self.grad);
    if (Tensor* g = grad_target(self, 1))
      for (int64_t i = 0; i < g->numel(); ++i) (*g)[i] -= self.grad[i];
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] * b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    const Tensor& av = self.inputs[0]->value;
    const Tensor& bv = self.inputs[1]->value;
    if (Tensor* g = grad_target(self, 0))
      for (int64_t i = 0; i < g->numel(); ++i) (*g)[i] += self.grad[i] * bv[i];
    if (Tensor* g = grad_target(self, 1))
      for (int64_t i = 0; i < g->numel(); ++i) (*g)[i] += self.grad[i] * av[i];
  });
}

Var div(const Var& a, const Var& b) {
  require_same_shape(a, b, "div");
  Tensor out(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] / b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    const Tensor& bv = self.inputs[1]->value;
    if (Tensor* g = grad_target(self, 0))
      for (int64_t i = 0; i < g->numel(); ++i) (*g)[i] += self.grad[i] / bv[i];
    if (Tensor* g = grad_target(self, 1))
      for (int64_t i = 0; i < g->numel(); ++i) (*g)[i] -= self.grad[i] * self.value[i] / bv[i];
  });
}

Var add_scalar(const Var& a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var scale(const Var& a, double s) {
  return unary(a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Var scale_by(const Var& a, const Var& s) {
  if (s.numel() != 1) throw std::invalid_argument("scale_by: scale must have one element");
  const double sv = s.value()[0];
  Tensor out(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] * sv;
  return make_result(std::move(out), {a, s}, [](Node& self) {
    const Tensor& av = self.inputs[0]->value;
    const double sval = self.inputs[1]->value[0];
    if (Tensor* g = grad_target(self, 0))
      for (int64_t i = 0; i < g->numel(); ++i) (*g)[i] += self.grad[i] * sval;
    if (Tensor* g = grad_target(self, 1)) {
      double acc = 0.0;
      for (int64_t i = 0; i < av.numel(); ++i) acc += self.grad[i] * av[i];
      (*g)[0] += acc;
    }
  });
}

Var mul_const(const Var& a, const Tensor& w) {
  if (w.numel() != a.numel()) throw std::invalid_argument("mul_const: size mismatch");
  Tensor out(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] * w[i];
  return make_result(std::move(out), {a}, [w](Node& self) {
    if (Tensor* g = grad_target(self, 0))
      for (int64_t i = 0; i < g->numel(); ++i) (*g)[i] += self.grad[i] * w[i];
  });
}

Var leaky_relu(const Var& a, double slope) {
  return unary(
      a, [slope](double x) { return x >= 0.0 ? x : slope * x; },
      [slope](double x, double) { return x >= 0.0 ? 1.0 : slope; });
}

Var relu(const Var& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var tanh(const Var& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(const Var& a) {
  return unary(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); }, [](double, double y) { return y * (1.0 - y); });
}

Var log(const Var& a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var log1p(const Var& a) {
  return unary(a, [](double x) { return std::log1p(x); }, [](double x, double) { return 1.0 / (1.0 + x); });
}

Var abs(const Var& a) {
  return unary(
      a, [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var sqrt(const Var& a) {
  return unary(
      a, [](double x) { return std::sqrt(x); }, [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Var square(const Var& a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var clamp_min(const Var& a, double lo) {
  return unary(
      a, [lo](double x) { return x < lo ? lo : x; }, [lo](double x, double) { return x < lo ? 0.0 : 1.0; });
}

Var sum(const Var& a) {
  double acc = 0.0;
  for (double v : a.value().values()) acc += v;
  return make_result(Tensor::scalar(acc), {a}, [](Node& self) {
    if (Tensor* g = grad_target(self, 0)) {
      const double s = self.grad[0];
      for (int64_t i = 0; i < g->numel(); ++i) (*g)[i] += s;
    }
  });
}

Var mean(const Var& a) {
  const int64_t n = a.numel();
  if (n == 0) throw std::invalid_argument("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var sum_per_sample(const Var& a) {
  const int64_t b = a.dim(0);
  const int64_t inner = a.numel() / b;
  Tensor out(Shape{b});
  for (int64_t i = 0; i < b; ++i) {
    double acc = 0.0;
    for (int64_t j = 0; j < inner; ++j) acc += a.value()[i * inner + j];
    out[i] = acc;
  }
  return make_result(std::move(out), {a}, [b, inner](Node& self) {
    if (Tensor* g = grad_target(self, 0))
      for (int64_t i = 0; i < b; ++i)
        for (int64_t j = 0; j < inner; ++j) (*g)[i * inner + j] += self.grad[i];
  });
}

Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return make_result(std::move(out), {a}, [](Node& self) {
    if (Tensor* g = grad_target(self, 0))
      for (int64_t i = 0; i < g->numel(); ++i) (*g)[i] += self.grad[i];
  });
}

Var concat(const std::vector<Var>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat of nothing");
  const Shape& ref = parts.front().shape();
  const int rank = static_cast<int>(ref.size());
  if (axis < 0) axis += rank;
  int64_t outer = 1, inner = 1, total_axis = 0;
  for (int d = 0; d < axis; ++d) outer *= ref[static_cast<size_t>(d)];
  for (int d = axis + 1; d < rank; ++d) inner *= ref[static_cast<size_t>(d)];
  std::vector<int64_t> sizes;
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    if (static_cast<int>(s.size()) != rank) throw std::invalid_argument("concat: rank mismatch");
    for (int d = 0; d < rank; ++d)
      if (d != axis && s[static_cast<size_t>(d)] != ref[static_cast<size_t>(d)])
        throw std::invalid_argument("concat: shape mismatch " + shape_string(s) + " vs " + shape_string(ref));
    sizes.push_back(s[static_cast<size_t>(axis)]);
    total_axis += sizes.back();
  }
  Shape out_shape = ref;
  out_shape[static_cast<size_t>(axis)] = total_axis;
  Tensor out(out_shape);
  int64_t offset = 0;
  for (size_t k = 0; k < parts.size(); ++k) {
    const Tensor& pv = parts[k].value();
    for (int64_t o = 0; o < outer; ++o)
      std::copy_n(pv.data() + o * sizes[k] * inner, sizes[k] * inner,
                  out.data() + (o * total_axis + offset) * inner);
    offset += sizes[k];
  }
  return make_result(std::move(out), parts, [sizes, outer, inner, total_axis](Node& self) {
    int64_t off = 0;
    for (size_t k = 0; k < sizes.size(); ++k) {
      if (Tensor* g = grad_target(self, k)) {
        for (int64_t o = 0; o < outer; ++o)
          for (int64_t j = 0; j < sizes[k] * inner; ++j)
            (*g)[o * sizes[k] * inner + j] += self.grad[(o * total_axis + off) * inner + j];
      }
      off += sizes[k];
    }
  });
}

Var slice_last(const Var& a, int64_t start, int64_t len) {
  const int64_t n = a.shape().back();
  if (start < 0 || len < 0 || start + len > n) throw std::invalid_argument("slice_last: range out of bounds");
  const int64_t rows = a.numel() / n;
  Shape s = a.shape();
  s.back() = len;
  Tensor out(s);
  for (int64_t r = 0; r < rows; ++r) std::copy_n(a.value().data() + r * n + start, len, out.data() + r * len);
  return make_result(std::move(out), {a}, [rows, n, start, len](Node& self) {
    if (Tensor* g = grad_target(self, 0))
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < len; ++j) (*g)[r * n + start + j] += self.grad[r * len + j];
  });
}

Var pad_reflect(const Var& a, int64_t left, int64_t right) {
  const int64_t n = a.shape().back();
  const int64_t rows = a.numel() / n;
  const int64_t m = n + left + right;
  Shape s = a.shape();
  s.back() = m;
  Tensor out(s);
  std::vector<int64_t> src(static_cast<size_t>(m));
  for (int64_t j = 0; j < m; ++j) src[static_cast<size_t>(j)] = reflect_index(j - left, n);
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t j = 0; j < m; ++j) out[r * m + j] = a.value()[r * n + src[static_cast<size_t>(j)]];
  return make_result(std::move(out), {a}, [src, rows, n, m](Node& self) {
    if (Tensor* g = grad_target(self, 0))
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < m; ++j) (*g)[r * n + src[static_cast<size_t>(j)]] += self.grad[r * m + j];
  });
}

Var left_matmul(const Tensor& m, const Var& x) {
  if (m.rank() != 2 || x.value().rank() != 3 || m.dim(1) != x.dim(1)) {
    throw std::invalid_argument("left_matmul: incompatible shapes " + shape_string(m.shape()) + " and " +
                                shape_string(x.shape()));
  }
  const int64_t b = x.dim(0), k = x.dim(1), n = x.dim(2), rows = m.dim(0);
  Tensor out(Shape{b, rows, n});
  Eigen::Map<const RowMat> mm(m.data(), rows, k);
  for (int64_t i = 0; i < b; ++i) {
    Eigen::Map<const RowMat> xb(x.value().data() + i * k * n, k, n);
    Eigen::Map<RowMat> ob(out.data() + i * rows * n, rows, n);
    ob.noalias() = mm * xb;
  }
  return make_result(std::move(out), {x}, [m, b, k, n, rows](Node& self) {
    Tensor* g = grad_target(self, 0);
    if (!g) return;
    Eigen::Map<const RowMat> mm(m.data(), rows, k);
    for (int64_t i = 0; i < b; ++i) {
      Eigen::Map<const RowMat> gb(self.grad.data() + i * rows * n, rows, n);
      Eigen::Map<RowMat> gx(g->data() + i * k * n, k, n);
      gx.noalias() += mm.transpose() * gb;
    }
  });
}

Var avg_pool1d(const Var& x, int64_t kernel, int64_t stride, int64_t padding, bool ceil_mode) {
  const int64_t n = x.shape().back();
  const int64_t rows = x.numel() / n;
  const int64_t span = n + 2 * padding - kernel;
  if (span < 0) throw std::invalid_argument("avg_pool1d: input too short");
  int64_t out_len = (ceil_mode ? (span + stride - 1) / stride : span / stride) + 1;
  if (ceil_mode && (out_len - 1) * stride >= n + padding) --out_len;
  Shape s = x.shape();
  s.back() = out_len;
  Tensor out(s);
  std::vector<int64_t> lo(static_cast<size_t>(out_len)), hi(static_cast<size_t>(out_len));
  for (int64_t t = 0; t < out_len; ++t) {
    lo[static_cast<size_t>(t)] = std::max<int64_t>(0, t * stride - padding);
    hi[static_cast<size_t>(t)] = std::min<int64_t>(n, t * stride - padding + kernel);
  }
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t t = 0; t < out_len; ++t) {
      double acc = 0.0;
      const int64_t a = lo[static_cast<size_t>(t)], b = hi[static_cast<size_t>(t)];
      for (int64_t i = a; i < b; ++i) acc += x.value()[r * n + i];
      out[r * out_len + t] = acc / static_cast<double>(b - a);
    }
  return make_result(std::move(out), {x}, [lo, hi, rows, n, out_len](Node& self) {
    Tensor* g = grad_target(self, 0);
    if (!g) return;
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t t = 0; t < out_len; ++t) {
        const int64_t a = lo[static_cast<size_t>(t)], b = hi[static_cast<size_t>(t)];
        const double share = self.grad[r * out_len + t] / static_cast<double>(b - a);
        for (int64_t i = a; i < b; ++i) (*g)[r * n + i] += share;
      }
  });
}

Var weight_norm(const Var& v, const Var& g) {
  const int64_t o = v.dim(0);
  const int64_t inner = v.numel() / o;
  if (g.numel() != o) throw std::invalid_argument("weight_norm: gain size must equal leading dimension");
  std::vector<double> norms(static_cast<size_t>(o));
  Tensor out(v.shape());
  for (int64_t r = 0; r < o; ++r) {
    double ss = 0.0;
    for (int64_t j = 0; j < inner; ++j) ss += v.value()[r * inner + j] * v.value()[r * inner + j];
    const double nrm = std::sqrt(std::max(ss, 1e-300));
    norms[static_cast<size_t>(r)] = nrm;
    const double f = g.value()[r] / nrm;
    for (int64_t j = 0; j < inner; ++j) out[r * inner + j] = f * v.value()[r * inner + j];
  }
  return make_result(std::move(out), {v, g}, [norms, o, inner](Node& self) {
    const Tensor& vv = self.inputs[0]->value;
    const Tensor& gv = self.inputs[1]->value;
    Tensor* gvgrad = grad_target(self, 0);
    Tensor* gggrad = grad_target(self, 1);
    for (int64_t r = 0; r < o; ++r) {
      const double nrm = norms[static_cast<size_t>(r)];
      double dot = 0.0;
      for (int64_t j = 0; j < inner; ++j) dot += self.grad[r * inner + j] * vv[r * inner + j];
      if (gggrad) (*gggrad)[r] += dot / nrm;
      if (gvgrad) {
        const double a = gv[r] / nrm;
        const double c = gv[r] * dot / (nrm * nrm * nrm);
        for (int64_t j = 0; j < inner; ++j)
          (*gvgrad)[r * inner + j] += a * self.grad[r * inner + j] - c * vv[r * inner + j];
      }
    }
  });
}

Var spectral_normalize(const Var& w, const Tensor& u, const Tensor& v) {
  const int64_t o = w.dim(0);
  const int64_t inner = w.numel() / o;
  if (u.numel() != o || v.numel() != inner) throw std::invalid_argument("spectral_normalize: vector size mismatch");
  Eigen::Map<const RowMat> wm(w.value().data(), o, inner);
  Eigen::Map<const Eigen::VectorXd> uu(u.data(), o), vv(v.data(), inner);
  const double sigma = uu.dot(wm * vv);
  Tensor out = w.value();
  out.scale_(1.0 / sigma);
  return make_result(std::move(out), {w}, [u, v, sigma, o, inner](Node& self) {
    Tensor* g = grad_target(self, 0);
    if (!g) return;
    const Tensor& wv = self.inputs[0]->value;
    double dot = 0.0;
    for (int64_t i = 0; i < wv.numel(); ++i) dot += self.grad[i] * wv[i];
    const double c = dot / (sigma * sigma);
    for (int64_t r = 0; r < o; ++r)
      for (int64_t j = 0; j < inner; ++j)
        (*g)[r * inner + j] += self.grad[r * inner + j] / sigma - c * u[r] * v[j];
  });
}

}  // namespace radgan::ag
