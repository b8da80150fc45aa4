// im2col + GEMM convolutions. Column buffers are rebuilt in the backward
// pass instead of being cached, which keeps full-scale activations bounded.
#include <cstring>
#include <stdexcept>

#include <Eigen/Core>

#include "radgan/ops.hpp"

namespace radgan::ag {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Conv1dGeom {
  int64_t batch, cin, len, cout, cin_g, kernel, out_len, groups, cout_g;
  Conv1dOptions opt;
};

void im2col_1d(const double* x, const Conv1dGeom& g, double* col) {
  const int64_t s = g.opt.stride, d = g.opt.dilation, p = g.opt.padding;
  for (int64_t ci = 0; ci < g.cin_g; ++ci) {
    const double* xr = x + ci * g.len;
    for (int64_t k = 0; k < g.kernel; ++k) {
      double* cr = col + (ci * g.kernel + k) * g.out_len;
      const int64_t off = k * d - p;
      if (s == 1) {
        const int64_t t0 = std::max<int64_t>(0, -off);
        const int64_t t1 = std::min<int64_t>(g.out_len, g.len - off);
        for (int64_t t = 0; t < std::min(t0, g.out_len); ++t) cr[t] = 0.0;
        if (t1 > t0) std::memcpy(cr + t0, xr + t0 + off, static_cast<size_t>(t1 - t0) * sizeof(double));
        for (int64_t t = std::max(t1, t0); t < g.out_len; ++t) cr[t] = 0.0;
      } else {
        for (int64_t t = 0; t < g.out_len; ++t) {
          const int64_t idx = t * s + off;
          cr[t] = (idx >= 0 && idx < g.len) ? xr[idx] : 0.0;
        }
      }
    }
  }
}

void col2im_1d(const double* col, const Conv1dGeom& g, double* dx) {
  const int64_t s = g.opt.stride, d = g.opt.dilation, p = g.opt.padding;
  for (int64_t ci = 0; ci < g.cin_g; ++ci) {
    double* xr = dx + ci * g.len;
    for (int64_t k = 0; k < g.kernel; ++k) {
      const double* cr = col + (ci * g.kernel + k) * g.out_len;
      const int64_t off = k * d - p;
      for (int64_t t = 0; t < g.out_len; ++t) {
        const int64_t idx = t * s + off;
        if (idx >= 0 && idx < g.len) xr[idx] += cr[t];
      }
    }
  }
}

bool is_pointwise(const Conv1dGeom& g) {
  return g.kernel == 1 && g.opt.stride == 1 && g.opt.padding == 0;
}

}  // namespace

Var conv1d(const Var& x, const Var& w, const Var& bias, const Conv1dOptions& opt) {
  if (x.value().rank() != 3 || w.value().rank() != 3) throw std::invalid_argument("conv1d expects rank-3 x and w");
  Conv1dGeom g{};
  g.opt = opt;
  g.batch = x.dim(0);
  g.cin = x.dim(1);
  g.len = x.dim(2);
  g.cout = w.dim(0);
  g.cin_g = w.dim(1);
  g.kernel = w.dim(2);
  g.groups = opt.groups;
  if (g.cin_g * g.groups != g.cin || g.cout % g.groups != 0) {
    throw std::invalid_argument("conv1d: channel/group mismatch, input " + shape_string(x.shape()) + " weight " +
                                shape_string(w.shape()));
  }
  g.cout_g = g.cout / g.groups;
  g.out_len = conv_out_len(g.len, g.kernel, opt.stride, opt.padding, opt.dilation);
  if (g.out_len <= 0) throw std::invalid_argument("conv1d: input length " + std::to_string(g.len) + " too short");
  if (bias.defined() && bias.numel() != g.cout) throw std::invalid_argument("conv1d: bias size mismatch");

  Tensor out(Shape{g.batch, g.cout, g.out_len});
  const int64_t rows = g.cin_g * g.kernel;
  std::vector<double> col(is_pointwise(g) ? 0 : static_cast<size_t>(rows * g.out_len));
  const double* xv = x.value().data();
  const double* wv = w.value().data();
  for (int64_t b = 0; b < g.batch; ++b) {
    for (int64_t gr = 0; gr < g.groups; ++gr) {
      const double* xg = xv + (b * g.cin + gr * g.cin_g) * g.len;
      const double* colp = xg;
      if (!is_pointwise(g)) {
        im2col_1d(xg, g, col.data());
        colp = col.data();
      }
      Eigen::Map<const RowMat> cm(colp, rows, g.out_len);
      Eigen::Map<const RowMat> wm(wv + gr * g.cout_g * rows, g.cout_g, rows);
      Eigen::Map<RowMat> om(out.data() + (b * g.cout + gr * g.cout_g) * g.out_len, g.cout_g, g.out_len);
      om.noalias() = wm * cm;
    }
    if (bias.defined()) {
      for (int64_t c = 0; c < g.cout; ++c) {
        double* orow = out.data() + (b * g.cout + c) * g.out_len;
        const double bv = bias.value()[c];
        for (int64_t t = 0; t < g.out_len; ++t) orow[t] += bv;
      }
    }
  }

  std::vector<Var> inputs{x, w};
  if (bias.defined()) inputs.push_back(bias);
  const bool has_bias = bias.defined();
  return make_result(std::move(out), inputs, [g, has_bias](Node& self) {
    Node& xn = *self.inputs[0];
    Node& wn = *self.inputs[1];
    Tensor* gx = xn.requires_grad ? &xn.ensure_grad() : nullptr;
    Tensor* gw = wn.requires_grad ? &wn.ensure_grad() : nullptr;
    Tensor* gb = (has_bias && self.inputs[2]->requires_grad) ? &self.inputs[2]->ensure_grad() : nullptr;
    const int64_t rows = g.cin_g * g.kernel;
    std::vector<double> col(static_cast<size_t>(rows * g.out_len));
    for (int64_t b = 0; b < g.batch; ++b) {
      for (int64_t gr = 0; gr < g.groups; ++gr) {
        Eigen::Map<const RowMat> dout(self.grad.data() + (b * g.cout + gr * g.cout_g) * g.out_len, g.cout_g,
                                      g.out_len);
        const double* xg = xn.value.data() + (b * g.cin + gr * g.cin_g) * g.len;
        if (gw) {
          const double* colp = xg;
          if (!is_pointwise(g)) {
            im2col_1d(xg, g, col.data());
            colp = col.data();
          }
          Eigen::Map<const RowMat> cm(colp, rows, g.out_len);
          Eigen::Map<RowMat> dw(gw->data() + gr * g.cout_g * rows, g.cout_g, rows);
          dw.noalias() += dout * cm.transpose();
        }
        if (gx) {
          Eigen::Map<const RowMat> wm(wn.value.data() + gr * g.cout_g * rows, g.cout_g, rows);
          double* dxg = gx->data() + (b * g.cin + gr * g.cin_g) * g.len;
          if (is_pointwise(g)) {
            Eigen::Map<RowMat> dxm(dxg, rows, g.out_len);
            dxm.noalias() += wm.transpose() * dout;
          } else {
            Eigen::Map<RowMat> dcol(col.data(), rows, g.out_len);
            dcol.noalias() = wm.transpose() * dout;
            col2im_1d(col.data(), g, dxg);
          }
        }
      }
      if (gb) {
        for (int64_t c = 0; c < g.cout; ++c) {
          const double* drow = self.grad.data() + (b * g.cout + c) * g.out_len;
          double acc = 0.0;
          for (int64_t t = 0; t < g.out_len; ++t) acc += drow[t];
          (*gb)[c] += acc;
        }
      }
    }
  });
}

Var conv_transpose1d(const Var& x, const Var& w, const Var& bias, int64_t stride, int64_t padding) {
  if (x.value().rank() != 3 || w.value().rank() != 3) {
    throw std::invalid_argument("conv_transpose1d expects rank-3 x and w");
  }
  const int64_t batch = x.dim(0), cin = x.dim(1), len = x.dim(2);
  const int64_t cout = w.dim(1), kernel = w.dim(2);
  if (w.dim(0) != cin) throw std::invalid_argument("conv_transpose1d: weight leading dim must equal input channels");
  const int64_t out_len = (len - 1) * stride - 2 * padding + kernel;
  if (out_len <= 0) throw std::invalid_argument("conv_transpose1d: empty output");
  const int64_t rows = cout * kernel;

  Tensor out(Shape{batch, cout, out_len});
  std::vector<double> col(static_cast<size_t>(rows * len));
  Eigen::Map<const RowMat> wm(w.value().data(), cin, rows);
  for (int64_t b = 0; b < batch; ++b) {
    Eigen::Map<const RowMat> xb(x.value().data() + b * cin * len, cin, len);
    Eigen::Map<RowMat> cm(col.data(), rows, len);
    cm.noalias() = wm.transpose() * xb;
    double* ob = out.data() + b * cout * out_len;
    for (int64_t co = 0; co < cout; ++co) {
      double* orow = ob + co * out_len;
      for (int64_t k = 0; k < kernel; ++k) {
        const double* crow = col.data() + (co * kernel + k) * len;
        for (int64_t l = 0; l < len; ++l) {
          const int64_t o = l * stride + k - padding;
          if (o >= 0 && o < out_len) orow[o] += crow[l];
        }
      }
      if (bias.defined()) {
        const double bv = bias.value()[co];
        for (int64_t t = 0; t < out_len; ++t) orow[t] += bv;
      }
    }
  }

  std::vector<Var> inputs{x, w};
  if (bias.defined()) inputs.push_back(bias);
  const bool has_bias = bias.defined();
  return make_result(std::move(out), inputs,
                     [=](Node& self) {
                       Node& xn = *self.inputs[0];
                       Node& wn = *self.inputs[1];
                       Tensor* gx = xn.requires_grad ? &xn.ensure_grad() : nullptr;
                       Tensor* gw = wn.requires_grad ? &wn.ensure_grad() : nullptr;
                       Tensor* gb = (has_bias && self.inputs[2]->requires_grad) ? &self.inputs[2]->ensure_grad()
                                                                                 : nullptr;
                       std::vector<double> dcol(static_cast<size_t>(rows * len));
                       Eigen::Map<const RowMat> wmat(wn.value.data(), cin, rows);
                       for (int64_t b = 0; b < batch; ++b) {
                         const double* db = self.grad.data() + b * cout * out_len;
                         for (int64_t co = 0; co < cout; ++co) {
                           const double* drow = db + co * out_len;
                           for (int64_t k = 0; k < kernel; ++k) {
                             double* crow = dcol.data() + (co * kernel + k) * len;
                             for (int64_t l = 0; l < len; ++l) {
                               const int64_t o = l * stride + k - padding;
                               crow[l] = (o >= 0 && o < out_len) ? drow[o] : 0.0;
                             }
                           }
                           if (gb) {
                             double acc = 0.0;
                             for (int64_t t = 0; t < out_len; ++t) acc += drow[t];
                             (*gb)[co] += acc;
                           }
                         }
                         Eigen::Map<const RowMat> dc(dcol.data(), rows, len);
                         if (gx) {
                           Eigen::Map<RowMat> dx(gx->data() + b * cin * len, cin, len);
                           dx.noalias() += wmat * dc;
                         }
                         if (gw) {
                           Eigen::Map<const RowMat> xb(xn.value.data() + b * cin * len, cin, len);
                           Eigen::Map<RowMat> dw(gw->data(), cin, rows);
                           dw.noalias() += xb * dc.transpose();
                         }
                       }
                     });
}

namespace {

struct Conv2dGeom {
  int64_t batch, cin, h, w, cout, kh, kw, oh, ow;
  Conv2dOptions opt;
};

void im2col_2d(const double* x, const Conv2dGeom& g, double* col) {
  const int64_t plane = g.oh * g.ow;
  for (int64_t ci = 0; ci < g.cin; ++ci) {
    const double* xp = x + ci * g.h * g.w;
    for (int64_t a = 0; a < g.kh; ++a) {
      for (int64_t c = 0; c < g.kw; ++c) {
        double* cr = col + ((ci * g.kh + a) * g.kw + c) * plane;
        for (int64_t i = 0; i < g.oh; ++i) {
          const int64_t yi = i * g.opt.stride_h + a * g.opt.dil_h - g.opt.pad_h;
          double* dst = cr + i * g.ow;
          if (yi < 0 || yi >= g.h) {
            std::fill(dst, dst + g.ow, 0.0);
            continue;
          }
          const double* src = xp + yi * g.w;
          for (int64_t j = 0; j < g.ow; ++j) {
            const int64_t xj = j * g.opt.stride_w + c * g.opt.dil_w - g.opt.pad_w;
            dst[j] = (xj >= 0 && xj < g.w) ? src[xj] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_2d(const double* col, const Conv2dGeom& g, double* dx) {
  const int64_t plane = g.oh * g.ow;
  for (int64_t ci = 0; ci < g.cin; ++ci) {
    double* xp = dx + ci * g.h * g.w;
    for (int64_t a = 0; a < g.kh; ++a) {
      for (int64_t c = 0; c < g.kw; ++c) {
        const double* cr = col + ((ci * g.kh + a) * g.kw + c) * plane;
        for (int64_t i = 0; i < g.oh; ++i) {
          const int64_t yi = i * g.opt.stride_h + a * g.opt.dil_h - g.opt.pad_h;
          if (yi < 0 || yi >= g.h) continue;
          double* dst = xp + yi * g.w;
          const double* src = cr + i * g.ow;
          for (int64_t j = 0; j < g.ow; ++j) {
            const int64_t xj = j * g.opt.stride_w + c * g.opt.dil_w - g.opt.pad_w;
            if (xj >= 0 && xj < g.w) dst[xj] += src[j];
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& bias, const Conv2dOptions& opt) {
  if (x.value().rank() != 4 || w.value().rank() != 4) throw std::invalid_argument("conv2d expects rank-4 x and w");
  Conv2dGeom g{};
  g.opt = opt;
  g.batch = x.dim(0);
  g.cin = x.dim(1);
  g.h = x.dim(2);
  g.w = x.dim(3);
  g.cout = w.dim(0);
  g.kh = w.dim(2);
  g.kw = w.dim(3);
  if (w.dim(1) != g.cin) {
    throw std::invalid_argument("conv2d: channel mismatch, input " + shape_string(x.shape()) + " weight " +
                                shape_string(w.shape()));
  }
  g.oh = conv_out_len(g.h, g.kh, opt.stride_h, opt.pad_h, opt.dil_h);
  g.ow = conv_out_len(g.w, g.kw, opt.stride_w, opt.pad_w, opt.dil_w);
  if (g.oh <= 0 || g.ow <= 0) throw std::invalid_argument("conv2d: input " + shape_string(x.shape()) + " too small");
  if (bias.defined() && bias.numel() != g.cout) throw std::invalid_argument("conv2d: bias size mismatch");

  const int64_t rows = g.cin * g.kh * g.kw;
  const int64_t plane = g.oh * g.ow;
  Tensor out(Shape{g.batch, g.cout, g.oh, g.ow});
  std::vector<double> col(static_cast<size_t>(rows * plane));
  Eigen::Map<const RowMat> wm(w.value().data(), g.cout, rows);
  for (int64_t b = 0; b < g.batch; ++b) {
    im2col_2d(x.value().data() + b * g.cin * g.h * g.w, g, col.data());
    Eigen::Map<const RowMat> cm(col.data(), rows, plane);
    Eigen::Map<RowMat> om(out.data() + b * g.cout * plane, g.cout, plane);
    om.noalias() = wm * cm;
    if (bias.defined()) {
      for (int64_t c = 0; c < g.cout; ++c) {
        const double bv = bias.value()[c];
        double* orow = out.data() + (b * g.cout + c) * plane;
        for (int64_t t = 0; t < plane; ++t) orow[t] += bv;
      }
    }
  }

  std::vector<Var> inputs{x, w};
  if (bias.defined()) inputs.push_back(bias);
  const bool has_bias = bias.defined();
  return make_result(std::move(out), inputs, [g, has_bias, rows, plane](Node& self) {
    Node& xn = *self.inputs[0];
    Node& wn = *self.inputs[1];
    Tensor* gx = xn.requires_grad ? &xn.ensure_grad() : nullptr;
    Tensor* gw = wn.requires_grad ? &wn.ensure_grad() : nullptr;
    Tensor* gb = (has_bias && self.inputs[2]->requires_grad) ? &self.inputs[2]->ensure_grad() : nullptr;
    std::vector<double> col(static_cast<size_t>(rows * plane));
    Eigen::Map<const RowMat> wm(wn.value.data(), g.cout, rows);
    for (int64_t b = 0; b < g.batch; ++b) {
      Eigen::Map<const RowMat> dout(self.grad.data() + b * g.cout * plane, g.cout, plane);
      if (gw) {
        im2col_2d(xn.value.data() + b * g.cin * g.h * g.w, g, col.data());
        Eigen::Map<const RowMat> cm(col.data(), rows, plane);
        Eigen::Map<RowMat> dw(gw->data(), g.cout, rows);
        dw.noalias() += dout * cm.transpose();
      }
      if (gx) {
        Eigen::Map<RowMat> dcol(col.data(), rows, plane);
        dcol.noalias() = wm.transpose() * dout;
        col2im_2d(col.data(), g, gx->data() + b * g.cin * g.h * g.w);
      }
      if (gb) {
        for (int64_t c = 0; c < g.cout; ++c) {
          double acc = 0.0;
          for (int64_t t = 0; t < plane; ++t) acc += dout(c, t);
          (*gb)[c] += acc;
        }
      }
    }
  });
}

}  // namespace radgan::ag
