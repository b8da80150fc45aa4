#include "radgan/nn.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Core>

namespace radgan::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Construction-time power iteration runs until the sigma estimate settles.
constexpr int kSpectralWarmupMax = 2000;
constexpr double kSpectralWarmupTol = 1e-9;

void normalize(Eigen::Ref<Eigen::VectorXd> v) {
  const double n = v.norm();
  v /= std::max(n, 1e-12);
}

}  // namespace

ConvWeight::ConvWeight(Shape shape, int64_t fan_in, int64_t bias_size, Norm norm, InitSpec init,
                       std::mt19937_64& rng)
    : norm_(norm) {
  const int64_t rows = shape.front();
  Tensor w = init.kind == Init::normal ? Tensor::randn(shape, init.stddev, rng)
                                       : Tensor::uniform(shape, 1.0 / std::sqrt(static_cast<double>(fan_in)), rng);
  if (norm_ == Norm::weight) {
    // Gain starts at the row norm so the effective weight equals the draw.
    const int64_t inner = w.numel() / rows;
    Tensor g(Shape{rows});
    for (int64_t r = 0; r < rows; ++r) {
      double ss = 0.0;
      for (int64_t j = 0; j < inner; ++j) ss += w[r * inner + j] * w[r * inner + j];
      g[r] = std::sqrt(ss);
    }
    gain_ = Var::parameter(std::move(g));
  }
  weight_ = Var::parameter(std::move(w));
  if (bias_size > 0) bias_ = Var::parameter(Tensor(Shape{bias_size}, 0.0));
  if (norm_ == Norm::spectral) {
    u_ = Tensor::randn(Shape{rows}, 1.0, rng);
    Eigen::Map<Eigen::VectorXd> u(u_.data(), rows);
    normalize(u);
    double sigma = 0.0;
    for (int i = 0; i < kSpectralWarmupMax; i += 10) {
      power_iteration(10);
      const double next = sigma_estimate();
      if (std::fabs(next - sigma) <= kSpectralWarmupTol * next) break;
      sigma = next;
    }
  }
}

Tensor ConvWeight::right_vector() const {
  const int64_t rows = weight_.dim(0);
  const int64_t inner = weight_.numel() / rows;
  Eigen::Map<const RowMat> w(weight_.value().data(), rows, inner);
  Eigen::Map<const Eigen::VectorXd> u(u_.data(), rows);
  Tensor v(Shape{inner});
  Eigen::Map<Eigen::VectorXd> vm(v.data(), inner);
  vm.noalias() = w.transpose() * u;
  normalize(vm);
  return v;
}

void ConvWeight::power_iteration(int steps) {
  const int64_t rows = weight_.dim(0);
  const int64_t inner = weight_.numel() / rows;
  Eigen::Map<const RowMat> w(weight_.value().data(), rows, inner);
  Eigen::Map<Eigen::VectorXd> u(u_.data(), rows);
  Eigen::VectorXd v(inner);
  for (int i = 0; i < steps; ++i) {
    v.noalias() = w.transpose() * u;
    normalize(v);
    u.noalias() = w * v;
    normalize(u);
  }
}

double ConvWeight::sigma_estimate() const {
  if (norm_ != Norm::spectral) throw std::logic_error("sigma_estimate on a layer without spectral norm");
  const int64_t rows = weight_.dim(0);
  const int64_t inner = weight_.numel() / rows;
  const Tensor v = right_vector();
  Eigen::Map<const RowMat> w(weight_.value().data(), rows, inner);
  Eigen::Map<const Eigen::VectorXd> u(u_.data(), rows), vm(v.data(), inner);
  return u.dot(w * vm);
}

Var ConvWeight::effective() {
  switch (norm_) {
    case Norm::none:
      return weight_;
    case Norm::weight:
      return ag::weight_norm(weight_, gain_);
    case Norm::spectral:
      if (grad_enabled()) power_iteration(1);
      return ag::spectral_normalize(weight_, u_, right_vector());
  }
  return weight_;
}

void ConvWeight::collect(const std::string& prefix, std::vector<NamedParam>& out) {
  out.push_back({prefix + (norm_ == Norm::weight ? ".weight_v" : ".weight"), &weight_});
  if (norm_ == Norm::weight) out.push_back({prefix + ".weight_g", &gain_});
  if (bias_.defined()) out.push_back({prefix + ".bias", &bias_});
}

void ConvWeight::collect_buffers(const std::string& prefix, std::vector<NamedBuffer>& out) {
  if (norm_ == Norm::spectral) out.push_back({prefix + ".weight_u", &u_});
}

int64_t ConvWeight::parameter_count() const {
  int64_t n = weight_.numel();
  if (gain_.defined()) n += gain_.numel();
  if (bias_.defined()) n += bias_.numel();
  return n;
}

Conv1d::Conv1d(int64_t cin, int64_t cout, int64_t kernel, ag::Conv1dOptions opt, Norm norm, InitSpec init,
               std::mt19937_64& rng)
    : weight_(Shape{cout, cin / opt.groups, kernel}, cin / opt.groups * kernel, cout, norm, init, rng), opt_(opt) {
  if (cin % opt.groups != 0 || cout % opt.groups != 0) throw std::invalid_argument("Conv1d: groups must divide channels");
}

Var Conv1d::forward(const Var& x) { return ag::conv1d(x, weight_.effective(), weight_.bias(), opt_); }

ConvTranspose1d::ConvTranspose1d(int64_t cin, int64_t cout, int64_t kernel, int64_t stride, int64_t padding,
                                 Norm norm, InitSpec init, std::mt19937_64& rng)
    : stride_(stride), padding_(padding) {
  if (norm == Norm::spectral) throw std::invalid_argument("ConvTranspose1d does not support spectral norm");
  weight_ = ConvWeight(Shape{cin, cout, kernel}, cout * kernel, cout, norm, init, rng);
}

Var ConvTranspose1d::forward(const Var& x) {
  return ag::conv_transpose1d(x, weight_.effective(), weight_.bias(), stride_, padding_);
}

Conv2d::Conv2d(int64_t cin, int64_t cout, int64_t kh, int64_t kw, ag::Conv2dOptions opt, Norm norm, InitSpec init,
               std::mt19937_64& rng)
    : weight_(Shape{cout, cin, kh, kw}, cin * kh * kw, cout, norm, init, rng), opt_(opt) {}

Var Conv2d::forward(const Var& x) { return ag::conv2d(x, weight_.effective(), weight_.bias(), opt_); }

int64_t count_parameters(const std::vector<NamedParam>& params) {
  int64_t n = 0;
  for (const auto& p : params) n += p.var->numel();
  return n;
}

void zero_grads(const std::vector<NamedParam>& params) {
  for (const auto& p : params) p.var->zero_grad();
}

}  // namespace radgan::nn
