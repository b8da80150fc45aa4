#pragma once

#include <random>
#include <string>
#include <vector>

#include "radgan/autograd.hpp"
#include "radgan/ops.hpp"

namespace radgan::nn {

enum class Norm { none, weight, spectral };

enum class Init {
  normal,   // N(0, std)
  uniform,  // U(-1/sqrt(fan_in), 1/sqrt(fan_in))
};

struct InitSpec {
  Init kind = Init::uniform;
  double stddev = 0.01;
};

struct NamedParam {
  std::string name;
  Var* var;
};

struct NamedBuffer {
  std::string name;
  Tensor* tensor;
};

// Weight storage shared by the convolution layers. Holds the raw weight (or
// its weight-norm direction), the optional gain, the bias and the spectral
// norm power-iteration state.
class ConvWeight {
 public:
  ConvWeight() = default;
  // bias_size 0 omits the bias.
  ConvWeight(Shape shape, int64_t fan_in, int64_t bias_size, Norm norm, InitSpec init, std::mt19937_64& rng);

  // Effective weight. With spectral norm and recording enabled, one power
  // iteration step refreshes the stored left singular vector first.
  Var effective();
  const Var& bias() const { return bias_; }
  Norm norm() const { return norm_; }

  // Largest-singular-value estimate used for spectral normalization.
  double sigma_estimate() const;
  const Var& raw() const { return weight_; }
  Var& raw_mut() { return weight_; }

  void collect(const std::string& prefix, std::vector<NamedParam>& out);
  void collect_buffers(const std::string& prefix, std::vector<NamedBuffer>& out);
  int64_t parameter_count() const;

 private:
  Tensor right_vector() const;
  void power_iteration(int steps);

  Var weight_;
  Var gain_;
  Var bias_;
  Tensor u_;
  Norm norm_ = Norm::none;
};

class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(int64_t cin, int64_t cout, int64_t kernel, ag::Conv1dOptions opt, Norm norm, InitSpec init,
         std::mt19937_64& rng);

  Var forward(const Var& x);

  ConvWeight& weight() { return weight_; }
  void collect(const std::string& prefix, std::vector<NamedParam>& out) { weight_.collect(prefix, out); }
  void collect_buffers(const std::string& prefix, std::vector<NamedBuffer>& out) {
    weight_.collect_buffers(prefix, out);
  }
  int64_t parameter_count() const { return weight_.parameter_count(); }

 private:
  ConvWeight weight_;
  ag::Conv1dOptions opt_;
};

class ConvTranspose1d {
 public:
  ConvTranspose1d() = default;
  ConvTranspose1d(int64_t cin, int64_t cout, int64_t kernel, int64_t stride, int64_t padding, Norm norm,
                  InitSpec init, std::mt19937_64& rng);

  Var forward(const Var& x);

  void collect(const std::string& prefix, std::vector<NamedParam>& out) { weight_.collect(prefix, out); }
  int64_t parameter_count() const { return weight_.parameter_count(); }

 private:
  ConvWeight weight_;
  int64_t stride_ = 1;
  int64_t padding_ = 0;
};

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(int64_t cin, int64_t cout, int64_t kh, int64_t kw, ag::Conv2dOptions opt, Norm norm, InitSpec init,
         std::mt19937_64& rng);

  Var forward(const Var& x);

  ConvWeight& weight() { return weight_; }
  void collect(const std::string& prefix, std::vector<NamedParam>& out) { weight_.collect(prefix, out); }
  void collect_buffers(const std::string& prefix, std::vector<NamedBuffer>& out) {
    weight_.collect_buffers(prefix, out);
  }
  int64_t parameter_count() const { return weight_.parameter_count(); }

 private:
  ConvWeight weight_;
  ag::Conv2dOptions opt_;
};

int64_t count_parameters(const std::vector<NamedParam>& params);
void zero_grads(const std::vector<NamedParam>& params);

}  // namespace radgan::nn
