#pragma once

#include <complex>
#include <memory>

namespace radgan {

// Real-input FFT of a fixed even size backed by FFTW. Plans are created once
// per size and cached per thread.
class RealFft {
 public:
  static RealFft& get(int n);

  int size() const noexcept { return n_; }
  int bins() const noexcept { return n_ / 2 + 1; }

  // out has bins() entries.
  void forward(const double* in, std::complex<double>* out);
  // Unnormalized Hermitian inverse: out[t] = sum_k X_k e^{+2 pi i k t / n}.
  void inverse(const std::complex<double>* in, double* out);

  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

 private:
  explicit RealFft(int n);
  struct Impl;
  int n_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace radgan
