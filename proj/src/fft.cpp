#include "radgan/fft.hpp"

#include <cstring>
#include <map>
#include <stdexcept>

#include <fftw3.h>

namespace radgan {

struct RealFft::Impl {
  double* real = nullptr;
  fftw_complex* spec = nullptr;
  fftw_plan fwd = nullptr;
  fftw_plan inv = nullptr;
};

RealFft& RealFft::get(int n) {
  thread_local std::map<int, std::unique_ptr<RealFft>> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, std::unique_ptr<RealFft>(new RealFft(n))).first;
  return *it->second;
}

RealFft::RealFft(int n) : n_(n), impl_(std::make_unique<Impl>()) {
  if (n < 2 || n % 2 != 0) throw std::invalid_argument("RealFft size must be even and >= 2");
  impl_->real = fftw_alloc_real(static_cast<size_t>(n));
  impl_->spec = fftw_alloc_complex(static_cast<size_t>(bins()));
  impl_->fwd = fftw_plan_dft_r2c_1d(n, impl_->real, impl_->spec, FFTW_ESTIMATE);
  impl_->inv = fftw_plan_dft_c2r_1d(n, impl_->spec, impl_->real, FFTW_ESTIMATE);
  if (!impl_->fwd || !impl_->inv) throw std::runtime_error("FFTW plan creation failed");
}

RealFft::~RealFft() {
  if (impl_->fwd) fftw_destroy_plan(impl_->fwd);
  if (impl_->inv) fftw_destroy_plan(impl_->inv);
  fftw_free(impl_->real);
  fftw_free(impl_->spec);
}

void RealFft::forward(const double* in, std::complex<double>* out) {
  std::memcpy(impl_->real, in, sizeof(double) * static_cast<size_t>(n_));
  fftw_execute(impl_->fwd);
  std::memcpy(static_cast<void*>(out), impl_->spec, sizeof(fftw_complex) * static_cast<size_t>(bins()));
}

void RealFft::inverse(const std::complex<double>* in, double* out) {
  // c2r destroys its input, so it always runs on the internal copy.
  std::memcpy(impl_->spec, in, sizeof(fftw_complex) * static_cast<size_t>(bins()));
  fftw_execute(impl_->inv);
  std::memcpy(out, impl_->real, sizeof(double) * static_cast<size_t>(n_));
}

}  // namespace radgan
