#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "radgan/audio_features.hpp"
#include "radgan/autograd.hpp"

namespace radgan::testing {

// Norm-wise relative error between the tape gradient of a scalar function
// and its central finite difference, taken over every element of input `which`.
inline double gradcheck(const std::function<Var(const std::vector<Var>&)>& f, const std::vector<Tensor>& inputs,
                        size_t which, double h = 1e-6) {
  std::vector<Var> vars;
  for (size_t i = 0; i < inputs.size(); ++i) vars.emplace_back(inputs[i], i == which);
  Var out = f(vars);
  backward(out);
  const Tensor analytic = vars[which].grad();

  double num = 0.0, den = 0.0;
  for (int64_t j = 0; j < inputs[which].numel(); ++j) {
    auto eval = [&](double delta) {
      NoGradGuard guard;
      std::vector<Var> vs;
      for (size_t i = 0; i < inputs.size(); ++i) {
        Tensor t = inputs[i];
        if (i == which) t[j] += delta;
        vs.emplace_back(std::move(t), false);
      }
      return f(vs).item();
    };
    const double fd = (eval(h) - eval(-h)) / (2.0 * h);
    num += (fd - analytic[j]) * (fd - analytic[j]);
    den += fd * fd;
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

inline WaveformSegment tone(double hz, int64_t n, double amplitude = 1.0, int rate = kSampleRate) {
  WaveformSegment w;
  w.sample_rate = rate;
  w.samples.resize(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) w.samples[static_cast<size_t>(i)] = amplitude * std::sin(2.0 * M_PI * hz * i / rate);
  return w;
}

inline WaveformSegment white_noise(int64_t n, uint64_t seed, double stddev = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, stddev);
  WaveformSegment w;
  w.samples.resize(static_cast<size_t>(n));
  for (double& v : w.samples) v = dist(rng);
  return w;
}

inline double rms_db_ratio(const WaveformSegment& out, const WaveformSegment& in) {
  return 20.0 * std::log10(out.rms() / in.rms());
}

}  // namespace radgan::testing
