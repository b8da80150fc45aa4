#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "radgan/autograd.hpp"
#include "radgan/tensor.hpp"

namespace radgan {

inline constexpr int kSampleRate = 8000;

// Mono sample buffer. Nominal amplitude range is [-1, 1].
struct WaveformSegment {
  std::vector<double> samples;
  int sample_rate = kSampleRate;

  int64_t size() const noexcept { return static_cast<int64_t>(samples.size()); }
  double rms() const;
  // Throws on a non-positive rate or any non-finite sample.
  void validate() const;
};

enum class WindowKind { hann };

struct SpectrogramConfig {
  int n_fft = 1024;
  int hop = 128;
  int win_length = 512;
  WindowKind window = WindowKind::hann;

  int bins() const noexcept { return n_fft / 2 + 1; }
  // Centered framing: floor(len / hop) + 1.
  int64_t frames(int64_t length) const noexcept { return length / hop + 1; }
  void validate() const;

  bool operator==(const SpectrogramConfig&) const = default;
};

struct MelConfig {
  int n_mels = 80;
  double f_min = 0.0;
  double f_max = 1000.0;
  double log_floor = 1e-5;

  // 0-1 kHz generator conditioning.
  static MelConfig conditioning() { return {}; }
  // Full-band 0-4 kHz transform used by the losses and the discriminators.
  static MelConfig full_band() { return {80, 0.0, 4000.0, 1e-5}; }

  void validate(int sample_rate) const;

  bool operator==(const MelConfig&) const = default;
};

// Log-compressed mel energies, laid out [n_mels x T].
struct MelSpectrogram {
  Tensor values;
  MelConfig config;
  int hop = 128;

  int n_mels() const { return static_cast<int>(values.dim(0)); }
  int64_t frames() const { return values.dim(1); }
  double at(int m, int64_t t) const { return values[m * frames() + t]; }
};

// One-sided complex STFT laid out [bins x frames].
struct ComplexSpectrogram {
  int64_t bins = 0;
  int64_t frames = 0;
  std::vector<std::complex<double>> data;

  std::complex<double>& at(int64_t k, int64_t t) { return data[static_cast<size_t>(k * frames + t)]; }
  const std::complex<double>& at(int64_t k, int64_t t) const { return data[static_cast<size_t>(k * frames + t)]; }
};

// Periodic Hann window of win_length, zero-padded to n_fft and centered.
std::vector<double> analysis_window(const SpectrogramConfig& cfg);

ComplexSpectrogram stft(const WaveformSegment& w, const SpectrogramConfig& cfg);

// Inverse of stft() by weighted overlap-add; returns exactly `length` samples.
WaveformSegment istft(const ComplexSpectrogram& spec, const SpectrogramConfig& cfg, int64_t length,
                      int sample_rate = kSampleRate);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Slaney-style triangular filters with area normalization, [n_mels x bins].
Tensor mel_filterbank(const MelConfig& mel, int n_fft, int sample_rate);
// Center frequency of each mel filter in Hz.
std::vector<double> mel_center_frequencies(const MelConfig& mel);

MelSpectrogram mel_spectrogram(const WaveformSegment& w, const SpectrogramConfig& cfg, const MelConfig& mel);

// Zero-phase 8th-order Chebyshev type II low-pass. The stop band starts at
// 1.25 * cutoff_hz with 40 dB attenuation per pass (80 dB after the
// forward-backward sweep).
WaveformSegment bandlimit(const WaveformSegment& w, double cutoff_hz);

enum class ShapeMode { clip_or_pad, random_crop };

// Returns exactly target_len samples. random_crop on a short input falls back
// to clip_or_pad.
WaveformSegment shape_segment(const WaveformSegment& w, int64_t target_len, ShapeMode mode, uint64_t seed);
// Start sample random_crop uses for this seed; 0 when no crop is needed.
int64_t crop_offset(int64_t length, int64_t target_len, uint64_t seed);

inline constexpr int kMfccCoefficients = 13;

// 13 orthonormal DCT-II coefficients of the 80-bin full-band log-mel, [13 x T].
Tensor mfcc(const WaveformSegment& w);

// Magnitude convention for mel features: sqrt(power + kMagnitudeEps).
inline constexpr double kMagnitudeEps = 1e-9;

namespace ag {

// |STFT|^2 of a batch of signals [B, L] -> [B, bins, frames].
Var stft_power(const Var& x, const SpectrogramConfig& cfg);

}  // namespace ag

// Differentiable log-mel transform over a batch [B, L] -> [B, n_mels, T].
class MelTransform {
 public:
  MelTransform(SpectrogramConfig stft, MelConfig mel, int sample_rate = kSampleRate);

  Var operator()(const Var& batch) const;
  MelSpectrogram operator()(const WaveformSegment& w) const;

  const SpectrogramConfig& stft_config() const noexcept { return stft_; }
  const MelConfig& mel_config() const noexcept { return mel_; }
  const Tensor& filterbank() const noexcept { return filterbank_; }

 private:
  SpectrogramConfig stft_;
  MelConfig mel_;
  int sample_rate_;
  Tensor filterbank_;
};

// Stacks equal-length segments into a [B, L] tensor.
Tensor stack_waveforms(const std::vector<WaveformSegment>& batch);

}  // namespace radgan
