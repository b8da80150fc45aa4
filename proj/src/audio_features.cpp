#include "radgan/audio_features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include "radgan/fft.hpp"
#include "radgan/ops.hpp"

namespace radgan {

namespace {

constexpr double kPi = std::numbers::pi;

int64_t reflect_index(int64_t i, int64_t n) {
  if (n == 1) return 0;
  const int64_t period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

std::vector<double> reflect_pad(const double* x, int64_t n, int64_t pad) {
  std::vector<double> out(static_cast<size_t>(n + 2 * pad));
  for (int64_t j = 0; j < n + 2 * pad; ++j) out[static_cast<size_t>(j)] = x[reflect_index(j - pad, n)];
  return out;
}

}  // namespace

double WaveformSegment::rms() const {
  if (samples.empty()) return 0.0;
  double ss = 0.0;
  for (double v : samples) ss += v * v;
  return std::sqrt(ss / static_cast<double>(samples.size()));
}

void WaveformSegment::validate() const {
  if (sample_rate <= 0) throw std::invalid_argument("sample rate must be positive");
  for (double v : samples)
    if (!std::isfinite(v)) throw std::invalid_argument("waveform contains non-finite samples");
}

void SpectrogramConfig::validate() const {
  if (n_fft <= 0 || hop <= 0 || win_length <= 0) throw std::invalid_argument("STFT sizes must be positive");
  if (n_fft % 2 != 0) throw std::invalid_argument("n_fft must be even");
  if (win_length > n_fft) throw std::invalid_argument("win_length must not exceed n_fft");
  if (hop > win_length) throw std::invalid_argument("hop must not exceed win_length");
}

void MelConfig::validate(int sample_rate) const {
  if (n_mels < 1) throw std::invalid_argument("n_mels must be at least 1");
  if (!(log_floor > 0.0)) throw std::invalid_argument("log_floor must be positive");
  if (f_max > sample_rate / 2.0) throw std::invalid_argument("mel band exceeds Nyquist");
  if (f_min < 0.0 || f_min >= f_max) throw std::invalid_argument("mel band must satisfy 0 <= f_min < f_max");
}

std::vector<double> analysis_window(const SpectrogramConfig& cfg) {
  std::vector<double> w(static_cast<size_t>(cfg.n_fft), 0.0);
  const int offset = (cfg.n_fft - cfg.win_length) / 2;
  for (int n = 0; n < cfg.win_length; ++n)
    w[static_cast<size_t>(offset + n)] = 0.5 - 0.5 * std::cos(2.0 * kPi * n / cfg.win_length);
  return w;
}

ComplexSpectrogram stft(const WaveformSegment& w, const SpectrogramConfig& cfg) {
  cfg.validate();
  if (w.samples.empty()) throw std::invalid_argument("empty input");
  w.validate();
  const int64_t pad = cfg.n_fft / 2;
  const auto padded = reflect_pad(w.samples.data(), w.size(), pad);
  const auto window = analysis_window(cfg);
  ComplexSpectrogram spec;
  spec.bins = cfg.bins();
  spec.frames = cfg.frames(w.size());
  spec.data.resize(static_cast<size_t>(spec.bins * spec.frames));
  RealFft& fft = RealFft::get(cfg.n_fft);
  std::vector<double> frame(static_cast<size_t>(cfg.n_fft));
  std::vector<std::complex<double>> out(static_cast<size_t>(spec.bins));
  for (int64_t t = 0; t < spec.frames; ++t) {
    for (int n = 0; n < cfg.n_fft; ++n)
      frame[static_cast<size_t>(n)] = padded[static_cast<size_t>(t * cfg.hop + n)] * window[static_cast<size_t>(n)];
    fft.forward(frame.data(), out.data());
    for (int64_t k = 0; k < spec.bins; ++k) spec.at(k, t) = out[static_cast<size_t>(k)];
  }
  return spec;
}

WaveformSegment istft(const ComplexSpectrogram& spec, const SpectrogramConfig& cfg, int64_t length,
                      int sample_rate) {
  cfg.validate();
  if (spec.bins != cfg.bins()) throw std::invalid_argument("istft: bin count does not match n_fft");
  const int64_t pad = cfg.n_fft / 2;
  const auto window = analysis_window(cfg);
  const int64_t total = (spec.frames - 1) * cfg.hop + cfg.n_fft;
  std::vector<double> acc(static_cast<size_t>(total), 0.0), env(static_cast<size_t>(total), 0.0);
  RealFft& fft = RealFft::get(cfg.n_fft);
  std::vector<std::complex<double>> col(static_cast<size_t>(spec.bins));
  std::vector<double> frame(static_cast<size_t>(cfg.n_fft));
  for (int64_t t = 0; t < spec.frames; ++t) {
    for (int64_t k = 0; k < spec.bins; ++k) col[static_cast<size_t>(k)] = spec.at(k, t);
    fft.inverse(col.data(), frame.data());
    for (int n = 0; n < cfg.n_fft; ++n) {
      const double wn = window[static_cast<size_t>(n)];
      acc[static_cast<size_t>(t * cfg.hop + n)] += frame[static_cast<size_t>(n)] / cfg.n_fft * wn;
      env[static_cast<size_t>(t * cfg.hop + n)] += wn * wn;
    }
  }
  WaveformSegment out;
  out.sample_rate = sample_rate;
  out.samples.assign(static_cast<size_t>(length), 0.0);
  for (int64_t i = 0; i < length; ++i) {
    const int64_t j = i + pad;
    if (j < total && env[static_cast<size_t>(j)] > 1e-11) out.samples[static_cast<size_t>(i)] = acc[static_cast<size_t>(j)] / env[static_cast<size_t>(j)];
  }
  return out;
}

// Slaney mel scale: linear below 1 kHz, logarithmic above.
double hz_to_mel(double hz) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  const double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  if (hz < min_log_hz) return hz / f_sp;
  return min_log_mel + std::log(hz / min_log_hz) / logstep;
}

double mel_to_hz(double mel) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  const double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  if (mel < min_log_mel) return mel * f_sp;
  return min_log_hz * std::exp(logstep * (mel - min_log_mel));
}

namespace {

std::vector<double> mel_edges(const MelConfig& mel) {
  const double lo = hz_to_mel(mel.f_min), hi = hz_to_mel(mel.f_max);
  std::vector<double> hz(static_cast<size_t>(mel.n_mels + 2));
  for (int i = 0; i < mel.n_mels + 2; ++i) hz[static_cast<size_t>(i)] = mel_to_hz(lo + (hi - lo) * i / (mel.n_mels + 1));
  return hz;
}

}  // namespace

std::vector<double> mel_center_frequencies(const MelConfig& mel) {
  const auto edges = mel_edges(mel);
  return {edges.begin() + 1, edges.end() - 1};
}

Tensor mel_filterbank(const MelConfig& mel, int n_fft, int sample_rate) {
  mel.validate(sample_rate);
  const int bins = n_fft / 2 + 1;
  const auto edges = mel_edges(mel);
  Tensor fb(Shape{mel.n_mels, bins});
  for (int m = 0; m < mel.n_mels; ++m) {
    const double left = edges[static_cast<size_t>(m)];
    const double center = edges[static_cast<size_t>(m + 1)];
    const double right = edges[static_cast<size_t>(m + 2)];
    const double enorm = 2.0 / (right - left);
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / n_fft;
      const double lower = (f - left) / (center - left);
      const double upper = (right - f) / (right - center);
      fb[m * bins + k] = std::max(0.0, std::min(lower, upper)) * enorm;
    }
  }
  return fb;
}

namespace ag {

Var stft_power(const Var& x, const SpectrogramConfig& cfg) {
  cfg.validate();
  if (x.value().rank() != 2) throw std::invalid_argument("stft_power expects [B, L]");
  const int64_t batch = x.dim(0), len = x.dim(1);
  if (len == 0) throw std::invalid_argument("empty input");
  const int64_t pad = cfg.n_fft / 2;
  const int64_t frames = cfg.frames(len);
  const int64_t bins = cfg.bins();
  const int n = cfg.n_fft;
  const auto window = analysis_window(cfg);
  RealFft& fft = RealFft::get(n);

  auto spec = std::make_shared<std::vector<std::complex<double>>>(static_cast<size_t>(batch * frames * bins));
  Tensor out(Shape{batch, bins, frames});
  std::vector<double> frame(static_cast<size_t>(n));
  for (int64_t b = 0; b < batch; ++b) {
    const auto padded = reflect_pad(x.value().data() + b * len, len, pad);
    for (int64_t t = 0; t < frames; ++t) {
      for (int i = 0; i < n; ++i)
        frame[static_cast<size_t>(i)] = padded[static_cast<size_t>(t * cfg.hop + i)] * window[static_cast<size_t>(i)];
      std::complex<double>* X = spec->data() + (b * frames + t) * bins;
      fft.forward(frame.data(), X);
      for (int64_t k = 0; k < bins; ++k) out[(b * bins + k) * frames + t] = std::norm(X[k]);
    }
  }

  return make_result(std::move(out), {x}, [=](Node& self) {
    Node& xn = *self.inputs[0];
    if (!xn.requires_grad) return;
    Tensor& gx = xn.ensure_grad();
    RealFft& f = RealFft::get(n);
    std::vector<std::complex<double>> y(static_cast<size_t>(bins));
    std::vector<double> gframe(static_cast<size_t>(n));
    std::vector<double> gpad(static_cast<size_t>(len + 2 * pad));
    for (int64_t b = 0; b < batch; ++b) {
      std::fill(gpad.begin(), gpad.end(), 0.0);
      for (int64_t t = 0; t < frames; ++t) {
        const std::complex<double>* X = spec->data() + (b * frames + t) * bins;
        // d|X_k|^2 adjoint of the one-sided real DFT, folded for a Hermitian c2r.
        for (int64_t k = 0; k < bins; ++k) {
          const double g = self.grad[(b * bins + k) * frames + t];
          y[static_cast<size_t>(k)] = (k == 0 || k == bins - 1) ? std::complex<double>(2.0 * g * X[k].real(), 0.0)
                                                                 : g * X[k];
        }
        f.inverse(y.data(), gframe.data());
        for (int i = 0; i < n; ++i)
          gpad[static_cast<size_t>(t * cfg.hop + i)] += gframe[static_cast<size_t>(i)] * window[static_cast<size_t>(i)];
      }
      for (int64_t j = 0; j < len + 2 * pad; ++j) gx[b * len + reflect_index(j - pad, len)] += gpad[static_cast<size_t>(j)];
    }
  });
}

}  // namespace ag

MelTransform::MelTransform(SpectrogramConfig stft, MelConfig mel, int sample_rate)
    : stft_(stft), mel_(mel), sample_rate_(sample_rate) {
  stft_.validate();
  mel_.validate(sample_rate_);
  filterbank_ = mel_filterbank(mel_, stft_.n_fft, sample_rate_);
}

Var MelTransform::operator()(const Var& batch) const {
  Var power = ag::stft_power(batch, stft_);
  Var magnitude = ag::sqrt(ag::add_scalar(power, kMagnitudeEps));
  Var mel = ag::left_matmul(filterbank_, magnitude);
  return ag::log(ag::clamp_min(mel, mel_.log_floor));
}

MelSpectrogram MelTransform::operator()(const WaveformSegment& w) const {
  if (w.samples.empty()) throw std::invalid_argument("empty input");
  if (w.sample_rate != sample_rate_) throw std::invalid_argument("waveform sample rate does not match transform");
  w.validate();
  NoGradGuard guard;
  Var batch(Tensor(Shape{1, w.size()}, w.samples));
  Var out = (*this)(batch);
  MelSpectrogram m;
  m.values = out.value().reshaped(Shape{mel_.n_mels, out.dim(2)});
  m.config = mel_;
  m.hop = stft_.hop;
  return m;
}

MelSpectrogram mel_spectrogram(const WaveformSegment& w, const SpectrogramConfig& cfg, const MelConfig& mel) {
  mel.validate(w.sample_rate);
  return MelTransform(cfg, mel, w.sample_rate)(w);
}

namespace {

struct Biquad {
  double b0, b1, b2, a1, a2;
};

// Analog Chebyshev II prototype (stop-band edge at 1 rad/s), scaled to the
// prewarped stop-band edge and mapped through the bilinear transform.
std::vector<Biquad> design_cheby2_lowpass(int order, double stop_atten_db, double stop_hz, double fs) {
  const double de = 1.0 / std::sqrt(std::pow(10.0, 0.1 * stop_atten_db) - 1.0);
  const double mu = std::asinh(1.0 / de) / order;
  const double ws = 2.0 * fs * std::tan(kPi * stop_hz / fs);
  std::vector<Biquad> sections;
  for (int m = 1; m < order; m += 2) {
    const double ang = kPi * m / (2.0 * order);
    std::complex<double> zero(0.0, 1.0 / std::sin(ang));
    std::complex<double> proto(-std::cos(ang), -std::sin(ang));
    proto = std::complex<double>(std::sinh(mu) * proto.real(), std::cosh(mu) * proto.imag());
    std::complex<double> pole = 1.0 / proto;
    zero *= ws;
    pole *= ws;
    const std::complex<double> zd = (2.0 * fs + zero) / (2.0 * fs - zero);
    const std::complex<double> pd = (2.0 * fs + pole) / (2.0 * fs - pole);
    Biquad s{1.0, -2.0 * zd.real(), std::norm(zd), -2.0 * pd.real(), std::norm(pd)};
    const double dc = (1.0 + s.a1 + s.a2) / (s.b0 + s.b1 + s.b2);
    s.b0 *= dc;
    s.b1 *= dc;
    s.b2 *= dc;
    sections.push_back(s);
  }
  return sections;
}

void run_sections(const std::vector<Biquad>& sections, std::vector<double>& x) {
  for (const Biquad& s : sections) {
    double z1 = 0.0, z2 = 0.0;
    for (double& v : x) {
      const double y = s.b0 * v + z1;
      z1 = s.b1 * v - s.a1 * y + z2;
      z2 = s.b2 * v - s.a2 * y;
      v = y;
    }
  }
}

}  // namespace

WaveformSegment bandlimit(const WaveformSegment& w, double cutoff_hz) {
  const double nyquist = w.sample_rate / 2.0;
  if (!(cutoff_hz > 0.0) || cutoff_hz >= nyquist) throw std::invalid_argument("cutoff must lie in (0, Nyquist)");
  const double stop_hz = std::min(1.25 * cutoff_hz, 0.98 * nyquist);
  const auto sections = design_cheby2_lowpass(8, 40.0, stop_hz, w.sample_rate);

  WaveformSegment out = w;
  const int64_t n = w.size();
  if (n < 2) return out;
  // Odd extension at both ends absorbs the start-up transient of each sweep.
  const int64_t padlen = std::min<int64_t>(n - 1, 1500);
  std::vector<double> ext(static_cast<size_t>(n + 2 * padlen));
  const auto& x = w.samples;
  for (int64_t i = 0; i < padlen; ++i) ext[static_cast<size_t>(i)] = 2.0 * x[0] - x[static_cast<size_t>(padlen - i)];
  std::copy(x.begin(), x.end(), ext.begin() + padlen);
  for (int64_t i = 0; i < padlen; ++i)
    ext[static_cast<size_t>(padlen + n + i)] = 2.0 * x[static_cast<size_t>(n - 1)] - x[static_cast<size_t>(n - 2 - i)];
  run_sections(sections, ext);
  std::reverse(ext.begin(), ext.end());
  run_sections(sections, ext);
  std::reverse(ext.begin(), ext.end());
  std::copy(ext.begin() + padlen, ext.begin() + padlen + n, out.samples.begin());
  return out;
}

int64_t crop_offset(int64_t length, int64_t target_len, uint64_t seed) {
  if (length <= target_len) return 0;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int64_t> dist(0, length - target_len);
  return dist(rng);
}

WaveformSegment shape_segment(const WaveformSegment& w, int64_t target_len, ShapeMode mode, uint64_t seed) {
  if (target_len <= 0) throw std::invalid_argument("target_len must be positive");
  WaveformSegment out;
  out.sample_rate = w.sample_rate;
  if (mode == ShapeMode::random_crop && w.size() > target_len) {
    const int64_t start = crop_offset(w.size(), target_len, seed);
    out.samples.assign(w.samples.begin() + start, w.samples.begin() + start + target_len);
    return out;
  }
  out.samples.assign(static_cast<size_t>(target_len), 0.0);
  std::copy_n(w.samples.begin(), std::min(target_len, w.size()), out.samples.begin());
  return out;
}

Tensor mfcc(const WaveformSegment& w) {
  const MelSpectrogram mel = mel_spectrogram(w, SpectrogramConfig{}, MelConfig::full_band());
  const int n = mel.n_mels();
  const int64_t frames = mel.frames();
  Tensor out(Shape{kMfccCoefficients, frames});
  for (int k = 0; k < kMfccCoefficients; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (int64_t t = 0; t < frames; ++t) {
      double acc = 0.0;
      for (int m = 0; m < n; ++m) acc += mel.at(m, t) * std::cos(kPi * k * (2.0 * m + 1.0) / (2.0 * n));
      out[k * frames + t] = scale * acc;
    }
  }
  return out;
}

Tensor stack_waveforms(const std::vector<WaveformSegment>& batch) {
  if (batch.empty()) throw std::invalid_argument("cannot stack an empty batch");
  const int64_t len = batch.front().size();
  Tensor t(Shape{static_cast<int64_t>(batch.size()), len});
  for (size_t b = 0; b < batch.size(); ++b) {
    if (batch[b].size() != len) throw std::invalid_argument("batch segments differ in length");
    std::copy(batch[b].samples.begin(), batch[b].samples.end(), t.data() + static_cast<int64_t>(b) * len);
  }
  return t;
}

}  // namespace radgan
