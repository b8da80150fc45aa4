#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "radgan/audio_features.hpp"
#include "test_util.hpp"

namespace radgan {
namespace {

using testing::rms_db_ratio;
using testing::tone;
using testing::white_noise;

WaveformSegment zeros(int64_t n) {
  WaveformSegment w;
  w.samples.assign(static_cast<size_t>(n), 0.0);
  return w;
}

TEST(Stft, ZeroInputGivesZeroMatrixOfFramingShape) {
  const auto spec = stft(zeros(32000), SpectrogramConfig{});
  EXPECT_EQ(spec.bins, 513);
  EXPECT_EQ(spec.frames, 251);  // floor(32000 / 128) + 1
  for (const auto& c : spec.data) EXPECT_EQ(std::abs(c), 0.0);
}

TEST(Stft, ToneMagnitudePeaksAtAnalyticBin) {
  const auto spec = stft(tone(500.0, 32000), SpectrogramConfig{});
  const int64_t expected = std::lround(500.0 * 1024 / 8000.0);
  ASSERT_EQ(expected, 64);
  for (int64_t t = 4; t < spec.frames - 4; ++t) {
    int64_t best = 0;
    for (int64_t k = 1; k < spec.bins; ++k)
      if (std::abs(spec.at(k, t)) > std::abs(spec.at(best, t))) best = k;
    EXPECT_EQ(best, expected) << "frame " << t;
  }
}

TEST(Stft, EmptyInputIsRejected) {
  WaveformSegment empty;
  EXPECT_THROW(
      {
        try {
          stft(empty, SpectrogramConfig{});
        } catch (const std::invalid_argument& e) {
          EXPECT_STREQ(e.what(), "empty input");
          throw;
        }
      },
      std::invalid_argument);
}

TEST(Stft, IsLinearInScale) {
  const auto x = white_noise(4000, 7);
  auto scaled = x;
  for (double& v : scaled.samples) v *= -2.5;
  const auto a = stft(x, SpectrogramConfig{});
  const auto b = stft(scaled, SpectrogramConfig{});
  double worst = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) worst = std::max(worst, std::abs(b.data[i] - (-2.5) * a.data[i]));
  EXPECT_LT(worst, 1e-9);
}

TEST(Stft, ParsevalEnergyWithinOnePercent) {
  const SpectrogramConfig cfg;
  for (uint64_t seed : {1u, 2u, 3u}) {
    const auto x = white_noise(64000, seed);
    const auto spec = stft(x, cfg);
    double spec_energy = 0.0;
    for (int64_t k = 0; k < spec.bins; ++k) {
      const double fold = (k == 0 || k == spec.bins - 1) ? 1.0 : 2.0;
      for (int64_t t = 0; t < spec.frames; ++t) spec_energy += fold * std::norm(spec.at(k, t));
    }
    const auto w = analysis_window(cfg);
    double wsq = 0.0;
    for (double v : w) wsq += v * v;
    const double normalization = cfg.n_fft * wsq / cfg.hop;
    double energy = 0.0;
    for (double v : x.samples) energy += v * v;
    EXPECT_NEAR(spec_energy / normalization / energy, 1.0, 0.01) << "seed " << seed;
  }
}

TEST(Stft, InverseRoundTrip) {
  for (int64_t n : {8000, 17231, 32000}) {
    const auto x = white_noise(n, 11);
    const auto y = istft(stft(x, SpectrogramConfig{}), SpectrogramConfig{}, n);
    ASSERT_EQ(y.size(), n);
    double err = 0.0, ref = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      err += std::pow(y.samples[static_cast<size_t>(i)] - x.samples[static_cast<size_t>(i)], 2);
      ref += std::pow(x.samples[static_cast<size_t>(i)], 2);
    }
    EXPECT_LT(std::sqrt(err / ref), 1e-9);
  }
}

TEST(MelSpectrogram, ZeroInputClampsToLogFloor) {
  const auto mel = mel_spectrogram(zeros(32000), SpectrogramConfig{}, MelConfig::conditioning());
  EXPECT_EQ(mel.n_mels(), 80);
  EXPECT_EQ(mel.frames(), 251);
  for (double v : mel.values.values()) EXPECT_DOUBLE_EQ(v, std::log(1e-5));
}

TEST(MelSpectrogram, ToneArgmaxIsRowWithNearestCenter) {
  const MelConfig cfg = MelConfig::conditioning();
  const auto centers = mel_center_frequencies(cfg);
  // Brute-force oracle over filter centers.
  size_t nearest = 0;
  for (size_t i = 1; i < centers.size(); ++i)
    if (std::fabs(centers[i] - 500.0) < std::fabs(centers[nearest] - 500.0)) nearest = i;

  const auto mel = mel_spectrogram(tone(500.0, 32000, 0.5), SpectrogramConfig{}, cfg);
  for (int64_t t = 4; t < mel.frames() - 4; ++t) {
    int best = 0;
    for (int m = 1; m < mel.n_mels(); ++m)
      if (mel.at(m, t) > mel.at(best, t)) best = m;
    EXPECT_EQ(static_cast<size_t>(best), nearest) << "frame " << t;
  }
}

TEST(MelSpectrogram, BandAboveNyquistIsRejected) {
  MelConfig cfg;
  cfg.f_max = 4500.0;
  try {
    mel_spectrogram(zeros(1000), SpectrogramConfig{}, cfg);
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& e) {
    EXPECT_STREQ(e.what(), "mel band exceeds Nyquist");
  }
}

TEST(MelFilterbank, RowsNonnegativeAndColumnsTouchAtMostTwoFilters) {
  for (const MelConfig& cfg : {MelConfig::conditioning(), MelConfig::full_band()}) {
    const Tensor fb = mel_filterbank(cfg, 1024, 8000);
    const int64_t bins = fb.dim(1);
    for (int64_t k = 0; k < bins; ++k) {
      int nonzero = 0;
      for (int64_t m = 0; m < fb.dim(0); ++m) {
        EXPECT_GE(fb[m * bins + k], 0.0);
        nonzero += fb[m * bins + k] > 0.0;
      }
      EXPECT_LE(nonzero, 2) << "bin " << k;
    }
  }
}

TEST(Bandlimit, PassBandToneKeepsLevel) {
  const auto x = tone(200.0, 16000);
  EXPECT_LT(std::fabs(rms_db_ratio(bandlimit(x, 1000.0), x)), 1.0);
}

TEST(Bandlimit, StopBandToneLosesFortyDecibels) {
  const auto x = tone(3000.0, 16000);
  EXPECT_LE(rms_db_ratio(bandlimit(x, 1000.0), x), -40.0);
}

TEST(Bandlimit, StopBandEdgeAttenuationInSteadyState) {
  // Finite-length filtering leaves boundary transients, so the filter
  // response is read away from the clip edges.
  const auto edge = tone(1250.0, 16000);
  const auto out = bandlimit(edge, 1000.0);
  double in_e = 0.0, out_e = 0.0;
  for (size_t i = 2000; i < 14000; ++i) {
    in_e += edge.samples[i] * edge.samples[i];
    out_e += out.samples[i] * out.samples[i];
  }
  EXPECT_LE(10.0 * std::log10(out_e / in_e), -40.0);
}

TEST(Bandlimit, ZeroInZeroOutAndLengthPreserved) {
  const auto y = bandlimit(zeros(5000), 1000.0);
  ASSERT_EQ(y.size(), 5000);
  for (double v : y.samples) EXPECT_EQ(v, 0.0);
}

TEST(Bandlimit, CutoffAtNyquistIsRejected) {
  EXPECT_THROW(bandlimit(zeros(100), 4000.0), std::invalid_argument);
  EXPECT_THROW(bandlimit(zeros(100), 0.0), std::invalid_argument);
}

TEST(Bandlimit, IdempotentOnSignalsOutsideTheTransitionBand) {
  // Random multi-tone mixtures with components in the flat pass band
  // (< 0.7 * cutoff) or in the stop band (> 1.25 * cutoff), faded in and
  // out over 50 ms like a real clip.
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> low(40.0, 700.0), high(1250.0, 3900.0), amp(0.05, 0.4),
      phase(0.0, 2 * M_PI);
  for (int trial = 0; trial < 10; ++trial) {
    WaveformSegment w = zeros(12000);
    for (int c = 0; c < 6; ++c) {
      const double f = (c % 2 == 0) ? low(rng) : high(rng);
      const double a = amp(rng), ph = phase(rng);
      for (size_t i = 0; i < w.samples.size(); ++i) w.samples[i] += a * std::sin(2 * M_PI * f * i / 8000.0 + ph);
    }
    for (size_t i = 0; i < 400; ++i) {
      const double g = 0.5 - 0.5 * std::cos(M_PI * static_cast<double>(i) / 400.0);
      w.samples[i] *= g;
      w.samples[w.samples.size() - 1 - i] *= g;
    }
    const auto once = bandlimit(w, 1000.0);
    const auto twice = bandlimit(once, 1000.0);
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < once.samples.size(); ++i) {
      num += std::pow(twice.samples[i] - once.samples[i], 2);
      den += std::pow(once.samples[i], 2);
    }
    EXPECT_LT(std::sqrt(num / den), 1e-3) << "trial " << trial;
  }
}

TEST(ShapeSegment, ClipPadAndCrop) {
  auto long_in = white_noise(36000, 1);
  auto clipped = shape_segment(long_in, 32000, ShapeMode::clip_or_pad, 0);
  ASSERT_EQ(clipped.size(), 32000);
  EXPECT_TRUE(std::equal(clipped.samples.begin(), clipped.samples.end(), long_in.samples.begin()));

  auto short_in = white_noise(30000, 2);
  auto padded = shape_segment(short_in, 32000, ShapeMode::clip_or_pad, 0);
  ASSERT_EQ(padded.size(), 32000);
  EXPECT_TRUE(std::equal(short_in.samples.begin(), short_in.samples.end(), padded.samples.begin()));
  for (int64_t i = 30000; i < 32000; ++i) EXPECT_EQ(padded.samples[static_cast<size_t>(i)], 0.0);

  auto a = shape_segment(long_in, 8000, ShapeMode::random_crop, 42);
  auto b = shape_segment(long_in, 8000, ShapeMode::random_crop, 42);
  EXPECT_EQ(a.samples, b.samples);
  auto fallback = shape_segment(short_in, 32000, ShapeMode::random_crop, 42);
  EXPECT_EQ(fallback.samples, padded.samples);
  EXPECT_THROW(shape_segment(short_in, 0, ShapeMode::clip_or_pad, 0), std::invalid_argument);
}

TEST(ShapeSegment, LengthIsAlwaysTarget) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    const int64_t n = 1 + static_cast<int64_t>(rng() % 5000);
    const int64_t target = 1 + static_cast<int64_t>(rng() % 5000);
    const auto mode = (i % 2) ? ShapeMode::random_crop : ShapeMode::clip_or_pad;
    EXPECT_EQ(shape_segment(white_noise(n, i), target, mode, rng()).size(), target);
  }
}

TEST(Mfcc, IdenticalInputsIdenticalOutputs) {
  const auto x = white_noise(8000, 4);
  EXPECT_EQ(mfcc(x), mfcc(x));
}

TEST(Mfcc, ZeroInputIsDctOfConstant) {
  const Tensor c = mfcc(zeros(8000));
  ASSERT_EQ(c.dim(0), 13);
  const int64_t frames = c.dim(1);
  for (int64_t t = 0; t < frames; ++t) {
    EXPECT_NEAR(c[t], std::sqrt(80.0) * std::log(1e-5), 1e-9);
    for (int k = 1; k < 13; ++k) EXPECT_NEAR(c[k * frames + t], 0.0, 1e-9);
  }
}

TEST(Mfcc, GainOnlyShiftsCoefficientZero) {
  const auto x = white_noise(16000, 9);
  auto y = x;
  for (double& v : y.samples) v *= 2.0;
  const Tensor a = mfcc(x), b = mfcc(y);
  const int64_t frames = a.dim(1);
  for (int64_t t = 0; t < frames; ++t) {
    EXPECT_NEAR(b[t] - a[t], std::sqrt(80.0) * std::log(2.0), 1e-6);
    for (int k = 1; k < 13; ++k) EXPECT_NEAR(a[k * frames + t], b[k * frames + t], 1e-6);
  }
}

}  // namespace
}  // namespace radgan
