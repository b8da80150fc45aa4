#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "radgan/audio_features.hpp"
#include "radgan/nn.hpp"

namespace radgan {

// Magnitude-to-magnitude map over [B, bins, T]. Implementations must return
// nonnegative magnitudes of the same shape.
class SpectralNet {
 public:
  virtual ~SpectralNet() = default;
  virtual Var forward(const Var& magnitude) = 0;
  virtual int64_t receptive_field_frames() const = 0;
  virtual void collect(const std::string& prefix, std::vector<nn::NamedParam>& out) = 0;
  virtual int64_t parameter_count() const = 0;
};

struct WvnConfig {
  SpectrogramConfig stft{};
  int channels = 64;
  std::vector<int> time_dilations{1, 2, 4, 8, 16};
  // Std of the 1x1 head; 0 makes the initial net the identity map.
  double head_init_std = 0.0;

  static WvnConfig full() { return {}; }
  static WvnConfig toy();
  bool operator==(const WvnConfig&) const = default;
};

// 3x3 conv stack over log1p(magnitude) with exponentially dilated time taps.
// A 1x1 head predicts a multiplicative correction:
//   out = relu(mag * (1 + head(features)))
class DilatedSpectralNet : public SpectralNet {
 public:
  DilatedSpectralNet(const WvnConfig& cfg, uint64_t seed);

  Var forward(const Var& magnitude) override;
  int64_t receptive_field_frames() const override;
  void collect(const std::string& prefix, std::vector<nn::NamedParam>& out) override;
  int64_t parameter_count() const override;

 private:
  std::vector<nn::Conv2d> layers_;
  nn::Conv2d head_;
  std::vector<int> dilations_;
};

class WvnModel {
 public:
  WvnModel(WvnConfig cfg, uint64_t seed);
  WvnModel(WvnConfig cfg, std::unique_ptr<SpectralNet> net);

  // Predicted magnitude recombined with the noisy phase, same length as input.
  WaveformSegment enhance(const WaveformSegment& noisy);
  // The spectrum enhance() inverts.
  ComplexSpectrogram enhance_spectrum(const WaveformSegment& noisy);

  SpectralNet& net() { return *net_; }
  const WvnConfig& config() const noexcept { return cfg_; }
  int64_t receptive_field_frames() const { return net_->receptive_field_frames(); }
  void collect(const std::string& prefix, std::vector<nn::NamedParam>& out) { net_->collect(prefix, out); }
  int64_t parameter_count() const { return net_->parameter_count(); }

 private:
  WvnConfig cfg_;
  std::unique_ptr<SpectralNet> net_;
};

// |STFT| of a segment as [1, bins, T].
Tensor magnitude_spectrogram(const WaveformSegment& w, const SpectrogramConfig& cfg);

struct WvnTrainConfig {
  int epochs = 30;
  double lr = 1e-3;
  int batch_size = 8;
  int grad_accum = 8;
  int64_t crop_len = 32000;

  int64_t effective_batch() const { return static_cast<int64_t>(batch_size) * grad_accum; }
  bool operator==(const WvnTrainConfig&) const = default;
};

struct WvnTrainReport {
  std::vector<double> epoch_losses;
  int64_t updates = 0;
};

using NoisyCleanPair = std::pair<WaveformSegment, WaveformSegment>;

// Adam on the magnitude MSE. Each update accumulates grad_accum micro-batches
// of batch_size examples drawn cyclically from a per-epoch permutation; an
// epoch is ceil(n / effective_batch) updates.
WvnTrainReport fit_wvn(WvnModel& model, const std::vector<NoisyCleanPair>& pairs, const WvnTrainConfig& cfg,
                       uint64_t seed);

WvnModel train_wvn(const std::vector<NoisyCleanPair>& pairs, const WvnConfig& model_cfg, const WvnTrainConfig& cfg,
                   uint64_t seed, WvnTrainReport* report = nullptr);

}  // namespace radgan
