#pragma once

#include <map>
#include <string>
#include <vector>

#include "radgan/audio_features.hpp"
#include "radgan/discriminators.hpp"

namespace radgan {

struct LossWeights {
  double lambda_mel = 45.0;
  double lambda_stft = 5.0;
  double w_high = 5.0;
  // High-band edge; snapped to the nearest full-band mel center.
  double f_c = 1000.0;
  double gamma_adv = 1.0;
  double lambda_fm = 2.0;

  void validate(int sample_rate = kSampleRate) const;
  bool operator==(const LossWeights&) const = default;
};

struct MrStftConfig {
  std::vector<int> fft_sizes{256, 512, 1024};
  std::vector<int> hops{64, 128, 256};
  std::vector<int> wins{256, 512, 1024};
  double w_sc = 1.0;
  double w_logmag = 1.0;
  double w_linmag = 0.0;

  void validate() const;
  bool operator==(const MrStftConfig&) const = default;
};

inline constexpr double kMrStftPowerFloor = 1e-8;
inline constexpr double kSpectralConvergenceGuard = 1e-8;

// Per-resolution values of the (unweighted) MR-STFT components, batch means.
struct MrStftTerms {
  std::vector<double> spectral_convergence;
  std::vector<double> log_magnitude;
  std::vector<double> linear_magnitude;
};

// Reconstruction losses over batches of waveforms [B, L]; the reference
// signal comes first.
class SpectralLosses {
 public:
  SpectralLosses(LossWeights lw, MrStftConfig cfg, SpectrogramConfig stft = {}, int sample_rate = kSampleRate);

  // lambda_mel * mean over (m, t) of w_m |phi(x) - phi(xhat)|, then batch mean.
  Var mel_l1(const Var& x, const Var& xhat) const;
  // Same objective on precomputed phi images [B, n_mels, T].
  Var mel_l1_from_mels(const Var& phi_x, const Var& phi_xhat) const;
  // lambda_stft * mean over resolutions of (w_sc SC + w_logmag logmag + w_linmag linmag).
  Var mrstft(const Var& x, const Var& xhat) const;
  MrStftTerms mrstft_terms(const Var& x, const Var& xhat) const;
  Var pretrain(const Var& x, const Var& xhat) const;

  // Full-band log-mel phi, [B, L] -> [B, n_mels, T].
  Var phi(const Var& x) const { return phi_(x); }
  const std::vector<double>& band_weights() const noexcept { return band_weights_; }
  // Index of the mel bin whose center is nearest f_c; bins above it are weighted w_high.
  int cutoff_bin() const noexcept { return cutoff_bin_; }
  const LossWeights& weights() const noexcept { return lw_; }
  const MrStftConfig& mrstft_config() const noexcept { return cfg_; }

 private:
  struct Resolution {
    Var sc, logmag, linmag;  // [B] each
  };
  Resolution resolution(const Var& x, const Var& xhat, size_t r) const;

  LossWeights lw_;
  MrStftConfig cfg_;
  MelTransform phi_;
  std::vector<double> band_weights_;
  int cutoff_bin_ = 0;
};

// Waveform-level conveniences over single segments.
double mel_l1_weighted(const WaveformSegment& x, const WaveformSegment& xhat, const LossWeights& lw);
double mrstft(const WaveformSegment& x, const WaveformSegment& xhat, const MrStftConfig& cfg,
              double lambda_stft = LossWeights{}.lambda_stft);
double pretrain_loss(const WaveformSegment& x, const WaveformSegment& xhat, const LossWeights& lw,
                     const MrStftConfig& cfg);

// LSGAN with targets 1 (real) / 0 (fake): mean per score map, summed over
// sub-discriminators.
Var lsgan_d_loss(const std::vector<DiscriminatorOutput>& real, const std::vector<DiscriminatorOutput>& fake);
Var lsgan_g_loss(const std::vector<DiscriminatorOutput>& fake);
// weight * sum over sub-discriminators and layers of mean |real - fake|.
Var feature_match(const std::vector<DiscriminatorOutput>& real, const std::vector<DiscriminatorOutput>& fake,
                  double weight = LossWeights{}.lambda_fm);

// Real and generated outputs of one discriminator family.
struct FamilyOutputs {
  DiscriminatorFamily family;
  std::vector<DiscriminatorOutput> real;
  std::vector<DiscriminatorOutput> fake;
};

struct LossBreakdown {
  Var total;
  // Named scalar terms after weighting, e.g. "adv.mpd", "fm.msd", "mel", "mrstft".
  std::map<std::string, double> terms;
};

struct AdversarialObjective {
  std::vector<DiscriminatorFamily> families;
  bool use_mrstft = true;
};

// gamma * sum_D adv + sum_D fm + mel (+ mrstft). `fake` outputs must carry
// gradients back to xhat.
LossBreakdown generator_total(const Var& x, const Var& xhat, const std::vector<FamilyOutputs>& outputs,
                              const AdversarialObjective& objective, const SpectralLosses& losses);
// Sum over the configured families of the LSGAN discriminator loss.
LossBreakdown discriminator_total(const std::vector<FamilyOutputs>& outputs, const AdversarialObjective& objective);

}  // namespace radgan
