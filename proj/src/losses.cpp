#include "radgan/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "radgan/ops.hpp"

namespace radgan {

namespace {

void check_same_shape(const Var& a, const Var& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(what) + ": length mismatch " + shape_string(a.shape()) + " vs " +
                                shape_string(b.shape()));
  }
}

Var per_sample_mean(const Var& a) {
  return ag::scale(ag::sum_per_sample(a), static_cast<double>(a.dim(0)) / static_cast<double>(a.numel()));
}

Var as_batch(const WaveformSegment& w) { return Var(Tensor(Shape{1, w.size()}, w.samples)); }

const std::vector<DiscriminatorOutput>& family_of(const std::vector<FamilyOutputs>& outputs, DiscriminatorFamily f,
                                                  bool real) {
  for (const auto& o : outputs) {
    if (o.family == f) return real ? o.real : o.fake;
  }
  throw std::invalid_argument(std::string("missing discriminator family: ") + family_name(f));
}

void check_structure(const std::vector<DiscriminatorOutput>& real, const std::vector<DiscriminatorOutput>& fake) {
  if (real.size() != fake.size()) throw std::invalid_argument("discriminator structure mismatch");
  for (size_t k = 0; k < real.size(); ++k) {
    if (real[k].features.size() != fake[k].features.size() || real[k].scores.shape() != fake[k].scores.shape()) {
      throw std::invalid_argument("discriminator structure mismatch");
    }
    for (size_t l = 0; l < real[k].features.size(); ++l) {
      if (real[k].features[l].shape() != fake[k].features[l].shape()) {
        throw std::invalid_argument("discriminator structure mismatch");
      }
    }
  }
}

}  // namespace

void LossWeights::validate(int sample_rate) const {
  if (!(lambda_mel > 0 && lambda_stft > 0 && w_high > 0 && gamma_adv >= 0 && lambda_fm >= 0)) {
    throw std::invalid_argument("loss weights must be positive");
  }
  if (!(f_c > 0 && f_c < sample_rate / 2.0)) throw std::invalid_argument("f_c must lie inside (0, Nyquist)");
}

void MrStftConfig::validate() const {
  if (fft_sizes.empty() || hops.size() != fft_sizes.size() || wins.size() != fft_sizes.size()) {
    throw std::invalid_argument("MR-STFT resolution lists must have equal, nonzero length");
  }
  for (size_t i = 0; i < fft_sizes.size(); ++i) {
    SpectrogramConfig{fft_sizes[i], hops[i], wins[i], WindowKind::hann}.validate();
  }
}

SpectralLosses::SpectralLosses(LossWeights lw, MrStftConfig cfg, SpectrogramConfig stft, int sample_rate)
    : lw_(lw), cfg_(std::move(cfg)), phi_(stft, MelConfig::full_band(), sample_rate) {
  lw_.validate(sample_rate);
  cfg_.validate();
  const std::vector<double> centers = mel_center_frequencies(MelConfig::full_band());
  cutoff_bin_ = 0;
  for (int m = 1; m < static_cast<int>(centers.size()); ++m) {
    if (std::fabs(centers[m] - lw_.f_c) < std::fabs(centers[cutoff_bin_] - lw_.f_c)) cutoff_bin_ = m;
  }
  band_weights_.resize(centers.size());
  for (size_t m = 0; m < centers.size(); ++m) {
    band_weights_[m] = static_cast<int>(m) > cutoff_bin_ ? lw_.w_high : 1.0;
  }
}

Var SpectralLosses::mel_l1_from_mels(const Var& phi_x, const Var& phi_xhat) const {
  check_same_shape(phi_x, phi_xhat, "mel_l1");
  const int64_t n_mels = phi_x.dim(1);
  const int64_t frames = phi_x.dim(2);
  Tensor w(phi_x.shape());
  for (int64_t i = 0; i < w.numel(); ++i) w[i] = band_weights_[static_cast<size_t>((i / frames) % n_mels)];
  Var weighted = ag::mul_const(ag::abs(ag::sub(phi_x, phi_xhat)), w);
  return ag::scale(ag::mean(per_sample_mean(weighted)), lw_.lambda_mel);
}

Var SpectralLosses::mel_l1(const Var& x, const Var& xhat) const {
  check_same_shape(x, xhat, "mel_l1");
  return mel_l1_from_mels(phi_(x), phi_(xhat));
}

SpectralLosses::Resolution SpectralLosses::resolution(const Var& x, const Var& xhat, size_t r) const {
  const SpectrogramConfig sc{cfg_.fft_sizes[r], cfg_.hops[r], cfg_.wins[r], WindowKind::hann};
  Var y = ag::sqrt(ag::clamp_min(ag::stft_power(x, sc), kMrStftPowerFloor));
  Var yhat = ag::sqrt(ag::clamp_min(ag::stft_power(xhat, sc), kMrStftPowerFloor));
  Var diff = ag::sub(y, yhat);
  Resolution out;
  Var num = ag::sqrt(ag::sum_per_sample(ag::square(diff)));
  Var den = ag::clamp_min(ag::sqrt(ag::sum_per_sample(ag::square(y))), kSpectralConvergenceGuard);
  out.sc = ag::div(num, den);
  out.logmag = per_sample_mean(ag::abs(ag::sub(ag::log(y), ag::log(yhat))));
  if (cfg_.w_linmag != 0.0) out.linmag = per_sample_mean(ag::abs(diff));
  return out;
}

Var SpectralLosses::mrstft(const Var& x, const Var& xhat) const {
  check_same_shape(x, xhat, "mrstft");
  Var acc;
  for (size_t r = 0; r < cfg_.fft_sizes.size(); ++r) {
    Resolution res = resolution(x, xhat, r);
    Var term = ag::add(ag::scale(res.sc, cfg_.w_sc), ag::scale(res.logmag, cfg_.w_logmag));
    if (res.linmag.defined()) term = ag::add(term, ag::scale(res.linmag, cfg_.w_linmag));
    acc = acc.defined() ? ag::add(acc, term) : term;
  }
  const double scale = lw_.lambda_stft / static_cast<double>(cfg_.fft_sizes.size());
  return ag::scale(ag::mean(acc), scale);
}

MrStftTerms SpectralLosses::mrstft_terms(const Var& x, const Var& xhat) const {
  check_same_shape(x, xhat, "mrstft");
  NoGradGuard guard;
  MrStftTerms t;
  for (size_t r = 0; r < cfg_.fft_sizes.size(); ++r) {
    Resolution res = resolution(x, xhat, r);
    t.spectral_convergence.push_back(ag::mean(res.sc).item());
    t.log_magnitude.push_back(ag::mean(res.logmag).item());
    t.linear_magnitude.push_back(res.linmag.defined() ? ag::mean(res.linmag).item() : 0.0);
  }
  return t;
}

Var SpectralLosses::pretrain(const Var& x, const Var& xhat) const { return ag::add(mel_l1(x, xhat), mrstft(x, xhat)); }

double mel_l1_weighted(const WaveformSegment& x, const WaveformSegment& xhat, const LossWeights& lw) {
  if (x.size() != xhat.size()) throw std::invalid_argument("mel_l1: length mismatch");
  NoGradGuard guard;
  return SpectralLosses(lw, MrStftConfig{}).mel_l1(as_batch(x), as_batch(xhat)).item();
}

double mrstft(const WaveformSegment& x, const WaveformSegment& xhat, const MrStftConfig& cfg, double lambda_stft) {
  if (x.size() != xhat.size()) throw std::invalid_argument("mrstft: length mismatch");
  NoGradGuard guard;
  LossWeights lw;
  lw.lambda_stft = lambda_stft;
  return SpectralLosses(lw, cfg).mrstft(as_batch(x), as_batch(xhat)).item();
}

double pretrain_loss(const WaveformSegment& x, const WaveformSegment& xhat, const LossWeights& lw,
                     const MrStftConfig& cfg) {
  if (x.size() != xhat.size()) throw std::invalid_argument("pretrain_loss: length mismatch");
  NoGradGuard guard;
  return SpectralLosses(lw, cfg).pretrain(as_batch(x), as_batch(xhat)).item();
}

Var lsgan_d_loss(const std::vector<DiscriminatorOutput>& real, const std::vector<DiscriminatorOutput>& fake) {
  if (real.size() != fake.size() || real.empty()) throw std::invalid_argument("discriminator structure mismatch");
  Var acc;
  for (size_t k = 0; k < real.size(); ++k) {
    if (real[k].scores.shape() != fake[k].scores.shape()) throw std::invalid_argument("discriminator structure mismatch");
    Var r = ag::mean(ag::square(ag::add_scalar(real[k].scores, -1.0)));
    Var f = ag::mean(ag::square(fake[k].scores));
    Var term = ag::add(r, f);
    acc = acc.defined() ? ag::add(acc, term) : term;
  }
  return acc;
}

Var lsgan_g_loss(const std::vector<DiscriminatorOutput>& fake) {
  if (fake.empty()) throw std::invalid_argument("discriminator structure mismatch");
  Var acc;
  for (const auto& o : fake) {
    Var term = ag::mean(ag::square(ag::add_scalar(o.scores, -1.0)));
    acc = acc.defined() ? ag::add(acc, term) : term;
  }
  return acc;
}

Var feature_match(const std::vector<DiscriminatorOutput>& real, const std::vector<DiscriminatorOutput>& fake,
                  double weight) {
  check_structure(real, fake);
  Var acc(Tensor(Shape{1}, 0.0));
  for (size_t k = 0; k < real.size(); ++k) {
    for (size_t l = 0; l < real[k].features.size(); ++l) {
      acc = ag::add(acc, ag::mean(ag::abs(ag::sub(real[k].features[l], fake[k].features[l]))));
    }
  }
  return ag::scale(acc, weight);
}

LossBreakdown generator_total(const Var& x, const Var& xhat, const std::vector<FamilyOutputs>& outputs,
                              const AdversarialObjective& objective, const SpectralLosses& losses) {
  LossBreakdown out;
  Var total = losses.mel_l1(x, xhat);
  out.terms["mel"] = total.item();
  if (objective.use_mrstft) {
    Var s = losses.mrstft(x, xhat);
    out.terms["mrstft"] = s.item();
    total = ag::add(total, s);
  }
  const double gamma = losses.weights().gamma_adv;
  for (DiscriminatorFamily f : objective.families) {
    const auto& real = family_of(outputs, f, true);
    const auto& fake = family_of(outputs, f, false);
    Var adv = ag::scale(lsgan_g_loss(fake), gamma);
    Var fm = feature_match(real, fake, losses.weights().lambda_fm);
    out.terms[std::string("adv.") + family_name(f)] = adv.item();
    out.terms[std::string("fm.") + family_name(f)] = fm.item();
    total = ag::add(total, ag::add(adv, fm));
  }
  out.total = total;
  return out;
}

LossBreakdown discriminator_total(const std::vector<FamilyOutputs>& outputs, const AdversarialObjective& objective) {
  if (objective.families.empty()) throw std::invalid_argument("discriminator_total: no discriminator families");
  LossBreakdown out;
  Var total;
  for (DiscriminatorFamily f : objective.families) {
    Var d = lsgan_d_loss(family_of(outputs, f, true), family_of(outputs, f, false));
    out.terms[std::string("d.") + family_name(f)] = d.item();
    total = total.defined() ? ag::add(total, d) : d;
  }
  out.total = total;
  return out;
}

}  // namespace radgan
