#include "radgan/wvn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "radgan/ops.hpp"
#include "radgan/optim.hpp"
#include "radgan/seed.hpp"

namespace radgan {

namespace {

constexpr double kHiddenSlope = 0.1;

}  // namespace

WvnConfig WvnConfig::toy() {
  WvnConfig c;
  c.channels = 8;
  return c;
}

DilatedSpectralNet::DilatedSpectralNet(const WvnConfig& cfg, uint64_t seed) : dilations_(cfg.time_dilations) {
  if (cfg.channels <= 0 || dilations_.empty()) throw std::invalid_argument("WVN: invalid channel or dilation plan");
  std::mt19937_64 rng(seed);
  const nn::InitSpec init{nn::Init::uniform, 0.0};
  int cin = 1;
  for (int d : dilations_) {
    ag::Conv2dOptions opt{1, 1, 1, d, 1, d};
    layers_.emplace_back(cin, cfg.channels, 3, 3, opt, nn::Norm::none, init, rng);
    cin = cfg.channels;
  }
  head_ = nn::Conv2d(cin, 1, 1, 1, {}, nn::Norm::none, {nn::Init::normal, 1.0}, rng);
  head_.weight().raw_mut().value_mut().scale_(cfg.head_init_std);
}

Var DilatedSpectralNet::forward(const Var& magnitude) {
  if (magnitude.value().rank() != 3) throw std::invalid_argument("WVN expects [B, bins, T] magnitudes");
  const Shape shape = magnitude.shape();
  Var x = ag::reshape(ag::log1p(magnitude), Shape{shape[0], 1, shape[1], shape[2]});
  for (auto& layer : layers_) x = ag::leaky_relu(layer.forward(x), kHiddenSlope);
  Var correction = ag::reshape(head_.forward(x), shape);
  return ag::relu(ag::mul(magnitude, ag::add_scalar(correction, 1.0)));
}

int64_t DilatedSpectralNet::receptive_field_frames() const {
  int64_t rf = 1;
  for (int d : dilations_) rf += 2 * d;
  return rf;
}

void DilatedSpectralNet::collect(const std::string& prefix, std::vector<nn::NamedParam>& out) {
  for (size_t i = 0; i < layers_.size(); ++i) layers_[i].collect(prefix + ".layers." + std::to_string(i), out);
  head_.collect(prefix + ".head", out);
}

int64_t DilatedSpectralNet::parameter_count() const {
  int64_t n = head_.parameter_count();
  for (const auto& l : layers_) n += l.parameter_count();
  return n;
}

WvnModel::WvnModel(WvnConfig cfg, uint64_t seed)
    : cfg_(std::move(cfg)), net_(std::make_unique<DilatedSpectralNet>(cfg_, seed)) {}

WvnModel::WvnModel(WvnConfig cfg, std::unique_ptr<SpectralNet> net) : cfg_(std::move(cfg)), net_(std::move(net)) {}

Tensor magnitude_spectrogram(const WaveformSegment& w, const SpectrogramConfig& cfg) {
  const ComplexSpectrogram spec = stft(w, cfg);
  Tensor mag(Shape{1, spec.bins, spec.frames});
  for (size_t i = 0; i < spec.data.size(); ++i) mag[static_cast<int64_t>(i)] = std::abs(spec.data[i]);
  return mag;
}

ComplexSpectrogram WvnModel::enhance_spectrum(const WaveformSegment& noisy) {
  if (noisy.sample_rate != kSampleRate) {
    throw std::invalid_argument("WVN requires 8000 Hz input, got " + std::to_string(noisy.sample_rate));
  }
  ComplexSpectrogram spec = stft(noisy, cfg_.stft);
  Tensor mag(Shape{1, spec.bins, spec.frames});
  for (size_t i = 0; i < spec.data.size(); ++i) mag[static_cast<int64_t>(i)] = std::abs(spec.data[i]);
  Tensor pred;
  {
    NoGradGuard guard;
    pred = net_->forward(Var(mag)).value();
  }
  for (size_t i = 0; i < spec.data.size(); ++i) {
    const double m = mag[static_cast<int64_t>(i)];
    const double p = pred[static_cast<int64_t>(i)];
    // Zero-magnitude bins carry no phase; they take phase 0.
    spec.data[i] = m > 0.0 ? spec.data[i] * (p / m) : std::complex<double>(p, 0.0);
  }
  return spec;
}

WaveformSegment WvnModel::enhance(const WaveformSegment& noisy) {
  return istft(enhance_spectrum(noisy), cfg_.stft, noisy.size(), noisy.sample_rate);
}

WvnTrainReport fit_wvn(WvnModel& model, const std::vector<NoisyCleanPair>& pairs, const WvnTrainConfig& cfg,
                       uint64_t seed) {
  if (pairs.empty()) throw std::invalid_argument("train_wvn: empty dataset");
  if (cfg.epochs < 0 || cfg.batch_size < 1 || cfg.grad_accum < 1 || cfg.crop_len < 1) {
    throw std::invalid_argument("train_wvn: invalid training config");
  }
  for (const auto& [noisy, clean] : pairs) {
    if (noisy.size() != clean.size()) throw std::invalid_argument("train_wvn: noisy/clean length mismatch");
  }
  std::vector<nn::NamedParam> params;
  model.collect("wvn", params);
  optim::Adam opt(params, {cfg.lr, 0.9, 0.999, 1e-8, 0.0});

  const int64_t n = static_cast<int64_t>(pairs.size());
  const int64_t updates_per_epoch = (n + cfg.effective_batch() - 1) / cfg.effective_batch();
  const SpectrogramConfig& stft_cfg = model.config().stft;
  WvnTrainReport report;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<int64_t> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(mix_seed(seed, {0x5717, static_cast<uint64_t>(epoch)}));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    int64_t cursor = 0;
    double loss_sum = 0.0;
    int64_t loss_count = 0;
    for (int64_t u = 0; u < updates_per_epoch; ++u) {
      opt.zero_grad();
      for (int a = 0; a < cfg.grad_accum; ++a) {
        std::vector<Tensor> noisy_mags, clean_mags;
        for (int b = 0; b < cfg.batch_size; ++b, ++cursor) {
          const auto& [noisy, clean] = pairs[static_cast<size_t>(order[static_cast<size_t>(cursor % n)])];
          const uint64_t crop_seed = mix_seed(seed, {static_cast<uint64_t>(epoch), static_cast<uint64_t>(cursor)});
          noisy_mags.push_back(magnitude_spectrogram(
              shape_segment(noisy, cfg.crop_len, ShapeMode::random_crop, crop_seed), stft_cfg));
          clean_mags.push_back(magnitude_spectrogram(
              shape_segment(clean, cfg.crop_len, ShapeMode::random_crop, crop_seed), stft_cfg));
        }
        const Shape one = noisy_mags.front().shape();
        Tensor x(Shape{cfg.batch_size, one[1], one[2]}), y(x.shape());
        for (int b = 0; b < cfg.batch_size; ++b) {
          std::copy(noisy_mags[b].storage().begin(), noisy_mags[b].storage().end(), x.data() + b * noisy_mags[b].numel());
          std::copy(clean_mags[b].storage().begin(), clean_mags[b].storage().end(), y.data() + b * clean_mags[b].numel());
        }
        Var loss = ag::mean(ag::square(ag::sub(model.net().forward(Var(x)), Var(y))));
        backward(ag::scale(loss, 1.0 / cfg.grad_accum));
        loss_sum += loss.item();
        ++loss_count;
      }
      opt.step();
      ++report.updates;
    }
    report.epoch_losses.push_back(loss_sum / static_cast<double>(loss_count));
  }
  return report;
}

WvnModel train_wvn(const std::vector<NoisyCleanPair>& pairs, const WvnConfig& model_cfg, const WvnTrainConfig& cfg,
                   uint64_t seed, WvnTrainReport* report) {
  if (pairs.empty()) throw std::invalid_argument("train_wvn: empty dataset");
  WvnModel model(model_cfg, derive_seed(seed, "wvn.init"));
  WvnTrainReport r = fit_wvn(model, pairs, cfg, seed);
  if (report) *report = std::move(r);
  return model;
}

}  // namespace radgan
