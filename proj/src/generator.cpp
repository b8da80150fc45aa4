#include "radgan/generator.hpp"

#include <random>
#include <stdexcept>
#include <string>

#include "radgan/ops.hpp"

namespace radgan {

namespace {

constexpr double kResidualSlope = 0.1;
constexpr double kFinalSlope = 0.01;

}  // namespace

GeneratorConfig GeneratorConfig::toy() {
  GeneratorConfig c;
  c.upsample_rates = {4, 4, 2};
  c.upsample_kernels = {8, 8, 4};
  c.base_channels = 32;
  c.init_std = 0.05;
  return c;
}

int GeneratorConfig::hop() const {
  int h = 1;
  for (int r : upsample_rates) h *= r;
  return h;
}

void GeneratorConfig::validate() const {
  if (upsample_rates.empty() || upsample_rates.size() != upsample_kernels.size()) {
    throw std::invalid_argument("generator: upsample rates and kernels must pair up");
  }
  for (size_t i = 0; i < upsample_rates.size(); ++i) {
    if (upsample_rates[i] <= 0 || upsample_kernels[i] != 2 * upsample_rates[i]) {
      throw std::invalid_argument("generator: each upsample kernel must be twice its rate");
    }
  }
  if (mrf_kernels.empty() || mrf_kernels.size() != mrf_dilations.size()) {
    throw std::invalid_argument("generator: MRF kernels and dilations must pair up");
  }
  for (int k : mrf_kernels) {
    if (k <= 0 || k % 2 == 0) throw std::invalid_argument("generator: MRF kernels must be odd");
  }
  if (base_channels >> upsample_rates.size() < 1) throw std::invalid_argument("generator: base_channels too small");
  if (n_mels <= 0 || !(init_std > 0.0)) throw std::invalid_argument("generator: invalid n_mels or init_std");
}

Generator::Generator(GeneratorConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  const nn::InitSpec normal{nn::Init::normal, cfg_.init_std};
  const nn::InitSpec uniform{nn::Init::uniform, 0.0};
  const auto wn = nn::Norm::weight;

  conv_pre_ = nn::Conv1d(cfg_.n_mels, cfg_.base_channels, 7, {1, 3, 1, 1}, wn, uniform, rng);
  int ch = cfg_.base_channels;
  for (size_t i = 0; i < cfg_.upsample_rates.size(); ++i) {
    const int r = cfg_.upsample_rates[i];
    const int k = cfg_.upsample_kernels[i];
    ups_.emplace_back(ch, ch / 2, k, r, (k - r) / 2, wn, normal, rng);
    ch /= 2;
    for (size_t j = 0; j < cfg_.mrf_kernels.size(); ++j) {
      const int kr = cfg_.mrf_kernels[j];
      ResBlock block;
      for (int d : cfg_.mrf_dilations[j]) {
        block.dilated.emplace_back(ch, ch, kr, ag::Conv1dOptions{1, d * (kr - 1) / 2, d, 1}, wn, normal, rng);
        block.plain.emplace_back(ch, ch, kr, ag::Conv1dOptions{1, (kr - 1) / 2, 1, 1}, wn, normal, rng);
      }
      blocks_.push_back(std::move(block));
    }
  }
  conv_post_ = nn::Conv1d(ch, 1, 7, {1, 3, 1, 1}, wn, uniform, rng);
}

Var Generator::res_block(ResBlock& block, const Var& x) {
  Var out = x;
  for (size_t i = 0; i < block.dilated.size(); ++i) {
    Var t = block.dilated[i].forward(ag::leaky_relu(out, kResidualSlope));
    t = block.plain[i].forward(ag::leaky_relu(t, kResidualSlope));
    out = ag::add(t, out);
  }
  return out;
}

Var Generator::forward(const Var& mel) {
  if (mel.value().rank() != 3 || mel.dim(1) != cfg_.n_mels) {
    throw std::invalid_argument("conditioning bins ≠ " + std::to_string(cfg_.n_mels));
  }
  const int64_t batch = mel.dim(0);
  const size_t n_kernels = cfg_.mrf_kernels.size();
  Var x = conv_pre_.forward(mel);
  for (size_t i = 0; i < ups_.size(); ++i) {
    x = ups_[i].forward(ag::leaky_relu(x, kResidualSlope));
    Var acc;
    for (size_t j = 0; j < n_kernels; ++j) {
      Var y = res_block(blocks_[i * n_kernels + j], x);
      acc = acc.defined() ? ag::add(acc, y) : y;
    }
    x = ag::scale(acc, 1.0 / static_cast<double>(n_kernels));
  }
  x = ag::tanh(conv_post_.forward(ag::leaky_relu(x, kFinalSlope)));
  return ag::reshape(x, Shape{batch, x.dim(2)});
}

WaveformSegment Generator::synthesize(const MelSpectrogram& mel) {
  if (mel.n_mels() != cfg_.n_mels) throw std::invalid_argument("conditioning bins ≠ " + std::to_string(cfg_.n_mels));
  NoGradGuard guard;
  Var out = forward(Var(mel.values.reshaped(Shape{1, mel.values.dim(0), mel.values.dim(1)})));
  return {out.value().storage(), kSampleRate};
}

void Generator::collect(const std::string& prefix, std::vector<nn::NamedParam>& out) {
  conv_pre_.collect(prefix + ".conv_pre", out);
  for (size_t i = 0; i < ups_.size(); ++i) ups_[i].collect(prefix + ".ups." + std::to_string(i), out);
  for (size_t b = 0; b < blocks_.size(); ++b) {
    const std::string base = prefix + ".resblocks." + std::to_string(b);
    for (size_t i = 0; i < blocks_[b].dilated.size(); ++i) {
      blocks_[b].dilated[i].collect(base + ".convs1." + std::to_string(i), out);
      blocks_[b].plain[i].collect(base + ".convs2." + std::to_string(i), out);
    }
  }
  conv_post_.collect(prefix + ".conv_post", out);
}

int64_t Generator::parameter_count() const {
  int64_t n = conv_pre_.parameter_count() + conv_post_.parameter_count();
  for (const auto& u : ups_) n += u.parameter_count();
  for (const auto& b : blocks_) {
    for (const auto& c : b.dilated) n += c.parameter_count();
    for (const auto& c : b.plain) n += c.parameter_count();
  }
  return n;
}

int64_t count_parameters(const GeneratorConfig& cfg) { return Generator(cfg, 0).parameter_count(); }

}  // namespace radgan
