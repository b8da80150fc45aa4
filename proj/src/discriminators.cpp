#include "radgan/discriminators.hpp"

#include <algorithm>
#include <array>
#include <random>
#include <stdexcept>

#include "radgan/ops.hpp"

namespace radgan {

namespace {

std::array<int64_t, 3> g_constructions{};

void count_construction(DiscriminatorFamily f) { ++g_constructions[static_cast<size_t>(f)]; }

Var flatten_scores(const Var& x) { return ag::reshape(x, Shape{x.dim(0), x.numel() / x.dim(0)}); }

const nn::InitSpec kDefaultInit{nn::Init::uniform, 0.0};

}  // namespace

const char* family_name(DiscriminatorFamily f) {
  switch (f) {
    case DiscriminatorFamily::mpd:
      return "mpd";
    case DiscriminatorFamily::msd:
      return "msd";
    case DiscriminatorFamily::mmd:
      return "mmd";
  }
  return "?";
}

int64_t discriminator_constructions(DiscriminatorFamily f) { return g_constructions[static_cast<size_t>(f)]; }

void reset_discriminator_constructions() { g_constructions.fill(0); }

// ---- MPD ----

MpdConfig MpdConfig::toy() {
  MpdConfig c;
  c.channels = {8, 16, 32, 32, 32};
  return c;
}

MultiPeriodDiscriminator::MultiPeriodDiscriminator(MpdConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
  count_construction(DiscriminatorFamily::mpd);
  std::mt19937_64 rng(seed);
  const int pad = (cfg_.kernel - 1) / 2;
  for (size_t s = 0; s < cfg_.periods.size(); ++s) {
    Sub sub;
    int cin = 1;
    for (size_t i = 0; i < cfg_.channels.size(); ++i) {
      const int stride = i + 1 < cfg_.channels.size() ? cfg_.stride : 1;
      ag::Conv2dOptions opt{stride, 1, pad, 0, 1, 1};
      sub.convs.emplace_back(cin, cfg_.channels[i], cfg_.kernel, 1, opt, nn::Norm::weight, kDefaultInit, rng);
      cin = cfg_.channels[i];
    }
    sub.post = nn::Conv2d(cin, 1, 3, 1, {1, 1, 1, 0, 1, 1}, nn::Norm::weight, kDefaultInit, rng);
    subs_.push_back(std::move(sub));
  }
}

Var MultiPeriodDiscriminator::fold(const Var& wave, int period) {
  const int64_t batch = wave.dim(0);
  const int64_t len = wave.dim(1);
  Var x = ag::reshape(wave, Shape{batch, 1, len});
  if (len % period != 0) x = ag::pad_reflect(x, 0, period - len % period);
  return ag::reshape(x, Shape{batch, 1, x.dim(2) / period, period});
}

std::vector<DiscriminatorOutput> MultiPeriodDiscriminator::forward(const Var& wave) {
  const int max_period = *std::max_element(cfg_.periods.begin(), cfg_.periods.end());
  if (wave.value().rank() != 2 || wave.dim(1) < max_period) {
    throw std::invalid_argument("waveform too short for MPD: need at least " + std::to_string(max_period) +
                                " samples");
  }
  std::vector<DiscriminatorOutput> outs;
  for (size_t s = 0; s < subs_.size(); ++s) {
    DiscriminatorOutput o;
    Var x = fold(wave, cfg_.periods[s]);
    for (auto& conv : subs_[s].convs) {
      x = ag::leaky_relu(conv.forward(x), kDiscriminatorSlope);
      o.features.push_back(x);
    }
    o.scores = flatten_scores(subs_[s].post.forward(x));
    outs.push_back(std::move(o));
  }
  return outs;
}

void MultiPeriodDiscriminator::collect(const std::string& prefix, std::vector<nn::NamedParam>& out) {
  for (size_t s = 0; s < subs_.size(); ++s) {
    const std::string base = prefix + "." + std::to_string(s);
    for (size_t i = 0; i < subs_[s].convs.size(); ++i) subs_[s].convs[i].collect(base + ".convs." + std::to_string(i), out);
    subs_[s].post.collect(base + ".conv_post", out);
  }
}

int64_t MultiPeriodDiscriminator::parameter_count() const {
  int64_t n = 0;
  for (const auto& s : subs_) {
    for (const auto& c : s.convs) n += c.parameter_count();
    n += s.post.parameter_count();
  }
  return n;
}

// ---- MSD ----

MsdConfig MsdConfig::toy() {
  MsdConfig c;
  c.channels = {16, 16, 32, 32, 64, 64, 64};
  c.groups = {1, 4, 8, 8, 8, 8, 1};
  return c;
}

MultiScaleDiscriminator::MultiScaleDiscriminator(MsdConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
  const size_t n = cfg_.channels.size();
  if (cfg_.kernels.size() != n || cfg_.strides.size() != n || cfg_.groups.size() != n || cfg_.scales < 1) {
    throw std::invalid_argument("MSD config: layer lists must have equal length");
  }
  count_construction(DiscriminatorFamily::msd);
  std::mt19937_64 rng(seed);
  for (int s = 0; s < cfg_.scales; ++s) {
    const nn::Norm norm = s == 0 ? nn::Norm::spectral : nn::Norm::weight;
    Sub sub;
    int cin = 1;
    for (size_t i = 0; i < n; ++i) {
      ag::Conv1dOptions opt{cfg_.strides[i], (cfg_.kernels[i] - 1) / 2, 1, cfg_.groups[i]};
      sub.convs.emplace_back(cin, cfg_.channels[i], cfg_.kernels[i], opt, norm, kDefaultInit, rng);
      cin = cfg_.channels[i];
    }
    sub.post = nn::Conv1d(cin, 1, 3, {1, 1, 1, 1}, norm, kDefaultInit, rng);
    subs_.push_back(std::move(sub));
  }
}

Var MultiScaleDiscriminator::downsample(const Var& x) { return ag::avg_pool1d(x, 4, 2, 1, true); }

std::vector<DiscriminatorOutput> MultiScaleDiscriminator::forward(const Var& wave) {
  const int64_t min_len = int64_t{4} << cfg_.scales;
  if (wave.value().rank() != 2 || wave.dim(1) < min_len) {
    throw std::invalid_argument("waveform too short for MSD: need at least " + std::to_string(min_len) + " samples");
  }
  std::vector<DiscriminatorOutput> outs;
  Var x_scale = ag::reshape(wave, Shape{wave.dim(0), 1, wave.dim(1)});
  for (size_t s = 0; s < subs_.size(); ++s) {
    if (s > 0) x_scale = downsample(x_scale);
    DiscriminatorOutput o;
    Var x = x_scale;
    for (auto& conv : subs_[s].convs) {
      x = ag::leaky_relu(conv.forward(x), kDiscriminatorSlope);
      o.features.push_back(x);
    }
    o.scores = flatten_scores(subs_[s].post.forward(x));
    outs.push_back(std::move(o));
  }
  return outs;
}

void MultiScaleDiscriminator::collect(const std::string& prefix, std::vector<nn::NamedParam>& out) {
  for (size_t s = 0; s < subs_.size(); ++s) {
    const std::string base = prefix + "." + std::to_string(s);
    for (size_t i = 0; i < subs_[s].convs.size(); ++i) subs_[s].convs[i].collect(base + ".convs." + std::to_string(i), out);
    subs_[s].post.collect(base + ".conv_post", out);
  }
}

void MultiScaleDiscriminator::collect_buffers(const std::string& prefix, std::vector<nn::NamedBuffer>& out) {
  for (size_t s = 0; s < subs_.size(); ++s) {
    const std::string base = prefix + "." + std::to_string(s);
    for (size_t i = 0; i < subs_[s].convs.size(); ++i) {
      subs_[s].convs[i].collect_buffers(base + ".convs." + std::to_string(i), out);
    }
    subs_[s].post.collect_buffers(base + ".conv_post", out);
  }
}

int64_t MultiScaleDiscriminator::parameter_count() const {
  int64_t n = 0;
  for (const auto& s : subs_) {
    for (const auto& c : s.convs) n += c.parameter_count();
    n += s.post.parameter_count();
  }
  return n;
}

// ---- MMD ----

MmdBranch::MmdBranch(MmdBranchConfig cfg, std::mt19937_64& rng) : cfg_(std::move(cfg)) {
  if (cfg_.channel_plan.size() != cfg_.strides.size() + 1) {
    throw std::invalid_argument("MMD branch: channel plan must have one more entry than strides");
  }
  for (size_t i = 0; i < cfg_.strides.size(); ++i) {
    const int s = cfg_.strides[i];
    ag::Conv2dOptions opt{s, s, cfg_.padding, cfg_.padding, 1, 1};
    layers_.emplace_back(cfg_.channel_plan[i], cfg_.channel_plan[i + 1], cfg_.kernel, cfg_.kernel, opt, cfg_.norm,
                         kDefaultInit, rng);
  }
}

DiscriminatorOutput MmdBranch::forward(const Var& mel) {
  if (mel.value().rank() != 4 || mel.dim(1) != cfg_.channel_plan.front()) {
    throw std::invalid_argument("MMD expects a [B, 1, n_mels, T] input, got " + shape_string(mel.shape()));
  }
  if (mel.dim(3) < kMmdMinFrames) throw std::invalid_argument("mel too short for MMD");
  DiscriminatorOutput o;
  Var x = mel;
  for (size_t i = 0; i + 1 < layers_.size(); ++i) {
    x = ag::leaky_relu(layers_[i].forward(x), kDiscriminatorSlope);
    o.features.push_back(x);
  }
  o.scores = flatten_scores(layers_.back().forward(x));
  return o;
}

void MmdBranch::collect(const std::string& prefix, std::vector<nn::NamedParam>& out) {
  for (size_t i = 0; i < layers_.size(); ++i) layers_[i].collect(prefix + ".convs." + std::to_string(i), out);
}

void MmdBranch::collect_buffers(const std::string& prefix, std::vector<nn::NamedBuffer>& out) {
  for (size_t i = 0; i < layers_.size(); ++i) layers_[i].collect_buffers(prefix + ".convs." + std::to_string(i), out);
}

int64_t MmdBranch::parameter_count() const {
  int64_t n = 0;
  for (const auto& l : layers_) n += l.parameter_count();
  return n;
}

MultiMelDiscriminator::MultiMelDiscriminator(MmdConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
  count_construction(DiscriminatorFamily::mmd);
  std::mt19937_64 rng(seed);
  for (nn::Norm norm : {nn::Norm::spectral, nn::Norm::weight}) {
    MmdBranchConfig bc;
    bc.channel_plan = cfg_.channel_plan;
    bc.strides = cfg_.strides;
    bc.norm = norm;
    branches_.emplace_back(bc, rng);
  }
}

std::vector<DiscriminatorOutput> MultiMelDiscriminator::forward(const Var& mel) {
  std::vector<DiscriminatorOutput> outs;
  for (auto& b : branches_) outs.push_back(b.forward(mel));
  return outs;
}

void MultiMelDiscriminator::collect(const std::string& prefix, std::vector<nn::NamedParam>& out) {
  branches_[0].collect(prefix + ".sn", out);
  branches_[1].collect(prefix + ".wn", out);
}

void MultiMelDiscriminator::collect_buffers(const std::string& prefix, std::vector<nn::NamedBuffer>& out) {
  branches_[0].collect_buffers(prefix + ".sn", out);
}

int64_t MultiMelDiscriminator::parameter_count() const {
  return branches_[0].parameter_count() + branches_[1].parameter_count();
}

}  // namespace radgan
