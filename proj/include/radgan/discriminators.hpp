#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "radgan/nn.hpp"

namespace radgan {

// Flattened patch scores [B, N] and the activations of every hidden layer.
struct DiscriminatorOutput {
  Var scores;
  std::vector<Var> features;
};

enum class DiscriminatorFamily { mpd, msd, mmd };

const char* family_name(DiscriminatorFamily f);

// Number of discriminator objects of a family constructed in this process.
int64_t discriminator_constructions(DiscriminatorFamily f);
void reset_discriminator_constructions();

inline constexpr double kDiscriminatorSlope = 0.1;

struct MpdConfig {
  std::vector<int> periods{2, 3, 5, 7, 11};
  std::vector<int> channels{32, 128, 512, 1024, 1024};
  int kernel = 5;
  int stride = 3;

  static MpdConfig full() { return {}; }
  static MpdConfig toy();
  bool operator==(const MpdConfig&) const = default;
};

class MultiPeriodDiscriminator {
 public:
  MultiPeriodDiscriminator(MpdConfig cfg, uint64_t seed);

  // wave [B, L] -> one output per period.
  std::vector<DiscriminatorOutput> forward(const Var& wave);

  // [B, L] -> [B, 1, ceil(L/p), p], reflect-padding the tail to a multiple of p.
  static Var fold(const Var& wave, int period);

  const MpdConfig& config() const noexcept { return cfg_; }
  void collect(const std::string& prefix, std::vector<nn::NamedParam>& out);
  int64_t parameter_count() const;

 private:
  struct Sub {
    std::vector<nn::Conv2d> convs;
    nn::Conv2d post;
  };
  MpdConfig cfg_;
  std::vector<Sub> subs_;
};

struct MsdConfig {
  std::vector<int> channels{128, 128, 256, 512, 1024, 1024, 1024};
  std::vector<int> kernels{15, 41, 41, 41, 41, 41, 5};
  std::vector<int> strides{1, 2, 2, 4, 4, 1, 1};
  std::vector<int> groups{1, 4, 16, 16, 16, 16, 1};
  int scales = 3;

  static MsdConfig full() { return {}; }
  static MsdConfig toy();
  bool operator==(const MsdConfig&) const = default;
};

class MultiScaleDiscriminator {
 public:
  MultiScaleDiscriminator(MsdConfig cfg, uint64_t seed);

  // wave [B, L] -> one output per scale (raw, /2 pooled, /4 pooled, ...).
  std::vector<DiscriminatorOutput> forward(const Var& wave);

  // Average pool (kernel 4, stride 2) producing ceil(L/2) samples.
  static Var downsample(const Var& x);

  const MsdConfig& config() const noexcept { return cfg_; }
  void collect(const std::string& prefix, std::vector<nn::NamedParam>& out);
  void collect_buffers(const std::string& prefix, std::vector<nn::NamedBuffer>& out);
  int64_t parameter_count() const;

 private:
  struct Sub {
    std::vector<nn::Conv1d> convs;
    nn::Conv1d post;
  };
  MsdConfig cfg_;
  std::vector<Sub> subs_;
};

struct MmdBranchConfig {
  std::vector<int> channel_plan{1, 32, 64, 128, 256, 1};
  int kernel = 3;
  int padding = 1;
  // Each stride applies to both the frequency and the time axis.
  std::vector<int> strides{1, 2, 2, 2, 1};
  nn::Norm norm = nn::Norm::spectral;

  bool operator==(const MmdBranchConfig&) const = default;
};

inline constexpr int64_t kMmdMinFrames = 8;

// One 2D patch critic over a log-mel image [B, 1, n_mels, T].
class MmdBranch {
 public:
  MmdBranch(MmdBranchConfig cfg, std::mt19937_64& rng);

  DiscriminatorOutput forward(const Var& mel);

  const MmdBranchConfig& config() const noexcept { return cfg_; }
  std::vector<nn::Conv2d>& layers() { return layers_; }
  void collect(const std::string& prefix, std::vector<nn::NamedParam>& out);
  void collect_buffers(const std::string& prefix, std::vector<nn::NamedBuffer>& out);
  int64_t parameter_count() const;

 private:
  MmdBranchConfig cfg_;
  std::vector<nn::Conv2d> layers_;
};

struct MmdConfig {
  std::vector<int> channel_plan{1, 32, 64, 128, 256, 1};
  std::vector<int> strides{1, 2, 2, 2, 1};

  static MmdConfig full() { return {}; }
  bool operator==(const MmdConfig&) const = default;
};

// Two parallel branches over the same mel image: spectral norm and weight norm.
class MultiMelDiscriminator {
 public:
  MultiMelDiscriminator(MmdConfig cfg, uint64_t seed);

  // mel [B, 1, n_mels, T] with T >= 8 -> two outputs.
  std::vector<DiscriminatorOutput> forward(const Var& mel);

  const MmdConfig& config() const noexcept { return cfg_; }
  void collect(const std::string& prefix, std::vector<nn::NamedParam>& out);
  void collect_buffers(const std::string& prefix, std::vector<nn::NamedBuffer>& out);
  int64_t parameter_count() const;

 private:
  MmdConfig cfg_;
  std::vector<MmdBranch> branches_;
};

}  // namespace radgan
