#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "radgan/audio_features.hpp"
#include "radgan/nn.hpp"

namespace radgan {

struct GeneratorConfig {
  std::vector<int> upsample_rates{8, 8, 2};
  std::vector<int> upsample_kernels{16, 16, 4};
  int base_channels = 512;
  std::vector<int> mrf_kernels{3, 7, 11};
  std::vector<std::vector<int>> mrf_dilations{{1, 3, 5}, {1, 3, 5}, {1, 3, 5}};
  int n_mels = 80;
  // Std of the normal init used for the upsampling and residual convolutions.
  double init_std = 0.01;

  static GeneratorConfig full() { return {}; }
  // Rates (4,4,2) for a 32-sample hop, 32 base channels.
  static GeneratorConfig toy();

  int hop() const;
  void validate() const;

  bool operator==(const GeneratorConfig&) const = default;
};

class Generator {
 public:
  Generator(GeneratorConfig cfg, uint64_t seed);

  // [B, n_mels, T] -> [B, hop * T] in [-1, 1].
  Var forward(const Var& mel);
  WaveformSegment synthesize(const MelSpectrogram& mel);

  const GeneratorConfig& config() const noexcept { return cfg_; }
  void collect(const std::string& prefix, std::vector<nn::NamedParam>& out);
  int64_t parameter_count() const;

 private:
  struct ResBlock {
    std::vector<nn::Conv1d> dilated;
    std::vector<nn::Conv1d> plain;
  };

  Var res_block(ResBlock& block, const Var& x);

  GeneratorConfig cfg_;
  nn::Conv1d conv_pre_;
  std::vector<nn::ConvTranspose1d> ups_;
  std::vector<ResBlock> blocks_;  // stage-major, mrf_kernels.size() per stage
  nn::Conv1d conv_post_;
};

// Exact trainable parameter count of a generator built from cfg.
int64_t count_parameters(const GeneratorConfig& cfg);

}  // namespace radgan
