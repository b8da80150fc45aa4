#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "radgan/audio_features.hpp"
#include "radgan/nn.hpp"

namespace radgan {

// Frame-wise gate blending the noisy mel M_n toward the enhancer mel M_w:
//   G   = sigmoid(W [M_n; M_w - M_n] + b)
//   M_f = M_n + sigmoid(a) * G * (M_w - M_n)
struct FusionGateParams {
  Var mix_weights;     // [n_mels, 2 * n_mels]
  Var mix_bias;        // [n_mels]
  Var global_logit_a;  // [1]

  int64_t n_mels() const { return mix_bias.numel(); }
  void collect(const std::string& prefix, std::vector<nn::NamedParam>& out);
  int64_t parameter_count() const { return mix_weights.numel() + mix_bias.numel() + global_logit_a.numel(); }
};

inline constexpr double kGateInitBias = -2.0;
inline constexpr double kGateInitWeightStd = 0.01;

FusionGateParams init_gate(int64_t n_mels, uint64_t seed = 0);

// Batched form over [B, n_mels, T] log-mels.
Var fuse(const Var& m_n, const Var& m_w, const FusionGateParams& p);

MelSpectrogram fuse(const MelSpectrogram& m_n, const MelSpectrogram& m_w, const FusionGateParams& p);

}  // namespace radgan
