#include "radgan/fusion_gate.hpp"

#include <random>
#include <stdexcept>

#include "radgan/ops.hpp"

namespace radgan {

void FusionGateParams::collect(const std::string& prefix, std::vector<nn::NamedParam>& out) {
  out.push_back({prefix + ".mix_weights", &mix_weights});
  out.push_back({prefix + ".mix_bias", &mix_bias});
  out.push_back({prefix + ".global_logit_a", &global_logit_a});
}

FusionGateParams init_gate(int64_t n_mels, uint64_t seed) {
  if (n_mels <= 0) throw std::invalid_argument("init_gate: n_mels must be positive");
  std::mt19937_64 rng(seed);
  FusionGateParams p;
  p.mix_weights = Var::parameter(Tensor::randn(Shape{n_mels, 2 * n_mels}, kGateInitWeightStd, rng));
  p.mix_bias = Var::parameter(Tensor(Shape{n_mels}, kGateInitBias));
  p.global_logit_a = Var::parameter(Tensor::scalar(kGateInitBias));
  return p;
}

Var fuse(const Var& m_n, const Var& m_w, const FusionGateParams& p) {
  if (m_n.shape() != m_w.shape() || m_n.value().rank() != 3 || m_n.dim(1) != p.n_mels()) {
    throw std::invalid_argument("conditioning shape mismatch");
  }
  const int64_t m = p.n_mels();
  Var residual = ag::sub(m_w, m_n);
  Var gate_in = ag::concat({m_n, residual}, 1);
  Var w = ag::reshape(p.mix_weights, Shape{m, 2 * m, 1});
  Var gate = ag::sigmoid(ag::conv1d(gate_in, w, p.mix_bias, {}));
  return ag::add(m_n, ag::scale_by(ag::mul(gate, residual), ag::sigmoid(p.global_logit_a)));
}

MelSpectrogram fuse(const MelSpectrogram& m_n, const MelSpectrogram& m_w, const FusionGateParams& p) {
  if (m_n.values.shape() != m_w.values.shape() || !(m_n.config == m_w.config) || m_n.hop != m_w.hop) {
    throw std::invalid_argument("conditioning shape mismatch");
  }
  NoGradGuard guard;
  const Shape batched{1, m_n.values.dim(0), m_n.values.dim(1)};
  Var out = fuse(Var(m_n.values.reshaped(batched)), Var(m_w.values.reshaped(batched)), p);
  return {out.value().reshaped(m_n.values.shape()), m_n.config, m_n.hop};
}

}  // namespace radgan
