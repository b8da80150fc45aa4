#include "radgan/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace radgan::optim {

Adam::Adam(std::vector<nn::NamedParam> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  if (!(cfg_.lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.var->shape());
    v_.emplace_back(p.var->shape());
  }
}

void Adam::step() {
  ++steps_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
  const double step_size = cfg_.lr / bc1;
  const double sqrt_bc2 = std::sqrt(bc2);
  const double decay = 1.0 - cfg_.lr * cfg_.weight_decay;
  for (size_t i = 0; i < params_.size(); ++i) {
    Var& p = *params_[i].var;
    if (!p.has_grad()) continue;
    double* w = p.value_mut().data();
    const double* g = p.grad().data();
    double* m = m_[i].data();
    double* v = v_[i].data();
    const int64_t n = p.numel();
    for (int64_t j = 0; j < n; ++j) {
      w[j] *= decay;
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
      w[j] -= step_size * m[j] / (std::sqrt(v[j]) / sqrt_bc2 + cfg_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.var->zero_grad();
}

void Adam::collect_state(const std::string& prefix, std::vector<nn::NamedBuffer>& out) {
  for (size_t i = 0; i < params_.size(); ++i) {
    out.push_back({prefix + "." + params_[i].name + ".m", &m_[i]});
    out.push_back({prefix + "." + params_[i].name + ".v", &v_[i]});
  }
}

ExponentialLR::ExponentialLR(Adam& opt, double gamma) : opt_(&opt), base_lr_(opt.lr()), gamma_(gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("lr decay gamma must lie in (0, 1]");
}

void ExponentialLR::step() { set_epoch(epoch_ + 1); }

void ExponentialLR::set_epoch(int64_t epoch) {
  epoch_ = epoch;
  opt_->set_lr(lr_at(base_lr_, gamma_, epoch_));
}

double ExponentialLR::lr_at(double base, double gamma, int64_t epoch) {
  return base * std::pow(gamma, static_cast<double>(epoch));
}

}  // namespace radgan::optim
