#pragma once

#include <string>
#include <vector>

#include "radgan/nn.hpp"

namespace radgan::optim {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
  // Decoupled (AdamW) decay; 0 gives plain Adam.
  double weight_decay = 0.0;
};

class Adam {
 public:
  Adam() = default;
  Adam(std::vector<nn::NamedParam> params, AdamConfig cfg);

  // One update from the gradients currently stored on the parameters.
  // Parameters without a gradient are left untouched.
  void step();
  void zero_grad();

  double lr() const { return cfg_.lr; }
  void set_lr(double lr) { cfg_.lr = lr; }
  const AdamConfig& config() const { return cfg_; }
  int64_t step_count() const { return steps_; }
  void set_step_count(int64_t n) { steps_ = n; }
  const std::vector<nn::NamedParam>& params() const { return params_; }

  // First and second moment buffers, named "<prefix>.<param>.m" / ".v".
  void collect_state(const std::string& prefix, std::vector<nn::NamedBuffer>& out);

 private:
  std::vector<nn::NamedParam> params_;
  std::vector<Tensor> m_, v_;
  AdamConfig cfg_;
  int64_t steps_ = 0;
};

// lr = base * gamma^epoch, advanced by step() once per epoch.
class ExponentialLR {
 public:
  ExponentialLR(Adam& opt, double gamma);

  void step();
  int64_t epoch() const { return epoch_; }
  // Restores the schedule position after loading a checkpoint.
  void set_epoch(int64_t epoch);
  double base_lr() const { return base_lr_; }

  static double lr_at(double base, double gamma, int64_t epoch);

 private:
  Adam* opt_;
  double base_lr_;
  double gamma_;
  int64_t epoch_ = 0;
};

}  // namespace radgan::optim
