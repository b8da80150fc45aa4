#pragma once

#include <cstdint>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "radgan/audio_features.hpp"
#include "radgan/discriminators.hpp"
#include "radgan/generator.hpp"
#include "radgan/losses.hpp"
#include "radgan/wvn.hpp"

namespace radgan {

struct AblationFlags {
  bool use_mmd = true;
  bool use_mrstft = true;
  bool use_pretrained_init = true;
  bool use_wvn_conditioning = true;

  static AblationFlags b0() { return {false, false, false, false}; }
  static AblationFlags b1() { return {true, true, false, false}; }
  static AblationFlags b2() { return {true, true, true, false}; }
  static AblationFlags b3() { return {true, true, true, true}; }
  // "B0".."B3"; throws on anything else.
  static AblationFlags named(const std::string& name);

  bool operator==(const AblationFlags&) const = default;
};

enum class Phase { pretrain, finetune };

struct TrainingConfig {
  Phase phase = Phase::pretrain;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double weight_decay = 0.01;
  double lr_decay_gamma = 0.999;
  int batch_size = 16;
  int64_t crop_len = 32000;
  int64_t max_steps = 66000;
  // Zero means no epoch limit.
  int64_t max_epochs = 0;
  // Global-norm gradient clipping; zero disables it.
  double grad_clip = 0.0;
  int64_t log_interval = 100;
  int64_t checkpoint_interval = 5000;
  AblationFlags ablation{};

  static TrainingConfig pretrain_defaults();
  static TrainingConfig finetune_defaults();
  void validate() const;
  bool operator==(const TrainingConfig&) const = default;
};

struct DataConfig {
  double cutoff_hz = 1000.0;
  double snr_low_db = -5.0;
  double snr_high_db = -1.0;
  std::string noise_kind = "white";
  double train_ratio = 0.875;
  double clip_seconds = 4.0;
  int synthetic_clips = 100;

  bool operator==(const DataConfig&) const = default;
};

struct ModelConfig {
  SpectrogramConfig stft{};
  MelConfig conditioning_mel = MelConfig::conditioning();
  GeneratorConfig generator = GeneratorConfig::full();
  MpdConfig mpd = MpdConfig::full();
  MsdConfig msd = MsdConfig::full();
  MmdConfig mmd = MmdConfig::full();
  WvnConfig wvn = WvnConfig::full();
  int gate_n_mels = 80;

  bool operator==(const ModelConfig&) const = default;
};

struct RunConfig {
  uint64_t seed = 1234;
  ModelConfig model{};
  LossWeights loss{};
  MrStftConfig mrstft{};
  TrainingConfig pretrain = TrainingConfig::pretrain_defaults();
  TrainingConfig finetune = TrainingConfig::finetune_defaults();
  WvnTrainConfig wvn_training{};
  DataConfig data{};

  // Defaults at the published scale.
  static RunConfig full() { return {}; }
  // Small models and short crops for CPU smoke runs.
  static RunConfig toy();

  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

nlohmann::json to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::json& j);

// Applies VAR=value overrides named PREFIX + KEY with "__" separating nesting
// levels, e.g. RADGAN_FINETUNE__LR=2e-4. Values parse as JSON when possible
// and fall back to strings. Unknown keys are rejected.
void apply_env_overrides(nlohmann::json& j, const std::map<std::string, std::string>& env,
                         const std::string& prefix = "RADGAN_");
std::map<std::string, std::string> process_environment();

// Reads a JSON config file over the defaults, then environment overrides.
RunConfig load_run_config(const std::string& path, const std::map<std::string, std::string>& env = {});

// FNV-1a over the canonical JSON of everything that shapes the model
// parameters and their inputs.
std::string model_fingerprint(const ModelConfig& m);
std::string wvn_fingerprint(const ModelConfig& m);

}  // namespace radgan
