#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "radgan/checkpoint.hpp"
#include "radgan/config.hpp"
#include "radgan/data_pipeline.hpp"
#include "radgan/discriminators.hpp"
#include "radgan/fusion_gate.hpp"
#include "radgan/generator.hpp"
#include "radgan/losses.hpp"
#include "radgan/optim.hpp"
#include "radgan/wvn.hpp"

namespace radgan {

inline constexpr const char* kCheckpointFormat = "radgan-checkpoint";

struct StepRecord {
  int64_t step = 0;
  int64_t epoch = 0;
  double lr = 0.0;
  // Generator objective of this step.
  double loss = 0.0;
  std::map<std::string, double> terms;
};

nlohmann::json to_json(const StepRecord& r);

// Line-delimited JSON metric log, flushed every flush_interval records.
class MetricLog {
 public:
  MetricLog(const std::string& path, int64_t flush_interval);

  void append(const StepRecord& r);
  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
  int64_t flush_interval_;
  int64_t pending_ = 0;
};

struct RunOptions {
  // Negative means the phase's configured max_steps.
  int64_t max_steps = -1;
  MetricLog* log = nullptr;
  // Saved every checkpoint_interval steps and at the end when non-empty.
  std::string checkpoint_path;
  std::function<void(const StepRecord&)> on_step;
};

// Scales all gradients so their global L2 norm is at most max_norm; returns
// the norm before clipping.
double clip_grad_norm(const std::vector<nn::NamedParam>& params, double max_norm);

// Endless epoch-by-epoch batch stream with a resumable position.
class EpochCursor {
 public:
  EpochCursor(const Dataset& data, int batch_size, int64_t crop_len, uint64_t seed);

  // Returns true when this batch opened a new epoch (other than the first).
  bool next(Batch& out);
  int64_t epoch() const { return epoch_; }
  int64_t batch_in_epoch() const { return batch_in_epoch_; }
  int64_t epochs_completed() const { return epoch_ + (batch_in_epoch_ >= it_->batches() ? 1 : 0); }
  void seek(int64_t epoch, int64_t batch_in_epoch);

 private:
  const Dataset* data_;
  int batch_size_;
  int64_t crop_len_;
  uint64_t seed_;
  int64_t epoch_ = 0;
  int64_t batch_in_epoch_ = 0;
  std::unique_ptr<BatchIterator> it_;
};

// Phase 1: reconstruct full-band clean speech from the mel of its 1 kHz
// band-limited version, trained on mel-L1 plus MR-STFT only.
class PretrainSession {
 public:
  PretrainSession(RunConfig cfg, const Dataset& clean);

  StepRecord step();
  std::vector<StepRecord> run(const RunOptions& opt = {});

  void save(const std::string& path);
  void load(const std::string& path);

  Generator& generator() { return generator_; }
  const RunConfig& config() const { return cfg_; }
  int64_t steps() const { return steps_; }
  int64_t epoch() const { return cursor_.epoch(); }
  int64_t epochs_completed() const { return cursor_.epochs_completed(); }
  double lr() const { return opt_.lr(); }

 private:
  RunConfig cfg_;
  Dataset data_;
  Generator generator_;
  std::vector<nn::NamedParam> params_;
  optim::Adam opt_;
  std::unique_ptr<optim::ExponentialLR> sched_;
  SpectralLosses losses_;
  MelTransform cond_mel_;
  EpochCursor cursor_;
  int64_t steps_ = 0;
};

struct FinetuneSources {
  std::string generator_checkpoint;
  std::string wvn_checkpoint;
};

// Phase 2: adversarial fine-tuning on noisy/clean pairs. The generator is
// conditioned on the gate-fused mel of the noisy input and its WVN
// enhancement, or on the noisy mel alone when WVN conditioning is off.
class FinetuneSession {
 public:
  FinetuneSession(RunConfig cfg, const Dataset& paired, const FinetuneSources& sources = {});

  StepRecord step();
  std::vector<StepRecord> run(const RunOptions& opt = {});

  void save(const std::string& path);
  void load(const std::string& path);

  // Generator input for a batch of noisy crops and their WVN-enhanced crops.
  Var conditioning(const Tensor& noisy, const Tensor& enhanced);

  Generator& generator() { return generator_; }
  FusionGateParams& gate() { return gate_; }
  const std::vector<DiscriminatorFamily>& families() const { return objective_.families; }
  const RunConfig& config() const { return cfg_; }
  int64_t steps() const { return steps_; }
  int64_t epoch() const { return cursor_.epoch(); }
  int64_t epochs_completed() const { return cursor_.epochs_completed(); }
  double lr() const { return opt_g_.lr(); }

 private:
  std::vector<FamilyOutputs> discriminate(const Var& x, const Var& xhat, bool real_grad);
  std::vector<nn::NamedBuffer> buffers();

  RunConfig cfg_;
  AblationFlags flags_;
  Dataset data_;
  // WVN output per example, aligned sample-for-sample with data_.
  std::vector<WaveformSegment> enhanced_;
  Generator generator_;
  FusionGateParams gate_;
  std::unique_ptr<MultiPeriodDiscriminator> mpd_;
  std::unique_ptr<MultiScaleDiscriminator> msd_;
  std::unique_ptr<MultiMelDiscriminator> mmd_;
  std::vector<nn::NamedParam> g_params_, d_params_;
  optim::Adam opt_g_, opt_d_;
  std::unique_ptr<optim::ExponentialLR> sched_g_, sched_d_;
  SpectralLosses losses_;
  MelTransform cond_mel_;
  AdversarialObjective objective_;
  EpochCursor cursor_;
  int64_t steps_ = 0;
};

// Trains the WVN on (noisy, clean) pairs of a dataset.
WvnModel train_wvn(const Dataset& data, const RunConfig& cfg, WvnTrainReport* report = nullptr);
void save_wvn_checkpoint(const std::string& path, WvnModel& model, const RunConfig& cfg);
WvnModel load_wvn_checkpoint(const std::string& path, const RunConfig& cfg);

// Generator (and gate, for fine-tuned checkpoints) ready for synthesis.
struct InferenceModel {
  std::unique_ptr<Generator> generator;
  std::optional<FusionGateParams> gate;
  std::string kind;
};

InferenceModel load_inference_model(const std::string& path, const RunConfig& cfg);

// Checkpoint header common fields.
nlohmann::json checkpoint_header(const std::string& kind, const std::string& fingerprint, const RunConfig& cfg);
// Reads an archive and checks its format, kind and fingerprint.
Archive open_checkpoint(const std::string& path, const std::vector<std::string>& kinds, const std::string& fingerprint);

}  // namespace radgan
