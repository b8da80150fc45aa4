#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "radgan/audio_features.hpp"

namespace radgan {

enum class TaskTag { task1, task2, synthetic };

const char* task_name(TaskTag t);
TaskTag parse_task(const std::string& s);

struct PairedExample {
  WaveformSegment clean;
  WaveformSegment noisy;
  TaskTag task = TaskTag::synthetic;
  std::string id;
};

struct Dataset {
  std::vector<PairedExample> examples;

  int64_t size() const { return static_cast<int64_t>(examples.size()); }
};

enum class NoiseKind { white, pink };

NoiseKind parse_noise_kind(const std::string& s);

struct DegradationSpec {
  double cutoff_hz = 1000.0;
  double snr_low_db = -5.0;
  double snr_high_db = -1.0;
  NoiseKind noise_kind = NoiseKind::white;

  void validate() const;
};

struct Degraded {
  WaveformSegment noisy;
  WaveformSegment bandlimited;
  WaveformSegment noise;
  double target_snr_db = 0.0;
};

// Band-limits, then adds noise scaled so the global SNR against the
// band-limited signal equals a uniform draw from the spec's range.
Degraded degrade_detailed(const WaveformSegment& clean, const DegradationSpec& spec, uint64_t seed);
WaveformSegment degrade(const WaveformSegment& clean, const DegradationSpec& spec, uint64_t seed);

// 20 log10(rms(signal) / rms(noise)).
double snr_db(const WaveformSegment& signal, const WaveformSegment& noise);

// Unit-variance noise; pink noise has a 1/f power spectrum.
WaveformSegment make_noise(int64_t n, NoiseKind kind, uint64_t seed);

// Voiced, syllabic test signal with formant structure across 0-4 kHz.
WaveformSegment synth_speech(int64_t n, uint64_t seed);

struct SplitSizes {
  int64_t train = 0;
  int64_t validation = 0;
};

// Split sizes of the real radar corpus tasks.
SplitSizes published_split(TaskTag task);

// Deterministic partition: ids ordered by a seeded hash, the first
// floor(ratio * n) go to train.
std::pair<std::vector<std::string>, std::vector<std::string>> partition_ids(std::vector<std::string> ids,
                                                                              double train_ratio, uint64_t seed);

struct SplitSpec {
  double train_ratio = 0.875;
  uint64_t seed = 0;
  DegradationSpec degradation{};
  TaskTag task = TaskTag::synthetic;
};

struct DatasetSplit {
  Dataset train;
  Dataset validation;
};

// Loads <root>/clean/<id>.wav with <root>/noisy/<id>.wav, or degrades clean
// files on the fly when there is no noisy directory. An existing
// <root>/manifest.json fixes ids, task tags and split assignment.
DatasetSplit build_split(const std::string& root, const SplitSpec& spec);

nlohmann::json read_manifest(const std::string& path);
void write_manifest(const std::string& path, const nlohmann::json& manifest);

struct Batch {
  Tensor clean;  // [B, crop_len]
  Tensor noisy;  // [B, crop_len]
  std::vector<int64_t> indices;
  std::vector<int64_t> offsets;
};

// One epoch of dense batches. The order is a permutation seeded by
// (seed, epoch) and every example gets its own crop offset per epoch. The
// last partial batch is dropped. Every clip must be at least crop_len long.
class BatchIterator {
 public:
  BatchIterator(const Dataset& data, int batch_size, int64_t crop_len, uint64_t seed, int64_t epoch);

  bool next(Batch& out);
  int64_t batches() const { return static_cast<int64_t>(order_.size()) / batch_size_; }
  // Crop offset for an example in this epoch.
  int64_t offset_for(int64_t index) const;

 private:
  const Dataset* data_;
  int batch_size_;
  int64_t crop_len_;
  uint64_t seed_;
  int64_t epoch_;
  std::vector<int64_t> order_;
  size_t cursor_ = 0;
};

}  // namespace radgan
