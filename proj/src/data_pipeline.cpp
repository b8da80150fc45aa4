#include "radgan/data_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

#include "radgan/fft.hpp"
#include "radgan/seed.hpp"
#include "radgan/wav.hpp"

namespace fs = std::filesystem;

namespace radgan {

namespace {

constexpr double kPi = 3.14159265358979323846;

double rms_of(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return v.empty() ? 0.0 : std::sqrt(acc / static_cast<double>(v.size()));
}

std::vector<std::string> wav_ids(const fs::path& dir) {
  std::vector<std::string> ids;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".wav") ids.push_back(e.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace

const char* task_name(TaskTag t) {
  switch (t) {
    case TaskTag::task1:
      return "task1";
    case TaskTag::task2:
      return "task2";
    case TaskTag::synthetic:
      return "synthetic";
  }
  return "?";
}

TaskTag parse_task(const std::string& s) {
  if (s == "task1") return TaskTag::task1;
  if (s == "task2") return TaskTag::task2;
  if (s == "synthetic") return TaskTag::synthetic;
  throw std::invalid_argument("unknown task tag '" + s + "'");
}

NoiseKind parse_noise_kind(const std::string& s) {
  if (s == "white") return NoiseKind::white;
  if (s == "pink") return NoiseKind::pink;
  throw std::invalid_argument("unknown noise kind '" + s + "'");
}

void DegradationSpec::validate() const {
  if (snr_low_db > snr_high_db) throw std::invalid_argument("degradation: snr range is inverted");
  if (!(cutoff_hz > 0.0 && cutoff_hz < kSampleRate / 2.0)) throw std::invalid_argument("degradation: cutoff must lie below Nyquist");
}

double snr_db(const WaveformSegment& signal, const WaveformSegment& noise) {
  return 20.0 * std::log10(rms_of(signal.samples) / rms_of(noise.samples));
}

WaveformSegment make_noise(int64_t n, NoiseKind kind, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  WaveformSegment w;
  w.samples.resize(static_cast<size_t>(n));
  for (double& v : w.samples) v = normal(rng);
  if (kind == NoiseKind::pink && n > 2) {
    const int m = static_cast<int>(n + (n & 1));
    std::vector<double> buf(static_cast<size_t>(m), 0.0);
    std::copy(w.samples.begin(), w.samples.end(), buf.begin());
    RealFft& fft = RealFft::get(m);
    std::vector<std::complex<double>> spec(static_cast<size_t>(fft.bins()));
    fft.forward(buf.data(), spec.data());
    spec[0] = 0.0;
    for (int k = 1; k < fft.bins(); ++k) spec[static_cast<size_t>(k)] /= std::sqrt(static_cast<double>(k));
    fft.inverse(spec.data(), buf.data());
    std::copy_n(buf.begin(), n, w.samples.begin());
    const double r = rms_of(w.samples);
    for (double& v : w.samples) v /= r;
  }
  return w;
}

Degraded degrade_detailed(const WaveformSegment& clean, const DegradationSpec& spec, uint64_t seed) {
  spec.validate();
  if (clean.sample_rate != kSampleRate) throw std::invalid_argument("degrade: expected 8000 Hz input");
  Degraded d;
  d.bandlimited = bandlimit(clean, spec.cutoff_hz);
  const double signal_rms = rms_of(d.bandlimited.samples);
  if (!(signal_rms > 0.0)) throw std::invalid_argument("SNR undefined for silent signal");
  std::mt19937_64 rng(derive_seed(seed, "degrade.snr"));
  d.target_snr_db = std::uniform_real_distribution<double>(spec.snr_low_db, spec.snr_high_db)(rng);
  d.noise = make_noise(clean.size(), spec.noise_kind, derive_seed(seed, "degrade.noise"));
  const double scale = signal_rms / std::pow(10.0, d.target_snr_db / 20.0) / rms_of(d.noise.samples);
  d.noisy = d.bandlimited;
  for (size_t i = 0; i < d.noise.samples.size(); ++i) {
    d.noise.samples[i] *= scale;
    d.noisy.samples[i] += d.noise.samples[i];
  }
  return d;
}

WaveformSegment degrade(const WaveformSegment& clean, const DegradationSpec& spec, uint64_t seed) {
  return degrade_detailed(clean, spec, seed).noisy;
}

WaveformSegment synth_speech(int64_t n, uint64_t seed) {
  // Vowel formant triplets (Hz).
  static constexpr double kFormants[][3] = {
      {730, 1090, 2440}, {270, 2290, 3010}, {300, 870, 2240}, {530, 1840, 2480}, {660, 1720, 2410}, {490, 1350, 1690}};
  static constexpr double kBandwidths[3] = {90.0, 120.0, 180.0};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double f0_base = 90.0 + 130.0 * u(rng);
  const double vibrato_rate = 0.5 + u(rng);
  const double vibrato_phase = 2 * kPi * u(rng);
  const double syllable_rate = 3.0 + 2.0 * u(rng);
  std::normal_distribution<double> normal(0.0, 1.0);

  WaveformSegment w;
  w.samples.assign(static_cast<size_t>(n), 0.0);
  const double syllable_len = kSampleRate / syllable_rate;
  double phase = 0.0;
  int64_t syllable = -1;
  const double* formants = kFormants[0];
  bool voiced = true;
  double fricative_state = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const int64_t s = static_cast<int64_t>(i / syllable_len);
    if (s != syllable) {
      syllable = s;
      formants = kFormants[static_cast<size_t>(u(rng) * 6.0) % 6];
      voiced = u(rng) < 0.8;
    }
    const double pos = (i - s * syllable_len) / syllable_len;
    const double env = std::pow(std::sin(kPi * pos), 2.0);
    const double t = static_cast<double>(i) / kSampleRate;
    const double f0 = f0_base * (1.0 + 0.08 * std::sin(2 * kPi * vibrato_rate * t + vibrato_phase));
    phase += 2 * kPi * f0 / kSampleRate;
    double v = 0.0;
    if (voiced) {
      for (int h = 1; h * f0 < 3900.0; ++h) {
        double gain = 0.0;
        for (int k = 0; k < 3; ++k) {
          const double x = (h * f0 - formants[k]) / kBandwidths[k];
          gain += 1.0 / (1.0 + x * x) / (k + 1);
        }
        v += gain / std::sqrt(static_cast<double>(h)) * std::sin(h * phase);
      }
    } else {
      // First-difference of white noise tilts the fricative toward high frequencies.
      const double e = normal(rng);
      v = 0.6 * (e - fricative_state);
      fricative_state = e;
    }
    w.samples[static_cast<size_t>(i)] = env * v;
  }
  double peak = 0.0;
  for (double v : w.samples) peak = std::max(peak, std::fabs(v));
  if (peak > 0.0)
    for (double& v : w.samples) v *= 0.5 / peak;
  return w;
}

SplitSizes published_split(TaskTag task) {
  switch (task) {
    case TaskTag::task1:
      return {5334, 759};
    case TaskTag::task2:
      return {5229, 749};
    case TaskTag::synthetic:
      break;
  }
  throw std::invalid_argument("synthetic data has no published split");
}

std::pair<std::vector<std::string>, std::vector<std::string>> partition_ids(std::vector<std::string> ids,
                                                                              double train_ratio, uint64_t seed) {
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) throw std::invalid_argument("train_ratio must lie in (0, 1)");
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw std::invalid_argument("duplicate ids in split");
  std::stable_sort(ids.begin(), ids.end(), [seed](const std::string& a, const std::string& b) {
    return mix_seed(seed, {fnv1a(a)}) < mix_seed(seed, {fnv1a(b)});
  });
  const auto n_train = static_cast<size_t>(std::floor(train_ratio * static_cast<double>(ids.size())));
  std::vector<std::string> train(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::string> val(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
  return {train, val};
}

nlohmann::json read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path);
  return nlohmann::json::parse(in);
}

void write_manifest(const std::string& path, const nlohmann::json& manifest) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write manifest " + path);
  out << manifest.dump(2) << "\n";
}

DatasetSplit build_split(const std::string& root, const SplitSpec& spec) {
  const fs::path base(root);
  const fs::path clean_dir = base / "clean", noisy_dir = base / "noisy";
  if (!fs::is_directory(clean_dir)) throw std::runtime_error("missing directory " + clean_dir.string());
  const bool paired = fs::is_directory(noisy_dir);

  const std::vector<std::string> clean_ids = wav_ids(clean_dir);
  if (paired) {
    const std::vector<std::string> noisy_ids = wav_ids(noisy_dir);
    std::vector<std::string> orphans;
    std::set_symmetric_difference(clean_ids.begin(), clean_ids.end(), noisy_ids.begin(), noisy_ids.end(),
                                  std::back_inserter(orphans));
    if (!orphans.empty()) {
      std::string list;
      for (const auto& id : orphans) list += (list.empty() ? "" : ", ") + id;
      throw std::runtime_error("unmatched pair files: " + list);
    }
  }

  std::vector<std::string> train_ids, val_ids;
  std::map<std::string, TaskTag> tasks;
  const fs::path manifest_path = base / "manifest.json";
  if (fs::exists(manifest_path)) {
    const nlohmann::json m = read_manifest(manifest_path.string());
    for (const auto& e : m.at("examples")) {
      const std::string id = e.at("id");
      tasks[id] = parse_task(e.value("task", std::string("synthetic")));
      (e.at("split") == "train" ? train_ids : val_ids).push_back(id);
    }
  } else {
    std::tie(train_ids, val_ids) = partition_ids(clean_ids, spec.train_ratio, spec.seed);
  }

  auto load = [&](const std::string& id) {
    PairedExample ex;
    ex.id = id;
    ex.task = tasks.count(id) ? tasks[id] : spec.task;
    ex.clean = read_wav((clean_dir / (id + ".wav")).string());
    if (paired) {
      ex.noisy = read_wav((noisy_dir / (id + ".wav")).string());
    } else {
      ex.noisy = degrade(ex.clean, spec.degradation, mix_seed(spec.seed, {fnv1a(id)}));
    }
    if (ex.noisy.size() != ex.clean.size()) {
      // Pairs share length after shaping.
      ex.noisy = shape_segment(ex.noisy, ex.clean.size(), ShapeMode::clip_or_pad, 0);
    }
    return ex;
  };
  DatasetSplit out;
  for (const auto& id : train_ids) out.train.examples.push_back(load(id));
  for (const auto& id : val_ids) out.validation.examples.push_back(load(id));
  return out;
}

BatchIterator::BatchIterator(const Dataset& data, int batch_size, int64_t crop_len, uint64_t seed, int64_t epoch)
    : data_(&data), batch_size_(batch_size), crop_len_(crop_len), seed_(seed), epoch_(epoch) {
  if (batch_size < 1 || crop_len < 1) throw std::invalid_argument("batch_size and crop_len must be positive");
  if (batch_size > data.size()) {
    throw std::invalid_argument("batch_size " + std::to_string(batch_size) + " exceeds dataset size " +
                                std::to_string(data.size()));
  }
  for (const auto& ex : data.examples) {
    if (ex.clean.size() < crop_len || ex.noisy.size() < crop_len)
      throw std::invalid_argument("crop_len " + std::to_string(crop_len) + " exceeds clip '" + ex.id + "'");
  }
  order_.resize(static_cast<size_t>(data.size()));
  std::iota(order_.begin(), order_.end(), 0);
  std::mt19937_64 rng(mix_seed(seed_, {0x0badc0deULL, static_cast<uint64_t>(epoch_)}));
  std::shuffle(order_.begin(), order_.end(), rng);
}

int64_t BatchIterator::offset_for(int64_t index) const {
  const PairedExample& ex = data_->examples[static_cast<size_t>(index)];
  const uint64_t s = mix_seed(seed_, {0xc409ULL, static_cast<uint64_t>(epoch_), static_cast<uint64_t>(index)});
  return crop_offset(ex.clean.size(), crop_len_, s);
}

bool BatchIterator::next(Batch& out) {
  if (cursor_ + static_cast<size_t>(batch_size_) > order_.size()) return false;
  out.clean = Tensor(Shape{batch_size_, crop_len_});
  out.noisy = Tensor(Shape{batch_size_, crop_len_});
  out.indices.clear();
  out.offsets.clear();
  for (int b = 0; b < batch_size_; ++b, ++cursor_) {
    const int64_t idx = order_[cursor_];
    const PairedExample& ex = data_->examples[static_cast<size_t>(idx)];
    const int64_t off = offset_for(idx);
    std::copy_n(ex.clean.samples.begin() + off, crop_len_, out.clean.data() + b * crop_len_);
    std::copy_n(ex.noisy.samples.begin() + off, crop_len_, out.noisy.data() + b * crop_len_);
    out.indices.push_back(idx);
    out.offsets.push_back(off);
  }
  return true;
}

}  // namespace radgan
