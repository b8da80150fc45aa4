#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "radgan/audio_features.hpp"
#include "radgan/data_pipeline.hpp"

namespace radgan::eval {

// Mean over frames of the per-frame cosine similarity of the 13-coefficient
// MFCC vectors.
double mfcc_cosine(const WaveformSegment& clean, const WaveformSegment& enhanced);

// PESQ in [1, 4.5] -> (p - 1) / 3.5.
double normalize_pesq(double pesq);
// DNSMOS in [1, 5] -> (d - 1) / 4.
double normalize_dnsmos(double dnsmos);
std::pair<double, double> normalize_scores(double pesq, double dnsmos);

// Equal-weight mean of the four normalized components. A negative cs is
// clamped to 0; any absent component is an error.
double task_score(std::optional<double> pesq_n, std::optional<double> dnsmos_n, std::optional<double> cs,
                  std::optional<double> estoi);

// 0.4 * task1 + 0.6 * task2.
double weighted_score(double task1, double task2);

// Global SNR of the enhanced signal against the clean reference, in dB.
double reference_snr_db(const WaveformSegment& clean, const WaveformSegment& enhanced);
// Mean absolute full-band log-mel difference, unweighted.
double mel_distance(const WaveformSegment& clean, const WaveformSegment& enhanced);
// Unscaled multi-resolution STFT distance.
double mrstft_distance(const WaveformSegment& clean, const WaveformSegment& enhanced);

struct MetricValue {
  std::optional<double> value;
  std::string diagnostic;
};

// A provider maps (clean wav path, enhanced wav path) to a scalar.
using MetricProvider = std::function<double(const std::string& clean_path, const std::string& enhanced_path)>;

class ProviderRegistry {
 public:
  void add(const std::string& id, MetricProvider provider);
  // Shell command with {clean} and {enhanced} placeholders; the last number
  // printed on stdout is the value.
  void add_command(const std::string& id, const std::string& command_template);
  bool has(const std::string& id) const { return providers_.count(id) > 0; }

  // Never throws: crashes, non-finite values and unknown ids come back absent
  // with a diagnostic.
  MetricValue evaluate(const std::string& id, const std::string& clean_path, const std::string& enhanced_path) const;

 private:
  std::map<std::string, MetricProvider> providers_;
};

MetricProvider command_provider(const std::string& command_template);

struct EvalPair {
  std::string id;
  TaskTag task = TaskTag::synthetic;
  std::string clean_path;
  std::string enhanced_path;
};

struct PairMetrics {
  std::string id;
  TaskTag task = TaskTag::synthetic;
  double cs_mfcc = 0.0;
  double mel_l1 = 0.0;
  double mrstft = 0.0;
  double snr_db = 0.0;
  std::optional<double> pesq, estoi, dnsmos;
  std::vector<std::string> diagnostics;
};

struct TaskSummary {
  int64_t pairs = 0;
  std::map<std::string, double> means;
  std::optional<double> pesq_n, dnsmos_n, cs_clamped, estoi;
  std::optional<double> score;
  std::string score_diagnostic;
};

struct EvaluationReport {
  std::vector<PairMetrics> pairs;
  std::map<TaskTag, TaskSummary> tasks;
  std::optional<double> weighted;
  // Pairs skipped because their files could not be read.
  std::vector<std::string> skipped;
};

// Provider ids consulted for the external metrics.
struct ProviderIds {
  std::string pesq = "pesq";
  std::string estoi = "estoi";
  std::string dnsmos = "dnsmos";
};

EvaluationReport evaluate_pairs(const std::vector<EvalPair>& pairs, const ProviderRegistry& registry,
                                const ProviderIds& ids = {});

nlohmann::json to_json(const PairMetrics& m);
nlohmann::json aggregate_json(const EvaluationReport& r);
// One record per pair, then the aggregate record.
void write_report(const std::string& path, const EvaluationReport& r);

}  // namespace radgan::eval
