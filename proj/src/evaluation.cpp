#include "radgan/evaluation.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <regex>
#include <stdexcept>

#include "radgan/losses.hpp"
#include "radgan/wav.hpp"

namespace radgan::eval {

namespace {

void check_range(const char* what, double v, double lo, double hi) {
  if (!(v >= lo && v <= hi)) {
    throw std::invalid_argument(std::string(what) + " " + std::to_string(v) + " outside [" + std::to_string(lo) + ", " +
                                std::to_string(hi) + "]");
  }
}

void check_lengths(const WaveformSegment& a, const WaveformSegment& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("length mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
}

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

}  // namespace

double mfcc_cosine(const WaveformSegment& clean, const WaveformSegment& enhanced) {
  check_lengths(clean, enhanced);
  const Tensor a = mfcc(clean), b = mfcc(enhanced);
  const int64_t frames = a.dim(1);
  double total = 0.0;
  for (int64_t t = 0; t < frames; ++t) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int c = 0; c < kMfccCoefficients; ++c) {
      const double x = a[c * frames + t], y = b[c * frames + t];
      dot += x * y;
      na += x * x;
      nb += y * y;
    }
    total += dot / std::max(std::sqrt(na * nb), 1e-12);
  }
  return total / static_cast<double>(frames);
}

double normalize_pesq(double pesq) {
  check_range("PESQ", pesq, 1.0, 4.5);
  return (pesq - 1.0) / 3.5;
}

double normalize_dnsmos(double dnsmos) {
  check_range("DNSMOS", dnsmos, 1.0, 5.0);
  return (dnsmos - 1.0) / 4.0;
}

std::pair<double, double> normalize_scores(double pesq, double dnsmos) {
  return {normalize_pesq(pesq), normalize_dnsmos(dnsmos)};
}

double task_score(std::optional<double> pesq_n, std::optional<double> dnsmos_n, std::optional<double> cs,
                  std::optional<double> estoi) {
  if (!pesq_n || !dnsmos_n || !cs || !estoi) throw std::invalid_argument("task score requires all four metrics");
  const double c = std::max(*cs, 0.0);
  check_range("normalized PESQ", *pesq_n, 0.0, 1.0);
  check_range("normalized DNSMOS", *dnsmos_n, 0.0, 1.0);
  check_range("cs_mfcc", c, 0.0, 1.0);
  check_range("ESTOI", *estoi, 0.0, 1.0);
  return (*pesq_n + *dnsmos_n + c + *estoi) / 4.0;
}

double weighted_score(double task1, double task2) {
  check_range("task1 score", task1, 0.0, 1.0);
  check_range("task2 score", task2, 0.0, 1.0);
  return 0.4 * task1 + 0.6 * task2;
}

double reference_snr_db(const WaveformSegment& clean, const WaveformSegment& enhanced) {
  check_lengths(clean, enhanced);
  double s = 0.0, e = 0.0;
  for (size_t i = 0; i < clean.samples.size(); ++i) {
    const double d = clean.samples[i] - enhanced.samples[i];
    s += clean.samples[i] * clean.samples[i];
    e += d * d;
  }
  return 10.0 * std::log10(std::max(s, 1e-20) / std::max(e, 1e-20));
}

double mel_distance(const WaveformSegment& clean, const WaveformSegment& enhanced) {
  LossWeights lw;
  lw.lambda_mel = 1.0;
  lw.w_high = 1.0;
  return mel_l1_weighted(clean, enhanced, lw);
}

double mrstft_distance(const WaveformSegment& clean, const WaveformSegment& enhanced) {
  return mrstft(clean, enhanced, MrStftConfig{}, 1.0);
}

void ProviderRegistry::add(const std::string& id, MetricProvider provider) { providers_[id] = std::move(provider); }

void ProviderRegistry::add_command(const std::string& id, const std::string& command_template) {
  add(id, command_provider(command_template));
}

MetricValue ProviderRegistry::evaluate(const std::string& id, const std::string& clean_path,
                                       const std::string& enhanced_path) const {
  const auto it = providers_.find(id);
  if (it == providers_.end()) return {std::nullopt, "provider '" + id + "' is not registered"};
  try {
    const double v = it->second(clean_path, enhanced_path);
    if (!std::isfinite(v)) return {std::nullopt, "provider '" + id + "' returned a non-finite value"};
    return {v, ""};
  } catch (const std::exception& e) {
    return {std::nullopt, "provider '" + id + "' failed: " + e.what()};
  } catch (...) {
    return {std::nullopt, "provider '" + id + "' failed"};
  }
}

MetricProvider command_provider(const std::string& command_template) {
  return [command_template](const std::string& clean, const std::string& enhanced) {
    std::string cmd = std::regex_replace(command_template, std::regex(R"(\{clean\})"), "'" + clean + "'");
    cmd = std::regex_replace(cmd, std::regex(R"(\{enhanced\})"), "'" + enhanced + "'");
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) throw std::runtime_error("cannot start '" + cmd + "'");
    std::string output;
    std::array<char, 256> buf{};
    while (fgets(buf.data(), static_cast<int>(buf.size()), pipe)) output += buf.data();
    const int status = pclose(pipe);
    if (status != 0) throw std::runtime_error("exit status " + std::to_string(status));
    static const std::regex number(R"([-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?|nan|NaN|inf)");
    std::string last;
    for (auto m = std::sregex_iterator(output.begin(), output.end(), number); m != std::sregex_iterator(); ++m)
      last = m->str();
    if (last.empty()) throw std::runtime_error("no number in output");
    return std::stod(last);
  };
}

EvaluationReport evaluate_pairs(const std::vector<EvalPair>& pairs, const ProviderRegistry& registry,
                                const ProviderIds& ids) {
  EvaluationReport report;
  std::map<TaskTag, std::map<std::string, std::vector<double>>> values;
  for (const auto& p : pairs) {
    PairMetrics m;
    m.id = p.id;
    m.task = p.task;
    try {
      const WaveformSegment clean = read_wav(p.clean_path);
      WaveformSegment enhanced = read_wav(p.enhanced_path);
      // Vocoder output may run past the reference by up to one hop.
      if (enhanced.size() > clean.size()) enhanced.samples.resize(clean.samples.size());
      m.cs_mfcc = mfcc_cosine(clean, enhanced);
      m.mel_l1 = mel_distance(clean, enhanced);
      m.mrstft = mrstft_distance(clean, enhanced);
      m.snr_db = reference_snr_db(clean, enhanced);
    } catch (const std::exception& e) {
      report.skipped.push_back(p.id + ": " + e.what());
      continue;
    }
    for (auto [name, slot] : {std::pair{&ids.pesq, &m.pesq}, {&ids.estoi, &m.estoi}, {&ids.dnsmos, &m.dnsmos}}) {
      MetricValue v = registry.evaluate(*name, p.clean_path, p.enhanced_path);
      *slot = v.value;
      if (!v.value) m.diagnostics.push_back(v.diagnostic);
    }
    auto& tv = values[m.task];
    tv["cs_mfcc"].push_back(m.cs_mfcc);
    tv["mel_l1"].push_back(m.mel_l1);
    tv["mrstft"].push_back(m.mrstft);
    tv["snr_db"].push_back(m.snr_db);
    if (m.pesq) tv["pesq"].push_back(*m.pesq);
    if (m.estoi) tv["estoi"].push_back(*m.estoi);
    if (m.dnsmos) tv["dnsmos"].push_back(*m.dnsmos);
    report.pairs.push_back(std::move(m));
  }

  for (auto& [task, tv] : values) {
    TaskSummary s;
    s.pairs = static_cast<int64_t>(tv["cs_mfcc"].size());
    for (const auto& [name, vs] : tv) {
      double sum = 0.0;
      for (double v : vs) sum += v;
      s.means[name] = sum / static_cast<double>(vs.size());
    }
    // A metric counts only when every pair of the task has it.
    auto full = [&](const char* name) -> std::optional<double> {
      const auto it = tv.find(name);
      if (it == tv.end() || static_cast<int64_t>(it->second.size()) != s.pairs) return std::nullopt;
      return s.means[name];
    };
    try {
      if (auto p = full("pesq")) s.pesq_n = normalize_pesq(*p);
      if (auto d = full("dnsmos")) s.dnsmos_n = normalize_dnsmos(*d);
      s.estoi = full("estoi");
      s.cs_clamped = std::max(s.means["cs_mfcc"], 0.0);
      s.score = task_score(s.pesq_n, s.dnsmos_n, s.cs_clamped, s.estoi);
    } catch (const std::exception& e) {
      s.score_diagnostic = e.what();
    }
    report.tasks[task] = std::move(s);
  }
  const auto t1 = report.tasks.find(TaskTag::task1), t2 = report.tasks.find(TaskTag::task2);
  if (t1 != report.tasks.end() && t2 != report.tasks.end() && t1->second.score && t2->second.score) {
    report.weighted = weighted_score(*t1->second.score, *t2->second.score);
  }
  return report;
}

nlohmann::json to_json(const PairMetrics& m) {
  nlohmann::json j = {{"record", "pair"},
                      {"id", m.id},
                      {"task", task_name(m.task)},
                      {"raw",
                       {{"cs_mfcc", m.cs_mfcc},
                        {"mel_l1", m.mel_l1},
                        {"mrstft", m.mrstft},
                        {"snr_db", m.snr_db},
                        {"pesq", optional_json(m.pesq)},
                        {"estoi", optional_json(m.estoi)},
                        {"dnsmos", optional_json(m.dnsmos)}}},
                      {"normalized",
                       {{"cs_mfcc", std::max(m.cs_mfcc, 0.0)},
                        {"pesq", m.pesq ? nlohmann::json(normalize_pesq(std::clamp(*m.pesq, 1.0, 4.5))) : nlohmann::json()},
                        {"dnsmos",
                         m.dnsmos ? nlohmann::json(normalize_dnsmos(std::clamp(*m.dnsmos, 1.0, 5.0))) : nlohmann::json()},
                        {"estoi", optional_json(m.estoi)}}}};
  if (!m.diagnostics.empty()) j["diagnostics"] = m.diagnostics;
  return j;
}

nlohmann::json aggregate_json(const EvaluationReport& r) {
  nlohmann::json tasks = nlohmann::json::object();
  for (const auto& [task, s] : r.tasks) {
    nlohmann::json t = {{"pairs", s.pairs},
                        {"means", s.means},
                        {"normalized",
                         {{"pesq", optional_json(s.pesq_n)},
                          {"dnsmos", optional_json(s.dnsmos_n)},
                          {"cs_mfcc", optional_json(s.cs_clamped)},
                          {"estoi", optional_json(s.estoi)}}},
                        {"task_score", optional_json(s.score)}};
    if (!s.score_diagnostic.empty()) t["task_score_diagnostic"] = s.score_diagnostic;
    tasks[task_name(task)] = t;
  }
  nlohmann::json j = {{"record", "aggregate"}, {"tasks", tasks}, {"weighted_score", optional_json(r.weighted)}};
  if (!r.skipped.empty()) j["skipped"] = r.skipped;
  return j;
}

void write_report(const std::string& path, const EvaluationReport& r) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write report " + path);
  for (const auto& p : r.pairs) out << to_json(p).dump() << "\n";
  out << aggregate_json(r).dump() << "\n";
}

}  // namespace radgan::eval
