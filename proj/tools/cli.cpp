#include "radgan/cli.hpp"

#include <CLI11.hpp>

#include <Eigen/Core>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>

#include "radgan/config.hpp"
#include "radgan/data_pipeline.hpp"
#include "radgan/evaluation.hpp"
#include "radgan/figure.hpp"
#include "radgan/seed.hpp"
#include "radgan/training.hpp"
#include "radgan/wav.hpp"

namespace fs = std::filesystem;

namespace radgan {

namespace {

// Raised for invalid flag combinations detected after parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::string out;
  bool force = false;
  std::optional<int64_t> max_steps;
  std::string wvn_checkpoint;
  bool no_wvn = false;
  bool determinism = false;
};

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

std::string source_revision() {
  FILE* p = popen("git rev-parse --short HEAD 2>/dev/null", "r");
  if (!p) return "unknown";
  char buf[64] = {0};
  const bool ok = std::fgets(buf, sizeof buf, p) != nullptr;
  pclose(p);
  std::string s = ok ? buf : "";
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s.empty() ? "unknown" : s;
}

class Run {
 public:
  Run(std::string command, const CommonOptions& opt, std::vector<std::string> args)
      : command_(std::move(command)), opt_(opt), args_(std::move(args)) {
    cfg_ = load_run_config(opt.config_path, process_environment());
    if (opt.seed) cfg_.seed = *opt.seed;
    if (opt.determinism) Eigen::setNbThreads(1);
  }

  RunConfig& config() { return cfg_; }
  const fs::path& out() const { return out_; }

  // Creates the output directory and writes the manifest before any work.
  void start(bool must_be_fresh) {
    if (opt_.out.empty()) throw UsageError("--out is required");
    out_ = opt_.out;
    if (must_be_fresh && fs::exists(out_) && !fs::is_empty(out_) && !opt_.force) {
      throw std::runtime_error("output directory " + out_.string() + " exists; pass --force to overwrite");
    }
    fs::create_directories(out_);
    manifest_ = {{"command", command_},
                 {"arguments", args_},
                 {"config_path", opt_.config_path},
                 {"config", to_json(cfg_)},
                 {"model_fingerprint", model_fingerprint(cfg_.model)},
                 {"source_revision", source_revision()},
                 {"determinism", opt_.determinism},
                 {"output_dir", fs::absolute(out_).string()},
                 {"started_at", utc_now()}};
    write_manifest();
  }

  void finish(int code, int64_t errors) {
    if (manifest_.is_null()) return;
    manifest_["finished_at"] = utc_now();
    manifest_["exit_code"] = code;
    manifest_["errors"] = errors;
    write_manifest();
  }

 private:
  void write_manifest() {
    std::ofstream f(out_ / "run_manifest.json", std::ios::trunc);
    f << manifest_.dump(2) << "\n";
  }

  std::string command_;
  CommonOptions opt_;
  std::vector<std::string> args_;
  RunConfig cfg_;
  fs::path out_;
  nlohmann::json manifest_;
};

DegradationSpec degradation_of(const RunConfig& cfg) {
  return {cfg.data.cutoff_hz, cfg.data.snr_low_db, cfg.data.snr_high_db, parse_noise_kind(cfg.data.noise_kind)};
}

SplitSpec split_of(const RunConfig& cfg) {
  SplitSpec s;
  s.train_ratio = cfg.data.train_ratio;
  s.seed = derive_seed(cfg.seed, "split");
  s.degradation = degradation_of(cfg);
  return s;
}

Dataset training_split(const std::string& data_dir, const RunConfig& cfg, std::ostream& out) {
  if (data_dir.empty()) throw UsageError("--data is required");
  DatasetSplit split = build_split(data_dir, split_of(cfg));
  out << "dataset " << data_dir << ": " << split.train.size() << " train, " << split.validation.size()
      << " validation\n";
  return std::move(split.train);
}

std::function<void(const StepRecord&)> progress(std::ostream& out, int64_t interval) {
  return [&out, interval](const StepRecord& r) {
    if (r.step % interval == 0 || r.step == 1) {
      out << "step " << r.step << " epoch " << r.epoch << " lr " << r.lr << " loss " << r.loss << "\n";
      out.flush();
    }
  };
}

int cmd_synth_data(Run& run, std::ostream& out) {
  run.start(true);
  const RunConfig& cfg = run.config();
  const DegradationSpec spec = degradation_of(cfg);
  const int64_t len = static_cast<int64_t>(std::llround(cfg.data.clip_seconds * kSampleRate));
  fs::create_directories(run.out() / "clean");
  fs::create_directories(run.out() / "noisy");
  std::vector<std::string> ids;
  std::map<std::string, double> snrs;
  for (int i = 0; i < cfg.data.synthetic_clips; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "syn%05d", i);
    const uint64_t s = mix_seed(derive_seed(cfg.seed, "synth"), {static_cast<uint64_t>(i)});
    const WaveformSegment clean = synth_speech(len, s);
    const Degraded d = degrade_detailed(clean, spec, derive_seed(s, "degrade"));
    write_wav((run.out() / "clean" / (std::string(id) + ".wav")).string(), clean);
    write_wav((run.out() / "noisy" / (std::string(id) + ".wav")).string(), d.noisy);
    ids.push_back(id);
    snrs[id] = d.target_snr_db;
  }
  const auto [train, val] = partition_ids(ids, cfg.data.train_ratio, derive_seed(cfg.seed, "split"));
  nlohmann::json examples = nlohmann::json::array();
  for (const auto* part : {&train, &val}) {
    for (const auto& id : *part) {
      examples.push_back({{"id", id},
                          {"task", "synthetic"},
                          {"split", part == &train ? "train" : "validation"},
                          {"target_snr_db", snrs[id]}});
    }
  }
  write_manifest((run.out() / "manifest.json").string(),
                 {{"seed", cfg.seed},
                  {"sample_rate", kSampleRate},
                  {"clip_samples", len},
                  {"cutoff_hz", spec.cutoff_hz},
                  {"snr_range_db", {spec.snr_low_db, spec.snr_high_db}},
                  {"noise_kind", cfg.data.noise_kind},
                  {"train", train.size()},
                  {"validation", val.size()},
                  {"examples", examples}});
  out << "wrote " << ids.size() << " pairs (" << train.size() << " train, " << val.size() << " validation) to "
      << run.out().string() << "\n";
  return kExitOk;
}

int cmd_pretrain(Run& run, const CommonOptions& opt, const std::string& data_dir, std::ostream& out) {
  run.start(true);
  RunConfig& cfg = run.config();
  const Dataset train = training_split(data_dir, cfg, out);
  PretrainSession session(cfg, train);
  MetricLog log((run.out() / "metrics.jsonl").string(), cfg.pretrain.log_interval);
  RunOptions ro;
  ro.max_steps = opt.max_steps.value_or(-1);
  ro.log = &log;
  ro.checkpoint_path = (run.out() / "generator.ckpt").string();
  ro.on_step = progress(out, cfg.pretrain.log_interval);
  session.run(ro);
  out << "checkpoint " << ro.checkpoint_path << " at step " << session.steps() << "\n";
  return kExitOk;
}

int cmd_train_wvn(Run& run, const std::string& data_dir, std::ostream& out) {
  run.start(true);
  const RunConfig& cfg = run.config();
  const Dataset train = training_split(data_dir, cfg, out);
  WvnTrainReport report;
  WvnModel model = train_wvn(train, cfg, &report);
  const std::string path = (run.out() / "wvn.ckpt").string();
  save_wvn_checkpoint(path, model, cfg);
  std::ofstream log(run.out() / "metrics.jsonl");
  for (size_t e = 0; e < report.epoch_losses.size(); ++e) {
    log << nlohmann::json{{"epoch", e}, {"loss", report.epoch_losses[e]}}.dump() << "\n";
    out << "epoch " << e << " mse " << report.epoch_losses[e] << "\n";
  }
  out << "checkpoint " << path << " after " << report.updates << " updates\n";
  return kExitOk;
}

int cmd_finetune(Run& run, const CommonOptions& opt, const std::string& data_dir, const std::string& generator_ckpt,
                 const std::string& ablation, std::ostream& out) {
  RunConfig& cfg = run.config();
  if (!ablation.empty()) cfg.finetune.ablation = AblationFlags::named(ablation);
  if (opt.no_wvn) cfg.finetune.ablation.use_wvn_conditioning = false;
  if (cfg.finetune.ablation.use_wvn_conditioning && opt.wvn_checkpoint.empty()) {
    throw UsageError("--wvn-checkpoint is required while WVN conditioning is enabled (or pass --no-wvn)");
  }
  if (cfg.finetune.ablation.use_pretrained_init && generator_ckpt.empty()) {
    throw UsageError("--generator-checkpoint is required while use_pretrained_init is enabled");
  }
  run.start(true);
  const Dataset train = training_split(data_dir, cfg, out);
  FinetuneSession session(cfg, train, {generator_ckpt, opt.wvn_checkpoint});
  MetricLog log((run.out() / "metrics.jsonl").string(), cfg.finetune.log_interval);
  RunOptions ro;
  ro.max_steps = opt.max_steps.value_or(-1);
  ro.log = &log;
  ro.checkpoint_path = (run.out() / "finetune.ckpt").string();
  ro.on_step = progress(out, cfg.finetune.log_interval);
  session.run(ro);
  out << "checkpoint " << ro.checkpoint_path << " at step " << session.steps() << "\n";
  return kExitOk;
}

int cmd_infer(Run& run, const CommonOptions& opt, const std::string& checkpoint, const std::vector<std::string>& inputs,
              std::ostream& out, std::ostream& err, int64_t& errors) {
  if (checkpoint.empty()) throw UsageError("--checkpoint is required");
  const RunConfig& cfg = run.config();
  InferenceModel model = load_inference_model(checkpoint, cfg);
  const bool fused = model.gate.has_value() && !opt.no_wvn;
  if (fused && opt.wvn_checkpoint.empty()) {
    throw UsageError("--wvn-checkpoint is required for a fine-tuned checkpoint (or pass --no-wvn)");
  }
  run.start(false);
  std::optional<WvnModel> wvn;
  if (fused) wvn.emplace(load_wvn_checkpoint(opt.wvn_checkpoint, cfg));
  const MelTransform mel(cfg.model.stft, cfg.model.conditioning_mel);
  NoGradGuard ng;
  for (const auto& path : inputs) {
    try {
      const WaveformSegment noisy = read_wav(path);
      MelSpectrogram cond = mel(noisy);
      if (fused) cond = fuse(cond, mel(wvn->enhance(noisy)), *model.gate);
      const WaveformSegment y = model.generator->synthesize(cond);
      const fs::path target = run.out() / fs::path(path).filename();
      write_wav(target.string(), y);
      out << path << " -> " << target.string() << " (" << y.size() << " samples)\n";
    } catch (const std::exception& e) {
      err << "error: " << path << ": " << e.what() << "\n";
      ++errors;
    }
  }
  return errors == 0 ? kExitOk : kExitFailure;
}

int cmd_evaluate(Run& run, const std::string& clean_dir, const std::string& enhanced_dir, const std::string& manifest,
                 const std::string& task, const std::vector<std::string>& providers, std::ostream& out,
                 std::ostream& err, int64_t& errors) {
  if (clean_dir.empty() || enhanced_dir.empty()) throw UsageError("--clean and --enhanced are required");
  eval::ProviderRegistry registry;
  for (const auto& spec : providers) {
    const size_t eq = spec.find('=');
    if (eq == std::string::npos) throw UsageError("--provider expects ID=COMMAND, got '" + spec + "'");
    registry.add_command(spec.substr(0, eq), spec.substr(eq + 1));
  }
  run.start(false);
  std::map<std::string, TaskTag> tags;
  if (!manifest.empty()) {
    const nlohmann::json m = read_manifest(manifest);
    for (const auto& e : m.at("examples")) {
      tags[e.at("id")] = parse_task(e.value("task", std::string("synthetic")));
    }
  }
  std::vector<eval::EvalPair> pairs;
  std::vector<std::string> ids;
  for (const auto& e : fs::directory_iterator(clean_dir))
    if (e.path().extension() == ".wav") ids.push_back(e.path().stem().string());
  std::sort(ids.begin(), ids.end());
  for (const auto& id : ids) {
    const TaskTag t = tags.count(id) ? tags[id] : parse_task(task);
    pairs.push_back({id, t, (fs::path(clean_dir) / (id + ".wav")).string(),
                     (fs::path(enhanced_dir) / (id + ".wav")).string()});
  }
  const eval::EvaluationReport report = eval::evaluate_pairs(pairs, registry);
  const std::string path = (run.out() / "report.jsonl").string();
  eval::write_report(path, report);
  for (const auto& s : report.skipped) err << "skipped " << s << "\n";
  out << "evaluated " << report.pairs.size() << " pairs, report " << path << "\n";
  out << eval::aggregate_json(report).dump() << "\n";
  errors += static_cast<int64_t>(report.skipped.size());
  return errors == 0 ? kExitOk : kExitFailure;
}

int cmd_plot(Run& run, const std::vector<std::pair<std::string, std::string>>& signals, std::ostream& out) {
  std::vector<WaveformSegment> columns;
  std::vector<std::string> names;
  for (const auto& [name, path] : signals) {
    if (path.empty()) continue;
    columns.push_back(read_wav(path));
    names.push_back(name);
  }
  if (columns.empty()) throw UsageError("plot needs at least one of --clean, --noisy, --wvn, --radgan");
  run.start(false);
  const std::string path = (run.out() / "comparison.png").string();
  write_png(path, comparison_figure(columns));
  std::string order;
  for (const auto& n : names) order += (order.empty() ? "" : ", ") + n;
  out << "wrote " << path << " with columns: " << order << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Radar speech enhancement: data synthesis, training, inference and evaluation", "radgan"};
  app.require_subcommand(1);
  CommonOptions opt;
  auto add_common = [&](CLI::App* sub, bool training) {
    sub->add_option("--config", opt.config_path, "JSON run configuration");
    sub->add_option("--seed", opt.seed, "Root seed, overriding the config");
    sub->add_option("--out", opt.out, "Output directory")->required();
    sub->add_flag("--determinism", opt.determinism, "Single-threaded, fixed-seed execution");
    if (training) {
      sub->add_flag("--force", opt.force, "Allow writing into a non-empty output directory");
      sub->add_option("--max-steps", opt.max_steps, "Override the phase's step budget");
    }
  };

  std::string data_dir, generator_ckpt, ablation, checkpoint, clean_dir, enhanced_dir, manifest, task = "synthetic";
  std::vector<std::string> inputs, providers;
  std::string p_clean, p_noisy, p_wvn, p_radgan;

  CLI::App* synth = app.add_subcommand("synth-data", "Generate a paired synthetic corpus with a manifest");
  add_common(synth, true);

  CLI::App* pre = app.add_subcommand("pretrain", "Phase 1: generator pretraining on band-limited clean speech");
  add_common(pre, true);
  pre->add_option("--data", data_dir, "Corpus directory")->required();

  CLI::App* wvn = app.add_subcommand("train-wvn", "Train the magnitude-domain enhancer");
  add_common(wvn, true);
  wvn->add_option("--data", data_dir, "Corpus directory")->required();

  CLI::App* ft = app.add_subcommand("finetune", "Phase 2: adversarial fine-tuning");
  add_common(ft, true);
  ft->add_option("--data", data_dir, "Corpus directory")->required();
  ft->add_option("--generator-checkpoint", generator_ckpt, "Phase 1 checkpoint");
  ft->add_option("--wvn-checkpoint", opt.wvn_checkpoint, "WVN checkpoint");
  ft->add_flag("--no-wvn", opt.no_wvn, "Condition on the noisy mel only");
  ft->add_option("--ablation", ablation, "Flag preset B0, B1, B2 or B3");

  CLI::App* inf = app.add_subcommand("infer", "Enhance WAV files with a trained generator");
  add_common(inf, false);
  inf->add_option("--checkpoint", checkpoint, "Generator checkpoint (pretrain or finetune)")->required();
  inf->add_option("--wvn-checkpoint", opt.wvn_checkpoint, "WVN checkpoint for fused conditioning");
  inf->add_flag("--no-wvn", opt.no_wvn, "Condition on the noisy mel only");
  inf->add_option("inputs", inputs, "Input WAV files")->required();

  CLI::App* ev = app.add_subcommand("evaluate", "Score enhanced files against clean references");
  add_common(ev, false);
  ev->add_option("--clean", clean_dir, "Directory of clean references")->required();
  ev->add_option("--enhanced", enhanced_dir, "Directory of enhanced files with matching names")->required();
  ev->add_option("--manifest", manifest, "Corpus manifest supplying task tags");
  ev->add_option("--task", task, "Task tag for ids absent from the manifest");
  ev->add_option("--provider", providers, "External metric ID=COMMAND with {clean} and {enhanced} placeholders");

  CLI::App* plot = app.add_subcommand("plot", "Waveform and spectrogram grid of up to four signals");
  add_common(plot, false);
  plot->add_option("--clean", p_clean, "Clean reference");
  plot->add_option("--noisy", p_noisy, "Noisy input");
  plot->add_option("--wvn", p_wvn, "WVN output");
  plot->add_option("--radgan", p_radgan, "Generator output");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  std::optional<Run> run;
  int64_t errors = 0;
  int code = kExitFailure;
  try {
    run.emplace(sub->get_name(), opt, args);
    if (sub == synth) code = cmd_synth_data(*run, out);
    if (sub == pre) code = cmd_pretrain(*run, opt, data_dir, out);
    if (sub == wvn) code = cmd_train_wvn(*run, data_dir, out);
    if (sub == ft) code = cmd_finetune(*run, opt, data_dir, generator_ckpt, ablation, out);
    if (sub == inf) code = cmd_infer(*run, opt, checkpoint, inputs, out, err, errors);
    if (sub == ev) code = cmd_evaluate(*run, clean_dir, enhanced_dir, manifest, task, providers, out, err, errors);
    if (sub == plot) {
      code = cmd_plot(*run, {{"clean", p_clean}, {"noisy", p_noisy}, {"wvn", p_wvn}, {"radgan", p_radgan}}, out);
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    code = kExitUsage;
    ++errors;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    code = kExitFailure;
    ++errors;
  }
  if (run) run->finish(code, errors);
  return code;
}

}  // namespace radgan
