#include "radgan/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "radgan/seed.hpp"

extern char** environ;

namespace radgan {

using nlohmann::json;

AblationFlags AblationFlags::named(const std::string& name) {
  std::string n = name;
  std::transform(n.begin(), n.end(), n.begin(), [](unsigned char c) { return std::toupper(c); });
  if (n == "B0") return b0();
  if (n == "B1") return b1();
  if (n == "B2") return b2();
  if (n == "B3") return b3();
  throw std::invalid_argument("unknown ablation '" + name + "' (expected B0..B3)");
}

TrainingConfig TrainingConfig::pretrain_defaults() {
  TrainingConfig c;
  c.phase = Phase::pretrain;
  c.max_steps = 66000;
  return c;
}

TrainingConfig TrainingConfig::finetune_defaults() {
  TrainingConfig c;
  c.phase = Phase::finetune;
  c.max_steps = 100000;
  return c;
}

void TrainingConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("training: lr must be positive");
  if (!(lr_decay_gamma > 0.0 && lr_decay_gamma <= 1.0)) throw std::invalid_argument("training: lr_decay_gamma must lie in (0, 1]");
  if (batch_size < 1) throw std::invalid_argument("training: batch_size must be at least 1");
  if (crop_len < 1 || max_steps < 0 || max_epochs < 0 || grad_clip < 0.0 || log_interval < 1) {
    throw std::invalid_argument("training: invalid step, crop or logging settings");
  }
}

RunConfig RunConfig::toy() {
  RunConfig c;
  c.model.generator = GeneratorConfig::toy();
  c.model.mpd = MpdConfig::toy();
  c.model.msd = MsdConfig::toy();
  c.model.wvn = WvnConfig::toy();
  // The toy generator hop is 32, so conditioning frames use the same hop.
  c.model.stft.hop = c.model.generator.hop();
  for (TrainingConfig* t : {&c.pretrain, &c.finetune}) {
    t->batch_size = 4;
    t->crop_len = 2048;
    t->max_steps = 200;
    t->log_interval = 10;
    t->checkpoint_interval = 100;
  }
  // Tiny models on a few clips tolerate a much larger step than the full model.
  c.pretrain.lr = 4e-3;
  c.wvn_training.epochs = 5;
  c.wvn_training.batch_size = 4;
  c.wvn_training.grad_accum = 2;
  c.wvn_training.crop_len = 2048;
  c.data.synthetic_clips = 16;
  c.data.clip_seconds = 1.0;
  return c;
}

void RunConfig::validate() const {
  model.stft.validate();
  model.conditioning_mel.validate(kSampleRate);
  model.generator.validate();
  if (model.generator.hop() != model.stft.hop) {
    throw std::invalid_argument("generator upsampling product " + std::to_string(model.generator.hop()) +
                                " must equal the STFT hop " + std::to_string(model.stft.hop));
  }
  if (model.generator.n_mels != model.conditioning_mel.n_mels || model.gate_n_mels != model.conditioning_mel.n_mels) {
    throw std::invalid_argument("generator, gate and conditioning mel must agree on n_mels");
  }
  loss.validate();
  mrstft.validate();
  pretrain.validate();
  finetune.validate();
  if (data.snr_low_db > data.snr_high_db) throw std::invalid_argument("data: snr range is inverted");
  if (!(data.train_ratio > 0.0 && data.train_ratio < 1.0)) throw std::invalid_argument("data: train_ratio must lie in (0, 1)");
}

namespace {

std::string phase_name(Phase p) { return p == Phase::pretrain ? "pretrain" : "finetune"; }

Phase parse_phase(const std::string& s) {
  if (s == "pretrain") return Phase::pretrain;
  if (s == "finetune") return Phase::finetune;
  throw std::invalid_argument("unknown phase '" + s + "'");
}

json stft_json(const SpectrogramConfig& s) {
  return {{"n_fft", s.n_fft}, {"hop", s.hop}, {"win_length", s.win_length}, {"window", "hann"}};
}

SpectrogramConfig stft_from(const json& j) {
  SpectrogramConfig s;
  s.n_fft = j.at("n_fft");
  s.hop = j.at("hop");
  s.win_length = j.at("win_length");
  if (j.value("window", std::string("hann")) != "hann") throw std::invalid_argument("only the hann window is supported");
  return s;
}

json mel_json(const MelConfig& m) {
  return {{"n_mels", m.n_mels}, {"f_min", m.f_min}, {"f_max", m.f_max}, {"log_floor", m.log_floor}};
}

MelConfig mel_from(const json& j) { return {j.at("n_mels"), j.at("f_min"), j.at("f_max"), j.at("log_floor")}; }

json training_json(const TrainingConfig& t) {
  return {{"phase", phase_name(t.phase)},
          {"lr", t.lr},
          {"betas", {t.beta1, t.beta2}},
          {"weight_decay", t.weight_decay},
          {"lr_decay_gamma", t.lr_decay_gamma},
          {"batch_size", t.batch_size},
          {"crop_len", t.crop_len},
          {"max_steps", t.max_steps},
          {"max_epochs", t.max_epochs},
          {"grad_clip", t.grad_clip},
          {"log_interval", t.log_interval},
          {"checkpoint_interval", t.checkpoint_interval},
          {"ablation",
           {{"use_mmd", t.ablation.use_mmd},
            {"use_mrstft", t.ablation.use_mrstft},
            {"use_pretrained_init", t.ablation.use_pretrained_init},
            {"use_wvn_conditioning", t.ablation.use_wvn_conditioning}}}};
}

TrainingConfig training_from(const json& j) {
  TrainingConfig t;
  t.phase = parse_phase(j.at("phase"));
  t.lr = j.at("lr");
  t.beta1 = j.at("betas").at(0);
  t.beta2 = j.at("betas").at(1);
  t.weight_decay = j.at("weight_decay");
  t.lr_decay_gamma = j.at("lr_decay_gamma");
  t.batch_size = j.at("batch_size");
  t.crop_len = j.at("crop_len");
  t.max_steps = j.at("max_steps");
  t.max_epochs = j.at("max_epochs");
  t.grad_clip = j.at("grad_clip");
  t.log_interval = j.at("log_interval");
  t.checkpoint_interval = j.at("checkpoint_interval");
  const json& a = j.at("ablation");
  t.ablation = {a.at("use_mmd"), a.at("use_mrstft"), a.at("use_pretrained_init"), a.at("use_wvn_conditioning")};
  return t;
}

json model_json(const ModelConfig& m) {
  const GeneratorConfig& g = m.generator;
  return {{"stft", stft_json(m.stft)},
          {"conditioning_mel", mel_json(m.conditioning_mel)},
          {"generator",
           {{"upsample_rates", g.upsample_rates},
            {"upsample_kernels", g.upsample_kernels},
            {"base_channels", g.base_channels},
            {"mrf_kernels", g.mrf_kernels},
            {"mrf_dilations", g.mrf_dilations},
            {"n_mels", g.n_mels},
            {"init_std", g.init_std}}},
          {"mpd",
           {{"periods", m.mpd.periods}, {"channels", m.mpd.channels}, {"kernel", m.mpd.kernel}, {"stride", m.mpd.stride}}},
          {"msd",
           {{"channels", m.msd.channels},
            {"kernels", m.msd.kernels},
            {"strides", m.msd.strides},
            {"groups", m.msd.groups},
            {"scales", m.msd.scales}}},
          {"mmd", {{"channel_plan", m.mmd.channel_plan}, {"strides", m.mmd.strides}}},
          {"wvn",
           {{"stft", stft_json(m.wvn.stft)},
            {"channels", m.wvn.channels},
            {"time_dilations", m.wvn.time_dilations},
            {"head_init_std", m.wvn.head_init_std}}},
          {"gate", {{"n_mels", m.gate_n_mels}}}};
}

ModelConfig model_from(const json& j) {
  ModelConfig m;
  m.stft = stft_from(j.at("stft"));
  m.conditioning_mel = mel_from(j.at("conditioning_mel"));
  const json& g = j.at("generator");
  m.generator.upsample_rates = g.at("upsample_rates").get<std::vector<int>>();
  m.generator.upsample_kernels = g.at("upsample_kernels").get<std::vector<int>>();
  m.generator.base_channels = g.at("base_channels");
  m.generator.mrf_kernels = g.at("mrf_kernels").get<std::vector<int>>();
  m.generator.mrf_dilations = g.at("mrf_dilations").get<std::vector<std::vector<int>>>();
  m.generator.n_mels = g.at("n_mels");
  m.generator.init_std = g.at("init_std");
  const json& p = j.at("mpd");
  m.mpd = {p.at("periods").get<std::vector<int>>(), p.at("channels").get<std::vector<int>>(), p.at("kernel"),
           p.at("stride")};
  const json& s = j.at("msd");
  m.msd = {s.at("channels").get<std::vector<int>>(), s.at("kernels").get<std::vector<int>>(),
           s.at("strides").get<std::vector<int>>(), s.at("groups").get<std::vector<int>>(), s.at("scales")};
  const json& d = j.at("mmd");
  m.mmd = {d.at("channel_plan").get<std::vector<int>>(), d.at("strides").get<std::vector<int>>()};
  const json& w = j.at("wvn");
  m.wvn.stft = stft_from(w.at("stft"));
  m.wvn.channels = w.at("channels");
  m.wvn.time_dilations = w.at("time_dilations").get<std::vector<int>>();
  m.wvn.head_init_std = w.at("head_init_std");
  m.gate_n_mels = j.at("gate").at("n_mels");
  return m;
}

// Merges `patch` into `base`, rejecting keys the base does not have.
void merge_known(json& base, const json& patch, const std::string& path) {
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key_path = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) throw std::invalid_argument("unknown config key '" + key_path + "'");
    json& target = base[it.key()];
    if (target.is_object() && it.value().is_object()) {
      merge_known(target, it.value(), key_path);
    } else {
      target = it.value();
    }
  }
}

std::string hex64(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

json to_json(const RunConfig& c) {
  return {{"seed", c.seed},
          {"model", model_json(c.model)},
          {"loss",
           {{"lambda_mel", c.loss.lambda_mel},
            {"lambda_stft", c.loss.lambda_stft},
            {"w_high", c.loss.w_high},
            {"f_c", c.loss.f_c},
            {"gamma_adv", c.loss.gamma_adv},
            {"lambda_fm", c.loss.lambda_fm}}},
          {"mrstft",
           {{"fft_sizes", c.mrstft.fft_sizes},
            {"hops", c.mrstft.hops},
            {"wins", c.mrstft.wins},
            {"w_sc", c.mrstft.w_sc},
            {"w_logmag", c.mrstft.w_logmag},
            {"w_linmag", c.mrstft.w_linmag}}},
          {"pretrain", training_json(c.pretrain)},
          {"finetune", training_json(c.finetune)},
          {"wvn_training",
           {{"epochs", c.wvn_training.epochs},
            {"lr", c.wvn_training.lr},
            {"batch_size", c.wvn_training.batch_size},
            {"grad_accum", c.wvn_training.grad_accum},
            {"crop_len", c.wvn_training.crop_len}}},
          {"data",
           {{"cutoff_hz", c.data.cutoff_hz},
            {"snr_range_db", {c.data.snr_low_db, c.data.snr_high_db}},
            {"noise_kind", c.data.noise_kind},
            {"train_ratio", c.data.train_ratio},
            {"clip_seconds", c.data.clip_seconds},
            {"synthetic_clips", c.data.synthetic_clips}}}};
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  c.seed = j.at("seed");
  c.model = model_from(j.at("model"));
  const json& l = j.at("loss");
  c.loss = {l.at("lambda_mel"), l.at("lambda_stft"), l.at("w_high"), l.at("f_c"), l.at("gamma_adv"), l.at("lambda_fm")};
  const json& r = j.at("mrstft");
  c.mrstft = {r.at("fft_sizes").get<std::vector<int>>(), r.at("hops").get<std::vector<int>>(),
              r.at("wins").get<std::vector<int>>(), r.at("w_sc"), r.at("w_logmag"), r.at("w_linmag")};
  c.pretrain = training_from(j.at("pretrain"));
  c.finetune = training_from(j.at("finetune"));
  const json& w = j.at("wvn_training");
  c.wvn_training = {w.at("epochs"), w.at("lr"), w.at("batch_size"), w.at("grad_accum"), w.at("crop_len")};
  const json& d = j.at("data");
  c.data.cutoff_hz = d.at("cutoff_hz");
  c.data.snr_low_db = d.at("snr_range_db").at(0);
  c.data.snr_high_db = d.at("snr_range_db").at(1);
  c.data.noise_kind = d.at("noise_kind");
  c.data.train_ratio = d.at("train_ratio");
  c.data.clip_seconds = d.at("clip_seconds");
  c.data.synthetic_clips = d.at("synthetic_clips");
  return c;
}

void apply_env_overrides(json& j, const std::map<std::string, std::string>& env, const std::string& prefix) {
  for (const auto& [name, raw] : env) {
    if (name.rfind(prefix, 0) != 0) continue;
    std::string rest = name.substr(prefix.size());
    std::transform(rest.begin(), rest.end(), rest.begin(), [](unsigned char c) { return std::tolower(c); });
    json* node = &j;
    size_t pos = 0;
    while (true) {
      const size_t sep = rest.find("__", pos);
      const std::string key = rest.substr(pos, sep == std::string::npos ? std::string::npos : sep - pos);
      if (!node->is_object() || !node->contains(key)) {
        throw std::invalid_argument("environment override " + name + " names an unknown config key");
      }
      node = &(*node)[key];
      if (sep == std::string::npos) break;
      pos = sep + 2;
    }
    json value = json::parse(raw, nullptr, false);
    *node = value.is_discarded() ? json(raw) : value;
  }
}

std::map<std::string, std::string> process_environment() {
  std::map<std::string, std::string> env;
  for (char** e = environ; e && *e; ++e) {
    const std::string entry(*e);
    const size_t eq = entry.find('=');
    if (eq != std::string::npos) env.emplace(entry.substr(0, eq), entry.substr(eq + 1));
  }
  return env;
}

RunConfig load_run_config(const std::string& path, const std::map<std::string, std::string>& env) {
  json j = to_json(RunConfig{});
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path);
    json file = json::parse(in);
    // A "preset" key selects the baseline the file's values are laid over.
    if (file.contains("preset")) {
      const std::string preset = file.at("preset");
      if (preset == "toy") {
        j = to_json(RunConfig::toy());
      } else if (preset != "full") {
        throw std::invalid_argument("unknown preset '" + preset + "'");
      }
      file.erase("preset");
    }
    merge_known(j, file, "");
  }
  apply_env_overrides(j, env);
  RunConfig c = run_config_from_json(j);
  c.validate();
  return c;
}

std::string model_fingerprint(const ModelConfig& m) { return hex64(fnv1a(model_json(m).dump())); }

std::string wvn_fingerprint(const ModelConfig& m) { return hex64(fnv1a(model_json(m).at("wvn").dump())); }

}  // namespace radgan
