#include "radgan/training.hpp"

#include <cmath>
#include <stdexcept>

#include "radgan/ops.hpp"
#include "radgan/seed.hpp"

namespace radgan {

namespace {

constexpr const char* kRngScheme = "counter: mix_seed(seed, epoch, example)";

optim::AdamConfig adam_config(const TrainingConfig& t) { return {t.lr, t.beta1, t.beta2, 1e-8, t.weight_decay}; }

// [B, L] waveform -> [B, 1, n_mels, T] image for the mel discriminator.
Var as_image(const Var& mel) { return ag::reshape(mel, Shape{mel.dim(0), 1, mel.dim(1), mel.dim(2)}); }

Var trim_to(const Var& wave, int64_t len) {
  if (wave.dim(1) < len) throw std::logic_error("generator output shorter than the crop");
  return wave.dim(1) == len ? wave : ag::slice_last(wave, 0, len);
}

bool should_stop(int64_t steps, int64_t max_steps, int64_t epoch, int64_t max_epochs) {
  return steps >= max_steps || (max_epochs > 0 && epoch >= max_epochs);
}

template <typename Session>
std::vector<StepRecord> run_loop(Session& s, const TrainingConfig& t, const RunOptions& opt) {
  const int64_t max_steps = opt.max_steps >= 0 ? opt.max_steps : t.max_steps;
  std::vector<StepRecord> out;
  while (!should_stop(s.steps(), max_steps, s.epochs_completed(), t.max_epochs)) {
    StepRecord r = s.step();
    if (opt.log && (r.step % t.log_interval == 0 || r.step == 1)) opt.log->append(r);
    if (opt.on_step) opt.on_step(r);
    if (!opt.checkpoint_path.empty() && r.step % t.checkpoint_interval == 0) s.save(opt.checkpoint_path);
    out.push_back(std::move(r));
  }
  if (opt.log) opt.log->flush();
  if (!opt.checkpoint_path.empty()) s.save(opt.checkpoint_path);
  return out;
}

void save_optimizer(Archive& a, nlohmann::json& header, optim::Adam& opt, const std::string& prefix) {
  std::vector<nn::NamedBuffer> state;
  opt.collect_state(prefix, state);
  store_tensors(a, state);
  header["optimizers"][prefix] = {{"steps", opt.step_count()}, {"lr", opt.lr()}};
}

void load_optimizer(const Archive& a, optim::Adam& opt, const std::string& prefix) {
  std::vector<nn::NamedBuffer> state;
  opt.collect_state(prefix, state);
  restore_tensors(a, state);
  opt.set_step_count(a.header.at("optimizers").at(prefix).at("steps").get<int64_t>());
}

}  // namespace

nlohmann::json to_json(const StepRecord& r) {
  return {{"step", r.step}, {"epoch", r.epoch}, {"lr", r.lr}, {"loss", r.loss}, {"terms", r.terms}};
}

MetricLog::MetricLog(const std::string& path, int64_t flush_interval)
    : out_(path, std::ios::app), flush_interval_(std::max<int64_t>(1, flush_interval)) {
  if (!out_) throw std::runtime_error("cannot open metric log " + path);
}

void MetricLog::append(const StepRecord& r) {
  out_ << to_json(r).dump() << "\n";
  if (++pending_ >= flush_interval_) {
    out_.flush();
    pending_ = 0;
  }
}

double clip_grad_norm(const std::vector<nn::NamedParam>& params, double max_norm) {
  double ss = 0.0;
  for (const auto& p : params) {
    if (!p.var->has_grad()) continue;
    const Tensor& g = p.var->grad();
    for (int64_t i = 0; i < g.numel(); ++i) ss += g[i] * g[i];
  }
  const double norm = std::sqrt(ss);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (const auto& p : params) {
      if (!p.var->has_grad()) continue;
      Tensor& g = p.var->grad_mut();
      for (int64_t i = 0; i < g.numel(); ++i) g[i] *= s;
    }
  }
  return norm;
}

EpochCursor::EpochCursor(const Dataset& data, int batch_size, int64_t crop_len, uint64_t seed)
    : data_(&data), batch_size_(batch_size), crop_len_(crop_len), seed_(seed) {
  seek(0, 0);
}

void EpochCursor::seek(int64_t epoch, int64_t batch_in_epoch) {
  epoch_ = epoch;
  batch_in_epoch_ = 0;
  it_ = std::make_unique<BatchIterator>(*data_, batch_size_, crop_len_, seed_, epoch_);
  Batch skip;
  while (batch_in_epoch_ < batch_in_epoch) {
    if (!it_->next(skip)) throw std::invalid_argument("cursor position beyond the epoch");
    ++batch_in_epoch_;
  }
}

bool EpochCursor::next(Batch& out) {
  bool rolled = false;
  if (!it_->next(out)) {
    seek(epoch_ + 1, 0);
    rolled = true;
    it_->next(out);
  }
  ++batch_in_epoch_;
  return rolled;
}

nlohmann::json checkpoint_header(const std::string& kind, const std::string& fingerprint, const RunConfig& cfg) {
  return {{"format", kCheckpointFormat},
          {"version", kCheckpointVersion},
          {"kind", kind},
          {"fingerprint", fingerprint},
          {"seed", cfg.seed},
          {"rng", kRngScheme},
          {"config", to_json(cfg)}};
}

Archive open_checkpoint(const std::string& path, const std::vector<std::string>& kinds, const std::string& fingerprint) {
  Archive a = read_archive(path);
  if (a.header.value("format", std::string()) != kCheckpointFormat) {
    throw std::runtime_error(path + " is not a training checkpoint");
  }
  const std::string kind = a.header.value("kind", std::string());
  if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end()) {
    std::string want;
    for (const auto& k : kinds) want += (want.empty() ? "" : " or ") + k;
    throw std::runtime_error(path + " holds a '" + kind + "' checkpoint, expected " + want);
  }
  require_fingerprint(a, fingerprint, path);
  return a;
}

// ---- Phase 1 ---------------------------------------------------------------

namespace {

Dataset bandlimited_pairs(const Dataset& clean, double cutoff_hz) {
  if (clean.examples.empty()) throw std::invalid_argument("pretraining needs a non-empty dataset");
  Dataset d;
  d.examples.reserve(clean.examples.size());
  for (const auto& ex : clean.examples) {
    PairedExample p = ex;
    p.noisy = bandlimit(ex.clean, cutoff_hz);
    d.examples.push_back(std::move(p));
  }
  return d;
}

}  // namespace

PretrainSession::PretrainSession(RunConfig cfg, const Dataset& clean)
    : cfg_((cfg.validate(), std::move(cfg))),
      data_(bandlimited_pairs(clean, cfg_.data.cutoff_hz)),
      generator_(cfg_.model.generator, derive_seed(cfg_.seed, "generator.init")),
      losses_(cfg_.loss, cfg_.mrstft, SpectrogramConfig{}),
      cond_mel_(cfg_.model.stft, cfg_.model.conditioning_mel),
      cursor_(data_, cfg_.pretrain.batch_size, cfg_.pretrain.crop_len, derive_seed(cfg_.seed, "data.pretrain")) {
  if (cfg_.pretrain.phase != Phase::pretrain) throw std::invalid_argument("pretrain session needs phase 'pretrain'");
  generator_.collect("generator", params_);
  opt_ = optim::Adam(params_, adam_config(cfg_.pretrain));
  sched_ = std::make_unique<optim::ExponentialLR>(opt_, cfg_.pretrain.lr_decay_gamma);
}

StepRecord PretrainSession::step() {
  Batch batch;
  if (cursor_.next(batch)) sched_->step();
  const Var x(batch.clean);
  Var cond;
  {
    NoGradGuard ng;
    cond = cond_mel_(Var(batch.noisy));
  }
  const Var xhat = trim_to(generator_.forward(cond), x.dim(1));
  const Var mel = losses_.mel_l1(x, xhat);
  const Var stft = losses_.mrstft(x, xhat);
  const Var total = ag::add(mel, stft);

  opt_.zero_grad();
  backward(total);
  if (cfg_.pretrain.grad_clip > 0.0) clip_grad_norm(params_, cfg_.pretrain.grad_clip);
  StepRecord r;
  r.lr = opt_.lr();
  opt_.step();
  r.step = ++steps_;
  r.epoch = cursor_.epoch();
  r.loss = total.item();
  r.terms = {{"mel", mel.item()}, {"mrstft", stft.item()}};
  return r;
}

std::vector<StepRecord> PretrainSession::run(const RunOptions& opt) { return run_loop(*this, cfg_.pretrain, opt); }

void PretrainSession::save(const std::string& path) {
  Archive a;
  a.header = checkpoint_header("pretrain", model_fingerprint(cfg_.model), cfg_);
  a.header["step"] = steps_;
  a.header["epoch"] = cursor_.epoch();
  a.header["batch_in_epoch"] = cursor_.batch_in_epoch();
  store_tensors(a, params_);
  save_optimizer(a, a.header, opt_, "opt.generator");
  write_archive(path, a);
}

void PretrainSession::load(const std::string& path) {
  const Archive a = open_checkpoint(path, {"pretrain"}, model_fingerprint(cfg_.model));
  restore_tensors(a, params_);
  load_optimizer(a, opt_, "opt.generator");
  steps_ = a.header.at("step").get<int64_t>();
  cursor_.seek(a.header.at("epoch").get<int64_t>(), a.header.at("batch_in_epoch").get<int64_t>());
  sched_->set_epoch(cursor_.epoch());
}

// ---- WVN -------------------------------------------------------------------

WvnModel train_wvn(const Dataset& data, const RunConfig& cfg, WvnTrainReport* report) {
  std::vector<NoisyCleanPair> pairs;
  pairs.reserve(data.examples.size());
  for (const auto& ex : data.examples) pairs.emplace_back(ex.noisy, ex.clean);
  return train_wvn(pairs, cfg.model.wvn, cfg.wvn_training, derive_seed(cfg.seed, "wvn"), report);
}

void save_wvn_checkpoint(const std::string& path, WvnModel& model, const RunConfig& cfg) {
  Archive a;
  a.header = checkpoint_header("wvn", wvn_fingerprint(cfg.model), cfg);
  std::vector<nn::NamedParam> params;
  model.collect("wvn", params);
  store_tensors(a, params);
  write_archive(path, a);
}

WvnModel load_wvn_checkpoint(const std::string& path, const RunConfig& cfg) {
  const Archive a = open_checkpoint(path, {"wvn"}, wvn_fingerprint(cfg.model));
  WvnModel model(cfg.model.wvn, 0);
  std::vector<nn::NamedParam> params;
  model.collect("wvn", params);
  restore_tensors(a, params);
  return model;
}

// ---- Phase 2 ---------------------------------------------------------------

FinetuneSession::FinetuneSession(RunConfig cfg, const Dataset& paired, const FinetuneSources& sources)
    : cfg_((cfg.validate(), std::move(cfg))),
      flags_(cfg_.finetune.ablation),
      data_(paired),
      generator_(cfg_.model.generator, derive_seed(cfg_.seed, "generator.init")),
      gate_(init_gate(cfg_.model.gate_n_mels, derive_seed(cfg_.seed, "gate.init"))),
      losses_(cfg_.loss, cfg_.mrstft, SpectrogramConfig{}),
      cond_mel_(cfg_.model.stft, cfg_.model.conditioning_mel),
      cursor_(data_, cfg_.finetune.batch_size, cfg_.finetune.crop_len, derive_seed(cfg_.seed, "data.finetune")) {
  if (cfg_.finetune.phase != Phase::finetune) throw std::invalid_argument("finetune session needs phase 'finetune'");
  if (data_.examples.empty()) throw std::invalid_argument("fine-tuning needs a non-empty dataset");
  if (flags_.use_pretrained_init && sources.generator_checkpoint.empty()) {
    throw std::invalid_argument("use_pretrained_init requires a pretrained generator checkpoint");
  }
  if (flags_.use_wvn_conditioning && sources.wvn_checkpoint.empty()) {
    throw std::invalid_argument("use_wvn_conditioning requires a WVN checkpoint");
  }

  generator_.collect("generator", g_params_);
  if (flags_.use_pretrained_init) {
    const Archive a =
        open_checkpoint(sources.generator_checkpoint, {"pretrain", "finetune"}, model_fingerprint(cfg_.model));
    restore_tensors(a, g_params_);
  }
  if (flags_.use_wvn_conditioning) {
    WvnModel wvn = load_wvn_checkpoint(sources.wvn_checkpoint, cfg_);
    NoGradGuard ng;
    enhanced_.reserve(data_.examples.size());
    for (const auto& ex : data_.examples) enhanced_.push_back(wvn.enhance(ex.noisy));
    gate_.collect("gate", g_params_);
  }

  mpd_ = std::make_unique<MultiPeriodDiscriminator>(cfg_.model.mpd, derive_seed(cfg_.seed, "mpd.init"));
  msd_ = std::make_unique<MultiScaleDiscriminator>(cfg_.model.msd, derive_seed(cfg_.seed, "msd.init"));
  objective_.families = {DiscriminatorFamily::mpd, DiscriminatorFamily::msd};
  if (flags_.use_mmd) {
    mmd_ = std::make_unique<MultiMelDiscriminator>(cfg_.model.mmd, derive_seed(cfg_.seed, "mmd.init"));
    objective_.families.push_back(DiscriminatorFamily::mmd);
  }
  objective_.use_mrstft = flags_.use_mrstft;
  mpd_->collect("mpd", d_params_);
  msd_->collect("msd", d_params_);
  if (mmd_) mmd_->collect("mmd", d_params_);

  opt_g_ = optim::Adam(g_params_, adam_config(cfg_.finetune));
  opt_d_ = optim::Adam(d_params_, adam_config(cfg_.finetune));
  sched_g_ = std::make_unique<optim::ExponentialLR>(opt_g_, cfg_.finetune.lr_decay_gamma);
  sched_d_ = std::make_unique<optim::ExponentialLR>(opt_d_, cfg_.finetune.lr_decay_gamma);
}

Var FinetuneSession::conditioning(const Tensor& noisy, const Tensor& enhanced) {
  Var m_n, m_w;
  {
    NoGradGuard ng;
    m_n = cond_mel_(Var(noisy));
    if (!flags_.use_wvn_conditioning) return m_n;
    m_w = cond_mel_(Var(enhanced));
  }
  return fuse(m_n, m_w, gate_);
}

std::vector<FamilyOutputs> FinetuneSession::discriminate(const Var& x, const Var& xhat, bool real_grad) {
  std::vector<FamilyOutputs> out;
  auto real_pass = [&](auto&& f) {
    if (real_grad) return f(x);
    NoGradGuard ng;
    return f(x);
  };
  out.push_back({DiscriminatorFamily::mpd, real_pass([&](const Var& v) { return mpd_->forward(v); }),
                 mpd_->forward(xhat)});
  out.push_back({DiscriminatorFamily::msd, real_pass([&](const Var& v) { return msd_->forward(v); }),
                 msd_->forward(xhat)});
  if (mmd_) {
    Var phi_x;
    {
      NoGradGuard ng;
      phi_x = losses_.phi(x);
    }
    out.push_back({DiscriminatorFamily::mmd, real_pass([&](const Var&) { return mmd_->forward(as_image(phi_x)); }),
                   mmd_->forward(as_image(losses_.phi(xhat)))});
  }
  return out;
}

StepRecord FinetuneSession::step() {
  Batch batch;
  if (cursor_.next(batch)) {
    sched_g_->step();
    sched_d_->step();
  }
  Tensor enhanced;
  if (flags_.use_wvn_conditioning) {
    const int64_t b = static_cast<int64_t>(batch.indices.size()), len = batch.clean.dim(1);
    enhanced = Tensor(Shape{b, len});
    for (int64_t i = 0; i < b; ++i) {
      const auto& e = enhanced_[static_cast<size_t>(batch.indices[static_cast<size_t>(i)])].samples;
      std::copy_n(e.begin() + batch.offsets[static_cast<size_t>(i)], len, enhanced.data() + i * len);
    }
  }
  const Var x(batch.clean);
  const Var xhat = trim_to(generator_.forward(conditioning(batch.noisy, enhanced)), x.dim(1));

  StepRecord r;
  r.lr = opt_g_.lr();

  // Discriminator update on detached fakes.
  opt_d_.zero_grad();
  const LossBreakdown d = discriminator_total(discriminate(x, xhat.detach(), true), objective_);
  backward(d.total);
  if (cfg_.finetune.grad_clip > 0.0) clip_grad_norm(d_params_, cfg_.finetune.grad_clip);
  opt_d_.step();

  // Generator update against the refreshed discriminators.
  opt_g_.zero_grad();
  const LossBreakdown g = generator_total(x, xhat, discriminate(x, xhat, false), objective_, losses_);
  backward(g.total);
  if (cfg_.finetune.grad_clip > 0.0) clip_grad_norm(g_params_, cfg_.finetune.grad_clip);
  opt_g_.step();
  opt_d_.zero_grad();

  r.step = ++steps_;
  r.epoch = cursor_.epoch();
  r.loss = g.total.item();
  r.terms = g.terms;
  for (const auto& [k, v] : d.terms) r.terms[k] = v;
  r.terms["d.total"] = d.total.item();
  return r;
}

std::vector<StepRecord> FinetuneSession::run(const RunOptions& opt) { return run_loop(*this, cfg_.finetune, opt); }

std::vector<nn::NamedBuffer> FinetuneSession::buffers() {
  std::vector<nn::NamedBuffer> b;
  msd_->collect_buffers("msd", b);
  if (mmd_) mmd_->collect_buffers("mmd", b);
  opt_g_.collect_state("opt.generator", b);
  opt_d_.collect_state("opt.discriminator", b);
  return b;
}

void FinetuneSession::save(const std::string& path) {
  Archive a;
  a.header = checkpoint_header("finetune", model_fingerprint(cfg_.model), cfg_);
  a.header["step"] = steps_;
  a.header["epoch"] = cursor_.epoch();
  a.header["batch_in_epoch"] = cursor_.batch_in_epoch();
  a.header["ablation"] = {{"use_mmd", flags_.use_mmd},
                          {"use_mrstft", flags_.use_mrstft},
                          {"use_pretrained_init", flags_.use_pretrained_init},
                          {"use_wvn_conditioning", flags_.use_wvn_conditioning}};
  store_tensors(a, g_params_);
  if (!flags_.use_wvn_conditioning) {
    std::vector<nn::NamedParam> gate;
    gate_.collect("gate", gate);
    store_tensors(a, gate);
  }
  store_tensors(a, d_params_);
  store_tensors(a, buffers());
  a.header["optimizers"] = {{"opt.generator", {{"steps", opt_g_.step_count()}}},
                            {"opt.discriminator", {{"steps", opt_d_.step_count()}}}};
  write_archive(path, a);
}

void FinetuneSession::load(const std::string& path) {
  const Archive a = open_checkpoint(path, {"finetune"}, model_fingerprint(cfg_.model));
  restore_tensors(a, g_params_);
  restore_tensors(a, d_params_);
  restore_tensors(a, buffers());
  opt_g_.set_step_count(a.header.at("optimizers").at("opt.generator").at("steps").get<int64_t>());
  opt_d_.set_step_count(a.header.at("optimizers").at("opt.discriminator").at("steps").get<int64_t>());
  steps_ = a.header.at("step").get<int64_t>();
  cursor_.seek(a.header.at("epoch").get<int64_t>(), a.header.at("batch_in_epoch").get<int64_t>());
  sched_g_->set_epoch(cursor_.epoch());
  sched_d_->set_epoch(cursor_.epoch());
}

// ---- Inference -------------------------------------------------------------

InferenceModel load_inference_model(const std::string& path, const RunConfig& cfg) {
  const Archive a = open_checkpoint(path, {"pretrain", "finetune"}, model_fingerprint(cfg.model));
  InferenceModel m;
  m.kind = a.header.at("kind").get<std::string>();
  m.generator = std::make_unique<Generator>(cfg.model.generator, 0);
  std::vector<nn::NamedParam> params;
  m.generator->collect("generator", params);
  restore_tensors(a, params);
  if (m.kind == "finetune") {
    FusionGateParams gate = init_gate(cfg.model.gate_n_mels, 0);
    std::vector<nn::NamedParam> gp;
    gate.collect("gate", gp);
    restore_tensors(a, gp);
    m.gate = gate;
  }
  return m;
}

}  // namespace radgan
