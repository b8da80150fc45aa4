#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "radgan/training.hpp"

namespace fs = std::filesystem;

namespace radgan {
namespace {

Dataset toy_data(int n, int64_t len = 4096) {
  Dataset d;
  for (int i = 0; i < n; ++i) {
    PairedExample ex;
    ex.id = "t" + std::to_string(i);
    ex.clean = synth_speech(len, 10 + i);
    ex.noisy = degrade(ex.clean, {}, 20 + i);
    d.examples.push_back(std::move(ex));
  }
  return d;
}

RunConfig tiny_config() {
  RunConfig c = RunConfig::toy();
  for (TrainingConfig* t : {&c.pretrain, &c.finetune}) {
    t->batch_size = 2;
    t->crop_len = 1024;
  }
  c.wvn_training.epochs = 1;
  c.wvn_training.batch_size = 2;
  c.wvn_training.grad_accum = 1;
  c.wvn_training.crop_len = 1024;
  return c;
}

fs::path tmp(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("radgan_train_" + name);
  fs::remove(p);
  return p;
}

std::string bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

TEST(Training, FullScaleDefaults) {
  const TrainingConfig p = TrainingConfig::pretrain_defaults();
  EXPECT_DOUBLE_EQ(p.lr, 1e-4);
  EXPECT_DOUBLE_EQ(p.beta1, 0.9);
  EXPECT_DOUBLE_EQ(p.beta2, 0.99);
  EXPECT_DOUBLE_EQ(p.lr_decay_gamma, 0.999);
  EXPECT_EQ(p.batch_size, 16);
  EXPECT_EQ(p.max_steps, 66000);
  EXPECT_EQ(TrainingConfig::finetune_defaults().max_steps, 100000);
  EXPECT_EQ(RunConfig::full().model.conditioning_mel.f_min, 0.0);
  EXPECT_EQ(RunConfig::full().model.conditioning_mel.f_max, 1000.0);
}

TEST(Training, AblationPresetsMatchTheirFlagSets) {
  EXPECT_EQ(AblationFlags::named("B0"), (AblationFlags{false, false, false, false}));
  EXPECT_EQ(AblationFlags::named("B3"), (AblationFlags{true, true, true, true}));
}

TEST(Training, PretrainNeverConstructsDiscriminatorsAndLowersLoss) {
  reset_discriminator_constructions();
  RunConfig cfg = tiny_config();
  cfg.pretrain.lr = 2e-3;
  PretrainSession s(cfg, toy_data(4));
  const auto records = s.run({.max_steps = 30});
  ASSERT_EQ(records.size(), 30u);
  for (auto f : {DiscriminatorFamily::mpd, DiscriminatorFamily::msd, DiscriminatorFamily::mmd})
    EXPECT_EQ(discriminator_constructions(f), 0);
  EXPECT_LT(records.back().loss, records.front().loss);
  for (const auto& r : records) {
    EXPECT_NEAR(r.loss, r.terms.at("mel") + r.terms.at("mrstft"), 1e-9);
    EXPECT_EQ(r.terms.size(), 2u);
  }
}

TEST(Training, LearningRateStepsOncePerEpoch) {
  // 4 clips at batch 2: two updates per epoch.
  RunConfig cfg = tiny_config();
  cfg.pretrain.lr = 1e-4;
  PretrainSession s(cfg, toy_data(4));
  const auto records = s.run({.max_steps = 7});
  for (const auto& r : records) {
    EXPECT_EQ(r.epoch, (r.step - 1) / 2);
    EXPECT_DOUBLE_EQ(r.lr, optim::ExponentialLR::lr_at(1e-4, 0.999, r.epoch));
  }
}

TEST(Training, MaxEpochsStopsFirst) {
  RunConfig cfg = tiny_config();
  cfg.pretrain.max_epochs = 2;
  PretrainSession s(cfg, toy_data(4));
  EXPECT_EQ(s.run({.max_steps = 100}).size(), 4u);
}

TEST(Training, EmptyDatasetIsRejected) { EXPECT_THROW(PretrainSession(tiny_config(), Dataset{}), std::invalid_argument); }

TEST(Training, PretrainResumeMatchesUninterruptedRun) {
  const Dataset data = toy_data(6);
  PretrainSession full(tiny_config(), data);
  const auto reference = full.run({.max_steps = 10});

  const fs::path ck = tmp("resume.ckpt");
  PretrainSession first(tiny_config(), data);
  const auto head = first.run({.max_steps = 5, .checkpoint_path = ck.string()});
  PretrainSession second(tiny_config(), data);
  second.load(ck.string());
  const auto tail = second.run({.max_steps = 10});
  ASSERT_EQ(tail.size(), 5u);
  for (size_t i = 0; i < 5; ++i) {
    EXPECT_NEAR(head[i].loss, reference[i].loss, 1e-6);
    EXPECT_NEAR(tail[i].loss, reference[5 + i].loss, 1e-6) << "step " << tail[i].step;
    EXPECT_EQ(tail[i].step, reference[5 + i].step);
  }
  fs::remove(ck);
}

TEST(Training, CheckpointSaveLoadSaveIsByteIdentical) {
  const Dataset data = toy_data(4);
  const fs::path a = tmp("a.ckpt"), b = tmp("b.ckpt");
  PretrainSession s(tiny_config(), data);
  s.run({.max_steps = 3});
  s.save(a.string());
  PretrainSession t(tiny_config(), data);
  t.load(a.string());
  t.save(b.string());
  EXPECT_EQ(bytes(a), bytes(b));

  const InferenceModel m = load_inference_model(a.string(), tiny_config());
  std::vector<nn::NamedParam> pa, pb;
  s.generator().collect("g", pa);
  m.generator->collect("g", pb);
  for (size_t i = 0; i < pa.size(); ++i) {
    for (int64_t k = 0; k < pa[i].var->numel(); ++k) ASSERT_EQ(pa[i].var->value()[k], pb[i].var->value()[k]);
  }
  fs::remove(a);
  fs::remove(b);
}

TEST(Training, ChangedMelConfigFailsTheFingerprint) {
  const fs::path ck = tmp("fp.ckpt");
  PretrainSession s(tiny_config(), toy_data(2));
  s.save(ck.string());
  RunConfig other = tiny_config();
  other.model.conditioning_mel.f_max = 2000.0;
  PretrainSession t(other, toy_data(2));
  try {
    t.load(ck.string());
    FAIL() << "expected a fingerprint error";
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find(model_fingerprint(tiny_config().model)), std::string::npos);
    EXPECT_NE(msg.find(model_fingerprint(other.model)), std::string::npos);
  }
  fs::remove(ck);
}

TEST(Training, FinetuneNeedsItsCheckpoints) {
  RunConfig cfg = tiny_config();
  cfg.finetune.ablation = AblationFlags::b3();
  try {
    FinetuneSession(cfg, toy_data(2), {"some.ckpt", ""});
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("WVN checkpoint"), std::string::npos);
  }
  cfg.finetune.ablation = AblationFlags::b2();
  EXPECT_THROW(FinetuneSession(cfg, toy_data(2)), std::invalid_argument);
}

TEST(Training, B0ConstructsOnlyMpdAndMsdAndDropsMrStft) {
  reset_discriminator_constructions();
  RunConfig cfg = tiny_config();
  cfg.finetune.ablation = AblationFlags::b0();
  FinetuneSession s(cfg, toy_data(2));
  EXPECT_EQ(discriminator_constructions(DiscriminatorFamily::mpd), 1);
  EXPECT_EQ(discriminator_constructions(DiscriminatorFamily::msd), 1);
  EXPECT_EQ(discriminator_constructions(DiscriminatorFamily::mmd), 0);
  const StepRecord r = s.step();
  EXPECT_TRUE(std::isfinite(r.loss));
  for (const char* k : {"mel", "adv.mpd", "adv.msd", "fm.mpd", "fm.msd", "d.mpd", "d.msd"}) EXPECT_EQ(r.terms.count(k), 1u) << k;
  EXPECT_EQ(r.terms.count("mrstft"), 0u);
  EXPECT_EQ(r.terms.count("adv.mmd"), 0u);
}

TEST(Training, WithoutWvnConditioningTheInputIsTheNoisyMel) {
  RunConfig cfg = tiny_config();
  cfg.finetune.ablation = AblationFlags::b1();
  FinetuneSession s(cfg, toy_data(2));
  std::mt19937_64 rng(3);
  const Tensor noisy = Tensor::randn(Shape{2, 1024}, 0.3, rng);
  const Tensor other = Tensor::randn(Shape{2, 1024}, 0.3, rng);
  const Var cond = s.conditioning(noisy, other);
  const Var direct = MelTransform(cfg.model.stft, cfg.model.conditioning_mel)(Var(noisy));
  ASSERT_EQ(cond.shape(), direct.shape());
  for (int64_t i = 0; i < cond.numel(); ++i) ASSERT_EQ(cond.value()[i], direct.value()[i]);
}

TEST(Training, FullPipelineWithWvnConditioningResumesExactly) {
  const Dataset data = toy_data(4);
  RunConfig cfg = tiny_config();
  const fs::path gen = tmp("gen.ckpt"), wvn = tmp("wvn.ckpt"), ck = tmp("ft.ckpt");
  PretrainSession pre(cfg, data);
  pre.run({.max_steps = 2, .checkpoint_path = gen.string()});
  WvnModel w = train_wvn(data, cfg);
  save_wvn_checkpoint(wvn.string(), w, cfg);

  cfg.finetune.ablation = AblationFlags::b3();
  const FinetuneSources src{gen.string(), wvn.string()};
  FinetuneSession full(cfg, data, src);
  const auto reference = full.run({.max_steps = 6});
  FinetuneSession first(cfg, data, src);
  first.run({.max_steps = 3, .checkpoint_path = ck.string()});
  FinetuneSession second(cfg, data, src);
  second.load(ck.string());
  const auto tail = second.run({.max_steps = 6});
  ASSERT_EQ(tail.size(), 3u);
  for (size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(tail[i].loss, reference[3 + i].loss, 1e-6);
    EXPECT_NEAR(tail[i].terms.at("d.total"), reference[3 + i].terms.at("d.total"), 1e-6);
  }
  for (const char* k : {"adv.mmd", "fm.mmd", "mrstft"}) EXPECT_EQ(reference[0].terms.count(k), 1u) << k;

  const InferenceModel m = load_inference_model(ck.string(), cfg);
  EXPECT_EQ(m.kind, "finetune");
  ASSERT_TRUE(m.gate.has_value());
  for (const auto& p : {gen, wvn, ck}) fs::remove(p);
}

TEST(Training, GradClipBoundsTheGlobalNorm) {
  Var a = Var::parameter(Tensor(Shape{2}, 0.0)), b = Var::parameter(Tensor(Shape{1}, 0.0));
  a.grad_mut()[0] = 3.0;
  b.grad_mut()[0] = 4.0;
  const std::vector<nn::NamedParam> ps{{"a", &a}, {"b", &b}};
  EXPECT_DOUBLE_EQ(clip_grad_norm(ps, 1.0), 5.0);
  EXPECT_NEAR(a.grad()[0], 0.6, 1e-12);
  EXPECT_NEAR(b.grad()[0], 0.8, 1e-12);
}

TEST(Training, MetricLogWritesJsonLines) {
  const fs::path p = tmp("log.jsonl");
  {
    MetricLog log(p.string(), 1);
    log.append({3, 1, 1e-4, 2.5, {{"mel", 2.0}}});
  }
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  const auto j = nlohmann::json::parse(line);
  EXPECT_EQ(j.at("step"), 3);
  EXPECT_DOUBLE_EQ(j.at("terms").at("mel").get<double>(), 2.0);
  fs::remove(p);
}

}  // namespace
}  // namespace radgan
