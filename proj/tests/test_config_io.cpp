#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>

#include "radgan/checkpoint.hpp"
#include "radgan/config.hpp"
#include "radgan/wav.hpp"

namespace fs = std::filesystem;

namespace radgan {
namespace {

fs::path tmp(const std::string& name) { return fs::temp_directory_path() / ("radgan_io_" + name); }

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

TEST(Config, JsonRoundTrip) {
  for (const RunConfig& c : {RunConfig::full(), RunConfig::toy()}) {
    EXPECT_EQ(run_config_from_json(to_json(c)), c);
  }
}

TEST(Config, ToyIsConsistent) {
  const RunConfig t = RunConfig::toy();
  EXPECT_NO_THROW(t.validate());
  EXPECT_EQ(t.model.generator.hop(), 32);
  EXPECT_EQ(t.model.stft.hop, 32);
  EXPECT_EQ(RunConfig::full().model.generator.hop(), 128);
}

TEST(Config, FileOverridesAndPreset) {
  const fs::path p = tmp("cfg.json");
  write_text(p, R"({"preset": "toy", "seed": 9, "finetune": {"lr": 0.0002}})");
  const RunConfig c = load_run_config(p.string());
  EXPECT_EQ(c.seed, 9u);
  EXPECT_DOUBLE_EQ(c.finetune.lr, 2e-4);
  EXPECT_EQ(c.model.generator, GeneratorConfig::toy());
  write_text(p, R"({"finetune": {"learning_rate": 0.1}})");
  try {
    load_run_config(p.string());
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("finetune.learning_rate"), std::string::npos);
  }
  fs::remove(p);
}

TEST(Config, EnvironmentOverrides) {
  const RunConfig c = load_run_config("", {{"RADGAN_PRETRAIN__BATCH_SIZE", "3"},
                                           {"RADGAN_DATA__NOISE_KIND", "pink"},
                                           {"RADGAN_FINETUNE__ABLATION__USE_MMD", "false"},
                                           {"OTHER", "ignored"}});
  EXPECT_EQ(c.pretrain.batch_size, 3);
  EXPECT_EQ(c.data.noise_kind, "pink");
  EXPECT_FALSE(c.finetune.ablation.use_mmd);
  EXPECT_THROW(load_run_config("", {{"RADGAN_PRETRAIN__NOPE", "1"}}), std::invalid_argument);
}

TEST(Config, ValidationRejectsBadValues) {
  RunConfig c;
  c.pretrain.lr = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = RunConfig();
  c.finetune.lr_decay_gamma = 1.5;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = RunConfig();
  c.model.stft.hop = 64;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Config, FingerprintsTrackModelState) {
  RunConfig a, b;
  EXPECT_EQ(model_fingerprint(a.model), model_fingerprint(b.model));
  b.finetune.lr = 5e-4;
  EXPECT_EQ(model_fingerprint(a.model), model_fingerprint(b.model));
  b.model.conditioning_mel.f_max = 2000.0;
  EXPECT_NE(model_fingerprint(a.model), model_fingerprint(b.model));
  EXPECT_EQ(wvn_fingerprint(a.model), wvn_fingerprint(b.model));
  b.model.wvn.channels = 8;
  EXPECT_NE(wvn_fingerprint(a.model), wvn_fingerprint(b.model));
}

TEST(Archive, RoundTripIsByteIdentical) {
  Archive a;
  a.header = {{"kind", "test"}, {"fingerprint", "abc"}};
  a.tensors["z"] = Tensor(Shape{2, 3}, 1.5);
  a.tensors["a"] = Tensor(Shape{4}, -0.25);
  const fs::path p1 = tmp("a1.bin"), p2 = tmp("a2.bin");
  write_archive(p1.string(), a);
  const Archive b = read_archive(p1.string());
  EXPECT_EQ(b.header, a.header);
  ASSERT_EQ(b.tensors.size(), 2u);
  EXPECT_EQ(b.tensors.at("z").shape(), (Shape{2, 3}));
  EXPECT_EQ(b.tensors.at("a")[3], -0.25);
  write_archive(p2.string(), b);
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  EXPECT_EQ(std::string(std::istreambuf_iterator<char>(f1), {}), std::string(std::istreambuf_iterator<char>(f2), {}));
  fs::remove(p1);
  fs::remove(p2);
}

TEST(Archive, RejectsForeignAndMismatchedContent) {
  const fs::path p = tmp("junk.bin");
  write_text(p, "not a checkpoint at all");
  EXPECT_THROW(read_archive(p.string()), std::runtime_error);

  Archive a;
  a.header = {{"fingerprint", "aaaa"}};
  a.tensors["w"] = Tensor(Shape{3}, 0.0);
  try {
    require_fingerprint(a, "bbbb", "x.ckpt");
    FAIL() << "expected an error";
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "config fingerprint mismatch for x.ckpt: checkpoint aaaa, current config bbbb");
  }
  Var wrong = Var::parameter(Tensor(Shape{4}));
  EXPECT_THROW(restore_tensors(a, std::vector<nn::NamedParam>{{"w", &wrong}}), std::runtime_error);
  EXPECT_THROW(restore_tensors(a, std::vector<nn::NamedParam>{{"missing", &wrong}}), std::runtime_error);
  fs::remove(p);
}

TEST(Wav, RoundTripIsExactOnTheQuantizationGrid) {
  WaveformSegment w;
  for (int i = -32768; i < 32768; i += 97) w.samples.push_back(i / 32768.0);
  const fs::path p = tmp("grid.wav");
  write_wav(p.string(), w);
  const WaveformSegment r = read_wav(p.string());
  EXPECT_EQ(r.sample_rate, 8000);
  EXPECT_EQ(r.samples, w.samples);
  fs::remove(p);
}

TEST(Wav, ClipsAndRejectsOtherRates) {
  WaveformSegment w;
  w.samples = {2.0, -2.0, 0.3};
  const fs::path p = tmp("clip.wav");
  write_wav(p.string(), w);
  const WaveformSegment r = read_wav(p.string());
  EXPECT_DOUBLE_EQ(r.samples[0], 32767.0 / 32768.0);
  EXPECT_DOUBLE_EQ(r.samples[1], -1.0);
  EXPECT_NEAR(r.samples[2], 0.3, 1.0 / 65536.0);
  w.sample_rate = 16000;
  EXPECT_THROW(write_wav(p.string(), w), std::invalid_argument);

  // A 16 kHz header written by hand.
  std::string bytes = "RIFF";
  auto u32 = [&](uint32_t v) { for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<char>(v >> (8 * i))); };
  auto u16 = [&](uint16_t v) { for (int i = 0; i < 2; ++i) bytes.push_back(static_cast<char>(v >> (8 * i))); };
  u32(38);
  bytes += "WAVEfmt ";
  u32(16);
  u16(1);
  u16(1);
  u32(16000);
  u32(32000);
  u16(2);
  u16(16);
  bytes += "data";
  u32(2);
  u16(0);
  write_text(p, bytes);
  try {
    read_wav(p.string());
    FAIL() << "expected an error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("16000"), std::string::npos);
  }
  fs::remove(p);
}

}  // namespace
}  // namespace radgan
