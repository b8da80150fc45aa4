#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include <nlohmann/json.hpp>

#include "radgan/cli.hpp"
#include "radgan/config.hpp"
#include "radgan/data_pipeline.hpp"
#include "radgan/figure.hpp"
#include "radgan/training.hpp"
#include "radgan/wav.hpp"

namespace fs = std::filesystem;
using namespace radgan;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("radgan_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    config_ = (dir_ / "toy.json").string();
    std::ofstream(config_) << R"({"preset": "toy", "data": {"synthetic_clips": 8}})";
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void synth(const std::string& name) {
    const CliResult r = cli({"synth-data", "--config", config_, "--out", path(name)});
    ASSERT_EQ(r.code, kExitOk) << r.err;
  }

  fs::path dir_;
  std::string config_;
};

TEST_F(CliTest, SynthDataWritesPairsAndManifest) {
  synth("corpus");
  const auto m = nlohmann::json::parse(slurp(dir_ / "corpus" / "manifest.json"));
  EXPECT_EQ(m.at("examples").size(), 8u);
  EXPECT_EQ(m.at("snr_range_db"), nlohmann::json::array({-5.0, -1.0}));
  for (const auto& e : m.at("examples")) {
    const std::string id = e.at("id");
    EXPECT_TRUE(fs::exists(dir_ / "corpus" / "clean" / (id + ".wav")));
    EXPECT_TRUE(fs::exists(dir_ / "corpus" / "noisy" / (id + ".wav")));
  }
  EXPECT_TRUE(fs::exists(dir_ / "corpus" / "run_manifest.json"));
}

TEST_F(CliTest, SynthDataIsDeterministic) {
  synth("a");
  synth("b");
  for (const auto& e : fs::directory_iterator(dir_ / "a" / "noisy")) {
    EXPECT_EQ(slurp(e.path()), slurp(dir_ / "b" / "noisy" / e.path().filename())) << e.path();
  }
}

TEST_F(CliTest, ExistingOutputNeedsForce) {
  synth("corpus");
  CliResult r = cli({"synth-data", "--config", config_, "--out", path("corpus")});
  EXPECT_EQ(r.code, kExitFailure);
  EXPECT_NE(r.err.find("--force"), std::string::npos);
  r = cli({"synth-data", "--config", config_, "--out", path("corpus"), "--force"});
  EXPECT_EQ(r.code, kExitOk) << r.err;
}

TEST_F(CliTest, FinetuneWithoutWvnCheckpointIsUsageError) {
  synth("corpus");
  const CliResult r = cli({"finetune", "--config", config_, "--data", path("corpus"), "--generator-checkpoint",
                           path("missing.ckpt"), "--out", path("ft")});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("--wvn-checkpoint"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir_ / "ft"));
}

TEST_F(CliTest, UnknownFlagIsUsageError) { EXPECT_EQ(cli({"pretrain", "--bogus"}).code, kExitUsage); }

TEST_F(CliTest, PretrainInferEvaluatePlot) {
  synth("corpus");
  CliResult r = cli({"pretrain", "--config", config_, "--data", path("corpus"), "--max-steps", "50", "--out",
                     path("pre"), "--determinism"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const std::string ckpt = path("pre/generator.ckpt");
  const RunConfig cfg = load_run_config(config_, {});
  InferenceModel model = load_inference_model(ckpt, cfg);
  EXPECT_EQ(model.kind, "pretrain");
  const auto run = nlohmann::json::parse(slurp(dir_ / "pre" / "run_manifest.json"));
  EXPECT_EQ(run.at("exit_code"), 0);
  EXPECT_EQ(run.at("command"), "pretrain");

  // Inference output length follows hop * frames.
  const std::string clip = path("corpus/noisy/syn00000.wav");
  const int64_t len = read_wav(clip).size();
  r = cli({"infer", "--config", config_, "--checkpoint", ckpt, "--no-wvn", "--out", path("inf1"), clip});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  r = cli({"infer", "--config", config_, "--checkpoint", ckpt, "--no-wvn", "--out", path("inf2"), clip});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const WaveformSegment y = read_wav(path("inf1/syn00000.wav"));
  const int hop = cfg.model.stft.hop;
  EXPECT_EQ(y.size(), hop * (len / hop + 1));
  EXPECT_EQ(slurp(dir_ / "inf1" / "syn00000.wav"), slurp(dir_ / "inf2" / "syn00000.wav"));

  // A bad file is reported but the batch continues.
  std::ofstream(path("bad.wav")) << "not audio";
  r = cli({"infer", "--config", config_, "--checkpoint", ckpt, "--out", path("inf3"), path("bad.wav"), clip});
  EXPECT_EQ(r.code, kExitFailure);
  EXPECT_NE(r.err.find("bad.wav"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir_ / "inf3" / "syn00000.wav"));

  r = cli({"evaluate", "--config", config_, "--clean", path("corpus/clean"), "--enhanced", path("corpus/clean"),
           "--manifest", path("corpus/manifest.json"), "--out", path("ev")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::ifstream report(dir_ / "ev" / "report.jsonl");
  std::vector<nlohmann::json> lines;
  for (std::string line; std::getline(report, line);) lines.push_back(nlohmann::json::parse(line));
  ASSERT_EQ(lines.size(), 9u);
  for (size_t i = 0; i + 1 < lines.size(); ++i) EXPECT_NEAR(lines[i].at("raw").at("cs_mfcc").get<double>(), 1.0, 1e-12);
  EXPECT_TRUE(lines.back().contains("weighted_score"));

  r = cli({"plot", "--config", config_, "--clean", path("corpus/clean/syn00000.wav"), "--noisy", clip, "--wvn", clip,
           "--radgan", path("inf1/syn00000.wav"), "--out", path("plot")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const RgbImage img = read_png(path("plot/comparison.png"));
  const FigureLayout layout;
  EXPECT_EQ(img.width, 4 * layout.panel_width + 5 * layout.gutter);
}

TEST_F(CliTest, EvaluateSkipsMissingEnhancedFiles) {
  synth("corpus");
  fs::create_directories(dir_ / "enh");
  fs::copy_file(dir_ / "corpus" / "clean" / "syn00000.wav", dir_ / "enh" / "syn00000.wav");
  const CliResult r = cli({"evaluate", "--config", config_, "--clean", path("corpus/clean"), "--enhanced",
                           path("enh"), "--task", "task1", "--out", path("ev")});
  EXPECT_EQ(r.code, kExitFailure);
  EXPECT_NE(r.err.find("syn00001"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir_ / "ev" / "report.jsonl"));
}

TEST_F(CliTest, EvaluateAggregatesWeightedScore) {
  synth("corpus");
  nlohmann::json m = nlohmann::json::parse(slurp(dir_ / "corpus" / "manifest.json"));
  int i = 0;
  for (auto& e : m.at("examples")) e["task"] = (i++ % 2 == 0) ? "task1" : "task2";
  write_manifest(path("tasks.json"), m);
  const CliResult r = cli({"evaluate", "--config", config_, "--clean", path("corpus/clean"), "--enhanced",
                           path("corpus/clean"), "--manifest", path("tasks.json"), "--provider", "pesq=echo 2.75",
                           "--provider", "dnsmos=echo 3", "--provider", "estoi=echo 0.5", "--out", path("ev")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::ifstream report(dir_ / "ev" / "report.jsonl");
  std::string line, last;
  while (std::getline(report, line)) last = line;
  const auto agg = nlohmann::json::parse(last);
  // Each task: (0.5 + 0.5 + 1 + 0.5) / 4.
  EXPECT_NEAR(agg.at("tasks").at("task1").at("task_score").get<double>(), 0.625, 1e-9);
  EXPECT_NEAR(agg.at("weighted_score").get<double>(), 0.625, 1e-9);
}

}  // namespace
