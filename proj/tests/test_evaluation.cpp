#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "radgan/evaluation.hpp"
#include "radgan/wav.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;

namespace radgan::eval {
namespace {

TEST(Scores, WeightedScoreRows) {
  EXPECT_NEAR(weighted_score(0.387, 0.297), 0.333, 5e-4);
  EXPECT_NEAR(weighted_score(0.309, 0.228), 0.2604, 5e-4);
  EXPECT_DOUBLE_EQ(weighted_score(1.0, 1.0), 1.0);
  EXPECT_THROW(weighted_score(1.1, 0.5), std::invalid_argument);
  EXPECT_THROW(weighted_score(0.5, -0.1), std::invalid_argument);
}

TEST(Scores, WeightedScoreIsMonotone) {
  for (double a = 0.0; a < 1.0; a += 0.1) {
    for (double b = 0.0; b < 1.0; b += 0.1) {
      EXPECT_LE(weighted_score(a, b), weighted_score(std::min(a + 0.05, 1.0), b));
      EXPECT_LE(weighted_score(a, b), weighted_score(a, std::min(b + 0.05, 1.0)));
    }
  }
}

TEST(Scores, Normalization) {
  EXPECT_DOUBLE_EQ(normalize_pesq(4.5), 1.0);
  EXPECT_DOUBLE_EQ(normalize_pesq(1.0), 0.0);
  EXPECT_NEAR(normalize_dnsmos(2.688), 0.422, 5e-4);
  EXPECT_NEAR(normalize_pesq(1.310), 0.0886, 5e-5);
  const auto [p, d] = normalize_scores(2.0, 3.0);
  EXPECT_DOUBLE_EQ(p, 1.0 / 3.5);
  EXPECT_DOUBLE_EQ(d, 0.5);
  EXPECT_THROW(normalize_pesq(0.9), std::invalid_argument);
  EXPECT_THROW(normalize_dnsmos(5.1), std::invalid_argument);
  for (double x = 1.0; x < 4.4; x += 0.3) EXPECT_LT(normalize_pesq(x), normalize_pesq(x + 0.1));
}

TEST(Scores, TaskScore) {
  EXPECT_DOUBLE_EQ(task_score(1.0, 1.0, 1.0, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(task_score(0.0, 0.0, 0.0, 0.0), 0.0);
  EXPECT_NEAR(task_score(0.0886, 0.422, 0.669, 0.190), 0.3424, 5e-5);
  EXPECT_DOUBLE_EQ(task_score(0.2, 0.4, -0.3, 0.6), 0.3);
  try {
    task_score(0.1, std::nullopt, 0.5, 0.5);
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& e) {
    EXPECT_STREQ(e.what(), "task score requires all four metrics");
  }
}

TEST(Scores, TaskScoreIsPermutationSymmetric) {
  std::array<double, 4> v{0.1, 0.7, 0.35, 0.9};
  const double ref = task_score(v[0], v[1], v[2], v[3]);
  std::sort(v.begin(), v.end());
  do {
    EXPECT_DOUBLE_EQ(task_score(v[0], v[1], v[2], v[3]), ref);
  } while (std::next_permutation(v.begin(), v.end()));
}

TEST(MfccCosine, CosineProperties) {
  const WaveformSegment x = synth_speech(8000, 4);
  EXPECT_NEAR(mfcc_cosine(x, x), 1.0, 1e-12);
  WaveformSegment half = x;
  for (double& v : half.samples) v *= 0.5;
  EXPECT_GE(mfcc_cosine(x, half), 0.999);
  const WaveformSegment tone = testing::tone(440.0, 8000, 0.5);
  const WaveformSegment noise = make_noise(8000, NoiseKind::white, 77);
  EXPECT_LT(mfcc_cosine(tone, noise), 0.9);
  WaveformSegment shorter = x;
  shorter.samples.pop_back();
  EXPECT_THROW(mfcc_cosine(x, shorter), std::invalid_argument);
}

TEST(MfccCosine, SelfSimilarityIsOneForRandomSignals) {
  for (uint64_t s = 0; s < 5; ++s) {
    const WaveformSegment w = make_noise(4000, s % 2 ? NoiseKind::pink : NoiseKind::white, s);
    EXPECT_NEAR(mfcc_cosine(w, w), 1.0, 1e-12);
  }
}

TEST(Providers, AbsentNanAndCrashAreRecordedNotThrown) {
  ProviderRegistry reg;
  reg.add("echo", [](const std::string&, const std::string&) { return 2.0; });
  reg.add("nan", [](const std::string&, const std::string&) { return std::nan(""); });
  reg.add("crash", [](const std::string&, const std::string&) -> double { throw std::runtime_error("boom"); });
  EXPECT_EQ(reg.evaluate("echo", "a", "b").value, 2.0);
  const MetricValue missing = reg.evaluate("nope", "a", "b");
  EXPECT_FALSE(missing.value);
  EXPECT_NE(missing.diagnostic.find("not registered"), std::string::npos);
  EXPECT_FALSE(reg.evaluate("nan", "a", "b").value);
  const MetricValue crashed = reg.evaluate("crash", "a", "b");
  EXPECT_FALSE(crashed.value);
  EXPECT_NE(crashed.diagnostic.find("boom"), std::string::npos);
}

TEST(Providers, ShellCommandTemplate) {
  ProviderRegistry reg;
  reg.add_command("sh", "echo score for {clean}: 3.25");
  reg.add_command("fail", "exit 3");
  EXPECT_EQ(reg.evaluate("sh", "/x/c.wav", "/x/e.wav").value, 3.25);
  EXPECT_FALSE(reg.evaluate("fail", "c", "e").value);
}

class ReportTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / "radgan_eval";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    for (int i = 0; i < 4; ++i) {
      const std::string c = (dir_ / ("c" + std::to_string(i) + ".wav")).string();
      write_wav(c, synth_speech(8000, i));
      pairs_.push_back({"p" + std::to_string(i), i < 2 ? TaskTag::task1 : TaskTag::task2, c, c});
    }
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path dir_;
  std::vector<EvalPair> pairs_;
};

TEST_F(ReportTest, IdenticalPairsGivePerfectCosineAndWeightedScore) {
  ProviderRegistry reg;
  reg.add("pesq", [](const std::string&, const std::string&) { return 4.5; });
  reg.add("estoi", [](const std::string&, const std::string&) { return 1.0; });
  reg.add("dnsmos", [](const std::string&, const std::string&) { return 2.0; });
  const EvaluationReport r = evaluate_pairs(pairs_, reg);
  ASSERT_EQ(r.pairs.size(), 4u);
  for (const auto& p : r.pairs) {
    EXPECT_NEAR(p.cs_mfcc, 1.0, 1e-12);
    EXPECT_DOUBLE_EQ(*p.dnsmos, 2.0);
  }
  ASSERT_TRUE(r.tasks.at(TaskTag::task1).score);
  const double t = (1.0 + 0.25 + 1.0 + 1.0) / 4.0;
  EXPECT_NEAR(*r.tasks.at(TaskTag::task1).score, t, 1e-12);
  ASSERT_TRUE(r.weighted);
  EXPECT_NEAR(*r.weighted, weighted_score(t, t), 1e-12);

  const std::string path = (dir_ / "report.jsonl").string();
  write_report(path, r);
  std::ifstream in(path);
  std::vector<nlohmann::json> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(nlohmann::json::parse(line));
  ASSERT_EQ(lines.size(), 5u);
  EXPECT_EQ(lines[0].at("raw").at("cs_mfcc").get<double>(), r.pairs[0].cs_mfcc);
  EXPECT_NEAR(lines[4].at("weighted_score").get<double>(), *r.weighted, 1e-15);
}

TEST_F(ReportTest, MissingProvidersLeaveTaskScoresAbsent) {
  pairs_.push_back({"gone", TaskTag::task1, (dir_ / "missing.wav").string(), (dir_ / "missing.wav").string()});
  const EvaluationReport r = evaluate_pairs(pairs_, ProviderRegistry{});
  EXPECT_EQ(r.pairs.size(), 4u);
  ASSERT_EQ(r.skipped.size(), 1u);
  EXPECT_FALSE(r.tasks.at(TaskTag::task1).score);
  EXPECT_EQ(r.tasks.at(TaskTag::task1).score_diagnostic, "task score requires all four metrics");
  EXPECT_FALSE(r.weighted);
  EXPECT_EQ(r.pairs[0].diagnostics.size(), 3u);
}

}  // namespace
}  // namespace radgan::eval
