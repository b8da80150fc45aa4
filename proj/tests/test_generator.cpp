#include <gtest/gtest.h>

#include <cmath>

#include "radgan/generator.hpp"
#include "radgan/ops.hpp"

namespace radgan {
namespace {

MelSpectrogram random_mel(int64_t frames, uint64_t seed, int n_mels = 80) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(std::log(1e-5), 5.0);
  MelSpectrogram m{Tensor(Shape{n_mels, frames}), MelConfig::conditioning(), 128};
  for (double& v : m.values.storage()) v = d(rng);
  return m;
}

TEST(Generator, ToyLengthLaw) {
  Generator g(GeneratorConfig::toy(), 1);
  EXPECT_EQ(g.config().hop(), 32);
  EXPECT_EQ(g.synthesize(random_mel(10, 2)).size(), 320);
  for (int64_t t : {1, 3, 17, 40}) EXPECT_EQ(g.synthesize(random_mel(t, t)).size(), 32 * t);
}

TEST(Generator, FullConfigHasHop128) {
  const GeneratorConfig c = GeneratorConfig::full();
  EXPECT_EQ(c.hop(), 128);
  EXPECT_NO_THROW(c.validate());
}

TEST(Generator, RepeatedCallsAreBitIdentical) {
  Generator g(GeneratorConfig::toy(), 3);
  const MelSpectrogram m = random_mel(12, 4);
  EXPECT_EQ(g.synthesize(m).samples, g.synthesize(m).samples);
}

TEST(Generator, OutputIsBoundedAndFinite) {
  Generator g(GeneratorConfig::toy(), 5);
  for (uint64_t seed = 0; seed < 5; ++seed) {
    for (double v : g.synthesize(random_mel(20, seed)).samples) {
      ASSERT_TRUE(std::isfinite(v));
      ASSERT_LE(std::fabs(v), 1.0);
    }
  }
}

TEST(Generator, WrongBinCountIsRejected) {
  Generator g(GeneratorConfig::toy(), 6);
  try {
    g.synthesize(random_mel(5, 1, 64));
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& e) {
    EXPECT_STREQ(e.what(), "conditioning bins ≠ 80");
  }
}

TEST(Generator, ConditioningReceivesGradient) {
  Generator g(GeneratorConfig::toy(), 7);
  const MelSpectrogram m = random_mel(8, 8);
  Var mel(m.values.reshaped(Shape{1, 80, 8}), true);
  backward(ag::mean(ag::square(g.forward(mel))));
  double norm = 0.0;
  for (double v : mel.grad().values()) norm += v * v;
  EXPECT_GT(norm, 0.0);
}

TEST(Generator, ParameterCountIsStableAndMonotone) {
  const GeneratorConfig c = GeneratorConfig::toy();
  EXPECT_EQ(count_parameters(c), count_parameters(c));
  GeneratorConfig wider = c;
  wider.base_channels *= 2;
  EXPECT_GT(count_parameters(wider), count_parameters(c));
  Generator g(c, 0);
  std::vector<nn::NamedParam> params;
  g.collect("g", params);
  EXPECT_EQ(nn::count_parameters(params), count_parameters(c));
}

TEST(Generator, InvalidConfigsAreRejected) {
  GeneratorConfig c = GeneratorConfig::toy();
  c.upsample_kernels[0] = 7;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = GeneratorConfig::toy();
  c.upsample_rates.pop_back();
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace radgan
