#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "radgan/data_pipeline.hpp"
#include "radgan/fft.hpp"
#include "radgan/wav.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;

namespace radgan {
namespace {

double rms(const std::vector<double>& v) {
  double a = 0.0;
  for (double x : v) a += x * x;
  return std::sqrt(a / static_cast<double>(v.size()));
}

// Energy of the spectrum strictly above hz, from a Hann-windowed full-length
// DFT so leakage from the pass band stays below the measured floor.
double band_energy_above(const WaveformSegment& w, double hz) {
  const int n = static_cast<int>(w.size());
  RealFft& fft = RealFft::get(n);
  std::vector<double> x(w.samples);
  for (int i = 0; i < n; ++i) x[static_cast<size_t>(i)] *= 0.5 - 0.5 * std::cos(2.0 * M_PI * i / n);
  std::vector<std::complex<double>> spec(static_cast<size_t>(fft.bins()));
  fft.forward(x.data(), spec.data());
  double e = 0.0;
  for (int k = 0; k < fft.bins(); ++k) {
    if (static_cast<double>(k) * kSampleRate / n > hz) e += std::norm(spec[static_cast<size_t>(k)]);
  }
  return e;
}

fs::path scratch_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("radgan_data_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Dataset synthetic_dataset(int n, int64_t len) {
  Dataset d;
  for (int i = 0; i < n; ++i) {
    PairedExample ex;
    ex.id = "clip" + std::to_string(i);
    ex.clean = synth_speech(len, 100 + i);
    ex.noisy = degrade(ex.clean, {}, 200 + i);
    d.examples.push_back(std::move(ex));
  }
  return d;
}

TEST(Degrade, MinusFiveDbMakesNoiseRmsLargerByTheDecibelRatio) {
  DegradationSpec spec;
  spec.snr_low_db = spec.snr_high_db = -5.0;
  const WaveformSegment clean = testing::tone(440.0, 16000, std::sqrt(2.0));
  const Degraded d = degrade_detailed(clean, spec, 1);
  EXPECT_DOUBLE_EQ(d.target_snr_db, -5.0);
  EXPECT_NEAR(rms(d.noise.samples) / rms(d.bandlimited.samples), std::pow(10.0, 5.0 / 20.0), 1e-9);
  EXPECT_NEAR(std::pow(10.0, 5.0 / 20.0), 1.7783, 1e-4);
}

TEST(Degrade, MeasuredSnrMatchesDrawnTarget) {
  std::set<double> targets;
  for (uint64_t s = 0; s < 20; ++s) {
    const WaveformSegment clean = synth_speech(8000, s);
    const Degraded d = degrade_detailed(clean, {}, s);
    EXPECT_GE(d.target_snr_db, -5.0);
    EXPECT_LE(d.target_snr_db, -1.0);
    WaveformSegment residual = d.noisy;
    for (size_t i = 0; i < residual.samples.size(); ++i) residual.samples[i] -= d.bandlimited.samples[i];
    EXPECT_NEAR(snr_db(d.bandlimited, residual), d.target_snr_db, 0.1);
    targets.insert(d.target_snr_db);
  }
  EXPECT_EQ(targets.size(), 20u);
}

TEST(Degrade, SuppressesEnergyAboveTheStopBandEdge) {
  for (uint64_t s = 0; s < 5; ++s) {
    const WaveformSegment clean = synth_speech(16000, 40 + s);
    const Degraded d = degrade_detailed(clean, {}, s);
    const double ratio_db =
        10.0 * std::log10(band_energy_above(d.bandlimited, 1250.0) / band_energy_above(clean, 1250.0));
    EXPECT_LE(ratio_db, -40.0) << "seed " << s;
  }
}

TEST(Degrade, SameSeedIsIdenticalAndSilenceIsRejected) {
  const WaveformSegment clean = synth_speech(4000, 3);
  EXPECT_EQ(degrade(clean, {}, 9).samples, degrade(clean, {}, 9).samples);
  EXPECT_NE(degrade(clean, {}, 9).samples, degrade(clean, {}, 10).samples);
  WaveformSegment silent;
  silent.samples.assign(4000, 0.0);
  try {
    degrade(silent, {}, 0);
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& e) {
    EXPECT_STREQ(e.what(), "SNR undefined for silent signal");
  }
}

TEST(Degrade, SpecValidation) {
  DegradationSpec inverted;
  inverted.snr_low_db = 0.0;
  EXPECT_THROW(inverted.validate(), std::invalid_argument);
  DegradationSpec above_nyquist;
  above_nyquist.cutoff_hz = 4000.0;
  EXPECT_THROW(above_nyquist.validate(), std::invalid_argument);
}

TEST(Degrade, PinkNoiseTiltsTowardLowFrequencies) {
  const WaveformSegment pink = make_noise(32000, NoiseKind::pink, 5);
  const WaveformSegment white = make_noise(32000, NoiseKind::white, 5);
  EXPECT_NEAR(rms(pink.samples), 1.0, 1e-9);
  const double pink_hi = band_energy_above(pink, 2000.0) / band_energy_above(pink, 0.0);
  const double white_hi = band_energy_above(white, 2000.0) / band_energy_above(white, 0.0);
  EXPECT_NEAR(white_hi, 0.5, 0.03);
  EXPECT_LT(pink_hi, 0.2);
}

TEST(SynthSpeech, DeterministicBoundedAndBroadband) {
  const WaveformSegment a = synth_speech(32000, 11);
  EXPECT_EQ(a.samples, synth_speech(32000, 11).samples);
  double peak = 0.0;
  for (double v : a.samples) peak = std::max(peak, std::fabs(v));
  EXPECT_NEAR(peak, 0.5, 1e-12);
  const double above = band_energy_above(a, 1000.0) / band_energy_above(a, 0.0);
  EXPECT_GT(above, 0.01);
  EXPECT_LT(above, 0.9);
}

TEST(Split, PublishedSizes) {
  EXPECT_EQ(published_split(TaskTag::task1).train, 5334);
  EXPECT_EQ(published_split(TaskTag::task1).validation, 759);
  EXPECT_EQ(published_split(TaskTag::task2).train, 5229);
  EXPECT_EQ(published_split(TaskTag::task2).validation, 749);
  EXPECT_THROW(published_split(TaskTag::synthetic), std::invalid_argument);
}

TEST(Split, HundredClipsAtDefaultRatioGive87And13DisjointExhaustive) {
  std::vector<std::string> ids;
  for (int i = 0; i < 100; ++i) ids.push_back("utt" + std::to_string(i));
  const auto [train, val] = partition_ids(ids, 0.875, 7);
  EXPECT_EQ(train.size(), 87u);
  EXPECT_EQ(val.size(), 13u);
  std::set<std::string> all(train.begin(), train.end());
  for (const auto& id : val) EXPECT_TRUE(all.insert(id).second) << id;
  EXPECT_EQ(all, std::set<std::string>(ids.begin(), ids.end()));
  // Input order does not matter; the seed does.
  std::vector<std::string> reversed(ids.rbegin(), ids.rend());
  EXPECT_EQ(partition_ids(reversed, 0.875, 7).first, train);
  EXPECT_NE(partition_ids(ids, 0.875, 8).first, train);
}

TEST(Split, CleanOnlyDirectoryIsDegradedOnTheFly) {
  const fs::path root = scratch_dir("clean_only");
  fs::create_directories(root / "clean");
  for (int i = 0; i < 8; ++i) write_wav((root / "clean" / ("c" + std::to_string(i) + ".wav")).string(), synth_speech(2000, i));
  SplitSpec spec;
  spec.seed = 3;
  const DatasetSplit split = build_split(root.string(), spec);
  EXPECT_EQ(split.train.size(), 7);
  EXPECT_EQ(split.validation.size(), 1);
  for (const auto& ex : split.train.examples) {
    EXPECT_EQ(ex.clean.size(), ex.noisy.size());
    EXPECT_EQ(ex.task, TaskTag::synthetic);
    EXPECT_NE(ex.clean.samples, ex.noisy.samples);
  }
  const DatasetSplit again = build_split(root.string(), spec);
  EXPECT_EQ(again.train.examples[0].noisy.samples, split.train.examples[0].noisy.samples);
  fs::remove_all(root);
}

TEST(Split, OrphanPairFilesAreListed) {
  const fs::path root = scratch_dir("orphans");
  fs::create_directories(root / "clean");
  fs::create_directories(root / "noisy");
  const WaveformSegment w = synth_speech(1000, 1);
  write_wav((root / "clean" / "a.wav").string(), w);
  write_wav((root / "noisy" / "a.wav").string(), w);
  write_wav((root / "clean" / "only_clean.wav").string(), w);
  write_wav((root / "noisy" / "only_noisy.wav").string(), w);
  try {
    build_split(root.string(), {});
    FAIL() << "expected an error";
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("only_clean"), std::string::npos);
    EXPECT_NE(msg.find("only_noisy"), std::string::npos);
    EXPECT_EQ(msg.find("a,"), std::string::npos);
  }
  fs::remove_all(root);
}

TEST(Split, ManifestFixesAssignmentAndTask) {
  const fs::path root = scratch_dir("manifest");
  fs::create_directories(root / "clean");
  fs::create_directories(root / "noisy");
  for (const char* id : {"x", "y", "z"}) {
    write_wav((root / "clean" / (std::string(id) + ".wav")).string(), synth_speech(1000, 2));
    write_wav((root / "noisy" / (std::string(id) + ".wav")).string(), synth_speech(1000, 3));
  }
  write_manifest((root / "manifest.json").string(),
                 {{"examples",
                   {{{"id", "x"}, {"task", "task1"}, {"split", "train"}},
                    {{"id", "y"}, {"task", "task2"}, {"split", "train"}},
                    {{"id", "z"}, {"task", "task2"}, {"split", "validation"}}}}});
  const DatasetSplit split = build_split(root.string(), {});
  ASSERT_EQ(split.train.size(), 2);
  ASSERT_EQ(split.validation.size(), 1);
  EXPECT_EQ(split.train.examples[0].task, TaskTag::task1);
  EXPECT_EQ(split.validation.examples[0].id, "z");
  EXPECT_EQ(split.validation.examples[0].task, TaskTag::task2);
  fs::remove_all(root);
}

TEST(BatchIteratorTest, FullScaleDefaultBatchShape) {
  const Dataset d = synthetic_dataset(16, 32000);
  BatchIterator it(d, 16, 32000, 0, 0);
  Batch b;
  ASSERT_TRUE(it.next(b));
  EXPECT_EQ(b.clean.shape(), (Shape{16, 32000}));
  EXPECT_EQ(b.noisy.shape(), (Shape{16, 32000}));
  EXPECT_FALSE(it.next(b));
}

TEST(BatchIteratorTest, EpochsDrawDifferentCropOffsets) {
  Dataset d;
  for (int i = 0; i < 100; ++i) {
    PairedExample ex;
    ex.id = std::to_string(i);
    ex.clean.samples.assign(32000, 0.1);
    ex.noisy.samples.assign(32000, 0.2);
    d.examples.push_back(std::move(ex));
  }
  BatchIterator e0(d, 10, 2048, 5, 0), e1(d, 10, 2048, 5, 1);
  int same = 0;
  for (int64_t i = 0; i < 100; ++i) same += e0.offset_for(i) == e1.offset_for(i);
  // 29953 possible offsets: expected collisions are about 0.003.
  EXPECT_LE(same, 1);
}

TEST(BatchIteratorTest, ReplayIsIdenticalAndEachExampleAppearsOnce) {
  const Dataset d = synthetic_dataset(10, 4000);
  auto run = [&](int64_t epoch) {
    BatchIterator it(d, 3, 1024, 42, epoch);
    std::vector<Batch> out;
    Batch b;
    while (it.next(b)) out.push_back(b);
    return out;
  };
  const auto a = run(0), b = run(0), c = run(1);
  ASSERT_EQ(a.size(), 3u);
  std::set<int64_t> seen;
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].indices, b[i].indices);
    EXPECT_EQ(a[i].offsets, b[i].offsets);
    for (int64_t k = 0; k < a[i].clean.numel(); ++k) ASSERT_EQ(a[i].clean[k], b[i].clean[k]);
    for (int64_t idx : a[i].indices) EXPECT_TRUE(seen.insert(idx).second);
  }
  EXPECT_NE(a[0].indices, c[0].indices);
  // Crops line up with the source clip.
  const auto& ex = d.examples[static_cast<size_t>(a[1].indices[2])];
  EXPECT_EQ(a[1].clean[2 * 1024 + 5], ex.clean.samples[static_cast<size_t>(a[1].offsets[2] + 5)]);
  EXPECT_EQ(a[1].noisy[2 * 1024 + 5], ex.noisy.samples[static_cast<size_t>(a[1].offsets[2] + 5)]);
}

TEST(BatchIteratorTest, RejectsOversizedBatchAndCrop) {
  const Dataset d = synthetic_dataset(4, 2000);
  EXPECT_THROW(BatchIterator(d, 5, 1000, 0, 0), std::invalid_argument);
  EXPECT_THROW(BatchIterator(d, 2, 4000, 0, 0), std::invalid_argument);
}

}  // namespace
}  // namespace radgan
