#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "sparsescene/corpus.hpp"
#include "sparsescene/error.hpp"
#include "sparsescene/synth.hpp"

namespace fs = std::filesystem;

namespace sparsescene {
namespace {

double rms(const AudioSignal& s) {
  double e = 0.0;
  for (double v : s.samples) e += v * v;
  return std::sqrt(e / static_cast<double>(s.size()));
}

// Autocorrelation pitch over lags for 60-400 Hz.
double pitch_hz(const std::vector<double>& x) {
  int best = 0;
  double best_r = -1.0;
  for (int lag = kCanonicalRate / 400; lag <= kCanonicalRate / 60; ++lag) {
    double r = 0.0;
    for (std::size_t i = 0; i + static_cast<std::size_t>(lag) < x.size(); ++i) r += x[i] * x[i + static_cast<std::size_t>(lag)];
    if (r > best_r) {
      best_r = r;
      best = lag;
    }
  }
  return static_cast<double>(kCanonicalRate) / best;
}

TEST(Synth, NoiseIsDeterministicAndNormalised) {
  for (auto kind : {NoiseKind::LowBand, NoiseKind::Modulated, NoiseKind::Impulsive, NoiseKind::Hum}) {
    const auto a = synth_noise(kind, 2.0, 7);
    const auto b = synth_noise(kind, 2.0, 7);
    const auto c = synth_noise(kind, 2.0, 8);
    ASSERT_EQ(a.size(), 32000u);
    EXPECT_EQ(a.samples, b.samples);
    EXPECT_NE(a.samples, c.samples);
    EXPECT_NEAR(rms(a), 0.1, 1e-12);
  }
  EXPECT_THROW(synth_noise(NoiseKind::Hum, 0.0, 1), UsageError);
}

TEST(Synth, VoicesSitInTheirPitchRanges) {
  for (const auto& v : default_voices()) {
    const auto u = synth_utterance(v, 2.5, 3);
    ASSERT_EQ(u.size(), 40000u);
    // Longest voiced run, skipping its ramps.
    std::size_t best_a = 0, best_len = 0;
    for (std::size_t i = 0; i < u.size();) {
      if (u.samples[i] == 0.0) {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < u.size() && u.samples[j] != 0.0) ++j;
      if (j - i > best_len) {
        best_a = i;
        best_len = j - i;
      }
      i = j;
    }
    ASSERT_GT(best_len, 2000u);
    const std::vector<double> mid(u.samples.begin() + static_cast<std::ptrdiff_t>(best_a + best_len / 2 - 600),
                                  u.samples.begin() + static_cast<std::ptrdiff_t>(best_a + best_len / 2 + 600));
    const double f0 = pitch_hz(mid);
    EXPECT_GE(f0, v.f0_lo * 0.95) << v.label;
    EXPECT_LE(f0, v.f0_hi * 1.05) << v.label;
  }
}

TEST(Synth, UtteranceHasPauses) {
  const auto u = synth_utterance(default_voices()[2], 3.0, 11);
  std::size_t zeros = 0;
  for (double v : u.samples) zeros += v == 0.0;
  EXPECT_GT(zeros, u.size() / 20);
  EXPECT_LT(zeros, u.size() / 2);
}

TEST(SynthCorpus, Layout) {
  const auto c = synth_corpus(4);
  EXPECT_EQ(c.noise_labels(), (std::vector<std::string>{"lowband", "modulated", "impulsive", "hum"}));
  EXPECT_EQ(c.speaker_labels(), (std::vector<std::string>{"deep", "low", "mid", "high"}));
  for (const auto& n : c.noises) {
    EXPECT_EQ(n.test.size(), 320000u);
    EXPECT_EQ(n.train.size(), 160000u);
  }
  for (const auto& s : c.speakers) {
    EXPECT_EQ(s.train.size(), 8u);
    EXPECT_EQ(s.update.size(), 1u);
    EXPECT_EQ(s.test.size(), 3u);
    for (const auto* group : {&s.train, &s.update, &s.test})
      for (const auto& u : *group) {
        EXPECT_GE(u.audio.duration_s(), 2.0 - 1e-9);
        EXPECT_LE(u.audio.duration_s(), 3.0 + 1e-9);
      }
  }
  EXPECT_EQ(synth_corpus(4).speakers[1].test[2].audio.samples, c.speakers[1].test[2].audio.samples);
}

TEST(SynthCorpus, OpenBySpec) {
  const auto c = open_corpus("synthetic:4");
  EXPECT_EQ(c.noises.size(), 4u);
  EXPECT_THROW(open_corpus("synthetic:x"), UsageError);
  EXPECT_THROW(open_corpus("synthetic:4x"), UsageError);
  EXPECT_THROW(open_corpus("/no/such/corpus"), DataError);
}

TEST(CorpusIo, SaveLoadRoundTrip) {
  const auto dir = fs::temp_directory_path() / "sparsescene_corpus_rt";
  fs::remove_all(dir);
  const auto c = synth_corpus(6);
  save_corpus(c, dir);
  EXPECT_TRUE(fs::exists(dir / "noise" / "hum.wav"));
  EXPECT_TRUE(fs::exists(dir / "speaker" / "mid" / "train.list"));
  const auto back = load_corpus(dir);
  // Directory order is alphabetical.
  EXPECT_EQ(back.noise_labels(), (std::vector<std::string>{"hum", "impulsive", "lowband", "modulated"}));
  EXPECT_EQ(back.speaker_labels(), (std::vector<std::string>{"deep", "high", "low", "mid"}));
  const auto& orig = c.noise("hum");
  const auto& got = back.noise("hum");
  ASSERT_EQ(got.test.size(), orig.test.size());
  ASSERT_EQ(got.train.size(), orig.train.size());
  for (std::size_t i = 0; i < got.test.size(); i += 997) EXPECT_NEAR(got.test.samples[i], orig.test.samples[i], 1.0 / 32767);
  const auto& s = back.speaker("mid");
  ASSERT_EQ(s.train.size(), 8u);
  EXPECT_EQ(s.train[3].name, "train3.wav");
  EXPECT_EQ(s.update.size(), 1u);
  EXPECT_EQ(s.test.size(), 3u);
}

TEST(CorpusIo, UnreadableEntriesAreSkipped) {
  const auto dir = fs::temp_directory_path() / "sparsescene_corpus_skip";
  fs::remove_all(dir);
  save_corpus(synth_corpus(6), dir);
  std::ofstream(dir / "noise" / "broken.wav") << "not a wav file";
  std::ofstream(dir / "speaker" / "mid" / "train.list", std::ios::app) << "missing.wav\n";
  AudioSignal brief;
  brief.samples.assign(16000, 0.1);
  write_wav(dir / "noise" / "brief.wav", brief);
  const auto c = load_corpus(dir);
  EXPECT_EQ(c.noises.size(), 4u);
  EXPECT_EQ(c.speaker("mid").train.size(), 8u);
  EXPECT_THROW(c.noise("broken"), DataError);
}

TEST(CorpusIo, EmptyDirectoryIsADataError) {
  const auto dir = fs::temp_directory_path() / "sparsescene_corpus_empty";
  fs::remove_all(dir);
  fs::create_directories(dir);
  EXPECT_THROW(load_corpus(dir), DataError);
}

TEST(LearnBank, NoiseFirstThenSpeakersWithLabels) {
  const auto c = synth_corpus(4);
  const auto bank = learn_bank(c, {LearnMethod::Random, 12, 3, 0.9, 0.9, 0});
  EXPECT_EQ(bank.atom_count, 12);
  ASSERT_EQ(bank.noise.size(), 4u);
  ASSERT_EQ(bank.speakers.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(bank.noise[i].source_label, c.noises[i].label);
    EXPECT_EQ(bank.speakers[i].source_label, c.speakers[i].label);
    EXPECT_EQ(bank.noise[i].size(), 12);
    EXPECT_EQ(bank.noise[i].dim(), 513);
  }
}

TEST(LearnBank, TdcsRespectsBetweenThresholdAgainstEarlierDictionaries) {
  const auto c = synth_corpus(4);
  const auto bank = learn_bank(c, {LearnMethod::Tdcs, 16, 3, 0.9, 0.9, 0});
  std::vector<const Dictionary*> all;
  for (const auto& d : bank.noise) all.push_back(&d);
  for (const auto& d : bank.speakers) all.push_back(&d);
  for (std::size_t k = 1; k < all.size(); ++k)
    for (std::size_t p = 0; p < k; ++p)
      for (Eigen::Index a = 0; a < all[k]->size() - all[k]->appended_count; ++a)
        for (Eigen::Index b = 0; b < all[p]->size(); ++b)
          ASSERT_LE(all[k]->atoms.col(a).dot(all[p]->atoms.col(b)), 0.9 + 1e-12);
}

TEST(TrainingFeatures, PrunedAndNonNegative) {
  const auto c = synth_corpus(4);
  const auto f = training_features(c.speakers[0]);
  EXPECT_EQ(f.rows(), 513);
  EXPECT_GE(f.minCoeff(), 0.0);
  for (Eigen::Index j = 0; j < f.cols(); ++j) EXPECT_GT(f.col(j).squaredNorm(), 0.0);
  EXPECT_THROW(training_features(std::vector<Utterance>{}), DataError);
}

}  // namespace
}  // namespace sparsescene
