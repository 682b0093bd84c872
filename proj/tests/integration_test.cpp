#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sparsescene/report.hpp"
#include "sparsescene/synth.hpp"

namespace fs = std::filesystem;

namespace sparsescene {
namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("sparsescene_it_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Fresh utterances of the second of two neighbouring voices, mixed at 0 dB
// with a noise whose dictionary is known, are attributed to that voice.
TEST(SpeakerIdentification, SecondOfTwoSpeakersAtZeroDb) {
  const auto corpus = synth_corpus(21);
  const LearnParams lp{LearnMethod::KMeans, 32, 1, 0.9, 0.9, 0};
  const auto& noise_src = corpus.noise("modulated");
  const auto noise_dict = learn(training_features(noise_src), lp);
  std::vector<Dictionary> speakers;
  for (const char* label : {"low", "mid"}) speakers.push_back(learn(training_features(corpus.speaker(label)), lp));
  const std::vector<const Dictionary*> ptrs{&speakers[0], &speakers[1]};
  const auto voice = default_voices()[2];
  ASSERT_EQ(voice.label, "mid");

  std::mt19937_64 rng(77);
  int hits = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const auto speech = synth_utterance(voice, 2.5, rng());
    std::uniform_int_distribution<std::size_t> offset(0, noise_src.test.size() - speech.size() - 1);
    const auto o = static_cast<std::ptrdiff_t>(offset(rng));
    AudioSignal noise;
    noise.samples.assign(noise_src.test.samples.begin() + o,
                         noise_src.test.samples.begin() + o + static_cast<std::ptrdiff_t>(speech.size()));
    const auto m = mix(speech, noise, 0.0);
    const auto fm = extract_features(m.mixture);
    const auto ev = identify_speaker(fm, {0, fm.num_frames()}, &noise_dict, ptrs);
    hits += ev.ranking.front() == 1;
  }
  EXPECT_GE(hits, 9);
}

// Corpus on disk -> TDCS bank file -> manifest run over several regimes.
TEST(Pipeline, DirectoryCorpusToAggregate) {
  const auto dir = scratch("pipeline");
  save_corpus(synth_corpus(8), dir / "corpus");
  const auto corpus = load_corpus(dir / "corpus");
  const auto bank = learn_bank(corpus, {LearnMethod::Tdcs, 24, 2, 0.9, 0.9, 0});
  save_bank(bank, dir / "bank.bin");

  std::ofstream(dir / "run.txt") << "corpus = corpus\n"
                                    "bank = bank.bin\n"
                                    "scenarios = 0, 3, 6\n"
                                    "snr = 0\n"
                                    "regimes = complete, ground_truth, out_of_set_noise, updated_noise\n"
                                    "out = results\n"
                                    "parallelism = 2\n";
  const auto summary = run_manifest(read_manifest(dir / "run.txt"));
  EXPECT_EQ(summary.rows, 12);
  EXPECT_EQ(summary.failed, 0);
  EXPECT_EQ(summary.computed, 12);

  std::ifstream csv(summary.csv_path);
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, csv_header());
  int lines = 0;
  while (std::getline(csv, line)) {
    const auto f = split_csv_row(line);
    ASSERT_EQ(f.size(), csv_columns().size());
    EXPECT_EQ(f[3], "tdcs-0.9-0.9");
    ++lines;
  }
  EXPECT_EQ(lines, 12);

  const auto agg = nlohmann::json::parse(slurp(summary.json_path));
  EXPECT_EQ(agg["runs"], 12);
  const auto& acc = agg["noise_accuracy"]["tdcs-0.9-0.9"];
  EXPECT_GE(acc["complete"].get<double>(), 5.0 / 6.0);
  EXPECT_DOUBLE_EQ(acc["ground_truth"].get<double>(), 1.0);
  EXPECT_DOUBLE_EQ(acc["out_of_set_noise"].get<double>(), 0.0);
  EXPECT_GT(agg["sdr_db"]["ground_truth"]["0.000000"].get<double>(), 3.0);

  // A second invocation reuses every row and rewrites the same bytes.
  const auto before = slurp(summary.csv_path);
  const auto again = run_manifest(read_manifest(dir / "run.txt"));
  EXPECT_EQ(again.reused, 12);
  EXPECT_EQ(slurp(again.csv_path), before);
}

// Scenes written to disk add up and carry the SNR they were built for.
TEST(Pipeline, WrittenScenesMatchTheirComponents) {
  const auto dir = scratch("scenes");
  auto m = parse_manifest("corpus = synthetic:8\nscenarios = 1\nsnr = -5, 5\n");
  m.out = dir;
  const auto corpus = open_corpus(m.corpus);
  ASSERT_EQ(write_scenes(m, corpus, dir), 2);
  for (const char* tag : {"-5", "+5"}) {
    const std::string base = (dir / ("scene001_snr" + std::string(tag))).string();
    const auto mixture = read_wav(base + "_mix.wav");
    const auto speech = read_wav(base + "_speech.wav");
    const auto noise = read_wav(base + "_noise.wav");
    ASSERT_EQ(mixture.size(), speech.size());
    ASSERT_EQ(mixture.size(), noise.size());
    for (std::size_t i = 0; i < mixture.size(); i += 53)
      EXPECT_NEAR(mixture.samples[i], speech.samples[i] + noise.samples[i], 3.0 / 32767);
  }
  const auto scenes = nlohmann::json::parse(slurp(dir / "scenes.json"));
  EXPECT_EQ(scenes.size(), 2u);
}

}  // namespace
}  // namespace sparsescene
