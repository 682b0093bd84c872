#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sparsescene/audio.hpp"
#include "sparsescene/dictionary.hpp"

namespace sparsescene {

struct NoiseSource {
  std::string label;
  AudioSignal test;   // scenes draw from here
  AudioSignal train;  // dictionary learning only
};

struct Utterance {
  std::string name;
  AudioSignal audio;
};

struct SpeakerSource {
  std::string label;
  std::vector<Utterance> train;
  std::vector<Utterance> update;  // held out for dictionary refresh
  std::vector<Utterance> test;
};

struct Corpus {
  std::vector<NoiseSource> noises;
  std::vector<SpeakerSource> speakers;

  std::vector<std::string> noise_labels() const;
  std::vector<std::string> speaker_labels() const;
  const NoiseSource& noise(const std::string& label) const;
  const SpeakerSource& speaker(const std::string& label) const;
};

struct SynthCorpusParams {
  double noise_seconds = 30.0;
  double test_seconds = 20.0;  // leading part of each noise used for scenes
  int train_utterances = 8;
  int update_utterances = 1;
  int test_utterances = 3;
  double min_utterance_s = 2.0;
  double max_utterance_s = 3.0;
};

/// Four generated noise types and four harmonic voices.
Corpus synth_corpus(std::uint64_t seed, const SynthCorpusParams& params = {});

/// Reads noise/<label>.wav and speaker/<label>/<utt>.wav with train.list,
/// update.list and test.list beside the speaker's files. The first
/// test_seconds of each noise are scene material, the rest is training data.
/// Unreadable entries are skipped with a warning.
Corpus load_corpus(const std::filesystem::path& root, double test_seconds = 20.0);

void save_corpus(const Corpus& corpus, const std::filesystem::path& root);

/// "synthetic:SEED" or a corpus directory.
Corpus open_corpus(const std::string& spec, double test_seconds = 20.0);

/// Pruned training features of one source.
Matrix training_features(const NoiseSource& source);
Matrix training_features(const SpeakerSource& source);
Matrix training_features(const std::vector<Utterance>& utterances);

/// Noise dictionaries first, then speakers, each learnt with every earlier
/// dictionary as TDCS prior.
DictionaryBank learn_bank(const Corpus& corpus, const LearnParams& params);

}  // namespace sparsescene
