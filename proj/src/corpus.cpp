#include "sparsescene/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <random>

#include <spdlog/spdlog.h>

#include "sparsescene/error.hpp"
#include "sparsescene/synth.hpp"

namespace fs = std::filesystem;

namespace sparsescene {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

AudioSignal excerpt(const AudioSignal& s, std::size_t first, std::size_t last) {
  AudioSignal out;
  out.sample_rate = s.sample_rate;
  out.samples.assign(s.samples.begin() + static_cast<std::ptrdiff_t>(first),
                     s.samples.begin() + static_cast<std::ptrdiff_t>(last));
  return out;
}

std::vector<std::string> read_list(const fs::path& path) {
  std::vector<std::string> names;
  std::ifstream f(path);
  if (!f) return names;
  std::string line;
  while (std::getline(f, line)) {
    line.erase(0, line.find_first_not_of(" \t\r"));
    line.erase(line.find_last_not_of(" \t\r") + 1);
    if (!line.empty() && line[0] != '#') names.push_back(line);
  }
  return names;
}

std::vector<Utterance> read_utterances(const fs::path& dir, const std::vector<std::string>& names) {
  std::vector<Utterance> out;
  for (const auto& name : names) {
    try {
      out.push_back({name, read_wav(dir / name)});
    } catch (const Error& e) {
      spdlog::warn("skipping {}: {}", (dir / name).string(), e.what());
    }
  }
  return out;
}

void write_list(const fs::path& path, const std::vector<Utterance>& utts) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path.string());
  for (const auto& u : utts) f << u.name << '\n';
}

}  // namespace

std::vector<std::string> Corpus::noise_labels() const {
  std::vector<std::string> out;
  for (const auto& n : noises) out.push_back(n.label);
  return out;
}

std::vector<std::string> Corpus::speaker_labels() const {
  std::vector<std::string> out;
  for (const auto& s : speakers) out.push_back(s.label);
  return out;
}

const NoiseSource& Corpus::noise(const std::string& label) const {
  for (const auto& n : noises)
    if (n.label == label) return n;
  throw DataError("unknown noise label: " + label);
}

const SpeakerSource& Corpus::speaker(const std::string& label) const {
  for (const auto& s : speakers)
    if (s.label == label) return s;
  throw DataError("unknown speaker label: " + label);
}

Corpus synth_corpus(std::uint64_t seed, const SynthCorpusParams& params) {
  if (!(params.test_seconds > 0.0 && params.noise_seconds > params.test_seconds))
    throw UsageError("noise duration must exceed the scene portion");
  if (!(params.min_utterance_s > 0.0 && params.max_utterance_s >= params.min_utterance_s))
    throw UsageError("invalid utterance duration range");
  Corpus c;
  const std::vector<std::pair<NoiseKind, std::string>> kinds{
      {NoiseKind::LowBand, "lowband"}, {NoiseKind::Modulated, "modulated"},
      {NoiseKind::Impulsive, "impulsive"}, {NoiseKind::Hum, "hum"}};
  for (std::size_t k = 0; k < kinds.size(); ++k) {
    const auto audio = synth_noise(kinds[k].first, params.noise_seconds, mix_seed(seed, k));
    const auto cut = static_cast<std::size_t>(params.test_seconds * kCanonicalRate);
    c.noises.push_back({kinds[k].second, excerpt(audio, 0, cut), excerpt(audio, cut, audio.size())});
  }
  const auto voices = default_voices();
  for (std::size_t v = 0; v < voices.size(); ++v) {
    SpeakerSource s;
    s.label = voices[v].label;
    std::mt19937_64 rng(mix_seed(seed, 100 + v));
    std::uniform_real_distribution<double> len(params.min_utterance_s, params.max_utterance_s);
    int counter = 0;
    const auto make = [&](std::vector<Utterance>& into, int count, const char* prefix) {
      for (int i = 0; i < count; ++i) {
        const double seconds = len(rng);
        into.push_back({std::string(prefix) + std::to_string(i) + ".wav",
                        synth_utterance(voices[v], seconds, mix_seed(seed, 1000 * (v + 1) + counter++))});
      }
    };
    make(s.train, params.train_utterances, "train");
    make(s.update, params.update_utterances, "update");
    make(s.test, params.test_utterances, "test");
    c.speakers.push_back(std::move(s));
  }
  return c;
}

Corpus load_corpus(const fs::path& root, double test_seconds) {
  if (!fs::is_directory(root)) throw DataError("corpus directory not found: " + root.string());
  Corpus c;
  std::vector<fs::path> noise_files;
  if (fs::is_directory(root / "noise"))
    for (const auto& e : fs::directory_iterator(root / "noise"))
      if (e.path().extension() == ".wav") noise_files.push_back(e.path());
  std::sort(noise_files.begin(), noise_files.end());
  const auto cut = static_cast<std::size_t>(test_seconds * kCanonicalRate);
  for (const auto& p : noise_files) {
    try {
      const auto audio = read_wav(p);
      // At least one second of training material must remain.
      if (audio.size() < cut + kCanonicalRate)
        throw DataError("noise needs at least one second beyond the scene portion");
      c.noises.push_back({p.stem().string(), excerpt(audio, 0, cut), excerpt(audio, cut, audio.size())});
    } catch (const Error& e) {
      spdlog::warn("skipping {}: {}", p.string(), e.what());
    }
  }
  std::vector<fs::path> speaker_dirs;
  if (fs::is_directory(root / "speaker"))
    for (const auto& e : fs::directory_iterator(root / "speaker"))
      if (e.is_directory()) speaker_dirs.push_back(e.path());
  std::sort(speaker_dirs.begin(), speaker_dirs.end());
  for (const auto& dir : speaker_dirs) {
    SpeakerSource s;
    s.label = dir.filename().string();
    s.train = read_utterances(dir, read_list(dir / "train.list"));
    s.update = read_utterances(dir, read_list(dir / "update.list"));
    s.test = read_utterances(dir, read_list(dir / "test.list"));
    if (s.train.empty() || s.test.empty()) {
      spdlog::warn("skipping speaker {}: no usable train or test utterances", s.label);
      continue;
    }
    c.speakers.push_back(std::move(s));
  }
  if (c.noises.empty() || c.speakers.empty()) throw DataError("corpus has no usable sources: " + root.string());
  return c;
}

void save_corpus(const Corpus& corpus, const fs::path& root) {
  fs::create_directories(root / "noise");
  for (const auto& n : corpus.noises) {
    AudioSignal whole = n.test;
    whole.samples.insert(whole.samples.end(), n.train.samples.begin(), n.train.samples.end());
    write_wav(root / "noise" / (n.label + ".wav"), whole);
  }
  for (const auto& s : corpus.speakers) {
    const auto dir = root / "speaker" / s.label;
    fs::create_directories(dir);
    for (const auto* group : {&s.train, &s.update, &s.test})
      for (const auto& u : *group) write_wav(dir / u.name, u.audio);
    write_list(dir / "train.list", s.train);
    write_list(dir / "update.list", s.update);
    write_list(dir / "test.list", s.test);
  }
}

Corpus open_corpus(const std::string& spec, double test_seconds) {
  const std::string prefix = "synthetic:";
  if (spec.rfind(prefix, 0) == 0) {
    try {
      std::size_t used = 0;
      const auto seed = std::stoull(spec.substr(prefix.size()), &used);
      if (used != spec.size() - prefix.size()) throw std::invalid_argument(spec);
      SynthCorpusParams params;
      params.test_seconds = test_seconds;
      params.noise_seconds = test_seconds + 10.0;
      return synth_corpus(seed, params);
    } catch (const std::logic_error&) {
      throw UsageError("bad synthetic corpus seed: " + spec);
    }
  }
  return load_corpus(spec, test_seconds);
}

Matrix training_features(const NoiseSource& source) {
  return prune_low_energy(extract_features(source.train)).frames;
}

Matrix training_features(const std::vector<Utterance>& utterances) {
  std::vector<Matrix> parts;
  for (const auto& u : utterances) {
    const auto fm = extract_features(u.audio);
    if (fm.num_frames() > 0) parts.push_back(fm.frames);
  }
  if (parts.empty()) throw DataError("no frames in the given utterances");
  std::vector<const Matrix*> ptrs;
  for (const auto& p : parts) ptrs.push_back(&p);
  FeatureMatrix all;
  all.frames = hconcat(ptrs);
  all.frame_energies = column_energies(all.frames);
  return prune_low_energy(all).frames;
}

Matrix training_features(const SpeakerSource& source) { return training_features(source.train); }

DictionaryBank learn_bank(const Corpus& corpus, const LearnParams& params) {
  DictionaryBank bank;
  bank.atom_count = params.n_atoms;
  bank.noise.reserve(corpus.noises.size());
  bank.speakers.reserve(corpus.speakers.size());
  std::vector<const Dictionary*> prior;
  for (const auto& n : corpus.noises) {
    auto d = learn(training_features(n), params, prior);
    d.source_label = n.label;
    bank.noise.push_back(std::move(d));
    prior.push_back(&bank.noise.back());
  }
  for (const auto& s : corpus.speakers) {
    auto d = learn(training_features(s), params, prior);
    d.source_label = s.label;
    bank.speakers.push_back(std::move(d));
    prior.push_back(&bank.speakers.back());
  }
  bank.validate();
  return bank;
}

}  // namespace sparsescene
