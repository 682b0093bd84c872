#include "sparsescene/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>
#include <tuple>

#include <spdlog/spdlog.h>

#include "sparsescene/error.hpp"

namespace sparsescene {

namespace {

std::size_t to_samples(double seconds, int rate = kCanonicalRate) {
  return static_cast<std::size_t>(std::llround(seconds * rate));
}

double round_ms(double seconds) { return std::round(seconds * 1000.0) / 1000.0; }

int index_of(const std::vector<Dictionary>& dicts, const std::string& label) {
  for (std::size_t i = 0; i < dicts.size(); ++i)
    if (dicts[i].source_label == label) return static_cast<int>(i);
  return -1;
}

}  // namespace

Mixture mix(const AudioSignal& speech, const AudioSignal& noise, double snr_db, SnrReference reference,
            std::optional<SampleSpan> span) {
  if (!std::isfinite(snr_db)) throw UsageError("SNR must be finite");
  if (noise.size() < speech.size())
    throw DataError("noise (" + std::to_string(noise.size()) + " samples) shorter than the placement window (" +
                    std::to_string(speech.size()) + ")");
  const auto& s = speech.samples;
  const auto first = std::find_if(s.begin(), s.end(), [](double v) { return v != 0.0; });
  if (first == s.end()) throw DataError("speech has zero energy");
  const auto last = std::find_if(s.rbegin(), s.rend(), [](double v) { return v != 0.0; }).base();
  std::size_t a = static_cast<std::size_t>(first - s.begin()), b = static_cast<std::size_t>(last - s.begin());
  if (span) {
    if (span->first >= span->second || span->second > s.size()) throw DataError("reference span outside the signal");
    std::tie(a, b) = *span;
  }
  if (reference == SnrReference::WholeSegment) {
    a = 0;
    b = s.size();
  }
  const std::span<const double> ns(noise.samples.data(), speech.size());
  const double es = energy(std::span<const double>(s).subspan(a, b - a));
  const double en = energy(ns.subspan(a, b - a));
  if (!(es > 0.0)) throw DataError("speech has zero energy over the reference span");
  if (!(en > 0.0)) throw DataError("noise has zero energy over the reference span");

  Mixture m;
  m.noise_gain = std::sqrt(es / (en * std::pow(10.0, snr_db / 10.0)));
  m.speech = speech;
  m.noise.sample_rate = m.mixture.sample_rate = speech.sample_rate;
  m.noise.samples.resize(s.size());
  m.mixture.samples.resize(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    m.noise.samples[i] = m.noise_gain * ns[i];
    m.mixture.samples[i] = s[i] + m.noise.samples[i];
  }
  return m;
}

void MixScenario::validate(double max_utterance_s) const {
  if (!(total_s > 0.0 && transition_s > 0.0 && transition_s < total_s))
    throw DataError("transition must lie inside the scene");
  if (placements.size() != 2) throw DataError("a scene has exactly one utterance per part");
  const auto& p1 = placements[0];
  const auto& p2 = placements[1];
  if (p1.start_s < 0.0 || p1.start_s + max_utterance_s > transition_s || p2.start_s < transition_s ||
      p2.start_s + max_utterance_s > total_s)
    throw DataError("utterance placement leaves its part");
  if (noise_a == noise_b) throw DataError("both parts use the same noise");
  if (speaker_a == speaker_b) throw DataError("both parts use the same speaker");
}

std::vector<MixScenario> build_scenarios(const std::vector<std::string>& noise_labels,
                                         const std::vector<std::string>& speaker_labels, std::uint64_t seed,
                                         const ScenarioParams& params) {
  if (noise_labels.size() < 2) throw DataError("at least two noise sources are needed");
  if (speaker_labels.size() < 2) throw DataError("at least two speakers are needed");
  const double half_gap = params.min_gap_s / 2.0;
  const double lo1 = params.edge_margin_s;
  const double hi2 = params.total_s - params.edge_margin_s - params.max_utterance_s;
  if (params.transition_lo_s - half_gap - params.max_utterance_s < lo1 ||
      params.transition_hi_s + half_gap > hi2 || params.transition_lo_s > params.transition_hi_s)
    throw UsageError("scene timing leaves no room for the utterances");

  const std::size_t n_noise = noise_labels.size();
  const std::size_t half = speaker_labels.size() / 2;
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> perm(half);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);

  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, 999);
  std::vector<MixScenario> out;
  for (std::size_t i = 0; i < n_noise; ++i) {
    for (std::size_t p = 0; p < half; ++p) {
      MixScenario sc;
      sc.index = static_cast<int>(out.size());
      sc.noise_a = noise_labels[i];
      sc.noise_b = noise_labels[(i + 1 + p % (n_noise - 1)) % n_noise];
      sc.speaker_a = speaker_labels[p];
      sc.speaker_b = speaker_labels[half + perm[p]];
      if (u(rng) < 0.5) std::swap(sc.speaker_a, sc.speaker_b);
      sc.total_s = params.total_s;
      sc.transition_s = round_ms(params.transition_lo_s + (params.transition_hi_s - params.transition_lo_s) * u(rng));
      const double hi1 = sc.transition_s - half_gap - params.max_utterance_s;
      const double lo2 = sc.transition_s + half_gap;
      const double start1 = round_ms(lo1 + (hi1 - lo1) * u(rng));
      const double start2 = round_ms(lo2 + (hi2 - lo2) * u(rng));
      sc.placements = {{sc.speaker_a, pick(rng), start1}, {sc.speaker_b, pick(rng), start2}};
      sc.seed = rng();
      out.push_back(std::move(sc));
    }
  }
  return out;
}

SimulatedScene simulate(const MixScenario& scenario, const Corpus& corpus, SnrReference reference,
                        double max_utterance_s) {
  scenario.validate(max_utterance_s);
  SimulatedScene scene;
  scene.scenario = scenario;
  const std::size_t total = to_samples(scenario.total_s);
  scene.transition_sample = to_samples(scenario.transition_s);
  for (auto* sig : {&scene.mixture, &scene.speech, &scene.noise}) sig->samples.reserve(total);

  const std::string noises[2] = {scenario.noise_a, scenario.noise_b};
  const std::size_t bounds[3] = {0, scene.transition_sample, total};
  for (int part = 0; part < 2; ++part) {
    const auto& src = corpus.noise(noises[part]);
    const std::size_t w0 = bounds[part], w1 = bounds[part + 1];
    if (src.test.size() < w1) throw DataError("noise '" + src.label + "' is shorter than the scene");
    AudioSignal noise;
    noise.samples.assign(src.test.samples.begin() + static_cast<std::ptrdiff_t>(w0),
                         src.test.samples.begin() + static_cast<std::ptrdiff_t>(w1));

    const auto& place = scenario.placements[static_cast<std::size_t>(part)];
    const auto& speaker = corpus.speaker(place.speaker);
    if (speaker.test.empty()) throw DataError("speaker '" + speaker.label + "' has no test utterances");
    const auto& utt = speaker.test[static_cast<std::size_t>(place.utterance) % speaker.test.size()].audio;
    if (utt.duration_s() > max_utterance_s)
      throw DataError("utterance longer than the placement allowance of " + std::to_string(max_utterance_s) + " s");
    const std::size_t start = to_samples(place.start_s);
    if (start < w0 || start + utt.size() > w1) throw DataError("utterance does not fit its part");
    AudioSignal speech;
    speech.samples.assign(w1 - w0, 0.0);
    std::copy(utt.samples.begin(), utt.samples.end(), speech.samples.begin() + static_cast<std::ptrdiff_t>(start - w0));
    scene.utterance_spans.emplace_back(start, start + utt.size());

    const auto m = mix(speech, noise, scenario.snr_db, reference, SampleSpan{start - w0, start - w0 + utt.size()});
    scene.noise_gains.push_back(m.noise_gain);
    for (auto [to, from] : {std::pair{&scene.mixture, &m.mixture}, {&scene.speech, &m.speech}, {&scene.noise, &m.noise}})
      to->samples.insert(to->samples.end(), from->samples.begin(), from->samples.end());
  }
  const auto& spans = scene.utterance_spans;
  if (static_cast<double>(spans[1].first - spans[0].second) / kCanonicalRate < 2.0 - 1e-9)
    throw DataError("utterances closer than 2 s");
  return scene;
}

std::string to_string(Regime regime) {
  switch (regime) {
    case Regime::Complete: return "complete";
    case Regime::GroundTruth: return "ground_truth";
    case Regime::OutOfSetNoise: return "out_of_set_noise";
    case Regime::OutOfSetSpeaker: return "out_of_set_speaker";
    case Regime::UpdatedNoise: return "updated_noise";
    case Regime::UpdatedSpeaker: return "updated_speaker";
  }
  return "unknown";
}

Regime parse_regime(const std::string& name) {
  for (auto r : {Regime::Complete, Regime::GroundTruth, Regime::OutOfSetNoise, Regime::OutOfSetSpeaker,
                 Regime::UpdatedNoise, Regime::UpdatedSpeaker})
    if (to_string(r) == name) return r;
  throw UsageError("unknown regime: " + name);
}

std::vector<Regime> parse_regimes(const std::string& list) {
  std::vector<Regime> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item.empty()) continue;
    const auto r = parse_regime(item);
    if (std::find(out.begin(), out.end(), r) == out.end()) out.push_back(r);
  }
  if (out.empty()) throw UsageError("no regimes given");
  return out;
}

BankView::BankView(const DictionaryBank& bank, Regime regime, const MixScenario& scenario)
    : bank_(bank),
      noise_ok_(bank.noise.size(), true),
      speaker_ok_(bank.speakers.size(), true),
      noise_reads_(bank.noise.size(), 0),
      speaker_reads_(bank.speakers.size(), 0) {
  const auto drop = [](std::vector<bool>& ok, int i) {
    if (i >= 0) ok[static_cast<std::size_t>(i)] = false;
  };
  if (regime == Regime::OutOfSetNoise || regime == Regime::UpdatedNoise) {
    drop(noise_ok_, index_of(bank.noise, scenario.noise_a));
    drop(noise_ok_, index_of(bank.noise, scenario.noise_b));
  }
  if (regime == Regime::OutOfSetSpeaker || regime == Regime::UpdatedSpeaker) {
    drop(speaker_ok_, index_of(bank.speakers, scenario.speaker_a));
    drop(speaker_ok_, index_of(bank.speakers, scenario.speaker_b));
  }
}

std::vector<int> BankView::noise_indices() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < noise_ok_.size(); ++i)
    if (noise_ok_[i]) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<int> BankView::speaker_indices() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < speaker_ok_.size(); ++i)
    if (speaker_ok_[i]) out.push_back(static_cast<int>(i));
  return out;
}

const Dictionary& BankView::noise(int index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= noise_ok_.size() || !noise_ok_[static_cast<std::size_t>(index)])
    throw UsageError("noise dictionary " + std::to_string(index) + " is not available in this regime");
  ++noise_reads_[static_cast<std::size_t>(index)];
  return bank_.noise[static_cast<std::size_t>(index)];
}

const Dictionary& BankView::speaker(int index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= speaker_ok_.size() ||
      !speaker_ok_[static_cast<std::size_t>(index)])
    throw UsageError("speaker dictionary " + std::to_string(index) + " is not available in this regime");
  ++speaker_reads_[static_cast<std::size_t>(index)];
  return bank_.speakers[static_cast<std::size_t>(index)];
}

std::string run_id(const MixScenario& sc, Regime regime, const std::string& method) {
  char buf[64];
  std::string key;
  const auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.6f|", v);
    key += buf;
  };
  key += std::to_string(sc.index) + "|" + sc.noise_a + "|" + sc.noise_b + "|" + sc.speaker_a + "|" + sc.speaker_b + "|";
  num(sc.transition_s);
  num(sc.total_s);
  num(sc.snr_db);
  for (const auto& p : sc.placements) {
    key += p.speaker + "|" + std::to_string(p.utterance) + "|";
    num(p.start_s);
  }
  key += std::to_string(sc.seed) + "|" + to_string(regime) + "|" + method;
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : key) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Eigen::Index frame_at(const FeatureMatrix& fm, double seconds) {
  const double x = (seconds * fm.sample_rate - fm.frame_length / 2.0) / fm.hop;
  auto i = static_cast<Eigen::Index>(std::ceil(x - 1e-9));
  return std::clamp<Eigen::Index>(i, 0, fm.num_frames());
}

namespace {

bool overlaps(std::size_t a0, std::size_t a1, const std::vector<std::pair<std::size_t, std::size_t>>& spans) {
  return std::any_of(spans.begin(), spans.end(), [&](const auto& s) { return a0 < s.second && s.first < a1; });
}

// Mixture frames of `range` that share no samples with any utterance.
Matrix noise_only_frames(const FeatureMatrix& fm, FrameRange range, const SimulatedScene& scene) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = range.begin; i < range.end; ++i) {
    const auto a = static_cast<std::size_t>(i * fm.hop);
    if (!overlaps(a, a + static_cast<std::size_t>(fm.frame_length), scene.utterance_spans) &&
        fm.frame_energies[static_cast<std::size_t>(i)] > 0.0)
      keep.push_back(i);
  }
  return fm.frames(Eigen::all, keep);
}

}  // namespace

EvaluationReport run_scenario(const MixScenario& scenario, const Corpus& corpus, const DictionaryBank& bank,
                              Regime regime, const RunParams& params) {
  EvaluationReport rep;
  rep.scenario = scenario;
  rep.method = params.method;
  rep.regime = regime;
  rep.run_id = run_id(scenario, regime, params.method);
  BankView view(bank, regime, scenario);
  std::string stage = "simulation";
  try {
    const auto scene = simulate(scenario, corpus, params.snr_reference, params.max_utterance_s);
    const auto fm = extract_features(scene.mixture, {}, true);
    const Eigen::Index n = fm.num_frames();
    const std::string true_noise[2] = {scenario.noise_a, scenario.noise_b};
    const std::string true_speaker[2] = {scenario.placements[0].speaker, scenario.placements[1].speaker};

    stage = "setup";
    for (const auto& label : true_noise)
      if (bank.noise_index(label) < 0) throw DataError("bank has no dictionary for noise '" + label + "'");
    for (const auto& label : true_speaker)
      if (bank.speaker_index(label) < 0) throw DataError("bank has no dictionary for speaker '" + label + "'");

    stage = "segmentation";
    std::vector<FrameRange> segments;
    std::vector<int> seg_noise;  // bank indices
    Eigen::Index i_t = 0;
    if (regime == Regime::GroundTruth) {
      i_t = frame_at(fm, scenario.transition_s);
      seg_noise = {bank.noise_index(true_noise[0]), bank.noise_index(true_noise[1])};
      rep.est_transition_s = i_t < n ? fm.frame_time(i_t) : fm.frame_time(n);
    } else {
      const auto avail = view.noise_indices();
      if (avail.empty()) throw DataError("no noise dictionaries available");
      std::vector<const Dictionary*> dicts;
      for (int i : avail) dicts.push_back(&view.noise(i));
      const auto seg = segment_noise(fm, dicts, params.segmentation);
      i_t = seg.transition_frame;
      rep.degenerate = seg.degenerate;
      rep.est_transition_s = seg.transition_time;
      seg_noise = {avail[static_cast<std::size_t>(seg.class_1)], avail[static_cast<std::size_t>(seg.class_2)]};
    }
    if (rep.degenerate) {
      segments = {{0, n}};
      seg_noise.resize(1);
    } else {
      segments = {{0, i_t}, {i_t, n}};
    }
    rep.transition_error_s = std::abs(rep.est_transition_s - scenario.transition_s);
    rep.est_noise_1 = bank.noise[static_cast<std::size_t>(seg_noise[0])].source_label;
    rep.est_noise_2 = bank.noise[static_cast<std::size_t>(seg_noise.back())].source_label;
    rep.noise_correct_1 = rep.est_noise_1 == true_noise[0];
    rep.noise_correct_2 = !rep.degenerate && rep.est_noise_2 == true_noise[1];

    // Noise dictionaries used from here on, one per segment.
    std::vector<Dictionary> refreshed;
    std::vector<const Dictionary*> noise_dict;
    if (regime == Regime::UpdatedNoise) {
      refreshed.reserve(segments.size());
      for (std::size_t k = 0; k < segments.size(); ++k) {
        const auto& old = view.noise(seg_noise[k]);
        refreshed.push_back(update_dictionary(old, noise_only_frames(fm, segments[k], scene)));
        noise_dict.push_back(&refreshed.back());
      }
    } else {
      for (int g : seg_noise) noise_dict.push_back(&view.noise(g));
    }
    if (params.stop_after == Stage::Segmentation) {
      rep.completed = Stage::Segmentation;
      rep.noise_reads = view.noise_reads();
      rep.speaker_reads = view.speaker_reads();
      return rep;
    }

    stage = "identification";
    std::vector<int> seg_speaker;
    if (regime == Regime::GroundTruth) {
      for (std::size_t k = 0; k < segments.size(); ++k) seg_speaker.push_back(bank.speaker_index(true_speaker[k]));
    } else {
      const auto avail = view.speaker_indices();
      if (avail.empty()) throw DataError("no speaker dictionaries available");
      std::vector<const Dictionary*> dicts;
      for (int i : avail) dicts.push_back(&view.speaker(i));
      for (std::size_t k = 0; k < segments.size(); ++k) {
        const auto ev = identify_speaker(fm, segments[k], noise_dict[k], dicts, params.identify, static_cast<int>(k + 1));
        const auto top = top_k(ev, std::min<int>(3, static_cast<int>(avail.size())));
        seg_speaker.push_back(avail[static_cast<std::size_t>(ev.estimate())]);
        const bool in_top3 = std::any_of(top.begin(), top.end(), [&](int j) {
          return bank.speakers[static_cast<std::size_t>(avail[static_cast<std::size_t>(j)])].source_label == true_speaker[k];
        });
        (k == 0 ? rep.speaker_top3_1 : rep.speaker_top3_2) = in_top3;
        (k == 0 ? rep.low_confidence_1 : rep.low_confidence_2) = ev.low_confidence;
      }
    }
    rep.est_speaker_1 = bank.speakers[static_cast<std::size_t>(seg_speaker[0])].source_label;
    if (!rep.degenerate) rep.est_speaker_2 = bank.speakers[static_cast<std::size_t>(seg_speaker[1])].source_label;
    rep.speaker_correct_1 = rep.est_speaker_1 == true_speaker[0];
    rep.speaker_correct_2 = !rep.degenerate && rep.est_speaker_2 == true_speaker[1];
    if (regime == Regime::GroundTruth) {
      rep.speaker_top3_1 = rep.speaker_correct_1;
      rep.speaker_top3_2 = rep.speaker_correct_2;
    }

    std::vector<Dictionary> refreshed_sp;
    std::vector<const Dictionary*> speaker_dict;
    if (regime == Regime::UpdatedSpeaker) {
      refreshed_sp.reserve(segments.size());
      for (std::size_t k = 0; k < segments.size(); ++k) {
        const auto& held_out = corpus.speaker(true_speaker[k]).update;
        if (held_out.empty()) throw DataError("speaker '" + true_speaker[k] + "' has no update utterances");
        refreshed_sp.push_back(update_dictionary(view.speaker(seg_speaker[k]), training_features(held_out)));
        speaker_dict.push_back(&refreshed_sp.back());
      }
    } else {
      for (int g : seg_speaker) speaker_dict.push_back(&view.speaker(g));
    }
    if (params.stop_after == Stage::Identification) {
      rep.completed = Stage::Identification;
      rep.noise_reads = view.noise_reads();
      rep.speaker_reads = view.speaker_reads();
      return rep;
    }

    stage = "separation";
    std::vector<SeparationPart> parts;
    for (std::size_t k = 0; k < segments.size(); ++k) parts.push_back({segments[k], noise_dict[k], speaker_dict[k]});
    const auto sep = separate(scene.mixture, fm, parts, params.separation);
    rep.failed_frames = static_cast<int>(sep.failed_frames.size());

    stage = "metrics";
    const SampleMask mask(scene.utterance_spans.begin(), scene.utterance_spans.end());
    rep.sdr_db = sdr(scene.speech, sep.speech, mask);
    rep.input_sdr_db = sdr(scene.speech, scene.mixture, mask);

    std::vector<FrameRange> speech_frames;
    std::vector<std::pair<double, double>> intervals;
    for (const auto& [a, b] : scene.utterance_spans) {
      const double t0 = static_cast<double>(a) / kCanonicalRate, t1 = static_cast<double>(b) / kCanonicalRate;
      speech_frames.push_back({frame_at(fm, t0), frame_at(fm, t1)});
      intervals.emplace_back(t0, t1);
    }
    const auto true_sp = extract_features(scene.speech);
    const auto true_ns = extract_features(scene.noise);
    const auto err = segmental_snr_error(true_sp.frames, true_ns.frames, sep.speech_features, sep.noise_features,
                                         speech_frames);
    rep.snr_error_mean_abs_db = err.per_segment_db.empty() ? EvaluationReport::kUnset : err.mean_abs_db;
    rep.snr_error_std_db = err.per_segment_db.empty() ? EvaluationReport::kUnset : err.std_db;

    for (int k : {2, 4}) {
      const auto found = detect_speech_segments(fm.frame_energies, segments, k);
      const auto rates = miss_false_rates(found.cluster_frames, intervals, fm.hop, fm.frame_length, fm.sample_rate);
      (k == 2 ? rep.mr_k2 : rep.mr_k4) = rates.miss_rate;
      (k == 2 ? rep.far_k2 : rep.far_k4) = rates.no_cluster_frames ? EvaluationReport::kUnset : rates.false_alarm_rate;
    }
  } catch (const std::exception& e) {
    rep.failed_stage = stage;
    rep.message = e.what();
    spdlog::warn("run {} ({}): {} failed: {}", rep.run_id, to_string(regime), stage, e.what());
  }
  rep.noise_reads = view.noise_reads();
  rep.speaker_reads = view.speaker_reads();
  return rep;
}

SceneHypothesis analyze_scene(const FeatureMatrix& fm, const DictionaryBank& bank, const RunParams& params,
                              int detection_k) {
  bank.validate();
  if (bank.noise.empty() || bank.speakers.empty()) throw DataError("bank needs noise and speaker dictionaries");
  if (bank.dim() != fm.bins())
    throw DataError("bank has " + std::to_string(bank.dim()) + " bins, features have " + std::to_string(fm.bins()));
  std::vector<const Dictionary*> noises, speakers;
  for (const auto& d : bank.noise) noises.push_back(&d);
  for (const auto& d : bank.speakers) speakers.push_back(&d);

  SceneHypothesis h;
  const auto seg = segment_noise(fm, noises, params.segmentation);
  h.transition_frame = seg.transition_frame;
  h.transition_s = seg.transition_time;
  h.degenerate = seg.degenerate;
  const Eigen::Index n = fm.num_frames();
  std::vector<int> classes{seg.class_1};
  if (seg.degenerate) {
    h.segments = {{0, n}};
  } else {
    h.segments = {{0, seg.transition_frame}, {seg.transition_frame, n}};
    classes.push_back(seg.class_2);
  }
  for (std::size_t k = 0; k < h.segments.size(); ++k) {
    const auto* noise = noises[static_cast<std::size_t>(classes[k])];
    h.noise.push_back(noise->source_label);
    h.evidence.push_back(
        identify_speaker(fm, h.segments[k], noise, speakers, params.identify, static_cast<int>(k + 1)));
    h.speakers.push_back(bank.speakers[static_cast<std::size_t>(h.evidence.back().estimate())].source_label);
  }
  h.speech_frames = detect_speech_segments(fm.frame_energies, h.segments, detection_k).cluster_frames;
  return h;
}

SeparationResult separate_scene(const AudioSignal& mixed, const FeatureMatrix& fm, const DictionaryBank& bank,
                                const SceneHypothesis& scene, const SolverOptions& options) {
  std::vector<SeparationPart> parts;
  for (std::size_t k = 0; k < scene.segments.size(); ++k) {
    const int ni = bank.noise_index(scene.noise[k]), si = bank.speaker_index(scene.speakers[k]);
    if (ni < 0 || si < 0) throw DataError("scene refers to a source missing from the bank");
    parts.push_back({scene.segments[k], &bank.noise[static_cast<std::size_t>(ni)],
                     &bank.speakers[static_cast<std::size_t>(si)]});
  }
  return separate(mixed, fm, parts, options);
}

}  // namespace sparsescene
