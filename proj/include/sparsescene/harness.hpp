#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "sparsescene/corpus.hpp"
#include "sparsescene/noise_segmentation.hpp"
#include "sparsescene/separation.hpp"
#include "sparsescene/speaker_identification.hpp"

namespace sparsescene {

/// Energy window used when setting the noise gain.
enum class SnrReference { SpeechActive, WholeSegment };

struct Mixture {
  AudioSignal mixture;  // speech + noise, sample for sample
  AudioSignal speech;
  AudioSignal noise;    // scaled
  double noise_gain = 1.0;
};

/// Sample range [first, last).
using SampleSpan = std::pair<std::size_t, std::size_t>;

/// Scales `noise` so the speech-to-noise energy ratio equals snr_db. With
/// SpeechActive both energies are taken over `span`, by default the range
/// from the first to the last nonzero speech sample; WholeSegment uses the
/// full length. The output has the length of `speech`.
Mixture mix(const AudioSignal& speech, const AudioSignal& noise, double snr_db,
            SnrReference reference = SnrReference::SpeechActive, std::optional<SampleSpan> span = std::nullopt);

struct Placement {
  std::string speaker;
  int utterance = 0;  // index into the speaker's test utterances, modulo their count
  double start_s = 0.0;
};

struct MixScenario {
  int index = 0;
  std::string noise_a, noise_b;
  std::string speaker_a, speaker_b;
  double transition_s = 10.0;
  double total_s = 20.0;
  double snr_db = 0.0;
  std::vector<Placement> placements;  // one per part, in time order
  std::uint64_t seed = 0;

  /// Throws DataError unless the timing constraints hold.
  void validate(double max_utterance_s) const;
};

struct ScenarioParams {
  double total_s = 20.0;
  double transition_lo_s = 9.0;
  double transition_hi_s = 11.0;
  double min_gap_s = 2.0;
  double edge_margin_s = 0.5;
  double max_utterance_s = 4.0;  // placements leave room for this length
};

/// One scenario per (noise, speaker pair): noise i leads, followed by noise
/// (i + 1 + p mod (N - 1)) mod N for pair p. Speakers in the first half of
/// the list are paired with a seeded permutation of the second half.
std::vector<MixScenario> build_scenarios(const std::vector<std::string>& noise_labels,
                                         const std::vector<std::string>& speaker_labels, std::uint64_t seed,
                                         const ScenarioParams& params = {});

struct SimulatedScene {
  MixScenario scenario;
  AudioSignal mixture;
  AudioSignal speech;  // ground-truth components
  AudioSignal noise;
  std::size_t transition_sample = 0;
  std::vector<SampleSpan> utterance_spans;
  std::vector<double> noise_gains;                                  // per part
};

SimulatedScene simulate(const MixScenario& scenario, const Corpus& corpus,
                        SnrReference reference = SnrReference::SpeechActive,
                        double max_utterance_s = ScenarioParams{}.max_utterance_s);

enum class Regime { Complete, GroundTruth, OutOfSetNoise, OutOfSetSpeaker, UpdatedNoise, UpdatedSpeaker };

std::string to_string(Regime regime);
Regime parse_regime(const std::string& name);
std::vector<Regime> parse_regimes(const std::string& list);

/// The part of a bank a regime may use, with per-dictionary read counters.
class BankView {
 public:
  BankView(const DictionaryBank& bank, Regime regime, const MixScenario& scenario);

  std::vector<int> noise_indices() const;    // usable, bank order
  std::vector<int> speaker_indices() const;
  const Dictionary& noise(int index) const;  // counted; UsageError when removed
  const Dictionary& speaker(int index) const;
  const DictionaryBank& bank() const { return bank_; }

  const std::vector<int>& noise_reads() const { return noise_reads_; }
  const std::vector<int>& speaker_reads() const { return speaker_reads_; }

 private:
  const DictionaryBank& bank_;
  std::vector<bool> noise_ok_, speaker_ok_;
  mutable std::vector<int> noise_reads_, speaker_reads_;
};

enum class Stage { Segmentation, Identification, Full };

struct RunParams {
  SegmentationParams segmentation;
  IdentifyParams identify;
  SolverOptions separation;
  SnrReference snr_reference = SnrReference::SpeechActive;
  double max_utterance_s = ScenarioParams{}.max_utterance_s;
  Stage stop_after = Stage::Full;
  std::string method;  // copied into the report
};

struct EvaluationReport {
  // Metrics stay NaN until the stage that computes them has run.
  static constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();

  std::string run_id;
  MixScenario scenario;
  std::string method;
  Regime regime = Regime::Complete;

  std::string est_noise_1, est_noise_2;
  bool noise_correct_1 = false, noise_correct_2 = false;
  double est_transition_s = kUnset;
  double transition_error_s = kUnset;
  bool degenerate = false;

  std::string est_speaker_1, est_speaker_2;
  bool speaker_correct_1 = false, speaker_correct_2 = false;
  bool speaker_top3_1 = false, speaker_top3_2 = false;
  bool low_confidence_1 = false, low_confidence_2 = false;

  double sdr_db = kUnset;
  double input_sdr_db = kUnset;
  double snr_error_mean_abs_db = kUnset;
  double snr_error_std_db = kUnset;
  double mr_k2 = kUnset, far_k2 = kUnset;
  double mr_k4 = kUnset, far_k4 = kUnset;
  int failed_frames = 0;

  std::string failed_stage;  // empty on success
  std::string message;
  Stage completed = Stage::Full;

  std::vector<int> noise_reads, speaker_reads;  // bank access counters, not written to CSV
  bool ok() const { return failed_stage.empty(); }
};

/// Stable identifier of a run, FNV-1a over the scenario, regime and method.
std::string run_id(const MixScenario& scenario, Regime regime, const std::string& method);

/// Segmentation, speaker identification per segment, separation and
/// metrics. Stage failures are recorded in the report instead of thrown.
EvaluationReport run_scenario(const MixScenario& scenario, const Corpus& corpus, const DictionaryBank& bank,
                              Regime regime, const RunParams& params = {});

/// Estimated content of a recording: noise classes, transition, speaker per
/// noise segment and the frames picked by speech-segment detection.
struct SceneHypothesis {
  std::vector<std::string> noise;     // one label per segment
  std::vector<FrameRange> segments;
  Eigen::Index transition_frame = 0;  // == num_frames when degenerate
  double transition_s = 0.0;
  bool degenerate = false;
  std::vector<std::string> speakers;  // one label per segment
  std::vector<SpeakerEvidence> evidence;
  std::vector<Eigen::Index> speech_frames;
};

/// Full-bank segmentation and speaker identification of one recording.
SceneHypothesis analyze_scene(const FeatureMatrix& fm, const DictionaryBank& bank, const RunParams& params = {},
                              int detection_k = 2);

/// Separates a recording using the dictionaries chosen by analyze_scene.
SeparationResult separate_scene(const AudioSignal& mixed, const FeatureMatrix& fm, const DictionaryBank& bank,
                                const SceneHypothesis& scene, const SolverOptions& options = {});

/// First frame whose midpoint is at or after `seconds`.
Eigen::Index frame_at(const FeatureMatrix& fm, double seconds);

}  // namespace sparsescene
