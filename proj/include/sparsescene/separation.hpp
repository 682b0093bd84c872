#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "sparsescene/dictionary.hpp"
#include "sparsescene/recovery.hpp"
#include "sparsescene/speaker_identification.hpp"

namespace sparsescene {

/// Frames of one noise segment and the dictionaries used to split them.
struct SeparationPart {
  FrameRange frames;
  const Dictionary* noise = nullptr;
  const Dictionary* speaker = nullptr;
};

struct SeparationResult {
  Matrix speech_features;  // P x n
  Matrix noise_features;   // P x n
  AudioSignal speech;
  AudioSignal noise;       // mixed - speech
  std::vector<Eigen::Index> failed_frames;  // all energy assigned to noise
};

/// Splits every frame covered by `parts` on [D_noise | D_speaker]; frames not
/// covered go entirely to noise. fm must carry the phase of `mixed`.
SeparationResult separate(const AudioSignal& mixed, const FeatureMatrix& fm, const std::vector<SeparationPart>& parts,
                          const SolverOptions& options = {});

SeparationResult separate(const AudioSignal& mixed, const FeatureMatrix& fm, const Dictionary& noise,
                          const Dictionary& speaker, const SolverOptions& options = {});

/// Feature-domain split of a single frame range, without resynthesis.
std::pair<Matrix, Matrix> separate_features(const FeatureMatrix& fm, FrameRange frames, const Dictionary& noise,
                                            const Dictionary& speaker, const SolverOptions& options = {},
                                            std::vector<Eigen::Index>* failed = nullptr);

inline constexpr double kSdrCapDb = 100.0;

/// Sample ranges [first, second) over which a metric is evaluated.
using SampleMask = std::vector<std::pair<std::size_t, std::size_t>>;

/// 20 log10(|s| / |s - s_hat|), capped at kSdrCapDb. An empty mask means
/// the whole signal.
double sdr(const AudioSignal& reference, const AudioSignal& estimate, const SampleMask& mask = {});
double sdr(const std::vector<double>& reference, const std::vector<double>& estimate, const SampleMask& mask = {});

struct SnrError {
  double mean_abs_db = 0.0;
  double std_db = 0.0;  // sample standard deviation; 0 with fewer than two segments
  std::vector<double> per_segment_db;  // SNR_true - SNR_estimated
  int skipped = 0;                     // segments with a zero-energy term
};

SnrError segmental_snr_error(const Matrix& true_speech, const Matrix& true_noise, const Matrix& est_speech,
                             const Matrix& est_noise, const std::vector<FrameRange>& segments);

struct SpeechSegments {
  std::vector<Eigen::Index> cluster_frames;  // ascending
  std::vector<int> k_used;                   // per part
  bool reduced = false;                      // some part had fewer maxima than k
};

/// Strict interior local maxima of `energies`.
std::vector<Eigen::Index> local_maxima(const std::vector<double>& energies, FrameRange range);

struct KMeans1d {
  std::vector<double> centroids;
  std::vector<int> assignment;
};

/// Lloyd iterations from centroids spread evenly between min and max.
KMeans1d kmeans_1d(const std::vector<double>& values, int k, int max_iters = 100);

/// Per part: local maxima, 1-D k-means on their energies, keep the members
/// of the highest-centroid cluster.
SpeechSegments detect_speech_segments(const std::vector<double>& energies, const std::vector<FrameRange>& parts,
                                      int k);

struct DetectionRates {
  double miss_rate = 0.0;         // percent
  double false_alarm_rate = 0.0;  // percent
  bool no_cluster_frames = false;
  bool no_segments = false;
};

/// Intervals are [start_s, end_s] in seconds; frames map to their midpoints.
DetectionRates miss_false_rates(const std::vector<Eigen::Index>& cluster_frames,
                                const std::vector<std::pair<double, double>>& intervals, int hop, int frame_length,
                                int sample_rate = kCanonicalRate);

}  // namespace sparsescene
