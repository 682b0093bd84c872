#pragma once

#include <utility>
#include <vector>

#include "sparsescene/dictionary.hpp"

namespace sparsescene {

/// Per-frame block scores against every noise dictionary.
struct FrameLabelTrack {
  std::vector<int> labels;       // argmax score per frame, lowest index on ties
  Matrix scores;                 // n x N_ns, >= 0
  std::vector<double> energies;  // frame energies
};

struct SegmentationParams {
  double purity = 0.90;
  double min_span_s = 2.0;       // spans at or below this are not split further
  double refine_window_s = 1.0;  // search radius and balance window
  int low_energy_frames = 10;
};

struct NoiseSegmentation {
  int class_1 = 0;               // noise index of the leading segment
  int class_2 = 0;               // noise index of the trailing segment
  Eigen::Index transition_frame = 0;  // first frame of the trailing segment
  double transition_time = 0.0;  // midpoint of transition_frame, seconds
  std::vector<int> segment_labels;
  bool degenerate = false;       // single class; transition_frame == n
};

/// scores(i, j) = || D_j^T y_i ||_1 with y_i scaled to unit L2 norm.
FrameLabelTrack frame_scores(const FeatureMatrix& fm, const std::vector<const Dictionary*>& noise_dicts);

/// Recursive halving; returns labels for frames [a, b] (inclusive).
std::vector<int> divide_recursive(const FrameLabelTrack& track, Eigen::Index a, Eigen::Index b,
                                  double purity, Eigen::Index min_frames, int low_energy_frames = 10);

struct Consolidation {
  int class_1 = 0;  // most frequent label
  int class_2 = 0;  // second most frequent (== class_1 when degenerate)
  std::vector<int> labels;
  bool degenerate = false;
};

/// Keeps the two most frequent labels and moves every run to the class
/// whose index centroid is nearest to the run's centroid.
Consolidation consolidate_two_classes(const std::vector<int>& labels);

/// Candidate frames [lo, hi] searched around i_init.
std::pair<Eigen::Index, Eigen::Index> refine_candidates(Eigen::Index i_init, Eigen::Index n,
                                                        Eigen::Index window);

/// Balance search: minimises |#class_2 in [c, c+w) - #class_1 in [c-w, c)|
/// over the candidate range, ties to the candidate nearest i_init then lowest.
/// w is reduced to min(window, c, n - c) so both windows stay equal.
Eigen::Index refine_transition(const FrameLabelTrack& track, int class_1, int class_2,
                               Eigen::Index i_init, Eigen::Index window);

NoiseSegmentation segment_noise(const FeatureMatrix& fm, const std::vector<const Dictionary*>& noise_dicts,
                                const SegmentationParams& params = {});

/// Same pipeline starting from precomputed scores.
NoiseSegmentation segment_track(const FrameLabelTrack& track, const FeatureMatrix& fm,
                                const SegmentationParams& params = {});

}  // namespace sparsescene
