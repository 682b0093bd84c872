#pragma once

#include <vector>

#include "sparsescene/dictionary.hpp"
#include "sparsescene/recovery.hpp"

namespace sparsescene {

/// Half-open frame range [begin, end).
struct FrameRange {
  Eigen::Index begin = 0;
  Eigen::Index end = 0;
  Eigen::Index size() const noexcept { return end - begin; }
};

struct GateResult {
  std::vector<Eigen::Index> rows;  // rows of the SW matrix that pass
  double fac_used = 0.0;
  bool fail_open = false;
};

struct SpeakerEvidence {
  int segment_index = 0;
  std::vector<Eigen::Index> selected_frames;  // ascending
  std::vector<Eigen::Index> failed_frames;    // solver failures, excluded from gating
  std::vector<Eigen::Index> gated_frames;     // subset of selected_frames
  Matrix per_frame_sw;  // selected_frames.size() x (N_sp + 1), last column is noise; failed rows are 0
  std::vector<double> tsw;
  double fac_used = 0.0;
  bool fail_open = false;
  std::vector<int> ranking;  // speaker indices by descending TSW
  bool low_confidence = false;

  int estimate() const { return ranking.front(); }
};

struct IdentifyParams {
  double fraction = 0.30;
  double fac = 4.0;
  double fac_cap = 64.0;
  double min_gate_s = 0.7;
  double confidence_ratio = 1.05;
  SolverOptions solver;
};

/// ceil(fraction * |segment|) highest-energy frames; ties go to the lower
/// index; returned in ascending order.
std::vector<Eigen::Index> select_high_energy(const std::vector<double>& energies, FrameRange segment,
                                             double fraction = 0.30);

/// A row passes when sw(r, noise_col) < fac * mean of the speaker columns.
/// fac grows by 1 while fewer than min_frames rows pass; past fac_cap every
/// row passes.
GateResult gate_frames(const Matrix& sw, Eigen::Index noise_col, double fac, Eigen::Index min_frames,
                       double fac_cap = 64.0);

/// Speaker indices ordered by descending score, ties to the lower index.
std::vector<int> rank_scores(const std::vector<double>& scores);

/// noise_dict may be null, in which case the problem has speaker blocks only
/// and every solved frame passes the gate.
SpeakerEvidence identify_speaker(const FeatureMatrix& fm, FrameRange segment, const Dictionary* noise_dict,
                                 const std::vector<const Dictionary*>& speaker_dicts,
                                 const IdentifyParams& params = {}, int segment_index = 1);

std::vector<int> top_k(const SpeakerEvidence& evidence, int k);

}  // namespace sparsescene
