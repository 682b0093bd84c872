#include "sparsescene/noise_segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <numeric>

#include "sparsescene/error.hpp"

namespace sparsescene {

namespace {

// Most frequent label among `labels[idx]`; lowest label wins ties.
template <typename Indices>
std::pair<int, Eigen::Index> modal_label(const std::vector<int>& labels, const Indices& idx) {
  std::map<int, Eigen::Index> counts;
  for (auto i : idx) ++counts[labels[static_cast<std::size_t>(i)]];
  int best = 0;
  Eigen::Index best_count = -1;
  for (const auto& [label, c] : counts)
    if (c > best_count) {
      best = label;
      best_count = c;
    }
  return {best, best_count};
}

void divide(const FrameLabelTrack& track, Eigen::Index a, Eigen::Index b, double purity,
            Eigen::Index min_frames, int low_energy_frames, std::vector<int>& out, Eigen::Index offset) {
  std::vector<Eigen::Index> span(static_cast<std::size_t>(b - a + 1));
  std::iota(span.begin(), span.end(), a);
  const auto [label, count] = modal_label(track.labels, span);
  const auto len = static_cast<double>(span.size());
  auto fill = [&](int value) {
    for (auto i = a; i <= b; ++i) out[static_cast<std::size_t>(i - offset)] = value;
  };
  if (static_cast<double>(count) >= purity * len) {
    fill(label);
    return;
  }
  if (b - a <= min_frames) {
    // Lowest-energy frames are the likeliest to be noise only.
    std::stable_sort(span.begin(), span.end(), [&](auto x, auto y) {
      return track.energies[static_cast<std::size_t>(x)] < track.energies[static_cast<std::size_t>(y)];
    });
    span.resize(std::min<std::size_t>(span.size(), static_cast<std::size_t>(low_energy_frames)));
    fill(modal_label(track.labels, span).first);
    return;
  }
  const Eigen::Index m = (a + b) / 2;
  divide(track, a, m, purity, min_frames, low_energy_frames, out, offset);
  divide(track, m + 1, b, purity, min_frames, low_energy_frames, out, offset);
}

Eigen::Index frames_for(double seconds, double hop_s) {
  return std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::lround(seconds / hop_s)));
}

}  // namespace

FrameLabelTrack frame_scores(const FeatureMatrix& fm, const std::vector<const Dictionary*>& noise_dicts) {
  if (noise_dicts.empty()) throw DataError("no noise dictionaries to score against");
  const Eigen::Index n = fm.num_frames();
  Matrix unit = fm.frames;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double norm = unit.col(i).norm();
    if (norm > 0.0) unit.col(i) /= norm;
  }
  FrameLabelTrack track;
  track.scores.resize(n, static_cast<Eigen::Index>(noise_dicts.size()));
  for (std::size_t j = 0; j < noise_dicts.size(); ++j) {
    const Dictionary& d = *noise_dicts[j];
    if (d.dim() != fm.bins())
      throw DataError("dimension mismatch: dictionary '" + d.source_label + "' has " + std::to_string(d.dim()) +
                      " bins, features have " + std::to_string(fm.bins()));
    track.scores.col(static_cast<Eigen::Index>(j)) = (d.atoms.transpose() * unit).cwiseAbs().colwise().sum().transpose();
  }
  track.labels.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index best = 0;
    track.scores.row(i).maxCoeff(&best);
    track.labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  track.energies = fm.frame_energies;
  if (track.energies.size() != static_cast<std::size_t>(n)) track.energies = column_energies(fm.frames);
  return track;
}

std::vector<int> divide_recursive(const FrameLabelTrack& track, Eigen::Index a, Eigen::Index b,
                                  double purity, Eigen::Index min_frames, int low_energy_frames) {
  const auto n = static_cast<Eigen::Index>(track.labels.size());
  if (a < 0 || b >= n || a > b) throw UsageError("invalid frame span for recursive division");
  if (track.energies.size() != track.labels.size()) throw DataError("track energies and labels differ in length");
  std::vector<int> out(static_cast<std::size_t>(b - a + 1), 0);
  divide(track, a, b, purity, min_frames, low_energy_frames, out, a);
  return out;
}

Consolidation consolidate_two_classes(const std::vector<int>& labels) {
  if (labels.empty()) throw DataError("cannot consolidate an empty label sequence");
  std::map<int, std::size_t> counts;
  for (int l : labels) ++counts[l];
  std::vector<std::pair<int, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) { return x.second > y.second; });

  Consolidation out;
  out.class_1 = ranked[0].first;
  if (ranked.size() < 2) {
    out.class_2 = out.class_1;
    out.labels = labels;
    out.degenerate = true;
    return out;
  }
  out.class_2 = ranked[1].first;

  double c1 = 0.0, c2 = 0.0;
  std::size_t n1 = 0, n2 = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == out.class_1) {
      c1 += static_cast<double>(i);
      ++n1;
    } else if (labels[i] == out.class_2) {
      c2 += static_cast<double>(i);
      ++n2;
    }
  }
  c1 /= static_cast<double>(n1);
  c2 /= static_cast<double>(n2);

  out.labels = labels;
  std::size_t start = 0;
  while (start < labels.size()) {
    std::size_t end = start;
    while (end + 1 < labels.size() && labels[end + 1] == labels[start]) ++end;
    const double centre = 0.5 * static_cast<double>(start + end);
    const int target = (std::abs(centre - c2) < std::abs(centre - c1)) ? out.class_2 : out.class_1;
    for (std::size_t i = start; i <= end; ++i) out.labels[i] = target;
    start = end + 1;
  }
  return out;
}

std::pair<Eigen::Index, Eigen::Index> refine_candidates(Eigen::Index i_init, Eigen::Index n, Eigen::Index window) {
  return {std::max<Eigen::Index>(1, i_init - window), std::min<Eigen::Index>(n - 1, i_init + window)};
}

Eigen::Index refine_transition(const FrameLabelTrack& track, int class_1, int class_2, Eigen::Index i_init,
                               Eigen::Index window) {
  const auto n = static_cast<Eigen::Index>(track.labels.size());
  if (n < 2) throw UsageError("transition refinement needs at least two frames");
  // Prefix counts make each candidate O(1).
  std::vector<Eigen::Index> pre1(static_cast<std::size_t>(n + 1), 0), pre2(static_cast<std::size_t>(n + 1), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int l = track.labels[static_cast<std::size_t>(i)];
    pre1[static_cast<std::size_t>(i + 1)] = pre1[static_cast<std::size_t>(i)] + (l == class_1);
    pre2[static_cast<std::size_t>(i + 1)] = pre2[static_cast<std::size_t>(i)] + (l == class_2);
  }
  auto count = [](const std::vector<Eigen::Index>& pre, Eigen::Index lo, Eigen::Index hi) {
    return pre[static_cast<std::size_t>(hi)] - pre[static_cast<std::size_t>(lo)];
  };
  const auto [lo, hi] = refine_candidates(i_init, n, window);
  Eigen::Index best = std::clamp<Eigen::Index>(i_init, 1, n - 1);
  Eigen::Index best_score = -1, best_dist = 0;
  for (Eigen::Index c = lo; c <= hi; ++c) {
    // Both windows shrink together near the signal edges.
    const Eigen::Index w = std::min({window, c, n - c});
    const Eigen::Index after = count(pre2, c, c + w);
    const Eigen::Index before = count(pre1, c - w, c);
    const Eigen::Index score = std::abs(after - before);
    const Eigen::Index dist = std::abs(c - i_init);
    if (best_score < 0 || score < best_score || (score == best_score && dist < best_dist)) {
      best = c;
      best_score = score;
      best_dist = dist;
    }
  }
  return best;
}

NoiseSegmentation segment_track(const FrameLabelTrack& track, const FeatureMatrix& fm,
                                const SegmentationParams& params) {
  const auto n = static_cast<Eigen::Index>(track.labels.size());
  if (n == 0) throw DataError("no frames to segment");
  const double hop_s = fm.hop_seconds();
  const Eigen::Index min_frames = frames_for(params.min_span_s, hop_s);
  const Eigen::Index window = frames_for(params.refine_window_s, hop_s);

  const auto initial = divide_recursive(track, 0, n - 1, params.purity, min_frames, params.low_energy_frames);
  const auto merged = consolidate_two_classes(initial);

  NoiseSegmentation seg;
  auto change = std::adjacent_find(merged.labels.begin(), merged.labels.end(), std::not_equal_to<>());
  if (merged.degenerate || change == merged.labels.end() || n < 2) {
    seg.class_1 = seg.class_2 = merged.labels.front();
    seg.transition_frame = n;
    seg.transition_time = fm.frame_time(n);
    seg.segment_labels.assign(static_cast<std::size_t>(n), seg.class_1);
    seg.degenerate = true;
    return seg;
  }
  seg.class_1 = merged.labels.front();
  seg.class_2 = (seg.class_1 == merged.class_1) ? merged.class_2 : merged.class_1;
  const auto i_init = static_cast<Eigen::Index>(change - merged.labels.begin()) + 1;
  // The coarse change point can sit more than one window away from the true
  // one; keep searching while the optimum lands on the edge of the range.
  Eigen::Index i_t = i_init;
  for (Eigen::Index step = 0; step < n; ++step) {
    const auto [lo, hi] = refine_candidates(i_t, n, window);
    const Eigen::Index next = refine_transition(track, seg.class_1, seg.class_2, i_t, window);
    const bool on_edge = (next == lo && lo > 1) || (next == hi && hi < n - 1);
    if (next == i_t || !on_edge) {
      i_t = next;
      break;
    }
    i_t = next;
  }
  seg.transition_frame = i_t;
  seg.transition_time = fm.frame_time(seg.transition_frame);
  seg.segment_labels.assign(static_cast<std::size_t>(n), seg.class_2);
  std::fill(seg.segment_labels.begin(), seg.segment_labels.begin() + seg.transition_frame, seg.class_1);
  return seg;
}

NoiseSegmentation segment_noise(const FeatureMatrix& fm, const std::vector<const Dictionary*>& noise_dicts,
                                const SegmentationParams& params) {
  return segment_track(frame_scores(fm, noise_dicts), fm, params);
}

}  // namespace sparsescene
