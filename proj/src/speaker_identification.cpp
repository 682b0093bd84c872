#include "sparsescene/speaker_identification.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include <spdlog/spdlog.h>

#include "sparsescene/error.hpp"
#include "sparsescene/parallel.hpp"

namespace sparsescene {

std::vector<Eigen::Index> select_high_energy(const std::vector<double>& energies, FrameRange segment,
                                             double fraction) {
  if (segment.size() <= 0) throw DataError("empty segment");
  if (segment.begin < 0 || segment.end > static_cast<Eigen::Index>(energies.size()))
    throw DataError("segment exceeds the frame range");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw UsageError("energy fraction must be in (0, 1]");
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(segment.size()));
  std::iota(idx.begin(), idx.end(), segment.begin);
  const auto keep = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(segment.size()) - 1e-9));
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) {
    return energies[static_cast<std::size_t>(a)] > energies[static_cast<std::size_t>(b)];
  });
  idx.resize(std::clamp<std::size_t>(keep, 1, idx.size()));
  std::sort(idx.begin(), idx.end());
  return idx;
}

GateResult gate_frames(const Matrix& sw, Eigen::Index noise_col, double fac, Eigen::Index min_frames,
                       double fac_cap) {
  if (fac < 1.0) throw UsageError("gate factor must be at least 1");
  GateResult out;
  const Eigen::Index rows = sw.rows();
  if (noise_col < 0 || sw.cols() < 2) {
    out.rows.resize(static_cast<std::size_t>(rows));
    std::iota(out.rows.begin(), out.rows.end(), Eigen::Index{0});
    out.fac_used = fac;
    return out;
  }
  Vector speaker_mean = (sw.rowwise().sum() - sw.col(noise_col)) / static_cast<double>(sw.cols() - 1);
  for (double f = fac; f <= fac_cap; f += 1.0) {
    out.rows.clear();
    for (Eigen::Index r = 0; r < rows; ++r)
      if (sw(r, noise_col) < f * speaker_mean(r)) out.rows.push_back(r);
    out.fac_used = f;
    if (static_cast<Eigen::Index>(out.rows.size()) >= min_frames) return out;
  }
  out.rows.resize(static_cast<std::size_t>(rows));
  std::iota(out.rows.begin(), out.rows.end(), Eigen::Index{0});
  out.fac_used = fac_cap;
  out.fail_open = true;
  return out;
}

std::vector<int> rank_scores(const std::vector<double>& scores) {
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
  });
  return order;
}

SpeakerEvidence identify_speaker(const FeatureMatrix& fm, FrameRange segment, const Dictionary* noise_dict,
                                 const std::vector<const Dictionary*>& speaker_dicts,
                                 const IdentifyParams& params, int segment_index) {
  if (speaker_dicts.empty()) throw DataError("no speaker dictionaries");
  if (segment.size() <= 0) throw DataError("empty segment");
  if (segment.begin < 0 || segment.end > fm.num_frames()) throw DataError("segment exceeds the frame range");

  std::vector<std::pair<std::string, Eigen::Index>> sizes;
  std::vector<const Matrix*> parts;
  for (const auto* d : speaker_dicts) {
    sizes.emplace_back(d->source_label, d->size());
    parts.push_back(&d->atoms);
  }
  if (noise_dict) {
    sizes.emplace_back(noise_dict->source_label, noise_dict->size());
    parts.push_back(&noise_dict->atoms);
  }
  for (const auto* m : parts)
    if (m->rows() != fm.bins())
      throw DataError("dimension mismatch: dictionary has " + std::to_string(m->rows()) + " bins, features have " +
                      std::to_string(fm.bins()));
  const auto dictionary = std::make_shared<const Matrix>(hconcat(parts));
  const auto blocks = blocks_for(sizes);
  const auto n_sp = static_cast<Eigen::Index>(speaker_dicts.size());

  std::vector<double> energies = fm.frame_energies;
  if (energies.size() != static_cast<std::size_t>(fm.num_frames())) energies = column_energies(fm.frames);

  SpeakerEvidence ev;
  ev.segment_index = segment_index;
  ev.selected_frames = select_high_energy(energies, segment, params.fraction);
  const std::size_t n_sel = ev.selected_frames.size();
  ev.per_frame_sw = Matrix::Zero(static_cast<Eigen::Index>(n_sel), static_cast<Eigen::Index>(blocks.size()));
  std::vector<char> failed(n_sel, 0);

  parallel_for(n_sel, [&](std::size_t s) {
    const Eigen::Index frame = ev.selected_frames[s];
    try {
      const auto problem = make_problem(dictionary, fm.frames.col(frame), blocks);
      const auto sol = solve_asna(problem, params.solver);
      for (std::size_t b = 0; b < sol.block_sums.size(); ++b)
        ev.per_frame_sw(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(b)) = sol.block_sums[b];
    } catch (const NumericalError&) {
      failed[s] = 1;
    }
  });

  std::vector<Eigen::Index> usable;
  for (std::size_t s = 0; s < n_sel; ++s) {
    if (failed[s]) {
      ev.failed_frames.push_back(ev.selected_frames[s]);
      spdlog::warn("speaker id: frame {} dropped after solver failure", ev.selected_frames[s]);
    } else {
      usable.push_back(static_cast<Eigen::Index>(s));
    }
  }
  if (usable.empty()) throw NumericalError("no usable frames in segment " + std::to_string(segment_index), 0);

  const Matrix sw = ev.per_frame_sw(usable, Eigen::all);
  const auto min_frames = static_cast<Eigen::Index>(std::lround(params.min_gate_s / fm.hop_seconds()));
  const auto gate = gate_frames(sw, noise_dict ? n_sp : -1, params.fac, min_frames, params.fac_cap);
  ev.fac_used = gate.fac_used;
  ev.fail_open = gate.fail_open;

  ev.tsw.assign(static_cast<std::size_t>(n_sp), 0.0);
  for (auto r : gate.rows) {
    const auto s = usable[static_cast<std::size_t>(r)];
    ev.gated_frames.push_back(ev.selected_frames[static_cast<std::size_t>(s)]);
    for (Eigen::Index k = 0; k < n_sp; ++k) ev.tsw[static_cast<std::size_t>(k)] += ev.per_frame_sw(s, k);
  }
  ev.ranking = rank_scores(ev.tsw);
  const double best = ev.tsw[static_cast<std::size_t>(ev.ranking[0])];
  const double second = n_sp > 1 ? ev.tsw[static_cast<std::size_t>(ev.ranking[1])] : 0.0;
  ev.low_confidence = !(best > 0.0) || best < params.confidence_ratio * second;
  return ev;
}

std::vector<int> top_k(const SpeakerEvidence& evidence, int k) {
  if (k < 1 || k > static_cast<int>(evidence.ranking.size()))
    throw UsageError("k must be between 1 and the number of speakers");
  return {evidence.ranking.begin(), evidence.ranking.begin() + k};
}

}  // namespace sparsescene
