#include "sparsescene/separation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>

#include <spdlog/spdlog.h>

#include "sparsescene/error.hpp"
#include "sparsescene/parallel.hpp"

namespace sparsescene {

std::pair<Matrix, Matrix> separate_features(const FeatureMatrix& fm, FrameRange frames, const Dictionary& noise,
                                            const Dictionary& speaker, const SolverOptions& options,
                                            std::vector<Eigen::Index>* failed) {
  if (frames.begin < 0 || frames.end > fm.num_frames() || frames.size() < 0)
    throw DataError("frame range exceeds the features");
  if (noise.dim() != fm.bins() || speaker.dim() != fm.bins())
    throw DataError("dimension mismatch between dictionaries and features");
  const auto dictionary = std::make_shared<const Matrix>(hconcat({&noise.atoms, &speaker.atoms}));
  const auto blocks = blocks_for({{noise.source_label, noise.size()}, {speaker.source_label, speaker.size()}});

  const Eigen::Index n = frames.size();
  Matrix speech = Matrix::Zero(fm.bins(), n);
  Matrix rest = fm.frames.middleCols(frames.begin, n);
  std::vector<char> bad(static_cast<std::size_t>(n), 0);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t j) {
    const auto col = static_cast<Eigen::Index>(j);
    try {
      const auto problem = make_problem(dictionary, fm.frames.col(frames.begin + col), blocks);
      const auto sol = solve_asna(problem, options);
      rest.col(col) = noise.atoms * sol.weights.head(noise.size());
      speech.col(col) = speaker.atoms * sol.weights.tail(speaker.size());
    } catch (const NumericalError&) {
      bad[j] = 1;
    }
  });
  for (Eigen::Index j = 0; j < n; ++j) {
    if (!bad[static_cast<std::size_t>(j)]) continue;
    // Failed frames keep their full magnitude on the noise side.
    speech.col(j).setZero();
    rest.col(j) = fm.frames.col(frames.begin + j);
    if (failed) failed->push_back(frames.begin + j);
  }
  return {std::move(speech), std::move(rest)};
}

SeparationResult separate(const AudioSignal& mixed, const FeatureMatrix& fm, const std::vector<SeparationPart>& parts,
                          const SolverOptions& options) {
  if (!fm.phase) throw DataError("phase required for resynthesis");
  if (mixed.size() != fm.num_samples) throw DataError("mixed signal does not match the analysed features");
  SeparationResult out;
  out.speech_features = Matrix::Zero(fm.bins(), fm.num_frames());
  out.noise_features = fm.frames;
  for (const auto& part : parts) {
    if (!part.noise || !part.speaker) throw UsageError("separation part is missing a dictionary");
    auto [sp, ns] = separate_features(fm, part.frames, *part.noise, *part.speaker, options, &out.failed_frames);
    out.speech_features.middleCols(part.frames.begin, part.frames.size()) = sp;
    out.noise_features.middleCols(part.frames.begin, part.frames.size()) = ns;
  }
  if (!out.failed_frames.empty())
    spdlog::warn("separation: {} frame(s) assigned entirely to noise after solver failure", out.failed_frames.size());
  out.speech = reconstruct(out.speech_features, fm);
  out.noise = mixed;
  for (std::size_t i = 0; i < out.noise.samples.size(); ++i) out.noise.samples[i] -= out.speech.samples[i];
  return out;
}

SeparationResult separate(const AudioSignal& mixed, const FeatureMatrix& fm, const Dictionary& noise,
                          const Dictionary& speaker, const SolverOptions& options) {
  return separate(mixed, fm, {SeparationPart{{0, fm.num_frames()}, &noise, &speaker}}, options);
}

double sdr(const std::vector<double>& reference, const std::vector<double>& estimate, const SampleMask& mask) {
  if (reference.size() != estimate.size())
    throw DataError("length mismatch: reference " + std::to_string(reference.size()) + ", estimate " +
                    std::to_string(estimate.size()));
  SampleMask ranges = mask;
  if (ranges.empty()) ranges.emplace_back(0, reference.size());
  double signal = 0.0, error = 0.0;
  for (const auto& [first, last] : ranges) {
    if (first > last || last > reference.size()) throw DataError("mask range outside the signal");
    for (std::size_t i = first; i < last; ++i) {
      signal += reference[i] * reference[i];
      const double e = reference[i] - estimate[i];
      error += e * e;
    }
  }
  if (!(signal > 0.0)) throw DataError("reference signal is silent over the evaluated region");
  if (!(error > 0.0)) return kSdrCapDb;
  return std::min(kSdrCapDb, 10.0 * std::log10(signal / error));
}

double sdr(const AudioSignal& reference, const AudioSignal& estimate, const SampleMask& mask) {
  return sdr(reference.samples, estimate.samples, mask);
}

SnrError segmental_snr_error(const Matrix& true_speech, const Matrix& true_noise, const Matrix& est_speech,
                             const Matrix& est_noise, const std::vector<FrameRange>& segments) {
  const auto same = [&](const Matrix& m) { return m.rows() == true_speech.rows() && m.cols() == true_speech.cols(); };
  if (!same(true_noise) || !same(est_speech) || !same(est_noise)) throw DataError("feature shapes differ");
  if (segments.empty()) throw DataError("no speech segments to evaluate");
  SnrError out;
  for (const auto& s : segments) {
    if (s.begin < 0 || s.end > true_speech.cols() || s.size() <= 0) throw DataError("segment outside the features");
    const auto energy = [&](const Matrix& m) { return m.middleCols(s.begin, s.size()).squaredNorm(); };
    const double ts = energy(true_speech), tn = energy(true_noise), es = energy(est_speech), en = energy(est_noise);
    if (!(ts > 0.0 && tn > 0.0 && es > 0.0 && en > 0.0)) {
      ++out.skipped;
      spdlog::debug("snr error: segment [{}, {}) skipped, zero energy term", s.begin, s.end);
      continue;
    }
    out.per_segment_db.push_back(10.0 * std::log10(ts / tn) - 10.0 * std::log10(es / en));
  }
  const auto n = out.per_segment_db.size();
  if (n == 0) return out;
  double mean = 0.0;
  for (double e : out.per_segment_db) {
    out.mean_abs_db += std::abs(e);
    mean += e;
  }
  out.mean_abs_db /= static_cast<double>(n);
  mean /= static_cast<double>(n);
  if (n > 1) {
    double ss = 0.0;
    for (double e : out.per_segment_db) ss += (e - mean) * (e - mean);
    out.std_db = std::sqrt(ss / static_cast<double>(n - 1));
  }
  return out;
}

std::vector<Eigen::Index> local_maxima(const std::vector<double>& energies, FrameRange range) {
  if (range.begin < 0 || range.end > static_cast<Eigen::Index>(energies.size()))
    throw DataError("range outside the energy track");
  std::vector<Eigen::Index> out;
  for (Eigen::Index i = range.begin + 1; i + 1 < range.end; ++i) {
    const auto e = [&](Eigen::Index j) { return energies[static_cast<std::size_t>(j)]; };
    if (e(i) > e(i - 1) && e(i) > e(i + 1)) out.push_back(i);
  }
  return out;
}

KMeans1d kmeans_1d(const std::vector<double>& values, int k, int max_iters) {
  if (k < 1) throw UsageError("k must be positive");
  if (values.empty()) return {};
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  KMeans1d km;
  km.centroids.resize(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) km.centroids[static_cast<std::size_t>(j)] = k == 1 ? lo : lo + (hi - lo) * j / (k - 1);
  km.assignment.assign(values.size(), -1);

  for (int it = 0; it < max_iters; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < values.size(); ++i) {
      int best = 0;
      for (int j = 1; j < k; ++j)
        if (std::abs(values[i] - km.centroids[static_cast<std::size_t>(j)]) <
            std::abs(values[i] - km.centroids[static_cast<std::size_t>(best)]))
          best = j;
      if (km.assignment[i] != best) {
        km.assignment[i] = best;
        changed = true;
      }
    }
    if (!changed && it > 0) break;
    std::vector<double> sum(static_cast<std::size_t>(k), 0.0);
    std::vector<int> count(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < values.size(); ++i) {
      sum[static_cast<std::size_t>(km.assignment[i])] += values[i];
      ++count[static_cast<std::size_t>(km.assignment[i])];
    }
    for (int j = 0; j < k; ++j) {
      const auto u = static_cast<std::size_t>(j);
      if (count[u] > 0) {
        km.centroids[u] = sum[u] / count[u];
        continue;
      }
      // Empty cluster: move it to the largest value no centroid sits on.
      double pick = -std::numeric_limits<double>::infinity();
      for (double v : values)
        if (v > pick && std::find(km.centroids.begin(), km.centroids.end(), v) == km.centroids.end()) pick = v;
      if (std::isfinite(pick)) km.centroids[u] = pick;
    }
  }
  return km;
}

SpeechSegments detect_speech_segments(const std::vector<double>& energies, const std::vector<FrameRange>& parts,
                                      int k) {
  if (k < 1) throw UsageError("k must be positive");
  SpeechSegments out;
  for (const auto& part : parts) {
    const auto maxima = local_maxima(energies, part);
    int k_part = k;
    if (static_cast<int>(maxima.size()) < k) {
      k_part = static_cast<int>(maxima.size());
      out.reduced = true;
    }
    out.k_used.push_back(k_part);
    if (maxima.empty()) continue;
    std::vector<double> values;
    for (auto i : maxima) values.push_back(energies[static_cast<std::size_t>(i)]);
    const auto km = kmeans_1d(values, k_part);
    int top = -1;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const int c = km.assignment[i];
      if (top < 0 || km.centroids[static_cast<std::size_t>(c)] > km.centroids[static_cast<std::size_t>(top)]) top = c;
    }
    for (std::size_t i = 0; i < values.size(); ++i)
      if (km.assignment[i] == top) out.cluster_frames.push_back(maxima[i]);
  }
  std::sort(out.cluster_frames.begin(), out.cluster_frames.end());
  return out;
}

DetectionRates miss_false_rates(const std::vector<Eigen::Index>& cluster_frames,
                                const std::vector<std::pair<double, double>>& intervals, int hop, int frame_length,
                                int sample_rate) {
  for (const auto& [a, b] : intervals)
    if (!(a <= b)) throw DataError("invalid interval");
  DetectionRates r;
  std::vector<double> times;
  for (auto i : cluster_frames)
    times.push_back((static_cast<double>(i) * hop + frame_length / 2.0) / sample_rate);
  const auto inside = [](double t, const std::pair<double, double>& iv) { return t >= iv.first && t <= iv.second; };

  if (intervals.empty()) {
    r.no_segments = true;
  } else {
    int missed = 0;
    for (const auto& iv : intervals)
      if (std::none_of(times.begin(), times.end(), [&](double t) { return inside(t, iv); })) ++missed;
    r.miss_rate = 100.0 * missed / static_cast<double>(intervals.size());
  }
  if (times.empty()) {
    r.no_cluster_frames = true;
  } else {
    int stray = 0;
    for (double t : times)
      if (std::none_of(intervals.begin(), intervals.end(), [&](const auto& iv) { return inside(t, iv); })) ++stray;
    r.false_alarm_rate = 100.0 * stray / static_cast<double>(times.size());
  }
  return r;
}

}  // namespace sparsescene
