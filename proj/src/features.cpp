#include "sparsescene/features.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

#include "sparsescene/error.hpp"

namespace sparsescene {

namespace {

Eigen::FFT<double>& half_spectrum_fft() {
  thread_local Eigen::FFT<double> fft = [] {
    Eigen::FFT<double> f;
    f.SetFlag(Eigen::FFT<double>::HalfSpectrum);
    return f;
  }();
  return fft;
}

constexpr double kEnvelopeFloor = 1e-8;

}  // namespace

int samples_for_ms(double ms, int sample_rate) {
  return static_cast<int>(std::lround(ms * 1e-3 * sample_rate));
}

int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::size_t frame_count(std::size_t num_samples, int frame_length, int hop) {
  if (frame_length <= 0 || hop <= 0 || num_samples < static_cast<std::size_t>(frame_length))
    return 0;
  return (num_samples - static_cast<std::size_t>(frame_length)) / static_cast<std::size_t>(hop) + 1;
}

std::vector<double> hann_window(int length) {
  std::vector<double> w(static_cast<std::size_t>(length));
  for (int i = 0; i < length; ++i) {
    const double s = std::sin(std::numbers::pi * i / length);
    w[static_cast<std::size_t>(i)] = s * s;
  }
  return w;
}

std::vector<double> column_energies(const Matrix& frames) {
  std::vector<double> e(static_cast<std::size_t>(frames.cols()));
  for (Eigen::Index i = 0; i < frames.cols(); ++i)
    e[static_cast<std::size_t>(i)] = frames.col(i).squaredNorm();
  return e;
}

FeatureMatrix extract_features(const AudioSignal& signal, const FrameConfig& config,
                               bool keep_phase) {
  validate(signal);
  if (!(config.hop_ms > 0.0) || !(config.frame_ms > config.hop_ms))
    throw UsageError("frame and hop durations must satisfy frame > hop > 0");
  const int W = samples_for_ms(config.frame_ms, signal.sample_rate);
  const int H = samples_for_ms(config.hop_ms, signal.sample_rate);
  if (H <= 0) throw UsageError("hop shorter than one sample");
  if (signal.size() < static_cast<std::size_t>(W))
    throw DataError("signal too short: " + std::to_string(signal.size()) +
                    " samples, one frame needs " + std::to_string(W));

  const int nfft = next_pow2(W);
  const auto n = static_cast<Eigen::Index>(frame_count(signal.size(), W, H));
  const auto P = static_cast<Eigen::Index>(nfft / 2 + 1);
  const std::vector<double> window = hann_window(W);

  FeatureMatrix fm;
  fm.frame_length = W;
  fm.hop = H;
  fm.fft_size = nfft;
  fm.sample_rate = signal.sample_rate;
  fm.num_samples = signal.size();
  fm.frames.resize(P, n);
  if (keep_phase) fm.phase = Matrix(P, n);

  auto& fft = half_spectrum_fft();
  std::vector<double> buffer(static_cast<std::size_t>(nfft), 0.0);
  std::vector<std::complex<double>> spectrum;
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t start = static_cast<std::size_t>(i) * static_cast<std::size_t>(H);
    std::fill(buffer.begin(), buffer.end(), 0.0);
    for (int k = 0; k < W; ++k)
      buffer[static_cast<std::size_t>(k)] = signal.samples[start + static_cast<std::size_t>(k)] *
                                            window[static_cast<std::size_t>(k)];
    fft.fwd(spectrum, buffer);
    for (Eigen::Index p = 0; p < P; ++p) {
      const auto& c = spectrum[static_cast<std::size_t>(p)];
      fm.frames(p, i) = std::abs(c);
      if (keep_phase) (*fm.phase)(p, i) = std::arg(c);
    }
  }
  fm.frame_energies = column_energies(fm.frames);
  return fm;
}

FeatureMatrix prune_low_energy(const FeatureMatrix& fm, double rel_threshold) {
  if (!(rel_threshold > 0.0)) throw UsageError("relative energy threshold must be positive");
  const auto n = fm.frame_energies.size();
  if (n == 0) throw DataError("no features remain after pruning");
  const double mean =
      std::accumulate(fm.frame_energies.begin(), fm.frame_energies.end(), 0.0) / static_cast<double>(n);
  const double cut = rel_threshold * mean;

  std::vector<Eigen::Index> keep;
  for (std::size_t i = 0; i < n; ++i)
    if (fm.frame_energies[i] >= cut && fm.frame_energies[i] > 0.0) keep.push_back(static_cast<Eigen::Index>(i));
  if (keep.empty()) throw DataError("no features remain after pruning");

  FeatureMatrix out = fm;
  out.frames = fm.frames(Eigen::all, keep);
  if (fm.phase) out.phase = (*fm.phase)(Eigen::all, keep);
  out.frame_energies.clear();
  for (auto i : keep) out.frame_energies.push_back(fm.frame_energies[static_cast<std::size_t>(i)]);
  return out;
}

AudioSignal reconstruct(const FeatureMatrix& fm) { return reconstruct(fm.frames, fm); }

AudioSignal reconstruct(const Matrix& magnitudes, const FeatureMatrix& reference) {
  if (!reference.phase) throw DataError("phase required for reconstruction");
  const Matrix& phase = *reference.phase;
  if (magnitudes.rows() != phase.rows() || magnitudes.cols() != phase.cols())
    throw DataError("magnitude and phase shapes differ");
  if (!magnitudes.allFinite()) throw DataError("magnitudes must be finite");

  const int W = reference.frame_length;
  const int H = reference.hop;
  const int nfft = reference.fft_size;
  const Eigen::Index n = magnitudes.cols();
  const std::size_t covered =
      n == 0 ? 0 : static_cast<std::size_t>(n - 1) * static_cast<std::size_t>(H) + static_cast<std::size_t>(W);
  const std::size_t length = std::max(reference.num_samples, covered);

  const std::vector<double> window = hann_window(W);
  std::vector<double> acc(length, 0.0), envelope(length, 0.0);
  auto& fft = half_spectrum_fft();
  std::vector<std::complex<double>> spectrum(static_cast<std::size_t>(magnitudes.rows()));
  std::vector<double> frame;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index p = 0; p < magnitudes.rows(); ++p)
      spectrum[static_cast<std::size_t>(p)] = std::polar(magnitudes(p, i), phase(p, i));
    fft.inv(frame, spectrum, nfft);
    const std::size_t start = static_cast<std::size_t>(i) * static_cast<std::size_t>(H);
    for (int k = 0; k < W; ++k) {
      const double w = window[static_cast<std::size_t>(k)];
      acc[start + static_cast<std::size_t>(k)] += frame[static_cast<std::size_t>(k)] * w;
      envelope[start + static_cast<std::size_t>(k)] += w * w;
    }
  }
  AudioSignal out;
  out.sample_rate = reference.sample_rate;
  out.samples.resize(length);
  for (std::size_t t = 0; t < length; ++t)
    out.samples[t] = acc[t] / std::max(envelope[t], kEnvelopeFloor);
  if (reference.num_samples > 0) out.samples.resize(reference.num_samples);
  return out;
}

FeatureMatrix slice_frames(const FeatureMatrix& fm, Eigen::Index first, Eigen::Index count) {
  if (first < 0 || count < 0 || first + count > fm.num_frames())
    throw UsageError("frame slice out of range");
  FeatureMatrix out;
  out.frames = fm.frames.middleCols(first, count);
  if (fm.phase) out.phase = fm.phase->middleCols(first, count);
  out.frame_energies.assign(fm.frame_energies.begin() + first, fm.frame_energies.begin() + first + count);
  out.frame_length = fm.frame_length;
  out.hop = fm.hop;
  out.fft_size = fm.fft_size;
  out.sample_rate = fm.sample_rate;
  out.num_samples = 0;
  return out;
}

Matrix hconcat(const std::vector<const Matrix*>& parts) {
  Eigen::Index rows = -1, cols = 0;
  for (const Matrix* m : parts) {
    if (m->cols() == 0) continue;
    if (rows >= 0 && m->rows() != rows) throw DataError("dimension mismatch in concatenation");
    rows = m->rows();
    cols += m->cols();
  }
  if (rows < 0) rows = parts.empty() ? 0 : parts.front()->rows();
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const Matrix* m : parts) {
    if (m->cols() == 0) continue;
    out.middleCols(at, m->cols()) = *m;
    at += m->cols();
  }
  return out;
}

}  // namespace sparsescene
