#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "sparsescene/audio.hpp"

namespace sparsescene {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct FrameConfig {
  double frame_ms = 60.0;
  double hop_ms = 15.0;
};

/// Magnitude spectrogram: one column per frame, bins 0..nfft/2 as rows.
struct FeatureMatrix {
  Matrix frames;                 // P x n, non-negative
  std::vector<double> frame_energies;  // squared-magnitude sum per column
  int frame_length = 0;          // W, samples
  int hop = 0;                   // H, samples
  int fft_size = 0;
  int sample_rate = kCanonicalRate;
  std::size_t num_samples = 0;   // length of the analysed signal
  std::optional<Matrix> phase;   // radians, same shape as frames

  Eigen::Index bins() const noexcept { return frames.rows(); }
  Eigen::Index num_frames() const noexcept { return frames.cols(); }
  double hop_seconds() const noexcept { return static_cast<double>(hop) / sample_rate; }
  // Frame midpoint in seconds.
  double frame_time(Eigen::Index i) const noexcept {
    return (static_cast<double>(i) * hop + frame_length / 2.0) / sample_rate;
  }
};

int samples_for_ms(double ms, int sample_rate);
int next_pow2(int n);
std::size_t frame_count(std::size_t num_samples, int frame_length, int hop);

/// Periodic Hann window of the given length.
std::vector<double> hann_window(int length);

FeatureMatrix extract_features(const AudioSignal& signal, const FrameConfig& config = {},
                               bool keep_phase = false);

/// Recomputes frame energies from the magnitudes.
std::vector<double> column_energies(const Matrix& frames);

/// Drops frames whose energy is below rel_threshold times the mean energy.
FeatureMatrix prune_low_energy(const FeatureMatrix& fm, double rel_threshold = 1e-3);

/// Inverse transform with the stored phase, windowed overlap-add and
/// division by the accumulated squared-window envelope.
AudioSignal reconstruct(const FeatureMatrix& fm);

/// Same as reconstruct() but with replacement magnitudes and the phase and
/// framing taken from `reference`.
AudioSignal reconstruct(const Matrix& magnitudes, const FeatureMatrix& reference);

/// Column slice [first, first + count) keeping the framing metadata.
FeatureMatrix slice_frames(const FeatureMatrix& fm, Eigen::Index first, Eigen::Index count);

/// Horizontal concatenation; every input must share the bin count.
Matrix hconcat(const std::vector<const Matrix*>& parts);

}  // namespace sparsescene
