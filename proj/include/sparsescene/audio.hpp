#pragma once

#include <filesystem>
#include <span>
#include <vector>

namespace sparsescene {

inline constexpr int kCanonicalRate = 16000;

/// Mono time-domain signal. Samples are nominally in [-1, 1].
struct AudioSignal {
  std::vector<double> samples;
  int sample_rate = kCanonicalRate;

  std::size_t size() const noexcept { return samples.size(); }
  double duration_s() const noexcept {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

// Throws DataError when sample_rate <= 0 or any sample is non-finite.
void validate(const AudioSignal& signal);

double energy(std::span<const double> x);

/// Band-limited (windowed-sinc) rate conversion. Identity when rates match.
AudioSignal resample(const AudioSignal& signal, int target_rate);

/// Reads a 16-bit PCM RIFF/WAVE file. Multi-channel input is averaged to
/// mono and the result is resampled to `target_rate`.
AudioSignal read_wav(const std::filesystem::path& path,
                     int target_rate = kCanonicalRate);

/// Writes mono 16-bit PCM; samples are clipped to [-1, 1].
void write_wav(const std::filesystem::path& path, const AudioSignal& signal);

}  // namespace sparsescene
