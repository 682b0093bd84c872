#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sparsescene/audio.hpp"

namespace sparsescene {

/// Generated noise types.
enum class NoiseKind { LowBand, Modulated, Impulsive, Hum };

AudioSignal synth_noise(NoiseKind kind, double seconds, std::uint64_t seed);

/// A harmonic voice: pitch range plus vowel-like resonances.
struct Voice {
  std::string label;
  double f0_lo = 100.0;
  double f0_hi = 130.0;
  double formant_scale = 1.0;
  double tilt = 0.7;  // spectral roll-off exponent
};

/// The four voices of the built-in corpus, lowest pitch first.
std::vector<Voice> default_voices();

/// Syllable-like voiced bursts separated by short pauses.
AudioSignal synth_utterance(const Voice& voice, double seconds, std::uint64_t seed);

}  // namespace sparsescene
