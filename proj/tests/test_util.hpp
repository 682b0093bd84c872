#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "sparsescene/features.hpp"

namespace sparsescene::testing {

inline Matrix random_nonneg(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                            double zero_prob = 0.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = (u(rng) < zero_prob) ? 0.0 : u(rng);
  return m;
}

// Random non-negative matrix with unit-norm, never-zero columns.
inline Matrix random_atoms(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                           double zero_prob = 0.3) {
  Matrix m = random_nonneg(rows, cols, rng, zero_prob);
  for (Eigen::Index j = 0; j < cols; ++j) {
    if (m.col(j).norm() == 0.0) m(0, j) = 1.0;
    m.col(j).normalize();
  }
  return m;
}

inline AudioSignal white_noise(std::size_t n, std::uint64_t seed, double scale = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  AudioSignal s;
  s.samples.resize(n);
  for (auto& v : s.samples) v = g(rng);
  return s;
}

// Sum of random-phase sinusoids with frequencies drawn from [lo_hz, hi_hz].
inline AudioSignal band_noise(std::size_t n, double lo_hz, double hi_hz, std::uint64_t seed,
                              int partials = 48, double scale = 0.2) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> freq(lo_hz, hi_hz), phase(0.0, 2.0 * M_PI);
  AudioSignal s;
  s.samples.assign(n, 0.0);
  const double amp = scale / std::sqrt(static_cast<double>(partials));
  for (int k = 0; k < partials; ++k) {
    const double w = 2.0 * M_PI * freq(rng) / s.sample_rate, ph = phase(rng);
    for (std::size_t i = 0; i < n; ++i) s.samples[i] += amp * std::sin(w * static_cast<double>(i) + ph);
  }
  return s;
}

// Voiced bursts: harmonics of a slowly gliding f0 under a raised-cosine envelope.
// Bursts are [start_s, end_s) pairs; the rest of the signal is silent.
inline AudioSignal harmonic_bursts(std::size_t n, double f0, const std::vector<std::pair<double, double>>& bursts,
                                   double scale = 0.3, int harmonics = 20) {
  AudioSignal s;
  s.samples.assign(n, 0.0);
  const double sr = s.sample_rate;
  for (const auto& [start, end] : bursts) {
    const auto a = static_cast<std::size_t>(start * sr), b = std::min(n, static_cast<std::size_t>(end * sr));
    double phase = 0.0;
    for (std::size_t i = a; i < b; ++i) {
      const double t = static_cast<double>(i - a) / static_cast<double>(b - a);
      const double f = f0 * (1.0 + 0.08 * std::sin(2.0 * M_PI * 1.5 * t));
      phase += 2.0 * M_PI * f / sr;
      double v = 0.0;
      for (int h = 1; h <= harmonics && h * f < 0.45 * sr; ++h) v += std::sin(h * phase) / h;
      s.samples[i] = scale * 0.5 * (1.0 - std::cos(2.0 * M_PI * t)) * v;
    }
  }
  return s;
}

inline double relative_l2(const std::vector<double>& a, const std::vector<double>& b,
                          std::size_t from, std::size_t to) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = from; i < to; ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num / den);
}

}  // namespace sparsescene::testing
