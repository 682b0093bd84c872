#include "sparsescene/synth.hpp"

#include <array>
#include <cmath>
#include <complex>
#include <random>

#include <unsupported/Eigen/FFT>

#include "sparsescene/error.hpp"

namespace sparsescene {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

// Gaussian noise with magnitude response `shape(f_hz)`, via one long FFT.
template <typename Shape>
std::vector<double> coloured_noise(std::size_t n, std::mt19937_64& rng, Shape shape) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> white(n);
  for (auto& v : white) v = g(rng);
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, white);
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const std::size_t bin = k <= n / 2 ? k : n - k;
    spec[k] *= shape(static_cast<double>(bin) * kCanonicalRate / static_cast<double>(n));
  }
  std::vector<double> out;
  fft.inv(out, spec);
  out.resize(n);
  return out;
}

void normalise_rms(std::vector<double>& x, double rms) {
  double e = 0.0;
  for (double v : x) e += v * v;
  const double scale = rms / std::sqrt(e / static_cast<double>(x.size()));
  for (auto& v : x) v *= scale;
}

double bump(double f, double centre, double width) {
  const double z = (f - centre) / width;
  return std::exp(-0.5 * z * z);
}

}  // namespace

AudioSignal synth_noise(NoiseKind kind, double seconds, std::uint64_t seed) {
  if (!(seconds > 0.0)) throw UsageError("noise duration must be positive");
  const auto n = static_cast<std::size_t>(seconds * kCanonicalRate);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  AudioSignal s;
  switch (kind) {
    case NoiseKind::LowBand:
      s.samples = coloured_noise(n, rng, [](double f) { return bump(f, 700.0, 300.0) + 0.4 * bump(f, 1500.0, 250.0) + 0.01; });
      break;
    case NoiseKind::Modulated: {
      s.samples = coloured_noise(n, rng, [](double f) {
        return (f < 80.0 ? 0.0 : 1.0 / std::sqrt(f / 80.0)) * (f > 6500.0 ? 0.1 : 1.0) + 0.01;
      });
      const double rate = 2.5 + u(rng), phase = kTwoPi * u(rng);
      for (std::size_t i = 0; i < n; ++i)
        s.samples[i] *= 1.0 + 0.7 * std::sin(kTwoPi * rate * static_cast<double>(i) / kCanonicalRate + phase);
      break;
    }
    case NoiseKind::Impulsive: {
      const auto hiss = [](double f) { return bump(f, 4500.0, 1200.0) + 0.01; };
      s.samples = coloured_noise(n, rng, hiss);
      normalise_rms(s.samples, 0.15);
      auto clicks = coloured_noise(n, rng, hiss);
      std::exponential_distribution<double> gap(12.0);
      const double decay = 0.006 * kCanonicalRate;
      for (double t = gap(rng); t * kCanonicalRate < static_cast<double>(n); t += gap(rng)) {
        const auto start = static_cast<std::size_t>(t * kCanonicalRate);
        const double amp = 2.0 + 4.0 * u(rng);
        for (std::size_t i = start; i < std::min(n, start + static_cast<std::size_t>(6 * decay)); ++i)
          s.samples[i] += amp * clicks[i] * std::exp(-static_cast<double>(i - start) / decay);
      }
      break;
    }
    case NoiseKind::Hum: {
      s.samples = coloured_noise(n, rng, [](double f) { return f < 40.0 ? 0.0 : 1.0 / (1.0 + f / 300.0); });
      normalise_rms(s.samples, 0.1);
      std::array<double, 24> amp{}, ph{};
      for (std::size_t h = 0; h < amp.size(); ++h) {
        amp[h] = (0.6 + 0.8 * u(rng)) / static_cast<double>(h + 1);
        ph[h] = kTwoPi * u(rng);
      }
      for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / kCanonicalRate;
        double v = 0.0;
        for (std::size_t h = 0; h < amp.size(); ++h) v += amp[h] * std::sin(kTwoPi * 50.0 * static_cast<double>(h + 1) * t + ph[h]);
        s.samples[i] += v;
      }
      break;
    }
  }
  normalise_rms(s.samples, 0.1);
  return s;
}

std::vector<Voice> default_voices() {
  return {
      {"deep", 90.0, 120.0, 0.95, 0.8},
      {"low", 130.0, 160.0, 1.05, 0.7},
      {"mid", 190.0, 230.0, 1.17, 0.6},
      {"high", 240.0, 290.0, 1.25, 0.5},
  };
}

AudioSignal synth_utterance(const Voice& voice, double seconds, std::uint64_t seed) {
  if (!(seconds > 0.0)) throw UsageError("utterance duration must be positive");
  // Formant triples (Hz) of five vowel-like sounds before speaker scaling.
  static constexpr std::array<std::array<double, 3>, 5> kVowels{{
      {730, 1090, 2440}, {270, 2290, 3010}, {300, 870, 2240}, {530, 1840, 2480}, {570, 840, 2410}}};
  static constexpr std::array<double, 3> kBandwidth{90, 110, 150};

  const auto n = static_cast<std::size_t>(seconds * kCanonicalRate);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  AudioSignal s;
  s.samples.assign(n, 0.0);

  double t = 0.04 + 0.06 * u(rng);
  while (t < seconds - 0.1) {
    const double len = std::min(0.15 + 0.17 * u(rng), seconds - 0.05 - t);
    const auto& vowel = kVowels[static_cast<std::size_t>(u(rng) * kVowels.size()) % kVowels.size()];
    const double f_start = voice.f0_lo + (voice.f0_hi - voice.f0_lo) * u(rng);
    const double f_end = voice.f0_lo + (voice.f0_hi - voice.f0_lo) * u(rng);
    const double level = 0.6 + 0.4 * u(rng);
    const auto a = static_cast<std::size_t>(t * kCanonicalRate);
    const auto b = std::min(n, static_cast<std::size_t>((t + len) * kCanonicalRate));
    double phase = kTwoPi * u(rng);
    std::vector<double> amps;
    for (std::size_t i = a; i < b; ++i) {
      const double x = static_cast<double>(i - a) / static_cast<double>(b - a);
      const double f0 = f_start + (f_end - f_start) * x;
      phase += kTwoPi * f0 / kCanonicalRate;
      if ((i - a) % 80 == 0) {
        // Harmonic amplitudes are refreshed every 5 ms.
        amps.clear();
        for (double f = f0; f < 7000.0; f += f0) {
          double env = 0.01;
          for (std::size_t j = 0; j < 3; ++j) {
            const double z = (f - vowel[j] * voice.formant_scale) / kBandwidth[j];
            env += 1.0 / (1.0 + z * z);
          }
          amps.push_back(env * std::pow(f / 100.0, -voice.tilt));
        }
      }
      const std::complex<double> step(std::cos(phase), std::sin(phase));
      std::complex<double> w = step;
      double v = 0.0;
      for (double amp : amps) {
        v += amp * w.imag();
        w *= step;
      }
      const double edge = std::min({1.0, x / 0.1, (1.0 - x) / 0.1});
      s.samples[i] = level * edge * v;
    }
    t += len + 0.03 + 0.09 * u(rng);
  }
  normalise_rms(s.samples, 0.1);
  return s;
}

}  // namespace sparsescene
