#include "sparsescene/audio.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>

#include "sparsescene/error.hpp"

namespace sparsescene {

namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xff));
  out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
}

double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  for (int k = 1; k < 50; ++k) {
    term *= (x / (2.0 * k)) * (x / (2.0 * k));
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum;
}

}  // namespace

void validate(const AudioSignal& signal) {
  if (signal.sample_rate <= 0) throw DataError("sample rate must be positive");
  for (double s : signal.samples)
    if (!std::isfinite(s)) throw DataError("signal contains non-finite samples");
}

double energy(std::span<const double> x) {
  return std::transform_reduce(x.begin(), x.end(), 0.0, std::plus<>(),
                               [](double v) { return v * v; });
}

AudioSignal resample(const AudioSignal& signal, int target_rate) {
  if (target_rate <= 0) throw UsageError("target rate must be positive");
  validate(signal);
  if (signal.sample_rate == target_rate || signal.samples.empty())
    return AudioSignal{signal.samples, target_rate};

  const double ratio = static_cast<double>(target_rate) / signal.sample_rate;
  const double cutoff = 0.95 * std::min(1.0, ratio);  // relative to input Nyquist
  constexpr int kHalfTaps = 32;
  constexpr double kBeta = 8.6;
  const double support = kHalfTaps / std::min(1.0, ratio);
  const double i0_beta = bessel_i0(kBeta);

  const auto n_in = static_cast<std::int64_t>(signal.samples.size());
  const auto n_out = static_cast<std::int64_t>(std::llround(n_in * ratio));
  AudioSignal out;
  out.sample_rate = target_rate;
  out.samples.resize(static_cast<std::size_t>(n_out));
  for (std::int64_t j = 0; j < n_out; ++j) {
    const double t = j / ratio;
    const auto lo = static_cast<std::int64_t>(std::ceil(t - support));
    const auto hi = static_cast<std::int64_t>(std::floor(t + support));
    double acc = 0.0;
    for (std::int64_t n = std::max<std::int64_t>(lo, 0); n <= std::min(hi, n_in - 1); ++n) {
      const double d = t - static_cast<double>(n);
      const double u = d / support;
      if (std::abs(u) >= 1.0) continue;
      const double arg = std::numbers::pi * cutoff * d;
      const double sinc = (std::abs(arg) < 1e-12) ? 1.0 : std::sin(arg) / arg;
      const double kaiser = bessel_i0(kBeta * std::sqrt(1.0 - u * u)) / i0_beta;
      acc += signal.samples[static_cast<std::size_t>(n)] * cutoff * sinc * kaiser;
    }
    out.samples[static_cast<std::size_t>(j)] = acc;
  }
  return out;
}

AudioSignal read_wav(const std::filesystem::path& path, int target_rate) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open wav file: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw DataError("not a RIFF/WAVE file: " + path.string());

  int channels = 0, rate = 0, bits = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t chunk_len = read_u32(bytes.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (body + chunk_len > bytes.size() && std::memcmp(bytes.data() + pos, "data", 4) != 0)
      throw DataError("truncated wav chunk in " + path.string());
    if (std::memcmp(bytes.data() + pos, "fmt ", 4) == 0) {
      if (chunk_len < 16) throw DataError("malformed fmt chunk in " + path.string());
      const std::uint16_t format = read_u16(bytes.data() + body);
      channels = read_u16(bytes.data() + body + 2);
      rate = static_cast<int>(read_u32(bytes.data() + body + 4));
      bits = read_u16(bytes.data() + body + 14);
      if (format != 1 && format != 0xFFFE)
        throw DataError("only PCM wav is supported: " + path.string());
    } else if (std::memcmp(bytes.data() + pos, "data", 4) == 0) {
      data = bytes.data() + body;
      data_len = std::min<std::size_t>(chunk_len, bytes.size() - body);
    }
    pos = body + chunk_len + (chunk_len & 1u);
  }
  if (channels <= 0 || rate <= 0 || data == nullptr)
    throw DataError("wav file lacks fmt or data chunk: " + path.string());
  if (bits != 16) throw DataError("only 16-bit PCM wav is supported: " + path.string());

  const std::size_t frame_bytes = 2u * static_cast<std::size_t>(channels);
  const std::size_t n = data_len / frame_bytes;
  AudioSignal signal;
  signal.sample_rate = rate;
  signal.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int c = 0; c < channels; ++c) {
      const auto raw = static_cast<std::int16_t>(read_u16(data + i * frame_bytes + 2u * c));
      acc += raw / 32768.0;
    }
    signal.samples[i] = acc / channels;
  }
  return resample(signal, target_rate);
}

void write_wav(const std::filesystem::path& path, const AudioSignal& signal) {
  validate(signal);
  const auto n = static_cast<std::uint32_t>(signal.samples.size());
  std::vector<unsigned char> out;
  out.reserve(44 + 2 * n);
  const char* riff = "RIFF";
  out.insert(out.end(), riff, riff + 4);
  put_u32(out, 36 + 2 * n);
  const char* wave_fmt = "WAVEfmt ";
  out.insert(out.end(), wave_fmt, wave_fmt + 8);
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(signal.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(signal.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  const char* data = "data";
  out.insert(out.end(), data, data + 4);
  put_u32(out, 2 * n);
  for (double s : signal.samples) {
    const double clipped = std::clamp(s, -1.0, 32767.0 / 32768.0);
    const auto q = static_cast<std::int16_t>(std::lround(clipped * 32768.0));
    put_u16(out, static_cast<std::uint16_t>(q));
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write wav file: " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

}  // namespace sparsescene
