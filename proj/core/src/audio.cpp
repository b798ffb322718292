#include "cpsfuse/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <string>

#include <fmt/format.h>

#include "cpsfuse/error.hpp"

namespace cpsfuse::audio {

void AudioClip::validate() const {
  if (!(sample_rate > 0.0)) throw Error("audio clip sample rate must be positive");
  for (double s : samples) {
    if (!std::isfinite(s)) throw Error("audio clip contains a non-finite sample");
  }
}

namespace {

std::uint32_t le32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}
std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}

void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xFF);
}
void put16(std::string& out, std::uint16_t v) {
  out += static_cast<char>(v & 0xFF);
  out += static_cast<char>(v >> 8);
}

}  // namespace

AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open wave file '{}'", path.string()));
  const std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in), {}};
  auto fail = [&](const char* what) {
    return DataError(fmt::format("{}: {}", path.string(), what));
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw fail("not a RIFF/WAVE file");
  }
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = le32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) {
      // Tolerate a truncated final data chunk.
      if (std::memcmp(chunk, "data", 4) != 0) throw fail("truncated chunk");
    }
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw fail("short fmt chunk");
      format = le16(chunk + 8);
      channels = le16(chunk + 10);
      rate = le32(chunk + 12);
      bits = le16(chunk + 22);
      if (format == 0xFFFE && size >= 40) format = le16(chunk + 32);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = std::min<std::size_t>(size, bytes.size() - body);
    }
    pos = body + size + (size & 1);
  }
  if (channels == 0 || rate == 0) throw fail("missing fmt chunk");
  if (data == nullptr) throw fail("missing data chunk");
  const bool pcm = format == 1;
  const bool flt = format == 3;
  if (!(pcm && (bits == 8 || bits == 16 || bits == 24 || bits == 32)) &&
      !(flt && (bits == 32 || bits == 64))) {
    throw fail("unsupported sample format");
  }
  const std::size_t width = bits / 8;
  const std::size_t frames = data_size / (width * channels);
  AudioClip clip;
  clip.sample_rate = rate;
  clip.samples.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + (f * channels + c) * width;
      double v = 0.0;
      if (pcm) {
        switch (bits) {
          case 8: v = (static_cast<int>(p[0]) - 128) / 128.0; break;
          case 16: v = static_cast<std::int16_t>(le16(p)) / 32768.0; break;
          case 24: {
            std::int32_t s = std::int32_t(p[0]) | std::int32_t(p[1]) << 8 | std::int32_t(p[2]) << 16;
            if (s & 0x800000) s |= ~0xFFFFFF;
            v = s / 8388608.0;
            break;
          }
          default: v = static_cast<std::int32_t>(le32(p)) / 2147483648.0; break;
        }
      } else if (bits == 32) {
        float x;
        const std::uint32_t u = le32(p);
        std::memcpy(&x, &u, 4);
        v = x;
      } else {
        std::uint64_t u = std::uint64_t(le32(p)) | std::uint64_t(le32(p + 4)) << 32;
        std::memcpy(&v, &u, 8);
      }
      acc += v;
    }
    clip.samples[f] = acc / channels;
  }
  return clip;
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip) {
  const auto n = static_cast<std::uint32_t>(clip.samples.size());
  const auto rate = static_cast<std::uint32_t>(std::lround(clip.sample_rate));
  std::string out;
  out.reserve(44 + 2 * n);
  out += "RIFF";
  put32(out, 36 + 2 * n);
  out += "WAVEfmt ";
  put32(out, 16);
  put16(out, 1);
  put16(out, 1);
  put32(out, rate);
  put32(out, rate * 2);
  put16(out, 2);
  put16(out, 16);
  out += "data";
  put32(out, 2 * n);
  for (double s : clip.samples) {
    const double c = std::clamp(s, -1.0, 1.0);
    put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(c * 32767.0))));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError(fmt::format("cannot write wave file '{}'", path.string()));
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

AudioClip resample(const AudioClip& clip, double target_rate) {
  if (!(target_rate > 0.0)) throw Error("resample target rate must be positive");
  clip.validate();
  if (target_rate == clip.sample_rate) return clip;

  const double ratio = target_rate / clip.sample_rate;
  const double cutoff = std::min(1.0, ratio);  // relative to source Nyquist
  constexpr double kZeroCrossings = 32.0;
  const double half_width = kZeroCrossings / cutoff;  // in source samples
  const auto n_in = static_cast<std::ptrdiff_t>(clip.samples.size());
  const auto n_out =
      static_cast<std::size_t>(std::llround(static_cast<double>(n_in) * ratio));

  AudioClip out;
  out.sample_rate = target_rate;
  out.samples.resize(n_out);
  for (std::size_t n = 0; n < n_out; ++n) {
    const double x = static_cast<double>(n) / ratio;
    const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::ceil(x - half_width)));
    const auto hi = std::min<std::ptrdiff_t>(n_in - 1, static_cast<std::ptrdiff_t>(std::floor(x + half_width)));
    double acc = 0.0;
    for (std::ptrdiff_t k = lo; k <= hi; ++k) {
      const double t = x - static_cast<double>(k);
      const double u = t * cutoff;
      const double sinc = u == 0.0 ? 1.0 : std::sin(std::numbers::pi * u) / (std::numbers::pi * u);
      const double w = 0.5 + t / (2.0 * half_width);  // [0, 1] across the support
      const double blackman = 0.42 - 0.5 * std::cos(2.0 * std::numbers::pi * w) +
                              0.08 * std::cos(4.0 * std::numbers::pi * w);
      acc += clip.samples[static_cast<std::size_t>(k)] * cutoff * sinc * blackman;
    }
    out.samples[n] = acc;
  }
  return out;
}

}  // namespace cpsfuse::audio
