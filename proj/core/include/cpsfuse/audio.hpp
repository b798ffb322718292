#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace cpsfuse::audio {

/// Mono clip, samples nominally in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  double sample_rate = 16000.0;

  double duration() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
  /// Throws Error unless sample_rate > 0 and every sample is finite.
  void validate() const;
};

/// Reads RIFF/WAVE: 8/16/24/32-bit PCM or 32/64-bit float, any channel count
/// (downmixed by averaging). Throws DataError on malformed files.
AudioClip read_wav(const std::filesystem::path& path);

/// Writes 16-bit PCM mono; samples are clipped to [-1, 1].
void write_wav(const std::filesystem::path& path, const AudioClip& clip);

/// Windowed-sinc (Blackman, 32 zero crossings) band-limited resampling.
/// Output length is round(N * target / source). Same rate returns a copy.
AudioClip resample(const AudioClip& clip, double target_rate);

}  // namespace cpsfuse::audio
