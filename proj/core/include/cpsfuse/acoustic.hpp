#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cpsfuse/audio.hpp"

namespace cpsfuse::acoustic {

inline constexpr std::size_t kFeatureCount = 11;
using AcousticFeatureVector = std::array<double, kFeatureCount>;

/// f0_mean, f0_std, loudness_mean, loudness_std, jitter_mean, shimmer_mean,
/// hnr_mean, alpha_ratio_mean, hammarberg_mean, slope0_500_mean,
/// slope500_1500_mean.
std::vector<std::string> default_feature_names();

struct AcousticConfig {
  double target_rate = 16000.0;
  double frame_step_ms = 1.0;
  double frame_length_ms = 25.0;
  double f0_min = 60.0;
  double f0_max = 500.0;
  /// Minimum normalized autocorrelation peak for a voiced frame.
  double voicing_threshold = 0.45;
  /// Exactly kFeatureCount names of the form <descriptor>_<mean|std>.
  std::vector<std::string> feature_names = default_feature_names();

  void validate() const;
  std::size_t frame_length_samples() const;
  std::size_t frame_step_samples() const;
};

/// Per-frame low-level descriptors. Optional entries are empty on unvoiced
/// frames (and jitter/shimmer also when fewer than two periods fit the frame).
struct LldFrameSeries {
  std::vector<double> time_s;  // frame centres
  std::vector<std::optional<double>> f0;  // Hz
  std::vector<double> loudness;           // frame RMS
  std::vector<std::optional<double>> jitter;   // relative period perturbation
  std::vector<std::optional<double>> shimmer;  // relative amplitude perturbation
  std::vector<double> hnr;                // dB
  std::vector<double> alpha_ratio;        // dB, 50-1000 Hz over 1-5 kHz energy
  std::vector<double> hammarberg;         // dB, peak 0-2 kHz over peak 2-5 kHz
  std::vector<double> slope_0_500;        // dB/octave
  std::vector<double> slope_500_1500;     // dB/octave

  std::size_t size() const { return time_s.size(); }
  std::size_t voiced_count() const;
};

/// floor((n - frame_len) / step) + 1, or 0 when n < frame_len.
std::size_t frame_count(std::size_t n_samples, const AcousticConfig& config);

/// Clip must already be at config.target_rate and hold at least one frame.
LldFrameSeries compute_llds(const audio::AudioClip& clip, const AcousticConfig& config);

/// The configured functionals. Voiced-only descriptors (f0, jitter, shimmer)
/// summarize to 0 when no frame carries a value.
AcousticFeatureVector summarize(const LldFrameSeries& frames, const AcousticConfig& config);

/// Resample to the target rate, compute LLDs, summarize.
AcousticFeatureVector extract_features(const audio::AudioClip& clip,
                                       const AcousticConfig& config);

struct FeatureRow {
  std::string id;
  AcousticFeatureVector values{};
};

/// Header "id,<feature names...>", one row per utterance.
void write_feature_csv(const std::filesystem::path& path,
                       const std::vector<std::string>& feature_names,
                       const std::vector<FeatureRow>& rows);
std::vector<FeatureRow> read_feature_csv(const std::filesystem::path& path);

}  // namespace cpsfuse::acoustic
