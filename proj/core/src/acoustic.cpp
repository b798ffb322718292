#include "cpsfuse/acoustic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numbers>
#include <numeric>
#include <sstream>

#include <fftw3.h>
#include <fmt/format.h>

#include "cpsfuse/error.hpp"

namespace cpsfuse::acoustic {

namespace {

constexpr double kHnrLimitDb = 40.0;
// Spectral floor relative to frame energy; keeps logs finite and
// ratios exactly scale-invariant.
constexpr double kRelativeFloor = 1e-12;

enum class Lld {
  F0, Loudness, Jitter, Shimmer, Hnr, AlphaRatio, Hammarberg, Slope0To500, Slope500To1500
};

struct Functional {
  Lld lld;
  bool stddev;
};

std::optional<Functional> parse_functional(const std::string& name) {
  static const std::pair<const char*, Lld> kNames[] = {
      {"f0", Lld::F0},
      {"loudness", Lld::Loudness},
      {"jitter", Lld::Jitter},
      {"shimmer", Lld::Shimmer},
      {"hnr", Lld::Hnr},
      {"alpha_ratio", Lld::AlphaRatio},
      {"hammarberg", Lld::Hammarberg},
      {"slope0_500", Lld::Slope0To500},
      {"slope500_1500", Lld::Slope500To1500},
  };
  const auto us = name.rfind('_');
  if (us == std::string::npos) return std::nullopt;
  const std::string base = name.substr(0, us);
  const std::string stat = name.substr(us + 1);
  if (stat != "mean" && stat != "std") return std::nullopt;
  for (const auto& [n, lld] : kNames) {
    if (base == n) return Functional{lld, stat == "std"};
  }
  return std::nullopt;
}

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

// Owns FFTW buffers and plans for one frame geometry.
class FrameAnalyzer {
 public:
  FrameAnalyzer(std::size_t frame_len, double rate) : frame_len_(frame_len), rate_(rate) {
    nfft_ = 1;
    while (nfft_ < 2 * frame_len) nfft_ *= 2;
    real_ = fftw_alloc_real(nfft_);
    spec_ = fftw_alloc_complex(nfft_ / 2 + 1);
    {
      std::lock_guard lock(planner_mutex());
      forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(nfft_), real_, spec_, FFTW_ESTIMATE);
      inverse_ = fftw_plan_dft_c2r_1d(static_cast<int>(nfft_), spec_, real_, FFTW_ESTIMATE);
    }
    window_.resize(frame_len);
    for (std::size_t n = 0; n < frame_len; ++n) {
      window_[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                        static_cast<double>(frame_len - 1));
    }
    window_acf_.assign(frame_len, 0.0);
    for (std::size_t lag = 0; lag < frame_len; ++lag) {
      double acc = 0.0;
      for (std::size_t n = 0; n + lag < frame_len; ++n) acc += window_[n] * window_[n + lag];
      window_acf_[lag] = acc;
    }
    power_.resize(nfft_ / 2 + 1);
    acf_.resize(frame_len);
  }
  ~FrameAnalyzer() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(inverse_);
    fftw_free(real_);
    fftw_free(spec_);
  }
  FrameAnalyzer(const FrameAnalyzer&) = delete;
  FrameAnalyzer& operator=(const FrameAnalyzer&) = delete;

  // Fills power_ (windowed, DC-removed spectrum) and acf_ (raw autocorrelation).
  void analyze(const double* frame) {
    const double mean =
        std::accumulate(frame, frame + frame_len_, 0.0) / static_cast<double>(frame_len_);
    std::fill(real_, real_ + nfft_, 0.0);
    for (std::size_t n = 0; n < frame_len_; ++n) real_[n] = (frame[n] - mean) * window_[n];
    fftw_execute(forward_);
    for (std::size_t k = 0; k <= nfft_ / 2; ++k) {
      power_[k] = spec_[k][0] * spec_[k][0] + spec_[k][1] * spec_[k][1];
      spec_[k][0] = power_[k];
      spec_[k][1] = 0.0;
    }
    fftw_execute(inverse_);
    for (std::size_t lag = 0; lag < frame_len_; ++lag) {
      acf_[lag] = real_[lag] / static_cast<double>(nfft_);
    }
  }

  double bin_hz(std::size_t k) const {
    return static_cast<double>(k) * rate_ / static_cast<double>(nfft_);
  }
  std::size_t bins() const { return power_.size(); }
  const std::vector<double>& power() const { return power_; }
  const std::vector<double>& acf() const { return acf_; }
  const std::vector<double>& window_acf() const { return window_acf_; }

 private:
  std::size_t frame_len_;
  double rate_;
  std::size_t nfft_ = 0;
  double* real_ = nullptr;
  fftw_complex* spec_ = nullptr;
  fftw_plan forward_ = nullptr;
  fftw_plan inverse_ = nullptr;
  std::vector<double> window_;
  std::vector<double> window_acf_;
  std::vector<double> power_;
  std::vector<double> acf_;
};

struct PitchEstimate {
  double peak = 0.0;     // normalized autocorrelation at the chosen lag
  double period = 0.0;   // samples, sub-sample refined; 0 when no peak found
};

PitchEstimate estimate_pitch(const std::vector<double>& acf,
                             const std::vector<double>& window_acf, std::size_t lag_lo,
                             std::size_t lag_hi) {
  PitchEstimate est;
  if (acf[0] <= 0.0) return est;
  auto norm = [&](std::size_t lag) {
    return (acf[lag] / acf[0]) / (window_acf[lag] / window_acf[0]);
  };
  double best = -1.0;
  std::vector<std::pair<std::size_t, double>> peaks;
  for (std::size_t lag = lag_lo; lag <= lag_hi; ++lag) {
    const double v = norm(lag);
    best = std::max(best, v);
    if (v > norm(lag - 1) && v >= norm(lag + 1)) peaks.emplace_back(lag, v);
  }
  if (peaks.empty()) {
    est.peak = std::clamp(best, -1.0, 1.0);
    return est;
  }
  double best_peak = peaks.front().second;
  for (const auto& p : peaks) best_peak = std::max(best_peak, p.second);
  // The first peak close to the best one guards against octave-down picks.
  std::size_t chosen = peaks.front().first;
  double value = peaks.front().second;
  for (const auto& [lag, v] : peaks) {
    if (v >= 0.9 * best_peak) {
      chosen = lag;
      value = v;
      break;
    }
  }
  const double a = norm(chosen - 1);
  const double c = norm(chosen + 1);
  const double denom = a - 2.0 * value + c;
  double delta = denom < 0.0 ? 0.5 * (a - c) / denom : 0.0;
  delta = std::clamp(delta, -0.5, 0.5);
  est.period = static_cast<double>(chosen) + delta;
  est.peak = std::min(1.0, value - 0.25 * (a - c) * delta);
  return est;
}

struct Perturbation {
  std::optional<double> jitter;
  std::optional<double> shimmer;
};

// Cycle-by-cycle period and peak-to-peak amplitude perturbation inside one frame.
Perturbation perturbation(const double* frame, std::size_t n, double period) {
  Perturbation out;
  if (period < 2.0) return out;
  std::vector<double> x(frame, frame + n);
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  for (double& v : x) v -= mean;

  auto argmax = [&](std::size_t lo, std::size_t hi) {
    std::size_t best = lo;
    for (std::size_t i = lo + 1; i <= hi; ++i) {
      if (x[i] > x[best]) best = i;
    }
    return best;
  };
  auto refine = [&](std::size_t p) {
    if (p == 0 || p + 1 >= n) return static_cast<double>(p);
    const double a = x[p - 1], b = x[p], c = x[p + 1];
    const double denom = a - 2.0 * b + c;
    if (denom >= 0.0) return static_cast<double>(p);
    return static_cast<double>(p) + std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
  };

  std::vector<std::size_t> peaks;
  const auto first_hi = std::min(n - 1, static_cast<std::size_t>(std::ceil(period)) - 1);
  peaks.push_back(argmax(0, first_hi));
  while (true) {
    const std::size_t p = peaks.back();
    const auto lo = p + static_cast<std::size_t>(std::floor(0.8 * period));
    const auto hi = p + static_cast<std::size_t>(std::ceil(1.2 * period));
    if (hi >= n) break;
    peaks.push_back(argmax(lo, hi));
  }
  if (peaks.size() < 3) return out;

  std::vector<double> periods, amplitudes;
  for (std::size_t k = 0; k + 1 < peaks.size(); ++k) {
    periods.push_back(refine(peaks[k + 1]) - refine(peaks[k]));
    const auto [mn, mx] = std::minmax_element(x.begin() + static_cast<std::ptrdiff_t>(peaks[k]),
                                              x.begin() + static_cast<std::ptrdiff_t>(peaks[k + 1]) + 1);
    amplitudes.push_back(*mx - *mn);
  }
  auto relative_perturbation = [](const std::vector<double>& v) -> std::optional<double> {
    double diff = 0.0;
    for (std::size_t k = 1; k < v.size(); ++k) diff += std::abs(v[k] - v[k - 1]);
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (mean <= 0.0) return std::nullopt;
    return (diff / static_cast<double>(v.size() - 1)) / mean;
  };
  out.jitter = relative_perturbation(periods);
  out.shimmer = relative_perturbation(amplitudes);
  return out;
}

double band_energy(const FrameAnalyzer& fa, double lo, double hi) {
  double acc = 0.0;
  for (std::size_t k = 0; k < fa.bins(); ++k) {
    const double f = fa.bin_hz(k);
    if (f >= lo && f < hi) acc += fa.power()[k];
  }
  return acc;
}

double band_peak(const FrameAnalyzer& fa, double lo, double hi) {
  double peak = 0.0;
  for (std::size_t k = 0; k < fa.bins(); ++k) {
    const double f = fa.bin_hz(k);
    if (f >= lo && f <= hi) peak = std::max(peak, fa.power()[k]);
  }
  return peak;
}

// Least-squares slope of 10 log10(power) against log2(frequency), in dB/octave.
double band_slope(const FrameAnalyzer& fa, double lo, double hi, double floor) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t m = 0;
  for (std::size_t k = 1; k < fa.bins(); ++k) {
    const double f = fa.bin_hz(k);
    if (f < lo || f > hi) continue;
    const double x = std::log2(f);
    const double y = 10.0 * std::log10(fa.power()[k] + floor);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  if (m < 2) return 0.0;
  const double n = static_cast<double>(m);
  const double denom = n * sxx - sx * sx;
  return denom > 0.0 ? (n * sxy - sx * sy) / denom : 0.0;
}

double hnr_db(double r) {
  const double lim = 1.0 / (1.0 + std::pow(10.0, kHnrLimitDb / 10.0));
  const double rc = std::clamp(r, lim, 1.0 - lim);
  return 10.0 * std::log10(rc / (1.0 - rc));
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size()));
}

std::vector<double> values_of(const std::vector<std::optional<double>>& v) {
  std::vector<double> out;
  for (const auto& x : v) {
    if (x) out.push_back(*x);
  }
  return out;
}

}  // namespace

std::vector<std::string> default_feature_names() {
  return {"f0_mean",         "f0_std",          "loudness_mean",     "loudness_std",
          "jitter_mean",     "shimmer_mean",    "hnr_mean",          "alpha_ratio_mean",
          "hammarberg_mean", "slope0_500_mean", "slope500_1500_mean"};
}

void AcousticConfig::validate() const {
  if (!(target_rate > 0.0)) throw Error("acoustic target_rate must be positive");
  if (!(frame_step_ms > 0.0) || !(frame_length_ms > 0.0) || frame_step_ms > frame_length_ms) {
    throw Error("acoustic frame step must be positive and no longer than the frame");
  }
  if (!(f0_min > 0.0) || !(f0_max > f0_min)) throw Error("acoustic f0 range must be positive and ordered");
  if (f0_max >= target_rate / 2.0) throw Error("acoustic f0_max must lie below Nyquist");
  if (feature_names.size() != kFeatureCount) {
    throw Error(fmt::format("acoustic feature list must name exactly {} functionals, got {}",
                            kFeatureCount, feature_names.size()));
  }
  for (const auto& n : feature_names) {
    if (!parse_functional(n)) throw Error(fmt::format("unknown acoustic functional '{}'", n));
  }
  const std::size_t len = frame_length_samples();
  if (static_cast<double>(len) * 2.0 / 3.0 <= std::floor(target_rate / f0_max) + 1.0) {
    throw Error("acoustic frame is too short for the f0 range");
  }
}

std::size_t AcousticConfig::frame_length_samples() const {
  return static_cast<std::size_t>(std::llround(frame_length_ms * target_rate / 1000.0));
}

std::size_t AcousticConfig::frame_step_samples() const {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(frame_step_ms * target_rate / 1000.0)));
}

std::size_t LldFrameSeries::voiced_count() const {
  return static_cast<std::size_t>(std::count_if(f0.begin(), f0.end(), [](const auto& v) { return v.has_value(); }));
}

std::size_t frame_count(std::size_t n_samples, const AcousticConfig& config) {
  const std::size_t len = config.frame_length_samples();
  if (n_samples < len) return 0;
  return (n_samples - len) / config.frame_step_samples() + 1;
}

LldFrameSeries compute_llds(const audio::AudioClip& clip, const AcousticConfig& config) {
  config.validate();
  clip.validate();
  if (clip.sample_rate != config.target_rate) {
    throw Error(fmt::format("clip is at {} Hz; resample to {} Hz before extraction",
                            clip.sample_rate, config.target_rate));
  }
  const std::size_t len = config.frame_length_samples();
  const std::size_t step = config.frame_step_samples();
  const std::size_t frames = frame_count(clip.samples.size(), config);
  if (frames == 0) {
    throw Error(fmt::format("clip of {} samples is shorter than one {}-sample frame",
                            clip.samples.size(), len));
  }
  const double fs = config.target_rate;
  const std::size_t lag_lo = std::max<std::size_t>(2, static_cast<std::size_t>(std::floor(fs / config.f0_max)));
  const std::size_t lag_hi = std::min(static_cast<std::size_t>(std::ceil(fs / config.f0_min)), 2 * len / 3);

  FrameAnalyzer fa(len, fs);
  LldFrameSeries out;
  auto reserve = [frames](auto&... v) { (v.reserve(frames), ...); };
  reserve(out.time_s, out.f0, out.loudness, out.jitter, out.shimmer, out.hnr, out.alpha_ratio,
          out.hammarberg, out.slope_0_500, out.slope_500_1500);

  for (std::size_t f = 0; f < frames; ++f) {
    const double* frame = clip.samples.data() + f * step;
    out.time_s.push_back((static_cast<double>(f * step) + static_cast<double>(len) / 2.0) / fs);

    double energy = 0.0;
    for (std::size_t n = 0; n < len; ++n) energy += frame[n] * frame[n];
    out.loudness.push_back(std::sqrt(energy / static_cast<double>(len)));

    fa.analyze(frame);
    const PitchEstimate pitch = estimate_pitch(fa.acf(), fa.window_acf(), lag_lo, lag_hi);
    const bool voiced = pitch.period > 0.0 && pitch.peak >= config.voicing_threshold;
    out.hnr.push_back(hnr_db(pitch.peak));
    if (voiced) {
      out.f0.emplace_back(fs / pitch.period);
      const Perturbation p = perturbation(frame, len, pitch.period);
      out.jitter.push_back(p.jitter);
      out.shimmer.push_back(p.shimmer);
    } else {
      out.f0.emplace_back(std::nullopt);
      out.jitter.emplace_back(std::nullopt);
      out.shimmer.emplace_back(std::nullopt);
    }

    const auto& power = fa.power();
    const double total = std::accumulate(power.begin(), power.end(), 0.0);
    if (total <= 0.0) {
      out.alpha_ratio.push_back(0.0);
      out.hammarberg.push_back(0.0);
      out.slope_0_500.push_back(0.0);
      out.slope_500_1500.push_back(0.0);
      continue;
    }
    const double floor = kRelativeFloor * total;
    out.alpha_ratio.push_back(10.0 * std::log10((band_energy(fa, 50.0, 1000.0) + floor) /
                                                (band_energy(fa, 1000.0, 5000.0) + floor)));
    out.hammarberg.push_back(10.0 * std::log10((band_peak(fa, 0.0, 2000.0) + floor) /
                                               (band_peak(fa, 2000.0, 5000.0) + floor)));
    out.slope_0_500.push_back(band_slope(fa, 0.0, 500.0, floor));
    out.slope_500_1500.push_back(band_slope(fa, 500.0, 1500.0, floor));
  }
  return out;
}

AcousticFeatureVector summarize(const LldFrameSeries& frames, const AcousticConfig& config) {
  config.validate();
  if (frames.size() == 0) throw Error("cannot summarize an empty frame series");
  AcousticFeatureVector out{};
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    const Functional fn = *parse_functional(config.feature_names[i]);
    std::vector<double> values;
    switch (fn.lld) {
      case Lld::F0: values = values_of(frames.f0); break;
      case Lld::Jitter: values = values_of(frames.jitter); break;
      case Lld::Shimmer: values = values_of(frames.shimmer); break;
      case Lld::Loudness: values = frames.loudness; break;
      case Lld::Hnr: values = frames.hnr; break;
      case Lld::AlphaRatio: values = frames.alpha_ratio; break;
      case Lld::Hammarberg: values = frames.hammarberg; break;
      case Lld::Slope0To500: values = frames.slope_0_500; break;
      case Lld::Slope500To1500: values = frames.slope_500_1500; break;
    }
    out[i] = fn.stddev ? std_of(values) : mean_of(values);
  }
  return out;
}

AcousticFeatureVector extract_features(const audio::AudioClip& clip, const AcousticConfig& config) {
  const audio::AudioClip at_rate =
      clip.sample_rate == config.target_rate ? clip : audio::resample(clip, config.target_rate);
  return summarize(compute_llds(at_rate, config), config);
}

void write_feature_csv(const std::filesystem::path& path,
                       const std::vector<std::string>& feature_names,
                       const std::vector<FeatureRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write feature file '{}'", path.string()));
  out << "id";
  for (const auto& n : feature_names) out << ',' << n;
  out << '\n';
  for (const auto& r : rows) {
    out << r.id;
    for (double v : r.values) out << ',' << fmt::format("{:.17g}", v);
    out << '\n';
  }
}

std::vector<FeatureRow> read_feature_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open feature file '{}'", path.string()));
  std::string line;
  std::getline(in, line);
  std::vector<FeatureRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    FeatureRow row;
    std::getline(ss, row.id, ',');
    std::size_t i = 0;
    while (std::getline(ss, field, ',')) {
      if (i >= kFeatureCount) break;
      try {
        row.values[i++] = std::stod(field);
      } catch (const std::exception&) {
        throw DataError(fmt::format("{}:{}: bad number '{}'", path.string(), line_no, field));
      }
    }
    if (i != kFeatureCount) {
      throw DataError(fmt::format("{}:{}: expected {} feature values", path.string(), line_no, kFeatureCount));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace cpsfuse::acoustic
