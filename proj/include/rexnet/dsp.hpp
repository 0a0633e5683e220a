#pragma once

#include <complex>
#include <optional>
#include <span>
#include <vector>

#include "rexnet/audio_io.hpp"
#include "rexnet/tensor.hpp"

namespace rexnet::dsp {

inline constexpr int kMelBins = 128;
inline constexpr int kWindow = 640;  // 0.04 s
inline constexpr int kHop = 160;     // 0.01 s
inline constexpr double kMelLowHz = 0.0;
inline constexpr double kMelHighHz = 8000.0;

inline constexpr int frame_count(int samples, int window = kWindow, int hop = kHop) {
  return samples < window ? 0 : (samples - window) / hop + 1;
}
inline constexpr int kFrames = frame_count(audio::kClipSamples);  // 297

inline constexpr double frame_center_seconds(int frame) {
  return (static_cast<double>(frame) * kHop + kWindow / 2.0) / audio::kSampleRate;
}

struct MelSpectrogram {
  int bins = kMelBins;
  int frames = 0;
  std::vector<double> power;  // [bin][frame], raw (not log-compressed)

  double at(int bin, int frame) const { return power[static_cast<std::size_t>(bin) * frames + frame]; }
  // log(1 + power) as a (1, bins, frames) tensor for model input.
  nn::Tensor log_compressed() const;
  double total_power() const;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);
// Center frequency of each mel filter.
std::vector<double> mel_centers(int bins = kMelBins, double low = kMelLowHz, double high = kMelHighHz);

// Real-input FFT of arbitrary length; returns n/2 + 1 complex bins.
std::vector<std::complex<double>> rfft(std::span<const double> x);

MelSpectrogram mel_spectrogram(const audio::Waveform& w);

// Thresholds for energy-based segmentation.
struct SegmentationConfig {
  double silence_ratio = 0.05;      // fraction of the 95th-percentile frame RMS
  double min_pause_seconds = 0.10;
  double min_valley_gap_seconds = 0.08;
  double valley_ratio = 0.5;        // valley frames sit below this fraction of median voiced RMS
};

struct Span {
  double start_s = 0.0;
  double end_s = 0.0;
  double duration() const { return end_s - start_s; }
};

struct PauseAnalysis {
  std::vector<Span> pauses;
  Span voiced;                 // first to last voiced sample (padding excluded)
  double voiced_seconds = 0.0; // t_total; 0 for a silent clip
  double pause_seconds = 0.0;
  std::vector<double> frame_rms;  // 25 ms frames, 10 ms hop
  double silence_threshold = 0.0;
};

PauseAnalysis detect_pauses(const audio::Waveform& w, const SegmentationConfig& cfg = {});

std::vector<Span> segment_words(const audio::Waveform& w, int word_count,
                                const SegmentationConfig& cfg = {});
std::vector<Span> segment_words(const PauseAnalysis& pauses, int word_count,
                                const SegmentationConfig& cfg = {});

struct CueVector {
  double shrillness = 0.0;
  double loudness = 0.0;
  double mean_pitch = 0.0;
  double pitch_range = 0.0;
  double speaking_rate = 0.0;
  double pause_proportion = 0.0;

  static constexpr int kCount = 6;
  std::array<double, kCount> values() const {
    return {shrillness, loudness, mean_pitch, pitch_range, speaking_rate, pause_proportion};
  }
  static CueVector from_values(const std::array<double, kCount>& v) {
    return {v[0], v[1], v[2], v[3], v[4], v[5]};
  }
};

inline constexpr std::array<std::string_view, CueVector::kCount> kCueNames = {
    "shrillness", "loudness", "mean_pitch", "pitch_range", "speaking_rate", "pause_proportion"};

// Frame-level quantities behind the cues, computed once per clip so that
// cues can be re-aggregated cheaply under different saliency masks.
struct ClipFeatures {
  std::vector<double> f0;          // per spectrogram frame, Hz (modal bin in 75-500 Hz)
  std::vector<double> high_power;  // mel power above 500 Hz
  std::vector<double> total_power;
  std::vector<bool> voiced;        // per spectrogram frame
  PauseAnalysis pauses;
  double loudness = 0.0;           // mean |x| over the voiced region
};

ClipFeatures analyze_clip(const MelSpectrogram& spec, const audio::Waveform& w,
                          const SegmentationConfig& cfg = {});

// Throws CueError for an unvoiced clip.
CueVector extract_cues(const ClipFeatures& features, const std::vector<bool>* salient_mask,
                       int word_count);
CueVector extract_cues(const MelSpectrogram& spec, const audio::Waveform& w,
                       const std::vector<bool>* salient_mask, int word_count,
                       const SegmentationConfig& cfg = {});

}  // namespace rexnet::dsp
