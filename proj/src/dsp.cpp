#include "rexnet/dsp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>

#include "rexnet/error.hpp"

namespace rexnet::dsp {

namespace {

constexpr double kPitchLowHz = 75.0;
constexpr double kPitchHighHz = 500.0;
constexpr double kShrillCutoffHz = 500.0;
constexpr int kPitchFft = 8192;
constexpr int kRmsWindow = 400;  // 25 ms
constexpr int kRmsHop = 160;

// FFTW planning is not thread-safe; execution with new arrays is.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }
  fftw_plan get(int n) {
    std::lock_guard lock(mu_);
    auto it = plans_.find(n);
    if (it != plans_.end()) return it->second;
    std::vector<double> in(static_cast<std::size_t>(n));
    std::vector<fftw_complex> out(static_cast<std::size_t>(n / 2 + 1));
    fftw_plan p = fftw_plan_dft_r2c_1d(n, in.data(), out.data(), FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_.emplace(n, p);
    return p;
  }
  ~PlanCache() {
    for (auto& [n, p] : plans_) fftw_destroy_plan(p);
  }

 private:
  std::mutex mu_;
  std::map<int, fftw_plan> plans_;
};

std::vector<double> hann(int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / n);
  return w;
}

// [bin][fft_bin] triangular weights on an n_fft grid.
const std::vector<std::vector<double>>& mel_filterbank() {
  static const std::vector<std::vector<double>> bank = [] {
    const int n_bins = kWindow / 2 + 1;
    std::vector<double> edges(kMelBins + 2);
    const double lo = hz_to_mel(kMelLowHz), hi = hz_to_mel(kMelHighHz);
    for (int i = 0; i < kMelBins + 2; ++i)
      edges[i] = mel_to_hz(lo + (hi - lo) * i / (kMelBins + 1));
    std::vector<std::vector<double>> fb(kMelBins, std::vector<double>(n_bins, 0.0));
    for (int m = 0; m < kMelBins; ++m) {
      const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
      for (int k = 0; k < n_bins; ++k) {
        const double f = static_cast<double>(k) * audio::kSampleRate / kWindow;
        double v = 0.0;
        if (f > left && f <= center) v = (f - left) / (center - left);
        else if (f > center && f < right) v = (right - f) / (right - center);
        fb[m][k] = v;
      }
    }
    return fb;
  }();
  return bank;
}

double percentile(std::vector<double> v, double p) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (v[hi] - v[lo]) * (pos - static_cast<double>(lo));
}

double frame_rms(const std::vector<double>& x, std::size_t start, int len) {
  double s = 0.0;
  for (int i = 0; i < len; ++i) s += x[start + i] * x[start + i];
  return std::sqrt(s / len);
}

}  // namespace

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> mel_centers(int bins, double low, double high) {
  std::vector<double> c(static_cast<std::size_t>(bins));
  const double lo = hz_to_mel(low), hi = hz_to_mel(high);
  for (int m = 0; m < bins; ++m) c[m] = mel_to_hz(lo + (hi - lo) * (m + 1) / (bins + 1));
  return c;
}

std::vector<std::complex<double>> rfft(std::span<const double> x) {
  const int n = static_cast<int>(x.size());
  std::vector<double> in(x.begin(), x.end());
  std::vector<std::complex<double>> out(static_cast<std::size_t>(n / 2 + 1));
  fftw_execute_dft_r2c(PlanCache::instance().get(n), in.data(),
                       reinterpret_cast<fftw_complex*>(out.data()));
  return out;
}

nn::Tensor MelSpectrogram::log_compressed() const {
  nn::Tensor t({1, bins, frames});
  for (std::size_t i = 0; i < power.size(); ++i) t.data[i] = std::log1p(power[i]);
  return t;
}

double MelSpectrogram::total_power() const { return std::accumulate(power.begin(), power.end(), 0.0); }

MelSpectrogram mel_spectrogram(const audio::Waveform& w) {
  const auto& fb = mel_filterbank();
  static const std::vector<double> window = hann(kWindow);
  MelSpectrogram spec;
  spec.frames = frame_count(static_cast<int>(w.samples.size()));
  spec.power.assign(static_cast<std::size_t>(kMelBins) * spec.frames, 0.0);
  const int n_bins = kWindow / 2 + 1;
  std::vector<double> frame(kWindow), pw(static_cast<std::size_t>(n_bins));
  for (int t = 0; t < spec.frames; ++t) {
    const std::size_t start = static_cast<std::size_t>(t) * kHop;
    for (int i = 0; i < kWindow; ++i) frame[i] = w.samples[start + i] * window[i];
    const auto bins = rfft(frame);
    for (int k = 0; k < n_bins; ++k) pw[k] = std::norm(bins[k]);
    for (int m = 0; m < kMelBins; ++m) {
      double acc = 0.0;
      const auto& row = fb[m];
      for (int k = 0; k < n_bins; ++k) acc += row[k] * pw[k];
      spec.power[static_cast<std::size_t>(m) * spec.frames + t] = acc;
    }
  }
  return spec;
}

PauseAnalysis detect_pauses(const audio::Waveform& w, const SegmentationConfig& cfg) {
  PauseAnalysis out;
  const auto& x = w.samples;
  const int n_frames = frame_count(static_cast<int>(x.size()), kRmsWindow, kRmsHop);
  out.frame_rms.resize(static_cast<std::size_t>(n_frames));
  for (int i = 0; i < n_frames; ++i)
    out.frame_rms[i] = frame_rms(x, static_cast<std::size_t>(i) * kRmsHop, kRmsWindow);
  const double p95 = percentile(out.frame_rms, 0.95);
  out.silence_threshold = cfg.silence_ratio * p95;
  if (p95 <= 0.0) return out;  // silent clip

  const double thr = out.silence_threshold;
  std::vector<bool> silent(static_cast<std::size_t>(n_frames));
  for (int i = 0; i < n_frames; ++i) silent[i] = out.frame_rms[i] < thr;
  int first = 0, last = n_frames - 1;
  while (first < n_frames && silent[first]) ++first;
  while (last >= 0 && silent[last]) --last;
  if (first > last) return out;

  // Sample-accurate edges inside the boundary frames.
  auto first_loud = [&](int frame) {
    const std::size_t s0 = static_cast<std::size_t>(frame) * kRmsHop;
    for (std::size_t s = s0; s < s0 + kRmsWindow; ++s)
      if (std::abs(x[s]) >= thr) return s;
    return s0;
  };
  auto last_loud_end = [&](int frame) {
    const std::size_t s0 = static_cast<std::size_t>(frame) * kRmsHop;
    for (std::size_t s = s0 + kRmsWindow; s > s0; --s)
      if (std::abs(x[s - 1]) >= thr) return s;
    return s0 + kRmsWindow;
  };
  const double fs = w.sample_rate;
  const std::size_t onset = first_loud(first), offset = last_loud_end(last);
  out.voiced = {static_cast<double>(onset) / fs, static_cast<double>(offset) / fs};
  out.voiced_seconds = out.voiced.duration();

  for (int i = first; i <= last;) {
    if (!silent[i]) {
      ++i;
      continue;
    }
    int j = i;
    while (j <= last && silent[j]) ++j;
    // Silent run is frames [i, j); neighbours i-1 and j are voiced.
    const double start = static_cast<double>(last_loud_end(i - 1)) / fs;
    const double end = static_cast<double>(first_loud(j)) / fs;
    if (end - start >= cfg.min_pause_seconds) {
      out.pauses.push_back({start, end});
      out.pause_seconds += end - start;
    }
    i = j;
  }
  return out;
}

std::vector<Span> segment_words(const audio::Waveform& w, int word_count,
                                const SegmentationConfig& cfg) {
  return segment_words(detect_pauses(w, cfg), word_count, cfg);
}

std::vector<Span> segment_words(const PauseAnalysis& pa, int word_count,
                                const SegmentationConfig& cfg) {
  if (word_count < 1) throw Error("segment_words: word_count must be at least 1");
  if (pa.voiced_seconds <= 0.0) throw CueError("segment_words: clip has no voiced region");
  const Span region = pa.voiced;
  auto uniform = [&] {
    std::vector<Span> spans;
    const double step = region.duration() / word_count;
    for (int k = 0; k < word_count; ++k)
      spans.push_back({region.start_s + step * k,
                       k + 1 == word_count ? region.end_s : region.start_s + step * (k + 1)});
    return spans;
  };
  if (word_count == 1) return {region};

  const double hop_s = static_cast<double>(kRmsHop) / audio::kSampleRate;
  const double half_win_s = 0.5 * kRmsWindow / audio::kSampleRate;
  auto center = [&](int i) { return i * hop_s + half_win_s; };

  std::vector<int> inside;
  for (int i = 0; i < static_cast<int>(pa.frame_rms.size()); ++i)
    if (center(i) > region.start_s && center(i) < region.end_s) inside.push_back(i);
  if (inside.empty()) return uniform();
  std::vector<double> voiced_rms;
  for (int i : inside)
    if (pa.frame_rms[i] >= pa.silence_threshold) voiced_rms.push_back(pa.frame_rms[i]);
  const double median = percentile(voiced_rms, 0.5);
  const double valley_thr = cfg.valley_ratio * median;

  struct Valley {
    double depth;
    double time;
  };
  std::vector<Valley> valleys;
  for (std::size_t k = 0; k < inside.size();) {
    if (pa.frame_rms[inside[k]] >= valley_thr) {
      ++k;
      continue;
    }
    std::size_t m = k;
    double depth = pa.frame_rms[inside[k]];
    while (m < inside.size() && pa.frame_rms[inside[m]] < valley_thr) {
      depth = std::min(depth, pa.frame_rms[inside[m]]);
      ++m;
    }
    // Runs touching the region edges are onset/offset ramps, not valleys.
    if (k > 0 && m < inside.size())
      valleys.push_back({depth, 0.5 * (center(inside[k]) + center(inside[m - 1]))});
    k = m;
  }
  std::stable_sort(valleys.begin(), valleys.end(),
                   [](const Valley& a, const Valley& b) { return a.depth < b.depth; });
  std::vector<double> cuts;
  for (const auto& v : valleys) {
    if (static_cast<int>(cuts.size()) == word_count - 1) break;
    bool ok = v.time - region.start_s >= cfg.min_valley_gap_seconds &&
              region.end_s - v.time >= cfg.min_valley_gap_seconds;
    for (double c : cuts) ok = ok && std::abs(c - v.time) >= cfg.min_valley_gap_seconds;
    if (ok) cuts.push_back(v.time);
  }
  if (static_cast<int>(cuts.size()) < word_count - 1) return uniform();
  std::sort(cuts.begin(), cuts.end());
  std::vector<Span> spans;
  double prev = region.start_s;
  for (double c : cuts) {
    spans.push_back({prev, c});
    prev = c;
  }
  spans.push_back({prev, region.end_s});
  return spans;
}

ClipFeatures analyze_clip(const MelSpectrogram& spec, const audio::Waveform& w,
                          const SegmentationConfig& cfg) {
  ClipFeatures f;
  f.pauses = detect_pauses(w, cfg);
  const int T = spec.frames;
  f.f0.assign(static_cast<std::size_t>(T), 0.0);
  f.high_power.assign(static_cast<std::size_t>(T), 0.0);
  f.total_power.assign(static_cast<std::size_t>(T), 0.0);
  f.voiced.assign(static_cast<std::size_t>(T), false);

  const auto centers = mel_centers();
  for (int t = 0; t < T; ++t)
    for (int m = 0; m < spec.bins; ++m) {
      const double p = spec.at(m, t);
      f.total_power[t] += p;
      if (centers[m] >= kShrillCutoffHz) f.high_power[t] += p;
    }
  if (f.pauses.voiced_seconds <= 0.0) return f;

  const double fs = w.sample_rate;
  const auto onset = static_cast<std::size_t>(std::llround(f.pauses.voiced.start_s * fs));
  const auto offset = static_cast<std::size_t>(std::llround(f.pauses.voiced.end_s * fs));
  double abs_sum = 0.0;
  for (std::size_t s = onset; s < offset; ++s) abs_sum += std::abs(w.samples[s]);
  f.loudness = offset > onset ? abs_sum / static_cast<double>(offset - onset) : 0.0;

  static const std::vector<double> window = hann(kWindow);
  std::vector<double> padded(kPitchFft, 0.0);
  const double bin_hz = fs / kPitchFft;
  const int k_lo = static_cast<int>(std::ceil(kPitchLowHz / bin_hz));
  const int k_hi = static_cast<int>(std::floor(kPitchHighHz / bin_hz));
  for (int t = 0; t < T; ++t) {
    const std::size_t start = static_cast<std::size_t>(t) * kHop;
    const double center_s = (static_cast<double>(start) + kWindow / 2.0) / fs;
    if (center_s < f.pauses.voiced.start_s || center_s > f.pauses.voiced.end_s) continue;
    if (frame_rms(w.samples, start, kWindow) < f.pauses.silence_threshold) continue;
    f.voiced[t] = true;
    for (int i = 0; i < kWindow; ++i) padded[i] = w.samples[start + i] * window[i];
    const auto bins = rfft(padded);
    int best = k_lo;
    for (int k = k_lo; k <= k_hi; ++k)
      if (std::norm(bins[k]) > std::norm(bins[best])) best = k;
    f.f0[t] = best * bin_hz;
  }
  return f;
}

CueVector extract_cues(const ClipFeatures& f, const std::vector<bool>* mask, int word_count) {
  if (f.pauses.voiced_seconds <= 0.0) throw CueError("extract_cues: unvoiced clip");
  const std::size_t T = f.voiced.size();
  std::vector<std::size_t> frames;
  if (mask) {
    if (mask->size() != T) throw ShapeError("extract_cues: mask length does not match frames");
    for (std::size_t t = 0; t < T; ++t)
      if (f.voiced[t] && (*mask)[t]) frames.push_back(t);
  }
  if (frames.size() < 5) {
    frames.clear();
    for (std::size_t t = 0; t < T; ++t)
      if (f.voiced[t]) frames.push_back(t);
  }
  if (frames.empty()) throw CueError("extract_cues: no voiced spectrogram frames");

  CueVector c;
  double hi = 0.0, total = 0.0, f0_sum = 0.0;
  for (std::size_t t : frames) {
    hi += f.high_power[t];
    total += f.total_power[t];
    f0_sum += f.f0[t];
  }
  c.shrillness = total > 0.0 ? std::clamp(hi / total, 0.0, 1.0) : 0.0;
  c.loudness = f.loudness;
  const double n = static_cast<double>(frames.size());
  c.mean_pitch = f0_sum / n;
  double var = 0.0;
  for (std::size_t t : frames) var += (f.f0[t] - c.mean_pitch) * (f.f0[t] - c.mean_pitch);
  c.pitch_range = std::sqrt(var / n);
  c.speaking_rate = word_count / f.pauses.voiced_seconds;
  c.pause_proportion = std::clamp(f.pauses.pause_seconds / f.pauses.voiced_seconds, 0.0, 1.0);
  return c;
}

CueVector extract_cues(const MelSpectrogram& spec, const audio::Waveform& w,
                       const std::vector<bool>* mask, int word_count,
                       const SegmentationConfig& cfg) {
  return extract_cues(analyze_clip(spec, w, cfg), mask, word_count);
}

}  // namespace rexnet::dsp
