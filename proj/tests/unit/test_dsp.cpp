#include "doctest.h"

#include <cmath>
#include <complex>

#include "rexnet/audio_io.hpp"
#include "rexnet/dsp.hpp"
#include "rexnet/error.hpp"

using namespace rexnet;
using namespace rexnet::dsp;
using audio::Waveform;

namespace {

Waveform silence() {
  Waveform w;
  w.samples.assign(audio::kClipSamples, 0.0);
  return w;
}

void add_tone(Waveform& w, double hz, double from_s, double to_s, double amp = 0.5) {
  const auto a = static_cast<std::size_t>(from_s * 16000), b = static_cast<std::size_t>(to_s * 16000);
  for (std::size_t i = a; i < b; ++i) w.samples[i] += amp * std::sin(2.0 * M_PI * hz * (i - a) / 16000.0);
}

Waveform tone_clip(double hz, double amp = 0.5) {
  Waveform w = silence();
  add_tone(w, hz, 0.0, 3.0, amp);
  return w;
}

// Naive O(n^2) DFT, independent of the FFT path.
double naive_peak_hz(const std::vector<double>& frame) {
  const std::size_t n = frame.size();
  double best = -1.0;
  std::size_t best_k = 0;
  for (std::size_t k = 0; k <= n / 2; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      acc += frame[i] * std::polar(1.0, -2.0 * M_PI * static_cast<double>(k * i) / static_cast<double>(n));
    if (std::norm(acc) > best) {
      best = std::norm(acc);
      best_k = k;
    }
  }
  return static_cast<double>(best_k) * 16000.0 / static_cast<double>(n);
}

}  // namespace

TEST_CASE("mel spectrogram shape and zero input") {
  static_assert(kFrames == 297);
  MelSpectrogram s = mel_spectrogram(silence());
  CHECK(s.bins == 128);
  CHECK(s.frames == 297);
  CHECK(s.power.size() == 128u * 297u);
  for (double v : s.power) CHECK(v == 0.0);
  auto t = s.log_compressed();
  CHECK(t.shape == std::vector<int>{1, 128, 297});
}

TEST_CASE("rfft agrees with a naive DFT") {
  std::vector<double> x(640);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(0.3 * i) + 0.2 * std::cos(1.7 * i);
  auto fast = rfft(x);
  for (std::size_t k : {0u, 5u, 31u, 160u, 320u}) {
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
      acc += x[i] * std::polar(1.0, -2.0 * M_PI * static_cast<double>(k * i) / 640.0);
    CHECK(std::abs(fast[k] - acc) < 1e-8);
  }
}

TEST_CASE("1 kHz tone concentrates power in the mel bins bracketing 1 kHz") {
  Waveform w = tone_clip(1000.0);
  MelSpectrogram s = mel_spectrogram(w);
  std::vector<double> frame(w.samples.begin() + 16000, w.samples.begin() + 16640);
  const double oracle_hz = naive_peak_hz(frame);
  CHECK(oracle_hz == doctest::Approx(1000.0));

  const auto centers = mel_centers();
  for (int t : {10, 150, 280}) {
    int peak = 0;
    for (int m = 1; m < 128; ++m)
      if (s.at(m, t) > s.at(peak, t)) peak = m;
    const double left = peak == 0 ? 0.0 : centers[peak - 1];
    const double right = peak == 127 ? 8000.0 : centers[peak + 1];
    CHECK(left < oracle_hz);
    CHECK(right > oracle_hz);
  }
  // Column-constant for a stationary tone.
  for (int m = 0; m < 128; ++m) CHECK(s.at(m, 50) == doctest::Approx(s.at(m, 250)).epsilon(1e-6).scale(1e-9));
}

TEST_CASE("spectrogram power scales with the square of amplitude") {
  audio::Corpus c = audio::synth_corpus(3, 2);
  const Waveform& w = c.clips[5].wave;
  Waveform scaled = w;
  const double alpha = 0.37;
  for (double& v : scaled.samples) v *= alpha;
  const double p = mel_spectrogram(w).total_power();
  const double q = mel_spectrogram(scaled).total_power();
  CHECK(std::abs(q - alpha * alpha * p) / (alpha * alpha * p) < 1e-6);
}

TEST_CASE("pause detection on constructed clips") {
  Waveform w = silence();
  add_tone(w, 250.0, 0.0, 0.9);
  add_tone(w, 250.0, 2.1, 3.0);
  PauseAnalysis pa = detect_pauses(w);
  REQUIRE(pa.pauses.size() == 1);
  CHECK(pa.pauses[0].duration() == doctest::Approx(1.2).epsilon(0.02));
  MelSpectrogram s = mel_spectrogram(w);
  CueVector c = extract_cues(s, w, nullptr, 6);
  CHECK(std::abs(c.pause_proportion - 0.40) <= 0.05);

  Waveform cont = tone_clip(250.0);
  PauseAnalysis none = detect_pauses(cont);
  CHECK(none.pauses.empty());
  CHECK(extract_cues(mel_spectrogram(cont), cont, nullptr, 6).pause_proportion == 0.0);

  Waveform zero = silence();
  PauseAnalysis z = detect_pauses(zero);
  CHECK(z.voiced_seconds == 0.0);
  CHECK(z.pauses.empty());
  CHECK_THROWS_AS(extract_cues(mel_spectrogram(zero), zero, nullptr, 6), CueError);
  CHECK_THROWS_AS(segment_words(zero, 6), CueError);
}

TEST_CASE("cue oracles on pure tones") {
  Waveform low = tone_clip(250.0);
  CueVector c = extract_cues(mel_spectrogram(low), low, nullptr, 6);
  CHECK(c.shrillness < 0.05);
  CHECK(std::abs(c.mean_pitch - 250.0) <= 10.0);
  CHECK(c.pitch_range < 5.0);
  CHECK(c.loudness == doctest::Approx(0.5 * 2.0 / M_PI).epsilon(0.01));

  Waveform high = tone_clip(1000.0);
  CueVector h = extract_cues(mel_spectrogram(high), high, nullptr, 6);
  CHECK(h.shrillness > 0.95);

  Waveform rate = silence();
  add_tone(rate, 250.0, 0.3, 2.7);
  CueVector r = extract_cues(mel_spectrogram(rate), rate, nullptr, 6);
  CHECK(std::abs(r.speaking_rate - 2.5) <= 0.01);
}

TEST_CASE("cue invariants: bounds and all-true mask equals no mask") {
  audio::Corpus corpus = audio::synth_corpus(5, 2);
  for (std::size_t i = 0; i < corpus.clips.size(); i += 3) {
    const auto& w = corpus.clips[i].wave;
    MelSpectrogram s = mel_spectrogram(w);
    ClipFeatures f = analyze_clip(s, w);
    CueVector plain = extract_cues(f, nullptr, 6);
    std::vector<bool> all(static_cast<std::size_t>(s.frames), true);
    CueVector masked = extract_cues(f, &all, 6);
    CHECK(plain.values() == masked.values());
    CHECK(plain.shrillness >= 0.0);
    CHECK(plain.shrillness <= 1.0);
    CHECK(plain.pause_proportion >= 0.0);
    CHECK(plain.pause_proportion <= 1.0);
    CHECK(plain.pitch_range >= 0.0);
    CHECK(plain.mean_pitch >= 75.0);
    CHECK(plain.mean_pitch <= 500.0);

    // Too few salient frames falls back to all voiced frames.
    std::vector<bool> sparse(static_cast<std::size_t>(s.frames), false);
    sparse[100] = sparse[101] = true;
    CHECK(extract_cues(f, &sparse, 6).values() == plain.values());
  }
}

TEST_CASE("word segmentation") {
  // Six separated bursts.
  Waveform w = silence();
  std::vector<double> peaks;
  for (int k = 0; k < 6; ++k) {
    const double a = 0.3 + 0.42 * k, b = a + 0.3;
    add_tone(w, 200.0, a, b);
    peaks.push_back(0.5 * (a + b));
  }
  auto spans = segment_words(w, 6);
  REQUIRE(spans.size() == 6);
  for (int k = 0; k < 6; ++k) {
    int inside = 0;
    for (double p : peaks) inside += (p >= spans[k].start_s && p < spans[k].end_s) ? 1 : 0;
    CHECK(inside == 1);
    CHECK(spans[k].start_s <= peaks[k]);
    CHECK(spans[k].end_s > peaks[k]);
  }

  // Flat tone: uniform fallback.
  Waveform flat = tone_clip(300.0);
  PauseAnalysis pa = detect_pauses(flat);
  auto uni = segment_words(pa, 6);
  REQUIRE(uni.size() == 6);
  for (const auto& s : uni) CHECK(s.duration() == doctest::Approx(pa.voiced_seconds / 6.0));

  auto one = segment_words(pa, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].start_s == pa.voiced.start_s);
  CHECK(one[0].end_s == pa.voiced.end_s);
  CHECK_THROWS(segment_words(pa, 0));
}

TEST_CASE("word spans partition the voiced region on synthetic speech") {
  audio::Corpus corpus = audio::synth_corpus(9, 2);
  for (const auto& clip : corpus.clips) {
    PauseAnalysis pa = detect_pauses(clip.wave);
    auto spans = segment_words(pa, 6);
    REQUIRE(spans.size() == 6);
    CHECK(spans.front().start_s == pa.voiced.start_s);
    CHECK(spans.back().end_s == pa.voiced.end_s);
    for (std::size_t k = 1; k < spans.size(); ++k) {
      CHECK(spans[k].start_s == spans[k - 1].end_s);
      CHECK(spans[k].duration() > 0.0);
    }
  }
}

TEST_CASE("synthetic classes are separable by nearest centroid on cues") {
  audio::Corpus corpus = audio::synth_corpus(7, 6);
  std::vector<std::array<double, 6>> cues;
  std::vector<int> labels;
  for (const auto& clip : corpus.clips) {
    cues.push_back(extract_cues(mel_spectrogram(clip.wave), clip.wave, nullptr, 6).values());
    labels.push_back(audio::index_of(clip.meta.emotion));
  }
  std::array<double, 6> mean{}, sd{};
  for (const auto& c : cues)
    for (int j = 0; j < 6; ++j) mean[j] += c[j] / cues.size();
  for (const auto& c : cues)
    for (int j = 0; j < 6; ++j) sd[j] += (c[j] - mean[j]) * (c[j] - mean[j]) / cues.size();
  for (double& s : sd) s = std::sqrt(s) + 1e-12;
  std::array<std::array<double, 6>, 8> centroid{};
  std::array<int, 8> count{};
  for (std::size_t i = 0; i < cues.size(); ++i) {
    ++count[labels[i]];
    for (int j = 0; j < 6; ++j) centroid[labels[i]][j] += (cues[i][j] - mean[j]) / sd[j];
  }
  for (int k = 0; k < 8; ++k)
    for (int j = 0; j < 6; ++j) centroid[k][j] /= count[k];
  int correct = 0;
  for (std::size_t i = 0; i < cues.size(); ++i) {
    int best = 0;
    double best_d = 1e300;
    for (int k = 0; k < 8; ++k) {
      double d = 0.0;
      for (int j = 0; j < 6; ++j) d += std::pow((cues[i][j] - mean[j]) / sd[j] - centroid[k][j], 2);
      if (d < best_d) best_d = d, best = k;
    }
    correct += best == labels[i];
  }
  CHECK(correct == static_cast<int>(cues.size()));
}
