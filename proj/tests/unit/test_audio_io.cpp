#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <unistd.h>

#include "rexnet/audio_io.hpp"
#include "rexnet/error.hpp"

using namespace rexnet;
using namespace rexnet::audio;
namespace fs = std::filesystem;

namespace {

std::vector<double> tone(double hz, int n, int rate, double amp = 0.5) {
  std::vector<double> x(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) x[i] = amp * std::sin(2.0 * M_PI * hz * i / rate);
  return x;
}

// Frequency from upward zero crossings; independent of any resampling code.
double zero_crossing_hz(const std::vector<double>& x, std::size_t begin, std::size_t end, int rate) {
  std::vector<double> crossings;
  for (std::size_t i = begin + 1; i < end; ++i)
    if (x[i - 1] < 0.0 && x[i] >= 0.0)
      crossings.push_back(static_cast<double>(i - 1) + (-x[i - 1]) / (x[i] - x[i - 1]));
  REQUIRE(crossings.size() > 2);
  const double periods = static_cast<double>(crossings.size() - 1);
  return rate * periods / (crossings.back() - crossings.front());
}

fs::path temp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("rexnet_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_float_wav(const fs::path& path, const std::vector<double>& x, int rate, int channels) {
  std::ofstream out(path, std::ios::binary);
  auto u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
  auto u16 = [&](std::uint16_t v) { out.write(reinterpret_cast<const char*>(&v), 2); };
  const auto bytes = static_cast<std::uint32_t>(x.size() * 4 * channels);
  out.write("RIFF", 4);
  u32(36 + bytes);
  out.write("WAVEfmt ", 8);
  u32(16);
  u16(3);
  u16(static_cast<std::uint16_t>(channels));
  u32(static_cast<std::uint32_t>(rate));
  u32(static_cast<std::uint32_t>(rate * 4 * channels));
  u16(static_cast<std::uint16_t>(4 * channels));
  u16(32);
  out.write("data", 4);
  u32(bytes);
  for (double v : x)
    for (int c = 0; c < channels; ++c) {
      float f = c == 0 ? static_cast<float>(v) : 0.25f;
      out.write(reinterpret_cast<const char*>(&f), 4);
    }
}

}  // namespace

TEST_CASE("RAVDESS filename parsing follows dataset emotion codes") {
  auto n = parse_ravdess_name("03-01-05-01-02-01-12.wav");
  REQUIRE(n);
  CHECK(is_audio_speech(*n));
  CHECK(n->meta.emotion == Emotion::Angry);
  CHECK(n->meta.intensity == Intensity::Normal);
  CHECK(n->meta.statement == 2);
  CHECK(n->meta.repetition == 1);
  CHECK(n->meta.actor == 12);
  CHECK(n->meta.word_count == 6);

  auto video = parse_ravdess_name("01-01-05-01-02-01-12.wav");
  REQUIRE(video);
  CHECK_FALSE(is_audio_speech(*video));
  auto song = parse_ravdess_name("03-02-05-01-02-01-12.wav");
  REQUIRE(song);
  CHECK_FALSE(is_audio_speech(*song));

  CHECK_FALSE(parse_ravdess_name("03-01-09-01-02-01-12.wav"));
  CHECK_FALSE(parse_ravdess_name("03-01-05-01-02-01-25.wav"));
  CHECK_FALSE(parse_ravdess_name("03-01-05-01-02-01.wav"));
  CHECK_FALSE(parse_ravdess_name("notes.wav"));

  for (int code = 1; code <= 8; ++code) {
    char name[32];
    std::snprintf(name, sizeof name, "03-01-%02d-01-01-01-01.wav", code);
    CHECK(index_of(parse_ravdess_name(name)->meta.emotion) == code - 1);
  }
  CHECK(emotion_name(Emotion::Surprised) == "surprised");
  CHECK(emotion_from_name("disgust") == Emotion::Disgust);
}

TEST_CASE("standardize pads symmetrically and center-crops") {
  std::vector<double> short_clip(40000, 0.5);
  Waveform w = standardize(short_clip, 16000);
  REQUIRE(w.samples.size() == 48000);
  CHECK(w.samples[3999] == 0.0);
  CHECK(w.samples[4000] == 0.5);
  CHECK(w.samples[43999] == 0.5);
  CHECK(w.samples[44000] == 0.0);

  std::vector<double> long_clip(56000);
  for (std::size_t i = 0; i < long_clip.size(); ++i) long_clip[i] = static_cast<double>(i) / 1e6;
  w = standardize(long_clip, 16000);
  REQUIRE(w.samples.size() == 48000);
  CHECK(w.samples.front() == doctest::Approx(4000 / 1e6));
  CHECK(w.samples.back() == doctest::Approx(51999 / 1e6));

  std::vector<double> silence(30000, 0.0);
  w = standardize(silence, 16000);
  CHECK(w.samples.size() == 48000);

  CHECK_THROWS_AS(standardize({}, 16000), IngestError);
}

TEST_CASE("upsampling preserves tone frequency within 1%") {
  auto x = tone(440.0, 24000, 8000);
  Waveform w = standardize(x, 8000);
  REQUIRE(w.samples.size() == 48000);
  // 24000 samples @ 8 kHz = 3.0 s, so no padding is needed.
  const double hz = zero_crossing_hz(w.samples, 100, 47900, 16000);
  CHECK(std::abs(hz - 440.0) / 440.0 < 0.01);

  auto y = tone(300.0, 16000, 8000);  // 2 s -> padded
  w = standardize(y, 8000);
  CHECK(w.samples[0] == 0.0);
  CHECK(std::abs(zero_crossing_hz(w.samples, 8200, 39800, 16000) - 300.0) / 300.0 < 0.01);
}

TEST_CASE("wav round trip and first-channel float decoding") {
  fs::path dir = temp_dir("wav");
  Waveform w;
  w.samples = tone(200.0, 48000, 16000, 0.3);
  write_wav(dir / "a.wav", w);
  RawAudio back = read_wav(dir / "a.wav");
  CHECK(back.sample_rate == 16000);
  REQUIRE(back.samples.size() == 48000);
  for (std::size_t i = 0; i < 48000; i += 997) CHECK(back.samples[i] == doctest::Approx(w.samples[i]).epsilon(1e-3));

  write_float_wav(dir / "b.wav", tone(100.0, 1000, 22050), 22050, 2);
  back = read_wav(dir / "b.wav");
  CHECK(back.channels == 2);
  CHECK(back.sample_rate == 22050);
  REQUIRE(back.samples.size() == 1000);
  CHECK(back.samples[10] == doctest::Approx(0.5 * std::sin(2.0 * M_PI * 100.0 * 10 / 22050)).epsilon(1e-6));

  std::ofstream(dir / "junk.wav") << "definitely not audio";
  CHECK_THROWS_AS(read_wav(dir / "junk.wav"), IngestError);
  fs::remove_all(dir);
}

TEST_CASE("ingest_ravdess filters modalities, skips bad files, splits deterministically") {
  fs::path dir = temp_dir("ravdess");
  fs::create_directories(dir / "Actor_01");
  Waveform w;
  w.samples = tone(220.0, 40000, 16000, 0.2);
  int written = 0;
  for (int actor = 1; actor <= 3; ++actor)
    for (int emo = 1; emo <= 8; ++emo)
      for (int rep = 1; rep <= 2; ++rep) {
        char name[32];
        std::snprintf(name, sizeof name, "03-01-%02d-01-01-%02d-%02d.wav", emo, rep, actor);
        write_wav(dir / "Actor_01" / name, w);
        ++written;
      }
  write_wav(dir / "01-01-05-01-02-01-12.wav", w);  // video modality
  write_wav(dir / "readme-take.wav", w);            // malformed name
  std::ofstream(dir / "03-01-05-02-02-02-12.wav") << "broken";

  IngestReport report;
  Corpus c = ingest_ravdess(dir, 3, &report);
  CHECK(report.loaded == static_cast<std::size_t>(written));
  CHECK(report.skipped_modality == 1);
  CHECK(report.malformed_names == 1);
  CHECK(report.unreadable == 1);
  CHECK(c.clips.size() == static_cast<std::size_t>(written));
  for (const auto& clip : c.clips) CHECK(clip.wave.samples.size() == 48000);

  Corpus again = ingest_ravdess(dir, 3, nullptr);
  CHECK(again.split == c.split);
  REQUIRE(again.clips.size() == c.clips.size());
  for (std::size_t i = 0; i < c.clips.size(); ++i) {
    CHECK(again.clips[i].meta.clip_id == c.clips[i].meta.clip_id);
    CHECK(again.clips[i].wave.samples == c.clips[i].wave.samples);
  }

  fs::path empty = temp_dir("ravdess_empty");
  CHECK_THROWS_AS(ingest_ravdess(empty, 1), IngestError);
  fs::remove_all(dir);
  fs::remove_all(empty);
}

TEST_CASE("synthetic corpus is deterministic and follows the generator formula") {
  Corpus a = synth_corpus(7, 4);
  Corpus b = synth_corpus(7, 4);
  REQUIRE(a.clips.size() == 32);
  for (std::size_t i = 0; i < a.clips.size(); ++i) {
    CHECK(a.clips[i].wave.samples.size() == 48000);
    CHECK(a.clips[i].wave.samples == b.clips[i].wave.samples);
    CHECK(a.clips[i].meta.clip_id == b.clips[i].meta.clip_id);
  }
  CHECK(synth_profile(0).carrier_hz == 120.0);
  CHECK(synth_profile(7).carrier_hz == 330.0);
  CHECK(synth_profile(3).amplitude == doctest::Approx(0.5));
  CHECK(synth_profile(4).pause_fraction == doctest::Approx(0.25));

  std::set<int> actors;
  for (const auto& c : a.clips) {
    actors.insert(c.meta.actor);
    if (c.meta.emotion == Emotion::Neutral) CHECK(c.meta.intensity == Intensity::Normal);
  }
  CHECK(actors.size() == 4);
  CHECK(synth_corpus(8, 4).clips[0].wave.samples != a.clips[0].wave.samples);
  CHECK_THROWS(synth_corpus(1, 1));
}

TEST_CASE("split is 80/20 stratified by emotion with no overlap") {
  Corpus c = synth_corpus(11, 10);
  REQUIRE(c.split.size() == c.clips.size());
  auto train = c.indices(Split::Train);
  auto test = c.indices(Split::Test);
  CHECK(train.size() + test.size() == c.clips.size());
  std::array<int, 8> per_class_test{};
  for (auto i : test) ++per_class_test[index_of(c.clips[i].meta.emotion)];
  for (int n : per_class_test) CHECK(n == 2);
  CHECK(synth_corpus(11, 10).split == c.split);
}
