#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rexnet::audio {

inline constexpr int kSampleRate = 16000;
inline constexpr int kClipSamples = 48000;  // 3.0 s
inline constexpr int kNumEmotions = 8;
inline constexpr int kWordsPerStatement = 6;

// Ordered by RAVDESS emotion code (01..08).
enum class Emotion : int {
  Neutral = 0,
  Calm,
  Happy,
  Sad,
  Angry,
  Fearful,
  Disgust,
  Surprised,
};

enum class Intensity : int { Normal = 0, Strong = 1 };

std::string_view emotion_name(Emotion e);
std::optional<Emotion> emotion_from_name(std::string_view name);
inline int index_of(Emotion e) { return static_cast<int>(e); }
inline Emotion emotion_at(int index) { return static_cast<Emotion>(index); }

struct ClipMeta {
  std::string clip_id;
  int actor = 1;  // 1..24
  Emotion emotion = Emotion::Neutral;
  Intensity intensity = Intensity::Normal;
  int statement = 1;  // 1: "kids are talking by the door", 2: "dogs are sitting by the door"
  int repetition = 1;
  int word_count = kWordsPerStatement;
  std::string source_path;  // empty for generated clips
};

std::string_view statement_text(int statement);

struct Waveform {
  std::vector<double> samples;  // exactly kClipSamples after standardization
  int sample_rate = kSampleRate;
};

enum class Split { Train, Test };

struct Clip {
  ClipMeta meta;
  Waveform wave;
};

struct Corpus {
  std::vector<Clip> clips;
  std::map<std::string, Split> split;

  std::vector<std::size_t> indices(Split s) const;
  const Clip* find(std::string_view clip_id) const;
  std::size_t index_of(std::string_view clip_id) const;  // throws if absent
};

// Raw decoded audio prior to standardization.
struct RawAudio {
  std::vector<double> samples;  // first channel
  int sample_rate = 0;
  int channels = 0;
};

RawAudio read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const Waveform& wave);

// Parses `MM-VC-EE-II-SS-RR-AA.wav`. Returns nullopt for malformed names.
// Fields are returned even for non-speech modalities; filtering is the
// caller's job (see is_audio_speech).
struct RavdessName {
  int modality = 0;
  int vocal_channel = 0;
  ClipMeta meta;
};
std::optional<RavdessName> parse_ravdess_name(std::string_view filename);
bool is_audio_speech(const RavdessName& name);

// Resamples by linear interpolation, then pads symmetrically or
// center-crops to exactly 3.0 s at 16 kHz.
Waveform standardize(const std::vector<double>& raw, int raw_rate);
std::vector<double> resample_linear(const std::vector<double>& raw, int from_rate, int to_rate);

// Stratified (by emotion) 80/20 split, deterministic for a given seed.
std::map<std::string, Split> stratified_split(const std::vector<Clip>& clips, std::uint64_t seed,
                                              double train_fraction = 0.8);

struct IngestReport {
  std::size_t loaded = 0;
  std::size_t skipped_modality = 0;
  std::size_t malformed_names = 0;
  std::size_t unreadable = 0;
};

Corpus ingest_ravdess(const std::filesystem::path& root, std::uint64_t seed,
                      IngestReport* report = nullptr);

// Cue profile each synthetic class is generated from.
struct SynthProfile {
  double carrier_hz;
  double amplitude;
  double pause_fraction;
  double voiced_seconds;
  double vibrato_hz;    // peak deviation of the pitch glide
  double harmonic_decay;  // amplitude ratio between successive harmonics
};
SynthProfile synth_profile(int emotion_index);

Corpus synth_corpus(std::uint64_t seed, int n_per_class);

}  // namespace rexnet::audio
