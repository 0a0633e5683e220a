#include "rexnet/audio_io.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>

#include "rexnet/error.hpp"
#include "rexnet/tensor.hpp"

namespace rexnet::audio {

namespace {

constexpr std::array<std::string_view, kNumEmotions> kEmotionNames = {
    "neutral", "calm", "happy", "sad", "angry", "fearful", "disgust", "surprised"};

template <typename T>
T read_le(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IngestError("truncated wav header");
  return v;
}

template <typename T>
void write_le(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

std::string_view emotion_name(Emotion e) { return kEmotionNames.at(static_cast<std::size_t>(e)); }

std::optional<Emotion> emotion_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kEmotionNames.size(); ++i)
    if (kEmotionNames[i] == name) return static_cast<Emotion>(i);
  return std::nullopt;
}

std::string_view statement_text(int statement) {
  return statement == 1 ? "kids are talking by the door" : "dogs are sitting by the door";
}

std::vector<std::size_t> Corpus::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    auto it = split.find(clips[i].meta.clip_id);
    if (it != split.end() && it->second == s) out.push_back(i);
  }
  return out;
}

const Clip* Corpus::find(std::string_view clip_id) const {
  for (const auto& c : clips)
    if (c.meta.clip_id == clip_id) return &c;
  return nullptr;
}

std::size_t Corpus::index_of(std::string_view clip_id) const {
  for (std::size_t i = 0; i < clips.size(); ++i)
    if (clips[i].meta.clip_id == clip_id) return i;
  throw Error("unknown clip id: " + std::string(clip_id));
}

RawAudio read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open " + path.string());
  char tag[4];
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "RIFF", 4) != 0) throw IngestError("not a RIFF file: " + path.string());
  read_le<std::uint32_t>(in);
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "WAVE", 4) != 0) throw IngestError("not a WAVE file: " + path.string());

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  while (in.read(tag, 4)) {
    const auto size = read_le<std::uint32_t>(in);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      format = read_le<std::uint16_t>(in);
      channels = read_le<std::uint16_t>(in);
      rate = read_le<std::uint32_t>(in);
      read_le<std::uint32_t>(in);  // byte rate
      read_le<std::uint16_t>(in);  // block align
      bits = read_le<std::uint16_t>(in);
      if (size > 16) in.seekg(size - 16, std::ios::cur);
      // WAVE_FORMAT_EXTENSIBLE carries the real format in its sub-format GUID;
      // the first two bytes of the GUID match the plain codes.
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt) throw IngestError("data chunk before fmt chunk: " + path.string());
      if (channels == 0) throw IngestError("zero channels: " + path.string());
      RawAudio out;
      out.sample_rate = static_cast<int>(rate);
      out.channels = channels;
      std::vector<char> bytes(size);
      in.read(bytes.data(), size);
      const std::size_t got = static_cast<std::size_t>(in.gcount());
      const bool is_float = format == 3 || (format == 0xFFFE && bits == 32);
      if (bits == 16 && !is_float) {
        const std::size_t frames = got / (2u * channels);
        out.samples.resize(frames);
        for (std::size_t i = 0; i < frames; ++i) {
          std::int16_t v;
          std::memcpy(&v, bytes.data() + i * 2u * channels, 2);
          out.samples[i] = static_cast<double>(v) / 32768.0;
        }
      } else if (bits == 32 && is_float) {
        const std::size_t frames = got / (4u * channels);
        out.samples.resize(frames);
        for (std::size_t i = 0; i < frames; ++i) {
          float v;
          std::memcpy(&v, bytes.data() + i * 4u * channels, 4);
          out.samples[i] = static_cast<double>(v);
        }
      } else {
        throw IngestError("unsupported wav encoding (" + std::to_string(bits) + " bit, format " +
                          std::to_string(format) + "): " + path.string());
      }
      return out;
    } else {
      in.seekg(size + (size & 1u), std::ios::cur);
    }
  }
  throw IngestError("no data chunk: " + path.string());
}

void write_wav(const std::filesystem::path& path, const Waveform& wave) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  const auto n = static_cast<std::uint32_t>(wave.samples.size());
  out.write("RIFF", 4);
  write_le<std::uint32_t>(out, 36 + n * 2);
  out.write("WAVEfmt ", 8);
  write_le<std::uint32_t>(out, 16);
  write_le<std::uint16_t>(out, 1);
  write_le<std::uint16_t>(out, 1);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(wave.sample_rate));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(wave.sample_rate) * 2);
  write_le<std::uint16_t>(out, 2);
  write_le<std::uint16_t>(out, 16);
  out.write("data", 4);
  write_le<std::uint32_t>(out, n * 2);
  for (double s : wave.samples) {
    const double c = std::clamp(s, -1.0, 1.0);
    write_le<std::int16_t>(out, static_cast<std::int16_t>(std::lround(c * 32767.0)));
  }
}

std::optional<RavdessName> parse_ravdess_name(std::string_view filename) {
  if (auto slash = filename.find_last_of("/\\"); slash != std::string_view::npos)
    filename.remove_prefix(slash + 1);
  if (filename.size() != 24 || filename.substr(20) != ".wav") return std::nullopt;
  std::array<int, 7> f{};
  for (int k = 0; k < 7; ++k) {
    const std::size_t pos = static_cast<std::size_t>(k) * 3;
    const char a = filename[pos], b = filename[pos + 1];
    if (a < '0' || a > '9' || b < '0' || b > '9') return std::nullopt;
    if (k < 6 && filename[pos + 2] != '-') return std::nullopt;
    f[static_cast<std::size_t>(k)] = (a - '0') * 10 + (b - '0');
  }
  const int emotion = f[2], intensity = f[3], statement = f[4], repetition = f[5], actor = f[6];
  if (emotion < 1 || emotion > 8 || intensity < 1 || intensity > 2 || statement < 1 ||
      statement > 2 || repetition < 1 || repetition > 2 || actor < 1 || actor > 24)
    return std::nullopt;
  RavdessName n;
  n.modality = f[0];
  n.vocal_channel = f[1];
  n.meta.clip_id = std::string(filename.substr(0, 20));
  n.meta.actor = actor;
  n.meta.emotion = static_cast<Emotion>(emotion - 1);
  n.meta.intensity = intensity == 2 ? Intensity::Strong : Intensity::Normal;
  n.meta.statement = statement;
  n.meta.repetition = repetition;
  n.meta.word_count = kWordsPerStatement;
  return n;
}

bool is_audio_speech(const RavdessName& name) { return name.modality == 3 && name.vocal_channel == 1; }

std::vector<double> resample_linear(const std::vector<double>& raw, int from_rate, int to_rate) {
  if (from_rate == to_rate || raw.empty()) return raw;
  const std::size_t n_out = static_cast<std::size_t>(
      std::llround(static_cast<double>(raw.size()) * to_rate / static_cast<double>(from_rate)));
  std::vector<double> out(n_out);
  const double step = static_cast<double>(from_rate) / to_rate;
  for (std::size_t i = 0; i < n_out; ++i) {
    const double pos = static_cast<double>(i) * step;
    const auto i0 = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i0);
    const double a = raw[std::min(i0, raw.size() - 1)];
    const double b = raw[std::min(i0 + 1, raw.size() - 1)];
    out[i] = a + (b - a) * frac;
  }
  return out;
}

Waveform standardize(const std::vector<double>& raw, int raw_rate) {
  if (raw.empty()) throw IngestError("standardize: empty waveform");
  if (raw_rate <= 0) throw IngestError("standardize: invalid sample rate");
  std::vector<double> x = resample_linear(raw, raw_rate, kSampleRate);
  Waveform w;
  w.samples.assign(kClipSamples, 0.0);
  if (x.size() <= static_cast<std::size_t>(kClipSamples)) {
    const std::size_t lead = (kClipSamples - x.size()) / 2;
    std::copy(x.begin(), x.end(), w.samples.begin() + static_cast<std::ptrdiff_t>(lead));
  } else {
    const std::size_t start = (x.size() - kClipSamples) / 2;
    std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(start), kClipSamples, w.samples.begin());
  }
  for (double& s : w.samples) s = std::isfinite(s) ? std::clamp(s, -1.0, 1.0) : 0.0;
  return w;
}

std::map<std::string, Split> stratified_split(const std::vector<Clip>& clips, std::uint64_t seed,
                                              double train_fraction) {
  std::map<std::string, Split> out;
  nn::Rng rng(seed * 7919 + 17);
  for (int e = 0; e < kNumEmotions; ++e) {
    std::vector<std::string> ids;
    for (const auto& c : clips)
      if (index_of(c.meta.emotion) == e) ids.push_back(c.meta.clip_id);
    std::sort(ids.begin(), ids.end());
    rng.shuffle(ids);
    const auto n_train =
        static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(ids.size())));
    for (std::size_t i = 0; i < ids.size(); ++i) out[ids[i]] = i < n_train ? Split::Train : Split::Test;
  }
  return out;
}

Corpus ingest_ravdess(const std::filesystem::path& root, std::uint64_t seed, IngestReport* report) {
  IngestReport local;
  IngestReport& rep = report ? *report : local;
  if (!std::filesystem::is_directory(root))
    throw IngestError("dataset directory does not exist: " + root.string());

  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root))
    if (entry.is_regular_file() && entry.path().extension() == ".wav") files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  Corpus corpus;
  std::set<std::string> seen;
  for (const auto& path : files) {
    auto name = parse_ravdess_name(path.filename().string());
    if (!name) {
      ++rep.malformed_names;
      spdlog::warn("skipping malformed filename {}", path.string());
      continue;
    }
    if (!is_audio_speech(*name)) {
      ++rep.skipped_modality;
      continue;
    }
    if (!seen.insert(name->meta.clip_id).second) continue;
    try {
      RawAudio raw = read_wav(path);
      Clip clip{name->meta, standardize(raw.samples, raw.sample_rate)};
      clip.meta.source_path = path.string();
      corpus.clips.push_back(std::move(clip));
      ++rep.loaded;
    } catch (const IngestError& e) {
      ++rep.unreadable;
      spdlog::warn("skipping unreadable file: {}", e.what());
    }
  }
  if (corpus.clips.empty())
    throw IngestError("no parseable RAVDESS speech files under " + root.string());
  if (rep.unreadable + rep.malformed_names > 0)
    spdlog::warn("ingestion skipped {} unreadable and {} malformed files", rep.unreadable,
                 rep.malformed_names);
  corpus.split = stratified_split(corpus.clips, seed);
  return corpus;
}

SynthProfile synth_profile(int k) {
  return SynthProfile{
      .carrier_hz = 120.0 + 30.0 * k,
      .amplitude = 0.2 + 0.1 * k,
      .pause_fraction = k / 16.0,
      .voiced_seconds = 2.6 - 0.08 * k,
      .vibrato_hz = 4.0 + 4.0 * k,
      .harmonic_decay = 0.25 + 0.08 * k,
  };
}

namespace {

// Harmonic stack is RMS-normalized, so the clip RMS is about kLevel * amplitude / sqrt(2).
constexpr double kLevel = 0.35;

constexpr std::array<std::array<double, 6>, 2> kWordWeights = {{
    {0.9, 1.0, 1.2, 0.8, 1.0, 1.1},
    {1.1, 0.9, 1.0, 1.2, 0.8, 1.0},
}};

std::vector<double> render_synth_clip(const SynthProfile& p, int actor, int statement,
                                      Intensity intensity, nn::Rng& rng) {
  const double fs = kSampleRate;
  const double pitch_jitter = 1.0 + rng.uniform(-0.02, 0.02);
  const double amp = p.amplitude * (intensity == Intensity::Strong ? 1.1 : 1.0) *
                     (1.0 + rng.uniform(-0.04, 0.0));
  const double voiced = p.voiced_seconds * (1.0 + rng.uniform(-0.02, 0.02));
  const double f0 = p.carrier_hz * pitch_jitter + (actor - 2.5) * 3.0;
  const double onset = (3.0 - voiced) / 2.0 + rng.uniform(-0.05, 0.05);

  const auto& weights = kWordWeights[static_cast<std::size_t>(statement - 1)];
  const double weight_sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  const double speech_time = voiced * (1.0 - p.pause_fraction);
  const double gap = voiced * p.pause_fraction / 5.0;

  // Per-actor timbre: one boosted harmonic.
  const int formant_harmonic = 3 + (actor - 1) % 4;
  double harmonic_norm = 0.0;
  std::vector<double> harmonic_amp;
  for (int h = 1; h * (f0 + p.vibrato_hz) < 7500.0 && h <= 16; ++h) {
    double a = std::pow(p.harmonic_decay, h - 1);
    if (h == formant_harmonic) a *= 1.5;
    harmonic_amp.push_back(a);
    harmonic_norm += a * a;
  }

  harmonic_norm = std::sqrt(harmonic_norm);

  std::vector<double> out(kClipSamples, 0.0);
  const double ramp = 0.025;
  double t_word = onset;
  for (int w = 0; w < 6; ++w) {
    const double dur = speech_time * weights[static_cast<std::size_t>(w)] / weight_sum;
    const double word_f0 = f0 * (1.0 + 0.03 * (weights[static_cast<std::size_t>(w)] - 1.0) * 5.0);
    const auto s0 = static_cast<long>(std::lround(t_word * fs));
    const auto s1 = static_cast<long>(std::lround((t_word + dur) * fs));
    std::vector<double> phase(harmonic_amp.size(), rng.uniform(0.0, 2.0 * M_PI));
    for (long s = std::max(0L, s0); s < std::min<long>(kClipSamples, s1); ++s) {
      const double t = static_cast<double>(s - s0) / fs;
      const double inst = word_f0 + p.vibrato_hz * std::sin(2.0 * M_PI * 4.0 * t);
      double env = 1.0;
      if (t < ramp) env = 0.5 - 0.5 * std::cos(M_PI * t / ramp);
      if (dur - t < ramp) env = std::min(env, 0.5 - 0.5 * std::cos(M_PI * (dur - t) / ramp));
      double v = 0.0;
      for (std::size_t h = 0; h < harmonic_amp.size(); ++h) {
        phase[h] += 2.0 * M_PI * inst * static_cast<double>(h + 1) / fs;
        v += harmonic_amp[h] * std::sin(phase[h]);
      }
      out[static_cast<std::size_t>(s)] = kLevel * amp * env * v / harmonic_norm;
    }
    t_word += dur + gap;
  }
  for (double& s : out) s = std::clamp(s + 0.001 * rng.normal(), -1.0, 1.0);
  return out;
}

}  // namespace

Corpus synth_corpus(std::uint64_t seed, int n_per_class) {
  if (n_per_class < 2) throw Error("synth_corpus: n_per_class must be at least 2");
  Corpus corpus;
  for (int k = 0; k < kNumEmotions; ++k) {
    const SynthProfile profile = synth_profile(k);
    for (int i = 0; i < n_per_class; ++i) {
      ClipMeta m;
      m.actor = i % 4 + 1;
      m.statement = (i / 4) % 2 + 1;
      m.repetition = (i / 8) % 2 + 1;
      m.intensity = (k != 0 && (i / 16) % 2 == 1) ? Intensity::Strong : Intensity::Normal;
      m.emotion = emotion_at(k);
      m.word_count = kWordsPerStatement;
      char id[64];
      std::snprintf(id, sizeof id, "syn-%02d-%02d-%02d-%02d-%02d-%03d", k + 1,
                    static_cast<int>(m.intensity) + 1, m.statement, m.repetition, m.actor, i);
      m.clip_id = id;
      nn::Rng rng(seed * 1000003ULL + static_cast<std::uint64_t>(k) * 4099ULL +
                  static_cast<std::uint64_t>(i));
      Waveform w;
      w.samples = render_synth_clip(profile, m.actor, m.statement, m.intensity, rng);
      corpus.clips.push_back({std::move(m), std::move(w)});
    }
  }
  corpus.split = stratified_split(corpus.clips, seed);
  return corpus;
}

}  // namespace rexnet::audio
