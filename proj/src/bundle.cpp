#include "rexnet/bundle.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "rexnet/error.hpp"

namespace rexnet::bundle {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string name_of(int emotion) { return std::string(audio::emotion_name(audio::emotion_at(emotion))); }

json cue_object(const CueValues& v) {
  json j = json::object();
  for (int c = 0; c < relations::kCues; ++c) j[std::string(dsp::kCueNames[c])] = v[c];
  return j;
}

CueValues cue_values(const json& j) {
  CueValues v{};
  for (int c = 0; c < relations::kCues; ++c) v[c] = j.at(std::string(dsp::kCueNames[c])).get<double>();
  return v;
}

json optional_cues(const std::optional<CueValues>& v) { return v ? cue_object(*v) : json(nullptr); }

std::optional<CueValues> read_optional_cues(const json& j) {
  if (j.is_null()) return std::nullopt;
  return cue_values(j);
}

json probs_object(const std::vector<double>& p) {
  json j = json::object();
  for (std::size_t e = 0; e < p.size(); ++e) j[name_of(static_cast<int>(e))] = p[e];
  return j;
}

std::vector<double> read_probs(const json& j) {
  std::vector<double> p(static_cast<std::size_t>(audio::kNumEmotions));
  for (int e = 0; e < audio::kNumEmotions; ++e) p[e] = j.at(name_of(e)).get<double>();
  return p;
}

json path_or_null(const std::string& p) { return p.empty() ? json(nullptr) : json(p); }
std::string read_path(const json& j) { return j.is_null() ? std::string() : j.get<std::string>(); }

std::vector<std::string> statement_words(int statement) {
  std::istringstream in{std::string(audio::statement_text(statement))};
  std::vector<std::string> words;
  for (std::string w; in >> w;) words.push_back(w);
  return words;
}

CueValues as_values(const dsp::CueVector& c) { return c.values(); }

std::string audio_path(const std::string& clip_id) { return "audio/" + clip_id + ".wav"; }

}  // namespace

json ExplanationBundle::to_json() const {
  json words_j = json::array();
  for (const auto& w : words) words_j.push_back({{"text", w.text}, {"start_s", w.start_s}, {"end_s", w.end_s}});
  json contrasts_j = json::array();
  for (const auto& c : contrasts) {
    json rel = json::object();
    for (int k = 0; k < relations::kCues; ++k) rel[std::string(dsp::kCueNames[k])] = c.relations[k];
    contrasts_j.push_back({
        {"emotion", c.emotion},
        {"available", c.available},
        {"unavailable_reason", c.available ? json(nullptr) : json(c.unavailable_reason)},
        {"counterfactual_clip_id", path_or_null(c.counterfactual_clip_id)},
        {"counterfactual_audio", path_or_null(c.counterfactual_audio)},
        {"synthetic_image", path_or_null(c.synthetic_image)},
        {"cues", {{"target", optional_cues(c.target_cues)},
                  {"counterfactual", optional_cues(c.counterfactual_cues)}}},
        {"cue_differences", cue_object(c.cue_differences)},
        {"cue_importance", cue_object(c.cue_importance)},
        {"relations", rel},
        {"saliency", c.saliency},
        {"word_saliency", c.word_saliency},
    });
  }
  return {
      {"schema_version", schema_version},
      {"clip",
       {{"clip_id", clip_id},
        {"actor", actor},
        {"emotion", emotion},
        {"intensity", intensity},
        {"statement", statement},
        {"statement_text", statement_text},
        {"repetition", repetition},
        {"audio", audio}}},
      {"prediction",
       {{"initial", initial_prediction},
        {"final", final_prediction},
        {"initial_probs", probs_object(initial_probs)},
        {"final_probs", probs_object(final_probs)}}},
      {"words", words_j},
      {"saliency",
       {{"frames", saliency.size()},
        {"hop_seconds", static_cast<double>(dsp::kHop) / audio::kSampleRate},
        {"window_seconds", static_cast<double>(dsp::kWindow) / audio::kSampleRate},
        {"total", saliency}}},
      {"contrasts", contrasts_j},
  };
}

ExplanationBundle ExplanationBundle::from_json(const json& j) {
  ExplanationBundle b;
  try {
    b.schema_version = j.at("schema_version").get<int>();
    if (b.schema_version != kSchemaVersion)
      throw Error("unsupported bundle schema_version " + std::to_string(b.schema_version));
    const auto& clip = j.at("clip");
    b.clip_id = clip.at("clip_id").get<std::string>();
    b.actor = clip.at("actor").get<int>();
    b.emotion = clip.at("emotion").get<std::string>();
    b.intensity = clip.at("intensity").get<std::string>();
    b.statement = clip.at("statement").get<int>();
    b.statement_text = clip.at("statement_text").get<std::string>();
    b.repetition = clip.at("repetition").get<int>();
    b.audio = clip.at("audio").get<std::string>();
    const auto& pred = j.at("prediction");
    b.initial_prediction = pred.at("initial").get<std::string>();
    b.final_prediction = pred.at("final").get<std::string>();
    b.initial_probs = read_probs(pred.at("initial_probs"));
    b.final_probs = read_probs(pred.at("final_probs"));
    for (const auto& w : j.at("words"))
      b.words.push_back({w.at("text").get<std::string>(), w.at("start_s").get<double>(),
                         w.at("end_s").get<double>()});
    b.saliency = j.at("saliency").at("total").get<std::vector<double>>();
    for (const auto& c : j.at("contrasts")) {
      ContrastEntry e;
      e.emotion = c.at("emotion").get<std::string>();
      e.available = c.at("available").get<bool>();
      if (!e.available) e.unavailable_reason = c.at("unavailable_reason").get<std::string>();
      e.counterfactual_clip_id = read_path(c.at("counterfactual_clip_id"));
      e.counterfactual_audio = read_path(c.at("counterfactual_audio"));
      e.synthetic_image = read_path(c.at("synthetic_image"));
      e.target_cues = read_optional_cues(c.at("cues").at("target"));
      e.counterfactual_cues = read_optional_cues(c.at("cues").at("counterfactual"));
      e.cue_differences = cue_values(c.at("cue_differences"));
      e.cue_importance = cue_values(c.at("cue_importance"));
      for (int k = 0; k < relations::kCues; ++k)
        e.relations[k] = c.at("relations").at(std::string(dsp::kCueNames[k])).get<std::string>();
      e.saliency = c.at("saliency").get<std::vector<double>>();
      e.word_saliency = c.at("word_saliency").get<std::vector<double>>();
      b.contrasts.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw Error(std::string("malformed bundle: ") + e.what());
  }
  return b;
}

std::string serialize(const ExplanationBundle& b) { return b.to_json().dump(2) + "\n"; }

std::vector<int> parse_contrasts(const std::string& spec, int predicted) {
  std::vector<int> out;
  if (spec == "all") {
    for (int g = 0; g < audio::kNumEmotions; ++g)
      if (g != predicted) out.push_back(g);
    return out;
  }
  std::istringstream in(spec);
  for (std::string name; std::getline(in, name, ',');) {
    name.erase(0, name.find_first_not_of(' '));
    name.erase(name.find_last_not_of(' ') + 1);
    const auto e = audio::emotion_from_name(name);
    if (!e) throw Error("unknown contrast emotion '" + name + "'");
    const int g = audio::index_of(*e);
    if (g == predicted)
      throw Error("contrast '" + name + "' is the predicted emotion; pick a different emotion");
    if (std::find(out.begin(), out.end(), g) == out.end()) out.push_back(g);
  }
  if (out.empty()) throw Error("no contrast emotions requested");
  std::sort(out.begin(), out.end());
  return out;
}

ExplanationBundle write_bundle(const pipeline::ClipExplanation& ex, const pipeline::Prepared& data,
                               const std::vector<int>& contrasts, const fs::path& root) {
  const auto& meta = data.corpus.clips[ex.clip].meta;
  fs::create_directories(root / "bundles");
  fs::create_directories(root / "audio");

  ExplanationBundle b;
  b.clip_id = meta.clip_id;
  b.actor = meta.actor;
  b.emotion = std::string(audio::emotion_name(meta.emotion));
  b.intensity = meta.intensity == audio::Intensity::Strong ? "strong" : "normal";
  b.statement = meta.statement;
  b.statement_text = std::string(audio::statement_text(meta.statement));
  b.repetition = meta.repetition;
  b.audio = audio_path(meta.clip_id);
  audio::write_wav(root / b.audio, data.corpus.clips[ex.clip].wave);
  b.initial_prediction = name_of(ex.heads.initial);
  b.final_prediction = name_of(ex.heads.final_class);
  b.initial_probs = ex.heads.initial_probs;
  b.final_probs = ex.heads.final_probs;
  const auto texts = statement_words(meta.statement);
  for (std::size_t w = 0; w < ex.words.size(); ++w)
    b.words.push_back({w < texts.size() ? texts[w] : "word" + std::to_string(w + 1),
                       ex.words[w].start_s, ex.words[w].end_s});
  b.saliency = ex.total_bar.per_frame;

  for (const auto& d : ex.contrasts) {
    if (std::find(contrasts.begin(), contrasts.end(), d.contrast) == contrasts.end()) continue;
    ContrastEntry e;
    e.emotion = name_of(d.contrast);
    e.available = d.sample.has_value();
    if (d.sample) {
      const auto& sample = data.corpus.clips[*d.sample];
      e.counterfactual_clip_id = sample.meta.clip_id;
      e.counterfactual_audio = audio_path(sample.meta.clip_id);
      audio::write_wav(root / e.counterfactual_audio, sample.wave);
    } else {
      e.unavailable_reason = d.unavailable_reason.empty() ? "no counterfactual sample" : d.unavailable_reason;
    }
    if (d.synthetic) {
      fs::create_directories(root / "images");
      e.synthetic_image = "images/" + meta.clip_id + "_" + e.emotion + ".bmp";
      write_spectrogram_bmp(root / e.synthetic_image, *d.synthetic);
    }
    if (d.target_cues) e.target_cues = as_values(*d.target_cues);
    if (d.cf_cues) e.counterfactual_cues = as_values(*d.cf_cues);
    e.cue_differences = d.heads.differences;
    e.cue_importance = d.heads.attributions;
    for (int k = 0; k < relations::kCues; ++k)
      e.relations[k] = std::string(relations::relation_name(d.heads.relations[k]));
    e.saliency = d.bar.per_frame;
    for (const auto& w : d.bar.words) e.word_saliency.push_back(w.mean_saliency);
    b.contrasts.push_back(std::move(e));
  }

  std::ofstream out(root / "bundles" / (meta.clip_id + ".json"), std::ios::binary);
  if (!out) throw Error("cannot write bundle for " + meta.clip_id);
  out << serialize(b);
  out.close();
  write_index(root);
  return b;
}

json write_index(const fs::path& root) {
  std::vector<fs::path> files;
  if (fs::is_directory(root / "bundles"))
    for (const auto& entry : fs::directory_iterator(root / "bundles"))
      if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  json clips = json::array();
  for (const auto& f : files) {
    std::ifstream in(f);
    const json j = json::parse(in);
    clips.push_back({{"clip_id", j.at("clip").at("clip_id")},
                     {"emotion", j.at("clip").at("emotion")},
                     {"predicted", j.at("prediction").at("initial")},
                     {"final", j.at("prediction").at("final")},
                     {"bundle", "bundles/" + f.filename().string()}});
  }
  json index = {{"schema_version", kSchemaVersion}, {"clips", clips}};
  std::ofstream out(root / "index.json", std::ios::binary);
  if (!out) throw Error("cannot write " + (root / "index.json").string());
  out << index.dump(2) << "\n";
  return index;
}

void write_spectrogram_bmp(const fs::path& path, const nn::Tensor& spec) {
  if (spec.rank() != 3) throw ShapeError("write_spectrogram_bmp: expected (1, bins, frames)");
  const int H = spec.dim(1), W = spec.dim(2);
  const auto [lo_it, hi_it] = std::minmax_element(spec.data.begin(), spec.data.end());
  const double lo = *lo_it, range = *hi_it - *lo_it;
  const int row_bytes = (3 * W + 3) & ~3;
  const std::uint32_t image_bytes = static_cast<std::uint32_t>(row_bytes) * H;

  std::vector<unsigned char> buf(54 + image_bytes, 0);
  auto put32 = [&](std::size_t at, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf[at + i] = static_cast<unsigned char>(v >> (8 * i));
  };
  buf[0] = 'B';
  buf[1] = 'M';
  put32(2, static_cast<std::uint32_t>(buf.size()));
  put32(10, 54);
  put32(14, 40);
  put32(18, static_cast<std::uint32_t>(W));
  put32(22, static_cast<std::uint32_t>(H));
  buf[26] = 1;
  buf[28] = 24;
  put32(34, image_bytes);
  // BMP rows run bottom-up, which puts bin 0 at the bottom.
  for (int h = 0; h < H; ++h) {
    unsigned char* row = buf.data() + 54 + static_cast<std::size_t>(h) * row_bytes;
    for (int w = 0; w < W; ++w) {
      const double v = range > 0.0 ? (spec.at(0, h, w) - lo) / range : 0.0;
      const auto g = static_cast<unsigned char>(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5);
      row[3 * w] = row[3 * w + 1] = row[3 * w + 2] = g;
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

}  // namespace rexnet::bundle
