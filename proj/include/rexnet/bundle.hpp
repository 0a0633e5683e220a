#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rexnet/pipeline.hpp"

namespace rexnet::bundle {

inline constexpr int kSchemaVersion = 1;

using CueValues = std::array<double, relations::kCues>;

struct Word {
  std::string text;
  double start_s = 0.0;
  double end_s = 0.0;
};

struct ContrastEntry {
  std::string emotion;
  bool available = true;
  std::string unavailable_reason;  // set when unavailable
  std::string counterfactual_clip_id;
  std::string counterfactual_audio;  // relative path; empty when unavailable
  std::string synthetic_image;       // relative path; empty without a generator
  std::optional<CueValues> target_cues;
  std::optional<CueValues> counterfactual_cues;
  CueValues cue_differences{};
  CueValues cue_importance{};
  std::array<std::string, relations::kCues> relations;
  std::vector<double> saliency;  // one value per spectrogram frame
  std::vector<double> word_saliency;
};

struct ExplanationBundle {
  int schema_version = kSchemaVersion;
  std::string clip_id;
  int actor = 0;
  std::string emotion;  // ground-truth label
  std::string intensity;
  int statement = 1;
  std::string statement_text;
  int repetition = 1;
  std::string audio;  // relative path
  std::string initial_prediction;
  std::string final_prediction;
  std::vector<double> initial_probs;  // emotion order
  std::vector<double> final_probs;
  std::vector<Word> words;
  std::vector<double> saliency;  // total contrastive, per frame
  std::vector<ContrastEntry> contrasts;

  nlohmann::json to_json() const;
  static ExplanationBundle from_json(const nlohmann::json& j);
};

// Canonical text form: two-space indent, trailing newline.
std::string serialize(const ExplanationBundle& b);

// Contrast emotions from a comma list or "all". Throws Error on unknown
// names and on a request that includes the predicted emotion.
std::vector<int> parse_contrasts(const std::string& spec, int predicted);

// Writes bundles/<id>.json, the WAV copies and spectrogram images under
// root, then regenerates index.json. Returns the bundle as written.
ExplanationBundle write_bundle(const pipeline::ClipExplanation& ex, const pipeline::Prepared& data,
                               const std::vector<int>& contrasts, const std::filesystem::path& root);

// Scans bundles/*.json and rewrites index.json in clip id order.
nlohmann::json write_index(const std::filesystem::path& root);

// 24-bit BMP, low bins at the bottom, values min-max scaled to gray.
void write_spectrogram_bmp(const std::filesystem::path& path, const nn::Tensor& spec);

}  // namespace rexnet::bundle
