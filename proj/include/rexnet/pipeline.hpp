#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "rexnet/audio_io.hpp"
#include "rexnet/cnn.hpp"
#include "rexnet/counterfactual.hpp"
#include "rexnet/dsp.hpp"
#include "rexnet/evalsuite.hpp"
#include "rexnet/heads.hpp"
#include "rexnet/relations.hpp"
#include "rexnet/saliency.hpp"

namespace rexnet::pipeline {

struct Config {
  Config() { reseed(seed); }

  std::string data_dir;  // RAVDESS root; ignored when synthetic
  bool synthetic = false;
  int synth_per_class = 32;
  std::uint64_t seed = 7;
  bool skip_gan = false;
  double tau = saliency::kDefaultThreshold;
  double k_fraction = 0.2;
  std::vector<double> k_sweep{0.1, 0.2, 0.4};
  nn::TrainHyper base{8, 16, 0.001, 0.9, 0};
  nn::TrainHyper speaker{8, 16, 0.001, 0.9, 0};
  counterfactual::GanHyper gan;
  relations::JointHyper joint;
  relations::DerivationOptions derivation;

  nlohmann::json to_json() const;
  // Keys absent from j keep their defaults; unknown keys are rejected.
  static Config from_json(const nlohmann::json& j, Config base = {});
  // Derives every per-stage seed from the top-level seed.
  void reseed(std::uint64_t s);
};

// Standardized inputs and frame-level cue features for every clip.
struct Prepared {
  audio::Corpus corpus;
  nn::Standardizer norm;
  std::vector<nn::Tensor> inputs;
  std::vector<dsp::ClipFeatures> features;
  std::vector<std::optional<dsp::CueVector>> cues;  // unmasked; empty when unvoiced
  std::vector<int> emotion;
  std::vector<int> speaker;  // index into actors
  std::vector<int> actors;   // sorted actor ids
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;

  nn::Dataset emotion_set(std::span<const std::size_t> clips) const;
  nn::Dataset speaker_set(std::span<const std::size_t> clips) const;
  std::vector<int> speaker_labels(std::span<const std::size_t> clips) const;
};

// Throws Error with guidance when no dataset is configured or found.
audio::Corpus load_corpus(const Config& config);
// Fits the standardizer on the training split unless one is supplied.
Prepared prepare(audio::Corpus corpus, const nn::Standardizer* norm = nullptr);

struct Models {
  nn::CnnModel base_cnn;  // initial-concept model after pretraining alone
  nn::CnnModel initial;   // same model after joint training
  nn::CnnModel speaker;
  nn::Standardizer norm;
  std::vector<int> actors;
  relations::RelationTable table;
  relations::HeadsModel heads;
  std::optional<counterfactual::StarGanBundle> gan;
};

using Progress = std::function<void(const std::string& stage, const nlohmann::json& record)>;

struct TrainOutput {
  Models models;
  nlohmann::json trace;  // per-stage epoch records; no timings
};

TrainOutput train(const Config& config, const Prepared& data, const Progress& progress = {});

inline constexpr const char* kBaseFile = "base.rxn";
inline constexpr const char* kHeadsFile = "heads.rxn";
inline constexpr const char* kGanFile = "stargan.rxn";

void save_checkpoints(Models& models, const Config& config, const std::filesystem::path& dir);

struct Loaded {
  Config config;
  Models models;
};
Loaded load_checkpoints(const std::filesystem::path& dir);

// Index of the real counterfactual clip; nullopt with a reason when none.
std::optional<std::size_t> counterfactual_sample(const Prepared& data, std::size_t clip, int gamma,
                                                 std::string* reason = nullptr);

// Contexts for the heads, computed with a fixed model. The counterfactual
// embedding comes from G(x, g) when a GAN is given, else from the sample.
std::vector<relations::ClipContext> build_contexts(const nn::CnnModel& model, const Prepared& data,
                                                   std::span<const std::size_t> clips,
                                                   const relations::CueDiff& cue_scale,
                                                   const counterfactual::StarGanBundle* gan,
                                                   double tau);

struct ContrastDetail {
  int contrast = 0;
  std::optional<std::size_t> sample;
  std::string unavailable_reason;
  std::optional<dsp::CueVector> target_cues;
  std::optional<dsp::CueVector> cf_cues;
  saliency::SaliencyBar bar;
  std::optional<nn::Tensor> synthetic;  // standardized
  relations::ContrastOutput heads;
};

struct ClipExplanation {
  std::size_t clip = 0;
  relations::HeadsOutput heads;
  std::vector<dsp::Span> words;
  saliency::SaliencyBar total_bar;
  std::vector<ContrastDetail> contrasts;  // ascending emotion, initial excluded
};

ClipExplanation explain(const Models& models, const Prepared& data, std::size_t clip, double tau);

eval::MetricsReport evaluate(const Models& models, const Config& config, const Prepared& data,
                             double k_fraction);

}  // namespace rexnet::pipeline
