#include "rexnet/pipeline.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <spdlog/spdlog.h>

#include "rexnet/checkpoint.hpp"
#include "rexnet/error.hpp"
#include "rexnet/gradcam.hpp"

namespace rexnet::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Reads the keys of j into the given fields, rejecting any key not listed.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw Error("config: " + where_ + " must be an object");
  }
  template <typename T>
  Reader& field(const char* key, T& out) {
    seen_.insert(key);
    if (j_.contains(key)) {
      try {
        out = j_.at(key).get<T>();
      } catch (const json::exception& e) {
        throw Error("config: bad value for " + where_ + "." + key + ": " + e.what());
      }
    }
    return *this;
  }
  Reader& known(const char* key) {
    seen_.insert(key);
    return *this;
  }
  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw Error("config: unknown key " + where_ + "." + k);
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

json hyper_json(const nn::TrainHyper& h) {
  return {{"epochs", h.epochs},
          {"batch_size", h.batch_size},
          {"learning_rate", h.learning_rate},
          {"momentum", h.momentum}};
}

void read_hyper(const json& j, const char* name, nn::TrainHyper& h) {
  if (!j.contains(name)) return;
  Reader(j.at(name), name)
      .field("epochs", h.epochs)
      .field("batch_size", h.batch_size)
      .field("learning_rate", h.learning_rate)
      .field("momentum", h.momentum)
      .finish();
}

json epoch_json(const nn::EpochRecord& e) {
  return {{"epoch", e.epoch},
          {"train_loss", e.train_loss},
          {"train_accuracy", e.train_accuracy},
          {"test_accuracy", e.test_accuracy}};
}

json epochs_json(const std::vector<nn::EpochRecord>& trace) {
  json out = json::array();
  for (const auto& e : trace) out.push_back(epoch_json(e));
  return out;
}

json gan_epoch_json(const counterfactual::GanEpoch& e) {
  return {{"epoch", e.epoch},         {"d_loss", e.d_loss}, {"g_adv", e.g_adv},
          {"g_cls", e.g_cls},         {"g_cyc", e.g_cyc},   {"cycle_similarity", e.cycle_similarity}};
}

json joint_epoch_json(const relations::JointEpoch& e) {
  return {{"epoch", e.epoch},
          {"initial_loss", e.initial_loss},
          {"final_loss", e.final_loss},
          {"relation_loss", e.relation_loss},
          {"initial_accuracy", e.initial_accuracy},
          {"final_accuracy", e.final_accuracy},
          {"relation_accuracy", e.relation_accuracy}};
}

relations::CueDiff to_cue_diff(const std::vector<double>& v) {
  if (v.size() != static_cast<std::size_t>(relations::kCues)) throw Error("bad cue scale record");
  relations::CueDiff out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

std::optional<dsp::CueVector> masked_cues(const Prepared& data, std::size_t clip,
                                          const std::vector<bool>& mask) {
  try {
    return dsp::extract_cues(data.features[clip], &mask, data.corpus.clips[clip].meta.word_count);
  } catch (const CueError&) {
    return std::nullopt;
  }
}

// Counterfactual clip per contrast emotion: the clip itself for its own
// emotion, otherwise the selected sample.
std::array<std::optional<std::size_t>, relations::kEmotions> contrast_clips(const Prepared& data,
                                                                            std::size_t clip) {
  std::array<std::optional<std::size_t>, relations::kEmotions> out;
  for (int g = 0; g < relations::kEmotions; ++g)
    out[g] = g == data.emotion[clip] ? std::optional<std::size_t>(clip)
                                     : counterfactual_sample(data, clip, g);
  return out;
}

struct ClipAnalysis {
  nn::CnnCache cache;
  std::vector<SaliencyMap> cams;
  relations::ClipContext context;
};

class ContextBuilder {
 public:
  ContextBuilder(const nn::CnnModel& model, const Prepared& data, const relations::CueDiff& scale,
                 const counterfactual::StarGanBundle* gan, double tau)
      : model_(model), data_(data), scale_(scale), gan_(gan), tau_(tau) {}

  void analyze(std::size_t clip, ClipAnalysis& a) {
    model_.forward(data_.inputs[clip], &a.cache);
    a.cams.clear();
    for (int c = 0; c < relations::kEmotions; ++c) a.cams.push_back(nn::grad_cam(model_, a.cache, c));

    const auto cf = contrast_clips(data_, clip);
    for (int g = 0; g < relations::kEmotions; ++g) {
      if (gan_) {
        a.context.cf_embedding[g] =
            model_.forward(counterfactual::synthesize(*gan_, data_.inputs[clip], g)).embedding;
      } else {
        a.context.cf_embedding[g] = cf[g] ? embedding(*cf[g]) : a.cache.embedding;
      }
    }
    for (int t = 0; t < relations::kEmotions; ++t) {
      for (int g = 0; g < relations::kEmotions; ++g) {
        a.context.diffs[t][g].fill(0.0);
        if (t == g || !cf[g]) continue;
        const auto mask =
            saliency::salient_frame_mask(saliency::pairwise_contrastive(a.cams[t], a.cams[g]), tau_);
        const auto own = masked_cues(data_, clip, mask);
        const auto other = masked_cues(data_, *cf[g], mask);
        if (own && other) a.context.diffs[t][g] = relations::cue_differences(*own, *other, scale_);
      }
    }
  }

 private:
  const std::vector<double>& embedding(std::size_t clip) {
    auto it = embeddings_.find(clip);
    if (it == embeddings_.end())
      it = embeddings_.emplace(clip, model_.forward(data_.inputs[clip]).embedding).first;
    return it->second;
  }

  const nn::CnnModel& model_;
  const Prepared& data_;
  relations::CueDiff scale_;
  const counterfactual::StarGanBundle* gan_;
  double tau_;
  std::map<std::size_t, std::vector<double>> embeddings_;
};

}  // namespace

json Config::to_json() const {
  return {{"data_dir", data_dir},
          {"synthetic", synthetic},
          {"synth_per_class", synth_per_class},
          {"seed", seed},
          {"skip_gan", skip_gan},
          {"tau", tau},
          {"k_fraction", k_fraction},
          {"k_sweep", k_sweep},
          {"base", hyper_json(base)},
          {"speaker", hyper_json(speaker)},
          {"stargan",
           {{"epochs", gan.epochs},
            {"clips_per_epoch", gan.clips_per_epoch},
            {"batch_size", gan.batch_size},
            {"lr_generator", gan.lr_generator},
            {"lr_discriminator", gan.lr_discriminator},
            {"beta1", gan.beta1},
            {"lambda_cls", gan.lambda_cls},
            {"lambda_cyc", gan.lambda_cyc},
            {"eval_clips", gan.eval_clips}}},
          {"joint",
           {{"epochs", joint.epochs},
            {"batch_size", joint.batch_size},
            {"learning_rate", joint.learning_rate},
            {"momentum", joint.momentum}}},
          {"relations",
           {{"family_alpha", derivation.family_alpha}, {"min_per_group", derivation.min_per_group}}}};
}

Config Config::from_json(const json& j, Config c) {
  std::uint64_t seed = c.seed;
  Reader(j, "config")
      .field("data_dir", c.data_dir)
      .field("synthetic", c.synthetic)
      .field("synth_per_class", c.synth_per_class)
      .field("seed", seed)
      .field("skip_gan", c.skip_gan)
      .field("tau", c.tau)
      .field("k_fraction", c.k_fraction)
      .field("k_sweep", c.k_sweep)
      .known("base")
      .known("speaker")
      .known("stargan")
      .known("joint")
      .known("relations")
      .finish();
  read_hyper(j, "base", c.base);
  read_hyper(j, "speaker", c.speaker);
  if (j.contains("stargan"))
    Reader(j.at("stargan"), "stargan")
        .field("epochs", c.gan.epochs)
        .field("clips_per_epoch", c.gan.clips_per_epoch)
        .field("batch_size", c.gan.batch_size)
        .field("lr_generator", c.gan.lr_generator)
        .field("lr_discriminator", c.gan.lr_discriminator)
        .field("beta1", c.gan.beta1)
        .field("lambda_cls", c.gan.lambda_cls)
        .field("lambda_cyc", c.gan.lambda_cyc)
        .field("eval_clips", c.gan.eval_clips)
        .finish();
  if (j.contains("joint"))
    Reader(j.at("joint"), "joint")
        .field("epochs", c.joint.epochs)
        .field("batch_size", c.joint.batch_size)
        .field("learning_rate", c.joint.learning_rate)
        .field("momentum", c.joint.momentum)
        .finish();
  if (j.contains("relations"))
    Reader(j.at("relations"), "relations")
        .field("family_alpha", c.derivation.family_alpha)
        .field("min_per_group", c.derivation.min_per_group)
        .finish();
  if (!(c.tau > 0.0 && c.tau < 1.0)) throw Error("config: tau must lie in (0, 1)");
  if (!(c.k_fraction >= 0.0 && c.k_fraction < 1.0)) throw Error("config: k_fraction must lie in [0, 1)");
  if (c.synth_per_class < 2) throw Error("config: synth_per_class must be at least 2");
  c.reseed(seed);
  return c;
}

void Config::reseed(std::uint64_t s) {
  seed = s;
  base.seed = s * 10 + 1;
  speaker.seed = s * 10 + 2;
  gan.seed = s * 10 + 3;
  joint.seed = s * 10 + 4;
}

nn::Dataset Prepared::emotion_set(std::span<const std::size_t> clips) const {
  nn::Dataset d;
  for (std::size_t i : clips) {
    d.inputs.push_back(inputs[i]);
    d.labels.push_back(emotion[i]);
  }
  return d;
}

nn::Dataset Prepared::speaker_set(std::span<const std::size_t> clips) const {
  nn::Dataset d;
  for (std::size_t i : clips) {
    d.inputs.push_back(inputs[i]);
    d.labels.push_back(speaker[i]);
  }
  return d;
}

std::vector<int> Prepared::speaker_labels(std::span<const std::size_t> clips) const {
  std::vector<int> out;
  for (std::size_t i : clips) out.push_back(speaker[i]);
  return out;
}

audio::Corpus load_corpus(const Config& config) {
  if (config.synthetic) return audio::synth_corpus(config.seed, config.synth_per_class);
  if (config.data_dir.empty())
    throw Error("no dataset: pass --data <RAVDESS root> or --synthetic for the generated corpus");
  audio::IngestReport report;
  audio::Corpus corpus = audio::ingest_ravdess(config.data_dir, config.seed, &report);
  spdlog::info("ingested {} clips ({} other modality, {} malformed, {} unreadable)", report.loaded,
               report.skipped_modality, report.malformed_names, report.unreadable);
  if (corpus.clips.empty())
    throw Error("no RAVDESS speech clips under " + config.data_dir +
                "; expected files named MM-VC-EE-II-SS-RR-AA.wav, or use --synthetic");
  return corpus;
}

Prepared prepare(audio::Corpus corpus, const nn::Standardizer* norm) {
  Prepared p;
  p.corpus = std::move(corpus);
  p.train = p.corpus.indices(audio::Split::Train);
  p.test = p.corpus.indices(audio::Split::Test);
  if (p.train.empty()) throw Error("prepare: the corpus has no training clips");

  std::set<int> actor_set;
  for (const auto& c : p.corpus.clips) actor_set.insert(c.meta.actor);
  p.actors.assign(actor_set.begin(), actor_set.end());

  std::vector<nn::Tensor> logs;
  logs.reserve(p.corpus.clips.size());
  for (const auto& c : p.corpus.clips) {
    const auto spec = dsp::mel_spectrogram(c.wave);
    logs.push_back(spec.log_compressed());
    p.features.push_back(dsp::analyze_clip(spec, c.wave));
    try {
      p.cues.push_back(dsp::extract_cues(p.features.back(), nullptr, c.meta.word_count));
    } catch (const CueError&) {
      spdlog::warn("clip {} has no voiced frames; its cues are skipped", c.meta.clip_id);
      p.cues.push_back(std::nullopt);
    }
    p.emotion.push_back(audio::index_of(c.meta.emotion));
    p.speaker.push_back(static_cast<int>(
        std::lower_bound(p.actors.begin(), p.actors.end(), c.meta.actor) - p.actors.begin()));
  }
  if (norm) {
    p.norm = *norm;
  } else {
    std::vector<nn::Tensor> train_logs;
    for (std::size_t i : p.train) train_logs.push_back(logs[i]);
    p.norm = nn::Standardizer::fit(train_logs);
  }
  for (auto& x : logs) p.inputs.push_back(p.norm.apply(x));
  return p;
}

std::optional<std::size_t> counterfactual_sample(const Prepared& data, std::size_t clip, int gamma,
                                                 std::string* reason) {
  const auto& meta = data.corpus.clips[clip].meta;
  try {
    const auto& sample = counterfactual::select_sample(data.corpus, meta, audio::emotion_at(gamma));
    return data.corpus.index_of(sample.clip_id);
  } catch (const NoCounterfactual& e) {
    if (reason) *reason = e.what();
    return std::nullopt;
  }
}

std::vector<relations::ClipContext> build_contexts(const nn::CnnModel& model, const Prepared& data,
                                                   std::span<const std::size_t> clips,
                                                   const relations::CueDiff& cue_scale,
                                                   const counterfactual::StarGanBundle* gan,
                                                   double tau) {
  ContextBuilder builder(model, data, cue_scale, gan, tau);
  std::vector<relations::ClipContext> out;
  out.reserve(clips.size());
  ClipAnalysis a;
  for (std::size_t i : clips) {
    builder.analyze(i, a);
    out.push_back(a.context);
  }
  return out;
}

TrainOutput train(const Config& config, const Prepared& data, const Progress& progress) {
  auto report = [&](const std::string& stage, const json& record) {
    if (progress) progress(stage, record);
  };
  TrainOutput out;
  Models& m = out.models;
  json& trace = out.trace;
  m.norm = data.norm;
  m.actors = data.actors;

  const nn::Dataset train_set = data.emotion_set(data.train);
  const nn::Dataset test_set = data.emotion_set(data.test);

  spdlog::info("pretraining the emotion model on {} clips", train_set.size());
  nn::CnnShape emotion_shape;
  auto base = nn::train_classifier(train_set, test_set, emotion_shape, config.base,
                                   [&](const nn::EpochRecord& e) { report("base", epoch_json(e)); });
  m.base_cnn = base.model;
  trace["base"] = epochs_json(base.trace);

  spdlog::info("training the speaker model over {} actors", data.actors.size());
  nn::CnnShape speaker_shape;
  speaker_shape.classes = static_cast<int>(data.actors.size());
  auto speaker = nn::train_classifier(data.speaker_set(data.train), data.speaker_set(data.test),
                                      speaker_shape, config.speaker,
                                      [&](const nn::EpochRecord& e) { report("speaker", epoch_json(e)); });
  m.speaker = std::move(speaker.model);
  trace["speaker"] = epochs_json(speaker.trace);

  std::vector<relations::CueObservation> observations;
  std::vector<dsp::CueVector> train_cues;
  for (std::size_t i : data.train) {
    if (!data.cues[i]) continue;
    observations.push_back({data.corpus.clips[i].meta.actor, data.emotion[i], *data.cues[i]});
    train_cues.push_back(*data.cues[i]);
  }
  relations::DerivationReport derivation;
  m.table = relations::derive_relation_table(observations, config.derivation, &derivation);
  const relations::CueDiff scale = relations::cue_scale(train_cues);
  trace["relations"] = {{"underfilled_pairs", derivation.underfilled_pairs},
                        {"significant_cells", derivation.significant_cells},
                        {"table", m.table.to_json()}};
  report("relations", trace["relations"]);

  if (!config.skip_gan) {
    spdlog::info("training the counterfactual generator");
    auto gan = counterfactual::train_stargan(
        train_set, data.norm, m.base_cnn, config.gan,
        [&](const counterfactual::GanEpoch& e) { report("stargan", gan_epoch_json(e)); });
    json epochs = json::array();
    for (const auto& e : gan.trace) epochs.push_back(gan_epoch_json(e));
    trace["stargan"] = epochs;
    m.gan = std::move(gan.bundle);
  }

  spdlog::info("building explanation contexts");
  const auto contexts = build_contexts(m.base_cnn, data, data.train, scale,
                                       m.gan ? &*m.gan : nullptr, config.tau);
  spdlog::info("joint training of the base model and heads");
  m.initial = m.base_cnn;
  auto joint = relations::joint_train(m.initial, train_set, contexts, m.table, scale, config.joint,
                                      [&](const relations::JointEpoch& e) {
                                        report("joint", joint_epoch_json(e));
                                      });
  m.heads = std::move(joint.heads);
  json epochs = json::array();
  for (const auto& e : joint.trace) epochs.push_back(joint_epoch_json(e));
  trace["joint"] = epochs;
  return out;
}

void save_checkpoints(Models& models, const Config& config, const fs::path& dir) {
  fs::create_directories(dir);
  Models& mm = models;

  nn::Archive base;
  base.put_meta("config", config.to_json().dump());
  base.put_meta("actors", json(models.actors).dump());
  nn::store(base, "base_cnn", mm.base_cnn);
  nn::store(base, "initial", mm.initial);
  nn::store(base, "speaker", mm.speaker);
  nn::store(base, "norm", models.norm);
  base.save(dir / kBaseFile);

  nn::Archive heads;
  heads.put_meta("relation_table", models.table.to_json().dump());
  nn::store(heads, "final", mm.heads.final_net);
  nn::store(heads, "relation", mm.heads.relation_net);
  heads.put("cue_scale", {relations::kCues},
            std::vector<double>(models.heads.cue_scale.begin(), models.heads.cue_scale.end()));
  heads.save(dir / kHeadsFile);

  const fs::path gan_path = dir / kGanFile;
  if (!models.gan) {
    fs::remove(gan_path);
    return;
  }
  auto& g = mm.gan->G;
  const auto& shape = g.shape();
  nn::Archive gan;
  gan.put("G.shape", {4},
          {double(shape.height), double(shape.width), double(shape.classes), double(shape.hidden)});
  nn::store_params(gan, "G", g.params());
  gan.put("G.floor", {static_cast<int>(g.floor.size())}, g.floor);
  gan.put("D.channels", {1}, {double(mm.gan->D.conv1.out_channels)});
  nn::store_params(gan, "D", mm.gan->D.params());
  nn::store(gan, "M", mm.gan->M);
  gan.save(gan_path);
}

Loaded load_checkpoints(const fs::path& dir) {
  for (const char* f : {kBaseFile, kHeadsFile})
    if (!fs::exists(dir / f)) throw Error("missing checkpoint " + (dir / f).string() + "; run `rexnet train` first");
  Loaded out;
  const auto base = nn::Archive::load(dir / kBaseFile);
  out.config = Config::from_json(json::parse(base.meta("config")));
  Models& m = out.models;
  m.actors = json::parse(base.meta("actors")).get<std::vector<int>>();
  m.base_cnn = nn::load_cnn(base, "base_cnn");
  m.initial = nn::load_cnn(base, "initial");
  m.speaker = nn::load_cnn(base, "speaker");
  m.norm = nn::load_standardizer(base, "norm");

  const auto heads = nn::Archive::load(dir / kHeadsFile);
  m.table = relations::RelationTable::from_json(json::parse(heads.meta("relation_table")));
  m.heads.final_net = nn::load_dense(heads, "final");
  m.heads.relation_net = nn::load_dense(heads, "relation");
  m.heads.cue_scale = to_cue_diff(heads.get("cue_scale").data);

  if (fs::exists(dir / kGanFile)) {
    const auto gan = nn::Archive::load(dir / kGanFile);
    const auto& s = gan.get("G.shape").data;
    if (s.size() != 4) throw Error("bad generator shape record");
    counterfactual::GanShape shape{int(s[0]), int(s[1]), int(s[2]), int(s[3])};
    counterfactual::StarGanBundle b{counterfactual::Generator(shape),
                                    counterfactual::Discriminator(int(gan.get("D.channels").data.at(0))),
                                    nn::load_cnn(gan, "M")};
    nn::load_params(gan, "G", b.G.params());
    b.G.floor = gan.get("G.floor").data;
    nn::load_params(gan, "D", b.D.params());
    m.gan = std::move(b);
  }
  return out;
}

ClipExplanation explain(const Models& models, const Prepared& data, std::size_t clip, double tau) {
  if (clip >= data.corpus.clips.size()) throw Error("explain: clip index out of range");
  const auto* gan = models.gan ? &*models.gan : nullptr;
  ContextBuilder builder(models.initial, data, models.heads.cue_scale, gan, tau);
  ClipAnalysis a;
  builder.analyze(clip, a);

  ClipExplanation ex;
  ex.clip = clip;
  ex.heads = relations::run_heads(models.heads, a.context, a.cache.logits, a.cache.embedding);
  const auto& meta = data.corpus.clips[clip].meta;
  ex.words = dsp::segment_words(data.features[clip].pauses, meta.word_count);

  const int y = ex.heads.initial;
  std::vector<SaliencyMap> others;
  for (int c = 0; c < relations::kEmotions; ++c)
    if (c != y) others.push_back(a.cams[c]);
  ex.total_bar = saliency::to_time_bar(saliency::total_contrastive(a.cams[y], others), ex.words);

  for (const auto& co : ex.heads.contrasts) {
    ContrastDetail d;
    d.contrast = co.contrast;
    d.heads = co;
    if (co.contrast == data.emotion[clip]) {
      d.sample = clip;
    } else {
      d.sample = counterfactual_sample(data, clip, co.contrast, &d.unavailable_reason);
    }
    const auto map = saliency::pairwise_contrastive(a.cams[y], a.cams[co.contrast]);
    d.bar = saliency::to_time_bar(map, ex.words);
    const auto mask = saliency::salient_frame_mask(map, tau);
    d.target_cues = masked_cues(data, clip, mask);
    if (d.sample) d.cf_cues = masked_cues(data, *d.sample, mask);
    if (gan) d.synthetic = counterfactual::synthesize(*gan, data.inputs[clip], co.contrast);
    ex.contrasts.push_back(std::move(d));
  }
  return ex;
}

eval::MetricsReport evaluate(const Models& models, const Config& config, const Prepared& data,
                             double k_fraction) {
  eval::MetricsReport r;
  r.speakers = static_cast<int>(models.actors.size());
  const nn::Dataset test = data.emotion_set(data.test);
  r.base_accuracy = eval::classifier_accuracy(models.base_cnn, test);
  r.initial_accuracy = eval::classifier_accuracy(models.initial, test);

  std::vector<double> ks{k_fraction};
  for (double k : config.k_sweep)
    if (k != k_fraction) ks.push_back(k);
  for (double k : ks) {
    spdlog::info("ablation at k = {}", k);
    r.ablation.push_back(eval::ablation_arms(models.initial, test, k, config.seed));
  }

  const auto speaker_labels = data.speaker_labels(data.test);
  if (models.gan) {
    spdlog::info("scoring counterfactual synthetics");
    r.synthetic = eval::evaluate_counterfactuals(*models.gan, models.speaker, models.gan->M, test,
                                                 speaker_labels, &models.initial);
  }

  r.samples.similarity_mean = 1.0;
  for (std::size_t k = 0; k < data.test.size(); ++k) {
    const std::size_t i = data.test[k];
    for (int g = 0; g < relations::kEmotions; ++g) {
      if (g == data.emotion[i]) continue;
      const auto j = counterfactual_sample(data, i, g);
      if (!j) continue;
      r.samples.identity.add(nn::predict(models.speaker, data.inputs[*j]) == data.speaker[i]);
      r.samples.emotion.add(nn::predict(models.initial, data.inputs[*j]) == g);
    }
  }

  spdlog::info("scoring final concept and cue relations");
  const auto* gan = models.gan ? &*models.gan : nullptr;
  ContextBuilder builder(models.initial, data, models.heads.cue_scale, gan, config.tau);
  ClipAnalysis a;
  std::vector<int> final_pred, labels;
  std::vector<eval::RelationPair> pairs;
  for (std::size_t i : data.test) {
    builder.analyze(i, a);
    const auto out = relations::run_heads(models.heads, a.context, a.cache.logits, a.cache.embedding);
    final_pred.push_back(out.final_class);
    labels.push_back(data.emotion[i]);
    for (const auto& co : out.contrasts)
      pairs.push_back({co.relations, models.table.row(data.emotion[i], co.contrast)});
  }
  r.final_accuracy = eval::tally(final_pred, labels, relations::kEmotions);
  r.relations = eval::relation_accuracy(pairs);
  return r;
}

}  // namespace rexnet::pipeline
