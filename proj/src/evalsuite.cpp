#include "rexnet/evalsuite.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "rexnet/audio_io.hpp"
#include "rexnet/error.hpp"
#include "rexnet/gradcam.hpp"
#include "rexnet/saliency.hpp"

namespace rexnet::eval {

Accuracy tally(std::span<const int> predictions, std::span<const int> labels, int classes) {
  if (predictions.size() != labels.size())
    throw ShapeError("tally: " + std::to_string(predictions.size()) + " predictions for " +
                     std::to_string(labels.size()) + " labels");
  Accuracy acc;
  acc.per_class.resize(static_cast<std::size_t>(classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool ok = predictions[i] == labels[i];
    acc.overall.add(ok);
    if (labels[i] < 0 || labels[i] >= classes) throw Error("tally: label out of range");
    acc.per_class[static_cast<std::size_t>(labels[i])].add(ok);
  }
  return acc;
}

double macro_accuracy(std::span<const Fraction> per_class) {
  double sum = 0.0;
  int present = 0;
  for (const auto& f : per_class) {
    if (f.total == 0) continue;
    sum += f.value();
    ++present;
  }
  return present ? sum / present : 0.0;
}

Accuracy classifier_accuracy(const nn::CnnModel& model, const nn::Dataset& data) {
  std::vector<int> predictions;
  predictions.reserve(data.size());
  for (const auto& x : data.inputs) predictions.push_back(nn::predict(model, x));
  return tally(predictions, data.labels, model.shape().classes);
}

nn::Tensor ablate(const nn::Tensor& x, std::span<const double> saliency, double k_fraction) {
  if (saliency.size() != x.size())
    throw ShapeError("ablate: saliency has " + std::to_string(saliency.size()) +
                     " values for input " + x.shape_string());
  if (!(k_fraction >= 0.0 && k_fraction <= 1.0)) throw Error("ablate: k_fraction must lie in [0, 1]");
  nn::Tensor out = x;
  const auto k = static_cast<std::size_t>(std::llround(k_fraction * static_cast<double>(x.size())));
  if (k == 0) return out;
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return saliency[a] != saliency[b] ? saliency[a] > saliency[b] : a < b;
                    });
  for (std::size_t i = 0; i < k; ++i) out.data[order[i]] = 0.0;
  return out;
}

AblationResult ablation_decrease(const nn::CnnModel& model, const nn::Dataset& test,
                                 const SaliencyFn& saliency, double k_fraction) {
  AblationResult r;
  r.k_fraction = k_fraction;
  nn::CnnCache cache;
  for (std::size_t i = 0; i < test.size(); ++i) {
    model.forward(test.inputs[i], &cache);
    r.clean.add(nn::argmax(cache.logits) == test.labels[i]);
    if (k_fraction == 0.0) {
      r.ablated.add(nn::argmax(cache.logits) == test.labels[i]);
      continue;
    }
    const auto s = saliency(cache, i);
    r.ablated.add(nn::predict(model, ablate(test.inputs[i], s, k_fraction)) == test.labels[i]);
  }
  return r;
}

SaliencyFn absolute_saliency(const nn::CnnModel& model) {
  return [&model](const nn::CnnCache& cache, std::size_t) {
    return nn::grad_cam(model, cache, nn::argmax(cache.logits)).values;
  };
}

SaliencyFn contrastive_saliency(const nn::CnnModel& model) {
  return [&model](const nn::CnnCache& cache, std::size_t) {
    const int y = nn::argmax(cache.logits);
    std::vector<SaliencyMap> others;
    for (int c = 0; c < model.shape().classes; ++c)
      if (c != y) others.push_back(nn::grad_cam(model, cache, c));
    return saliency::total_contrastive(nn::grad_cam(model, cache, y), others).values;
  };
}

SaliencyFn random_saliency(std::uint64_t seed) {
  return [seed](const nn::CnnCache& cache, std::size_t clip) {
    nn::Rng rng(seed * 7919ULL + clip);
    std::vector<double> s(cache.input.size());
    for (double& v : s) v = rng.uniform();
    return s;
  };
}

AblationArms ablation_arms(const nn::CnnModel& model, const nn::Dataset& test, double k_fraction,
                           std::uint64_t seed) {
  AblationArms arms;
  arms.k_fraction = k_fraction;
  arms.absolute = ablation_decrease(model, test, absolute_saliency(model), k_fraction);
  arms.contrastive = ablation_decrease(model, test, contrastive_saliency(model), k_fraction);
  arms.random = ablation_decrease(model, test, random_saliency(seed), k_fraction);
  return arms;
}

CounterfactualMetrics evaluate_counterfactuals(const counterfactual::StarGanBundle& bundle,
                                               const nn::CnnModel& speaker_model,
                                               const nn::CnnModel& emotion_model,
                                               const nn::Dataset& test,
                                               std::span<const int> speaker_labels,
                                               const nn::CnnModel* second_emotion_model) {
  if (speaker_labels.size() != test.size())
    throw ShapeError("evaluate_counterfactuals: speaker labels do not match the test split");
  CounterfactualMetrics m;
  if (second_emotion_model) m.base_emotion = Fraction{};
  double sim_sum = 0.0, mse_sum = 0.0;
  const int classes = bundle.G.shape().classes;
  for (std::size_t i = 0; i < test.size(); ++i) {
    for (int g = 0; g < classes; ++g) {
      if (g == test.labels[i]) continue;
      const nn::Tensor fake = counterfactual::synthesize(bundle, test.inputs[i], g);
      const double mse = counterfactual::mean_squared_error(test.inputs[i], fake);
      sim_sum += std::exp(-mse);
      mse_sum += mse;
      m.identity.add(nn::predict(speaker_model, fake) == speaker_labels[i]);
      m.emotion.add(nn::predict(emotion_model, fake) == g);
      if (second_emotion_model) m.base_emotion->add(nn::predict(*second_emotion_model, fake) == g);
    }
  }
  if (m.identity.total) {
    m.similarity_mean = sim_sum / static_cast<double>(m.identity.total);
    m.mse_mean = mse_sum / static_cast<double>(m.identity.total);
  }
  return m;
}

RelationAccuracy relation_accuracy(std::span<const RelationPair> pairs) {
  RelationAccuracy r;
  for (const auto& p : pairs)
    for (int c = 0; c < relations::kCues; ++c)
      r.per_cue[c][static_cast<std::size_t>(p.truth[c])].add(p.predicted[c] == p.truth[c]);
  double sum = 0.0;
  for (const auto& cue : r.per_cue) sum += macro_accuracy(cue);
  r.macro = sum / relations::kCues;
  return r;
}

namespace {

nlohmann::json fraction_json(const Fraction& f) {
  return {{"correct", f.correct}, {"total", f.total}, {"value", f.value()}};
}

nlohmann::json accuracy_json(const Accuracy& a) {
  nlohmann::json per = nlohmann::json::array();
  for (std::size_t c = 0; c < a.per_class.size(); ++c) {
    auto j = fraction_json(a.per_class[c]);
    if (a.per_class.size() == static_cast<std::size_t>(audio::kNumEmotions))
      j["emotion"] = audio::emotion_name(audio::emotion_at(static_cast<int>(c)));
    per.push_back(j);
  }
  auto j = fraction_json(a.overall);
  j["per_class"] = per;
  return j;
}

nlohmann::json ablation_json(const AblationResult& r) {
  return {{"clean", fraction_json(r.clean)},
          {"ablated", fraction_json(r.ablated)},
          {"decrease", r.decrease()}};
}

nlohmann::json counterfactual_json(const CounterfactualMetrics& m) {
  nlohmann::json j = {{"reconstruction_similarity_mean", m.similarity_mean},
                      {"reconstruction_mse_mean", m.mse_mean},
                      {"identity_accuracy", fraction_json(m.identity)},
                      {"cf_emotion_accuracy", fraction_json(m.emotion)}};
  if (m.base_emotion) j["cf_emotion_accuracy_base"] = fraction_json(*m.base_emotion);
  return j;
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * v);
  return buf;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json j;
  j["base_accuracy"] = accuracy_json(base_accuracy);
  j["initial_accuracy"] = accuracy_json(initial_accuracy);
  j["final_accuracy"] = accuracy_json(final_accuracy);
  if (!ablation.empty()) {
    j["absolute_ablation_decrease"] = ablation.front().absolute.decrease();
    j["contrastive_ablation_decrease"] = ablation.front().contrastive.decrease();
    j["random_ablation_decrease"] = ablation.front().random.decrease();
  }
  nlohmann::json sweep = nlohmann::json::array();
  for (const auto& a : ablation)
    sweep.push_back({{"k_fraction", a.k_fraction},
                     {"absolute", ablation_json(a.absolute)},
                     {"contrastive", ablation_json(a.contrastive)},
                     {"random", ablation_json(a.random)}});
  j["ablation"] = sweep;
  if (synthetic) {
    j["reconstruction_similarity_mean"] = synthetic->similarity_mean;
    j["identity_accuracy"] = synthetic->identity.value();
    j["cf_emotion_accuracy"] = synthetic->emotion.value();
    j["counterfactual_synthetic"] = counterfactual_json(*synthetic);
  } else {
    j["reconstruction_similarity_mean"] = nullptr;
    j["identity_accuracy"] = nullptr;
    j["cf_emotion_accuracy"] = nullptr;
    j["counterfactual_synthetic"] = nullptr;
  }
  j["counterfactual_samples"] = counterfactual_json(samples);
  j["relation_macro_accuracy"] = relations.macro;
  nlohmann::json cues = nlohmann::json::object();
  for (int c = 0; c < relations::kCues; ++c) {
    nlohmann::json per = nlohmann::json::object();
    for (int r = 0; r < 3; ++r)
      per[std::string(relations::relation_name(static_cast<relations::Relation>(r)))] =
          fraction_json(relations.per_cue[c][r]);
    cues[std::string(dsp::kCueNames[c])] = per;
  }
  j["relation_per_cue"] = cues;
  j["speakers"] = speakers;
  return j;
}

std::string MetricsReport::to_table() const {
  struct Row {
    std::string variable, metric, chance, base, rexnet, samples;
  };
  std::vector<Row> rows;
  const std::string speakers_label = std::to_string(speakers);
  rows.push_back({"Initial concept", "Emotion accuracy (8 classes)", pct(1.0 / 8),
                  pct(base_accuracy.overall.value()), pct(initial_accuracy.overall.value()), ""});
  rows.push_back({"Final concept", "Emotion accuracy (8 classes)", "", "",
                  pct(final_accuracy.overall.value()), ""});
  if (!ablation.empty()) {
    const auto& a = ablation.front();
    const std::string k = " (k=" + num(a.k_fraction).substr(0, 4) + ")";
    rows.push_back({"Absolute saliency", "Ablated accuracy decrease" + k, "", "",
                    pct(a.absolute.decrease()), ""});
    rows.push_back({"Contrastive saliency", "Ablated accuracy decrease" + k, "", "",
                    pct(a.contrastive.decrease()), ""});
    rows.push_back({"Random control", "Ablated accuracy decrease" + k, "", "",
                    pct(a.random.decrease()), ""});
  }
  const std::string none = "n/a";
  rows.push_back({"Counterfactual", "Reconstruction similarity", "", "",
                  synthetic ? num(synthetic->similarity_mean) : none, num(1.0)});
  rows.push_back({"", "Identity accuracy (" + speakers_label + " classes)",
                  speakers ? pct(1.0 / speakers) : "", "",
                  synthetic ? pct(synthetic->identity.value()) : none, pct(samples.identity.value())});
  rows.push_back({"", "Emotion accuracy (8 classes)", pct(1.0 / 8), "",
                  synthetic ? pct(synthetic->emotion.value()) : none, pct(samples.emotion.value())});
  rows.push_back({"Cue difference relation", "Cue accuracy (3 classes, 6 labels)", "", "",
                  pct(relations.macro), ""});

  std::vector<std::size_t> width = {8, 6, 6, 8, 6, 9};
  auto widen = [&](const Row& r) {
    const std::string* f[] = {&r.variable, &r.metric, &r.chance, &r.base, &r.rexnet, &r.samples};
    for (std::size_t i = 0; i < 6; ++i) width[i] = std::max(width[i], f[i]->size());
  };
  const Row header{"Variable", "Metric", "Random", "Base CNN", "RexNet", "C.Samples"};
  widen(header);
  for (const auto& r : rows) widen(r);
  std::ostringstream out;
  auto emit = [&](const Row& r) {
    const std::string* f[] = {&r.variable, &r.metric, &r.chance, &r.base, &r.rexnet, &r.samples};
    std::string line;
    for (std::size_t i = 0; i < 6; ++i) {
      std::string cell = *f[i];
      cell.resize(width[i], ' ');
      line += cell;
      if (i + 1 < 6) line += "  ";
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out << line << '\n';
  };
  emit(header);
  std::size_t total = 0;
  for (auto w : width) total += w + 2;
  out << std::string(total - 2, '-') << '\n';
  for (const auto& r : rows) emit(r);
  return out.str();
}

}  // namespace rexnet::eval
