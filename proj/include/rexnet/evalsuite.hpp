#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "rexnet/cnn.hpp"
#include "rexnet/counterfactual.hpp"
#include "rexnet/relations.hpp"

namespace rexnet::eval {

struct Fraction {
  std::size_t correct = 0;
  std::size_t total = 0;
  double value() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
  void add(bool ok) {
    correct += ok;
    ++total;
  }
};

struct Accuracy {
  Fraction overall;
  std::vector<Fraction> per_class;
};

Accuracy tally(std::span<const int> predictions, std::span<const int> labels, int classes);
// Mean of per-class accuracies over classes with at least one example.
double macro_accuracy(std::span<const Fraction> per_class);

Accuracy classifier_accuracy(const nn::CnnModel& model, const nn::Dataset& data);

// Saliency over the model input grid, (bins x frames), for one clip.
using SaliencyFn = std::function<std::vector<double>(const nn::CnnCache& cache, std::size_t clip)>;

// Sets the top k_fraction of bins by saliency to zero (the per-bin mean in
// standardized space). Ties keep the lower index first.
nn::Tensor ablate(const nn::Tensor& x, std::span<const double> saliency, double k_fraction);

struct AblationResult {
  double k_fraction = 0.0;
  Fraction clean;
  Fraction ablated;
  double decrease() const { return clean.value() - ablated.value(); }
};

AblationResult ablation_decrease(const nn::CnnModel& model, const nn::Dataset& test,
                                 const SaliencyFn& saliency, double k_fraction);

// Grad-CAM of the predicted class.
SaliencyFn absolute_saliency(const nn::CnnModel& model);
// Grad-CAM of the predicted class discounted by every other class.
SaliencyFn contrastive_saliency(const nn::CnnModel& model);
// Uniform noise seeded per clip, for the control arm.
SaliencyFn random_saliency(std::uint64_t seed);

struct AblationArms {
  double k_fraction = 0.0;
  AblationResult absolute;
  AblationResult contrastive;
  AblationResult random;
};

AblationArms ablation_arms(const nn::CnnModel& model, const nn::Dataset& test, double k_fraction,
                           std::uint64_t seed);

struct CounterfactualMetrics {
  double similarity_mean = 0.0;
  double mse_mean = 0.0;
  Fraction identity;
  Fraction emotion;                     // judged by the emotion model supplied
  std::optional<Fraction> base_emotion;  // judged by a second model, when given
};

// Over every test clip and each of its 7 contrast emotions: similarity of
// G(x, g) to x, whether speaker_model recovers the actor, and whether
// emotion_model predicts g.
CounterfactualMetrics evaluate_counterfactuals(const counterfactual::StarGanBundle& bundle,
                                               const nn::CnnModel& speaker_model,
                                               const nn::CnnModel& emotion_model,
                                               const nn::Dataset& test,
                                               std::span<const int> speaker_labels,
                                               const nn::CnnModel* second_emotion_model = nullptr);

struct RelationPair {
  relations::CueRelations predicted{};
  relations::CueRelations truth{};
};

struct RelationAccuracy {
  double macro = 0.0;
  // per_cue[cue][relation]
  std::array<std::array<Fraction, 3>, relations::kCues> per_cue{};
};

// Per cue, the mean per-relation recall; then the mean over cues.
RelationAccuracy relation_accuracy(std::span<const RelationPair> pairs);

struct MetricsReport {
  Accuracy base_accuracy;
  Accuracy initial_accuracy;
  Accuracy final_accuracy;
  std::vector<AblationArms> ablation;  // first entry is the configured k
  std::optional<CounterfactualMetrics> synthetic;
  CounterfactualMetrics samples;       // similarity is 1 by convention
  RelationAccuracy relations;
  int speakers = 0;

  nlohmann::json to_json() const;
  std::string to_table() const;
};

}  // namespace rexnet::eval
