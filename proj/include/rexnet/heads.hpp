#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "rexnet/cnn.hpp"
#include "rexnet/dense_net.hpp"
#include "rexnet/relations.hpp"

namespace rexnet::relations {

inline constexpr int kEmbed = 64;
inline constexpr int kHidden = 64;
inline constexpr int kFinalInput = kEmotions * kCues + kEmbed;  // 112
inline constexpr int kRelationInput = kBits + 2 * kEmbed;       // 140

using CueDiff = std::array<double, kCues>;

// Explanation inputs for one clip that do not depend on the trainable heads.
struct ClipContext {
  // diffs[t][g]: standardized cue difference between the clip and its
  // counterfactual for g, both read under the contrastive mask of t vs g.
  std::array<std::array<CueDiff, kEmotions>, kEmotions> diffs{};
  // Embedding of the counterfactual for each contrast emotion.
  std::array<std::vector<double>, kEmotions> cf_embedding;
};

// M_y maps all cue differences plus the clip embedding to final logits;
// M_r maps one contrast's weighted differences plus both embeddings to
// ordinal relation bits.
struct HeadsModel {
  HeadsModel();
  void init(std::uint64_t seed);
  std::vector<nn::ParamRef> params();

  nn::DenseNet final_net;
  nn::DenseNet relation_net;
  CueDiff cue_scale{};
};

// [diffs[predicted][g] for g in emotion order, own slot zeroed] ++ z
std::vector<double> final_input(const ClipContext& ctx, int predicted,
                                std::span<const double> embedding);
std::vector<double> relation_input(const std::array<double, kBits>& weighted,
                                   std::span<const double> embedding,
                                   std::span<const double> cf_embedding);

struct ContrastOutput {
  int contrast = 0;
  CueDiff differences{};
  CueDiff attributions{};
  std::array<double, kBits> bit_probs{};
  CueRelations relations{};
};

struct HeadsOutput {
  int initial = 0;
  int final_class = 0;
  std::vector<double> initial_probs;
  std::vector<double> final_probs;
  std::vector<ContrastOutput> contrasts;  // every emotion except initial, ascending
};

HeadsOutput run_heads(const HeadsModel& heads, const ClipContext& ctx,
                      std::span<const double> initial_logits, std::span<const double> embedding);

struct JointHyper {
  int epochs = 6;
  int batch_size = 8;
  double learning_rate = 0.005;
  double momentum = 0.9;
  std::uint64_t seed = 7;
};

struct JointEpoch {
  int epoch = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double relation_loss = 0.0;
  double initial_accuracy = 0.0;
  double final_accuracy = 0.0;
  double relation_accuracy = 0.0;
};

struct JointResult {
  HeadsModel heads;
  std::vector<JointEpoch> trace;
};

using JointCallback = std::function<void(const JointEpoch&)>;

// Fine-tunes base and trains both heads on CE(initial) + CE(final) + BCE(bits).
// Relation targets come from table[true label][contrast]. LRP attributions
// are treated as constants. Throws TrainingDiverged on a non-finite loss.
JointResult joint_train(nn::CnnModel& base, const nn::Dataset& train,
                        const std::vector<ClipContext>& contexts, const RelationTable& table,
                        const CueDiff& cue_scale, const JointHyper& hyper,
                        const JointCallback& on_epoch = {});

}  // namespace rexnet::relations
