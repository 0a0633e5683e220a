#include "rexnet/heads.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "rexnet/error.hpp"

namespace rexnet::relations {

namespace {

constexpr std::size_t kCueBlock = static_cast<std::size_t>(kEmotions) * kCues;

std::array<double, kBits> relation_targets(const CueRelations& row) {
  std::array<double, kBits> t{};
  for (int c = 0; c < kCues; ++c) {
    const auto bits = nnrank_encode(row[c]);
    t[2 * c] = bits[0];
    t[2 * c + 1] = bits[1];
  }
  return t;
}

CueRelations decode_bits(std::span<const double> probs) {
  CueRelations r{};
  for (int c = 0; c < kCues; ++c) r[c] = nnrank_decode(probs[2 * c], probs[2 * c + 1]);
  return r;
}

void check_embedding(std::span<const double> z, const char* what) {
  if (z.size() != static_cast<std::size_t>(kEmbed))
    throw ShapeError(std::string(what) + ": embedding has " + std::to_string(z.size()) +
                     " values, expected " + std::to_string(kEmbed));
}

}  // namespace

HeadsModel::HeadsModel()
    : final_net({kFinalInput, kHidden, kEmotions}), relation_net({kRelationInput, kHidden, kBits}) {
  cue_scale.fill(1.0);
}

void HeadsModel::init(std::uint64_t seed) {
  final_net.init(seed);
  relation_net.init(seed + 1);
}

std::vector<nn::ParamRef> HeadsModel::params() {
  auto out = final_net.params("final");
  auto rel = relation_net.params("relation");
  out.insert(out.end(), rel.begin(), rel.end());
  return out;
}

std::vector<double> final_input(const ClipContext& ctx, int predicted,
                                std::span<const double> embedding) {
  check_embedding(embedding, "final_input");
  std::vector<double> u(static_cast<std::size_t>(kFinalInput), 0.0);
  for (int g = 0; g < kEmotions; ++g) {
    if (g == predicted) continue;
    for (int c = 0; c < kCues; ++c) u[static_cast<std::size_t>(g * kCues + c)] = ctx.diffs[predicted][g][c];
  }
  std::copy(embedding.begin(), embedding.end(), u.begin() + kCueBlock);
  return u;
}

std::vector<double> relation_input(const std::array<double, kBits>& weighted,
                                   std::span<const double> embedding,
                                   std::span<const double> cf_embedding) {
  check_embedding(embedding, "relation_input");
  check_embedding(cf_embedding, "relation_input");
  std::vector<double> v(weighted.begin(), weighted.end());
  v.insert(v.end(), embedding.begin(), embedding.end());
  v.insert(v.end(), cf_embedding.begin(), cf_embedding.end());
  return v;
}

HeadsOutput run_heads(const HeadsModel& heads, const ClipContext& ctx,
                      std::span<const double> initial_logits, std::span<const double> embedding) {
  if (initial_logits.size() != static_cast<std::size_t>(kEmotions))
    throw ShapeError("run_heads: expected " + std::to_string(kEmotions) + " initial logits");
  HeadsOutput out;
  out.initial = nn::argmax(initial_logits);
  out.initial_probs = nn::softmax(initial_logits);

  const auto u = final_input(ctx, out.initial, embedding);
  const auto final_logits = heads.final_net.forward(u);
  out.final_class = nn::argmax(final_logits);
  out.final_probs = nn::softmax(final_logits);
  const auto relevance = nn::lrp_epsilon(heads.final_net, u, out.final_class);

  for (int g = 0; g < kEmotions; ++g) {
    if (g == out.initial) continue;
    ContrastOutput co;
    co.contrast = g;
    co.differences = ctx.diffs[out.initial][g];
    for (int c = 0; c < kCues; ++c) co.attributions[c] = relevance[static_cast<std::size_t>(g * kCues + c)];
    const auto v = relation_input(weighted_cue_diffs(co.differences, co.attributions), embedding,
                                  ctx.cf_embedding[g]);
    const auto logits = heads.relation_net.forward(v);
    for (int b = 0; b < kBits; ++b) co.bit_probs[b] = nn::sigmoid(logits[b]);
    co.relations = decode_bits(co.bit_probs);
    out.contrasts.push_back(co);
  }
  return out;
}

JointResult joint_train(nn::CnnModel& base, const nn::Dataset& train,
                        const std::vector<ClipContext>& contexts, const RelationTable& table,
                        const CueDiff& cue_scale, const JointHyper& hyper,
                        const JointCallback& on_epoch) {
  if (train.size() == 0) throw Error("joint_train: empty training set");
  if (contexts.size() != train.size())
    throw ShapeError("joint_train: " + std::to_string(contexts.size()) + " contexts for " +
                     std::to_string(train.size()) + " clips");
  if (base.shape().embed != kEmbed || base.shape().classes != kEmotions)
    throw ShapeError("joint_train: base model must have a 64-wide embedding and 8 classes");

  JointResult result;
  HeadsModel& heads = result.heads;
  heads.init(hyper.seed);
  heads.cue_scale = cue_scale;

  auto all_params = base.params();
  auto head_params = heads.params();
  all_params.insert(all_params.end(), head_params.begin(), head_params.end());
  nn::Sgd opt(all_params, hyper.learning_rate, hyper.momentum);
  nn::Rng order_rng(hyper.seed + 2);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  nn::CnnCache cache;
  std::vector<double> d_initial, d_final, d_bits;
  std::vector<std::vector<double>> final_acts, rel_acts;
  const double contrast_weight = 1.0 / (kEmotions - 1);

  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    order_rng.shuffle(order);
    JointEpoch rec;
    rec.epoch = epoch;
    std::size_t initial_ok = 0, final_ok = 0, relations_ok = 0, relations_total = 0;
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      const std::size_t end = std::min(order.size(), start + hyper.batch_size);
      opt.zero_grad();
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = order[k];
        const int y = train.labels[i];
        const ClipContext& ctx = contexts[i];

        base.forward(train.inputs[i], &cache);
        const int y0 = nn::argmax(cache.logits);
        const double l0 = nn::softmax_cross_entropy(cache.logits, y, d_initial);
        std::vector<double> dz(static_cast<std::size_t>(kEmbed), 0.0);

        const auto u = final_input(ctx, y0, cache.embedding);
        const auto final_logits = heads.final_net.forward(u, &final_acts);
        const double lf = nn::softmax_cross_entropy(final_logits, y, d_final);
        const auto du = heads.final_net.backward(final_acts, d_final);
        for (int j = 0; j < kEmbed; ++j) dz[j] += du[kCueBlock + j];
        const int yf = nn::argmax(final_logits);
        const auto relevance = nn::lrp_epsilon(heads.final_net, u, yf);

        double lr_sum = 0.0;
        for (int g = 0; g < kEmotions; ++g) {
          if (g == y0) continue;
          CueDiff attr{};
          for (int c = 0; c < kCues; ++c) attr[c] = relevance[static_cast<std::size_t>(g * kCues + c)];
          const auto v = relation_input(weighted_cue_diffs(ctx.diffs[y0][g], attr),
                                        cache.embedding, ctx.cf_embedding[g]);
          const auto logits = heads.relation_net.forward(v, &rel_acts);
          const CueRelations& truth = table.row(y, g);
          const auto targets = relation_targets(truth);
          lr_sum += nn::sigmoid_bce(logits, targets, d_bits);
          for (double& d : d_bits) d *= contrast_weight;
          const auto dv = heads.relation_net.backward(rel_acts, d_bits);
          for (int j = 0; j < kEmbed; ++j) dz[j] += dv[kBits + j];

          std::array<double, kBits> probs{};
          for (int b = 0; b < kBits; ++b) probs[b] = nn::sigmoid(logits[b]);
          const CueRelations decoded = decode_bits(probs);
          for (int c = 0; c < kCues; ++c) relations_ok += decoded[c] == truth[c];
          relations_total += kCues;
        }
        const double lr = lr_sum * contrast_weight;
        if (!std::isfinite(l0) || !std::isfinite(lf) || !std::isfinite(lr))
          throw TrainingDiverged("joint loss became non-finite at epoch " + std::to_string(epoch));
        rec.initial_loss += l0;
        rec.final_loss += lf;
        rec.relation_loss += lr;
        initial_ok += y0 == y;
        final_ok += yf == y;
        base.backward(cache, d_initial, dz, false);
      }
      opt.step(1.0 / static_cast<double>(end - start));
    }
    const double n = static_cast<double>(train.size());
    rec.initial_loss /= n;
    rec.final_loss /= n;
    rec.relation_loss /= n;
    rec.initial_accuracy = static_cast<double>(initial_ok) / n;
    rec.final_accuracy = static_cast<double>(final_ok) / n;
    rec.relation_accuracy =
        relations_total ? static_cast<double>(relations_ok) / static_cast<double>(relations_total) : 0.0;
    result.trace.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

}  // namespace rexnet::relations
