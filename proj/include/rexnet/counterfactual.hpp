#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "rexnet/audio_io.hpp"
#include "rexnet/cnn.hpp"
#include "rexnet/layers.hpp"

namespace rexnet::counterfactual {

// Real clip with the same actor and statement portraying gamma. Prefers the
// same intensity, then the same repetition, then the lowest clip id. Throws
// Error when gamma equals the clip's emotion and NoCounterfactual when no
// candidate exists even after relaxing intensity.
const audio::ClipMeta& select_sample(const audio::Corpus& corpus, const audio::ClipMeta& clip,
                                     audio::Emotion gamma);

double mean_squared_error(const nn::Tensor& a, const nn::Tensor& b);
// exp(-MSE); inputs are log-compressed, standardized spectrograms.
double reconstruction_similarity(const nn::Tensor& a, const nn::Tensor& b);

struct GanShape {
  int height = 128;
  int width = 297;
  int classes = 8;
  int hidden = 8;
};

// Encoder-decoder over standardized spectrograms. The target class enters
// as one-hot planes next to the image and as a learned per-bin output bias.
// The network predicts a correction added to the input image.
// Output is clamped from below at the per-bin value of zero log-power, so the
// de-standardized result is nonnegative.
class Generator {
 public:
  struct Cache {
    nn::Tensor input;  // image + one-hot planes
    nn::Tensor a1;
    nn::PoolResult p1;
    nn::Tensor a2;
    nn::Tensor decoder_input;  // upsampled features + image
    nn::Tensor raw;
    int target = 0;
  };

  Generator() = default;
  explicit Generator(const GanShape& shape);
  void init(std::uint64_t seed);
  nn::Tensor forward(const nn::Tensor& x, int target, Cache* cache = nullptr) const;
  // Accumulates parameter gradients. Returns dL/dx for the image input.
  nn::Tensor backward(const Cache& cache, const nn::Tensor& dout, bool need_input_grad);
  std::vector<nn::ParamRef> params();
  void zero_grad() { nn::zero_grads(params()); }
  const GanShape& shape() const { return shape_; }

  nn::Conv2d encoder;
  nn::Conv2d middle;
  nn::Conv2d decoder;
  std::vector<double> class_bias;  // [class][bin]
  std::vector<double> class_bias_grad;
  std::vector<double> floor;  // per mel bin, standardized units

 private:
  GanShape shape_;
};

// Real/fake critic: two conv blocks, global average pool, one logit.
class Discriminator {
 public:
  struct Cache {
    nn::Tensor input;
    nn::Tensor a1;
    nn::PoolResult p1;
    nn::Tensor a2;
    nn::PoolResult p2;
    std::vector<double> pooled;
  };

  Discriminator() = default;
  explicit Discriminator(int channels);
  void init(std::uint64_t seed);
  double forward(const nn::Tensor& x, Cache* cache = nullptr) const;
  nn::Tensor backward(const Cache& cache, double dlogit, bool need_input_grad);
  std::vector<nn::ParamRef> params();
  void zero_grad() { nn::zero_grads(params()); }

  nn::Conv2d conv1;
  nn::Conv2d conv2;
  nn::Dense out;
};

struct StarGanBundle {
  Generator G;
  Discriminator D;
  nn::CnnModel M;
};

struct GanHyper {
  int epochs = 10;
  int clips_per_epoch = 48;
  int batch_size = 8;
  double lr_generator = 0.02;  // Adam
  double lr_discriminator = 0.0005;
  double beta1 = 0.5;
  double lambda_cls = 1.0;
  double lambda_cyc = 10.0;
  int eval_clips = 16;
  int classifier_epochs = 10;
  std::uint64_t seed = 7;
};

struct GanEpoch {
  int epoch = 0;
  double d_loss = 0.0;
  double g_adv = 0.0;
  double g_cls = 0.0;
  double g_cyc = 0.0;
  double cycle_similarity = 0.0;  // mean exp(-MSE(x, G(G(x, gamma), y))) on a fixed subset
};

struct GanResult {
  StarGanBundle bundle;
  std::vector<nn::EpochRecord> classifier_trace;  // empty when M was supplied
  std::vector<GanEpoch> trace;
};

using GanCallback = std::function<void(const GanEpoch&)>;

// Trains the domain classifier M on the real clips, then G and D with
// alternating updates. Inputs are standardized spectrograms.
GanResult train_stargan(const nn::Dataset& train, const nn::Standardizer& norm,
                        const GanHyper& hyper, const GanCallback& on_epoch = {});
// Same, with an already trained domain classifier.
GanResult train_stargan(const nn::Dataset& train, const nn::Standardizer& norm,
                        nn::CnnModel classifier, const GanHyper& hyper,
                        const GanCallback& on_epoch = {});

// Standardized in, standardized out.
nn::Tensor synthesize(const StarGanBundle& bundle, const nn::Tensor& x, int target);

}  // namespace rexnet::counterfactual
