#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rexnet/layers.hpp"
#include "rexnet/tensor.hpp"

namespace rexnet::nn {

// Geometry of the three-block CNN. Defaults match a standardized clip's
// mel spectrogram (128 bins x 297 frames) and the 8-way emotion task.
struct CnnShape {
  int height = 128;
  int width = 297;
  int in_channels = 1;
  int c1 = 8;
  int c2 = 16;
  int c3 = 32;
  int embed = 64;
  int classes = 8;

  int flat_size() const { return c3 * (height / 2 / 2 / 2) * (width / 2 / 2 / 2); }
  bool operator==(const CnnShape&) const = default;
};

// Activations kept from a forward pass, needed by backward and Grad-CAM.
struct CnnCache {
  Tensor input;
  Tensor a1, a2, a3;  // post-ReLU conv outputs (pre-pool)
  PoolResult p1, p2, p3;
  std::vector<double> embedding;  // post-ReLU dense-1 output
  std::vector<double> logits;
};

struct CnnOutput {
  std::vector<double> logits;
  std::vector<double> embedding;
};

// conv-relu-pool x3 -> flatten -> dense(embed)+ReLU -> dense(classes).
class CnnModel {
 public:
  CnnModel() = default;
  explicit CnnModel(const CnnShape& shape);

  void init(std::uint64_t seed);
  const CnnShape& shape() const { return shape_; }

  CnnOutput forward(const Tensor& input, CnnCache* cache = nullptr) const;
  // Accumulates parameter gradients from dL/dlogits plus an optional extra
  // gradient arriving at the embedding. Returns dL/dinput when requested.
  Tensor backward(const CnnCache& cache, std::span<const double> dlogits,
                  std::span<const double> dembedding, bool need_input_grad);

  // d logit[class] / d a3 without touching parameter gradients.
  Tensor final_conv_grad(const CnnCache& cache, int class_index) const;

  std::vector<ParamRef> params();
  void zero_grad();
  std::size_t param_count();

  Conv2d conv1, conv2, conv3;
  Dense fc1, fc2;

 private:
  CnnShape shape_;
};

// Per-mel-bin standardization fitted on the training split.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;

  static Standardizer fit(const std::vector<Tensor>& inputs);
  Tensor apply(const Tensor& raw) const;
  bool empty() const { return mean.empty(); }
};

struct Dataset {
  std::vector<Tensor> inputs;
  std::vector<int> labels;
  std::size_t size() const { return inputs.size(); }
};

struct TrainHyper {
  int epochs = 30;
  int batch_size = 16;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::uint64_t seed = 7;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

struct TrainResult {
  CnnModel model;
  std::vector<EpochRecord> trace;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Mini-batch SGD with momentum on softmax cross-entropy. Inputs are expected
// to be standardized already. Throws TrainingDiverged on a non-finite loss.
TrainResult train_classifier(const Dataset& train, const Dataset& test, const CnnShape& shape,
                             const TrainHyper& hyper, const EpochCallback& on_epoch = {});

int predict(const CnnModel& model, const Tensor& input);
double accuracy(const CnnModel& model, const Dataset& data);

}  // namespace rexnet::nn
