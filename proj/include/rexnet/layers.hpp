#pragma once

#include <span>
#include <string>
#include <vector>

#include "rexnet/tensor.hpp"

namespace rexnet::nn {

// Mutable view of one parameter array and its accumulated gradient.
struct ParamRef {
  std::string name;
  std::span<double> value;
  std::span<double> grad;
};

// 3x3 convolution, stride 1, zero padding 1 ("same"). Input (C, H, W).
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(int in_channels, int out_channels);

  void init_he(Rng& rng);
  Tensor forward(const Tensor& x) const;
  // Accumulates weight/bias gradients. Returns dL/dx when need_input_grad.
  Tensor backward(const Tensor& x, const Tensor& dy, bool need_input_grad);

  void append_params(const std::string& prefix, std::vector<ParamRef>& out);

  int in_channels = 0;
  int out_channels = 0;
  std::vector<double> weight;  // [out][in][3][3]
  std::vector<double> bias;
  std::vector<double> weight_grad;
  std::vector<double> bias_grad;
};

// Fully connected layer y = W x + b, W stored [out][in].
class Dense {
 public:
  Dense() = default;
  Dense(int in_features, int out_features);

  void init_he(Rng& rng);
  std::vector<double> forward(std::span<const double> x) const;
  std::vector<double> backward(std::span<const double> x, std::span<const double> dy,
                               bool need_input_grad);
  // Input gradient only; parameter gradients untouched.
  std::vector<double> input_grad(std::span<const double> dy) const;

  void append_params(const std::string& prefix, std::vector<ParamRef>& out);

  int in_features = 0;
  int out_features = 0;
  std::vector<double> weight;
  std::vector<double> bias;
  std::vector<double> weight_grad;
  std::vector<double> bias_grad;
};

// 2x2 max pool, stride 2, floor on odd sizes.
struct PoolResult {
  Tensor out;
  std::vector<int> argmax;  // flat input index per output element
};
PoolResult max_pool2(const Tensor& x);
Tensor max_pool2_backward(const Tensor& dy, const std::vector<int>& argmax,
                          const std::vector<int>& input_shape);

void relu_inplace(std::span<double> x);
// dy *= (y > 0), where y is the post-ReLU activation.
void relu_backward_inplace(std::span<double> dy, std::span<const double> y);

std::vector<double> softmax(std::span<const double> logits);
// Returns the loss; writes dL/dlogits into grad (resized as needed).
double softmax_cross_entropy(std::span<const double> logits, int label,
                             std::vector<double>& grad);

double sigmoid(double x);
// Mean binary cross-entropy over all bits, computed from logits for
// stability. grad receives dL/dlogit for each bit.
double sigmoid_bce(std::span<const double> logits, std::span<const double> targets,
                   std::vector<double>& grad);

int argmax(std::span<const double> v);

// SGD with classical momentum: v = mu v - lr g; p += v.
class Sgd {
 public:
  Sgd(std::vector<ParamRef> params, double lr, double momentum);
  // grad_scale multiplies gradients before the update (1/batch size).
  void step(double grad_scale);
  void zero_grad();
  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }

 private:
  std::vector<ParamRef> params_;
  std::vector<std::vector<double>> velocity_;
  double lr_;
  double momentum_;
};

// Adam with bias correction.
class Adam {
 public:
  Adam(std::vector<ParamRef> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);
  void step(double grad_scale);
  void zero_grad();

 private:
  std::vector<ParamRef> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  double lr_, beta1_, beta2_, eps_;
  long steps_ = 0;
};

void zero_grads(const std::vector<ParamRef>& params);

}  // namespace rexnet::nn
