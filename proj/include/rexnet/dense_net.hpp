#pragma once

#include <span>
#include <vector>

#include "rexnet/layers.hpp"

namespace rexnet::nn {

// Stack of dense layers with ReLU between them (none after the last).
class DenseNet {
 public:
  DenseNet() = default;
  explicit DenseNet(const std::vector<int>& widths);  // {in, hidden..., out}

  void init(std::uint64_t seed);
  int input_size() const { return layers.empty() ? 0 : layers.front().in_features; }
  int output_size() const { return layers.empty() ? 0 : layers.back().out_features; }

  // activations (optional) receives the input followed by each layer's output
  // (post-ReLU for hidden layers, raw for the last).
  std::vector<double> forward(std::span<const double> x,
                              std::vector<std::vector<double>>* activations = nullptr) const;
  // Accumulates parameter gradients; returns dL/dx.
  std::vector<double> backward(const std::vector<std::vector<double>>& activations,
                               std::span<const double> dout);

  std::vector<ParamRef> params(const std::string& prefix = "dense");
  void zero_grad();

  std::vector<Dense> layers;
};

// LRP-epsilon: relevance of each input for output[output_index], starting
// from the raw logit. Stabilizer is eps * sign(z).
std::vector<double> lrp_epsilon(const DenseNet& net, std::span<const double> input,
                                int output_index, double eps = 1e-6);

}  // namespace rexnet::nn
