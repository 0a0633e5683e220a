#include "rexnet/dense_net.hpp"

#include "rexnet/error.hpp"

namespace rexnet::nn {

DenseNet::DenseNet(const std::vector<int>& widths) {
  if (widths.size() < 2) throw Error("DenseNet needs at least input and output widths");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) layers.emplace_back(widths[i], widths[i + 1]);
}

void DenseNet::init(std::uint64_t seed) {
  Rng rng(seed);
  for (auto& l : layers) l.init_he(rng);
}

std::vector<double> DenseNet::forward(std::span<const double> x,
                                      std::vector<std::vector<double>>* acts) const {
  std::vector<double> a(x.begin(), x.end());
  if (acts) {
    acts->clear();
    acts->push_back(a);
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    a = layers[i].forward(a);
    if (i + 1 < layers.size()) relu_inplace(a);
    if (acts) acts->push_back(a);
  }
  return a;
}

std::vector<double> DenseNet::backward(const std::vector<std::vector<double>>& acts,
                                       std::span<const double> dout) {
  std::vector<double> d(dout.begin(), dout.end());
  for (std::size_t i = layers.size(); i-- > 0;) {
    if (i + 1 < layers.size()) relu_backward_inplace(d, acts[i + 1]);
    d = layers[i].backward(acts[i], d, true);
  }
  return d;
}

std::vector<ParamRef> DenseNet::params(const std::string& prefix) {
  std::vector<ParamRef> out;
  for (std::size_t i = 0; i < layers.size(); ++i)
    layers[i].append_params(prefix + "." + std::to_string(i), out);
  return out;
}

void DenseNet::zero_grad() { zero_grads(params()); }

std::vector<double> lrp_epsilon(const DenseNet& net, std::span<const double> input,
                                int output_index, double eps) {
  std::vector<std::vector<double>> acts;
  const auto out = net.forward(input, &acts);
  if (output_index < 0 || output_index >= static_cast<int>(out.size()))
    throw Error("lrp_epsilon: output index out of range");
  std::vector<double> relevance(out.size(), 0.0);
  relevance[static_cast<std::size_t>(output_index)] = out[static_cast<std::size_t>(output_index)];

  for (std::size_t li = net.layers.size(); li-- > 0;) {
    const Dense& layer = net.layers[li];
    const auto& a = acts[li];
    const int n_in = layer.in_features, n_out = layer.out_features;
    std::vector<double> next(static_cast<std::size_t>(n_in), 0.0);
    for (int j = 0; j < n_out; ++j) {
      if (relevance[j] == 0.0) continue;
      const double* w = layer.weight.data() + static_cast<std::size_t>(j) * n_in;
      double z = layer.bias[j];
      for (int i = 0; i < n_in; ++i) z += a[i] * w[i];
      const double denom = z + (z >= 0.0 ? eps : -eps);
      const double s = relevance[j] / denom;
      for (int i = 0; i < n_in; ++i) next[i] += a[i] * w[i] * s;
    }
    relevance = std::move(next);
  }
  return relevance;
}

}  // namespace rexnet::nn
