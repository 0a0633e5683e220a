#include "rexnet/cnn.hpp"

#include <cmath>
#include <numeric>

#include "rexnet/error.hpp"

namespace rexnet::nn {

CnnModel::CnnModel(const CnnShape& shape)
    : conv1(shape.in_channels, shape.c1),
      conv2(shape.c1, shape.c2),
      conv3(shape.c2, shape.c3),
      fc1(shape.flat_size(), shape.embed),
      fc2(shape.embed, shape.classes),
      shape_(shape) {}

void CnnModel::init(std::uint64_t seed) {
  Rng rng(seed);
  conv1.init_he(rng);
  conv2.init_he(rng);
  conv3.init_he(rng);
  fc1.init_he(rng);
  fc2.init_he(rng);
}

CnnOutput CnnModel::forward(const Tensor& input, CnnCache* cache) const {
  if (input.rank() != 3 || input.dim(0) != shape_.in_channels || input.dim(1) != shape_.height ||
      input.dim(2) != shape_.width)
    throw ShapeError("cnn: input " + input.shape_string() + " does not match model geometry " +
                     std::to_string(shape_.in_channels) + "x" + std::to_string(shape_.height) +
                     "x" + std::to_string(shape_.width));
  CnnCache local;
  CnnCache& c = cache ? *cache : local;
  c.input = input;
  c.a1 = conv1.forward(input);
  relu_inplace(c.a1.span());
  c.p1 = max_pool2(c.a1);
  c.a2 = conv2.forward(c.p1.out);
  relu_inplace(c.a2.span());
  c.p2 = max_pool2(c.a2);
  c.a3 = conv3.forward(c.p2.out);
  relu_inplace(c.a3.span());
  c.p3 = max_pool2(c.a3);
  c.embedding = fc1.forward(c.p3.out.span());
  relu_inplace(c.embedding);
  c.logits = fc2.forward(c.embedding);
  return {c.logits, c.embedding};
}

Tensor CnnModel::backward(const CnnCache& c, std::span<const double> dlogits,
                          std::span<const double> dembedding, bool need_input_grad) {
  std::vector<double> de = fc2.backward(c.embedding, dlogits, true);
  if (!dembedding.empty())
    for (std::size_t i = 0; i < de.size(); ++i) de[i] += dembedding[i];
  relu_backward_inplace(de, c.embedding);
  std::vector<double> dflat = fc1.backward(c.p3.out.span(), de, true);

  Tensor dp3(c.p3.out.shape);
  dp3.data = std::move(dflat);
  Tensor da3 = max_pool2_backward(dp3, c.p3.argmax, c.a3.shape);
  relu_backward_inplace(da3.span(), c.a3.span());
  Tensor dp2 = conv3.backward(c.p2.out, da3, true);
  Tensor da2 = max_pool2_backward(dp2, c.p2.argmax, c.a2.shape);
  relu_backward_inplace(da2.span(), c.a2.span());
  Tensor dp1 = conv2.backward(c.p1.out, da2, true);
  Tensor da1 = max_pool2_backward(dp1, c.p1.argmax, c.a1.shape);
  relu_backward_inplace(da1.span(), c.a1.span());
  return conv1.backward(c.input, da1, need_input_grad);
}

Tensor CnnModel::final_conv_grad(const CnnCache& c, int class_index) const {
  std::vector<double> dlogits(static_cast<std::size_t>(shape_.classes), 0.0);
  dlogits.at(static_cast<std::size_t>(class_index)) = 1.0;
  std::vector<double> de = fc2.input_grad(dlogits);
  relu_backward_inplace(de, c.embedding);
  Tensor dp3(c.p3.out.shape);
  dp3.data = fc1.input_grad(de);
  return max_pool2_backward(dp3, c.p3.argmax, c.a3.shape);
}

std::vector<ParamRef> CnnModel::params() {
  std::vector<ParamRef> out;
  conv1.append_params("conv1", out);
  conv2.append_params("conv2", out);
  conv3.append_params("conv3", out);
  fc1.append_params("fc1", out);
  fc2.append_params("fc2", out);
  return out;
}

void CnnModel::zero_grad() { zero_grads(params()); }

std::size_t CnnModel::param_count() {
  std::size_t n = 0;
  for (const auto& p : params()) n += p.value.size();
  return n;
}

Standardizer Standardizer::fit(const std::vector<Tensor>& inputs) {
  if (inputs.empty()) throw Error("standardizer: no inputs to fit");
  const int H = inputs.front().dim(1), W = inputs.front().dim(2);
  Standardizer s;
  s.mean.assign(static_cast<std::size_t>(H), 0.0);
  s.stddev.assign(static_cast<std::size_t>(H), 0.0);
  const double n = static_cast<double>(inputs.size()) * W;
  for (const auto& x : inputs)
    for (int h = 0; h < H; ++h)
      for (int w = 0; w < W; ++w) s.mean[h] += x.at(0, h, w);
  for (double& m : s.mean) m /= n;
  for (const auto& x : inputs)
    for (int h = 0; h < H; ++h)
      for (int w = 0; w < W; ++w) {
        const double d = x.at(0, h, w) - s.mean[h];
        s.stddev[h] += d * d;
      }
  for (double& v : s.stddev) v = std::max(std::sqrt(v / n), 1e-6);
  return s;
}

Tensor Standardizer::apply(const Tensor& raw) const {
  Tensor out = raw;
  const int H = raw.dim(1), W = raw.dim(2);
  if (static_cast<std::size_t>(H) != mean.size())
    throw ShapeError("standardizer fitted for " + std::to_string(mean.size()) + " bins, got " +
                     raw.shape_string());
  for (int h = 0; h < H; ++h)
    for (int w = 0; w < W; ++w) out.at(0, h, w) = (raw.at(0, h, w) - mean[h]) / stddev[h];
  return out;
}

int predict(const CnnModel& model, const Tensor& input) {
  return argmax(model.forward(input).logits);
}

double accuracy(const CnnModel& model, const Dataset& data) {
  if (data.size() == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (predict(model, data.inputs[i]) == data.labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

TrainResult train_classifier(const Dataset& train, const Dataset& test, const CnnShape& shape,
                             const TrainHyper& hyper, const EpochCallback& on_epoch) {
  if (train.size() == 0) throw Error("train_classifier: empty training set");
  TrainResult result{CnnModel(shape), {}};
  CnnModel& model = result.model;
  model.init(hyper.seed);
  Sgd opt(model.params(), hyper.learning_rate, hyper.momentum);
  Rng order_rng(hyper.seed + 1);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  CnnCache cache;
  std::vector<double> dlogits;
  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    order_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      const std::size_t end = std::min(order.size(), start + hyper.batch_size);
      opt.zero_grad();
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = order[k];
        model.forward(train.inputs[i], &cache);
        const double loss = softmax_cross_entropy(cache.logits, train.labels[i], dlogits);
        if (!std::isfinite(loss))
          throw TrainingDiverged("classifier loss became non-finite at epoch " +
                                 std::to_string(epoch));
        loss_sum += loss;
        if (argmax(cache.logits) == train.labels[i]) ++correct;
        model.backward(cache, dlogits, {}, false);
      }
      opt.step(1.0 / static_cast<double>(end - start));
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train.size());
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(train.size());
    rec.test_accuracy = accuracy(model, test);
    result.trace.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

}  // namespace rexnet::nn
