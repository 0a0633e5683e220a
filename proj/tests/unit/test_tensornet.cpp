#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>

#include "rexnet/checkpoint.hpp"
#include "rexnet/cnn.hpp"
#include "rexnet/dense_net.hpp"
#include "rexnet/error.hpp"
#include "rexnet/gradcam.hpp"
#include "rexnet/gradcheck.hpp"

using namespace rexnet;
using namespace rexnet::nn;

namespace {

CnnShape tiny_shape(int classes = 4) {
  CnnShape s;
  s.height = 16;
  s.width = 24;
  s.c1 = 3;
  s.c2 = 4;
  s.c3 = 5;
  s.embed = 6;
  s.classes = classes;
  return s;
}

Tensor random_input(const CnnShape& s, Rng& rng) {
  Tensor x({1, s.height, s.width});
  for (double& v : x.data) v = rng.normal();
  return x;
}

// Class k has a bright horizontal band at rows [3k, 3k+3).
Dataset band_dataset(const CnnShape& s, int per_class, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  for (int k = 0; k < s.classes; ++k)
    for (int i = 0; i < per_class; ++i) {
      Tensor x({1, s.height, s.width});
      for (double& v : x.data) v = 0.3 * rng.normal();
      for (int h = 3 * k; h < 3 * k + 3; ++h)
        for (int w = 0; w < s.width; ++w) x.at(0, h, w) += 1.5;
      d.inputs.push_back(std::move(x));
      d.labels.push_back(k);
    }
  return d;
}

}  // namespace

TEST_CASE("forward: softmax normalization, zero model, determinism, shape errors") {
  CnnShape s = tiny_shape(8);
  CnnModel m(s);
  m.init(3);
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    auto out = m.forward(random_input(s, rng));
    auto p = softmax(out.logits);
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(out.embedding.size() == 6u);
  }

  CnnModel zero(s);
  auto pz = softmax(zero.forward(random_input(s, rng)).logits);
  for (double v : pz) CHECK(v == doctest::Approx(0.125).epsilon(1e-12));

  CnnModel a(s), b(s);
  a.init(42);
  b.init(42);
  Tensor x = random_input(s, rng);
  CHECK(a.forward(x).logits == b.forward(x).logits);

  CHECK_THROWS_AS(m.forward(Tensor({1, 10, 10})), ShapeError);
}

TEST_CASE("default geometry matches the spectrogram contract") {
  CnnShape s;
  CHECK(s.flat_size() == 32 * 16 * 37);
  CnnModel m(s);
  m.init(1);
  Tensor x({1, 128, 297}, 0.1);
  auto out = m.forward(x);
  CHECK(out.logits.size() == 8u);
  CHECK(out.embedding.size() == 64u);
}

TEST_CASE("cross-entropy is non-negative and zero only at a perfect one-hot") {
  std::vector<double> g;
  CHECK(softmax_cross_entropy(std::vector<double>{1.0, 2.0, 0.5}, 1, g) > 0.0);
  CHECK(softmax_cross_entropy(std::vector<double>{0.0, 800.0, 0.0}, 1, g) == doctest::Approx(0.0));
  CHECK(softmax_cross_entropy(std::vector<double>{0.0, 0.0}, 0, g) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("training on a separable task: monotone loss, high accuracy; untrained near chance") {
  CnnShape s = tiny_shape(4);
  Dataset train = band_dataset(s, 12, 1);
  Dataset test = band_dataset(s, 4, 2);
  CnnModel untrained(s);
  untrained.init(9);
  CHECK(accuracy(untrained, test) <= 0.5);
  CnnModel zero(s);
  CHECK(accuracy(zero, test) == doctest::Approx(0.25));

  TrainHyper hp;
  hp.epochs = 12;
  hp.batch_size = 8;
  hp.seed = 3;
  TrainResult r = train_classifier(train, test, s, hp);
  REQUIRE(r.trace.size() == 12u);
  int non_monotone = 0;
  for (std::size_t e = 1; e < r.trace.size(); ++e)
    non_monotone += r.trace[e].train_loss > r.trace[e - 1].train_loss;
  CHECK(non_monotone <= 2);
  CHECK(accuracy(r.model, train) >= 0.9);
  CHECK(accuracy(r.model, test) >= 0.9);

  TrainResult again = train_classifier(train, test, s, hp);
  CHECK(again.trace.back().train_loss == r.trace.back().train_loss);
}

TEST_CASE("non-finite loss aborts training") {
  CnnShape s = tiny_shape(4);
  Dataset train = band_dataset(s, 4, 1);
  train.inputs[5].data[7] = std::numeric_limits<double>::quiet_NaN();
  TrainHyper hp;
  hp.epochs = 2;
  CHECK_THROWS_AS(train_classifier(train, train, s, hp), TrainingDiverged);
}

TEST_CASE("class activation on a hand-built two-channel 4x4 map") {
  Tensor acts({2, 4, 4});
  for (int i = 0; i < 4; ++i) acts.at(0, i, i) = i + 1;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) acts.at(1, i, j) = 1.0;
  acts.at(1, 0, 3) = 5.0;
  Tensor grads({2, 4, 4});
  for (int i = 0; i < 16; ++i) {
    grads.data[i] = 0.5;
    grads.data[16 + i] = -0.25;
  }
  auto cam = class_activation(acts, grads);
  minmax_normalize(cam);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      const double expected = i == j ? (2.0 * i + 1.0) / 7.0 : 0.0;
      CHECK(cam[i * 4 + j] == doctest::Approx(expected).epsilon(1e-12));
    }

  std::vector<double> flat(10, 0.7);
  minmax_normalize(flat);
  for (double v : flat) CHECK(v == 0.0);
}

TEST_CASE("Grad-CAM peaks where a single positive channel peaks") {
  CnnShape s;
  s.height = 16;
  s.width = 32;
  s.c1 = s.c2 = s.c3 = 1;
  s.embed = 1;
  s.classes = 2;
  CnnModel m(s);
  for (Conv2d* c : {&m.conv1, &m.conv2, &m.conv3}) c->weight[4] = 1.0;  // identity kernels
  std::fill(m.fc1.weight.begin(), m.fc1.weight.end(), 1.0);
  m.fc2.weight = {1.0, -1.0};
  const int t_star = 21;
  Tensor x({1, 16, 32}, 0.1);
  for (int h = 0; h < 16; ++h) x.at(0, h, t_star) = 5.0;
  CnnCache cache;
  m.forward(x, &cache);
  SaliencyMap cam = grad_cam(m, cache, 0);
  int best = 0;
  double best_v = -1;
  for (int t = 0; t < 32; ++t)
    if (cam.at(8, t) > best_v) best_v = cam.at(8, t), best = t;
  CHECK(best / 4 == t_star / 4);
  for (double v : cam.values) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("Grad-CAM is bounded and invariant to positive output scaling") {
  CnnShape s = tiny_shape(4);
  CnnModel m(s);
  m.init(11);
  Rng rng(2);
  Tensor x = random_input(s, rng);
  CnnCache cache;
  m.forward(x, &cache);
  SaliencyMap a = grad_cam(m, cache, 1);
  for (double v : a.values) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CnnModel scaled = m;
  for (double& w : scaled.fc2.weight) w *= 3.5;
  scaled.forward(x, &cache);
  SaliencyMap b = grad_cam(scaled, cache, 1);
  for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(b.values[i] == doctest::Approx(a.values[i]).epsilon(1e-9));
}

TEST_CASE("LRP-epsilon on a single linear layer equals w_i x_i") {
  DenseNet net({4, 1});
  net.layers[0].weight = {0.5, -1.0, 2.0, 0.25};
  const std::vector<double> x{1.0, 2.0, -0.5, 4.0};
  auto r = lrp_epsilon(net, x, 0, 1e-6);
  const double y = 0.5 - 2.0 - 1.0 + 1.0;
  double sum = 0.0;
  for (int i = 0; i < 4; ++i) {
    CHECK(r[i] == doctest::Approx(net.layers[0].weight[i] * x[i]).epsilon(1e-5));
    sum += r[i];
  }
  CHECK(sum == doctest::Approx(y).epsilon(1e-5));

  auto z = lrp_epsilon(net, std::vector<double>(4, 0.0), 0);
  for (double v : z) CHECK(v == 0.0);
}

TEST_CASE("LRP-epsilon on a two-layer toy net matches hand-unrolled propagation") {
  DenseNet net({3, 3, 2});
  net.layers[0].weight = {1.0, -0.5, 0.2, 0.3, 0.8, -1.0, -0.7, 0.4, 0.9};
  net.layers[0].bias = {0.1, -0.2, 0.05};
  net.layers[1].weight = {0.6, -0.4, 1.1, -0.3, 0.7, 0.2};
  net.layers[1].bias = {0.0, 0.1};
  const double eps = 1e-6;
  const std::vector<double> x{0.9, -0.3, 0.5};

  // Manual: hidden pre-activations, ReLU, output, then epsilon rule twice.
  double z1[3], a1[3];
  for (int j = 0; j < 3; ++j) {
    z1[j] = net.layers[0].bias[j];
    for (int i = 0; i < 3; ++i) z1[j] += net.layers[0].weight[j * 3 + i] * x[i];
    a1[j] = z1[j] > 0 ? z1[j] : 0.0;
  }
  const int out = 0;
  double z2 = net.layers[1].bias[out];
  for (int j = 0; j < 3; ++j) z2 += net.layers[1].weight[out * 3 + j] * a1[j];
  double r1[3];
  for (int j = 0; j < 3; ++j) r1[j] = a1[j] * net.layers[1].weight[out * 3 + j] / (z2 + (z2 >= 0 ? eps : -eps)) * z2;
  double r0[3] = {0, 0, 0};
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i)
      r0[i] += x[i] * net.layers[0].weight[j * 3 + i] / (z1[j] + (z1[j] >= 0 ? eps : -eps)) * r1[j];

  auto r = lrp_epsilon(net, x, out, eps);
  for (int i = 0; i < 3; ++i) CHECK(r[i] == doctest::Approx(r0[i]).epsilon(1e-12));
}

TEST_CASE("LRP-epsilon conserves relevance on bias-free two-layer nets") {
  Rng rng(17);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    DenseNet net({6, 8, 3});
    net.init(100 + trial);
    std::vector<double> x(6);
    for (double& v : x) v = rng.normal();
    const auto logits = net.forward(x);
    const int k = argmax(logits);
    if (std::abs(logits[k]) < 1e-3) continue;
    auto r = lrp_epsilon(net, x, k, 1e-6);
    const double sum = std::accumulate(r.begin(), r.end(), 0.0);
    CHECK(std::abs(sum - logits[k]) <= 1e-3 * std::abs(logits[k]));
    ++checked;
  }
  CHECK(checked > 150);
}

TEST_CASE("gradient check: dense + softmax cross-entropy") {
  Dense layer(7, 5);
  Rng rng(4);
  layer.init_he(rng);
  for (double& b : layer.bias) b = rng.normal() * 0.1;
  std::vector<double> x(7);
  for (double& v : x) v = rng.normal();
  std::vector<ParamRef> params;
  layer.append_params("dense", params);
  std::vector<double> g;
  auto loss = [&] { return softmax_cross_entropy(layer.forward(x), 2, g); };
  auto grads = [&] {
    softmax_cross_entropy(layer.forward(x), 2, g);
    layer.backward(x, g, false);
  };
  auto r = grad_check(params, loss, grads, 50, 1e-4, 1e-3, 9);
  CHECK(r.checked == 50);
  CHECK(r.max_relative_error < 1e-3);
  CHECK(r.passed());
}

TEST_CASE("gradient check: convolution layer") {
  Conv2d conv(2, 3);
  Rng rng(6);
  conv.init_he(rng);
  for (double& b : conv.bias) b = rng.normal() * 0.1;
  Tensor x({2, 7, 9});
  for (double& v : x.data) v = rng.normal();
  Tensor proj({3, 7, 9});
  for (double& v : proj.data) v = rng.normal();
  // Smooth objective: <proj, y> + 0.5 |y|^2
  auto loss = [&] {
    Tensor y = conv.forward(x);
    double l = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) l += proj.data[i] * y.data[i] + 0.5 * y.data[i] * y.data[i];
    return l;
  };
  std::vector<ParamRef> params;
  conv.append_params("conv", params);
  auto grads = [&] {
    Tensor y = conv.forward(x);
    Tensor dy(y.shape);
    for (std::size_t i = 0; i < y.size(); ++i) dy.data[i] = proj.data[i] + y.data[i];
    conv.backward(x, dy, false);
  };
  auto r = grad_check(params, loss, grads, 50, 1e-4, 1e-3, 2);
  CHECK(r.checked == 50);
  CHECK(r.max_relative_error < 1e-3);

  // Input gradient via finite differences on a few entries.
  Tensor y = conv.forward(x);
  Tensor dy(y.shape);
  for (std::size_t i = 0; i < y.size(); ++i) dy.data[i] = proj.data[i] + y.data[i];
  Tensor dx = conv.backward(x, dy, true);
  for (std::size_t idx : {0u, 17u, 63u, 125u}) {
    const double saved = x.data[idx];
    x.data[idx] = saved + 1e-5;
    const double up = loss();
    x.data[idx] = saved - 1e-5;
    const double down = loss();
    x.data[idx] = saved;
    CHECK(dx.data[idx] == doctest::Approx((up - down) / 2e-5).epsilon(1e-5));
  }
}

TEST_CASE("gradient check: zero input leaves an exact bias-only path") {
  Dense layer(4, 3);
  Rng rng(8);
  layer.init_he(rng);
  const std::vector<double> x(4, 0.0);
  const std::vector<double> target{0.3, -0.2, 0.7};
  auto loss = [&] {
    auto y = layer.forward(x);
    double l = 0.0;
    for (int i = 0; i < 3; ++i) l += target[i] * y[i];
    return l;
  };
  std::vector<ParamRef> params;
  layer.append_params("dense", params);
  auto grads = [&] { layer.backward(x, target, false); };
  auto r = grad_check(params, loss, grads, 50, 1e-4, 1e-3, 3);
  CHECK(r.max_absolute_error < 1e-6);
  for (double g : layer.weight_grad) CHECK(g == 0.0);
}

TEST_CASE("gradient check: whole tiny CNN and dense head") {
  CnnShape s = tiny_shape(4);
  CnnModel m(s);
  m.init(21);
  Rng rng(1);
  Tensor x = random_input(s, rng);
  std::vector<double> g;
  std::vector<double> extra(6, 0.0);
  for (double& v : extra) v = rng.normal() * 0.1;
  auto loss = [&] {
    auto out = m.forward(x);
    double l = softmax_cross_entropy(out.logits, 1, g);
    for (int i = 0; i < 6; ++i) l += extra[i] * out.embedding[i];
    return l;
  };
  auto grads = [&] {
    CnnCache c;
    m.forward(x, &c);
    softmax_cross_entropy(c.logits, 1, g);
    m.backward(c, g, extra, false);
  };
  auto r = grad_check(m.params(), loss, grads, 80, 1e-5, 1e-3, 5);
  CHECK(r.max_relative_error < 1e-3);
  for (const auto& o : r.offenders) MESSAGE(o);

  DenseNet head({5, 4, 3});
  head.init(2);
  std::vector<double> hx{0.5, -1.0, 0.2, 0.9, -0.3};
  auto hloss = [&] { return softmax_cross_entropy(head.forward(hx), 0, g); };
  auto hgrads = [&] {
    std::vector<std::vector<double>> acts;
    softmax_cross_entropy(head.forward(hx, &acts), 0, g);
    head.backward(acts, g);
  };
  CHECK(grad_check(head.params(), hloss, hgrads, 50).max_relative_error < 1e-3);
}

TEST_CASE("sigmoid BCE gradient and bounds") {
  std::vector<double> logits{-2.0, 0.5, 3.0}, targets{0.0, 1.0, 1.0}, g;
  const double l = sigmoid_bce(logits, targets, g);
  CHECK(l > 0.0);
  for (int i = 0; i < 3; ++i) {
    auto lp = logits, lm = logits;
    lp[i] += 1e-6;
    lm[i] -= 1e-6;
    std::vector<double> tmp;
    CHECK(g[i] == doctest::Approx((sigmoid_bce(lp, targets, tmp) - sigmoid_bce(lm, targets, tmp)) / 2e-6).epsilon(1e-6));
  }
  CHECK(sigmoid(30.0) < 1.0);
  CHECK(sigmoid(-700.0) > 0.0);
}

TEST_CASE("checkpoint round trip is exact and byte-stable") {
  namespace fs = std::filesystem;
  CnnShape s = tiny_shape(3);
  CnnModel m(s);
  m.init(77);
  DenseNet head({4, 3});
  head.init(5);
  Standardizer st{{1.0, 2.0}, {0.5, 0.25}};
  Archive ar;
  ar.put_meta("kind", "test");
  store(ar, "m0", m);
  store(ar, "head", head);
  store(ar, "norm", st);
  const fs::path dir = fs::temp_directory_path() / "rexnet_ckpt_test";
  fs::create_directories(dir);
  ar.save(dir / "a.rxn");
  Archive back = Archive::load(dir / "a.rxn");
  back.save(dir / "b.rxn");
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  CHECK(slurp(dir / "a.rxn") == slurp(dir / "b.rxn"));
  CHECK(back.meta("kind") == "test");

  CnnModel m2 = load_cnn(back, "m0");
  CHECK(m2.shape() == s);
  Rng rng(3);
  Tensor x = random_input(s, rng);
  CHECK(m2.forward(x).logits == m.forward(x).logits);
  DenseNet h2 = load_dense(back, "head");
  CHECK(h2.forward(std::vector<double>{1, 2, 3, 4}) == head.forward(std::vector<double>{1, 2, 3, 4}));
  CHECK(load_standardizer(back, "norm").stddev == st.stddev);

  std::ofstream(dir / "bad.rxn") << "RXNTCKPT garbage";
  CHECK_THROWS(Archive::load(dir / "bad.rxn"));
  CHECK_THROWS(back.get("missing"));
  fs::remove_all(dir);
}
