#include "rexnet/counterfactual.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "rexnet/error.hpp"

namespace rexnet::counterfactual {

using nn::Tensor;

const audio::ClipMeta& select_sample(const audio::Corpus& corpus, const audio::ClipMeta& clip,
                                     audio::Emotion gamma) {
  if (gamma == clip.emotion)
    throw Error("select_sample: contrast emotion equals the clip's own emotion (" +
                std::string(audio::emotion_name(gamma)) + ")");
  const audio::ClipMeta* best = nullptr;
  auto key = [&](const audio::ClipMeta& m) {
    return std::make_tuple(m.intensity != clip.intensity, m.repetition != clip.repetition,
                           std::string_view(m.clip_id));
  };
  for (const auto& c : corpus.clips) {
    const auto& m = c.meta;
    if (m.actor != clip.actor || m.statement != clip.statement || m.emotion != gamma) continue;
    if (!best || key(m) < key(*best)) best = &m;
  }
  if (!best)
    throw NoCounterfactual("no clip of actor " + std::to_string(clip.actor) + ", statement " +
                           std::to_string(clip.statement) + " portraying " +
                           std::string(audio::emotion_name(gamma)));
  return *best;
}

double mean_squared_error(const Tensor& a, const Tensor& b) {
  if (a.shape != b.shape)
    throw ShapeError("mean_squared_error: " + a.shape_string() + " vs " + b.shape_string());
  if (a.size() == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    sum += d * d;
  }
  return sum / static_cast<double>(a.size());
}

double reconstruction_similarity(const Tensor& a, const Tensor& b) {
  return std::exp(-mean_squared_error(a, b));
}

// ---- Generator ----

Generator::Generator(const GanShape& shape)
    : encoder(1 + shape.classes, shape.hidden),
      middle(shape.hidden, shape.hidden),
      decoder(shape.hidden + 1, 1),
      class_bias(static_cast<std::size_t>(shape.classes) * shape.height, 0.0),
      class_bias_grad(class_bias.size(), 0.0),
      floor(static_cast<std::size_t>(shape.height), -1e300),
      shape_(shape) {}

void Generator::init(std::uint64_t seed) {
  nn::Rng rng(seed);
  encoder.init_he(rng);
  middle.init_he(rng);
  decoder.init_he(rng);
}

Tensor Generator::forward(const Tensor& x, int target, Cache* cache) const {
  const int H = shape_.height, W = shape_.width, C = shape_.classes, K = shape_.hidden;
  if (x.rank() != 3 || x.dim(0) != 1 || x.dim(1) != H || x.dim(2) != W)
    throw ShapeError("generator: input " + x.shape_string() + " does not match " +
                     std::to_string(H) + "x" + std::to_string(W));
  if (target < 0 || target >= C) throw Error("generator: target class out of range");
  Cache local;
  Cache& c = cache ? *cache : local;
  const std::size_t hw = static_cast<std::size_t>(H) * W;

  c.target = target;
  c.input = Tensor({1 + C, H, W});
  std::copy(x.data.begin(), x.data.end(), c.input.data.begin());
  std::fill_n(c.input.data.begin() + static_cast<std::ptrdiff_t>((1 + target) * hw), hw, 1.0);

  c.a1 = encoder.forward(c.input);
  nn::relu_inplace(c.a1.span());
  c.p1 = nn::max_pool2(c.a1);
  c.a2 = middle.forward(c.p1.out);
  nn::relu_inplace(c.a2.span());

  // Nearest upsample back to (H, W), clamping at the pooled edge.
  const int h2 = c.a2.dim(1), w2 = c.a2.dim(2);
  c.decoder_input = Tensor({K + 1, H, W});
  for (int k = 0; k < K; ++k)
    for (int h = 0; h < H; ++h) {
      const int sh = std::min(h / 2, h2 - 1);
      for (int w = 0; w < W; ++w) c.decoder_input.at(k, h, w) = c.a2.at(k, sh, std::min(w / 2, w2 - 1));
    }
  std::copy(x.data.begin(), x.data.end(), c.decoder_input.data.begin() + static_cast<std::ptrdiff_t>(K * hw));

  c.raw = decoder.forward(c.decoder_input);
  const double* cb = class_bias.data() + static_cast<std::size_t>(target) * H;
  for (int h = 0; h < H; ++h)
    for (int w = 0; w < W; ++w) c.raw.at(0, h, w) += x.at(0, h, w) + cb[h];
  Tensor out = c.raw;
  for (int h = 0; h < H; ++h)
    for (int w = 0; w < W; ++w) out.at(0, h, w) = std::max(out.at(0, h, w), floor[h]);
  return out;
}

Tensor Generator::backward(const Cache& c, const Tensor& dout, bool need_input_grad) {
  const int H = shape_.height, W = shape_.width, K = shape_.hidden;
  const std::size_t hw = static_cast<std::size_t>(H) * W;
  Tensor draw = dout;
  for (int h = 0; h < H; ++h)
    for (int w = 0; w < W; ++w)
      if (c.raw.at(0, h, w) <= floor[h]) draw.at(0, h, w) = 0.0;
  double* cbg = class_bias_grad.data() + static_cast<std::size_t>(c.target) * H;
  for (int h = 0; h < H; ++h)
    for (int w = 0; w < W; ++w) cbg[h] += draw.at(0, h, w);

  Tensor ddec = decoder.backward(c.decoder_input, draw, true);
  Tensor da2(c.a2.shape);
  const int h2 = c.a2.dim(1), w2 = c.a2.dim(2);
  for (int k = 0; k < K; ++k)
    for (int h = 0; h < H; ++h) {
      const int sh = std::min(h / 2, h2 - 1);
      for (int w = 0; w < W; ++w) da2.at(k, sh, std::min(w / 2, w2 - 1)) += ddec.at(k, h, w);
    }
  nn::relu_backward_inplace(da2.span(), c.a2.span());
  Tensor dp1 = middle.backward(c.p1.out, da2, true);
  Tensor da1 = nn::max_pool2_backward(dp1, c.p1.argmax, c.a1.shape);
  nn::relu_backward_inplace(da1.span(), c.a1.span());
  Tensor dinput = encoder.backward(c.input, da1, need_input_grad);
  if (!need_input_grad) return {};

  Tensor dx({1, H, W});
  for (std::size_t i = 0; i < hw; ++i) dx.data[i] = dinput.data[i] + ddec.data[K * hw + i] + draw.data[i];
  return dx;
}

std::vector<nn::ParamRef> Generator::params() {
  std::vector<nn::ParamRef> out;
  encoder.append_params("encoder", out);
  middle.append_params("middle", out);
  decoder.append_params("decoder", out);
  out.push_back({"class_bias", class_bias, class_bias_grad});
  return out;
}

// ---- Discriminator ----

Discriminator::Discriminator(int channels)
    : conv1(1, channels), conv2(channels, 2 * channels), out(2 * channels, 1) {}

void Discriminator::init(std::uint64_t seed) {
  nn::Rng rng(seed);
  conv1.init_he(rng);
  conv2.init_he(rng);
  out.init_he(rng);
}

double Discriminator::forward(const Tensor& x, Cache* cache) const {
  Cache local;
  Cache& c = cache ? *cache : local;
  c.input = x;
  c.a1 = conv1.forward(x);
  nn::relu_inplace(c.a1.span());
  c.p1 = nn::max_pool2(c.a1);
  c.a2 = conv2.forward(c.p1.out);
  nn::relu_inplace(c.a2.span());
  c.p2 = nn::max_pool2(c.a2);
  const int K = c.p2.out.dim(0);
  const std::size_t area = static_cast<std::size_t>(c.p2.out.dim(1)) * c.p2.out.dim(2);
  c.pooled.assign(static_cast<std::size_t>(K), 0.0);
  for (int k = 0; k < K; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < area; ++i) s += c.p2.out.data[k * area + i];
    c.pooled[k] = s / static_cast<double>(area);
  }
  return out.forward(c.pooled)[0];
}

Tensor Discriminator::backward(const Cache& c, double dlogit, bool need_input_grad) {
  const std::vector<double> dl{dlogit};
  std::vector<double> dpooled = out.backward(c.pooled, dl, true);
  Tensor dp2(c.p2.out.shape);
  const int K = dp2.dim(0);
  const std::size_t area = static_cast<std::size_t>(dp2.dim(1)) * dp2.dim(2);
  for (int k = 0; k < K; ++k)
    std::fill_n(dp2.data.begin() + static_cast<std::ptrdiff_t>(k * area), area,
                dpooled[k] / static_cast<double>(area));
  Tensor da2 = nn::max_pool2_backward(dp2, c.p2.argmax, c.a2.shape);
  nn::relu_backward_inplace(da2.span(), c.a2.span());
  Tensor dp1 = conv2.backward(c.p1.out, da2, true);
  Tensor da1 = nn::max_pool2_backward(dp1, c.p1.argmax, c.a1.shape);
  nn::relu_backward_inplace(da1.span(), c.a1.span());
  return conv1.backward(c.input, da1, need_input_grad);
}

std::vector<nn::ParamRef> Discriminator::params() {
  std::vector<nn::ParamRef> p;
  conv1.append_params("conv1", p);
  conv2.append_params("conv2", p);
  out.append_params("out", p);
  return p;
}

// ---- Training ----

namespace {

double bce_logit(double logit, double target, double& grad) {
  std::vector<double> g;
  const double l = nn::sigmoid_bce(std::vector<double>{logit}, std::vector<double>{target}, g);
  grad = g[0];
  return l;
}

int other_class(int y, int classes, nn::Rng& rng) {
  const int k = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes - 1)));
  return k >= y ? k + 1 : k;
}

int count_classes(const nn::Dataset& d) {
  int classes = 0;
  for (int y : d.labels) classes = std::max(classes, y + 1);
  return std::max(classes, 2);
}

void check_finite(double v, const char* what, int epoch) {
  if (!std::isfinite(v))
    throw TrainingDiverged(std::string("stargan: ") + what + " became non-finite at epoch " +
                           std::to_string(epoch));
}

}  // namespace

Tensor synthesize(const StarGanBundle& bundle, const Tensor& x, int target) {
  return bundle.G.forward(x, target);
}

GanResult train_stargan(const nn::Dataset& train, const nn::Standardizer& norm,
                        const GanHyper& hyper, const GanCallback& on_epoch) {
  if (train.size() < 2) throw Error("train_stargan: need at least two training clips");
  nn::CnnShape m_shape;
  m_shape.height = train.inputs.front().dim(1);
  m_shape.width = train.inputs.front().dim(2);
  m_shape.classes = count_classes(train);
  nn::TrainHyper m_hyper;
  m_hyper.epochs = hyper.classifier_epochs;
  m_hyper.seed = hyper.seed + 101;
  nn::TrainResult classifier = nn::train_classifier(train, {}, m_shape, m_hyper);
  GanResult result = train_stargan(train, norm, std::move(classifier.model), hyper, on_epoch);
  result.classifier_trace = std::move(classifier.trace);
  return result;
}

GanResult train_stargan(const nn::Dataset& train, const nn::Standardizer& norm,
                        nn::CnnModel classifier, const GanHyper& hyper,
                        const GanCallback& on_epoch) {
  if (train.size() < 2) throw Error("train_stargan: need at least two training clips");
  const auto& first = train.inputs.front();
  GanShape shape;
  shape.height = first.dim(1);
  shape.width = first.dim(2);
  shape.classes = count_classes(train);
  if (classifier.shape().classes != shape.classes)
    throw ShapeError("train_stargan: classifier has " + std::to_string(classifier.shape().classes) +
                     " classes, data has " + std::to_string(shape.classes));

  GanResult result{{Generator(shape), Discriminator(4), std::move(classifier)}, {}, {}};
  StarGanBundle& b = result.bundle;
  b.G.init(hyper.seed + 202);
  b.D.init(hyper.seed + 303);
  for (int h = 0; h < shape.height; ++h) b.G.floor[h] = -norm.mean[h] / norm.stddev[h];

  nn::Adam opt_g(b.G.params(), hyper.lr_generator, hyper.beta1);
  nn::Adam opt_d(b.D.params(), hyper.lr_discriminator, hyper.beta1);
  nn::Rng rng(hyper.seed + 404);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t n_eval = std::min<std::size_t>(static_cast<std::size_t>(hyper.eval_clips), train.size());
  const std::size_t per_epoch = std::min<std::size_t>(static_cast<std::size_t>(hyper.clips_per_epoch), train.size());
  const double n_pixels = static_cast<double>(first.size());

  Generator::Cache gc1, gc2;
  Discriminator::Cache dc;
  nn::CnnCache mc;
  std::vector<double> dlogits;
  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    rng.shuffle(order);
    GanEpoch rec;
    rec.epoch = epoch;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < per_epoch; start += hyper.batch_size) {
      const std::size_t end = std::min(per_epoch, start + hyper.batch_size);
      std::vector<int> targets;
      for (std::size_t k = start; k < end; ++k) targets.push_back(other_class(train.labels[order[k]], shape.classes, rng));

      // Discriminator: real clips -> 1, generated -> 0.
      opt_d.zero_grad();
      for (std::size_t k = start; k < end; ++k) {
        const Tensor& x = train.inputs[order[k]];
        double g = 0.0;
        rec.d_loss += bce_logit(b.D.forward(x, &dc), 1.0, g);
        b.D.backward(dc, g, false);
        Tensor fake = b.G.forward(x, targets[k - start]);
        rec.d_loss += bce_logit(b.D.forward(fake, &dc), 0.0, g);
        b.D.backward(dc, g, false);
      }
      check_finite(rec.d_loss, "discriminator loss", epoch);
      opt_d.step(1.0 / (2.0 * static_cast<double>(end - start)));

      // Generator: fool D, be classified as the target by M, survive the cycle.
      opt_g.zero_grad();
      for (std::size_t k = start; k < end; ++k) {
        const Tensor& x = train.inputs[order[k]];
        const int y = train.labels[order[k]];
        const int gamma = targets[k - start];
        Tensor fake = b.G.forward(x, gamma, &gc1);

        double g_adv = 0.0;
        rec.g_adv += bce_logit(b.D.forward(fake, &dc), 1.0, g_adv);
        Tensor dfake = b.D.backward(dc, g_adv, true);

        b.M.forward(fake, &mc);
        rec.g_cls += nn::softmax_cross_entropy(mc.logits, gamma, dlogits);
        for (double& v : dlogits) v *= hyper.lambda_cls;
        Tensor dcls = b.M.backward(mc, dlogits, {}, true);
        for (std::size_t i = 0; i < dfake.size(); ++i) dfake.data[i] += dcls.data[i];

        Tensor rec_x = b.G.forward(fake, y, &gc2);
        Tensor drec(rec_x.shape);
        double l1 = 0.0;
        for (std::size_t i = 0; i < rec_x.size(); ++i) {
          const double d = rec_x.data[i] - x.data[i];
          l1 += std::abs(d);
          drec.data[i] = hyper.lambda_cyc * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / n_pixels;
        }
        rec.g_cyc += l1 / n_pixels;
        Tensor dcyc = b.G.backward(gc2, drec, true);
        for (std::size_t i = 0; i < dfake.size(); ++i) dfake.data[i] += dcyc.data[i];
        b.G.backward(gc1, dfake, false);
        ++steps;
      }
      check_finite(rec.g_adv + rec.g_cls + rec.g_cyc, "generator loss", epoch);
      opt_g.step(1.0 / static_cast<double>(end - start));
    }
    b.M.zero_grad();
    b.D.zero_grad();
    const double n_steps = static_cast<double>(std::max<std::size_t>(steps, 1));
    rec.d_loss /= 2.0 * n_steps;
    rec.g_adv /= n_steps;
    rec.g_cls /= n_steps;
    rec.g_cyc /= n_steps;

    double sim = 0.0;
    for (std::size_t i = 0; i < n_eval; ++i) {
      const Tensor& x = train.inputs[i];
      const int y = train.labels[i];
      const int gamma = (y + 1 + static_cast<int>(i % static_cast<std::size_t>(shape.classes - 1))) % shape.classes;
      sim += reconstruction_similarity(x, b.G.forward(b.G.forward(x, gamma), y));
    }
    rec.cycle_similarity = n_eval ? sim / static_cast<double>(n_eval) : 0.0;
    result.trace.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

}  // namespace rexnet::counterfactual
