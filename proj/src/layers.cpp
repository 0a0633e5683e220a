#include "rexnet/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "rexnet/error.hpp"

namespace rexnet::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMat>;
using ConstRowMap = Eigen::Map<const RowMat>;

// cols[(c*9 + ky*3 + kx)][h*W + w] = x[c][h+ky-1][w+kx-1] (zero outside).
void im2col3x3(const Tensor& x, std::vector<double>& cols) {
  const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
  const std::size_t hw = static_cast<std::size_t>(H) * W;
  cols.assign(static_cast<std::size_t>(C) * 9 * hw, 0.0);
  for (int c = 0; c < C; ++c) {
    const double* src = x.data.data() + c * hw;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        double* dst = cols.data() + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * hw;
        const int dy = ky - 1, dx = kx - 1;
        const int w_lo = std::max(0, -dx), w_hi = std::min(W, W - dx);
        for (int h = 0; h < H; ++h) {
          const int sh = h + dy;
          if (sh < 0 || sh >= H) continue;
          const double* srow = src + static_cast<std::size_t>(sh) * W + dx;
          double* drow = dst + static_cast<std::size_t>(h) * W;
          for (int w = w_lo; w < w_hi; ++w) drow[w] = srow[w];
        }
      }
    }
  }
}

void col2im3x3(const std::vector<double>& cols, Tensor& dx) {
  const int C = dx.dim(0), H = dx.dim(1), W = dx.dim(2);
  const std::size_t hw = static_cast<std::size_t>(H) * W;
  std::fill(dx.data.begin(), dx.data.end(), 0.0);
  for (int c = 0; c < C; ++c) {
    double* dst = dx.data.data() + c * hw;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const double* src = cols.data() + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * hw;
        const int dy = ky - 1, dxo = kx - 1;
        const int w_lo = std::max(0, -dxo), w_hi = std::min(W, W - dxo);
        for (int h = 0; h < H; ++h) {
          const int sh = h + dy;
          if (sh < 0 || sh >= H) continue;
          double* drow = dst + static_cast<std::size_t>(sh) * W + dxo;
          const double* srow = src + static_cast<std::size_t>(h) * W;
          for (int w = w_lo; w < w_hi; ++w) drow[w] += srow[w];
        }
      }
    }
  }
}

// Fixed summation order so results do not depend on buffer alignment.
double dot(const double* a, const double* b, int n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

void he_uniform(std::vector<double>& w, int fan_in, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (double& v : w) v = rng.uniform(-limit, limit);
}

}  // namespace

Conv2d::Conv2d(int in_ch, int out_ch)
    : in_channels(in_ch),
      out_channels(out_ch),
      weight(static_cast<std::size_t>(in_ch) * out_ch * 9, 0.0),
      bias(static_cast<std::size_t>(out_ch), 0.0),
      weight_grad(weight.size(), 0.0),
      bias_grad(bias.size(), 0.0) {}

void Conv2d::init_he(Rng& rng) {
  he_uniform(weight, in_channels * 9, rng);
  std::fill(bias.begin(), bias.end(), 0.0);
}

Tensor Conv2d::forward(const Tensor& x) const {
  if (x.rank() != 3 || x.dim(0) != in_channels)
    throw ShapeError("conv2d: expected " + std::to_string(in_channels) + " input channels, got " +
                     x.shape_string());
  const int H = x.dim(1), W = x.dim(2);
  const int hw = H * W;
  thread_local std::vector<double> cols;
  im2col3x3(x, cols);
  Tensor y({out_channels, H, W});
  ConstRowMap wmat(weight.data(), out_channels, in_channels * 9);
  ConstRowMap cmat(cols.data(), in_channels * 9, hw);
  RowMap ymat(y.data.data(), out_channels, hw);
  ymat.noalias() = wmat * cmat;
  for (int o = 0; o < out_channels; ++o) ymat.row(o).array() += bias[o];
  return y;
}

Tensor Conv2d::backward(const Tensor& x, const Tensor& dy, bool need_input_grad) {
  const int H = x.dim(1), W = x.dim(2);
  const int hw = H * W;
  thread_local std::vector<double> cols;
  im2col3x3(x, cols);
  ConstRowMap cmat(cols.data(), in_channels * 9, hw);
  ConstRowMap dymat(dy.data.data(), out_channels, hw);
  RowMap dw(weight_grad.data(), out_channels, in_channels * 9);
  dw.noalias() += dymat * cmat.transpose();
  for (int o = 0; o < out_channels; ++o) {
    const double* row = dy.data.data() + static_cast<std::size_t>(o) * hw;
    double acc = 0.0;
    for (int i = 0; i < hw; ++i) acc += row[i];
    bias_grad[o] += acc;
  }
  if (!need_input_grad) return {};
  ConstRowMap wmat(weight.data(), out_channels, in_channels * 9);
  std::vector<double> dcols(static_cast<std::size_t>(in_channels) * 9 * hw);
  RowMap dcmat(dcols.data(), in_channels * 9, hw);
  dcmat.noalias() = wmat.transpose() * dymat;
  Tensor dx({in_channels, H, W});
  col2im3x3(dcols, dx);
  return dx;
}

void Conv2d::append_params(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".weight", weight, weight_grad});
  out.push_back({prefix + ".bias", bias, bias_grad});
}

Dense::Dense(int in, int out)
    : in_features(in),
      out_features(out),
      weight(static_cast<std::size_t>(in) * out, 0.0),
      bias(static_cast<std::size_t>(out), 0.0),
      weight_grad(weight.size(), 0.0),
      bias_grad(bias.size(), 0.0) {}

void Dense::init_he(Rng& rng) {
  he_uniform(weight, in_features, rng);
  std::fill(bias.begin(), bias.end(), 0.0);
}

std::vector<double> Dense::forward(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != in_features)
    throw ShapeError("dense: expected " + std::to_string(in_features) + " inputs, got " +
                     std::to_string(x.size()));
  std::vector<double> y(bias);
  for (int o = 0; o < out_features; ++o)
    y[o] += dot(weight.data() + static_cast<std::size_t>(o) * in_features, x.data(), in_features);
  return y;
}

std::vector<double> Dense::backward(std::span<const double> x, std::span<const double> dy,
                                    bool need_input_grad) {
  for (int o = 0; o < out_features; ++o) {
    double* g = weight_grad.data() + static_cast<std::size_t>(o) * in_features;
    const double d = dy[o];
    for (int i = 0; i < in_features; ++i) g[i] += d * x[i];
  }
  for (int o = 0; o < out_features; ++o) bias_grad[o] += dy[o];
  if (!need_input_grad) return {};
  return input_grad(dy);
}

std::vector<double> Dense::input_grad(std::span<const double> dy) const {
  std::vector<double> dx(static_cast<std::size_t>(in_features), 0.0);
  for (int o = 0; o < out_features; ++o) {
    const double* w = weight.data() + static_cast<std::size_t>(o) * in_features;
    const double d = dy[o];
    for (int i = 0; i < in_features; ++i) dx[i] += d * w[i];
  }
  return dx;
}

void Dense::append_params(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".weight", weight, weight_grad});
  out.push_back({prefix + ".bias", bias, bias_grad});
}

PoolResult max_pool2(const Tensor& x) {
  const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
  const int Ho = H / 2, Wo = W / 2;
  PoolResult r{Tensor({C, Ho, Wo}), std::vector<int>(static_cast<std::size_t>(C) * Ho * Wo)};
  std::size_t o = 0;
  for (int c = 0; c < C; ++c) {
    for (int i = 0; i < Ho; ++i) {
      for (int j = 0; j < Wo; ++j, ++o) {
        int best = (c * H + 2 * i) * W + 2 * j;
        for (int di = 0; di < 2; ++di)
          for (int dj = 0; dj < 2; ++dj) {
            const int idx = (c * H + 2 * i + di) * W + 2 * j + dj;
            if (x.data[idx] > x.data[best]) best = idx;
          }
        r.out.data[o] = x.data[best];
        r.argmax[o] = best;
      }
    }
  }
  return r;
}

Tensor max_pool2_backward(const Tensor& dy, const std::vector<int>& argmax,
                          const std::vector<int>& input_shape) {
  Tensor dx(input_shape);
  for (std::size_t o = 0; o < dy.size(); ++o) dx.data[argmax[o]] += dy.data[o];
  return dx;
}

void relu_inplace(std::span<double> x) {
  for (double& v : x) v = v < 0.0 ? 0.0 : v;  // NaN propagates
}

void relu_backward_inplace(std::span<double> dy, std::span<const double> y) {
  for (std::size_t i = 0; i < dy.size(); ++i)
    if (!(y[i] > 0.0)) dy[i] = 0.0;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  const double m = *std::max_element(p.begin(), p.end());
  double sum = 0.0;
  for (double& v : p) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : p) v /= sum;
  return p;
}

double softmax_cross_entropy(std::span<const double> logits, int label,
                             std::vector<double>& grad) {
  grad = softmax(logits);
  const double m = *std::max_element(logits.begin(), logits.end());
  double lse = 0.0;
  for (double v : logits) lse += std::exp(v - m);
  const double loss = -(logits[label] - m - std::log(lse));
  grad[label] -= 1.0;
  return loss;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double sigmoid_bce(std::span<const double> logits, std::span<const double> targets,
                   std::vector<double>& grad) {
  const std::size_t n = logits.size();
  grad.resize(n);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = logits[i], t = targets[i];
    // log(1 + e^-|z|) + max(z, 0) - z t
    loss += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
    grad[i] = (sigmoid(z) - t) / static_cast<double>(n);
  }
  return loss / static_cast<double>(n);
}

int argmax(std::span<const double> v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

Sgd::Sgd(std::vector<ParamRef> params, double lr, double momentum)
    : params_(std::move(params)), lr_(lr), momentum_(momentum) {
  velocity_.reserve(params_.size());
  for (const auto& p : params_) velocity_.emplace_back(p.value.size(), 0.0);
}

void Sgd::step(double grad_scale) {
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = params_[k];
    auto& v = velocity_[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      v[i] = momentum_ * v[i] - lr_ * grad_scale * p.grad[i];
      p.value[i] += v[i];
    }
  }
}

void Sgd::zero_grad() { zero_grads(params_); }

Adam::Adam(std::vector<ParamRef> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.emplace_back(p.value.size(), 0.0);
    v_.emplace_back(p.value.size(), 0.0);
  }
}

void Adam::step(double grad_scale) {
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = params_[k];
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = grad_scale * p.grad[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      p.value[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

void Adam::zero_grad() { zero_grads(params_); }

void zero_grads(const std::vector<ParamRef>& params) {
  for (const auto& p : params) std::fill(p.grad.begin(), p.grad.end(), 0.0);
}

}  // namespace rexnet::nn
