#include "rexnet/gradcam.hpp"

#include <algorithm>
#include <cmath>

#include "rexnet/error.hpp"

namespace rexnet::nn {

std::vector<double> class_activation(const Tensor& acts, const Tensor& grads) {
  if (acts.shape != grads.shape || acts.rank() != 3)
    throw ShapeError("class_activation: activation/gradient shape mismatch");
  const int K = acts.dim(0), hw = acts.dim(1) * acts.dim(2);
  std::vector<double> cam(static_cast<std::size_t>(hw), 0.0);
  for (int k = 0; k < K; ++k) {
    const double* g = grads.data.data() + static_cast<std::size_t>(k) * hw;
    const double* a = acts.data.data() + static_cast<std::size_t>(k) * hw;
    double alpha = 0.0;
    for (int i = 0; i < hw; ++i) alpha += g[i];
    alpha /= hw;
    for (int i = 0; i < hw; ++i) cam[i] += alpha * a[i];
  }
  for (double& v : cam) v = std::max(v, 0.0);
  return cam;
}

std::vector<double> upsample_bilinear(std::span<const double> src, int h, int w, int out_h,
                                      int out_w) {
  std::vector<double> out(static_cast<std::size_t>(out_h) * out_w);
  auto coord = [](int i, int in, int out) {
    const double c = (i + 0.5) * static_cast<double>(in) / out - 0.5;
    return std::clamp(c, 0.0, static_cast<double>(in - 1));
  };
  for (int y = 0; y < out_h; ++y) {
    const double sy = coord(y, h, out_h);
    const int y0 = static_cast<int>(sy), y1 = std::min(y0 + 1, h - 1);
    const double fy = sy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double sx = coord(x, w, out_w);
      const int x0 = static_cast<int>(sx), x1 = std::min(x0 + 1, w - 1);
      const double fx = sx - x0;
      const double top = src[y0 * w + x0] * (1 - fx) + src[y0 * w + x1] * fx;
      const double bot = src[y1 * w + x0] * (1 - fx) + src[y1 * w + x1] * fx;
      out[static_cast<std::size_t>(y) * out_w + x] = top * (1 - fy) + bot * fy;
    }
  }
  return out;
}

void minmax_normalize(std::span<double> v) {
  if (v.empty()) return;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double mn = *lo, mx = *hi;
  if (!(mx > mn)) {
    std::fill(v.begin(), v.end(), 0.0);
    return;
  }
  for (double& x : v) x = (x - mn) / (mx - mn);
}

SaliencyMap grad_cam(const CnnModel& model, const CnnCache& cache, int class_index) {
  if (cache.logits.empty()) throw Error("grad_cam: forward pass not cached");
  const Tensor grads = model.final_conv_grad(cache, class_index);
  const auto cam = class_activation(cache.a3, grads);
  const auto& s = model.shape();
  SaliencyMap map(s.height, s.width, class_index);
  map.values = upsample_bilinear(cam, cache.a3.dim(1), cache.a3.dim(2), s.height, s.width);
  minmax_normalize(map.values);
  return map;
}

}  // namespace rexnet::nn
