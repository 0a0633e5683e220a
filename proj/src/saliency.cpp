#include "rexnet/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rexnet/error.hpp"
#include "rexnet/gradcam.hpp"

namespace rexnet::saliency {

namespace {

void require_same_shape(const SaliencyMap& a, const SaliencyMap& b, const char* what) {
  if (!a.same_shape(b) || a.values.size() != b.values.size())
    throw ShapeError(std::string(what) + ": saliency maps differ in shape (" +
                     std::to_string(a.bins) + "x" + std::to_string(a.frames) + " vs " +
                     std::to_string(b.bins) + "x" + std::to_string(b.frames) + ")");
}

}  // namespace

SaliencyMap pairwise_contrastive(const SaliencyMap& s_y, const SaliencyMap& s_gamma) {
  require_same_shape(s_y, s_gamma, "pairwise_contrastive");
  SaliencyMap out(s_y.bins, s_y.frames, s_y.class_index);
  for (std::size_t i = 0; i < out.values.size(); ++i)
    out.values[i] = (1.0 - s_gamma.values[i]) * s_y.values[i];
  return out;
}

SaliencyMap total_contrastive(const SaliencyMap& s_y, std::span<const SaliencyMap> others) {
  if (others.empty()) throw Error("total_contrastive: no alternative-class maps");
  for (const auto& o : others) require_same_shape(s_y, o, "total_contrastive");
  SaliencyMap out(s_y.bins, s_y.frames, s_y.class_index);
  const double n = static_cast<double>(others.size());
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    double discount = 0.0;
    for (const auto& o : others) discount += 1.0 - o.values[i];
    out.values[i] = discount / n * s_y.values[i];
  }
  return out;
}

std::vector<double> frequency_mean(const SaliencyMap& map) {
  std::vector<double> out(static_cast<std::size_t>(map.frames), 0.0);
  for (int b = 0; b < map.bins; ++b)
    for (int t = 0; t < map.frames; ++t) out[t] += map.at(b, t);
  for (double& v : out) v /= static_cast<double>(map.bins);
  return out;
}

SaliencyBar to_time_bar(const SaliencyMap& map, const std::vector<dsp::Span>& word_spans) {
  SaliencyBar bar;
  bar.per_frame = frequency_mean(map);
  nn::minmax_normalize(bar.per_frame);
  const int frames = map.frames;
  for (const auto& span : word_spans) {
    double sum = 0.0;
    int count = 0;
    for (int t = 0; t < frames; ++t) {
      const double c = dsp::frame_center_seconds(t);
      if (c >= span.start_s && c < span.end_s) {
        sum += bar.per_frame[t];
        ++count;
      }
    }
    if (count == 0 && frames > 0) {
      // Span shorter than a hop: use the frame nearest its midpoint.
      const double mid = 0.5 * (span.start_s + span.end_s);
      int nearest = static_cast<int>(std::lround((mid * audio::kSampleRate - dsp::kWindow / 2.0) /
                                                 dsp::kHop));
      nearest = std::clamp(nearest, 0, frames - 1);
      sum = bar.per_frame[nearest];
      count = 1;
    }
    bar.words.push_back({span, count ? sum / count : 0.0});
  }
  return bar;
}

std::vector<bool> salient_frame_mask(std::span<const double> per_frame, double tau,
                                     int min_frames) {
  if (!(tau > 0.0 && tau < 1.0))
    throw Error("salient_frame_mask: threshold must lie in (0, 1), got " + std::to_string(tau));
  const std::size_t n = per_frame.size();
  std::vector<bool> mask(n, false);
  std::size_t marked = 0;
  for (std::size_t t = 0; t < n; ++t)
    if (per_frame[t] >= tau) mask[t] = true, ++marked;
  if (marked >= static_cast<std::size_t>(std::max(min_frames, 0)) || n == 0) return mask;

  const std::size_t k = std::min(
      n, std::max<std::size_t>(static_cast<std::size_t>(std::max(min_frames, 1)),
                               static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(n)))));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return per_frame[a] > per_frame[b]; });
  std::fill(mask.begin(), mask.end(), false);
  for (std::size_t i = 0; i < k; ++i) mask[order[i]] = true;
  return mask;
}

std::vector<bool> salient_frame_mask(const SaliencyMap& map, double tau) {
  std::vector<double> bar = frequency_mean(map);
  nn::minmax_normalize(bar);
  return salient_frame_mask(bar, tau);
}

}  // namespace rexnet::saliency
