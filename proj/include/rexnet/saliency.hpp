#pragma once

#include <span>
#include <vector>

#include "rexnet/dsp.hpp"
#include "rexnet/saliency_map.hpp"

namespace rexnet::saliency {

// (1 - s_gamma) * s_y, elementwise.
SaliencyMap pairwise_contrastive(const SaliencyMap& s_y, const SaliencyMap& s_gamma);

// mean_gamma(1 - s_gamma) * s_y over all alternative classes.
SaliencyMap total_contrastive(const SaliencyMap& s_y, std::span<const SaliencyMap> others);

struct WordSaliency {
  dsp::Span span;
  double mean_saliency = 0.0;
};

struct SaliencyBar {
  std::vector<double> per_frame;  // normalized to [0, 1]
  std::vector<WordSaliency> words;
};

// Mean over mel bins for each frame, unnormalized.
std::vector<double> frequency_mean(const SaliencyMap& map);

SaliencyBar to_time_bar(const SaliencyMap& map, const std::vector<dsp::Span>& word_spans);

inline constexpr double kDefaultThreshold = 0.5;
inline constexpr int kMinSalientFrames = 5;

// Frames with per_frame >= tau. When fewer than min_frames pass, the top 5%
// of frames (at least min_frames) are marked instead.
std::vector<bool> salient_frame_mask(std::span<const double> per_frame,
                                     double tau = kDefaultThreshold,
                                     int min_frames = kMinSalientFrames);
std::vector<bool> salient_frame_mask(const SaliencyMap& map, double tau = kDefaultThreshold);

}  // namespace rexnet::saliency
