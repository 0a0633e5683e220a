#pragma once

#include <vector>

namespace rexnet {

// Time-frequency map aligned with the mel spectrogram, values in [0, 1].
struct SaliencyMap {
  int bins = 0;
  int frames = 0;
  int class_index = -1;
  std::vector<double> values;  // [bin][frame]

  SaliencyMap() = default;
  SaliencyMap(int b, int f, int cls = -1, double fill = 0.0)
      : bins(b), frames(f), class_index(cls), values(static_cast<std::size_t>(b) * f, fill) {}

  double& at(int bin, int frame) { return values[static_cast<std::size_t>(bin) * frames + frame]; }
  double at(int bin, int frame) const { return values[static_cast<std::size_t>(bin) * frames + frame]; }
  bool same_shape(const SaliencyMap& o) const { return bins == o.bins && frames == o.frames; }
};

}  // namespace rexnet
