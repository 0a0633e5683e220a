#pragma once

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace rexnet::nn {

// Dense row-major array of doubles. Rank is whatever the caller needs; the
// CNN code uses (channels, height, width) and plain vectors use rank 1.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> dims, double fill = 0.0)
      : shape(std::move(dims)), data(count(shape), fill) {}

  static std::size_t count(const std::vector<int>& dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                           [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
  }

  std::size_t size() const { return data.size(); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }

  double& at(int c, int h, int w) {
    return data[(static_cast<std::size_t>(c) * shape[1] + h) * shape[2] + w];
  }
  double at(int c, int h, int w) const {
    return data[(static_cast<std::size_t>(c) * shape[1] + h) * shape[2] + w];
  }

  std::span<double> span() { return data; }
  std::span<const double> span() const { return data; }

  bool all_finite() const;
  std::string shape_string() const;
};

// Deterministic generator. Values are derived from raw 64-bit draws so that
// the same seed yields the same numbers on every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  std::uint64_t next();
  double uniform();                          // [0, 1)
  double uniform(double lo, double hi);
  double normal();                           // standard normal
  std::size_t below(std::size_t n);          // [0, n)
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::uint64_t state_;
};

}  // namespace rexnet::nn
