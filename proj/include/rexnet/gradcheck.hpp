#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rexnet/layers.hpp"

namespace rexnet::nn {

struct GradCheckResult {
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  int checked = 0;
  std::vector<std::string> offenders;  // "name[index]: analytic vs numeric"
  bool passed() const { return offenders.empty(); }
};

// Central finite differences on randomly sampled parameter entries.
// loss() evaluates the scalar objective at the current parameters;
// accumulate_grads() must fill the ParamRef grads from zero for that loss.
GradCheckResult grad_check(const std::vector<ParamRef>& params, const std::function<double()>& loss,
                           const std::function<void()>& accumulate_grads, int samples = 50,
                           double h = 1e-4, double tolerance = 1e-3, std::uint64_t seed = 1);

}  // namespace rexnet::nn
