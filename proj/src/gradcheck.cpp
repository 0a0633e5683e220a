#include "rexnet/gradcheck.hpp"

#include <cmath>
#include <sstream>

namespace rexnet::nn {

GradCheckResult grad_check(const std::vector<ParamRef>& params, const std::function<double()>& loss,
                           const std::function<void()>& accumulate_grads, int samples, double h,
                           double tolerance, std::uint64_t seed) {
  zero_grads(params);
  accumulate_grads();
  std::size_t total = 0;
  for (const auto& p : params) total += p.value.size();

  GradCheckResult r;
  if (total == 0) return r;
  Rng rng(seed);
  for (int s = 0; s < samples; ++s) {
    std::size_t flat = rng.below(total);
    std::size_t k = 0;
    while (flat >= params[k].value.size()) flat -= params[k++].value.size();
    const ParamRef& p = params[k];
    const double saved = p.value[flat];
    p.value[flat] = saved + h;
    const double up = loss();
    p.value[flat] = saved - h;
    const double down = loss();
    p.value[flat] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double analytic = p.grad[flat];
    const double abs_err = std::abs(analytic - numeric);
    const double rel_err = abs_err / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    r.max_absolute_error = std::max(r.max_absolute_error, abs_err);
    r.max_relative_error = std::max(r.max_relative_error, rel_err);
    ++r.checked;
    if (rel_err > tolerance) {
      std::ostringstream os;
      os << p.name << '[' << flat << "]: analytic " << analytic << " vs numeric " << numeric;
      r.offenders.push_back(os.str());
    }
  }
  return r;
}

}  // namespace rexnet::nn
