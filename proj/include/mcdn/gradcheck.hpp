#pragma once

#include "mcdn/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace mcdn {

/// A differentiable piece of a model evaluated in 64-bit precision. `evaluate`
/// must be a pure function of the current parameter values (batch-norm running
/// statistics stay frozen). `activation_signature` summarizes every ReLU on/off
/// decision of the last evaluation so the checker can tell when a probe crossed
/// a kink.
class DiffFragment {
 public:
  struct Evaluation {
    double value = 0.0;
    std::uint64_t activation_signature = 0;
  };

  virtual ~DiffFragment() = default;
  virtual ParameterRefs<double> parameters() = 0;
  virtual Evaluation evaluate() = 0;
  virtual GradientStore<double> analytic_gradients() = 0;
};

struct ParameterCheck {
  std::string name;
  Index count = 0;
  double max_relative_error = 0.0;
  Index worst_index = -1;
  Index refined_probes = 0;  // entries re-probed with a smaller step after a kink crossing
};

struct GradCheckReport {
  std::vector<ParameterCheck> entries;
  double tolerance = 0.0;

  double worst() const {
    double w = 0.0;
    for (const auto& e : entries) w = std::max(w, e.max_relative_error);
    return w;
  }
  bool passed() const { return worst() < tolerance; }
};

class NondeterministicFragment : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Magnitude below which gradients are compared absolutely. A conv bias feeding
/// train-mode batch normalization has an exactly zero gradient, and central
/// differences of an O(1) loss leave ~1e-11 of cancellation noise.
inline constexpr double kGradientFloor = 1e-6;

/// |a - n| / max(|a|, |n|, floor)
inline double gradient_relative_error(double analytic, double numeric, double floor = kGradientFloor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Central differences for every entry of every parameter. A probe whose +/- step
/// changes the ReLU activation pattern is retried with the step divided by 10
/// (down to 1e-7); difference quotients across a kink measure nothing.
GradCheckReport finite_diff_check(DiffFragment& fragment, double step, double tolerance);

/// FNV-1a style mixing used by fragments to build activation signatures.
inline std::uint64_t mix_signature(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

}  // namespace mcdn
