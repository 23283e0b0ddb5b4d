#include "mcdn/gradcheck.hpp"

#include <sstream>

namespace mcdn {

GradCheckReport finite_diff_check(DiffFragment& fragment, double step, double tolerance) {
  require(step > 0, "finite_diff_check: step must be positive");
  require(tolerance > 0, "finite_diff_check: tolerance must be positive");
  GradCheckReport report;
  report.tolerance = tolerance;

  const ParameterRefs<double> params = fragment.parameters();
  if (params.empty()) return report;

  const DiffFragment::Evaluation base = fragment.evaluate();
  const DiffFragment::Evaluation again = fragment.evaluate();
  if (base.value != again.value || base.activation_signature != again.activation_signature) {
    std::ostringstream os;
    os.precision(17);
    os << "finite_diff_check: fragment is not deterministic (" << base.value << " vs " << again.value << ")";
    throw NondeterministicFragment(os.str());
  }

  const GradientStore<double> analytic = fragment.analytic_gradients();

  for (const auto& [name, tensor] : params) {
    const auto found = analytic.find(name);
    if (found == analytic.end()) throw ContractError("finite_diff_check: no analytic gradient for '" + name + "'");
    const auto& grad = found->second;
    if (grad.dims() != tensor->dims())
      throw ContractError("finite_diff_check: gradient dims for '" + name + "' do not match the parameter");

    ParameterCheck check;
    check.name = name;
    check.count = tensor->size();
    for (Index i = 0; i < tensor->size(); ++i) {
      const double original = (*tensor)[i];
      double h = step;
      double numeric = 0.0;
      bool refined = false;
      for (;;) {
        (*tensor)[i] = original + h;
        const auto plus = fragment.evaluate();
        (*tensor)[i] = original - h;
        const auto minus = fragment.evaluate();
        (*tensor)[i] = original;
        numeric = (plus.value - minus.value) / (2.0 * h);
        const bool smooth = plus.activation_signature == base.activation_signature &&
                            minus.activation_signature == base.activation_signature;
        if (smooth || h <= 1e-7) break;
        h /= 10.0;
        refined = true;
      }
      if (refined) ++check.refined_probes;
      const double err = gradient_relative_error(grad[i], numeric);
      if (check.worst_index < 0 || err > check.max_relative_error) {
        check.max_relative_error = err;
        check.worst_index = i;
      }
    }
    report.entries.push_back(std::move(check));
  }
  return report;
}

}  // namespace mcdn
