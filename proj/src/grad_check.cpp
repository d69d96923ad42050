#include "naf/grad_check.hpp"

#include <cmath>
#include <sstream>

namespace naf {

template <typename T>
GradCheckResult grad_check(const ScalarFn<T>& f, std::vector<NamedTensor<T>> inputs,
                           double h, const std::string& fault_op, T fault_scale) {
  if (!(h > 0.0)) throw std::invalid_argument("grad_check: step must be positive");

  for (auto& in : inputs) {
    if (!in.tensor.requires_grad()) {
      throw std::invalid_argument("grad_check: " + in.name + " does not require grad");
    }
    in.tensor.clear_grad();
  }

  BasicTape<T> tape;
  if (!fault_op.empty()) tape.inject_fault(fault_op, fault_scale);
  BasicTensor<T> y = f(tape);
  if (!std::isfinite(static_cast<double>(y[0]))) {
    throw NonFiniteError("grad_check: non-finite function value at the base point");
  }
  tape.backward(y);
  tape.clear();

  auto evaluate = [&](const std::string& name, std::size_t i) {
    BasicTape<T> off(false);
    const double v = static_cast<double>(f(off)[0]);
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os << "grad_check: non-finite function value perturbing " << name << "[" << i << "]";
      throw NonFiniteError(os.str());
    }
    return v;
  };

  GradCheckResult result;
  for (auto& in : inputs) {
    const std::vector<T> analytic = in.tensor.has_grad()
        ? std::vector<T>(in.tensor.grad().begin(), in.tensor.grad().end())
        : std::vector<T>(in.tensor.numel(), T(0));
    std::span<T> data = in.tensor.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const T saved = data[i];
      const T hi = static_cast<T>(saved + h);
      const T lo = static_cast<T>(saved - h);
      data[i] = hi;
      const double plus = evaluate(in.name, i);
      data[i] = lo;
      const double minus = evaluate(in.name, i);
      data[i] = saved;

      const double a = analytic[i];
      if (!std::isfinite(a)) {
        std::ostringstream os;
        os << "grad_check: non-finite analytic gradient at " << in.name << "[" << i << "]";
        throw NonFiniteError(os.str());
      }
      // Divide by the representable step, not the nominal 2h.
      const double numeric = (plus - minus) / (static_cast<double>(hi) - lo);
      const double err = std::abs(a - numeric) / std::max(1e-6, std::abs(a) + std::abs(numeric));
      ++result.coordinates;
      if (err > result.max_rel_err || result.worst.empty()) {
        result.max_rel_err = err;
        result.worst = in.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return result;
}

template GradCheckResult grad_check<float>(const ScalarFn<float>&,
                                           std::vector<NamedTensor<float>>, double,
                                           const std::string&, float);
template GradCheckResult grad_check<double>(const ScalarFn<double>&,
                                            std::vector<NamedTensor<double>>, double,
                                            const std::string&, double);

}  // namespace naf
