#pragma once

#include <functional>
#include <string>
#include <vector>

#include "naf/tensor.hpp"

namespace naf {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst;  // "<tensor>[index]" of the worst coordinate
  std::size_t coordinates = 0;
};

template <typename T>
using ScalarFn = std::function<BasicTensor<T>(BasicTape<T>&)>;

template <typename T>
struct NamedTensor {
  std::string name;
  BasicTensor<T> tensor;
};

// Compares the tape gradient of the scalar `f` against central differences
// over every coordinate of every listed tensor:
//   err = |analytic - numeric| / max(1e-6, |analytic| + |numeric|)
// `f` must rebuild its graph on each call; the listed tensors must require
// gradients. Non-finite values raise NonFiniteError naming the coordinate.
template <typename T>
GradCheckResult grad_check(const ScalarFn<T>& f, std::vector<NamedTensor<T>> inputs,
                           double h = 1e-3, const std::string& fault_op = {},
                           T fault_scale = T(1));

template <typename T>
GradCheckResult grad_check(const ScalarFn<T>& f, BasicTensor<T> x, double h = 1e-3) {
  return grad_check<T>(f, {{"x", std::move(x)}}, h);
}

}  // namespace naf
