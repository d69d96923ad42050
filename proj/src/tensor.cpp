#include "naf/tensor.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>

namespace naf {

std::string Shape::str() const {
  std::ostringstream os;
  os << "(" << n << ", " << c << ", " << h << ", " << w << ")";
  return os.str();
}

namespace {
std::atomic<bool> g_deterministic{true};

void check_dims(const Shape& s) {
  if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0) {
    throw ShapeError("negative tensor dimension in " + s.str());
  }
}
}  // namespace

void set_deterministic(bool on) { g_deterministic.store(on); }
bool deterministic() { return g_deterministic.load(); }

void retain_freed_memory() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, bool requires_grad)
    : impl_(std::make_shared<Impl>()) {
  check_dims(shape);
  impl_->shape = shape;
  impl_->data.assign(shape.numel(), T(0));
  impl_->requires_grad = requires_grad;
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data, bool requires_grad)
    : impl_(std::make_shared<Impl>()) {
  check_dims(shape);
  if (data.size() != shape.numel()) {
    throw ShapeError("data length " + std::to_string(data.size()) +
                     " does not match shape " + shape.str());
  }
  impl_->shape = shape;
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::full(Shape shape, T value, bool requires_grad) {
  BasicTensor t(shape, requires_grad);
  std::fill(t.impl_->data.begin(), t.impl_->data.end(), value);
  return t;
}

template <typename T>
typename BasicTensor<T>::Impl& BasicTensor<T>::impl() const {
  if (!impl_) throw std::logic_error("use of an undefined tensor");
  return *impl_;
}

template <typename T>
T BasicTensor<T>::at(int n, int c, int h, int w) const {
  const Shape& s = impl().shape;
  const std::size_t idx =
      ((static_cast<std::size_t>(n) * s.c + c) * s.h + h) * s.w + w;
  return impl().data.at(idx);
}

template <typename T>
std::span<T> BasicTensor<T>::mutable_grad() {
  Impl& im = impl();
  if (im.grad.empty() && !im.data.empty()) im.grad.assign(im.data.size(), T(0));
  return im.grad;
}

template <typename T>
void BasicTensor<T>::zero_grad() {
  Impl& im = impl();
  std::fill(im.grad.begin(), im.grad.end(), T(0));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::clone(bool requires_grad) const {
  return BasicTensor(impl().shape, impl().data, requires_grad);
}

template <typename T>
void BasicTensor<T>::check_finite(std::string_view what) const {
  const Impl& im = impl();
  for (std::size_t i = 0; i < im.data.size(); ++i) {
    if (!std::isfinite(im.data[i])) {
      const Shape& s = im.shape;
      std::size_t r = i;
      const int w = static_cast<int>(r % s.w);
      r /= s.w;
      const int h = static_cast<int>(r % s.h);
      r /= s.h;
      const int c = static_cast<int>(r % s.c);
      const int n = static_cast<int>(r / s.c);
      std::ostringstream os;
      os << what << ": non-finite value " << im.data[i] << " at (" << n << ", "
         << c << ", " << h << ", " << w << ")";
      throw NonFiniteError(os.str());
    }
  }
}

template <typename T, typename U>
void accumulate_grad(BasicTensor<T> dst, std::span<const U> src) {
  std::span<T> g = dst.mutable_grad();
  if (g.size() != src.size()) {
    throw ShapeError("gradient size mismatch for " + dst.shape().str());
  }
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += static_cast<T>(src[i]);
}

template <typename T>
bool BasicTape<T>::tracks(std::initializer_list<const Tensor*> inputs) const {
  if (!enabled_) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor* t) {
    return t != nullptr && t->defined() && t->requires_grad();
  });
}

template <typename T>
void BasicTape<T>::record(std::string_view op, std::vector<Tensor> inputs,
                          std::vector<Tensor> outputs, BackwardFn fn) {
  if (!enabled_) return;
  entries_.push_back(
      Entry{std::string(op), std::move(inputs), std::move(outputs), std::move(fn)});
}

template <typename T>
void BasicTape<T>::backward(const Tensor& loss) {
  if (!loss.defined()) throw std::invalid_argument("backward: undefined loss");
  if (loss.numel() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " +
                     loss.shape().str());
  }
  if (entries_.empty()) {
    throw std::logic_error("backward: tape is empty (no forward pass recorded)");
  }
  const bool on_tape =
      std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) {
        return std::any_of(e.outputs.begin(), e.outputs.end(),
                           [&](const Tensor& o) { return o.same_as(loss); });
      });
  if (!on_tape) {
    throw std::logic_error("backward: loss was not produced on this tape");
  }

  Tensor seed = loss;
  seed.mutable_grad()[0] += T(1);

  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    const bool live = std::any_of(it->outputs.begin(), it->outputs.end(),
                                  [](const Tensor& o) { return o.has_grad(); });
    if (!live) continue;
    if (!fault_op_.empty() && it->op == fault_op_) {
      for (Tensor& o : it->outputs) {
        for (T& g : o.mutable_grad()) g *= fault_scale_;
      }
    }
    it->fn();
  }
}

template <typename T>
std::vector<std::string> BasicTape<T>::op_names() const {
  std::vector<std::string> names;
  names.reserve(entries_.size());
  for (const Entry& e : entries_) names.push_back(e.op);
  return names;
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template class BasicTape<float>;
template class BasicTape<double>;
template void accumulate_grad<float, float>(BasicTensor<float>, std::span<const float>);
template void accumulate_grad<float, double>(BasicTensor<float>, std::span<const double>);
template void accumulate_grad<double, double>(BasicTensor<double>, std::span<const double>);
template void accumulate_grad<double, float>(BasicTensor<double>, std::span<const float>);

}  // namespace naf
