#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace naf {

// NCHW extent of a tensor. Vectors and matrices use the trailing dims as 1.
struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  constexpr std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  constexpr std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  friend constexpr bool operator==(const Shape&, const Shape&) = default;
  std::string str() const;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shared handle to a dense NCHW buffer. Copies alias the same storage; use
// clone() for a deep copy. Values are fixed after construction apart from
// optimizer updates through mutable_data(); the gradient buffer is lazily
// allocated by the tape.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, bool requires_grad = false);
  BasicTensor(Shape shape, std::vector<T> data, bool requires_grad = false);

  static BasicTensor full(Shape shape, T value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl().shape; }
  std::size_t numel() const { return impl().data.size(); }

  std::span<const T> data() const { return impl().data; }
  std::span<T> mutable_data() { return impl().data; }
  T operator[](std::size_t i) const { return impl().data[i]; }
  T at(int n, int c, int h, int w) const;

  bool requires_grad() const { return impl().requires_grad; }
  void set_requires_grad(bool on) { impl().requires_grad = on; }

  bool has_grad() const { return !impl().grad.empty(); }
  // Empty span when no gradient has been accumulated yet.
  std::span<const T> grad() const { return impl().grad; }
  // Allocates a zero gradient buffer on first use.
  std::span<T> mutable_grad();
  void zero_grad();
  void clear_grad() { std::vector<T>().swap(impl().grad); }

  BasicTensor clone(bool requires_grad = false) const;
  bool same_as(const BasicTensor& other) const { return impl_ == other.impl_; }

  // Throws NonFiniteError naming the first offending coordinate.
  void check_finite(std::string_view what) const;

 private:
  struct Impl {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;
  };

  Impl& impl() const;

  std::shared_ptr<Impl> impl_;
};

// Ordered record of differentiable operations. Ops append an entry when any
// input requires a gradient; backward() replays the entries in reverse.
// A disabled tape records nothing, which is how inference runs.
template <typename T>
class BasicTape {
 public:
  using Tensor = BasicTensor<T>;
  using BackwardFn = std::function<void()>;

  explicit BasicTape(bool enabled = true) : enabled_(enabled) {}

  bool enabled() const { return enabled_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  // True when an op over these inputs must produce a tracked output.
  bool tracks(std::initializer_list<const Tensor*> inputs) const;

  void record(std::string_view op, std::vector<Tensor> inputs,
              std::vector<Tensor> outputs, BackwardFn fn);

  // Seeds d(loss)/d(loss) = 1 and runs every backward rule once, newest first.
  void backward(const Tensor& loss);

  void clear() { entries_.clear(); }

  // Test hook: scales the upstream gradient seen by every rule recorded under
  // `op`, which makes that rule wrong by a known factor.
  void inject_fault(std::string op, T scale) {
    fault_op_ = std::move(op);
    fault_scale_ = scale;
  }

  std::vector<std::string> op_names() const;

 private:
  struct Entry {
    std::string op;
    std::vector<Tensor> inputs;
    std::vector<Tensor> outputs;
    BackwardFn fn;
  };

  bool enabled_;
  std::vector<Entry> entries_;
  std::string fault_op_;
  T fault_scale_ = T(1);
};

template <typename T>
void backward(BasicTape<T>& tape, const BasicTensor<T>& loss) {
  tape.backward(loss);
}

// Adds `src` into the gradient of `dst` (allocating it if needed). Tensors
// are handles, so `dst` is taken by value.
template <typename T, typename U>
void accumulate_grad(BasicTensor<T> dst, std::span<const U> src);

// Process-wide switch. When off, kernels may split work across threads.
void set_deterministic(bool on);
bool deterministic();

// Keeps large freed buffers in the heap so each training step does not
// return its activations to the OS and fault them back in. No-op off glibc.
void retain_freed_memory();

using Tensor = BasicTensor<float>;
using Tape = BasicTape<float>;

}  // namespace naf
