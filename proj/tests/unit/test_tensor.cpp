#include <cmath>
#include <limits>

#include "doctest.h"
#include "naf/ops.hpp"
#include "naf/tensor.hpp"

using namespace naf;

TEST_SUITE("tensor") {
  TEST_CASE("construction checks data length and dimensions") {
    CHECK_THROWS_AS(Tensor(Shape{1, 2, 2, 2}, std::vector<float>(7)), ShapeError);
    CHECK_THROWS_AS(Tensor(Shape{1, -1, 2, 2}), ShapeError);
    Tensor t(Shape{2, 3, 4, 5});
    CHECK(t.numel() == 120);
    CHECK(t.at(1, 2, 3, 4) == 0.0f);
    CHECK_FALSE(t.has_grad());
  }

  TEST_CASE("copies alias storage, clone does not") {
    Tensor a = Tensor::full(Shape{1, 1, 2, 2}, 1.0f);
    Tensor b = a;
    Tensor c = a.clone();
    b.mutable_data()[0] = 5.0f;
    CHECK(a[0] == 5.0f);
    CHECK(c[0] == 1.0f);
    CHECK(a.same_as(b));
    CHECK_FALSE(a.same_as(c));
  }

  TEST_CASE("at() uses NCHW order") {
    std::vector<float> v(2 * 3 * 2 * 2);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(i);
    Tensor t(Shape{2, 3, 2, 2}, v);
    CHECK(t.at(1, 2, 1, 0) == static_cast<float>(((1 * 3 + 2) * 2 + 1) * 2 + 0));
  }

  TEST_CASE("check_finite names the coordinate") {
    Tensor t(Shape{1, 2, 2, 2});
    t.mutable_data()[6] = std::numeric_limits<float>::quiet_NaN();
    try {
      t.check_finite("probe");
      FAIL("expected NonFiniteError");
    } catch (const NonFiniteError& e) {
      CHECK(std::string(e.what()).find("(0, 1, 1, 0)") != std::string::npos);
    }
  }

  TEST_CASE("backward rejects bad losses") {
    Tape tape;
    Tensor x = Tensor::full(Shape{1, 1, 2, 2}, 2.0f, true);
    CHECK_THROWS_AS(tape.backward(Tensor()), std::invalid_argument);
    Tensor y = sigmoid(tape, x);
    CHECK_THROWS_AS(tape.backward(y), ShapeError);
  }

  TEST_CASE("backward on an empty tape or a foreign loss fails") {
    Tape tape;
    Tensor scalar = Tensor::full(Shape{1, 1, 1, 1}, 1.0f, true);
    CHECK_THROWS_AS(tape.backward(scalar), std::logic_error);

    Tensor x = Tensor::full(Shape{1, 1, 2, 2}, 2.0f, true);
    Tensor s = sum(tape, x);
    Tape other;
    Tensor s2 = sum(other, x);
    CHECK_THROWS_AS(tape.backward(s2), std::logic_error);
    CHECK_THROWS_AS(tape.backward(x), ShapeError);
  }

  TEST_CASE("gradients of a shared input accumulate") {
    Tape tape;
    Tensor x(Shape{1, 1, 1, 3}, {1.0f, 2.0f, 3.0f}, true);
    Tensor y = mul(tape, x, x);  // x^2
    Tensor z = add(tape, y, x);  // x^2 + x
    tape.backward(sum(tape, z));
    REQUIRE(x.has_grad());
    CHECK(x.grad()[0] == doctest::Approx(3.0));
    CHECK(x.grad()[1] == doctest::Approx(5.0));
    CHECK(x.grad()[2] == doctest::Approx(7.0));
  }

  TEST_CASE("a disabled tape records nothing and constants stay untracked") {
    Tape off(false);
    Tensor x = Tensor::full(Shape{1, 1, 2, 2}, 1.0f, true);
    Tensor y = add(off, x, x);
    CHECK(off.empty());
    CHECK_FALSE(y.requires_grad());

    Tape on;
    Tensor c = Tensor::full(Shape{1, 1, 2, 2}, 1.0f);
    Tensor d = add(on, c, c);
    CHECK(on.empty());
    CHECK_FALSE(d.requires_grad());
  }

  TEST_CASE("op names are recorded in order") {
    Tape tape;
    Tensor x = Tensor::full(Shape{1, 2, 2, 2}, 1.0f, true);
    Tensor s = sum(tape, sigmoid(tape, x));
    CHECK(tape.op_names() == std::vector<std::string>{"sigmoid", "sum"});
    (void)s;
  }

  TEST_CASE("inject_fault scales the named rule only") {
    auto grad_of = [](const std::string& fault) {
      Tape tape;
      if (!fault.empty()) tape.inject_fault(fault, 2.0f);
      Tensor x(Shape{1, 1, 1, 2}, {0.5f, -1.0f}, true);
      tape.backward(sum(tape, sigmoid(tape, x)));
      return std::vector<float>(x.grad().begin(), x.grad().end());
    };
    const auto clean = grad_of("");
    const auto faulty = grad_of("sigmoid");
    const auto other = grad_of("add");
    CHECK(faulty[0] == doctest::Approx(2.0 * clean[0]));
    CHECK(other == clean);
  }

  TEST_CASE("zero_grad and clear_grad") {
    Tensor x = Tensor::full(Shape{1, 1, 1, 2}, 1.0f, true);
    x.mutable_grad()[0] = 3.0f;
    x.zero_grad();
    CHECK(x.grad()[0] == 0.0f);
    x.clear_grad();
    CHECK_FALSE(x.has_grad());
  }
}
