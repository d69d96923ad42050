#include "naf/gradcheck_suite.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <stdexcept>

#include "naf/grad_check.hpp"
#include "naf/nn.hpp"
#include "naf/ops.hpp"
#include "naf/rng.hpp"
#include "naf/train.hpp"

namespace naf {

namespace {

using D = double;
using DTensor = BasicTensor<D>;
using DTape = BasicTape<D>;

DTensor rand_tensor(Shape s, std::uint64_t key, double lo = -1.0, double hi = 1.0) {
  CounterRng rng(key);
  std::vector<D> v(s.numel());
  for (D& x : v) x = rng.uniform(lo, hi);
  return DTensor(s, std::move(v), true);
}

// Reduces y to a scalar with fixed random weights so no coordinate of the
// gradient is trivially uniform.
DTensor reduce(DTape& tape, const DTensor& y, std::uint64_t key) {
  CounterRng rng(key);
  std::vector<D> w(y.numel());
  for (D& x : w) x = rng.uniform(-1.0, 1.0);
  return weighted_sum(tape, y, std::span<const D>(w));
}

struct Case {
  std::string name;
  std::string op;
  std::function<GradCheckResult(const std::string&, D)> run;
};

Case make_case(std::string name, std::string op, std::vector<NamedTensor<D>> inputs,
               std::function<DTensor(DTape&)> body) {
  const std::uint64_t key = hash_string(name);
  ScalarFn<D> f = [body, key](DTape& tape) { return reduce(tape, body(tape), key); };
  return Case{name, op, [f, inputs](const std::string& fault, D scale) {
                return grad_check<D>(f, inputs, kGradCheckStep, fault, scale);
              }};
}

void randomize(BasicModelState<D>& model, std::uint64_t seed) {
  for (auto& [name, t] : model.params()) {
    CounterRng rng(derive_key(seed, hash_string(name)));
    const bool affine = name.find(".gamma") != std::string::npos;
    for (D& v : t.mutable_data()) v = affine ? rng.uniform(0.5, 1.5) : rng.uniform(-0.5, 0.5);
  }
}

std::vector<NamedTensor<D>> named_params(const BasicModelState<D>& model) {
  std::vector<NamedTensor<D>> out;
  for (const auto& [name, t] : model.params()) out.push_back({name, t});
  return out;
}

std::vector<Case> build_cases() {
  std::vector<Case> cases;
  std::uint64_t k = 0x9c;
  auto key = [&k] { return derive_key(0x67c4, ++k); };

  {
    auto a = rand_tensor({2, 3, 4, 4}, key()), b = rand_tensor({2, 3, 4, 4}, key());
    cases.push_back(make_case("add", "add", {{"a", a}, {"b", b}},
                              [a, b](DTape& t) { return add(t, a, b); }));
  }
  {
    auto a = rand_tensor({2, 3, 4, 4}, key()), b = rand_tensor({2, 3, 4, 4}, key());
    cases.push_back(make_case("mul", "mul", {{"a", a}, {"b", b}},
                              [a, b](DTape& t) { return mul(t, a, b); }));
  }
  {
    auto a = rand_tensor({2, 3, 4, 4}, key()), b = rand_tensor({2, 3, 1, 1}, key());
    cases.push_back(make_case("mul[channel broadcast]", "mul", {{"a", a}, {"s", b}},
                              [a, b](DTape& t) { return mul(t, a, b); }));
  }
  struct ConvGeom {
    const char* name;
    int cin, cout, k, stride, pad, groups;
    bool bias;
    int size;
  };
  for (const ConvGeom g : {ConvGeom{"conv2d[3x3,pad1]", 3, 4, 3, 1, 1, 1, true, 5},
                           ConvGeom{"conv2d[2x2,stride2]", 3, 6, 2, 2, 0, 1, true, 6},
                           ConvGeom{"conv2d[1x1,no bias]", 4, 5, 1, 1, 0, 1, false, 4},
                           ConvGeom{"conv2d[3x3,depthwise]", 4, 4, 3, 1, 1, 4, true, 5},
                           ConvGeom{"conv2d[3x3,groups2,stride2]", 4, 6, 3, 2, 1, 2, true, 7}}) {
    auto x = rand_tensor({2, g.cin, g.size, g.size}, key());
    auto w = rand_tensor({g.cout, g.cin / g.groups, g.k, g.k}, key());
    std::vector<NamedTensor<D>> in{{"x", x}, {"weight", w}};
    BasicConvParams<D> p{w, {}, g.stride, g.pad, g.groups};
    if (g.bias) {
      p.bias = rand_tensor({1, g.cout, 1, 1}, key());
      in.push_back({"bias", p.bias});
    }
    cases.push_back(make_case(g.name, "conv2d", in, [x, p](DTape& t) { return conv2d(t, x, p); }));
  }
  {
    auto x = rand_tensor({2, 3, 4, 5}, key());
    cases.push_back(make_case("global_avg_pool", "global_avg_pool", {{"x", x}},
                              [x](DTape& t) { return global_avg_pool(t, x); }));
  }
  {
    auto x = rand_tensor({2, 6, 3, 3}, key());
    cases.push_back(make_case("channel_split", "channel_split", {{"x", x}}, [x](DTape& t) {
      auto [a, b] = channel_split(t, x);
      return mul(t, a, b);
    }));
  }
  {
    auto x = rand_tensor({2, 8, 3, 3}, key());
    cases.push_back(make_case("pixel_shuffle", "pixel_shuffle", {{"x", x}},
                              [x](DTape& t) { return pixel_shuffle(t, x, 2); }));
    auto y = rand_tensor({2, 2, 6, 6}, key());
    cases.push_back(make_case("pixel_unshuffle", "pixel_unshuffle", {{"x", y}},
                              [y](DTape& t) { return pixel_unshuffle(t, y, 2); }));
  }
  {
    // sum feeds a product so its upstream gradient is not the constant seed.
    auto x = rand_tensor({2, 3, 2, 2}, key()), s = rand_tensor({1, 1, 1, 1}, key());
    cases.push_back(make_case("sum", "sum", {{"x", x}, {"s", s}}, [x, s](DTape& t) {
      return mul(t, sum(t, x), s);
    }));
  }
  {
    auto x = rand_tensor({2, 3, 3, 3}, key());
    cases.push_back(make_case("weighted_sum", "weighted_sum", {{"x", x}},
                              [x](DTape& t) { return mul(t, x, x); }));
  }
  {
    auto x = rand_tensor({2, 3, 3, 3}, key(), -3.0, 3.0);
    cases.push_back(make_case("sigmoid", "sigmoid", {{"x", x}},
                              [x](DTape& t) { return sigmoid(t, x); }));
  }
  {
    auto x = rand_tensor({2, 7, 1, 1}, key()), w = rand_tensor({1, 1, 1, 3}, key());
    cases.push_back(make_case("channel_conv1d", "channel_conv1d", {{"x", x}, {"kernel", w}},
                              [x, w](DTape& t) { return channel_conv1d(t, x, w); }));
  }
  {
    auto x = rand_tensor({2, 4, 3, 3}, key());
    auto g = rand_tensor({1, 4, 1, 1}, key(), 0.5, 1.5), b = rand_tensor({1, 4, 1, 1}, key());
    cases.push_back(make_case("layer_norm_2d", "layer_norm_2d",
                              {{"x", x}, {"gamma", g}, {"beta", b}},
                              [x, g, b](DTape& t) { return layer_norm_2d(t, x, g, b); }));
  }
  {
    auto x = rand_tensor({2, 6, 3, 3}, key());
    auto g = rand_tensor({1, 6, 1, 1}, key(), 0.5, 1.5), b = rand_tensor({1, 6, 1, 1}, key());
    cases.push_back(make_case("group_norm", "group_norm", {{"x", x}, {"gamma", g}, {"beta", b}},
                              [x, g, b](DTape& t) { return group_norm(t, x, 3, g, b); }));
  }
  {
    auto x = rand_tensor({2, 3, 3, 3}, key(), -3.0, 3.0);
    cases.push_back(make_case("gelu", "gelu", {{"x", x}}, [x](DTape& t) { return gelu(t, x); }));
  }
  {
    auto x = rand_tensor({2, 6, 3, 3}, key());
    cases.push_back(make_case("simple_gate", "simple_gate", {{"x", x}},
                              [x](DTape& t) { return simple_gate(t, x); }));
  }
  {
    auto x = rand_tensor({2, 4, 3, 3}, key());
    auto w = rand_tensor({4, 4, 1, 1}, key()), b = rand_tensor({1, 4, 1, 1}, key());
    cases.push_back(make_case("sca", "sca", {{"x", x}, {"weight", w}, {"bias", b}},
                              [x, w, b](DTape& t) { return sca(t, x, w, b); }));
  }
  {
    auto x = rand_tensor({2, 5, 3, 3}, key()), w = rand_tensor({1, 1, 1, 3}, key());
    cases.push_back(make_case("eca", "eca", {{"x", x}, {"kernel", w}},
                              [x, w](DTape& t) { return eca(t, x, w); }));
  }
  {
    auto p = rand_tensor({2, 3, 4, 4}, key()), q = rand_tensor({2, 3, 4, 4}, key());
    ScalarFn<D> f = [p, q](DTape& t) { return mse_loss(t, p, q); };
    std::vector<NamedTensor<D>> in{{"pred", p}, {"target", q}};
    cases.push_back(Case{"mse_loss", "mse_loss", [f, in](const std::string& fault, D scale) {
                           return grad_check<D>(f, in, kGradCheckStep, fault, scale);
                         }});
  }

  for (VariantKind v : all_variants()) {
    const BlockConfig bc{8, v, 3, 4};
    BasicModelState<D> holder;
    add_block_params(holder, "b", bc, 0x5eed);
    randomize(holder, key());
    const auto params = block_params(holder, "b", bc);
    auto x = rand_tensor({2, 8, 4, 4}, key());
    auto in = named_params(holder);
    in.insert(in.begin(), {"x", x});
    cases.push_back(make_case("naf_block[" + std::string(variant_id(v)) + "]", "naf_block", in,
                              [x, bc, params](DTape& t) {
                                return naf_block_forward(t, x, bc, params);
                              }));
  }

  for (VariantKind v : all_variants()) {
    ModelConfig mc;
    mc.base_width = 8;
    mc.enc_blocks = {1, 1};
    mc.mid_blocks = 1;
    mc.dec_blocks = {1, 1};
    mc.variant = v;
    auto model = make_model<D>(mc, 0x3a1);
    randomize(model, key());
    auto x = rand_tensor({1, 3, 8, 8}, key(), 0.0, 1.0);
    auto target = DTensor(Shape{1, 3, 8, 8}, std::vector<D>(x.data().begin(), x.data().end()));
    auto in = named_params(model);
    in.insert(in.begin(), {"x", x});
    ScalarFn<D> f = [x, target, model](DTape& t) {
      return mse_loss(t, unet_forward(t, x, model), target);
    };
    cases.push_back(Case{"model[width8," + std::string(variant_id(v)) + "]", "model",
                         [f, in](const std::string& fault, D scale) {
                           return grad_check<D>(f, in, kGradCheckStep, fault, scale);
                         }});
  }
  return cases;
}

}  // namespace

bool GradCheckReport::passed() const {
  return !entries.empty() &&
         std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.passed; });
}

std::vector<std::string> GradCheckReport::failed_ops() const {
  std::vector<std::string> out;
  for (const auto& e : entries) {
    if (!e.passed) out.push_back(e.name);
  }
  return out;
}

const std::vector<std::string>& tape_op_names() {
  static const std::vector<std::string> names{
      "add",         "mul",          "conv2d",      "global_avg_pool", "channel_split",
      "pixel_shuffle", "pixel_unshuffle", "sum",    "weighted_sum",    "sigmoid",
      "channel_conv1d", "layer_norm_2d", "group_norm", "gelu",          "mse_loss"};
  return names;
}

GradCheckReport run_gradcheck_suite(const std::string& fault_op, double fault_scale,
                                    std::ostream* log) {
  if (!fault_op.empty()) {
    const auto& ops = tape_op_names();
    if (std::find(ops.begin(), ops.end(), fault_op) == ops.end()) {
      throw std::invalid_argument("unknown op '" + fault_op + "' for fault injection");
    }
  }
  GradCheckReport report;
  for (const Case& c : build_cases()) {
    GradCheckEntry e;
    e.name = c.name;
    e.op = c.op;
    try {
      const GradCheckResult r = c.run(fault_op, fault_scale);
      e.max_rel_err = r.max_rel_err;
      e.worst = r.worst;
      e.coordinates = r.coordinates;
      e.passed = r.max_rel_err < kGradCheckTolerance;
    } catch (const std::exception& ex) {
      e.worst = ex.what();
      e.passed = false;
    }
    if (log) {
      char line[256];
      std::snprintf(line, sizeof line, "%-32s %6zu coords  max rel err %.3e  %s", e.name.c_str(),
                    e.coordinates, e.max_rel_err, e.passed ? "ok" : "FAIL");
      *log << line << "  at " << e.worst << "\n";
    }
    report.entries.push_back(std::move(e));
  }
  return report;
}

}  // namespace naf
