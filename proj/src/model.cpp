#include <cmath>
#include <stdexcept>

#include "naf/nn.hpp"
#include "naf/rng.hpp"

namespace naf {

VariantTraits traits(VariantKind v) {
  switch (v) {
    case VariantKind::Baseline:
      return {NormKind::Layer, ActivationKind::SimpleGate, AttentionKind::Simplified};
    case VariantKind::A1_Gelu:
      return {NormKind::Layer, ActivationKind::Gelu, AttentionKind::Simplified};
    case VariantKind::A2_Eca:
      return {NormKind::Layer, ActivationKind::SimpleGate, AttentionKind::Efficient};
    case VariantKind::A3_GroupNorm:
      return {NormKind::Group, ActivationKind::SimpleGate, AttentionKind::Simplified};
    case VariantKind::A4_NoAttention:
      return {NormKind::Layer, ActivationKind::SimpleGate, AttentionKind::None};
  }
  throw std::invalid_argument("unknown variant");
}

const std::array<VariantKind, 5>& all_variants() {
  static const std::array<VariantKind, 5> kAll{
      VariantKind::Baseline, VariantKind::A1_Gelu, VariantKind::A2_Eca,
      VariantKind::A3_GroupNorm, VariantKind::A4_NoAttention};
  return kAll;
}

std::string_view variant_id(VariantKind v) {
  switch (v) {
    case VariantKind::Baseline: return "baseline";
    case VariantKind::A1_Gelu: return "a1_gelu";
    case VariantKind::A2_Eca: return "a2_eca";
    case VariantKind::A3_GroupNorm: return "a3_groupnorm";
    case VariantKind::A4_NoAttention: return "a4_no_attention";
  }
  return "?";
}

std::string_view variant_label(VariantKind v) {
  switch (v) {
    case VariantKind::Baseline: return "Baseline";
    case VariantKind::A1_Gelu: return "A1: Replace SimpleGate -> GELU";
    case VariantKind::A2_Eca: return "A2: Replace SCA -> ECA";
    case VariantKind::A3_GroupNorm: return "A3: Replace LayerNorm -> GroupNorm";
    case VariantKind::A4_NoAttention: return "A4: Remove Attention";
  }
  return "?";
}

VariantKind parse_variant(std::string_view id) {
  for (VariantKind v : all_variants()) {
    if (variant_id(v) == id) return v;
  }
  throw std::invalid_argument("unknown variant '" + std::string(id) +
                              "' (expected baseline, a1_gelu, a2_eca, a3_groupnorm "
                              "or a4_no_attention)");
}

void BlockConfig::validate() const {
  if (channels <= 0 || channels % 2 != 0) {
    throw std::invalid_argument("block channels must be positive and even, got " +
                                std::to_string(channels));
  }
  if (eca_kernel <= 0 || eca_kernel % 2 == 0) {
    throw std::invalid_argument("eca_kernel must be odd and positive, got " +
                                std::to_string(eca_kernel));
  }
  if (variant == VariantKind::A3_GroupNorm &&
      (gn_groups <= 0 || channels % gn_groups != 0)) {
    throw std::invalid_argument("block channels " + std::to_string(channels) +
                                " not divisible by gn_groups " + std::to_string(gn_groups));
  }
}

void ModelConfig::validate() const {
  if (base_width <= 0) throw std::invalid_argument("model.width must be positive");
  if (enc_blocks.size() != dec_blocks.size()) {
    throw std::invalid_argument("model.enc_blocks and model.dec_blocks must have equal length");
  }
  if (mid_blocks < 0) throw std::invalid_argument("model.mid_blocks must be non-negative");
  for (int b : enc_blocks) {
    if (b < 0) throw std::invalid_argument("model.enc_blocks entries must be non-negative");
  }
  for (int b : dec_blocks) {
    if (b < 0) throw std::invalid_argument("model.dec_blocks entries must be non-negative");
  }
  for (int s = 0; s <= stages(); ++s) block(base_width << s).validate();
}

template <typename T>
void BasicModelState<T>::add(const std::string& name, Tensor t) {
  if (index_.count(name) != 0) throw std::invalid_argument("duplicate parameter " + name);
  t.set_requires_grad(true);
  index_.emplace(name, params_.size());
  params_.emplace_back(name, std::move(t));
}

template <typename T>
const BasicTensor<T>& BasicModelState<T>::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
  return params_[it->second].second;
}

template <typename T>
BasicTensor<T>& BasicModelState<T>::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
  return params_[it->second].second;
}

template <typename T>
std::vector<std::string> BasicModelState<T>::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [name, t] : params_) out.push_back(name);
  return out;
}

template <typename T>
void BasicModelState<T>::zero_grads() {
  for (auto& [name, t] : params_) t.zero_grad();
}

namespace {

template <typename T>
BasicTensor<T> uniform_tensor(Shape shape, double bound, std::uint64_t seed,
                              const std::string& name) {
  CounterRng rng(derive_key(seed, hash_string(name)));
  std::vector<T> v(shape.numel());
  for (T& x : v) x = static_cast<T>(rng.uniform(-bound, bound));
  return BasicTensor<T>(shape, std::move(v));
}

// Fan-in scaled uniform weight and bias for a convolution.
template <typename T>
void add_conv(BasicModelState<T>& model, const std::string& prefix, int c_out, int c_in_g,
              int k, bool with_bias, std::uint64_t seed) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(c_in_g) * k * k);
  model.add(prefix + ".weight",
            uniform_tensor<T>(Shape{c_out, c_in_g, k, k}, bound, seed, prefix + ".weight"));
  if (with_bias) {
    model.add(prefix + ".bias",
              uniform_tensor<T>(Shape{1, c_out, 1, 1}, bound, seed, prefix + ".bias"));
  }
}

const char* norm_tag(VariantKind v) {
  return traits(v).norm == NormKind::Group ? ".gn" : ".ln";
}

template <typename T>
BasicConvParams<T> conv_of(const BasicModelState<T>& m, const std::string& prefix,
                           int stride, int padding, int groups, bool with_bias = true) {
  BasicConvParams<T> p;
  p.weight = m.get(prefix + ".weight");
  if (with_bias) p.bias = m.get(prefix + ".bias");
  p.stride = stride;
  p.padding = padding;
  p.groups = groups;
  return p;
}

}  // namespace

template <typename T>
void add_block_params(BasicModelState<T>& model, const std::string& prefix,
                      const BlockConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const int c = cfg.channels;
  const VariantTraits tr = traits(cfg.variant);
  const std::string norm = prefix + norm_tag(cfg.variant);
  model.add(norm + ".gamma", BasicTensor<T>::full(Shape{1, c, 1, 1}, T(1)));
  model.add(norm + ".beta", BasicTensor<T>(Shape{1, c, 1, 1}));
  add_conv(model, prefix + ".pw1", 2 * c, c, 1, true, seed);
  add_conv(model, prefix + ".dw", 2 * c, 1, 3, true, seed);
  const int pw2_in = tr.activation == ActivationKind::Gelu ? 2 * c : c;
  add_conv(model, prefix + ".pw2", c, pw2_in, 1, true, seed);
  switch (tr.attention) {
    case AttentionKind::Simplified:
      model.add(prefix + ".sca.weight", BasicTensor<T>(Shape{c, c, 1, 1}));
      model.add(prefix + ".sca.bias", BasicTensor<T>::full(Shape{1, c, 1, 1}, T(1)));
      break;
    case AttentionKind::Efficient:
      model.add(prefix + ".eca.kernel", BasicTensor<T>(Shape{1, 1, 1, cfg.eca_kernel}));
      break;
    case AttentionKind::None:
      break;
  }
}

template <typename T>
BasicNafBlockParams<T> block_params(const BasicModelState<T>& model,
                                    const std::string& prefix, const BlockConfig& cfg) {
  const VariantTraits tr = traits(cfg.variant);
  const std::string norm = prefix + norm_tag(cfg.variant);
  BasicNafBlockParams<T> p;
  p.norm_gamma = model.get(norm + ".gamma");
  p.norm_beta = model.get(norm + ".beta");
  p.pw1_weight = model.get(prefix + ".pw1.weight");
  p.pw1_bias = model.get(prefix + ".pw1.bias");
  p.dw_weight = model.get(prefix + ".dw.weight");
  p.dw_bias = model.get(prefix + ".dw.bias");
  p.pw2_weight = model.get(prefix + ".pw2.weight");
  p.pw2_bias = model.get(prefix + ".pw2.bias");
  if (tr.attention == AttentionKind::Simplified) {
    p.sca_weight = model.get(prefix + ".sca.weight");
    p.sca_bias = model.get(prefix + ".sca.bias");
  } else if (tr.attention == AttentionKind::Efficient) {
    p.eca_kernel = model.get(prefix + ".eca.kernel");
  }
  return p;
}

template <typename T>
BasicTensor<T> naf_block_forward(BasicTape<T>& tape, const BasicTensor<T>& x,
                                 const BlockConfig& cfg,
                                 const BasicNafBlockParams<T>& params) {
  cfg.validate();
  if (x.shape().c != cfg.channels) {
    throw ShapeError("naf_block[input]: expected " + std::to_string(cfg.channels) +
                     " channels, got " + std::to_string(x.shape().c));
  }
  const VariantTraits tr = traits(cfg.variant);
  const int c = cfg.channels;
  auto stage = [](const char* name, auto&& fn) {
    try {
      return fn();
    } catch (const ShapeError& e) {
      throw ShapeError(std::string("naf_block[") + name + "]: " + e.what());
    }
  };

  BasicTensor<T> y = stage("norm", [&] {
    return tr.norm == NormKind::Group
               ? group_norm(tape, x, cfg.gn_groups, params.norm_gamma, params.norm_beta)
               : layer_norm_2d(tape, x, params.norm_gamma, params.norm_beta);
  });
  y = stage("pointwise_expand", [&] {
    return conv2d(tape, y, BasicConvParams<T>{params.pw1_weight, params.pw1_bias});
  });
  y = stage("depthwise", [&] {
    return conv2d(tape, y, BasicConvParams<T>{params.dw_weight, params.dw_bias, 1, 1, 2 * c});
  });
  y = stage("activation", [&] {
    return tr.activation == ActivationKind::Gelu ? gelu(tape, y) : simple_gate(tape, y);
  });
  y = stage("pointwise_project", [&] {
    return conv2d(tape, y, BasicConvParams<T>{params.pw2_weight, params.pw2_bias});
  });
  y = stage("attention", [&] {
    switch (tr.attention) {
      case AttentionKind::Simplified:
        return sca(tape, y, params.sca_weight, params.sca_bias);
      case AttentionKind::Efficient:
        return eca(tape, y, params.eca_kernel);
      case AttentionKind::None:
        break;
    }
    return y;
  });
  return stage("residual", [&] { return add(tape, y, x); });
}

template <typename T>
BasicModelState<T> make_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  BasicModelState<T> m(config);
  const int w = config.base_width;
  const int s_count = config.stages();

  add_conv(m, "intro", w, 3, 3, true, seed);
  for (int s = 0; s < s_count; ++s) {
    const int width = w << s;
    for (int b = 0; b < config.enc_blocks[s]; ++b) {
      add_block_params(m, "enc" + std::to_string(s) + ".b" + std::to_string(b),
                       config.block(width), seed);
    }
    add_conv(m, "down" + std::to_string(s), 2 * width, width, 2, true, seed);
  }
  for (int b = 0; b < config.mid_blocks; ++b) {
    add_block_params(m, "mid.b" + std::to_string(b), config.block(w << s_count), seed);
  }
  for (int k = 0; k < s_count; ++k) {
    const int s = s_count - 1 - k;
    const int deep = w << (s + 1);
    add_conv(m, "up" + std::to_string(s), 2 * deep, deep, 1, false, seed);
    for (int b = 0; b < config.dec_blocks[k]; ++b) {
      add_block_params(m, "dec" + std::to_string(s) + ".b" + std::to_string(b),
                       config.block(w << s), seed);
    }
  }
  // Zero output projection: the untrained network is the identity map.
  m.add("ending.weight", BasicTensor<T>(Shape{3, w, 3, 3}));
  m.add("ending.bias", BasicTensor<T>(Shape{1, 3, 1, 1}));
  return m;
}

template <typename T>
BasicTensor<T> unet_forward(BasicTape<T>& tape, const BasicTensor<T>& x,
                            const BasicModelState<T>& model) {
  const ModelConfig& cfg = model.config();
  const Shape& s = x.shape();
  const int s_count = cfg.stages();
  const int factor = 1 << s_count;
  if (s.c != 3) throw ShapeError("unet_forward: expected 3 input channels, got " + s.str());
  if (s.h % factor != 0 || s.w % factor != 0) {
    throw ShapeError("unet_forward: spatial size " + std::to_string(s.h) + "x" +
                     std::to_string(s.w) + " not divisible by " + std::to_string(factor));
  }

  auto run_blocks = [&](BasicTensor<T> h, const std::string& prefix, int count, int width) {
    const BlockConfig bc = cfg.block(width);
    for (int b = 0; b < count; ++b) {
      const std::string name = prefix + ".b" + std::to_string(b);
      h = naf_block_forward(tape, h, bc, block_params(model, name, bc));
    }
    return h;
  };

  BasicTensor<T> h = conv2d(tape, x, conv_of(model, "intro", 1, 1, 1));
  std::vector<BasicTensor<T>> skips;
  for (int st = 0; st < s_count; ++st) {
    const int width = cfg.base_width << st;
    h = run_blocks(h, "enc" + std::to_string(st), cfg.enc_blocks[st], width);
    skips.push_back(h);
    h = conv2d(tape, h, conv_of(model, "down" + std::to_string(st), 2, 0, 1));
  }
  h = run_blocks(h, "mid", cfg.mid_blocks, cfg.base_width << s_count);
  for (int k = 0; k < s_count; ++k) {
    const int st = s_count - 1 - k;
    h = conv2d(tape, h, conv_of(model, "up" + std::to_string(st), 1, 0, 1, false));
    h = pixel_shuffle(tape, h, 2);
    h = add(tape, h, skips[st]);
    h = run_blocks(h, "dec" + std::to_string(st), cfg.dec_blocks[k], cfg.base_width << st);
  }
  h = conv2d(tape, h, conv_of(model, "ending", 1, 1, 1));
  return add(tape, h, x);
}

template <typename T>
std::size_t param_count(const BasicModelState<T>& model) {
  std::size_t total = 0;
  for (const auto& [name, t] : model.params()) total += t.numel();
  return total;
}

#define NAF_INSTANTIATE_MODEL(T)                                                          \
  template class BasicModelState<T>;                                                     \
  template void add_block_params(BasicModelState<T>&, const std::string&,                \
                                 const BlockConfig&, std::uint64_t);                     \
  template BasicNafBlockParams<T> block_params(const BasicModelState<T>&,                \
                                               const std::string&, const BlockConfig&);  \
  template BasicTensor<T> naf_block_forward(BasicTape<T>&, const BasicTensor<T>&,        \
                                            const BlockConfig&,                          \
                                            const BasicNafBlockParams<T>&);              \
  template BasicModelState<T> make_model(const ModelConfig&, std::uint64_t);             \
  template BasicTensor<T> unet_forward(BasicTape<T>&, const BasicTensor<T>&,             \
                                       const BasicModelState<T>&);                       \
  template std::size_t param_count(const BasicModelState<T>&);

NAF_INSTANTIATE_MODEL(float)
NAF_INSTANTIATE_MODEL(double)

}  // namespace naf
