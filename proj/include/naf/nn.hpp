#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "naf/ops.hpp"
#include "naf/tensor.hpp"

namespace naf {

// ---------------------------------------------------------------------------
// Variants

enum class VariantKind { Baseline, A1_Gelu, A2_Eca, A3_GroupNorm, A4_NoAttention };

enum class NormKind { Layer, Group };
enum class ActivationKind { SimpleGate, Gelu };
enum class AttentionKind { Simplified, Efficient, None };

// The three architectural axes. Every non-baseline variant moves exactly one.
struct VariantTraits {
  NormKind norm;
  ActivationKind activation;
  AttentionKind attention;
};

VariantTraits traits(VariantKind v);
const std::array<VariantKind, 5>& all_variants();
// Stable identifier used in configs, checkpoints and file names.
std::string_view variant_id(VariantKind v);
// Human-readable row label for reports.
std::string_view variant_label(VariantKind v);
VariantKind parse_variant(std::string_view id);

// ---------------------------------------------------------------------------
// Configuration

struct BlockConfig {
  int channels = 32;
  VariantKind variant = VariantKind::Baseline;
  int eca_kernel = 3;
  int gn_groups = 4;

  void validate() const;
};

struct ModelConfig {
  int base_width = 32;
  std::vector<int> enc_blocks{2, 2};
  int mid_blocks = 2;
  std::vector<int> dec_blocks{2, 2};
  VariantKind variant = VariantKind::Baseline;
  int eca_kernel = 3;
  int gn_groups = 4;

  void validate() const;
  int stages() const { return static_cast<int>(enc_blocks.size()); }
  BlockConfig block(int channels) const {
    return BlockConfig{channels, variant, eca_kernel, gn_groups};
  }
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// ---------------------------------------------------------------------------
// Block-level operations

// Per-pixel normalization across channels; gamma and beta are (1, c, 1, 1).
template <typename T>
BasicTensor<T> layer_norm_2d(BasicTape<T>& tape, const BasicTensor<T>& x,
                             const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                             double eps = 1e-6);

// Per-sample normalization over each group of c / groups channels and all
// pixels, followed by a per-channel affine.
template <typename T>
BasicTensor<T> group_norm(BasicTape<T>& tape, const BasicTensor<T>& x, int groups,
                          const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                          double eps = 1e-6);

// Exact form 0.5 * x * (1 + erf(x / sqrt(2))).
template <typename T>
BasicTensor<T> gelu(BasicTape<T>& tape, const BasicTensor<T>& x);

// First channel half times second channel half.
template <typename T>
BasicTensor<T> simple_gate(BasicTape<T>& tape, const BasicTensor<T>& x);

// x * (W * mean_hw(x) + b) per channel. W is (c, c, 1, 1), b is (1, c, 1, 1).
// The scale is purely linear and never clamped.
template <typename T>
BasicTensor<T> sca(BasicTape<T>& tape, const BasicTensor<T>& x,
                   const BasicTensor<T>& weight, const BasicTensor<T>& bias);

// x * sigmoid(conv1d_over_channels(mean_hw(x), kernel)); kernel is (1, 1, 1, k).
template <typename T>
BasicTensor<T> eca(BasicTape<T>& tape, const BasicTensor<T>& x,
                   const BasicTensor<T>& kernel);

// Parameters of one block. Which members are used depends on the variant:
// attention_weight/attention_bias for SCA, eca_kernel for ECA, neither for A4.
template <typename T>
struct BasicNafBlockParams {
  BasicTensor<T> norm_gamma, norm_beta;
  BasicTensor<T> pw1_weight, pw1_bias;  // c -> 2c
  BasicTensor<T> dw_weight, dw_bias;    // 3x3 depthwise on 2c
  BasicTensor<T> pw2_weight, pw2_bias;  // c -> c (2c -> c for GELU)
  BasicTensor<T> sca_weight, sca_bias;
  BasicTensor<T> eca_kernel;
};

// norm -> 1x1 conv (c->2c) -> 3x3 depthwise -> activation -> 1x1 conv (->c)
// -> channel attention -> + x
template <typename T>
BasicTensor<T> naf_block_forward(BasicTape<T>& tape, const BasicTensor<T>& x,
                                 const BlockConfig& cfg,
                                 const BasicNafBlockParams<T>& params);

// ---------------------------------------------------------------------------
// Model

// Named parameters in creation order plus the architecture that owns them.
template <typename T>
class BasicModelState {
 public:
  using Tensor = BasicTensor<T>;

  BasicModelState() = default;
  explicit BasicModelState(ModelConfig config) : config_(std::move(config)) {}

  const ModelConfig& config() const { return config_; }

  void add(const std::string& name, Tensor t);
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  const std::vector<std::pair<std::string, Tensor>>& params() const { return params_; }
  std::vector<std::pair<std::string, Tensor>>& params() { return params_; }
  std::vector<std::string> names() const;

  void zero_grads();

 private:
  ModelConfig config_;
  std::vector<std::pair<std::string, Tensor>> params_;
  std::map<std::string, std::size_t> index_;
};

using ModelState = BasicModelState<float>;
using NafBlockParams = BasicNafBlockParams<float>;

// Builds every parameter of `config` and initializes it from `seed`. Each
// tensor draws from a stream keyed by (seed, name), so variants that share a
// parameter name and shape start from identical values.
template <typename T>
BasicModelState<T> make_model(const ModelConfig& config, std::uint64_t seed);

// Views the parameters of the block stored under `prefix` (e.g. "enc0.b1").
template <typename T>
BasicNafBlockParams<T> block_params(const BasicModelState<T>& model,
                                    const std::string& prefix, const BlockConfig& cfg);

// Adds the parameters of one block under `prefix`.
template <typename T>
void add_block_params(BasicModelState<T>& model, const std::string& prefix,
                      const BlockConfig& cfg, std::uint64_t seed);

// Restored image x + f(x). With the zero-initialized output projection an
// untrained model returns its input unchanged.
template <typename T>
BasicTensor<T> unet_forward(BasicTape<T>& tape, const BasicTensor<T>& x,
                            const BasicModelState<T>& model);

template <typename T>
std::size_t param_count(const BasicModelState<T>& model);

}  // namespace naf
