#pragma once

#include <span>
#include <utility>

#include "naf/tensor.hpp"

namespace naf {

// Weight is (c_out, c_in / groups, k, k); bias, when defined, holds c_out
// values laid out as (1, c_out, 1, 1).
template <typename T>
struct BasicConvParams {
  BasicTensor<T> weight;
  BasicTensor<T> bias;
  int stride = 1;
  int padding = 0;
  int groups = 1;
};
using ConvParams = BasicConvParams<float>;

// Elementwise a + b. Shapes must match.
template <typename T>
BasicTensor<T> add(BasicTape<T>& tape, const BasicTensor<T>& a,
                   const BasicTensor<T>& b);

// Elementwise a * b, or a scaled per channel when b is (n, c, 1, 1).
template <typename T>
BasicTensor<T> mul(BasicTape<T>& tape, const BasicTensor<T>& a,
                   const BasicTensor<T>& b);

// Cross-correlation with zero padding. Dense convolutions run as im2col + GEMM
// in T; depthwise ones and bias/weight-gradient sums accumulate in double.
template <typename T>
BasicTensor<T> conv2d(BasicTape<T>& tape, const BasicTensor<T>& x,
                      const BasicConvParams<T>& p);

// (n, c, h, w) -> (n, c, 1, 1) spatial mean.
template <typename T>
BasicTensor<T> global_avg_pool(BasicTape<T>& tape, const BasicTensor<T>& x);

// Splits the channel axis into its first and second halves.
template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> channel_split(BasicTape<T>& tape,
                                                        const BasicTensor<T>& x);

// Depth-to-space: (n, c*r*r, h, w) -> (n, c, h*r, w*r), where output pixel
// (y*r + i, x*r + j) of channel k reads input channel k*r*r + i*r + j.
template <typename T>
BasicTensor<T> pixel_shuffle(BasicTape<T>& tape, const BasicTensor<T>& x, int r);

// Exact inverse of pixel_shuffle.
template <typename T>
BasicTensor<T> pixel_unshuffle(BasicTape<T>& tape, const BasicTensor<T>& x, int r);

// Sum of all elements as a (1, 1, 1, 1) tensor.
template <typename T>
BasicTensor<T> sum(BasicTape<T>& tape, const BasicTensor<T>& x);

// sum_i weights[i] * x[i]; the weights are constants.
template <typename T>
BasicTensor<T> weighted_sum(BasicTape<T>& tape, const BasicTensor<T>& x,
                            std::span<const T> weights);

template <typename T>
BasicTensor<T> sigmoid(BasicTape<T>& tape, const BasicTensor<T>& x);

// 1-D convolution along the channel axis of a pooled (n, c, 1, 1) tensor with
// an odd-length kernel stored as (1, 1, 1, k), zero padding (k - 1) / 2, no bias.
template <typename T>
BasicTensor<T> channel_conv1d(BasicTape<T>& tape, const BasicTensor<T>& pooled,
                              const BasicTensor<T>& kernel);

// Untracked elementwise clamp to [lo, hi].
template <typename T>
BasicTensor<T> clamp(const BasicTensor<T>& x, T lo, T hi);

// Output extent of a convolution along one axis, or throws when the
// geometry does not produce a positive integer size.
int conv_output_size(int in, int k, int stride, int padding);

}  // namespace naf
