#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "naf/data.hpp"
#include "naf/nn.hpp"

namespace naf {

inline constexpr double kPsnrCap = 100.0;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;
inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

// 10 log10(1 / MSE) for images on [0, 1]; kPsnrCap when MSE < 1e-10.
double psnr(std::span<const float> a, std::span<const float> b);

// Mean SSIM over channels and pixels, Gaussian 11x11 window (sigma 1.5),
// reflect padding, each CHW plane treated independently.
double ssim(std::span<const float> a, std::span<const float> b, int channels, int height,
            int width);
inline double ssim(std::span<const float> a, std::span<const float> b) {
  return ssim(a, b, kImageChannels, kImageSide, kImageSide);
}

struct MetricsReport {
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  std::size_t n_images = 0;
  std::vector<double> psnr;
  std::vector<double> ssim;
};

// Maps a degraded (b, 3, 32, 32) batch to its restoration.
using Restorer = std::function<Tensor(const Tensor&)>;

// Per-image PSNR/SSIM of clamp(restore(degraded), 0, 1) against clean.
MetricsReport evaluate_pairs(const Restorer& restore, const PairedSet& pairs,
                             int batch_size = 100);
MetricsReport evaluate_testset(const ModelState& model, const PairedSet& pairs,
                               int batch_size = 100);

// Metrics of the degraded inputs themselves (the no-op row).
MetricsReport degraded_metrics(const PairedSet& pairs);

}  // namespace naf
