#include "naf/metrics.hpp"

#include <cmath>
#include <numeric>

namespace naf {

double psnr(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw ShapeError("psnr: size mismatch " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    acc += d * d;
  }
  const double mse = acc / static_cast<double>(a.size());
  if (mse < 1e-10) return kPsnrCap;
  return 10.0 * std::log10(1.0 / mse);
}

namespace {

// Separable filter of one plane with reflect padding.
void filter_plane(const std::vector<double>& src, std::vector<double>& dst,
                  std::vector<double>& tmp, const std::vector<double>& k, int h, int w) {
  const int r = static_cast<int>(k.size() / 2);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int j = -r; j <= r; ++j) acc += k[j + r] * src[y * w + reflect_index(x + j, w)];
      tmp[y * w + x] = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int j = -r; j <= r; ++j) acc += k[j + r] * tmp[reflect_index(y + j, h) * w + x];
      dst[y * w + x] = acc;
    }
  }
}

}  // namespace

double ssim(std::span<const float> a, std::span<const float> b, int channels, int height,
            int width) {
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  if (a.size() != b.size() || a.size() != plane * channels) {
    throw ShapeError("ssim: size mismatch " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + " for " + std::to_string(channels) + "x" +
                     std::to_string(height) + "x" + std::to_string(width));
  }
  const std::vector<double> k = gaussian_kernel_1d(kSsimSigma);
  std::vector<double> pa(plane), pb(plane), paa(plane), pbb(plane), pab(plane);
  std::vector<double> ma(plane), mb(plane), maa(plane), mbb(plane), mab(plane), tmp(plane);
  double total = 0.0;
  for (int c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < plane; ++i) {
      const double x = a[c * plane + i];
      const double y = b[c * plane + i];
      pa[i] = x;
      pb[i] = y;
      paa[i] = x * x;
      pbb[i] = y * y;
      pab[i] = x * y;
    }
    filter_plane(pa, ma, tmp, k, height, width);
    filter_plane(pb, mb, tmp, k, height, width);
    filter_plane(paa, maa, tmp, k, height, width);
    filter_plane(pbb, mbb, tmp, k, height, width);
    filter_plane(pab, mab, tmp, k, height, width);
    for (std::size_t i = 0; i < plane; ++i) {
      const double mu_a = ma[i];
      const double mu_b = mb[i];
      const double var_a = maa[i] - mu_a * mu_a;
      const double var_b = mbb[i] - mu_b * mu_b;
      const double cov = mab[i] - mu_a * mu_b;
      const double num = (2.0 * mu_a * mu_b + kSsimC1) * (2.0 * cov + kSsimC2);
      const double den = (mu_a * mu_a + mu_b * mu_b + kSsimC1) * (var_a + var_b + kSsimC2);
      total += num / den;
    }
  }
  return total / static_cast<double>(plane * channels);
}

namespace {
MetricsReport finish(MetricsReport r) {
  r.n_images = r.psnr.size();
  if (r.n_images > 0) {
    r.mean_psnr = std::accumulate(r.psnr.begin(), r.psnr.end(), 0.0) / r.n_images;
    r.mean_ssim = std::accumulate(r.ssim.begin(), r.ssim.end(), 0.0) / r.n_images;
  }
  return r;
}
}  // namespace

MetricsReport evaluate_pairs(const Restorer& restore, const PairedSet& pairs,
                             int batch_size) {
  MetricsReport report;
  report.psnr.reserve(pairs.size());
  report.ssim.reserve(pairs.size());
  for (std::size_t start = 0; start < pairs.size(); start += batch_size) {
    const std::size_t stop = std::min(pairs.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<int> positions;
    for (std::size_t i = start; i < stop; ++i) positions.push_back(static_cast<int>(i));
    const Batch batch = gather_batch(pairs, positions);
    const Tensor restored = clamp(restore(batch.degraded), 0.0f, 1.0f);
    if (!(restored.shape() == batch.degraded.shape())) {
      throw ShapeError("evaluate: restorer returned " + restored.shape().str());
    }
    for (std::size_t i = 0; i < positions.size(); ++i) {
      auto out = restored.data().subspan(i * kImageValues, kImageValues);
      auto ref = pairs.clean_image(start + i);
      report.psnr.push_back(psnr(out, ref));
      report.ssim.push_back(ssim(out, ref));
    }
  }
  return finish(std::move(report));
}

MetricsReport evaluate_testset(const ModelState& model, const PairedSet& pairs,
                               int batch_size) {
  return evaluate_pairs(
      [&model](const Tensor& x) {
        Tape tape(false);
        return unet_forward(tape, x, model);
      },
      pairs, batch_size);
}

MetricsReport degraded_metrics(const PairedSet& pairs) {
  return evaluate_pairs([](const Tensor& x) { return x; }, pairs);
}

}  // namespace naf
