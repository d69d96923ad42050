#include <algorithm>
#include <cmath>
#include <numbers>

#include "naf/data.hpp"
#include "naf/rng.hpp"

// Procedural 32x32 scenes: a shaded background with a few anti-aliased
// shapes, some carrying a periodic texture. They stand in for photographs
// when the CIFAR-10 archive is not available.

namespace naf {
namespace {

struct Rgb {
  double r, g, b;
};

Rgb random_color(CounterRng& rng) {
  return {rng.uniform(), rng.uniform(), rng.uniform()};
}

Rgb lerp(const Rgb& a, const Rgb& b, double t) {
  return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
}

enum class ShapeKind { Ellipse, Box, Band };

struct Shape2d {
  ShapeKind kind;
  double cx, cy, rx, ry, angle;
  Rgb color;
  double texture_amp, texture_freq, texture_phase, texture_angle;

  // Signed distance-like value in pixels: negative inside.
  double distance(double x, double y) const {
    const double ca = std::cos(angle);
    const double sa = std::sin(angle);
    const double dx = x - cx;
    const double dy = y - cy;
    const double u = ca * dx + sa * dy;
    const double v = -sa * dx + ca * dy;
    switch (kind) {
      case ShapeKind::Ellipse: {
        const double q = std::sqrt((u * u) / (rx * rx) + (v * v) / (ry * ry));
        return (q - 1.0) * std::min(rx, ry);
      }
      case ShapeKind::Box:
        return std::max(std::abs(u) - rx, std::abs(v) - ry);
      case ShapeKind::Band:
        return std::abs(v) - ry;
    }
    return 1e9;
  }
};

}  // namespace

std::vector<ImageRecord> synthesize_images(int count, std::uint64_t seed, int first_index) {
  std::vector<ImageRecord> out(static_cast<std::size_t>(count));
  std::vector<double> canvas(kImageValues);
  for (int n = 0; n < count; ++n) {
    const int index = first_index + n;
    CounterRng rng(derive_key(seed, static_cast<std::uint64_t>(index)));
    ImageRecord& rec = out[static_cast<std::size_t>(n)];
    rec.index = index;
    rec.label = static_cast<std::uint8_t>(rng.below(10));

    const Rgb c0 = random_color(rng);
    const Rgb c1 = random_color(rng);
    const double bg_angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (int y = 0; y < kImageSide; ++y) {
      for (int x = 0; x < kImageSide; ++x) {
        const double t = 0.5 + ((x - 15.5) * std::cos(bg_angle) + (y - 15.5) * std::sin(bg_angle)) / 45.0;
        const Rgb c = lerp(c0, c1, std::clamp(t, 0.0, 1.0));
        const std::size_t p = static_cast<std::size_t>(y) * kImageSide + x;
        canvas[p] = c.r;
        canvas[kImagePlane + p] = c.g;
        canvas[2 * kImagePlane + p] = c.b;
      }
    }

    const int shapes = 2 + static_cast<int>(rng.below(4));
    for (int s = 0; s < shapes; ++s) {
      Shape2d sh;
      const auto kind = rng.below(3);
      sh.kind = kind == 0 ? ShapeKind::Ellipse : kind == 1 ? ShapeKind::Box : ShapeKind::Band;
      sh.cx = rng.uniform(2.0, 30.0);
      sh.cy = rng.uniform(2.0, 30.0);
      sh.rx = rng.uniform(3.0, 12.0);
      sh.ry = sh.kind == ShapeKind::Band ? rng.uniform(1.0, 3.5) : rng.uniform(3.0, 12.0);
      sh.angle = rng.uniform(0.0, std::numbers::pi);
      sh.color = random_color(rng);
      sh.texture_amp = rng.uniform() < 0.4 ? rng.uniform(0.04, 0.15) : 0.0;
      sh.texture_freq = rng.uniform(0.4, 1.6);
      sh.texture_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      sh.texture_angle = rng.uniform(0.0, std::numbers::pi);
      for (int y = 0; y < kImageSide; ++y) {
        for (int x = 0; x < kImageSide; ++x) {
          const double alpha = std::clamp(0.5 - sh.distance(x, y), 0.0, 1.0);
          if (alpha <= 0.0) continue;
          const double tex =
              sh.texture_amp *
              std::sin(sh.texture_freq * (x * std::cos(sh.texture_angle) +
                                          y * std::sin(sh.texture_angle)) +
                       sh.texture_phase);
          const std::size_t p = static_cast<std::size_t>(y) * kImageSide + x;
          const double rgb[3] = {sh.color.r + tex, sh.color.g + tex, sh.color.b + tex};
          for (int c = 0; c < 3; ++c) {
            double& v = canvas[c * kImagePlane + p];
            v = (1.0 - alpha) * v + alpha * rgb[c];
          }
        }
      }
    }
    for (std::size_t i = 0; i < kImageValues; ++i) rec.pixels[i] = quantize_unit(canvas[i]);
  }
  return out;
}

void write_synthetic_cifar10(const std::filesystem::path& dir, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  const auto names = cifar10_file_names();
  for (int b = 0; b < 5; ++b) {
    const auto recs = synthesize_images(kBatchFileRecords, seed, b * kBatchFileRecords);
    write_file(dir / names[b], serialize_cifar10_batch(recs));
  }
  // The test file draws from a disjoint stream.
  const auto test = synthesize_images(kBatchFileRecords, derive_key(seed, 0x7e57), 0);
  write_file(dir / names[5], serialize_cifar10_batch(test));
}

}  // namespace naf
