#include <cmath>
#include <numbers>

#include "naf/nn.hpp"

namespace naf {
namespace {

template <typename T>
void check_affine(const char* op, const BasicTensor<T>& x, const BasicTensor<T>& gamma,
                  const BasicTensor<T>& beta) {
  const auto c = static_cast<std::size_t>(x.shape().c);
  if (gamma.numel() != c || beta.numel() != c) {
    throw ShapeError(std::string(op) + ": affine parameters have " +
                     std::to_string(gamma.numel()) + "/" + std::to_string(beta.numel()) +
                     " entries for " + std::to_string(c) + " channels");
  }
}

}  // namespace

template <typename T>
BasicTensor<T> layer_norm_2d(BasicTape<T>& tape, const BasicTensor<T>& x,
                             const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                             double eps) {
  check_affine("layer_norm_2d", x, gamma, beta);
  if (!(eps > 0.0)) throw std::invalid_argument("layer_norm_2d: eps must be positive");
  const Shape s = x.shape();
  const std::size_t plane = s.plane();
  auto xv = x.data();
  auto gv = gamma.data();
  auto bv = beta.data();

  // Per (sample, pixel) statistics.
  std::vector<double> mean(static_cast<std::size_t>(s.n) * plane, 0.0);
  std::vector<double> rstd(mean.size(), 0.0);
  std::vector<T> out(x.numel());
  for (int n = 0; n < s.n; ++n) {
    const T* xs = xv.data() + static_cast<std::size_t>(n) * s.c * plane;
    double* mu = mean.data() + n * plane;
    double* rs = rstd.data() + n * plane;
    for (int c = 0; c < s.c; ++c) {
      for (std::size_t p = 0; p < plane; ++p) mu[p] += xs[c * plane + p];
    }
    for (std::size_t p = 0; p < plane; ++p) mu[p] /= s.c;
    for (int c = 0; c < s.c; ++c) {
      for (std::size_t p = 0; p < plane; ++p) {
        const double d = xs[c * plane + p] - mu[p];
        rs[p] += d * d;
      }
    }
    for (std::size_t p = 0; p < plane; ++p) rs[p] = 1.0 / std::sqrt(rs[p] / s.c + eps);
    T* ys = out.data() + static_cast<std::size_t>(n) * s.c * plane;
    for (int c = 0; c < s.c; ++c) {
      for (std::size_t p = 0; p < plane; ++p) {
        const double xhat = (xs[c * plane + p] - mu[p]) * rs[p];
        ys[c * plane + p] = static_cast<T>(gv[c] * xhat + bv[c]);
      }
    }
  }

  const bool track = tape.tracks({&x, &gamma, &beta});
  BasicTensor<T> y(s, std::move(out), track);
  if (!track) return y;
  tape.record("layer_norm_2d", {x, gamma, beta}, {y},
              [x, gamma, beta, y, mean = std::move(mean), rstd = std::move(rstd)]() mutable {
    const Shape s = x.shape();
    const std::size_t plane = s.plane();
    auto xv = x.data();
    auto gv = gamma.data();
    auto dy = y.grad();
    std::vector<double> dx(x.numel());
    std::vector<double> dgamma(s.c, 0.0);
    std::vector<double> dbeta(s.c, 0.0);
    std::vector<double> m1(plane);
    std::vector<double> m2(plane);
    for (int n = 0; n < s.n; ++n) {
      const std::size_t base = static_cast<std::size_t>(n) * s.c * plane;
      const double* mu = mean.data() + n * plane;
      const double* rs = rstd.data() + n * plane;
      std::fill(m1.begin(), m1.end(), 0.0);
      std::fill(m2.begin(), m2.end(), 0.0);
      for (int c = 0; c < s.c; ++c) {
        for (std::size_t p = 0; p < plane; ++p) {
          const std::size_t i = base + c * plane + p;
          const double xhat = (xv[i] - mu[p]) * rs[p];
          const double g = dy[i];
          const double dxhat = g * gv[c];
          m1[p] += dxhat;
          m2[p] += dxhat * xhat;
          dgamma[c] += g * xhat;
          dbeta[c] += g;
        }
      }
      for (int c = 0; c < s.c; ++c) {
        for (std::size_t p = 0; p < plane; ++p) {
          const std::size_t i = base + c * plane + p;
          const double xhat = (xv[i] - mu[p]) * rs[p];
          const double dxhat = dy[i] * static_cast<double>(gv[c]);
          dx[i] = rs[p] * (dxhat - m1[p] / s.c - xhat * m2[p] / s.c);
        }
      }
    }
    if (x.requires_grad()) accumulate_grad(x, std::span<const double>(dx));
    if (gamma.requires_grad()) accumulate_grad(gamma, std::span<const double>(dgamma));
    if (beta.requires_grad()) accumulate_grad(beta, std::span<const double>(dbeta));
  });
  return y;
}

template <typename T>
BasicTensor<T> group_norm(BasicTape<T>& tape, const BasicTensor<T>& x, int groups,
                          const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                          double eps) {
  const Shape s = x.shape();
  if (groups <= 0 || s.c % groups != 0) {
    throw ShapeError("group_norm: " + std::to_string(s.c) +
                     " channels not divisible into " + std::to_string(groups) + " groups");
  }
  check_affine("group_norm", x, gamma, beta);
  if (!(eps > 0.0)) throw std::invalid_argument("group_norm: eps must be positive");
  const std::size_t plane = s.plane();
  const int cg = s.c / groups;
  const std::size_t span = static_cast<std::size_t>(cg) * plane;
  auto xv = x.data();
  auto gv = gamma.data();
  auto bv = beta.data();

  std::vector<double> mean(static_cast<std::size_t>(s.n) * groups);
  std::vector<double> rstd(mean.size());
  std::vector<T> out(x.numel());
  for (int n = 0; n < s.n; ++n) {
    for (int g = 0; g < groups; ++g) {
      const std::size_t base = (static_cast<std::size_t>(n) * groups + g) * span;
      double mu = 0.0;
      for (std::size_t i = 0; i < span; ++i) mu += xv[base + i];
      mu /= static_cast<double>(span);
      double var = 0.0;
      for (std::size_t i = 0; i < span; ++i) {
        const double d = xv[base + i] - mu;
        var += d * d;
      }
      const double rs = 1.0 / std::sqrt(var / static_cast<double>(span) + eps);
      mean[n * groups + g] = mu;
      rstd[n * groups + g] = rs;
      for (std::size_t i = 0; i < span; ++i) {
        const int c = g * cg + static_cast<int>(i / plane);
        out[base + i] = static_cast<T>(gv[c] * ((xv[base + i] - mu) * rs) + bv[c]);
      }
    }
  }

  const bool track = tape.tracks({&x, &gamma, &beta});
  BasicTensor<T> y(s, std::move(out), track);
  if (!track) return y;
  tape.record("group_norm", {x, gamma, beta}, {y},
              [x, gamma, beta, y, groups, mean = std::move(mean),
               rstd = std::move(rstd)]() mutable {
    const Shape s = x.shape();
    const std::size_t plane = s.plane();
    const int cg = s.c / groups;
    const std::size_t span = static_cast<std::size_t>(cg) * plane;
    auto xv = x.data();
    auto gv = gamma.data();
    auto dy = y.grad();
    std::vector<double> dx(x.numel());
    std::vector<double> dgamma(s.c, 0.0);
    std::vector<double> dbeta(s.c, 0.0);
    for (int n = 0; n < s.n; ++n) {
      for (int g = 0; g < groups; ++g) {
        const std::size_t base = (static_cast<std::size_t>(n) * groups + g) * span;
        const double mu = mean[n * groups + g];
        const double rs = rstd[n * groups + g];
        double m1 = 0.0;
        double m2 = 0.0;
        for (std::size_t i = 0; i < span; ++i) {
          const int c = g * cg + static_cast<int>(i / plane);
          const double xhat = (xv[base + i] - mu) * rs;
          const double gy = dy[base + i];
          const double dxhat = gy * gv[c];
          m1 += dxhat;
          m2 += dxhat * xhat;
          dgamma[c] += gy * xhat;
          dbeta[c] += gy;
        }
        m1 /= static_cast<double>(span);
        m2 /= static_cast<double>(span);
        for (std::size_t i = 0; i < span; ++i) {
          const int c = g * cg + static_cast<int>(i / plane);
          const double xhat = (xv[base + i] - mu) * rs;
          const double dxhat = dy[base + i] * static_cast<double>(gv[c]);
          dx[base + i] = rs * (dxhat - m1 - xhat * m2);
        }
      }
    }
    if (x.requires_grad()) accumulate_grad(x, std::span<const double>(dx));
    if (gamma.requires_grad()) accumulate_grad(gamma, std::span<const double>(dgamma));
    if (beta.requires_grad()) accumulate_grad(beta, std::span<const double>(dbeta));
  });
  return y;
}

template <typename T>
BasicTensor<T> gelu(BasicTape<T>& tape, const BasicTensor<T>& x) {
  std::vector<T> out(x.numel());
  auto xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = xv[i];
    out[i] = static_cast<T>(0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2)));
  }
  const bool track = tape.tracks({&x});
  BasicTensor<T> y(x.shape(), std::move(out), track);
  if (track) {
    tape.record("gelu", {x}, {y}, [x, y]() mutable {
      constexpr double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
      auto xv = x.data();
      auto g = y.grad();
      std::vector<double> dx(g.size());
      for (std::size_t i = 0; i < dx.size(); ++i) {
        const double v = xv[i];
        const double cdf = 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
        const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
        dx[i] = g[i] * (cdf + v * pdf);
      }
      accumulate_grad(x, std::span<const double>(dx));
    });
  }
  return y;
}

template <typename T>
BasicTensor<T> simple_gate(BasicTape<T>& tape, const BasicTensor<T>& x) {
  auto [first, second] = channel_split(tape, x);
  return mul(tape, first, second);
}

template <typename T>
BasicTensor<T> sca(BasicTape<T>& tape, const BasicTensor<T>& x,
                   const BasicTensor<T>& weight, const BasicTensor<T>& bias) {
  const int c = x.shape().c;
  if (!(weight.shape() == Shape{c, c, 1, 1}) || bias.numel() != static_cast<std::size_t>(c)) {
    throw ShapeError("sca: expected weight (" + std::to_string(c) + ", " + std::to_string(c) +
                     ", 1, 1) and " + std::to_string(c) + " biases, got " +
                     weight.shape().str() + " and " + std::to_string(bias.numel()));
  }
  const BasicTensor<T> pooled = global_avg_pool(tape, x);
  const BasicTensor<T> scale = conv2d(tape, pooled, BasicConvParams<T>{weight, bias});
  return mul(tape, x, scale);
}

template <typename T>
BasicTensor<T> eca(BasicTape<T>& tape, const BasicTensor<T>& x,
                   const BasicTensor<T>& kernel) {
  if (kernel.numel() % 2 == 0) {
    throw ShapeError("eca: kernel size " + std::to_string(kernel.numel()) + " must be odd");
  }
  const BasicTensor<T> pooled = global_avg_pool(tape, x);
  const BasicTensor<T> logits = channel_conv1d(tape, pooled, kernel);
  return mul(tape, x, sigmoid(tape, logits));
}

#define NAF_INSTANTIATE_NN_OPS(T)                                                          \
  template BasicTensor<T> layer_norm_2d(BasicTape<T>&, const BasicTensor<T>&,             \
                                        const BasicTensor<T>&, const BasicTensor<T>&,     \
                                        double);                                          \
  template BasicTensor<T> group_norm(BasicTape<T>&, const BasicTensor<T>&, int,           \
                                     const BasicTensor<T>&, const BasicTensor<T>&, double); \
  template BasicTensor<T> gelu(BasicTape<T>&, const BasicTensor<T>&);                     \
  template BasicTensor<T> simple_gate(BasicTape<T>&, const BasicTensor<T>&);              \
  template BasicTensor<T> sca(BasicTape<T>&, const BasicTensor<T>&, const BasicTensor<T>&, \
                              const BasicTensor<T>&);                                     \
  template BasicTensor<T> eca(BasicTape<T>&, const BasicTensor<T>&, const BasicTensor<T>&);

NAF_INSTANTIATE_NN_OPS(float)
NAF_INSTANTIATE_NN_OPS(double)

}  // namespace naf
