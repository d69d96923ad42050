#pragma once

// Straightforward reference implementations written from the definitions,
// independent of the library kernels they are compared against.

#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

struct Dims {
  int n, c, h, w;
  std::size_t at(int a, int b, int y, int x) const {
    return ((static_cast<std::size_t>(a) * c + b) * h + y) * w + x;
  }
};

// Direct 7-loop cross-correlation with zero padding and groups.
inline std::vector<double> conv2d(const std::vector<double>& x, Dims xd,
                                  const std::vector<double>& w, int c_out, int k,
                                  const std::vector<double>& bias, int stride, int pad,
                                  int groups, Dims* out_dims = nullptr) {
  const int ho = (xd.h + 2 * pad - k) / stride + 1;
  const int wo = (xd.w + 2 * pad - k) / stride + 1;
  const int cin_g = xd.c / groups;
  const int cout_g = c_out / groups;
  Dims od{xd.n, c_out, ho, wo};
  std::vector<double> y(static_cast<std::size_t>(xd.n) * c_out * ho * wo);
  for (int n = 0; n < xd.n; ++n)
    for (int co = 0; co < c_out; ++co)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
          double acc = bias.empty() ? 0.0 : bias[co];
          const int grp = co / cout_g;
          for (int ci = 0; ci < cin_g; ++ci)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int iy = oy * stride - pad + ky;
                const int ix = ox * stride - pad + kx;
                if (iy < 0 || iy >= xd.h || ix < 0 || ix >= xd.w) continue;
                const double wv = w[((static_cast<std::size_t>(co) * cin_g + ci) * k + ky) * k + kx];
                acc += wv * x[xd.at(n, grp * cin_g + ci, iy, ix)];
              }
          y[od.at(n, co, oy, ox)] = acc;
        }
  if (out_dims) *out_dims = od;
  return y;
}

inline int reflect(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
  return i;
}

inline std::vector<double> gaussian_taps(double sigma, int radius) {
  std::vector<double> t(2 * radius + 1);
  double s = 0.0;
  for (int i = -radius; i <= radius; ++i) s += t[i + radius] = std::exp(-(i * i) / (2 * sigma * sigma));
  for (double& v : t) v /= s;
  return t;
}

// Full 2-D Gaussian filter of one plane with reflect padding.
inline std::vector<double> dense_blur(const std::vector<double>& plane, int h, int w, double sigma,
                                      int radius) {
  const auto t = gaussian_taps(sigma, radius);
  std::vector<double> out(plane.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx)
          acc += t[dy + radius] * t[dx + radius] *
                 plane[static_cast<std::size_t>(reflect(y + dy, h)) * w + reflect(x + dx, w)];
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  return out;
}

// SSIM from its definition: at every pixel, Gaussian-weighted local means,
// variances and covariance over an 11x11 reflect-padded window.
inline double ssim(const std::vector<double>& a, const std::vector<double>& b, int channels, int h,
                   int w) {
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const auto t = gaussian_taps(1.5, 5);
  double total = 0.0;
  for (int c = 0; c < channels; ++c) {
    const std::size_t off = static_cast<std::size_t>(c) * h * w;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int dy = -5; dy <= 5; ++dy)
          for (int dx = -5; dx <= 5; ++dx) {
            const double wt = t[dy + 5] * t[dx + 5];
            const std::size_t i = off + static_cast<std::size_t>(reflect(y + dy, h)) * w + reflect(x + dx, w);
            ma += wt * a[i];
            mb += wt * b[i];
            saa += wt * a[i] * a[i];
            sbb += wt * b[i] * b[i];
            sab += wt * a[i] * b[i];
          }
        const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
        total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      }
  }
  return total / (static_cast<double>(channels) * h * w);
}

inline std::vector<double> channel_means(const std::vector<double>& x, Dims d) {
  std::vector<double> m(static_cast<std::size_t>(d.n) * d.c, 0.0);
  for (int n = 0; n < d.n; ++n)
    for (int c = 0; c < d.c; ++c) {
      for (int y = 0; y < d.h; ++y)
        for (int xx = 0; xx < d.w; ++xx) m[n * d.c + c] += x[d.at(n, c, y, xx)];
      m[n * d.c + c] /= d.h * d.w;
    }
  return m;
}

inline std::vector<double> scale_channels(const std::vector<double>& x, Dims d,
                                          const std::vector<double>& s) {
  std::vector<double> y(x.size());
  for (int n = 0; n < d.n; ++n)
    for (int c = 0; c < d.c; ++c)
      for (int yy = 0; yy < d.h; ++yy)
        for (int xx = 0; xx < d.w; ++xx) y[d.at(n, c, yy, xx)] = x[d.at(n, c, yy, xx)] * s[n * d.c + c];
  return y;
}

// pool -> dense c x c map plus bias -> scale (no squashing).
inline std::vector<double> sca(const std::vector<double>& x, Dims d, const std::vector<double>& w,
                               const std::vector<double>& b) {
  const auto m = channel_means(x, d);
  std::vector<double> s(m.size());
  for (int n = 0; n < d.n; ++n)
    for (int o = 0; o < d.c; ++o) {
      double acc = b[o];
      for (int i = 0; i < d.c; ++i) acc += w[o * d.c + i] * m[n * d.c + i];
      s[n * d.c + o] = acc;
    }
  return scale_channels(x, d, s);
}

// pool -> zero-padded 1-D correlation across channels -> logistic -> scale.
inline std::vector<double> eca(const std::vector<double>& x, Dims d, const std::vector<double>& k) {
  const auto m = channel_means(x, d);
  const int r = static_cast<int>(k.size()) / 2;
  std::vector<double> s(m.size());
  for (int n = 0; n < d.n; ++n)
    for (int c = 0; c < d.c; ++c) {
      double acc = 0.0;
      for (int j = 0; j < static_cast<int>(k.size()); ++j) {
        const int src = c + j - r;
        if (src >= 0 && src < d.c) acc += k[j] * m[n * d.c + src];
      }
      s[n * d.c + c] = 1.0 / (1.0 + std::exp(-acc));
    }
  return scale_channels(x, d, s);
}

// First half of the channels times the second half.
inline std::vector<double> simple_gate(const std::vector<double>& x, Dims d) {
  const int half = d.c / 2;
  std::vector<double> y(static_cast<std::size_t>(d.n) * half * d.h * d.w);
  Dims od{d.n, half, d.h, d.w};
  for (int n = 0; n < d.n; ++n)
    for (int c = 0; c < half; ++c)
      for (int yy = 0; yy < d.h; ++yy)
        for (int xx = 0; xx < d.w; ++xx)
          y[od.at(n, c, yy, xx)] = x[d.at(n, c, yy, xx)] * x[d.at(n, c + half, yy, xx)];
  return y;
}

// out[n][c][y*r + i][x*r + j] = in[n][c*r*r + i*r + j][y][x]
inline std::vector<double> pixel_shuffle(const std::vector<double>& x, Dims d, int r) {
  const int oc = d.c / (r * r);
  Dims od{d.n, oc, d.h * r, d.w * r};
  std::vector<double> y(x.size());
  for (int n = 0; n < d.n; ++n)
    for (int c = 0; c < oc; ++c)
      for (int yy = 0; yy < d.h; ++yy)
        for (int xx = 0; xx < d.w; ++xx)
          for (int i = 0; i < r; ++i)
            for (int j = 0; j < r; ++j)
              y[od.at(n, c, yy * r + i, xx * r + j)] = x[d.at(n, c * r * r + i * r + j, yy, xx)];
  return y;
}

// Per-pixel normalization across channels with per-channel affine.
inline std::vector<double> layer_norm(const std::vector<double>& x, Dims d,
                                      const std::vector<double>& g, const std::vector<double>& b,
                                      double eps) {
  std::vector<double> y(x.size());
  for (int n = 0; n < d.n; ++n)
    for (int yy = 0; yy < d.h; ++yy)
      for (int xx = 0; xx < d.w; ++xx) {
        double mu = 0, var = 0;
        for (int c = 0; c < d.c; ++c) mu += x[d.at(n, c, yy, xx)];
        mu /= d.c;
        for (int c = 0; c < d.c; ++c) var += std::pow(x[d.at(n, c, yy, xx)] - mu, 2);
        var /= d.c;
        for (int c = 0; c < d.c; ++c)
          y[d.at(n, c, yy, xx)] = g[c] * (x[d.at(n, c, yy, xx)] - mu) / std::sqrt(var + eps) + b[c];
      }
  return y;
}

inline std::vector<double> group_norm(const std::vector<double>& x, Dims d, int groups,
                                      const std::vector<double>& g, const std::vector<double>& b,
                                      double eps) {
  std::vector<double> y(x.size());
  const int cg = d.c / groups;
  for (int n = 0; n < d.n; ++n)
    for (int gr = 0; gr < groups; ++gr) {
      double mu = 0, var = 0;
      const double count = static_cast<double>(cg) * d.h * d.w;
      for (int c = gr * cg; c < (gr + 1) * cg; ++c)
        for (int yy = 0; yy < d.h; ++yy)
          for (int xx = 0; xx < d.w; ++xx) mu += x[d.at(n, c, yy, xx)];
      mu /= count;
      for (int c = gr * cg; c < (gr + 1) * cg; ++c)
        for (int yy = 0; yy < d.h; ++yy)
          for (int xx = 0; xx < d.w; ++xx) var += std::pow(x[d.at(n, c, yy, xx)] - mu, 2);
      var /= count;
      for (int c = gr * cg; c < (gr + 1) * cg; ++c)
        for (int yy = 0; yy < d.h; ++yy)
          for (int xx = 0; xx < d.w; ++xx)
            y[d.at(n, c, yy, xx)] = g[c] * (x[d.at(n, c, yy, xx)] - mu) / std::sqrt(var + eps) + b[c];
    }
  return y;
}

}  // namespace oracle
