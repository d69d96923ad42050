#include "naf/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <thread>

namespace naf {
namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

void require_same_shape(const char* op, const Shape& a, const Shape& b) {
  if (!(a == b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.str() + " vs " + b.str());
  }
}

// Runs body(i) for i in [0, count); splits across threads only outside
// deterministic mode. Each index must write disjoint memory.
template <typename Body>
void for_each_sample(int count, Body&& body) {
  const unsigned hw = std::thread::hardware_concurrency();
  if (deterministic() || hw <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  const int workers = std::min<int>(static_cast<int>(hw), count);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      for (int i = t; i < count; i += workers) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

struct ConvGeometry {
  int n, c_in, h, w;
  int c_out, k, stride, padding, groups;
  int ho, wo;
  int cin_g() const { return c_in / groups; }
  int cout_g() const { return c_out / groups; }
  int patch() const { return cin_g() * k * k; }
  int pixels() const { return ho * wo; }
  bool depthwise() const { return cin_g() == 1 && cout_g() == 1; }
  bool pointwise() const { return k == 1 && stride == 1 && padding == 0; }
};

// Columns for one sample and group: rows are (channel, ky, kx), columns are
// output pixels.
template <typename T>
void im2col(const T* x, const ConvGeometry& g, int group, T* cols) {
  const int cin_g = g.cin_g();
  const std::size_t plane = static_cast<std::size_t>(g.h) * g.w;
  const T* base = x + static_cast<std::size_t>(group) * cin_g * plane;
  if (g.pointwise()) {
    std::copy_n(base, cin_g * plane, cols);
    return;
  }
  std::size_t row = 0;
  for (int ci = 0; ci < cin_g; ++ci) {
    const T* src = base + ci * plane;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx, ++row) {
        T* dst = cols + row * g.pixels();
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.padding + ky;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.padding + kx;
            const bool inside = iy >= 0 && iy < g.h && ix >= 0 && ix < g.w;
            dst[oy * g.wo + ox] =
                inside ? src[static_cast<std::size_t>(iy) * g.w + ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, const ConvGeometry& g, T* dx) {
  const std::size_t plane = static_cast<std::size_t>(g.h) * g.w;
  if (g.pointwise()) {
    for (std::size_t i = 0; i < g.cin_g() * plane; ++i) dx[i] += cols[i];
    return;
  }
  std::size_t row = 0;
  for (int ci = 0; ci < g.cin_g(); ++ci) {
    T* dst = dx + ci * plane;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx, ++row) {
        const T* src = cols + row * g.pixels();
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.padding + ky;
          if (iy < 0 || iy >= g.h) continue;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.padding + kx;
            if (ix < 0 || ix >= g.w) continue;
            dst[static_cast<std::size_t>(iy) * g.w + ix] += src[oy * g.wo + ox];
          }
        }
      }
    }
  }
}

// Output columns [first, last) whose kernel tap kx lands inside the input row.
std::pair<int, int> valid_columns(const ConvGeometry& g, int kx) {
  const int lo = g.padding - kx;  // need ox * stride >= lo
  const int hi = g.w - 1 + g.padding - kx;  // and ox * stride <= hi
  const int first = lo <= 0 ? 0 : (lo + g.stride - 1) / g.stride;
  const int last = hi < 0 ? 0 : std::min(g.wo, hi / g.stride + 1);
  return {first, std::max(first, last)};
}

template <typename T>
std::vector<double> to_double(std::span<const T> v) {
  return std::vector<double>(v.begin(), v.end());
}

}  // namespace

int conv_output_size(int in, int k, int stride, int padding) {
  if (k <= 0 || stride <= 0 || padding < 0) {
    throw ShapeError("conv2d: kernel and stride must be positive, padding non-negative");
  }
  const int span = in + 2 * padding - k;
  if (span < 0 || span % stride != 0) {
    throw ShapeError("conv2d: output size (" + std::to_string(in) + " + 2*" +
                     std::to_string(padding) + " - " + std::to_string(k) + ")/" +
                     std::to_string(stride) + " + 1 is not a positive integer");
  }
  return span / stride + 1;
}

template <typename T>
BasicTensor<T> add(BasicTape<T>& tape, const BasicTensor<T>& a,
                   const BasicTensor<T>& b) {
  require_same_shape("add", a.shape(), b.shape());
  std::vector<T> out(a.numel());
  auto av = a.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  const bool track = tape.tracks({&a, &b});
  BasicTensor<T> y(a.shape(), std::move(out), track);
  if (track) {
    tape.record("add", {a, b}, {y}, [a, b, y]() mutable {
      auto g = y.grad();
      if (a.requires_grad()) accumulate_grad(a, g);
      if (b.requires_grad()) accumulate_grad(b, g);
    });
  }
  return y;
}

template <typename T>
BasicTensor<T> mul(BasicTape<T>& tape, const BasicTensor<T>& a,
                   const BasicTensor<T>& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  const bool full = sa == sb;
  const bool per_channel = sb.n == sa.n && sb.c == sa.c && sb.h == 1 && sb.w == 1;
  if (!full && !per_channel) {
    throw ShapeError("mul: cannot broadcast " + sb.str() + " onto " + sa.str());
  }
  const std::size_t plane = full ? 1 : sa.plane();
  std::vector<T> out(a.numel());
  auto av = a.data();
  auto bv = b.data();
  for (std::size_t j = 0; j < bv.size(); ++j) {
    const T s = bv[j];
    for (std::size_t i = j * plane; i < (j + 1) * plane; ++i) out[i] = av[i] * s;
  }
  const bool track = tape.tracks({&a, &b});
  BasicTensor<T> y(sa, std::move(out), track);
  if (track) {
    tape.record("mul", {a, b}, {y}, [a, b, y, plane]() mutable {
      auto g = y.grad();
      auto av = a.data();
      auto bv = b.data();
      if (a.requires_grad()) {
        std::vector<T> da(g.size());
        for (std::size_t j = 0; j < bv.size(); ++j) {
          const T s = bv[j];
          for (std::size_t i = j * plane; i < (j + 1) * plane; ++i) da[i] = g[i] * s;
        }
        accumulate_grad(a, std::span<const T>(da));
      }
      if (b.requires_grad()) {
        std::vector<double> db(b.numel(), 0.0);
        for (std::size_t j = 0; j < db.size(); ++j) {
          double acc = 0.0;
          for (std::size_t i = j * plane; i < (j + 1) * plane; ++i) {
            acc += static_cast<double>(g[i]) * av[i];
          }
          db[j] = acc;
        }
        accumulate_grad(b, std::span<const double>(db));
      }
    });
  }
  return y;
}

template <typename T>
BasicTensor<T> conv2d(BasicTape<T>& tape, const BasicTensor<T>& x,
                      const BasicConvParams<T>& p) {
  const Shape& xs = x.shape();
  const Shape& ws = p.weight.shape();
  if (p.groups <= 0) throw ShapeError("conv2d: groups must be positive");
  if (ws.h != ws.w) throw ShapeError("conv2d: kernel must be square, got " + ws.str());
  if (xs.c % p.groups != 0 || ws.n % p.groups != 0) {
    throw ShapeError("conv2d: groups=" + std::to_string(p.groups) +
                     " must divide c_in=" + std::to_string(xs.c) +
                     " and c_out=" + std::to_string(ws.n));
  }
  if (ws.c * p.groups != xs.c) {
    throw ShapeError("conv2d: input has " + std::to_string(xs.c) +
                     " channels, weight " + ws.str() + " expects " +
                     std::to_string(ws.c * p.groups));
  }
  const bool has_bias = p.bias.defined();
  if (has_bias && p.bias.numel() != static_cast<std::size_t>(ws.n)) {
    throw ShapeError("conv2d: bias length " + std::to_string(p.bias.numel()) +
                     " != c_out " + std::to_string(ws.n));
  }
  ConvGeometry g{xs.n, xs.c, xs.h, xs.w, ws.n, ws.h, p.stride, p.padding, p.groups,
                 conv_output_size(xs.h, ws.h, p.stride, p.padding),
                 conv_output_size(xs.w, ws.w, p.stride, p.padding)};

  const Shape ys{g.n, g.c_out, g.ho, g.wo};
  std::vector<T> out(ys.numel());
  const std::vector<double> wd = to_double(p.weight.data());
  const std::vector<double> bd =
      has_bias ? to_double(p.bias.data()) : std::vector<double>(g.c_out, 0.0);
  const T* xd = x.data().data();
  const std::size_t in_plane = static_cast<std::size_t>(g.h) * g.w;
  const std::size_t out_plane = static_cast<std::size_t>(g.pixels());

  if (g.depthwise()) {
    for_each_sample(g.n, [&](int n) {
      std::vector<double> acc(out_plane);
      for (int c = 0; c < g.c_out; ++c) {
        const T* src = xd + (static_cast<std::size_t>(n) * g.c_in + c) * in_plane;
        const double* k = wd.data() + static_cast<std::size_t>(c) * g.k * g.k;
        std::fill(acc.begin(), acc.end(), bd[c]);
        for (int ky = 0; ky < g.k; ++ky) {
          for (int kx = 0; kx < g.k; ++kx) {
            const double kv = k[ky * g.k + kx];
            const auto [ox0, ox1] = valid_columns(g, kx);
            for (int oy = 0; oy < g.ho; ++oy) {
              const int iy = oy * g.stride - g.padding + ky;
              if (iy < 0 || iy >= g.h) continue;
              const T* row = src + static_cast<std::ptrdiff_t>(iy) * g.w + kx - g.padding;
              double* dst = acc.data() + static_cast<std::size_t>(oy) * g.wo;
              if (g.stride == 1) {
                for (int ox = ox0; ox < ox1; ++ox) dst[ox] += kv * static_cast<double>(row[ox]);
              } else {
                for (int ox = ox0; ox < ox1; ++ox) {
                  dst[ox] += kv * static_cast<double>(row[ox * g.stride]);
                }
              }
            }
          }
        }
        T* dst = out.data() + (static_cast<std::size_t>(n) * g.c_out + c) * out_plane;
        for (std::size_t i = 0; i < out_plane; ++i) dst[i] = static_cast<T>(acc[i]);
      }
    });
  } else {
    for_each_sample(g.n, [&](int n) {
      std::vector<T> cols(static_cast<std::size_t>(g.patch()) * g.pixels());
      RowMatrix<T> res(g.cout_g(), g.pixels());
      for (int grp = 0; grp < g.groups; ++grp) {
        im2col(xd + static_cast<std::size_t>(n) * g.c_in * in_plane, g, grp, cols.data());
        ConstMatrixMap<T> wm(
            p.weight.data().data() + static_cast<std::size_t>(grp) * g.cout_g() * g.patch(),
            g.cout_g(), g.patch());
        ConstMatrixMap<T> cm(cols.data(), g.patch(), g.pixels());
        res.noalias() = wm * cm;
        for (int o = 0; o < g.cout_g(); ++o) {
          const int co = grp * g.cout_g() + o;
          T* dst = out.data() + (static_cast<std::size_t>(n) * g.c_out + co) * out_plane;
          for (int px = 0; px < g.pixels(); ++px) {
            dst[px] = static_cast<T>(static_cast<double>(res(o, px)) + bd[co]);
          }
        }
      }
    });
  }

  const bool track = tape.tracks({&x, &p.weight, &p.bias});
  BasicTensor<T> y(ys, std::move(out), track);
  if (!track) return y;

  BasicTensor<T> weight = p.weight;
  BasicTensor<T> bias = p.bias;
  std::vector<BasicTensor<T>> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  tape.record("conv2d", std::move(inputs), {y},
              [x, weight, bias, y, g, has_bias]() mutable {
    const T* gy = y.grad().data();
    const T* xd = x.data().data();
    const std::vector<double> wd = to_double(weight.data());
    const std::size_t in_plane = static_cast<std::size_t>(g.h) * g.w;
    const std::size_t out_plane = static_cast<std::size_t>(g.pixels());
    const bool want_x = x.requires_grad();
    const bool want_w = weight.requires_grad();

    if (has_bias && bias.requires_grad()) {
      std::vector<double> db(g.c_out, 0.0);
      for (int n = 0; n < g.n; ++n) {
        for (int c = 0; c < g.c_out; ++c) {
          const T* src = gy + (static_cast<std::size_t>(n) * g.c_out + c) * out_plane;
          double acc = 0.0;
          for (std::size_t i = 0; i < out_plane; ++i) acc += src[i];
          db[c] += acc;
        }
      }
      accumulate_grad(bias, std::span<const double>(db));
    }

    std::vector<double> dx(want_x && g.depthwise() ? x.numel() : 0, 0.0);
    std::vector<double> dw(want_w ? weight.numel() : 0, 0.0);

    if (g.depthwise()) {
      const int kk = g.k * g.k;
      std::vector<double> part(g.wo);
      for (int n = 0; n < g.n; ++n) {
        for (int c = 0; c < g.c_out; ++c) {
          const std::size_t in_off = (static_cast<std::size_t>(n) * g.c_in + c) * in_plane;
          const T* src = xd + in_off;
          const T* go = gy + (static_cast<std::size_t>(n) * g.c_out + c) * out_plane;
          const double* k = wd.data() + static_cast<std::size_t>(c) * kk;
          for (int ky = 0; ky < g.k; ++ky) {
            for (int kx = 0; kx < g.k; ++kx) {
              const double kv = k[ky * g.k + kx];
              const auto [ox0, ox1] = valid_columns(g, kx);
              std::fill(part.begin(), part.end(), 0.0);
              for (int oy = 0; oy < g.ho; ++oy) {
                const int iy = oy * g.stride - g.padding + ky;
                if (iy < 0 || iy >= g.h) continue;
                const std::ptrdiff_t row = static_cast<std::ptrdiff_t>(iy) * g.w + kx - g.padding;
                const T* grow = go + static_cast<std::size_t>(oy) * g.wo;
                if (want_x) {
                  double* drow = dx.data() + in_off + row;
                  if (g.stride == 1) {
                    for (int ox = ox0; ox < ox1; ++ox) drow[ox] += kv * grow[ox];
                  } else {
                    for (int ox = ox0; ox < ox1; ++ox) drow[ox * g.stride] += kv * grow[ox];
                  }
                }
                if (want_w) {
                  const T* xrow = src + row;
                  // Per-column partial sums keep the reduction vectorizable.
                  if (g.stride == 1) {
                    for (int ox = ox0; ox < ox1; ++ox) part[ox] += static_cast<double>(grow[ox]) * xrow[ox];
                  } else {
                    for (int ox = ox0; ox < ox1; ++ox) {
                      part[ox] += static_cast<double>(grow[ox]) * xrow[ox * g.stride];
                    }
                  }
                }
              }
              if (want_w) {
                double dk = 0.0;
                for (double v : part) dk += v;
                dw[static_cast<std::size_t>(c) * kk + ky * g.k + kx] += dk;
              }
            }
          }
        }
      }
    } else {
      // Products run in T; the per-sample weight gradients are summed in double.
      std::vector<T> cols(static_cast<std::size_t>(g.patch()) * g.pixels());
      std::vector<T> dx_t(want_x ? x.numel() : 0, T(0));
      RowMatrix<T> dcols(g.patch(), g.pixels());
      RowMatrix<T> dw_n(g.cout_g(), g.patch());
      for (int n = 0; n < g.n; ++n) {
        for (int grp = 0; grp < g.groups; ++grp) {
          const T* go = gy + (static_cast<std::size_t>(n) * g.c_out + grp * g.cout_g()) * out_plane;
          ConstMatrixMap<T> gm(go, g.cout_g(), g.pixels());
          const std::size_t w_off = static_cast<std::size_t>(grp) * g.cout_g() * g.patch();
          if (want_w) {
            im2col(xd + static_cast<std::size_t>(n) * g.c_in * in_plane, g, grp, cols.data());
            ConstMatrixMap<T> cm(cols.data(), g.patch(), g.pixels());
            dw_n.noalias() = gm * cm.transpose();
            const T* src = dw_n.data();
            double* dst = dw.data() + w_off;
            for (Eigen::Index i = 0; i < dw_n.size(); ++i) dst[i] += static_cast<double>(src[i]);
          }
          if (want_x) {
            ConstMatrixMap<T> wm(weight.data().data() + w_off, g.cout_g(), g.patch());
            dcols.noalias() = wm.transpose() * gm;
            col2im_add(dcols.data(), g,
                       dx_t.data() + (static_cast<std::size_t>(n) * g.c_in +
                                      static_cast<std::size_t>(grp) * g.cin_g()) * in_plane);
          }
        }
      }
      if (want_x) accumulate_grad(x, std::span<const T>(dx_t));
    }
    if (want_x && g.depthwise()) accumulate_grad(x, std::span<const double>(dx));
    if (want_w) accumulate_grad(weight, std::span<const double>(dw));
  });
  return y;
}

template <typename T>
BasicTensor<T> global_avg_pool(BasicTape<T>& tape, const BasicTensor<T>& x) {
  const Shape& s = x.shape();
  if (s.h < 1 || s.w < 1) throw ShapeError("global_avg_pool: empty spatial dims in " + s.str());
  const std::size_t plane = s.plane();
  const Shape ys{s.n, s.c, 1, 1};
  std::vector<T> out(ys.numel());
  auto xv = x.data();
  for (std::size_t nc = 0; nc < out.size(); ++nc) {
    double acc = 0.0;
    for (std::size_t i = 0; i < plane; ++i) acc += xv[nc * plane + i];
    out[nc] = static_cast<T>(acc / static_cast<double>(plane));
  }
  const bool track = tape.tracks({&x});
  BasicTensor<T> y(ys, std::move(out), track);
  if (track) {
    tape.record("global_avg_pool", {x}, {y}, [x, y, plane]() mutable {
      auto g = y.grad();
      std::vector<double> dx(x.numel());
      for (std::size_t j = 0; j < g.size(); ++j) {
        const double v = static_cast<double>(g[j]) / static_cast<double>(plane);
        std::fill_n(dx.begin() + j * plane, plane, v);
      }
      accumulate_grad(x, std::span<const double>(dx));
    });
  }
  return y;
}

template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> channel_split(BasicTape<T>& tape,
                                                        const BasicTensor<T>& x) {
  const Shape& s = x.shape();
  if (s.c % 2 != 0) {
    throw ShapeError("channel_split: channel count " + std::to_string(s.c) + " is odd");
  }
  const Shape hs{s.n, s.c / 2, s.h, s.w};
  const std::size_t half = static_cast<std::size_t>(hs.c) * s.plane();
  std::vector<T> first(hs.numel());
  std::vector<T> second(hs.numel());
  auto xv = x.data();
  for (int n = 0; n < s.n; ++n) {
    const std::size_t base = static_cast<std::size_t>(n) * 2 * half;
    std::copy_n(xv.begin() + base, half, first.begin() + n * half);
    std::copy_n(xv.begin() + base + half, half, second.begin() + n * half);
  }
  const bool track = tape.tracks({&x});
  BasicTensor<T> a(hs, std::move(first), track);
  BasicTensor<T> b(hs, std::move(second), track);
  if (track) {
    tape.record("channel_split", {x}, {a, b}, [x, a, b, half]() mutable {
      std::vector<T> dx(x.numel(), T(0));
      const int n_count = x.shape().n;
      for (int n = 0; n < n_count; ++n) {
        const std::size_t base = static_cast<std::size_t>(n) * 2 * half;
        if (a.has_grad()) std::copy_n(a.grad().begin() + n * half, half, dx.begin() + base);
        if (b.has_grad()) std::copy_n(b.grad().begin() + n * half, half, dx.begin() + base + half);
      }
      accumulate_grad(x, std::span<const T>(dx));
    });
  }
  return {a, b};
}

namespace {
// Index of the depth-side element that maps to shuffled position `out_idx`.
struct ShuffleMap {
  Shape in;  // (n, c*r*r, h, w)
  int r;
  std::size_t source(std::size_t out_idx) const {
    const int ow = in.w * r;
    const int oh = in.h * r;
    const int oc = in.c / (r * r);
    std::size_t t = out_idx;
    const int x = static_cast<int>(t % ow);
    t /= ow;
    const int y = static_cast<int>(t % oh);
    t /= oh;
    const int c = static_cast<int>(t % oc);
    const int n = static_cast<int>(t / oc);
    const int ic = c * r * r + (y % r) * r + (x % r);
    return ((static_cast<std::size_t>(n) * in.c + ic) * in.h + y / r) * in.w + x / r;
  }
};

template <typename T>
BasicTensor<T> shuffle_impl(BasicTape<T>& tape, const BasicTensor<T>& x, int r,
                            bool to_space) {
  if (r < 1) throw ShapeError("pixel_shuffle: factor must be positive");
  const Shape& s = x.shape();
  Shape depth;
  Shape space;
  if (to_space) {
    if (s.c % (r * r) != 0) {
      throw ShapeError("pixel_shuffle: channels " + std::to_string(s.c) +
                       " not divisible by r^2 = " + std::to_string(r * r));
    }
    depth = s;
    space = Shape{s.n, s.c / (r * r), s.h * r, s.w * r};
  } else {
    if (s.h % r != 0 || s.w % r != 0) {
      throw ShapeError("pixel_unshuffle: spatial size " + s.str() +
                       " not divisible by " + std::to_string(r));
    }
    space = s;
    depth = Shape{s.n, s.c * r * r, s.h / r, s.w / r};
  }
  const ShuffleMap map{depth, r};
  const Shape ys = to_space ? space : depth;
  std::vector<T> out(ys.numel());
  auto xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (to_space) {
      out[i] = xv[map.source(i)];
    } else {
      out[map.source(i)] = xv[i];
    }
  }
  const bool track = tape.tracks({&x});
  BasicTensor<T> y(ys, std::move(out), track);
  if (track) {
    tape.record(to_space ? "pixel_shuffle" : "pixel_unshuffle", {x}, {y},
                [x, y, map, to_space]() mutable {
      auto g = y.grad();
      std::vector<T> dx(x.numel());
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (to_space) {
          dx[map.source(i)] = g[i];
        } else {
          dx[i] = g[map.source(i)];
        }
      }
      accumulate_grad(x, std::span<const T>(dx));
    });
  }
  return y;
}
}  // namespace

template <typename T>
BasicTensor<T> pixel_shuffle(BasicTape<T>& tape, const BasicTensor<T>& x, int r) {
  return shuffle_impl(tape, x, r, true);
}

template <typename T>
BasicTensor<T> pixel_unshuffle(BasicTape<T>& tape, const BasicTensor<T>& x, int r) {
  return shuffle_impl(tape, x, r, false);
}

template <typename T>
BasicTensor<T> sum(BasicTape<T>& tape, const BasicTensor<T>& x) {
  double acc = 0.0;
  for (T v : x.data()) acc += v;
  const bool track = tape.tracks({&x});
  BasicTensor<T> y(Shape{1, 1, 1, 1}, {static_cast<T>(acc)}, track);
  if (track) {
    tape.record("sum", {x}, {y}, [x, y]() mutable {
      std::vector<T> dx(x.numel(), y.grad()[0]);
      accumulate_grad(x, std::span<const T>(dx));
    });
  }
  return y;
}

template <typename T>
BasicTensor<T> weighted_sum(BasicTape<T>& tape, const BasicTensor<T>& x,
                            std::span<const T> weights) {
  if (weights.size() != x.numel()) {
    throw ShapeError("weighted_sum: " + std::to_string(weights.size()) +
                     " weights for tensor " + x.shape().str());
  }
  double acc = 0.0;
  auto xv = x.data();
  for (std::size_t i = 0; i < xv.size(); ++i) acc += static_cast<double>(weights[i]) * xv[i];
  const bool track = tape.tracks({&x});
  BasicTensor<T> y(Shape{1, 1, 1, 1}, {static_cast<T>(acc)}, track);
  if (track) {
    std::vector<T> wcopy(weights.begin(), weights.end());
    tape.record("weighted_sum", {x}, {y}, [x, y, wcopy]() mutable {
      const T g = y.grad()[0];
      std::vector<T> dx(wcopy.size());
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = g * wcopy[i];
      accumulate_grad(x, std::span<const T>(dx));
    });
  }
  return y;
}

template <typename T>
BasicTensor<T> sigmoid(BasicTape<T>& tape, const BasicTensor<T>& x) {
  std::vector<T> out(x.numel());
  auto xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(xv[i]))));
  }
  const bool track = tape.tracks({&x});
  BasicTensor<T> y(x.shape(), std::move(out), track);
  if (track) {
    tape.record("sigmoid", {x}, {y}, [x, y]() mutable {
      auto g = y.grad();
      auto yv = y.data();
      std::vector<T> dx(g.size());
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = g[i] * yv[i] * (T(1) - yv[i]);
      accumulate_grad(x, std::span<const T>(dx));
    });
  }
  return y;
}

template <typename T>
BasicTensor<T> channel_conv1d(BasicTape<T>& tape, const BasicTensor<T>& pooled,
                              const BasicTensor<T>& kernel) {
  const Shape& s = pooled.shape();
  if (s.h != 1 || s.w != 1) {
    throw ShapeError("channel_conv1d: expected pooled (n, c, 1, 1), got " + s.str());
  }
  const int k = static_cast<int>(kernel.numel());
  if (k % 2 == 0) {
    throw ShapeError("channel_conv1d: kernel length " + std::to_string(k) + " must be odd");
  }
  const int r = (k - 1) / 2;
  std::vector<T> out(pooled.numel());
  auto pv = pooled.data();
  auto kv = kernel.data();
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      double acc = 0.0;
      for (int j = 0; j < k; ++j) {
        const int src = c + j - r;
        if (src < 0 || src >= s.c) continue;
        acc += static_cast<double>(kv[j]) * pv[n * s.c + src];
      }
      out[n * s.c + c] = static_cast<T>(acc);
    }
  }
  const bool track = tape.tracks({&pooled, &kernel});
  BasicTensor<T> y(s, std::move(out), track);
  if (track) {
    tape.record("channel_conv1d", {pooled, kernel}, {y},
                [pooled, kernel, y, k, r]() mutable {
      const Shape& s = pooled.shape();
      auto g = y.grad();
      auto pv = pooled.data();
      auto kv = kernel.data();
      std::vector<double> dp(pooled.numel(), 0.0);
      std::vector<double> dk(k, 0.0);
      for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
          const double gv = g[n * s.c + c];
          for (int j = 0; j < k; ++j) {
            const int src = c + j - r;
            if (src < 0 || src >= s.c) continue;
            dp[n * s.c + src] += kv[j] * gv;
            dk[j] += pv[n * s.c + src] * gv;
          }
        }
      }
      if (pooled.requires_grad()) accumulate_grad(pooled, std::span<const double>(dp));
      if (kernel.requires_grad()) accumulate_grad(kernel, std::span<const double>(dk));
    });
  }
  return y;
}

template <typename T>
BasicTensor<T> clamp(const BasicTensor<T>& x, T lo, T hi) {
  std::vector<T> out(x.data().begin(), x.data().end());
  for (T& v : out) v = std::clamp(v, lo, hi);
  return BasicTensor<T>(x.shape(), std::move(out));
}

#define NAF_INSTANTIATE_OPS(T)                                                         \
  template BasicTensor<T> add(BasicTape<T>&, const BasicTensor<T>&, const BasicTensor<T>&); \
  template BasicTensor<T> mul(BasicTape<T>&, const BasicTensor<T>&, const BasicTensor<T>&); \
  template BasicTensor<T> conv2d(BasicTape<T>&, const BasicTensor<T>&,                \
                                 const BasicConvParams<T>&);                          \
  template BasicTensor<T> global_avg_pool(BasicTape<T>&, const BasicTensor<T>&);      \
  template std::pair<BasicTensor<T>, BasicTensor<T>> channel_split(BasicTape<T>&,     \
                                                                   const BasicTensor<T>&); \
  template BasicTensor<T> pixel_shuffle(BasicTape<T>&, const BasicTensor<T>&, int);   \
  template BasicTensor<T> pixel_unshuffle(BasicTape<T>&, const BasicTensor<T>&, int); \
  template BasicTensor<T> sum(BasicTape<T>&, const BasicTensor<T>&);                  \
  template BasicTensor<T> weighted_sum(BasicTape<T>&, const BasicTensor<T>&,          \
                                       std::span<const T>);                           \
  template BasicTensor<T> sigmoid(BasicTape<T>&, const BasicTensor<T>&);              \
  template BasicTensor<T> channel_conv1d(BasicTape<T>&, const BasicTensor<T>&,        \
                                         const BasicTensor<T>&);                      \
  template BasicTensor<T> clamp(const BasicTensor<T>&, T, T);

NAF_INSTANTIATE_OPS(float)
NAF_INSTANTIATE_OPS(double)

}  // namespace naf
