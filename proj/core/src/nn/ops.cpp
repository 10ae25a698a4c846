#include "faceerase/nn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

namespace faceerase::nn::ops {

namespace {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRM = Eigen::Map<MatRM<T>>;
template <typename T>
using CMapRM = Eigen::Map<const MatRM<T>>;

// Fixed lane layout so the float summation order never depends on where the
// buffers happen to sit in memory (Eigen's reductions peel by address).
template <typename T>
T ordered_dot(const T* a, const T* b, std::size_t n) {
  constexpr std::size_t kLanes = 16;
  T lane[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    for (std::size_t j = 0; j < kLanes; ++j) lane[j] += a[i + j] * b[i + j];
  T acc{0};
  for (; i < n; ++i) acc += a[i] * b[i];
  for (std::size_t j = 0; j < kLanes; ++j) acc += lane[j];
  return acc;
}

template <typename T>
T ordered_sum(const T* a, std::size_t n) {
  constexpr std::size_t kLanes = 16;
  T lane[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    for (std::size_t j = 0; j < kLanes; ++j) lane[j] += a[i + j];
  T acc{0};
  for (; i < n; ++i) acc += a[i];
  for (std::size_t j = 0; j < kLanes; ++j) acc += lane[j];
  return acc;
}

template <typename T>
Tensor<T>& grad_of(Node<T>& self, std::size_t i) {
  return self.inputs[i]->ensure_grad();
}

template <typename T>
bool wants_grad(Node<T>& self, std::size_t i) {
  return self.inputs[i]->requires_grad;
}

template <typename T>
void im2col(const T* img, int cin, int h, int w, int k, const ConvParams& p, int ho, int wo,
            T* col) {
  const std::size_t plane = static_cast<std::size_t>(ho) * wo;
  for (int ci = 0; ci < cin; ++ci) {
    const T* src = img + static_cast<std::size_t>(ci) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* dst = col + (static_cast<std::size_t>(ci * k + ky) * k + kx) * plane;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * p.stride - p.pad + ky * p.dilation;
          T* row = dst + static_cast<std::size_t>(oy) * wo;
          if (iy < 0 || iy >= h) {
            std::fill(row, row + wo, T{0});
            continue;
          }
          const T* srow = src + static_cast<std::size_t>(iy) * w;
          const int x0 = -p.pad + kx * p.dilation;
          if (p.stride == 1) {
            int lo = std::max(0, -x0);
            int hi = std::min(wo, w - x0);
            if (hi < lo) hi = lo;
            std::fill(row, row + lo, T{0});
            std::copy(srow + x0 + lo, srow + x0 + hi, row + lo);
            std::fill(row + hi, row + wo, T{0});
          } else {
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * p.stride + x0;
              row[ox] = (ix >= 0 && ix < w) ? srow[ix] : T{0};
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, int cin, int h, int w, int k, const ConvParams& p, int ho, int wo,
            T* img) {
  const std::size_t plane = static_cast<std::size_t>(ho) * wo;
  for (int ci = 0; ci < cin; ++ci) {
    T* dst = img + static_cast<std::size_t>(ci) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* src = col + (static_cast<std::size_t>(ci * k + ky) * k + kx) * plane;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * p.stride - p.pad + ky * p.dilation;
          if (iy < 0 || iy >= h) continue;
          const T* row = src + static_cast<std::size_t>(oy) * wo;
          T* drow = dst + static_cast<std::size_t>(iy) * w;
          const int x0 = -p.pad + kx * p.dilation;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * p.stride + x0;
            if (ix >= 0 && ix < w) drow[ix] += row[ox];
          }
        }
      }
    }
  }
}

// Direct stride-1 convolution, used where im2col traffic outweighs the GEMM
// (few input or output channels). Rows are processed as contiguous axpy runs.
struct TapRange {
  int dy, dx;      // input offset of this tap
  int oy0, oy1;    // output rows with a valid input row
  int ox0, ox1;    // output cols with a valid input col
};

inline TapRange tap_range(int ky, int kx, const ConvParams& p, int h, int w, int ho, int wo) {
  TapRange t{};
  t.dy = ky * p.dilation - p.pad;
  t.dx = kx * p.dilation - p.pad;
  t.oy0 = std::max(0, -t.dy);
  t.oy1 = std::min(ho, h - t.dy);
  t.ox0 = std::max(0, -t.dx);
  t.ox1 = std::min(wo, w - t.dx);
  return t;
}

template <typename T>
void direct_forward(const T* x, int cin, int h, int w, const T* weight, int cout, int k,
                    const ConvParams& p, int ho, int wo, T* y) {
  for (int co = 0; co < cout; ++co) {
    T* yp = y + static_cast<std::size_t>(co) * ho * wo;
    for (int ci = 0; ci < cin; ++ci) {
      const T* xp = x + static_cast<std::size_t>(ci) * h * w;
      const T* wk = weight + (static_cast<std::size_t>(co) * cin + ci) * k * k;
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx) {
          const T wv = wk[ky * k + kx];
          const TapRange t = tap_range(ky, kx, p, h, w, ho, wo);
          for (int oy = t.oy0; oy < t.oy1; ++oy) {
            T* __restrict yr = yp + static_cast<std::size_t>(oy) * wo;
            const T* __restrict xr = xp + static_cast<std::size_t>(oy + t.dy) * w + t.dx;
            for (int ox = t.ox0; ox < t.ox1; ++ox) yr[ox] += wv * xr[ox];
          }
        }
    }
  }
}

template <typename T>
void direct_backward(const T* x, int cin, int h, int w, const T* weight, int cout, int k,
                     const ConvParams& p, int ho, int wo, const T* dy, T* dx, T* dw) {
  for (int co = 0; co < cout; ++co) {
    const T* gp = dy + static_cast<std::size_t>(co) * ho * wo;
    for (int ci = 0; ci < cin; ++ci) {
      const T* xp = x + static_cast<std::size_t>(ci) * h * w;
      T* dxp = dx ? dx + static_cast<std::size_t>(ci) * h * w : nullptr;
      const std::size_t wbase = (static_cast<std::size_t>(co) * cin + ci) * k * k;
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx) {
          const T wv = weight[wbase + ky * k + kx];
          const TapRange t = tap_range(ky, kx, p, h, w, ho, wo);
          T acc{0};
          for (int oy = t.oy0; oy < t.oy1; ++oy) {
            const T* __restrict gr = gp + static_cast<std::size_t>(oy) * wo;
            const std::size_t ioff = static_cast<std::size_t>(oy + t.dy) * w + t.dx;
            if (dw && t.ox1 > t.ox0) {
              acc += ordered_dot(gr + t.ox0, xp + ioff + t.ox0, static_cast<std::size_t>(t.ox1 - t.ox0));
            }
            if (dxp) {
              T* __restrict dr = dxp + ioff;
              for (int ox = t.ox0; ox < t.ox1; ++ox) dr[ox] += wv * gr[ox];
            }
          }
          if (dw) dw[wbase + ky * k + kx] += acc;
        }
    }
  }
}

/// Direct path for stride-1 output heads, where im2col would be a matrix-vector product.
inline bool use_direct(int /*cin*/, int cout, int k, const ConvParams& p) {
  return p.stride == 1 && k > 1 && cout <= 2;
}

Shape broadcast_shape(const Shape& a, const Shape& b) {
  auto one = [](int x, int y) {
    if (x == y) return x;
    if (x == 1) return y;
    if (y == 1) return x;
    throw ShapeError("shapes are not broadcast compatible");
  };
  return {one(a.n, b.n), one(a.c, b.c), one(a.h, b.h), one(a.w, b.w)};
}

struct Strides {
  std::size_t n, c, h, w;
};

Strides broadcast_strides(const Shape& s) {
  const std::size_t w = s.w == 1 ? 0 : 1;
  const std::size_t h = s.h == 1 ? 0 : static_cast<std::size_t>(s.w);
  const std::size_t c = s.c == 1 ? 0 : static_cast<std::size_t>(s.h) * s.w;
  const std::size_t n = s.n == 1 ? 0 : static_cast<std::size_t>(s.c) * s.h * s.w;
  return {n, c, h, w};
}

/// Visits every output element with the matching flat offsets into a and b.
template <typename F>
void for_each_broadcast(const Shape& out, const Shape& a, const Shape& b, F&& f) {
  if (a == out && b == out) {
    const std::size_t total = out.numel();
    for (std::size_t i = 0; i < total; ++i) f(i, i, i);
    return;
  }
  const Strides sa = broadcast_strides(a);
  const Strides sb = broadcast_strides(b);
  std::size_t o = 0;
  for (int n = 0; n < out.n; ++n)
    for (int c = 0; c < out.c; ++c)
      for (int y = 0; y < out.h; ++y) {
        const std::size_t ia = n * sa.n + c * sa.c + y * sa.h;
        const std::size_t ib = n * sb.n + c * sb.c + y * sb.h;
        for (int x = 0; x < out.w; ++x, ++o) f(o, ia + x * sa.w, ib + x * sb.w);
      }
}

template <typename T, typename Fwd, typename Bwd>
Var<T> unary(const Var<T>& x, Fwd fwd, Bwd bwd) {
  const Tensor<T>& xv = x.value();
  Tensor<T> out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xv[i]);
  // bwd(x, y, dy) -> dx
  return make_result<T>(std::move(out), {x}, [bwd](Node<T>& self) {
    const Tensor<T>& xin = self.inputs[0]->value;
    Tensor<T>& gx = grad_of(self, 0);
    for (std::size_t i = 0; i < gx.size(); ++i)
      gx[i] += bwd(xin[i], self.value[i], self.grad[i]);
  });
}

}  // namespace

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, ConvParams p) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  if (ws.c != xs.c) {
    throw ShapeError("conv2d: input has " + std::to_string(xs.c) + " channels, weight expects " +
                     std::to_string(ws.c));
  }
  if (ws.h != ws.w) throw ShapeError("conv2d: square kernels only");
  const int k = ws.h;
  const int cout = ws.n;
  const int ho = conv_out_extent(xs.h, k, p);
  const int wo = conv_out_extent(xs.w, k, p);
  if (ho <= 0 || wo <= 0) throw ShapeError("conv2d: input " + xs.str() + " too small");
  const int kdim = xs.c * k * k;
  const std::size_t plane = static_cast<std::size_t>(ho) * wo;
  const bool pointwise = k == 1 && p.stride == 1 && p.pad == 0;
  const bool direct = use_direct(xs.c, cout, k, p);

  Tensor<T> out(Shape{xs.n, cout, ho, wo});
  std::vector<T> col(pointwise || direct ? 0 : static_cast<std::size_t>(kdim) * plane);
  CMapRM<T> wmat(weight.value().data(), cout, kdim);
  for (int n = 0; n < xs.n && direct; ++n) {
    T* y = out.plane(n, 0);
    for (int co = 0; co < cout; ++co) {
      std::fill_n(y + co * plane, plane, bias.defined() ? bias.value()[co] : T{0});
    }
    direct_forward(x.value().plane(n, 0), xs.c, xs.h, xs.w, weight.value().data(), cout, k, p, ho,
                   wo, y);
  }
  for (int n = 0; n < xs.n && !direct; ++n) {
    const T* src = x.value().plane(n, 0);
    if (!pointwise) im2col(src, xs.c, xs.h, xs.w, k, p, ho, wo, col.data());
    CMapRM<T> cmat(pointwise ? src : col.data(), kdim, static_cast<Eigen::Index>(plane));
    MapRM<T> omat(out.plane(n, 0), cout, static_cast<Eigen::Index>(plane));
    omat.noalias() = wmat * cmat;
    if (bias.defined()) {
      const T* b = bias.value().data();
      for (int co = 0; co < cout; ++co) omat.row(co).array() += b[co];
    }
  }

  std::vector<Var<T>> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_result<T>(std::move(out), inputs, [p, k, ho, wo, kdim, plane, pointwise, direct](Node<T>& self) {
    const Tensor<T>& xin = self.inputs[0]->value;
    const Tensor<T>& win = self.inputs[1]->value;
    const Shape xs2 = xin.shape();
    const int cout2 = win.shape().n;
    const bool gx_on = wants_grad(self, 0);
    const bool gw_on = wants_grad(self, 1);
    const bool gb_on = self.inputs.size() > 2 && wants_grad(self, 2);
    if (direct) {
      for (int n = 0; n < xs2.n; ++n) {
        const T* dy = self.grad.plane(n, 0);
        if (gb_on) {
          T* db = grad_of(self, 2).data();
          for (int co = 0; co < cout2; ++co) {
            T acc{0};
            for (std::size_t i = 0; i < plane; ++i) acc += dy[co * plane + i];
            db[co] += acc;
          }
        }
        direct_backward(xin.plane(n, 0), xs2.c, xs2.h, xs2.w, win.data(), cout2, k, p, ho, wo, dy,
                        gx_on ? grad_of(self, 0).plane(n, 0) : nullptr,
                        gw_on ? grad_of(self, 1).data() : nullptr);
      }
      return;
    }
    std::vector<T> col(pointwise ? 0 : static_cast<std::size_t>(kdim) * plane);
    std::vector<T> dcol(gx_on && !pointwise ? static_cast<std::size_t>(kdim) * plane : 0);
    CMapRM<T> wmat(win.data(), cout2, kdim);
    for (int n = 0; n < xs2.n; ++n) {
      CMapRM<T> dy(self.grad.plane(n, 0), cout2, static_cast<Eigen::Index>(plane));
      if (gw_on) {
        const T* src = xin.plane(n, 0);
        if (!pointwise) im2col(src, xs2.c, xs2.h, xs2.w, k, p, ho, wo, col.data());
        CMapRM<T> cmat(pointwise ? src : col.data(), kdim, static_cast<Eigen::Index>(plane));
        MapRM<T> dw(grad_of(self, 1).data(), cout2, kdim);
        dw.noalias() += dy * cmat.transpose();
      }
      if (gb_on) {
        T* db = grad_of(self, 2).data();
        for (int co = 0; co < cout2; ++co) db[co] += ordered_sum(dy.data() + static_cast<std::size_t>(co) * plane, plane);
      }
      if (gx_on) {
        T* dx = grad_of(self, 0).plane(n, 0);
        if (pointwise) {
          MapRM<T> dxm(dx, kdim, static_cast<Eigen::Index>(plane));
          dxm.noalias() += wmat.transpose() * dy;
        } else {
          MapRM<T> dc(dcol.data(), kdim, static_cast<Eigen::Index>(plane));
          dc.noalias() = wmat.transpose() * dy;
          col2im(dcol.data(), xs2.c, xs2.h, xs2.w, k, p, ho, wo, dx);
        }
      }
    }
  });
}

template <typename T>
Var<T> instance_norm(const Var<T>& x, T eps) {
  const Shape s = x.shape();
  const std::size_t hw = s.plane();
  Tensor<T> out(s);
  std::vector<T> inv_std(static_cast<std::size_t>(s.n) * s.c);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const T* src = x.value().plane(n, c);
      T* dst = out.plane(n, c);
      double mu = 0;
      for (std::size_t i = 0; i < hw; ++i) mu += src[i];
      mu /= static_cast<double>(hw);
      double var = 0;
      for (std::size_t i = 0; i < hw; ++i) {
        const double d = src[i] - mu;
        var += d * d;
      }
      var /= static_cast<double>(hw);
      const T is = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
      inv_std[static_cast<std::size_t>(n) * s.c + c] = is;
      const T m = static_cast<T>(mu);
      for (std::size_t i = 0; i < hw; ++i) dst[i] = (src[i] - m) * is;
    }
  return make_result<T>(std::move(out), {x}, [inv_std = std::move(inv_std), hw](Node<T>& self) {
    const Shape s2 = self.value.shape();
    Tensor<T>& gx = grad_of(self, 0);
    for (int n = 0; n < s2.n; ++n)
      for (int c = 0; c < s2.c; ++c) {
        const T* y = self.value.plane(n, c);
        const T* dy = self.grad.plane(n, c);
        T* dx = gx.plane(n, c);
        double mdy = 0;
        double mdyy = 0;
        for (std::size_t i = 0; i < hw; ++i) {
          mdy += dy[i];
          mdyy += static_cast<double>(dy[i]) * y[i];
        }
        const T a = static_cast<T>(mdy / static_cast<double>(hw));
        const T b = static_cast<T>(mdyy / static_cast<double>(hw));
        const T is = inv_std[static_cast<std::size_t>(n) * s2.c + c];
        for (std::size_t i = 0; i < hw; ++i) dx[i] += is * (dy[i] - a - y[i] * b);
      }
  });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  return unary<T>(
      x, [](T v) { return v > T{0} ? v : T{0}; },
      [](T v, T, T g) { return v > T{0} ? g : T{0}; });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope) {
  return unary<T>(
      x, [slope](T v) { return v > T{0} ? v : slope * v; },
      [slope](T v, T, T g) { return v > T{0} ? g : slope * g; });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  return unary<T>(
      x, [](T v) { return T{1} / (T{1} + std::exp(-v)); },
      [](T, T y, T g) { return g * y * (T{1} - y); });
}

template <typename T>
Var<T> tanh(const Var<T>& x) {
  return unary<T>(
      x, [](T v) { return std::tanh(v); }, [](T, T y, T g) { return g * (T{1} - y * y); });
}

template <typename T>
Var<T> abs(const Var<T>& x) {
  return unary<T>(
      x, [](T v) { return std::abs(v); },
      [](T v, T, T g) { return v > T{0} ? g : (v < T{0} ? -g : T{0}); });
}

template <typename T>
Var<T> log_clamped(const Var<T>& x, T eps) {
  return unary<T>(
      x, [eps](T v) { return std::log(std::clamp(v, eps, T{1})); },
      [eps](T v, T, T g) { return (v > eps && v < T{1}) ? g / v : T{0}; });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  const Shape os = broadcast_shape(a.shape(), b.shape());
  Tensor<T> out(os);
  const T* av = a.value().data();
  const T* bv = b.value().data();
  for_each_broadcast(os, a.shape(), b.shape(),
                     [&](std::size_t o, std::size_t ia, std::size_t ib) { out[o] = av[ia] + bv[ib]; });
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
    const Shape sa = self.inputs[0]->value.shape();
    const Shape sb = self.inputs[1]->value.shape();
    T* ga = wants_grad(self, 0) ? grad_of(self, 0).data() : nullptr;
    T* gb = wants_grad(self, 1) ? grad_of(self, 1).data() : nullptr;
    const T* g = self.grad.data();
    for_each_broadcast(self.value.shape(), sa, sb, [&](std::size_t o, std::size_t ia, std::size_t ib) {
      if (ga) ga[ia] += g[o];
      if (gb) gb[ib] += g[o];
    });
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  const Shape os = broadcast_shape(a.shape(), b.shape());
  Tensor<T> out(os);
  const T* av = a.value().data();
  const T* bv = b.value().data();
  for_each_broadcast(os, a.shape(), b.shape(),
                     [&](std::size_t o, std::size_t ia, std::size_t ib) { out[o] = av[ia] - bv[ib]; });
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
    const Shape sa = self.inputs[0]->value.shape();
    const Shape sb = self.inputs[1]->value.shape();
    T* ga = wants_grad(self, 0) ? grad_of(self, 0).data() : nullptr;
    T* gb = wants_grad(self, 1) ? grad_of(self, 1).data() : nullptr;
    const T* g = self.grad.data();
    for_each_broadcast(self.value.shape(), sa, sb, [&](std::size_t o, std::size_t ia, std::size_t ib) {
      if (ga) ga[ia] += g[o];
      if (gb) gb[ib] -= g[o];
    });
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  const Shape os = broadcast_shape(a.shape(), b.shape());
  Tensor<T> out(os);
  const T* av = a.value().data();
  const T* bv = b.value().data();
  for_each_broadcast(os, a.shape(), b.shape(),
                     [&](std::size_t o, std::size_t ia, std::size_t ib) { out[o] = av[ia] * bv[ib]; });
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
    const Shape sa = self.inputs[0]->value.shape();
    const Shape sb = self.inputs[1]->value.shape();
    const T* av2 = self.inputs[0]->value.data();
    const T* bv2 = self.inputs[1]->value.data();
    T* ga = wants_grad(self, 0) ? grad_of(self, 0).data() : nullptr;
    T* gb = wants_grad(self, 1) ? grad_of(self, 1).data() : nullptr;
    const T* g = self.grad.data();
    for_each_broadcast(self.value.shape(), sa, sb, [&](std::size_t o, std::size_t ia, std::size_t ib) {
      if (ga) ga[ia] += g[o] * bv2[ib];
      if (gb) gb[ib] += g[o] * av2[ia];
    });
  });
}

template <typename T>
Var<T> scale(const Var<T>& x, T factor) {
  return unary<T>(
      x, [factor](T v) { return v * factor; }, [factor](T, T, T g) { return g * factor; });
}

template <typename T>
Var<T> add_scalar(const Var<T>& x, T value) {
  return unary<T>(
      x, [value](T v) { return v + value; }, [](T, T, T g) { return g; });
}

template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  Shape os = parts.front().shape();
  os.c = 0;
  for (const auto& p : parts) {
    const Shape s = p.shape();
    if (s.n != os.n || s.h != os.h || s.w != os.w) throw ShapeError("concat_channels: extent mismatch");
    os.c += s.c;
  }
  Tensor<T> out(os);
  const std::size_t hw = os.plane();
  for (int n = 0; n < os.n; ++n) {
    int c0 = 0;
    for (const auto& p : parts) {
      const int pc = p.shape().c;
      std::copy_n(p.value().plane(n, 0), pc * hw, out.plane(n, c0));
      c0 += pc;
    }
  }
  return make_result<T>(std::move(out), parts, [hw](Node<T>& self) {
    const Shape s = self.value.shape();
    for (int n = 0; n < s.n; ++n) {
      int c0 = 0;
      for (std::size_t i = 0; i < self.inputs.size(); ++i) {
        const int pc = self.inputs[i]->value.shape().c;
        if (wants_grad(self, i)) {
          T* dst = grad_of(self, i).plane(n, 0);
          const T* g = self.grad.plane(n, c0);
          for (std::size_t j = 0; j < pc * hw; ++j) dst[j] += g[j];
        }
        c0 += pc;
      }
    }
  });
}

template <typename T>
Var<T> slice_channels(const Var<T>& x, int begin, int end) {
  const Shape s = x.shape();
  if (begin < 0 || end > s.c || begin >= end) throw ShapeError("slice_channels: bad range");
  Shape os = s;
  os.c = end - begin;
  Tensor<T> out(os);
  const std::size_t hw = s.plane();
  for (int n = 0; n < s.n; ++n) std::copy_n(x.value().plane(n, begin), os.c * hw, out.plane(n, 0));
  return make_result<T>(std::move(out), {x}, [begin, hw](Node<T>& self) {
    const Shape os2 = self.value.shape();
    Tensor<T>& gx = grad_of(self, 0);
    for (int n = 0; n < os2.n; ++n) {
      T* dst = gx.plane(n, begin);
      const T* g = self.grad.plane(n, 0);
      for (std::size_t j = 0; j < os2.c * hw; ++j) dst[j] += g[j];
    }
  });
}

template <typename T>
Var<T> upsample_nearest(const Var<T>& x, int factor) {
  const Shape s = x.shape();
  const Shape os{s.n, s.c, s.h * factor, s.w * factor};
  Tensor<T> out(os);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const T* src = x.value().plane(n, c);
      T* dst = out.plane(n, c);
      for (int y = 0; y < os.h; ++y)
        for (int xx = 0; xx < os.w; ++xx) dst[y * os.w + xx] = src[(y / factor) * s.w + xx / factor];
    }
  return make_result<T>(std::move(out), {x}, [factor](Node<T>& self) {
    const Shape os2 = self.value.shape();
    Tensor<T>& gx = grad_of(self, 0);
    const int iw = os2.w / factor;
    for (int n = 0; n < os2.n; ++n)
      for (int c = 0; c < os2.c; ++c) {
        const T* g = self.grad.plane(n, c);
        T* dst = gx.plane(n, c);
        for (int y = 0; y < os2.h; ++y)
          for (int xx = 0; xx < os2.w; ++xx) dst[(y / factor) * iw + xx / factor] += g[y * os2.w + xx];
      }
  });
}

template <typename T>
Var<T> max_pool2(const Var<T>& x) {
  const Shape s = x.shape();
  const Shape os{s.n, s.c, s.h / 2, s.w / 2};
  if (os.h == 0 || os.w == 0) throw ShapeError("max_pool2: input too small");
  Tensor<T> out(os);
  std::vector<std::uint32_t> argmax(os.numel());
  std::size_t o = 0;
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const T* src = x.value().plane(n, c);
      for (int y = 0; y < os.h; ++y)
        for (int xx = 0; xx < os.w; ++xx, ++o) {
          std::uint32_t best = static_cast<std::uint32_t>((2 * y) * s.w + 2 * xx);
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              const auto idx = static_cast<std::uint32_t>((2 * y + dy) * s.w + 2 * xx + dx);
              if (src[idx] > src[best]) best = idx;
            }
          out[o] = src[best];
          argmax[o] = best;
        }
    }
  return make_result<T>(std::move(out), {x}, [argmax = std::move(argmax)](Node<T>& self) {
    const Shape os2 = self.value.shape();
    Tensor<T>& gx = grad_of(self, 0);
    const std::size_t ohw = os2.plane();
    for (int n = 0; n < os2.n; ++n)
      for (int c = 0; c < os2.c; ++c) {
        T* dst = gx.plane(n, c);
        const std::size_t base = (static_cast<std::size_t>(n) * os2.c + c) * ohw;
        for (std::size_t i = 0; i < ohw; ++i) dst[argmax[base + i]] += self.grad[base + i];
      }
  });
}

template <typename T>
Var<T> global_avg_pool(const Var<T>& x) {
  const Shape s = x.shape();
  const std::size_t hw = s.plane();
  Tensor<T> out(Shape{s.n, s.c, 1, 1});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const T* src = x.value().plane(n, c);
      T acc{0};
      for (std::size_t i = 0; i < hw; ++i) acc += src[i];
      out.at(n, c, 0, 0) = acc / static_cast<T>(hw);
    }
  return make_result<T>(std::move(out), {x}, [hw](Node<T>& self) {
    const Shape s2 = self.value.shape();
    Tensor<T>& gx = grad_of(self, 0);
    for (int n = 0; n < s2.n; ++n)
      for (int c = 0; c < s2.c; ++c) {
        const T g = self.grad.at(n, c, 0, 0) / static_cast<T>(hw);
        T* dst = gx.plane(n, c);
        for (std::size_t i = 0; i < hw; ++i) dst[i] += g;
      }
  });
}

template <typename T>
Var<T> sum(const Var<T>& x) {
  double acc = 0;
  for (T v : x.value().span()) acc += v;
  Tensor<T> out(Shape{}, static_cast<T>(acc));
  return make_result<T>(std::move(out), {x}, [](Node<T>& self) {
    Tensor<T>& gx = grad_of(self, 0);
    const T g = self.grad[0];
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
  });
}

template <typename T>
Var<T> mean(const Var<T>& x) {
  const auto count = static_cast<double>(x.value().size());
  double acc = 0;
  for (T v : x.value().span()) acc += v;
  Tensor<T> out(Shape{}, static_cast<T>(acc / count));
  return make_result<T>(std::move(out), {x}, [count](Node<T>& self) {
    Tensor<T>& gx = grad_of(self, 0);
    const T g = static_cast<T>(self.grad[0] / count);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
  });
}

template <typename T>
Var<T> mean_abs_diff(const Var<T>& a, const Var<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("mean_abs_diff: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
  const auto count = static_cast<double>(a.value().size());
  const T* av = a.value().data();
  const T* bv = b.value().data();
  double acc = 0;
  for (std::size_t i = 0; i < a.value().size(); ++i) acc += std::abs(static_cast<double>(av[i]) - bv[i]);
  Tensor<T> out(Shape{}, static_cast<T>(acc / count));
  return make_result<T>(std::move(out), {a, b}, [count](Node<T>& self) {
    const T* av2 = self.inputs[0]->value.data();
    const T* bv2 = self.inputs[1]->value.data();
    const T g = static_cast<T>(self.grad[0] / count);
    T* ga = wants_grad(self, 0) ? grad_of(self, 0).data() : nullptr;
    T* gb = wants_grad(self, 1) ? grad_of(self, 1).data() : nullptr;
    const std::size_t total = self.inputs[0]->value.size();
    for (std::size_t i = 0; i < total; ++i) {
      const T d = av2[i] - bv2[i];
      const T s = d > T{0} ? g : (d < T{0} ? -g : T{0});
      if (ga) ga[i] += s;
      if (gb) gb[i] -= s;
    }
  });
}

template <typename T>
Var<T> gram(const Var<T>& x) {
  const Shape s = x.shape();
  const auto hw = static_cast<Eigen::Index>(s.plane());
  const T norm = T{1} / static_cast<T>(static_cast<double>(s.c) * s.h * s.w);
  Tensor<T> out(Shape{s.n, 1, s.c, s.c});
  for (int n = 0; n < s.n; ++n) {
    CMapRM<T> a(x.value().plane(n, 0), s.c, hw);
    MapRM<T> g(out.plane(n, 0), s.c, s.c);
    g.noalias() = a * a.transpose();
    g *= norm;
  }
  return make_result<T>(std::move(out), {x}, [norm, hw](Node<T>& self) {
    const Tensor<T>& xin = self.inputs[0]->value;
    const Shape s2 = xin.shape();
    Tensor<T>& gx = grad_of(self, 0);
    for (int n = 0; n < s2.n; ++n) {
      CMapRM<T> a(xin.plane(n, 0), s2.c, hw);
      CMapRM<T> dg(self.grad.plane(n, 0), s2.c, s2.c);
      MapRM<T> da(gx.plane(n, 0), s2.c, hw);
      MatRM<T> sym = (dg + dg.transpose()) * norm;
      da.noalias() += sym * a;
    }
  });
}

template <typename T>
Var<T> warp(const Var<T>& image, const Var<T>& flow) {
  const Shape is = image.shape();
  const Shape fs = flow.shape();
  if (fs.n != is.n || fs.c != 2 || fs.h != is.h || fs.w != is.w) {
    throw ShapeError("warp: flow " + fs.str() + " does not match image " + is.str());
  }
  const int h = is.h;
  const int w = is.w;
  const T half_w = static_cast<T>(w) / T{2};
  const T half_h = static_cast<T>(h) / T{2};
  const T max_x = static_cast<T>(w - 1);
  const T max_y = static_cast<T>(h - 1);
  Tensor<T> out(is);
  for (int n = 0; n < is.n; ++n) {
    const T* fx = flow.value().plane(n, 0);
    const T* fy = flow.value().plane(n, 1);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const int p = y * w + x;
        const T sx = std::clamp(static_cast<T>(x) + fx[p] * half_w, T{0}, max_x);
        const T sy = std::clamp(static_cast<T>(y) + fy[p] * half_h, T{0}, max_y);
        const int x0 = static_cast<int>(std::floor(sx));
        const int y0 = static_cast<int>(std::floor(sy));
        const int x1 = std::min(x0 + 1, w - 1);
        const int y1 = std::min(y0 + 1, h - 1);
        const T ax = sx - static_cast<T>(x0);
        const T ay = sy - static_cast<T>(y0);
        for (int c = 0; c < is.c; ++c) {
          const T* src = image.value().plane(n, c);
          const T top = (T{1} - ax) * src[y0 * w + x0] + ax * src[y0 * w + x1];
          const T bot = (T{1} - ax) * src[y1 * w + x0] + ax * src[y1 * w + x1];
          out.plane(n, c)[p] = (T{1} - ay) * top + ay * bot;
        }
      }
  }
  return make_result<T>(std::move(out), {image, flow}, [half_w, half_h, max_x, max_y](Node<T>& self) {
    const Tensor<T>& img = self.inputs[0]->value;
    const Tensor<T>& fl = self.inputs[1]->value;
    const Shape is2 = img.shape();
    const int h2 = is2.h;
    const int w2 = is2.w;
    Tensor<T>* gi = wants_grad(self, 0) ? &grad_of(self, 0) : nullptr;
    Tensor<T>* gf = wants_grad(self, 1) ? &grad_of(self, 1) : nullptr;
    for (int n = 0; n < is2.n; ++n) {
      const T* fx = fl.plane(n, 0);
      const T* fy = fl.plane(n, 1);
      for (int y = 0; y < h2; ++y)
        for (int x = 0; x < w2; ++x) {
          const int p = y * w2 + x;
          const T rx = static_cast<T>(x) + fx[p] * half_w;
          const T ry = static_cast<T>(y) + fy[p] * half_h;
          const bool in_x = rx > T{0} && rx < max_x;
          const bool in_y = ry > T{0} && ry < max_y;
          const T sx = std::clamp(rx, T{0}, max_x);
          const T sy = std::clamp(ry, T{0}, max_y);
          const int x0 = static_cast<int>(std::floor(sx));
          const int y0 = static_cast<int>(std::floor(sy));
          const int x1 = std::min(x0 + 1, w2 - 1);
          const int y1 = std::min(y0 + 1, h2 - 1);
          const T ax = sx - static_cast<T>(x0);
          const T ay = sy - static_cast<T>(y0);
          T dsx{0};
          T dsy{0};
          for (int c = 0; c < is2.c; ++c) {
            const T g = self.grad.plane(n, c)[p];
            if (g == T{0}) continue;
            const T* src = img.plane(n, c);
            const T v00 = src[y0 * w2 + x0];
            const T v01 = src[y0 * w2 + x1];
            const T v10 = src[y1 * w2 + x0];
            const T v11 = src[y1 * w2 + x1];
            if (gi) {
              T* dst = gi->plane(n, c);
              dst[y0 * w2 + x0] += g * (T{1} - ax) * (T{1} - ay);
              dst[y0 * w2 + x1] += g * ax * (T{1} - ay);
              dst[y1 * w2 + x0] += g * (T{1} - ax) * ay;
              dst[y1 * w2 + x1] += g * ax * ay;
            }
            dsx += g * ((T{1} - ay) * (v01 - v00) + ay * (v11 - v10));
            dsy += g * ((T{1} - ax) * (v10 - v00) + ax * (v11 - v01));
          }
          if (gf) {
            if (in_x) gf->plane(n, 0)[p] += dsx * half_w;
            if (in_y) gf->plane(n, 1)[p] += dsy * half_h;
          }
        }
    }
  });
}

template <typename T>
Var<T> spectral_divide(const Var<T>& weight, const std::vector<T>& u, const std::vector<T>& v,
                       T* sigma_out) {
  const Shape ws = weight.shape();
  const Eigen::Index rows = ws.n;
  const auto cols = static_cast<Eigen::Index>(ws.numel() / ws.n);
  if (static_cast<Eigen::Index>(u.size()) != rows || static_cast<Eigen::Index>(v.size()) != cols) {
    throw ShapeError("spectral_divide: power-iteration vectors do not match weight");
  }
  CMapRM<T> wm(weight.value().data(), rows, cols);
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> vv(v.data(), cols);
  const Eigen::Matrix<T, Eigen::Dynamic, 1> wv = wm * vv;
  const T sigma = ordered_dot(u.data(), wv.data(), u.size());
  if (sigma_out) *sigma_out = sigma;
  Tensor<T> out(ws);
  const T inv = T{1} / sigma;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = weight.value()[i] * inv;
  return make_result<T>(std::move(out), {weight}, [u, v, sigma, rows, cols](Node<T>& self) {
    // d(W/s) with s = uᵀWv:  dW = G/s - <G, W>/s² · u vᵀ
    const Tensor<T>& win = self.inputs[0]->value;
    Tensor<T>& gw = grad_of(self, 0);
    double inner = 0;
    for (std::size_t i = 0; i < win.size(); ++i) inner += static_cast<double>(self.grad[i]) * win[i];
    const T coef = static_cast<T>(inner / (static_cast<double>(sigma) * sigma));
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) {
        const std::size_t i = static_cast<std::size_t>(r * cols + c);
        gw[i] += self.grad[i] / sigma - coef * u[r] * v[c];
      }
  });
}

#define FACEERASE_INSTANTIATE_OPS(T)                                                          \
  template Var<T> conv2d<T>(const Var<T>&, const Var<T>&, const Var<T>&, ConvParams);        \
  template Var<T> instance_norm<T>(const Var<T>&, T);                                         \
  template Var<T> relu<T>(const Var<T>&);                                                     \
  template Var<T> leaky_relu<T>(const Var<T>&, T);                                            \
  template Var<T> sigmoid<T>(const Var<T>&);                                                  \
  template Var<T> tanh<T>(const Var<T>&);                                                     \
  template Var<T> abs<T>(const Var<T>&);                                                      \
  template Var<T> log_clamped<T>(const Var<T>&, T);                                           \
  template Var<T> add<T>(const Var<T>&, const Var<T>&);                                       \
  template Var<T> sub<T>(const Var<T>&, const Var<T>&);                                       \
  template Var<T> mul<T>(const Var<T>&, const Var<T>&);                                       \
  template Var<T> scale<T>(const Var<T>&, T);                                                 \
  template Var<T> add_scalar<T>(const Var<T>&, T);                                            \
  template Var<T> concat_channels<T>(const std::vector<Var<T>>&);                             \
  template Var<T> slice_channels<T>(const Var<T>&, int, int);                                 \
  template Var<T> upsample_nearest<T>(const Var<T>&, int);                                    \
  template Var<T> max_pool2<T>(const Var<T>&);                                                \
  template Var<T> global_avg_pool<T>(const Var<T>&);                                          \
  template Var<T> sum<T>(const Var<T>&);                                                      \
  template Var<T> mean<T>(const Var<T>&);                                                     \
  template Var<T> mean_abs_diff<T>(const Var<T>&, const Var<T>&);                             \
  template Var<T> gram<T>(const Var<T>&);                                                     \
  template Var<T> warp<T>(const Var<T>&, const Var<T>&);                                      \
  template Var<T> spectral_divide<T>(const Var<T>&, const std::vector<T>&, const std::vector<T>&, T*);

FACEERASE_INSTANTIATE_OPS(float)
FACEERASE_INSTANTIATE_OPS(double)

#undef FACEERASE_INSTANTIATE_OPS

}  // namespace faceerase::nn::ops
