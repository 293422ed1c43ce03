#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "msnn/blas.hpp"
#include "msnn/common.hpp"
#include "msnn/tensor.hpp"

// 3D convolution, pooling and padding on [N,C,T,H,W] tensors. Convolution is
// im2col + GEMM; the tests check it against an independent nested-loop oracle.

namespace msnn {

enum class PoolMode { Max, Avg };
enum class TemporalPad { Zero, Replicate };

namespace detail {

struct ConvDims {
  std::int64_t n, c, t, h, w;        // input
  std::int64_t k, kt, kh, kw;        // kernel
  std::int64_t to, ho, wo;           // output
  Triple stride, pad;
  std::int64_t ck() const { return c * kt * kh * kw; }
  std::int64_t l() const { return to * ho * wo; }
};

inline std::int64_t conv_extent(std::int64_t in, std::int64_t pad, std::int64_t k, std::int64_t stride) {
  return (in + 2 * pad - k) / stride + 1;
}

inline ConvDims conv_dims(const Tensor& input, const Tensor& kernel, const Triple& stride, const Triple& pad) {
  if (input.rank() != 5) throw InvalidArgument("conv3d: input must be [N,C,T,H,W], got " + shape_string(input.shape()));
  if (kernel.rank() != 5) throw InvalidArgument("conv3d: kernel must be [K,C,kt,kh,kw], got " + shape_string(kernel.shape()));
  ConvDims d;
  d.n = input.dim(0); d.c = input.dim(1); d.t = input.dim(2); d.h = input.dim(3); d.w = input.dim(4);
  d.k = kernel.dim(0); d.kt = kernel.dim(2); d.kh = kernel.dim(3); d.kw = kernel.dim(4);
  if (kernel.dim(1) != d.c) {
    throw InvalidArgument("conv3d: kernel channel extent (axis 1) is " + std::to_string(kernel.dim(1)) +
                          " but input channel extent (axis 1) is " + std::to_string(d.c));
  }
  if (stride.t < 1 || stride.h < 1 || stride.w < 1) throw InvalidArgument("conv3d: stride components must be >= 1, got " + to_string(stride));
  if (pad.t < 0 || pad.h < 0 || pad.w < 0) throw InvalidArgument("conv3d: padding must be >= 0, got " + to_string(pad));
  d.stride = stride;
  d.pad = pad;
  d.to = conv_extent(d.t, pad.t, d.kt, stride.t);
  d.ho = conv_extent(d.h, pad.h, d.kh, stride.h);
  d.wo = conv_extent(d.w, pad.w, d.kw, stride.w);
  if (d.to < 1) throw InvalidArgument("conv3d: kernel temporal extent " + std::to_string(d.kt) + " exceeds padded input extent " + std::to_string(d.t + 2 * pad.t));
  if (d.ho < 1) throw InvalidArgument("conv3d: kernel height " + std::to_string(d.kh) + " exceeds padded input extent " + std::to_string(d.h + 2 * pad.h));
  if (d.wo < 1) throw InvalidArgument("conv3d: kernel width " + std::to_string(d.kw) + " exceeds padded input extent " + std::to_string(d.w + 2 * pad.w));
  return d;
}

// Gather one sample's receptive fields into a [CK, L] column matrix.
inline void im2col(const double* x, const ConvDims& d, double* cols) {
  const std::int64_t l = d.l();
  std::int64_t row = 0;
  for (std::int64_t c = 0; c < d.c; ++c) {
    const double* xc = x + c * d.t * d.h * d.w;
    for (std::int64_t dt = 0; dt < d.kt; ++dt) {
      for (std::int64_t dh = 0; dh < d.kh; ++dh) {
        for (std::int64_t dw = 0; dw < d.kw; ++dw, ++row) {
          double* out = cols + row * l;
          std::int64_t idx = 0;
          for (std::int64_t to = 0; to < d.to; ++to) {
            const std::int64_t t = to * d.stride.t - d.pad.t + dt;
            const bool t_ok = t >= 0 && t < d.t;
            for (std::int64_t ho = 0; ho < d.ho; ++ho) {
              const std::int64_t h = ho * d.stride.h - d.pad.h + dh;
              const bool h_ok = h >= 0 && h < d.h;
              if (!t_ok || !h_ok) {
                for (std::int64_t wo = 0; wo < d.wo; ++wo) out[idx++] = 0.0;
                continue;
              }
              const double* xr = xc + (t * d.h + h) * d.w;
              for (std::int64_t wo = 0; wo < d.wo; ++wo) {
                const std::int64_t w = wo * d.stride.w - d.pad.w + dw;
                out[idx++] = (w >= 0 && w < d.w) ? xr[w] : 0.0;
              }
            }
          }
        }
      }
    }
  }
}

// Scatter-add a [CK, L] column-gradient matrix back onto one sample.
inline void col2im_add(const double* cols, const ConvDims& d, double* dx) {
  const std::int64_t l = d.l();
  std::int64_t row = 0;
  for (std::int64_t c = 0; c < d.c; ++c) {
    double* xc = dx + c * d.t * d.h * d.w;
    for (std::int64_t dt = 0; dt < d.kt; ++dt) {
      for (std::int64_t dh = 0; dh < d.kh; ++dh) {
        for (std::int64_t dw = 0; dw < d.kw; ++dw, ++row) {
          const double* g = cols + row * l;
          std::int64_t idx = 0;
          for (std::int64_t to = 0; to < d.to; ++to) {
            const std::int64_t t = to * d.stride.t - d.pad.t + dt;
            const bool t_ok = t >= 0 && t < d.t;
            for (std::int64_t ho = 0; ho < d.ho; ++ho) {
              const std::int64_t h = ho * d.stride.h - d.pad.h + dh;
              if (!t_ok || h < 0 || h >= d.h) {
                idx += d.wo;
                continue;
              }
              double* xr = xc + (t * d.h + h) * d.w;
              for (std::int64_t wo = 0; wo < d.wo; ++wo, ++idx) {
                const std::int64_t w = wo * d.stride.w - d.pad.w + dw;
                if (w >= 0 && w < d.w) xr[w] += g[idx];
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace detail

/// 3D convolution with zero padding and per-output-channel bias.
/// input [N,C,T,H,W] * kernel [K,C,kt,kh,kw] -> [N,K,T',H',W'].
inline Tensor conv3d(const Tensor& input, const Tensor& kernel, const Tensor& bias, const Triple& stride,
                     const Triple& padding) {
  const detail::ConvDims d = detail::conv_dims(input, kernel, stride, padding);
  if (bias.rank() != 1 || bias.dim(0) != d.k) {
    throw InvalidArgument("conv3d: bias extent must equal kernel count " + std::to_string(d.k) + ", got " +
                          shape_string(bias.shape()));
  }
  Tensor out = Tensor::zeros({d.n, d.k, d.to, d.ho, d.wo});
  const std::int64_t l = d.l(), ck = d.ck();
  std::vector<double> cols(static_cast<std::size_t>(ck * l));
  for (std::int64_t n = 0; n < d.n; ++n) {
    detail::im2col(input.data() + n * d.c * d.t * d.h * d.w, d, cols.data());
    double* o = out.data() + n * d.k * l;
    blas::dgemm(false, false, d.k, l, ck, 1.0, kernel.data(), ck, cols.data(), l, 0.0, o, l);
    for (std::int64_t k = 0; k < d.k; ++k) {
      const double b = bias.data()[k];
      if (b != 0.0)
        for (std::int64_t i = 0; i < l; ++i) o[k * l + i] += b;
    }
  }
  detail::record(out, {input, kernel, bias}, [d](detail::TensorNode& self) {
    auto& px = *self.parents[0];
    auto& pk = *self.parents[1];
    auto& pb = *self.parents[2];
    const std::int64_t l = d.l(), ck = d.ck();
    std::vector<double> cols(static_cast<std::size_t>(ck * l));
    std::vector<double> dcols;
    if (detail::wants_grad(px)) dcols.resize(static_cast<std::size_t>(ck * l));
    for (std::int64_t n = 0; n < d.n; ++n) {
      const double* gout = self.grad.data() + n * d.k * l;
      if (detail::wants_grad(pk)) {
        detail::im2col(px.data.data() + n * d.c * d.t * d.h * d.w, d, cols.data());
        blas::dgemm(false, true, d.k, ck, l, 1.0, gout, l, cols.data(), l, 1.0, pk.grad.data(), ck);
      }
      if (detail::wants_grad(px)) {
        blas::dgemm(true, false, ck, l, d.k, 1.0, pk.data.data(), ck, gout, l, 0.0, dcols.data(), l);
        detail::col2im_add(dcols.data(), d, px.grad.data() + n * d.c * d.t * d.h * d.w);
      }
      if (detail::wants_grad(pb)) {
        for (std::int64_t k = 0; k < d.k; ++k) {
          double s = 0.0;
          for (std::int64_t i = 0; i < l; ++i) s += gout[k * l + i];
          pb.grad[k] += s;
        }
      }
    }
  });
  return out;
}

/// Mean-preserving temporal inflation: each of `depth` temporal slices is
/// kernel2d / depth, so a temporally constant input yields the 2D response.
inline Tensor inflate_kernel(const Tensor& kernel2d, std::int64_t depth) {
  if (depth < 1) throw InvalidArgument("inflate_kernel: depth must be >= 1, got " + std::to_string(depth));
  if (kernel2d.rank() != 4) {
    throw InvalidArgument("inflate_kernel: kernel2d must be [K,C,kh,kw], got " + shape_string(kernel2d.shape()));
  }
  const std::int64_t k = kernel2d.dim(0), c = kernel2d.dim(1), kh = kernel2d.dim(2), kw = kernel2d.dim(3);
  Tensor out = Tensor::zeros({k, c, depth, kh, kw});
  const std::int64_t plane = kh * kw;
  const double inv = 1.0 / static_cast<double>(depth);
  for (std::int64_t kc = 0; kc < k * c; ++kc) {
    const double* src = kernel2d.data() + kc * plane;
    for (std::int64_t t = 0; t < depth; ++t) {
      double* dst = out.data() + (kc * depth + t) * plane;
      for (std::int64_t i = 0; i < plane; ++i) dst[i] = src[i] * inv;
    }
  }
  detail::record(out, {kernel2d}, [depth, plane, inv](detail::TensorNode& self) {
    auto& p = *self.parents[0];
    const std::int64_t kc_total = static_cast<std::int64_t>(p.data.size()) / plane;
    for (std::int64_t kc = 0; kc < kc_total; ++kc) {
      for (std::int64_t t = 0; t < depth; ++t) {
        const double* g = self.grad.data() + (kc * depth + t) * plane;
        double* dst = p.grad.data() + kc * plane;
        for (std::int64_t i = 0; i < plane; ++i) dst[i] += g[i] * inv;
      }
    }
  });
  return out;
}

/// Padding-free pooling; the window must fit inside the input.
inline Tensor pool3d(const Tensor& input, const Triple& window, const Triple& stride, PoolMode mode) {
  if (input.rank() != 5) throw InvalidArgument("pool3d: input must be [N,C,T,H,W], got " + shape_string(input.shape()));
  if (window.t < 1 || window.h < 1 || window.w < 1) throw InvalidArgument("pool3d: window components must be >= 1");
  if (stride.t < 1 || stride.h < 1 || stride.w < 1) throw InvalidArgument("pool3d: stride components must be >= 1");
  const std::int64_t n = input.dim(0), c = input.dim(1), t = input.dim(2), h = input.dim(3), w = input.dim(4);
  if (window.t > t || window.h > h || window.w > w) {
    throw InvalidArgument("pool3d: window " + to_string(window) + " larger than input extents [" + std::to_string(t) +
                          "," + std::to_string(h) + "," + std::to_string(w) + "]");
  }
  const std::int64_t to = (t - window.t) / stride.t + 1;
  const std::int64_t ho = (h - window.h) / stride.h + 1;
  const std::int64_t wo = (w - window.w) / stride.w + 1;
  Tensor out = Tensor::zeros({n, c, to, ho, wo});
  const double inv_vol = 1.0 / static_cast<double>(window.t * window.h * window.w);
  std::vector<std::int64_t> argmax;
  if (mode == PoolMode::Max) argmax.resize(static_cast<std::size_t>(out.size()));
  std::int64_t oi = 0;
  for (std::int64_t in = 0; in < n * c; ++in) {
    const double* x = input.data() + in * t * h * w;
    for (std::int64_t ot = 0; ot < to; ++ot) {
      for (std::int64_t oh = 0; oh < ho; ++oh) {
        for (std::int64_t ow = 0; ow < wo; ++ow, ++oi) {
          const std::int64_t t0 = ot * stride.t, h0 = oh * stride.h, w0 = ow * stride.w;
          if (mode == PoolMode::Max) {
            double best = -std::numeric_limits<double>::infinity();
            std::int64_t best_idx = 0;
            for (std::int64_t dt = 0; dt < window.t; ++dt)
              for (std::int64_t dh = 0; dh < window.h; ++dh)
                for (std::int64_t dw = 0; dw < window.w; ++dw) {
                  const std::int64_t idx = ((t0 + dt) * h + h0 + dh) * w + w0 + dw;
                  if (x[idx] > best) {
                    best = x[idx];
                    best_idx = idx;
                  }
                }
            out.data()[oi] = best;
            argmax[static_cast<std::size_t>(oi)] = in * t * h * w + best_idx;
          } else {
            double s = 0.0;
            for (std::int64_t dt = 0; dt < window.t; ++dt)
              for (std::int64_t dh = 0; dh < window.h; ++dh)
                for (std::int64_t dw = 0; dw < window.w; ++dw) s += x[((t0 + dt) * h + h0 + dh) * w + w0 + dw];
            out.data()[oi] = s * inv_vol;
          }
        }
      }
    }
  }
  if (mode == PoolMode::Max) {
    detail::record(out, {input}, [argmax = std::move(argmax)](detail::TensorNode& self) {
      auto& px = *self.parents[0];
      for (std::size_t i = 0; i < self.data.size(); ++i) px.grad[argmax[i]] += self.grad[i];
    });
  } else {
    detail::record(out, {input}, [n, c, t, h, w, to, ho, wo, window, stride, inv_vol](detail::TensorNode& self) {
      auto& px = *self.parents[0];
      std::int64_t oi = 0;
      for (std::int64_t in = 0; in < n * c; ++in) {
        double* dx = px.grad.data() + in * t * h * w;
        for (std::int64_t ot = 0; ot < to; ++ot)
          for (std::int64_t oh = 0; oh < ho; ++oh)
            for (std::int64_t ow = 0; ow < wo; ++ow, ++oi) {
              const double g = self.grad[oi] * inv_vol;
              const std::int64_t t0 = ot * stride.t, h0 = oh * stride.h, w0 = ow * stride.w;
              for (std::int64_t dt = 0; dt < window.t; ++dt)
                for (std::int64_t dh = 0; dh < window.h; ++dh)
                  for (std::int64_t dw = 0; dw < window.w; ++dw) dx[((t0 + dt) * h + h0 + dh) * w + w0 + dw] += g;
            }
      }
    });
  }
  return out;
}

/// Symmetric padding on the three trailing axes. Spatial padding is always
/// zero; temporal padding is zero or edge-replicate (replicate keeps a
/// temporally constant signal constant, which the inflated networks rely on).
inline Tensor pad3d(const Tensor& input, const Triple& pad, TemporalPad tmode) {
  if (input.rank() != 5) throw InvalidArgument("pad3d: input must be [N,C,T,H,W], got " + shape_string(input.shape()));
  if (pad.t < 0 || pad.h < 0 || pad.w < 0) throw InvalidArgument("pad3d: padding must be >= 0");
  const std::int64_t n = input.dim(0), c = input.dim(1), t = input.dim(2), h = input.dim(3), w = input.dim(4);
  const std::int64_t tp = t + 2 * pad.t, hp = h + 2 * pad.h, wp = w + 2 * pad.w;
  Tensor out = Tensor::zeros({n, c, tp, hp, wp});
  for (std::int64_t in = 0; in < n * c; ++in) {
    const double* x = input.data() + in * t * h * w;
    double* o = out.data() + in * tp * hp * wp;
    for (std::int64_t ot = 0; ot < tp; ++ot) {
      std::int64_t ts = ot - pad.t;
      if (ts < 0 || ts >= t) {
        if (tmode == TemporalPad::Zero) continue;
        ts = std::clamp<std::int64_t>(ts, 0, t - 1);
      }
      for (std::int64_t ih = 0; ih < h; ++ih) {
        std::copy_n(x + (ts * h + ih) * w, w, o + (ot * hp + ih + pad.h) * wp + pad.w);
      }
    }
  }
  detail::record(out, {input}, [n, c, t, h, w, tp, hp, wp, pad, tmode](detail::TensorNode& self) {
    auto& px = *self.parents[0];
    for (std::int64_t in = 0; in < n * c; ++in) {
      const double* g = self.grad.data() + in * tp * hp * wp;
      double* dx = px.grad.data() + in * t * h * w;
      for (std::int64_t ot = 0; ot < tp; ++ot) {
        std::int64_t ts = ot - pad.t;
        if (ts < 0 || ts >= t) {
          if (tmode == TemporalPad::Zero) continue;
          ts = std::clamp<std::int64_t>(ts, 0, t - 1);
        }
        for (std::int64_t ih = 0; ih < h; ++ih) {
          const double* grow = g + (ot * hp + ih + pad.h) * wp + pad.w;
          double* xrow = dx + (ts * h + ih) * w;
          for (std::int64_t iw = 0; iw < w; ++iw) xrow[iw] += grow[iw];
        }
      }
    }
  });
  return out;
}

}  // namespace msnn
