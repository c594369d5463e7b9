#ifndef STARGAN_CONV_KERNELS_HPP_
#define STARGAN_CONV_KERNELS_HPP_

#include <Eigen/Dense>

#include "stargan/tensor.hpp"

namespace stargan::kernels {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

inline int64_t conv_out_size(int64_t in, int64_t k, int64_t s, int64_t p) {
  int64_t num = in + 2 * p - k;
  // floor division also for negative numerators
  int64_t q = num >= 0 ? num / s : -((-num + s - 1) / s);
  return q + 1;
}

inline int64_t deconv_out_size(int64_t in, int64_t k, int64_t s, int64_t p) {
  return (in - 1) * s - 2 * p + k;
}

// col has shape (C*KH*KW, OH*OW), row-major.
inline void im2col(const double* x, int64_t c, int64_t h, int64_t w, int64_t kh,
                   int64_t kw, int64_t s, int64_t p, int64_t oh, int64_t ow,
                   double* col) {
  for (int64_t ci = 0; ci < c; ++ci) {
    for (int64_t ky = 0; ky < kh; ++ky) {
      for (int64_t kx = 0; kx < kw; ++kx) {
        double* row = col + ((ci * kh + ky) * kw + kx) * (oh * ow);
        for (int64_t oy = 0; oy < oh; ++oy) {
          int64_t iy = oy * s - p + ky;
          if (iy < 0 || iy >= h) {
            for (int64_t ox = 0; ox < ow; ++ox) row[oy * ow + ox] = 0.0;
            continue;
          }
          const double* xr = x + (ci * h + iy) * w;
          for (int64_t ox = 0; ox < ow; ++ox) {
            int64_t ix = ox * s - p + kx;
            row[oy * ow + ox] = (ix >= 0 && ix < w) ? xr[ix] : 0.0;
          }
        }
      }
    }
  }
}

// Scatter-add of col back into an image buffer (the adjoint of im2col).
inline void col2im(const double* col, int64_t c, int64_t h, int64_t w, int64_t kh,
                   int64_t kw, int64_t s, int64_t p, int64_t oh, int64_t ow,
                   double* x) {
  for (int64_t ci = 0; ci < c; ++ci) {
    for (int64_t ky = 0; ky < kh; ++ky) {
      for (int64_t kx = 0; kx < kw; ++kx) {
        const double* row = col + ((ci * kh + ky) * kw + kx) * (oh * ow);
        for (int64_t oy = 0; oy < oh; ++oy) {
          int64_t iy = oy * s - p + ky;
          if (iy < 0 || iy >= h) continue;
          double* xr = x + (ci * h + iy) * w;
          for (int64_t ox = 0; ox < ow; ++ox) {
            int64_t ix = ox * s - p + kx;
            if (ix >= 0 && ix < w) xr[ix] += row[oy * ow + ox];
          }
        }
      }
    }
  }
}

// y[n,co,oh,ow] = sum_{ci,ky,kx} x[n,ci,oh*s-p+ky,ow*s-p+kx] * w[co,ci,ky,kx]
inline Tensor conv_fwd(const Tensor& x, const Tensor& w, int64_t s, int64_t p) {
  int64_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), ww = x.dim(3);
  int64_t cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(1) != cin) throw std::invalid_argument("conv_fwd: channel mismatch");
  int64_t oh = conv_out_size(h, kh, s, p), ow = conv_out_size(ww, kw, s, p);
  if (oh < 1 || ow < 1) throw std::invalid_argument("conv_fwd: non-positive output size");
  Tensor y({n, cout, oh, ow});
  std::vector<double> col(static_cast<size_t>(cin * kh * kw * oh * ow));
  CMapRM wm(w.data(), cout, cin * kh * kw);
  for (int64_t i = 0; i < n; ++i) {
    im2col(x.data() + i * cin * h * ww, cin, h, ww, kh, kw, s, p, oh, ow, col.data());
    CMapRM cm(col.data(), cin * kh * kw, oh * ow);
    MapRM ym(y.data() + i * cout * oh * ow, cout, oh * ow);
    ym.noalias() = wm * cm;
  }
  return y;
}

// Adjoint of conv_fwd in its input: spreads g (N, Cout, OH, OW) back onto the
// (N, Cin, H, W) grid. Also the forward pass of a transposed convolution with
// weight viewed as (Cin_t=Cout, Cout_t=Cin, KH, KW).
inline Tensor conv_igrad(const Tensor& g, const Tensor& w, int64_t s, int64_t p,
                         int64_t h, int64_t ww) {
  int64_t n = g.dim(0), cout = g.dim(1), oh = g.dim(2), ow = g.dim(3);
  int64_t cin = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(0) != cout) throw std::invalid_argument("conv_igrad: channel mismatch");
  Tensor x({n, cin, h, ww});
  std::vector<double> col(static_cast<size_t>(cin * kh * kw * oh * ow));
  CMapRM wm(w.data(), cout, cin * kh * kw);
  for (int64_t i = 0; i < n; ++i) {
    CMapRM gm(g.data() + i * cout * oh * ow, cout, oh * ow);
    MapRM cm(col.data(), cin * kh * kw, oh * ow);
    cm.noalias() = wm.transpose() * gm;
    col2im(col.data(), cin, h, ww, kh, kw, s, p, oh, ow, x.data() + i * cin * h * ww);
  }
  return x;
}

// gw[co,ci,ky,kx] = sum_{n,oh,ow} g[n,co,oh,ow] * x[n,ci,oh*s-p+ky,ow*s-p+kx]
inline Tensor conv_wgrad(const Tensor& x, const Tensor& g, int64_t s, int64_t p,
                         int64_t kh, int64_t kw) {
  int64_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), ww = x.dim(3);
  int64_t cout = g.dim(1), oh = g.dim(2), ow = g.dim(3);
  Tensor gw({cout, cin, kh, kw});
  std::vector<double> col(static_cast<size_t>(cin * kh * kw * oh * ow));
  MapRM gwm(gw.data(), cout, cin * kh * kw);
  for (int64_t i = 0; i < n; ++i) {
    im2col(x.data() + i * cin * h * ww, cin, h, ww, kh, kw, s, p, oh, ow, col.data());
    CMapRM cm(col.data(), cin * kh * kw, oh * ow);
    CMapRM gm(g.data() + i * cout * oh * ow, cout, oh * ow);
    gwm.noalias() += gm * cm.transpose();
  }
  return gw;
}

}  // namespace stargan::kernels

#endif  // STARGAN_CONV_KERNELS_HPP_
