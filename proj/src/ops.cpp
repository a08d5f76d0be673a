//
// Copyright 2026 The dualtrace Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "dualtrace/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dualtrace/kernels/kernels.hpp"

namespace dualtrace::ops {

namespace {

int conv_out(int in, int k, ConvGeometry g) {
  return (in + 2 * g.pad - g.dilation * (k - 1) - 1) / g.stride + 1;
}

template <typename T>
void im2col(const T* x, int ci, int h, int w, int k, ConvGeometry g, int oh, int ow, T* col) {
  const std::size_t plane = static_cast<std::size_t>(oh) * ow;
  for (int c = 0; c < ci; ++c) {
    const T* xc = x + static_cast<std::size_t>(c) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* dst = col + (static_cast<std::size_t>(c) * k * k + ky * k + kx) * plane;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * g.stride - g.pad + ky * g.dilation;
          T* drow = dst + static_cast<std::size_t>(oy) * ow;
          if (iy < 0 || iy >= h) {
            std::fill(drow, drow + ow, T(0));
            continue;
          }
          const T* srow = xc + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * g.stride - g.pad + kx * g.dilation;
            drow[ox] = (ix >= 0 && ix < w) ? srow[ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, int ci, int h, int w, int k, ConvGeometry g, int oh, int ow, T* x) {
  const std::size_t plane = static_cast<std::size_t>(oh) * ow;
  for (int c = 0; c < ci; ++c) {
    T* xc = x + static_cast<std::size_t>(c) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* src = col + (static_cast<std::size_t>(c) * k * k + ky * k + kx) * plane;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * g.stride - g.pad + ky * g.dilation;
          if (iy < 0 || iy >= h) continue;
          T* xrow = xc + static_cast<std::size_t>(iy) * w;
          const T* srow = src + static_cast<std::size_t>(oy) * ow;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * g.stride - g.pad + kx * g.dilation;
            if (ix >= 0 && ix < w) xrow[ix] += srow[ox];
          }
        }
      }
    }
  }
}

void check_channel_param(const Shape& s, int channels, const char* what) {
  require(s == Shape{1, channels, 1, 1}, Errc::ShapeMismatch,
          std::string(what) + ": expected [1x" + std::to_string(channels) + "x1x1], got " + s.str());
}

// Half-pixel source coordinate table for one axis.
struct AxisTaps {
  std::vector<int> lo, hi;
  std::vector<double> frac;
};

AxisTaps axis_taps(int in, int out) {
  AxisTaps t;
  t.lo.resize(out);
  t.hi.resize(out);
  t.frac.resize(out);
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * scale - 0.5;
    if (src < 0) src = 0;
    int i0 = static_cast<int>(std::floor(src));
    if (i0 > in - 1) i0 = in - 1;
    const int i1 = std::min(i0 + 1, in - 1);
    t.lo[o] = i0;
    t.hi[o] = i1;
    t.frac[o] = src - i0;
  }
  return t;
}

}  // namespace

template <typename T>
Var<T> conv2d(Tape<T>& tape, const Var<T>& x, const Var<T>& weight, const Var<T>& bias,
              ConvGeometry geom) {
  const Shape xs = x->value.shape();
  const Shape ws = weight->value.shape();
  require(ws.h == ws.w, Errc::ShapeMismatch, "conv2d: kernel must be square, got " + ws.str());
  require(xs.c == ws.c, Errc::ShapeMismatch,
          "conv2d: input has " + std::to_string(xs.c) + " channels, kernel expects " +
              std::to_string(ws.c));
  if (bias) check_channel_param(bias->value.shape(), ws.n, "conv2d bias");
  const int k = ws.h;
  const int oh = conv_out(xs.h, k, geom);
  const int ow = conv_out(xs.w, k, geom);
  require(oh > 0 && ow > 0, Errc::ShapeMismatch, "conv2d: empty output for input " + xs.str());

  const int co = ws.n;
  const int kdim = ws.c * k * k;
  const int pixels = oh * ow;
  const bool pointwise = k == 1 && geom.stride == 1 && geom.pad == 0;

  Tensor<T> y(Shape{xs.n, co, oh, ow});
  std::vector<T> col(pointwise ? 0 : static_cast<std::size_t>(kdim) * pixels);
  for (int n = 0; n < xs.n; ++n) {
    const T* src = x->value.sample(n);
    if (!pointwise) {
      im2col(src, xs.c, xs.h, xs.w, k, geom, oh, ow, col.data());
      src = col.data();
    }
    T* dst = y.sample(n);
    kernels::gemm(false, false, co, pixels, kdim, T(1), weight->value.data(), kdim, src, pixels,
                  T(0), dst, pixels);
    if (bias) {
      for (int c = 0; c < co; ++c) {
        const T b = bias->value[c];
        T* row = dst + static_cast<std::size_t>(c) * pixels;
        for (int p = 0; p < pixels; ++p) row[p] += b;
      }
    }
  }

  return tape.record(std::move(y), {&x, &weight, &bias},
                     [x, weight, bias, geom, k, oh, ow, kdim, pixels, pointwise](const Node<T>& out) {
    const Shape xs = x->value.shape();
    const int co = weight->value.shape().n;
    const Tensor<T>& dy = out.grad;
    std::vector<T> col(pointwise ? 0 : static_cast<std::size_t>(kdim) * pixels);
    std::vector<T> dcol(pointwise || !x->requires_grad ? 0 : static_cast<std::size_t>(kdim) * pixels);
    for (int n = 0; n < xs.n; ++n) {
      const T* dyn = dy.sample(n);
      if (weight->requires_grad) {
        const T* src = x->value.sample(n);
        if (!pointwise) {
          im2col(src, xs.c, xs.h, xs.w, k, geom, oh, ow, col.data());
          src = col.data();
        }
        kernels::gemm(false, true, co, kdim, pixels, T(1), dyn, pixels, src, pixels, T(1),
                      weight->grad_buffer().data(), kdim);
      }
      if (bias && bias->requires_grad) {
        T* db = bias->grad_buffer().data();
        for (int c = 0; c < co; ++c) {
          const T* row = dyn + static_cast<std::size_t>(c) * pixels;
          T s = T(0);
          for (int p = 0; p < pixels; ++p) s += row[p];
          db[c] += s;
        }
      }
      if (x->requires_grad) {
        T* dx = x->grad_buffer().sample(n);
        if (pointwise) {
          kernels::gemm(true, false, kdim, pixels, co, T(1), weight->value.data(), kdim, dyn,
                        pixels, T(1), dx, pixels);
        } else {
          kernels::gemm(true, false, kdim, pixels, co, T(1), weight->value.data(), kdim, dyn,
                        pixels, T(0), dcol.data(), pixels);
          col2im_add(dcol.data(), xs.c, xs.h, xs.w, k, geom, oh, ow, dx);
        }
      }
    }
  });
}

template <typename T>
Var<T> depthwise_conv2d(Tape<T>& tape, const Var<T>& x, const Var<T>& weight, const Var<T>& bias,
                        int pad, int dilation) {
  const Shape xs = x->value.shape();
  const Shape ws = weight->value.shape();
  require(ws.n == xs.c && ws.c == 1 && ws.h == ws.w, Errc::ShapeMismatch,
          "depthwise_conv2d: kernel " + ws.str() + " does not fit input " + xs.str());
  if (bias) check_channel_param(bias->value.shape(), xs.c, "depthwise bias");
  const kernels::PlaneGeometry g{xs.h, xs.w, ws.h, pad, dilation};
  require(g.out_h() > 0 && g.out_w() > 0, Errc::ShapeMismatch, "depthwise_conv2d: empty output");
  const std::size_t kk = static_cast<std::size_t>(ws.h) * ws.w;

  Tensor<T> y(Shape{xs.n, xs.c, g.out_h(), g.out_w()});
  for (int n = 0; n < xs.n; ++n) {
    for (int c = 0; c < xs.c; ++c) {
      T* out = y.plane(n, c);
      if (bias) std::fill(out, out + y.shape().plane(), bias->value[c]);
      kernels::dw_forward(x->value.plane(n, c), weight->value.data() + c * kk, out, g);
    }
  }
  return tape.record(std::move(y), {&x, &weight, &bias}, [x, weight, bias, g, kk](const Node<T>& out) {
    const Shape xs = x->value.shape();
    for (int n = 0; n < xs.n; ++n) {
      for (int c = 0; c < xs.c; ++c) {
        const T* dy = out.grad.plane(n, c);
        if (weight->requires_grad)
          kernels::dw_backward_weight(dy, x->value.plane(n, c),
                                      weight->grad_buffer().data() + c * kk, g);
        if (x->requires_grad)
          kernels::dw_backward_input(dy, weight->value.data() + c * kk,
                                     x->grad_buffer().plane(n, c), g);
        if (bias && bias->requires_grad) {
          T s = T(0);
          for (std::size_t p = 0; p < out.grad.shape().plane(); ++p) s += dy[p];
          bias->grad_buffer()[c] += s;
        }
      }
    }
  });
}

template <typename T>
Var<T> layer_norm_channels(Tape<T>& tape, const Var<T>& x, const Var<T>& gamma,
                           const Var<T>& beta, T eps) {
  const Shape xs = x->value.shape();
  check_channel_param(gamma->value.shape(), xs.c, "layer_norm gamma");
  check_channel_param(beta->value.shape(), xs.c, "layer_norm beta");
  const std::size_t plane = xs.plane();
  const int channels = xs.c;

  Tensor<T> xhat(xs);
  Tensor<T> rstd(Shape{xs.n, 1, xs.h, xs.w});
  Tensor<T> y(xs);
  std::vector<T> mean(plane);
  for (int n = 0; n < xs.n; ++n) {
    std::fill(mean.begin(), mean.end(), T(0));
    for (int c = 0; c < channels; ++c) {
      const T* xc = x->value.plane(n, c);
      for (std::size_t p = 0; p < plane; ++p) mean[p] += xc[p];
    }
    for (auto& m : mean) m /= T(channels);
    T* rs = rstd.plane(n, 0);
    std::fill(rs, rs + plane, T(0));
    for (int c = 0; c < channels; ++c) {
      const T* xc = x->value.plane(n, c);
      for (std::size_t p = 0; p < plane; ++p) {
        const T d = xc[p] - mean[p];
        rs[p] += d * d;
      }
    }
    for (std::size_t p = 0; p < plane; ++p) rs[p] = T(1) / std::sqrt(rs[p] / T(channels) + eps);
    for (int c = 0; c < channels; ++c) {
      const T* xc = x->value.plane(n, c);
      T* hc = xhat.plane(n, c);
      T* yc = y.plane(n, c);
      const T gm = gamma->value[c];
      const T bt = beta->value[c];
      for (std::size_t p = 0; p < plane; ++p) {
        hc[p] = (xc[p] - mean[p]) * rs[p];
        yc[p] = gm * hc[p] + bt;
      }
    }
  }

  return tape.record(std::move(y), {&x, &gamma, &beta},
                     [x, gamma, beta, xhat = std::move(xhat), rstd = std::move(rstd)](const Node<T>& out) {
    const Shape xs = x->value.shape();
    const std::size_t plane = xs.plane();
    const int channels = xs.c;
    std::vector<T> mean_g(plane), mean_gx(plane), g(plane);
    for (int n = 0; n < xs.n; ++n) {
      std::fill(mean_g.begin(), mean_g.end(), T(0));
      std::fill(mean_gx.begin(), mean_gx.end(), T(0));
      for (int c = 0; c < channels; ++c) {
        const T* dy = out.grad.plane(n, c);
        const T* hc = xhat.plane(n, c);
        const T gm = gamma->value[c];
        T dgamma = T(0), dbeta = T(0);
        for (std::size_t p = 0; p < plane; ++p) {
          dgamma += dy[p] * hc[p];
          dbeta += dy[p];
          const T gv = dy[p] * gm;
          mean_g[p] += gv;
          mean_gx[p] += gv * hc[p];
        }
        if (gamma->requires_grad) gamma->grad_buffer()[c] += dgamma;
        if (beta->requires_grad) beta->grad_buffer()[c] += dbeta;
      }
      if (!x->requires_grad) continue;
      const T inv_c = T(1) / T(channels);
      const T* rs = rstd.plane(n, 0);
      for (int c = 0; c < channels; ++c) {
        const T* dy = out.grad.plane(n, c);
        const T* hc = xhat.plane(n, c);
        const T gm = gamma->value[c];
        T* dx = x->grad_buffer().plane(n, c);
        for (std::size_t p = 0; p < plane; ++p) {
          dx[p] += rs[p] * (dy[p] * gm - mean_g[p] * inv_c - hc[p] * mean_gx[p] * inv_c);
        }
      }
    }
  });
}

template <typename T>
Var<T> batch_norm(Tape<T>& tape, const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                  Tensor<T>& running_mean, Tensor<T>& running_var, bool training,
                  BatchNormState opts) {
  const Shape xs = x->value.shape();
  check_channel_param(gamma->value.shape(), xs.c, "batch_norm gamma");
  check_channel_param(beta->value.shape(), xs.c, "batch_norm beta");
  check_channel_param(running_mean.shape(), xs.c, "batch_norm running mean");
  check_channel_param(running_var.shape(), xs.c, "batch_norm running var");
  const std::size_t plane = xs.plane();
  const double count = static_cast<double>(xs.n) * plane;

  std::vector<T> rstd(xs.c);
  Tensor<T> xhat(xs);
  Tensor<T> y(xs);
  for (int c = 0; c < xs.c; ++c) {
    double mean = 0.0, var = 0.0;
    if (training) {
      for (int n = 0; n < xs.n; ++n) {
        const T* xc = x->value.plane(n, c);
        for (std::size_t p = 0; p < plane; ++p) mean += xc[p];
      }
      mean /= count;
      for (int n = 0; n < xs.n; ++n) {
        const T* xc = x->value.plane(n, c);
        for (std::size_t p = 0; p < plane; ++p) {
          const double d = xc[p] - mean;
          var += d * d;
        }
      }
      const double unbiased = count > 1 ? var / (count - 1) : var;
      var /= count;
      running_mean[c] = static_cast<T>((1 - opts.momentum) * running_mean[c] + opts.momentum * mean);
      running_var[c] = static_cast<T>((1 - opts.momentum) * running_var[c] + opts.momentum * unbiased);
    } else {
      mean = running_mean[c];
      var = running_var[c];
    }
    const T rs = static_cast<T>(1.0 / std::sqrt(var + opts.eps));
    const T mu = static_cast<T>(mean);
    rstd[c] = rs;
    const T gm = gamma->value[c];
    const T bt = beta->value[c];
    for (int n = 0; n < xs.n; ++n) {
      const T* xc = x->value.plane(n, c);
      T* hc = xhat.plane(n, c);
      T* yc = y.plane(n, c);
      for (std::size_t p = 0; p < plane; ++p) {
        hc[p] = (xc[p] - mu) * rs;
        yc[p] = gm * hc[p] + bt;
      }
    }
  }

  return tape.record(std::move(y), {&x, &gamma, &beta},
                     [x, gamma, beta, training, rstd = std::move(rstd), xhat = std::move(xhat)](const Node<T>& out) {
    const Shape xs = x->value.shape();
    const std::size_t plane = xs.plane();
    const T count = static_cast<T>(static_cast<double>(xs.n) * plane);
    for (int c = 0; c < xs.c; ++c) {
      T sum_dy = T(0), sum_dy_xhat = T(0);
      for (int n = 0; n < xs.n; ++n) {
        const T* dy = out.grad.plane(n, c);
        const T* hc = xhat.plane(n, c);
        for (std::size_t p = 0; p < plane; ++p) {
          sum_dy += dy[p];
          sum_dy_xhat += dy[p] * hc[p];
        }
      }
      if (gamma->requires_grad) gamma->grad_buffer()[c] += sum_dy_xhat;
      if (beta->requires_grad) beta->grad_buffer()[c] += sum_dy;
      if (!x->requires_grad) continue;
      const T k = gamma->value[c] * rstd[c];
      for (int n = 0; n < xs.n; ++n) {
        const T* dy = out.grad.plane(n, c);
        const T* hc = xhat.plane(n, c);
        T* dx = x->grad_buffer().plane(n, c);
        if (training) {
          for (std::size_t p = 0; p < plane; ++p)
            dx[p] += k * (dy[p] - sum_dy / count - hc[p] * sum_dy_xhat / count);
        } else {
          for (std::size_t p = 0; p < plane; ++p) dx[p] += k * dy[p];
        }
      }
    }
  });
}

template <typename T>
Var<T> gelu(Tape<T>& tape, const Var<T>& x) {
  Tensor<T> y(x->value.shape());
  kernels::gelu_forward(x->value.data(), y.data(), y.size());
  return tape.record(std::move(y), {&x}, [x](const Node<T>& out) {
    kernels::gelu_backward(x->value.data(), out.grad.data(), x->grad_buffer().data(),
                           out.grad.size());
  });
}

template <typename T>
Var<T> relu(Tape<T>& tape, const Var<T>& x) {
  Tensor<T> y(x->value.shape());
  const T* xv = x->value.data();
  T* yv = y.data();
  for (std::size_t i = 0; i < y.size(); ++i) yv[i] = xv[i] > T(0) ? xv[i] : T(0);
  return tape.record(std::move(y), {&x}, [x](const Node<T>& out) {
    const T* xv = x->value.data();
    const T* dy = out.grad.data();
    T* dx = x->grad_buffer().data();
    for (std::size_t i = 0; i < out.grad.size(); ++i)
      if (xv[i] > T(0)) dx[i] += dy[i];
  });
}

template <typename T>
Var<T> sigmoid(Tape<T>& tape, const Var<T>& x) {
  Tensor<T> y(x->value.shape());
  const T* xv = x->value.data();
  T* yv = y.data();
  for (std::size_t i = 0; i < y.size(); ++i) {
    const T v = xv[i];
    if (v >= T(0)) {
      yv[i] = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      yv[i] = e / (T(1) + e);
    }
  }
  return tape.record(std::move(y), {&x}, [x](const Node<T>& out) {
    const T* yv = out.value.data();
    const T* dy = out.grad.data();
    T* dx = x->grad_buffer().data();
    for (std::size_t i = 0; i < out.grad.size(); ++i) dx[i] += dy[i] * yv[i] * (T(1) - yv[i]);
  });
}

template <typename T>
Var<T> add(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
  require_shape(b->value.shape(), a->value.shape(), "add");
  Tensor<T> y = a->value;
  const T* bv = b->value.data();
  T* yv = y.data();
  for (std::size_t i = 0; i < y.size(); ++i) yv[i] += bv[i];
  return tape.record(std::move(y), {&a, &b}, [a, b](const Node<T>& out) {
    const T* dy = out.grad.data();
    for (const Var<T>* in : {&a, &b}) {
      if (!(*in)->requires_grad) continue;
      T* d = (*in)->grad_buffer().data();
      for (std::size_t i = 0; i < out.grad.size(); ++i) d[i] += dy[i];
    }
  });
}

template <typename T>
Var<T> add_channel_broadcast(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
  const Shape as = a->value.shape();
  require_shape(b->value.shape(), Shape{as.n, as.c, 1, 1}, "add_channel_broadcast");
  Tensor<T> y = a->value;
  for (int n = 0; n < as.n; ++n)
    for (int c = 0; c < as.c; ++c) {
      const T v = b->value(n, c, 0, 0);
      T* p = y.plane(n, c);
      for (std::size_t i = 0; i < as.plane(); ++i) p[i] += v;
    }
  return tape.record(std::move(y), {&a, &b}, [a, b](const Node<T>& out) {
    const Shape as = a->value.shape();
    if (a->requires_grad) {
      T* d = a->grad_buffer().data();
      const T* dy = out.grad.data();
      for (std::size_t i = 0; i < out.grad.size(); ++i) d[i] += dy[i];
    }
    if (b->requires_grad) {
      Tensor<T>& db = b->grad_buffer();
      for (int n = 0; n < as.n; ++n)
        for (int c = 0; c < as.c; ++c) {
          const T* p = out.grad.plane(n, c);
          T s = T(0);
          for (std::size_t i = 0; i < as.plane(); ++i) s += p[i];
          db(n, c, 0, 0) += s;
        }
    }
  });
}

template <typename T>
Var<T> mul(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
  require_shape(b->value.shape(), a->value.shape(), "mul");
  Tensor<T> y = a->value;
  const T* bv = b->value.data();
  T* yv = y.data();
  for (std::size_t i = 0; i < y.size(); ++i) yv[i] *= bv[i];
  return tape.record(std::move(y), {&a, &b}, [a, b](const Node<T>& out) {
    const T* dy = out.grad.data();
    if (a->requires_grad) {
      T* d = a->grad_buffer().data();
      const T* bv = b->value.data();
      for (std::size_t i = 0; i < out.grad.size(); ++i) d[i] += dy[i] * bv[i];
    }
    if (b->requires_grad) {
      T* d = b->grad_buffer().data();
      const T* av = a->value.data();
      for (std::size_t i = 0; i < out.grad.size(); ++i) d[i] += dy[i] * av[i];
    }
  });
}

template <typename T>
Var<T> scale(Tape<T>& tape, const Var<T>& x, T factor) {
  Tensor<T> y = x->value;
  for (auto& v : y.values()) v *= factor;
  return tape.record(std::move(y), {&x}, [x, factor](const Node<T>& out) {
    T* d = x->grad_buffer().data();
    const T* dy = out.grad.data();
    for (std::size_t i = 0; i < out.grad.size(); ++i) d[i] += factor * dy[i];
  });
}

template <typename T>
Var<T> concat_channels(Tape<T>& tape, const std::vector<Var<T>>& parts) {
  require(!parts.empty(), Errc::EmptyInput, "concat_channels: no inputs");
  const Shape first = parts.front()->value.shape();
  int channels = 0;
  for (const auto& p : parts) {
    const Shape s = p->value.shape();
    require(s.n == first.n && s.h == first.h && s.w == first.w, Errc::ShapeMismatch,
            "concat_channels: " + s.str() + " does not match " + first.str());
    channels += s.c;
  }
  Tensor<T> y(Shape{first.n, channels, first.h, first.w});
  for (int n = 0; n < first.n; ++n) {
    T* dst = y.sample(n);
    for (const auto& p : parts) {
      const std::size_t len = p->value.shape().sample();
      std::copy(p->value.sample(n), p->value.sample(n) + len, dst);
      dst += len;
    }
  }
  return tape.record(std::move(y), parts, [parts](const Node<T>& out) {
    const int batch = out.grad.shape().n;
    for (int n = 0; n < batch; ++n) {
      const T* src = out.grad.sample(n);
      for (const auto& p : parts) {
        const std::size_t len = p->value.shape().sample();
        if (p->requires_grad) {
          T* d = p->grad_buffer().sample(n);
          for (std::size_t i = 0; i < len; ++i) d[i] += src[i];
        }
        src += len;
      }
    }
  });
}

template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& x, int out_h, int out_w) {
  const Shape xs = x.shape();
  require(out_h > 0 && out_w > 0, Errc::ShapeMismatch, "resize_bilinear: empty target");
  const AxisTaps ty = axis_taps(xs.h, out_h);
  const AxisTaps tx = axis_taps(xs.w, out_w);
  Tensor<T> y(Shape{xs.n, xs.c, out_h, out_w});
  for (int n = 0; n < xs.n; ++n)
    for (int c = 0; c < xs.c; ++c) {
      const T* src = x.plane(n, c);
      T* dst = y.plane(n, c);
      for (int oy = 0; oy < out_h; ++oy) {
        const T fy = static_cast<T>(ty.frac[oy]);
        const T* r0 = src + static_cast<std::size_t>(ty.lo[oy]) * xs.w;
        const T* r1 = src + static_cast<std::size_t>(ty.hi[oy]) * xs.w;
        for (int ox = 0; ox < out_w; ++ox) {
          const T fx = static_cast<T>(tx.frac[ox]);
          const T top = r0[tx.lo[ox]] + fx * (r0[tx.hi[ox]] - r0[tx.lo[ox]]);
          const T bot = r1[tx.lo[ox]] + fx * (r1[tx.hi[ox]] - r1[tx.lo[ox]]);
          dst[static_cast<std::size_t>(oy) * out_w + ox] = top + fy * (bot - top);
        }
      }
    }
  return y;
}

template <typename T>
Var<T> upsample_bilinear(Tape<T>& tape, const Var<T>& x, int out_h, int out_w) {
  Tensor<T> y = resize_bilinear(x->value, out_h, out_w);
  return tape.record(std::move(y), {&x}, [x, out_h, out_w](const Node<T>& out) {
    const Shape xs = x->value.shape();
    const AxisTaps ty = axis_taps(xs.h, out_h);
    const AxisTaps tx = axis_taps(xs.w, out_w);
    Tensor<T>& dx = x->grad_buffer();
    for (int n = 0; n < xs.n; ++n)
      for (int c = 0; c < xs.c; ++c) {
        const T* dy = out.grad.plane(n, c);
        T* d = dx.plane(n, c);
        for (int oy = 0; oy < out_h; ++oy) {
          const T fy = static_cast<T>(ty.frac[oy]);
          T* r0 = d + static_cast<std::size_t>(ty.lo[oy]) * xs.w;
          T* r1 = d + static_cast<std::size_t>(ty.hi[oy]) * xs.w;
          for (int ox = 0; ox < out_w; ++ox) {
            const T fx = static_cast<T>(tx.frac[ox]);
            const T g = dy[static_cast<std::size_t>(oy) * out_w + ox];
            const T gt = g * (T(1) - fy);
            const T gb = g * fy;
            r0[tx.lo[ox]] += gt * (T(1) - fx);
            r0[tx.hi[ox]] += gt * fx;
            r1[tx.lo[ox]] += gb * (T(1) - fx);
            r1[tx.hi[ox]] += gb * fx;
          }
        }
      }
  });
}

template <typename T>
Var<T> global_avg_pool(Tape<T>& tape, const Var<T>& x) {
  const Shape xs = x->value.shape();
  Tensor<T> y(Shape{xs.n, xs.c, 1, 1});
  for (int n = 0; n < xs.n; ++n)
    for (int c = 0; c < xs.c; ++c) {
      const T* p = x->value.plane(n, c);
      T s = T(0);
      for (std::size_t i = 0; i < xs.plane(); ++i) s += p[i];
      y(n, c, 0, 0) = s / static_cast<T>(xs.plane());
    }
  return tape.record(std::move(y), {&x}, [x](const Node<T>& out) {
    const Shape xs = x->value.shape();
    const T inv = T(1) / static_cast<T>(xs.plane());
    Tensor<T>& dx = x->grad_buffer();
    for (int n = 0; n < xs.n; ++n)
      for (int c = 0; c < xs.c; ++c) {
        const T g = out.grad(n, c, 0, 0) * inv;
        T* d = dx.plane(n, c);
        for (std::size_t i = 0; i < xs.plane(); ++i) d[i] += g;
      }
  });
}

template <typename T>
Var<T> weighted_sum(Tape<T>& tape, const Var<T>& x, const Tensor<T>& weights) {
  require_shape(weights.shape(), x->value.shape(), "weighted_sum");
  T s = T(0);
  for (std::size_t i = 0; i < weights.size(); ++i) s += x->value[i] * weights[i];
  return tape.record(Tensor<T>::scalar(s), {&x}, [x, weights](const Node<T>& out) {
    const T g = out.grad[0];
    T* d = x->grad_buffer().data();
    for (std::size_t i = 0; i < weights.size(); ++i) d[i] += g * weights[i];
  });
}

#define DUALTRACE_INSTANTIATE_OPS(T)                                                              \
  template Var<T> conv2d(Tape<T>&, const Var<T>&, const Var<T>&, const Var<T>&, ConvGeometry);    \
  template Var<T> depthwise_conv2d(Tape<T>&, const Var<T>&, const Var<T>&, const Var<T>&, int,    \
                                   int);                                                          \
  template Var<T> layer_norm_channels(Tape<T>&, const Var<T>&, const Var<T>&, const Var<T>&, T); \
  template Var<T> batch_norm(Tape<T>&, const Var<T>&, const Var<T>&, const Var<T>&, Tensor<T>&,   \
                             Tensor<T>&, bool, BatchNormState);                                   \
  template Var<T> gelu(Tape<T>&, const Var<T>&);                                                  \
  template Var<T> relu(Tape<T>&, const Var<T>&);                                                  \
  template Var<T> sigmoid(Tape<T>&, const Var<T>&);                                               \
  template Var<T> add(Tape<T>&, const Var<T>&, const Var<T>&);                                    \
  template Var<T> add_channel_broadcast(Tape<T>&, const Var<T>&, const Var<T>&);                  \
  template Var<T> mul(Tape<T>&, const Var<T>&, const Var<T>&);                                    \
  template Var<T> scale(Tape<T>&, const Var<T>&, T);                                              \
  template Var<T> concat_channels(Tape<T>&, const std::vector<Var<T>>&);                          \
  template Var<T> upsample_bilinear(Tape<T>&, const Var<T>&, int, int);                           \
  template Var<T> global_avg_pool(Tape<T>&, const Var<T>&);                                       \
  template Var<T> weighted_sum(Tape<T>&, const Var<T>&, const Tensor<T>&);                        \
  template Tensor<T> resize_bilinear(const Tensor<T>&, int, int);

DUALTRACE_INSTANTIATE_OPS(float)
DUALTRACE_INSTANTIATE_OPS(double)

}  // namespace dualtrace::ops
