#include "evpulse/tscan/layers.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace evpulse::tscan {

namespace {

template <typename T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapR = Eigen::Map<MatR<T>>;
template <typename T>
using CMapR = Eigen::Map<const MatR<T>>;

// col is (C * k * k, Ho * Wo) for one sample.
template <typename T>
void im2col(const T* src, std::size_t c, std::size_t h, std::size_t w, const ConvShape& s, std::size_t ho,
            std::size_t wo, T* col) {
  const auto pad = static_cast<std::ptrdiff_t>(s.pad);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const T* plane = src + ch * h * w;
    for (std::size_t ky = 0; ky < s.kernel; ++ky) {
      for (std::size_t kx = 0; kx < s.kernel; ++kx) {
        T* row = col + ((ch * s.kernel + ky) * s.kernel + kx) * ho * wo;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) - pad;
          T* dst = row + oy * wo;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) {
            std::fill(dst, dst + wo, T(0));
            continue;
          }
          const T* line = plane + static_cast<std::size_t>(iy) * w;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox + kx) - pad;
            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) ? T(0) : line[ix];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, std::size_t c, std::size_t h, std::size_t w, const ConvShape& s, std::size_t ho,
            std::size_t wo, T* dst) {
  const auto pad = static_cast<std::ptrdiff_t>(s.pad);
  for (std::size_t ch = 0; ch < c; ++ch) {
    T* plane = dst + ch * h * w;
    for (std::size_t ky = 0; ky < s.kernel; ++ky) {
      for (std::size_t kx = 0; kx < s.kernel; ++kx) {
        const T* row = col + ((ch * s.kernel + ky) * s.kernel + kx) * ho * wo;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) - pad;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          T* line = plane + static_cast<std::size_t>(iy) * w;
          const T* src = row + oy * wo;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox + kx) - pad;
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(w)) line[ix] += src[ox];
          }
        }
      }
    }
  }
}

std::pair<std::size_t, std::size_t> conv_out(std::size_t h, std::size_t w, const ConvShape& s) {
  if (h + 2 * s.pad < s.kernel || w + 2 * s.pad < s.kernel) throw ShapeError("input smaller than the kernel");
  return {h + 2 * s.pad - s.kernel + 1, w + 2 * s.pad - s.kernel + 1};
}

}  // namespace

template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& x, std::span<const T> weight, std::span<const T> bias,
                          const ConvShape& s) {
  if (x.c != s.in_channels) throw ShapeError("conv input channels mismatch");
  const std::size_t kk = s.in_channels * s.kernel * s.kernel;
  if (weight.size() != s.out_channels * kk || bias.size() != s.out_channels) throw ShapeError("conv parameter size");
  const auto [ho, wo] = conv_out(x.h, x.w, s);
  Tensor4<T> y(x.n, s.out_channels, ho, wo);
  std::vector<T> col(kk * ho * wo);
  const CMapR<T> wm(weight.data(), static_cast<Eigen::Index>(s.out_channels), static_cast<Eigen::Index>(kk));
  const Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bv(bias.data(), static_cast<Eigen::Index>(bias.size()));
  for (std::size_t i = 0; i < x.n; ++i) {
    const T* src = x.data.data() + i * x.sample();
    T* out = y.data.data() + i * y.sample();
    MapR<T> om(out, static_cast<Eigen::Index>(s.out_channels), static_cast<Eigen::Index>(ho * wo));
    if (s.kernel == 1 && s.pad == 0) {
      const CMapR<T> xm(src, static_cast<Eigen::Index>(x.c), static_cast<Eigen::Index>(ho * wo));
      om.noalias() = wm * xm;
    } else {
      im2col(src, x.c, x.h, x.w, s, ho, wo, col.data());
      const CMapR<T> cm(col.data(), static_cast<Eigen::Index>(kk), static_cast<Eigen::Index>(ho * wo));
      om.noalias() = wm * cm;
    }
    om.colwise() += bv;
  }
  return y;
}

template <typename T>
void conv2d_backward(const Tensor4<T>& x, const Tensor4<T>& dy, std::span<const T> weight, const ConvShape& s,
                     std::span<T> dweight, std::span<T> dbias, Tensor4<T>* dx) {
  const std::size_t kk = s.in_channels * s.kernel * s.kernel;
  const auto [ho, wo] = conv_out(x.h, x.w, s);
  if (dy.n != x.n || dy.c != s.out_channels || dy.h != ho || dy.w != wo) throw ShapeError("conv gradient shape");
  const auto oc = static_cast<Eigen::Index>(s.out_channels);
  const auto hw = static_cast<Eigen::Index>(ho * wo);
  const auto kki = static_cast<Eigen::Index>(kk);
  const CMapR<T> wm(weight.data(), oc, kki);
  MapR<T> dwm(dweight.data(), oc, kki);
  if (dx) *dx = Tensor4<T>(x.n, x.c, x.h, x.w);
  const bool pointwise = s.kernel == 1 && s.pad == 0;
  std::vector<T> col(pointwise ? 0 : kk * ho * wo);
  MatR<T> dcol;
  for (std::size_t i = 0; i < x.n; ++i) {
    const T* src = x.data.data() + i * x.sample();
    const CMapR<T> dym(dy.data.data() + i * dy.sample(), oc, hw);
    // Sequential sums: Eigen's vectorized reductions on unaligned maps
    // depend on the buffer address, which breaks run-to-run reproducibility.
    for (Eigen::Index o = 0; o < oc; ++o) {
      T acc = T(0);
      for (Eigen::Index k = 0; k < hw; ++k) acc += dym(o, k);
      dbias[static_cast<std::size_t>(o)] += acc;
    }
    if (pointwise) {
      const CMapR<T> xm(src, kki, hw);
      dwm.noalias() += dym * xm.transpose();
      if (dx) {
        MapR<T> dxm(dx->data.data() + i * dx->sample(), kki, hw);
        dxm.noalias() = wm.transpose() * dym;
      }
      continue;
    }
    im2col(src, x.c, x.h, x.w, s, ho, wo, col.data());
    const CMapR<T> cm(col.data(), kki, hw);
    dwm.noalias() += dym * cm.transpose();
    if (dx) {
      dcol.noalias() = wm.transpose() * dym;
      col2im(dcol.data(), x.c, x.h, x.w, s, ho, wo, dx->data.data() + i * dx->sample());
    }
  }
}

template <typename T>
Tensor4<T> avgpool2_forward(const Tensor4<T>& x) {
  const std::size_t ho = x.h / 2, wo = x.w / 2;
  if (ho == 0 || wo == 0) throw ShapeError("pooling input smaller than 2x2");
  Tensor4<T> y(x.n, x.c, ho, wo);
  for (std::size_t i = 0; i < x.n; ++i) {
    for (std::size_t ch = 0; ch < x.c; ++ch) {
      for (std::size_t oy = 0; oy < ho; ++oy) {
        for (std::size_t ox = 0; ox < wo; ++ox) {
          y.at(i, ch, oy, ox) = T(0.25) * (x.at(i, ch, 2 * oy, 2 * ox) + x.at(i, ch, 2 * oy, 2 * ox + 1) +
                                           x.at(i, ch, 2 * oy + 1, 2 * ox) + x.at(i, ch, 2 * oy + 1, 2 * ox + 1));
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor4<T> avgpool2_backward(const Tensor4<T>& dy, std::size_t in_h, std::size_t in_w) {
  if (dy.h != in_h / 2 || dy.w != in_w / 2) throw ShapeError("pooling gradient shape");
  Tensor4<T> dx(dy.n, dy.c, in_h, in_w);
  for (std::size_t i = 0; i < dy.n; ++i) {
    for (std::size_t ch = 0; ch < dy.c; ++ch) {
      for (std::size_t oy = 0; oy < dy.h; ++oy) {
        for (std::size_t ox = 0; ox < dy.w; ++ox) {
          const T g = T(0.25) * dy.at(i, ch, oy, ox);
          dx.at(i, ch, 2 * oy, 2 * ox) = g;
          dx.at(i, ch, 2 * oy, 2 * ox + 1) = g;
          dx.at(i, ch, 2 * oy + 1, 2 * ox) = g;
          dx.at(i, ch, 2 * oy + 1, 2 * ox + 1) = g;
        }
      }
    }
  }
  return dx;
}

template <typename T>
void tanh_inplace(Tensor4<T>& x) {
  for (T& v : x.data) v = std::tanh(v);
}

template <typename T>
Tensor4<T> tanh_backward(const Tensor4<T>& y, const Tensor4<T>& dy) {
  if (!y.same_shape(dy)) throw ShapeError("tanh gradient shape");
  Tensor4<T> dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] *= T(1) - y.data[i] * y.data[i];
  return dx;
}

template <typename T>
void sigmoid_inplace(Tensor4<T>& x) {
  for (T& v : x.data) v = T(1) / (T(1) + std::exp(-v));
}

template <typename T>
Tensor4<T> sigmoid_backward(const Tensor4<T>& y, const Tensor4<T>& dy) {
  if (!y.same_shape(dy)) throw ShapeError("sigmoid gradient shape");
  Tensor4<T> dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] *= y.data[i] * (T(1) - y.data[i]);
  return dx;
}

namespace {

// dir = +1 moves data one frame earlier (output t reads input t + 1) for the
// first fold, -1 reverses it for gradients.
template <typename T>
Tensor4<T> shift(const Tensor4<T>& x, std::size_t depth, int dir) {
  if (depth == 0 || x.n % depth != 0) throw ShapeError("time axis not divisible by frame depth");
  const std::size_t fold = x.c / 3;
  Tensor4<T> y(x.n, x.c, x.h, x.w);
  const std::size_t p = x.plane();
  for (std::size_t g = 0; g < x.n; g += depth) {
    for (std::size_t t = 0; t < depth; ++t) {
      const std::size_t i = g + t;
      for (std::size_t ch = 0; ch < x.c; ++ch) {
        std::ptrdiff_t src_t = static_cast<std::ptrdiff_t>(t);
        if (ch < fold) {
          src_t += dir;
        } else if (ch < 2 * fold) {
          src_t -= dir;
        }
        if (src_t < 0 || src_t >= static_cast<std::ptrdiff_t>(depth)) continue;
        const T* s = x.data.data() + ((g + static_cast<std::size_t>(src_t)) * x.c + ch) * p;
        std::copy(s, s + p, y.data.data() + (i * x.c + ch) * p);
      }
    }
  }
  return y;
}

}  // namespace

template <typename T>
Tensor4<T> tsm_shift(const Tensor4<T>& x, std::size_t frame_depth) {
  return shift(x, frame_depth, +1);
}

template <typename T>
Tensor4<T> tsm_shift_backward(const Tensor4<T>& dy, std::size_t frame_depth) {
  return shift(dy, frame_depth, -1);
}

template <typename T>
Tensor4<T> attention_normalize(const Tensor4<T>& m) {
  Tensor4<T> y = m;
  const T area = static_cast<T>(m.sample());
  for (std::size_t i = 0; i < m.n; ++i) {
    auto s = y.sample_span(i);
    T l1 = 0;
    for (T v : s) l1 += std::abs(v);
    if (l1 <= T(0)) throw ShapeError("attention mask has zero mass");
    const T scale = area / (T(2) * l1);
    for (T& v : s) v *= scale;
  }
  return y;
}

template <typename T>
Tensor4<T> attention_normalize_backward(const Tensor4<T>& m, const Tensor4<T>& dy) {
  if (!m.same_shape(dy)) throw ShapeError("attention gradient shape");
  Tensor4<T> dx(m.n, m.c, m.h, m.w);
  const T area = static_cast<T>(m.sample());
  for (std::size_t i = 0; i < m.n; ++i) {
    const auto ms = m.sample_span(i);
    const auto gs = dy.sample_span(i);
    auto out = dx.sample_span(i);
    T l1 = 0, dot = 0;
    for (std::size_t k = 0; k < ms.size(); ++k) {
      l1 += std::abs(ms[k]);
      dot += gs[k] * ms[k];
    }
    const T a = area / (T(2) * l1);
    for (std::size_t k = 0; k < ms.size(); ++k) {
      const T sgn = ms[k] > 0 ? T(1) : (ms[k] < 0 ? T(-1) : T(0));
      out[k] = a * (gs[k] - sgn * dot / l1);
    }
  }
  return dx;
}

template <typename T>
Tensor4<T> gate_forward(const Tensor4<T>& f, const Tensor4<T>& mask) {
  if (mask.c != 1 || mask.n != f.n || mask.h != f.h || mask.w != f.w) throw ShapeError("gate mask shape");
  Tensor4<T> y = f;
  const std::size_t p = f.plane();
  for (std::size_t i = 0; i < f.n; ++i) {
    const T* m = mask.data.data() + i * p;
    for (std::size_t ch = 0; ch < f.c; ++ch) {
      T* row = y.data.data() + (i * f.c + ch) * p;
      for (std::size_t k = 0; k < p; ++k) row[k] *= m[k];
    }
  }
  return y;
}

template <typename T>
void gate_backward(const Tensor4<T>& f, const Tensor4<T>& mask, const Tensor4<T>& dy, Tensor4<T>& df,
                   Tensor4<T>& dmask) {
  df = Tensor4<T>(f.n, f.c, f.h, f.w);
  dmask = Tensor4<T>(mask.n, 1, mask.h, mask.w);
  const std::size_t p = f.plane();
  for (std::size_t i = 0; i < f.n; ++i) {
    const T* m = mask.data.data() + i * p;
    T* dm = dmask.data.data() + i * p;
    for (std::size_t ch = 0; ch < f.c; ++ch) {
      const std::size_t off = (i * f.c + ch) * p;
      for (std::size_t k = 0; k < p; ++k) {
        df.data[off + k] = dy.data[off + k] * m[k];
        dm[k] += dy.data[off + k] * f.data[off + k];
      }
    }
  }
}

template <typename T>
Tensor4<T> dense_forward(const Tensor4<T>& x, std::span<const T> weight, std::span<const T> bias,
                         std::size_t out_features) {
  const std::size_t in = x.sample();
  if (weight.size() != out_features * in || bias.size() != out_features) throw ShapeError("dense parameter size");
  Tensor4<T> y(x.n, out_features, 1, 1);
  const CMapR<T> xm(x.data.data(), static_cast<Eigen::Index>(x.n), static_cast<Eigen::Index>(in));
  const CMapR<T> wm(weight.data(), static_cast<Eigen::Index>(out_features), static_cast<Eigen::Index>(in));
  MapR<T> ym(y.data.data(), static_cast<Eigen::Index>(x.n), static_cast<Eigen::Index>(out_features));
  ym.noalias() = xm * wm.transpose();
  const Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bv(bias.data(), static_cast<Eigen::Index>(out_features));
  ym.rowwise() += bv;
  return y;
}

template <typename T>
void dense_backward(const Tensor4<T>& x, const Tensor4<T>& dy, std::span<const T> weight, std::span<T> dweight,
                    std::span<T> dbias, Tensor4<T>* dx) {
  const std::size_t in = x.sample();
  const std::size_t out = dy.sample();
  if (dy.n != x.n || weight.size() != out * in) throw ShapeError("dense gradient shape");
  const auto n = static_cast<Eigen::Index>(x.n);
  const CMapR<T> xm(x.data.data(), n, static_cast<Eigen::Index>(in));
  const CMapR<T> dym(dy.data.data(), n, static_cast<Eigen::Index>(out));
  const CMapR<T> wm(weight.data(), static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
  MapR<T> dwm(dweight.data(), static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
  dwm.noalias() += dym.transpose() * xm;
  for (std::size_t o = 0; o < out; ++o) {
    T acc = T(0);
    for (std::size_t r = 0; r < x.n; ++r) acc += dy.data[r * out + o];
    dbias[o] += acc;
  }
  if (dx) {
    *dx = Tensor4<T>(x.n, x.c, x.h, x.w);
    MapR<T> dxm(dx->data.data(), n, static_cast<Eigen::Index>(in));
    dxm.noalias() = dym * wm;
  }
}

template <typename T>
std::vector<T> dropout_mask(std::size_t size, double rate, std::mt19937_64& rng) {
  std::vector<T> mask(size, T(1));
  if (rate <= 0.0) return mask;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  std::bernoulli_distribution drop(rate);
  for (T& m : mask) m = drop(rng) ? T(0) : keep_scale;
  return mask;
}

template <typename T>
void apply_mask(Tensor4<T>& x, const std::vector<T>& mask) {
  if (mask.size() != x.size()) throw ShapeError("dropout mask size");
  for (std::size_t i = 0; i < x.size(); ++i) x.data[i] *= mask[i];
}

#define EVPULSE_INSTANTIATE_LAYERS(T)                                                                                  \
  template Tensor4<T> conv2d_forward(const Tensor4<T>&, std::span<const T>, std::span<const T>, const ConvShape&);    \
  template void conv2d_backward(const Tensor4<T>&, const Tensor4<T>&, std::span<const T>, const ConvShape&,           \
                                std::span<T>, std::span<T>, Tensor4<T>*);                                              \
  template Tensor4<T> avgpool2_forward(const Tensor4<T>&);                                                             \
  template Tensor4<T> avgpool2_backward(const Tensor4<T>&, std::size_t, std::size_t);                                 \
  template void tanh_inplace(Tensor4<T>&);                                                                             \
  template Tensor4<T> tanh_backward(const Tensor4<T>&, const Tensor4<T>&);                                             \
  template void sigmoid_inplace(Tensor4<T>&);                                                                          \
  template Tensor4<T> sigmoid_backward(const Tensor4<T>&, const Tensor4<T>&);                                          \
  template Tensor4<T> tsm_shift(const Tensor4<T>&, std::size_t);                                                       \
  template Tensor4<T> tsm_shift_backward(const Tensor4<T>&, std::size_t);                                              \
  template Tensor4<T> attention_normalize(const Tensor4<T>&);                                                          \
  template Tensor4<T> attention_normalize_backward(const Tensor4<T>&, const Tensor4<T>&);                              \
  template Tensor4<T> gate_forward(const Tensor4<T>&, const Tensor4<T>&);                                              \
  template void gate_backward(const Tensor4<T>&, const Tensor4<T>&, const Tensor4<T>&, Tensor4<T>&, Tensor4<T>&);     \
  template Tensor4<T> dense_forward(const Tensor4<T>&, std::span<const T>, std::span<const T>, std::size_t);          \
  template void dense_backward(const Tensor4<T>&, const Tensor4<T>&, std::span<const T>, std::span<T>, std::span<T>,  \
                               Tensor4<T>*);                                                                           \
  template std::vector<T> dropout_mask<T>(std::size_t, double, std::mt19937_64&);                                     \
  template void apply_mask(Tensor4<T>&, const std::vector<T>&);

EVPULSE_INSTANTIATE_LAYERS(float)
EVPULSE_INSTANTIATE_LAYERS(double)

#undef EVPULSE_INSTANTIATE_LAYERS

}  // namespace evpulse::tscan
