#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "evpulse/errors.hpp"

namespace evpulse::tscan {

/// Dense NCHW tensor. N is the flattened batch-time axis.
template <typename T>
struct Tensor4 {
  std::size_t n = 0, c = 0, h = 0, w = 0;
  std::vector<T> data;

  Tensor4() = default;
  Tensor4(std::size_t n_, std::size_t c_, std::size_t h_, std::size_t w_, T fill = T(0))
      : n(n_), c(c_), h(h_), w(w_), data(n_ * c_ * h_ * w_, fill) {}

  std::size_t size() const noexcept { return data.size(); }
  std::size_t plane() const noexcept { return h * w; }
  std::size_t sample() const noexcept { return c * h * w; }
  std::array<std::size_t, 4> dims() const noexcept { return {n, c, h, w}; }

  T& at(std::size_t i, std::size_t ch, std::size_t y, std::size_t x) { return data[((i * c + ch) * h + y) * w + x]; }
  const T& at(std::size_t i, std::size_t ch, std::size_t y, std::size_t x) const {
    return data[((i * c + ch) * h + y) * w + x];
  }

  std::span<T> sample_span(std::size_t i) { return {data.data() + i * sample(), sample()}; }
  std::span<const T> sample_span(std::size_t i) const { return {data.data() + i * sample(), sample()}; }

  bool same_shape(const Tensor4& o) const noexcept { return n == o.n && c == o.c && h == o.h && w == o.w; }
};

/// Copy of samples [first, first + count).
template <typename T>
Tensor4<T> slice_samples(const Tensor4<T>& x, std::size_t first, std::size_t count) {
  if (first + count > x.n) throw ShapeError("sample slice out of range");
  Tensor4<T> out(count, x.c, x.h, x.w);
  std::copy(x.data.begin() + static_cast<std::ptrdiff_t>(first * x.sample()),
            x.data.begin() + static_cast<std::ptrdiff_t>((first + count) * x.sample()), out.data.begin());
  return out;
}

template <typename To, typename From>
Tensor4<To> tensor_cast(const Tensor4<From>& x) {
  Tensor4<To> out(x.n, x.c, x.h, x.w);
  for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = static_cast<To>(x.data[i]);
  return out;
}

}  // namespace evpulse::tscan
