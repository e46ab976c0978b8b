#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "evpulse/tscan/tensor.hpp"

namespace evpulse::tscan {

/// Square-kernel convolution, stride 1. Weights are (out, in * k * k)
/// row-major, matching im2col column order (in, ky, kx).
struct ConvShape {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel = 3;
  std::size_t pad = 1;
};

template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& x, std::span<const T> weight, std::span<const T> bias,
                          const ConvShape& shape);

/// Accumulates weight and bias gradients; writes the input gradient into
/// `dx` when it is non-null.
template <typename T>
void conv2d_backward(const Tensor4<T>& x, const Tensor4<T>& dy, std::span<const T> weight, const ConvShape& shape,
                     std::span<T> dweight, std::span<T> dbias, Tensor4<T>* dx);

/// 2x2 average pooling, stride 2, trailing odd row/column dropped.
template <typename T>
Tensor4<T> avgpool2_forward(const Tensor4<T>& x);
template <typename T>
Tensor4<T> avgpool2_backward(const Tensor4<T>& dy, std::size_t in_h, std::size_t in_w);

template <typename T>
void tanh_inplace(Tensor4<T>& x);
/// dy * (1 - y^2) given the activation output y.
template <typename T>
Tensor4<T> tanh_backward(const Tensor4<T>& y, const Tensor4<T>& dy);

template <typename T>
void sigmoid_inplace(Tensor4<T>& x);
template <typename T>
Tensor4<T> sigmoid_backward(const Tensor4<T>& y, const Tensor4<T>& dy);

/// Within each group of `frame_depth` consecutive samples: the first C/3
/// channels take the next frame's values, the next C/3 the previous
/// frame's, the rest stay. Vacated slots are zero.
template <typename T>
Tensor4<T> tsm_shift(const Tensor4<T>& x, std::size_t frame_depth);
template <typename T>
Tensor4<T> tsm_shift_backward(const Tensor4<T>& dy, std::size_t frame_depth);

/// Per-sample soft-attention normalization: H * W * m / (2 * sum |m|).
template <typename T>
Tensor4<T> attention_normalize(const Tensor4<T>& m);
template <typename T>
Tensor4<T> attention_normalize_backward(const Tensor4<T>& m, const Tensor4<T>& dy);

/// Single-channel mask gating: y = features * mask (broadcast over channels).
template <typename T>
Tensor4<T> gate_forward(const Tensor4<T>& features, const Tensor4<T>& mask);
template <typename T>
void gate_backward(const Tensor4<T>& features, const Tensor4<T>& mask, const Tensor4<T>& dy, Tensor4<T>& dfeatures,
                   Tensor4<T>& dmask);

/// Fully connected layer over flattened samples; weight is (out, in).
template <typename T>
Tensor4<T> dense_forward(const Tensor4<T>& x, std::span<const T> weight, std::span<const T> bias,
                         std::size_t out_features);
template <typename T>
void dense_backward(const Tensor4<T>& x, const Tensor4<T>& dy, std::span<const T> weight, std::span<T> dweight,
                    std::span<T> dbias, Tensor4<T>* dx);

/// Inverted dropout mask (0 or 1 / (1 - rate)); all ones when rate is 0.
template <typename T>
std::vector<T> dropout_mask(std::size_t size, double rate, std::mt19937_64& rng);
template <typename T>
void apply_mask(Tensor4<T>& x, const std::vector<T>& mask);

}  // namespace evpulse::tscan
