#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "evpulse/tscan/layers.hpp"
#include "evpulse/tscan/tensor.hpp"

namespace evpulse::tscan {

struct TscanConfig {
  std::size_t frame_depth = 10;
  std::size_t input_size = 64;
  /// Output channels of the four convolution blocks (both branches).
  std::array<std::size_t, 4> channels{32, 32, 64, 64};
  std::size_t dense_hidden = 128;
  /// After the first pooling, after the second pooling, after the hidden
  /// dense layer.
  std::array<double, 3> dropout{0.25, 0.25, 0.5};
  double learning_rate = 18e-5;
  double weight_decay = 0.01;
  std::size_t batch_size = 8;
  std::size_t chunk_len = 180;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
  double flip_prob = 0.5;
  /// Worker threads for the data-parallel trainer; 1 is the reproducible mode.
  std::size_t threads = 1;

  void validate() const;
};

template <typename T>
struct Parameter {
  std::string name;
  std::vector<std::size_t> dims;
  std::vector<T> value;

  std::size_t size() const noexcept { return value.size(); }
};

/// One gradient buffer per model parameter, same order.
template <typename T>
using Gradients = std::vector<std::vector<T>>;

enum class Mode { kEval, kTrain };

/// Dual-branch temporal-shift attention network on single-channel frames.
///
/// Both branches read the same frame. The motion branch applies a temporal
/// shift before each of its four convolutions; the appearance branch
/// produces two sigmoid masks, normalized to H * W / 2 total mass, which
/// gate the motion features before each pooling. Frames are processed in
/// independent groups of `frame_depth`.
template <typename T>
class TscanModel {
 public:
  enum Index : std::size_t {
    kMotion1W, kMotion1B, kMotion2W, kMotion2B, kMotion3W, kMotion3B, kMotion4W, kMotion4B,
    kApp1W, kApp1B, kApp2W, kApp2B, kApp3W, kApp3B, kApp4W, kApp4B,
    kAtt1W, kAtt1B, kAtt2W, kAtt2B,
    kDense1W, kDense1B, kDense2W, kDense2B,
    kParamCount
  };

  explicit TscanModel(const TscanConfig& config);

  const TscanConfig& config() const noexcept { return config_; }
  std::vector<Parameter<T>>& parameters() noexcept { return params_; }
  const std::vector<Parameter<T>>& parameters() const noexcept { return params_; }
  Parameter<T>& parameter(const std::string& name);

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases.
  void initialize(std::uint64_t seed);
  void zero_head();

  Gradients<T> zero_gradients() const;
  std::size_t parameter_count() const;
  std::size_t flat_features() const noexcept { return flat_; }

  /// One prediction per frame. Input is (frames, 1, S, S) with the frame
  /// count a multiple of the frame depth. Dropout draws from `rng` in train
  /// mode; eval mode ignores it.
  std::vector<T> forward(const Tensor4<T>& frames, Mode mode = Mode::kEval, std::mt19937_64* rng = nullptr) const;

  /// Maps the group's predictions to dLoss/dPrediction.
  using LossGradient = std::function<std::vector<T>(std::span<const T>)>;

  /// Forward plus reverse pass for one group of `frame_depth` frames.
  /// Gradients are accumulated into `grads`; the input gradient is written
  /// when `dinput` is non-null. Returns the predictions.
  std::vector<T> forward_backward(const Tensor4<T>& group, const LossGradient& dloss, Gradients<T>& grads, Mode mode,
                                  std::mt19937_64* rng, Tensor4<T>* dinput = nullptr) const;

  /// Eval-mode predictions for any frame count >= frame_depth; a trailing
  /// partial group is predicted from the last full window.
  std::vector<T> infer(const Tensor4<T>& frames) const;

  template <typename U>
  TscanModel<U> cast() const;

 private:
  struct Cache;
  std::vector<T> run(const Tensor4<T>& group, Mode mode, std::mt19937_64* rng, Cache* cache) const;
  void check_input(const Tensor4<T>& frames) const;

  TscanConfig config_;
  std::vector<Parameter<T>> params_;
  ConvShape shapes_[8];
  ConvShape att_shapes_[2];
  std::size_t flat_ = 0;
};

template <typename T>
T loss_mse(std::span<const T> pred, std::span<const T> labels);

/// Left-right mirrored copy of every frame.
template <typename T>
Tensor4<T> horizontal_flip(const Tensor4<T>& x);

}  // namespace evpulse::tscan
