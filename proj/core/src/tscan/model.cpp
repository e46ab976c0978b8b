#include "evpulse/tscan/model.hpp"

#include <cmath>

#include "evpulse/errors.hpp"

namespace evpulse::tscan {

void TscanConfig::validate() const {
  if (frame_depth == 0) throw ParameterError("frame depth must be positive");
  if (chunk_len == 0 || chunk_len % frame_depth != 0) throw ParameterError("chunk length must be a multiple of the frame depth");
  if (batch_size == 0) throw ParameterError("batch size must be positive");
  for (auto c : channels) {
    if (c == 0) throw ParameterError("channel counts must be positive");
  }
  if (dense_hidden == 0) throw ParameterError("dense width must be positive");
  for (double d : dropout) {
    if (d < 0.0 || d >= 1.0) throw ParameterError("dropout rates must lie in [0, 1)");
  }
  if (learning_rate < 0.0 || weight_decay < 0.0) throw ParameterError("learning rate and weight decay must be >= 0");
  if (flip_prob < 0.0 || flip_prob > 1.0) throw ParameterError("flip probability must lie in [0, 1]");
  if (threads == 0) throw ParameterError("thread count must be positive");
  const std::size_t s = input_size;
  if (s < 10 || ((s - 2) / 2) < 4) throw ParameterError("input size too small for the four-block network");
}

template <typename T>
struct TscanModel<T>::Cache {
  Tensor4<T> x, m0, h1, m1, h2, r1, r2, s1, g1, q1, rq, m2, h3, m3, h4, r3, r4, s2, g2, q2, t1, t1d;
  std::vector<T> mask_a, mask_b, mask_c, mask_d;
};

template <typename T>
TscanModel<T>::TscanModel(const TscanConfig& config) : config_(config) {
  config_.validate();
  const auto& ch = config_.channels;
  // Motion and appearance blocks share channel widths: same, valid, same, valid.
  const std::size_t ins[4] = {1, ch[0], ch[1], ch[2]};
  const std::size_t pads[4] = {1, 0, 1, 0};
  for (std::size_t b = 0; b < 4; ++b) {
    shapes_[b] = ConvShape{ins[b], ch[b], 3, pads[b]};
    shapes_[4 + b] = shapes_[b];
  }
  att_shapes_[0] = ConvShape{ch[1], 1, 1, 0};
  att_shapes_[1] = ConvShape{ch[3], 1, 1, 0};

  const std::size_t s1 = (config_.input_size - 2) / 2;
  const std::size_t s2 = (s1 - 2) / 2;
  flat_ = ch[3] * s2 * s2;

  params_.resize(kParamCount);
  auto conv = [&](std::size_t wi, const std::string& name, const ConvShape& s) {
    params_[wi] = {name + ".weight", {s.out_channels, s.in_channels, s.kernel, s.kernel},
                   std::vector<T>(s.out_channels * s.in_channels * s.kernel * s.kernel)};
    params_[wi + 1] = {name + ".bias", {s.out_channels}, std::vector<T>(s.out_channels)};
  };
  const char* motion[4] = {"motion_conv1", "motion_conv2", "motion_conv3", "motion_conv4"};
  const char* app[4] = {"appearance_conv1", "appearance_conv2", "appearance_conv3", "appearance_conv4"};
  for (std::size_t b = 0; b < 4; ++b) {
    conv(kMotion1W + 2 * b, motion[b], shapes_[b]);
    conv(kApp1W + 2 * b, app[b], shapes_[4 + b]);
  }
  conv(kAtt1W, "attention_conv1", att_shapes_[0]);
  conv(kAtt2W, "attention_conv2", att_shapes_[1]);
  params_[kDense1W] = {"dense1.weight", {config_.dense_hidden, flat_}, std::vector<T>(config_.dense_hidden * flat_)};
  params_[kDense1B] = {"dense1.bias", {config_.dense_hidden}, std::vector<T>(config_.dense_hidden)};
  params_[kDense2W] = {"dense2.weight", {1, config_.dense_hidden}, std::vector<T>(config_.dense_hidden)};
  params_[kDense2B] = {"dense2.bias", {1}, std::vector<T>(1)};
  initialize(config_.seed);
}

template <typename T>
Parameter<T>& TscanModel<T>::parameter(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return p;
  }
  throw ParameterError("no parameter named " + name);
}

template <typename T>
void TscanModel<T>::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x7ACA5EEDull);
  for (std::size_t i = 0; i < kParamCount; i += 2) {
    auto& w = params_[i];
    std::size_t fan_in = 1;
    for (std::size_t d = 1; d < w.dims.size(); ++d) fan_in *= w.dims[d];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (T& v : w.value) v = static_cast<T>(u(rng));
    for (T& v : params_[i + 1].value) v = static_cast<T>(u(rng));
  }
}

template <typename T>
void TscanModel<T>::zero_head() {
  std::fill(params_[kDense2W].value.begin(), params_[kDense2W].value.end(), T(0));
  std::fill(params_[kDense2B].value.begin(), params_[kDense2B].value.end(), T(0));
}

template <typename T>
Gradients<T> TscanModel<T>::zero_gradients() const {
  Gradients<T> g(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) g[i].assign(params_[i].size(), T(0));
  return g;
}

template <typename T>
std::size_t TscanModel<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

template <typename T>
void TscanModel<T>::check_input(const Tensor4<T>& frames) const {
  if (frames.c != 1 || frames.h != config_.input_size || frames.w != config_.input_size) {
    throw ShapeError("expected (frames, 1, " + std::to_string(config_.input_size) + ", " +
                     std::to_string(config_.input_size) + ") input");
  }
}

template <typename T>
std::vector<T> TscanModel<T>::run(const Tensor4<T>& x, Mode mode, std::mt19937_64* rng, Cache* cache) const {
  const std::size_t depth = config_.frame_depth;
  auto val = [&](std::size_t i) { return std::span<const T>(params_[i].value); };
  auto conv = [&](const Tensor4<T>& in, std::size_t wi, const ConvShape& s) {
    return conv2d_forward<T>(in, val(wi), val(wi + 1), s);
  };
  const bool train = mode == Mode::kTrain;
  if (train && !rng) throw ParameterError("train mode needs a random generator");
  auto mask = [&](std::size_t n, double rate) {
    return train ? dropout_mask<T>(n, rate, *rng) : std::vector<T>(n, T(1));
  };

  Tensor4<T> m0 = tsm_shift(x, depth);
  Tensor4<T> h1 = conv(m0, kMotion1W, shapes_[0]);
  tanh_inplace(h1);
  Tensor4<T> m1 = tsm_shift(h1, depth);
  Tensor4<T> h2 = conv(m1, kMotion2W, shapes_[1]);
  tanh_inplace(h2);

  Tensor4<T> r1 = conv(x, kApp1W, shapes_[4]);
  tanh_inplace(r1);
  Tensor4<T> r2 = conv(r1, kApp2W, shapes_[5]);
  tanh_inplace(r2);

  Tensor4<T> s1 = conv(r2, kAtt1W, att_shapes_[0]);
  sigmoid_inplace(s1);
  Tensor4<T> g1 = attention_normalize(s1);
  Tensor4<T> q1 = avgpool2_forward(gate_forward(h2, g1));
  auto mask_a = mask(q1.size(), config_.dropout[0]);
  apply_mask(q1, mask_a);
  Tensor4<T> rq = avgpool2_forward(r2);
  auto mask_b = mask(rq.size(), config_.dropout[0]);
  apply_mask(rq, mask_b);

  Tensor4<T> m2 = tsm_shift(q1, depth);
  Tensor4<T> h3 = conv(m2, kMotion3W, shapes_[2]);
  tanh_inplace(h3);
  Tensor4<T> m3 = tsm_shift(h3, depth);
  Tensor4<T> h4 = conv(m3, kMotion4W, shapes_[3]);
  tanh_inplace(h4);

  Tensor4<T> r3 = conv(rq, kApp3W, shapes_[6]);
  tanh_inplace(r3);
  Tensor4<T> r4 = conv(r3, kApp4W, shapes_[7]);
  tanh_inplace(r4);

  Tensor4<T> s2 = conv(r4, kAtt2W, att_shapes_[1]);
  sigmoid_inplace(s2);
  Tensor4<T> g2 = attention_normalize(s2);
  Tensor4<T> q2 = avgpool2_forward(gate_forward(h4, g2));
  auto mask_c = mask(q2.size(), config_.dropout[1]);
  apply_mask(q2, mask_c);

  Tensor4<T> t1 = dense_forward<T>(q2, val(kDense1W), val(kDense1B), config_.dense_hidden);
  tanh_inplace(t1);
  Tensor4<T> t1d = t1;
  auto mask_d = mask(t1d.size(), config_.dropout[2]);
  apply_mask(t1d, mask_d);
  Tensor4<T> out = dense_forward<T>(t1d, val(kDense2W), val(kDense2B), 1);

  if (cache) {
    *cache = Cache{x,  std::move(m0), std::move(h1), std::move(m1), std::move(h2), std::move(r1), std::move(r2),
                   std::move(s1), std::move(g1), std::move(q1), std::move(rq), std::move(m2), std::move(h3),
                   std::move(m3), std::move(h4), std::move(r3), std::move(r4), std::move(s2), std::move(g2),
                   std::move(q2), std::move(t1), std::move(t1d), std::move(mask_a), std::move(mask_b),
                   std::move(mask_c), std::move(mask_d)};
  }
  return std::move(out.data);
}

template <typename T>
std::vector<T> TscanModel<T>::forward(const Tensor4<T>& frames, Mode mode, std::mt19937_64* rng) const {
  check_input(frames);
  const std::size_t depth = config_.frame_depth;
  if (frames.n % depth != 0) throw ShapeError("frame count must be a multiple of the frame depth");
  std::vector<T> out;
  out.reserve(frames.n);
  for (std::size_t g = 0; g < frames.n; g += depth) {
    const auto part = run(slice_samples(frames, g, depth), mode, rng, nullptr);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

template <typename T>
std::vector<T> TscanModel<T>::forward_backward(const Tensor4<T>& group, const LossGradient& dloss, Gradients<T>& grads,
                                               Mode mode, std::mt19937_64* rng, Tensor4<T>* dinput) const {
  check_input(group);
  const std::size_t depth = config_.frame_depth;
  if (group.n != depth) throw ShapeError("forward_backward takes exactly one frame-depth group");
  if (grads.size() != params_.size()) throw ShapeError("gradient buffers do not match the model");

  Cache c;
  auto pred = run(group, mode, rng, &c);
  const std::vector<T> dout = dloss(pred);
  if (dout.size() != depth) throw ShapeError("loss gradient length differs from the group size");

  auto val = [&](std::size_t i) { return std::span<const T>(params_[i].value); };
  auto grad = [&](std::size_t i) { return std::span<T>(grads[i]); };
  auto conv_back = [&](const Tensor4<T>& in, const Tensor4<T>& dy, std::size_t wi, const ConvShape& s,
                       Tensor4<T>* dx) { conv2d_backward<T>(in, dy, val(wi), s, grad(wi), grad(wi + 1), dx); };

  Tensor4<T> dy(depth, 1, 1, 1);
  std::copy(dout.begin(), dout.end(), dy.data.begin());

  // Head.
  Tensor4<T> dt1d;
  dense_backward<T>(c.t1d, dy, val(kDense2W), grad(kDense2W), grad(kDense2B), &dt1d);
  apply_mask(dt1d, c.mask_d);
  Tensor4<T> de1 = tanh_backward(c.t1, dt1d);
  Tensor4<T> dq2;
  dense_backward<T>(c.q2, de1, val(kDense1W), grad(kDense1W), grad(kDense1B), &dq2);
  apply_mask(dq2, c.mask_c);
  Tensor4<T> dgated2 = avgpool2_backward(dq2, c.h4.h, c.h4.w);

  // Second attention gate.
  Tensor4<T> dh4, dg2;
  gate_backward(c.h4, c.g2, dgated2, dh4, dg2);
  Tensor4<T> dz2 = sigmoid_backward(c.s2, attention_normalize_backward(c.s2, dg2));
  Tensor4<T> dr4;
  conv_back(c.r4, dz2, kAtt2W, att_shapes_[1], &dr4);

  // Motion blocks 4, 3.
  Tensor4<T> dm3, dm2;
  conv_back(c.m3, tanh_backward(c.h4, dh4), kMotion4W, shapes_[3], &dm3);
  conv_back(c.m2, tanh_backward(c.h3, tsm_shift_backward(dm3, depth)), kMotion3W, shapes_[2], &dm2);
  Tensor4<T> dq1 = tsm_shift_backward(dm2, depth);

  // Appearance blocks 4, 3.
  Tensor4<T> dr3, drq;
  conv_back(c.r3, tanh_backward(c.r4, dr4), kApp4W, shapes_[7], &dr3);
  conv_back(c.rq, tanh_backward(c.r3, dr3), kApp3W, shapes_[6], &drq);
  apply_mask(drq, c.mask_b);
  Tensor4<T> dr2 = avgpool2_backward(drq, c.r2.h, c.r2.w);

  // First attention gate.
  apply_mask(dq1, c.mask_a);
  Tensor4<T> dgated1 = avgpool2_backward(dq1, c.h2.h, c.h2.w);
  Tensor4<T> dh2, dg1;
  gate_backward(c.h2, c.g1, dgated1, dh2, dg1);
  Tensor4<T> dz1 = sigmoid_backward(c.s1, attention_normalize_backward(c.s1, dg1));
  Tensor4<T> dr2_att;
  conv_back(c.r2, dz1, kAtt1W, att_shapes_[0], &dr2_att);
  for (std::size_t i = 0; i < dr2.size(); ++i) dr2.data[i] += dr2_att.data[i];

  // Motion blocks 2, 1.
  Tensor4<T> dm1, dm0;
  conv_back(c.m1, tanh_backward(c.h2, dh2), kMotion2W, shapes_[1], &dm1);
  conv_back(c.m0, tanh_backward(c.h1, tsm_shift_backward(dm1, depth)), kMotion1W, shapes_[0],
            dinput ? &dm0 : nullptr);

  // Appearance blocks 2, 1.
  Tensor4<T> dr1, dxa;
  conv_back(c.r1, tanh_backward(c.r2, dr2), kApp2W, shapes_[5], &dr1);
  conv_back(c.x, tanh_backward(c.r1, dr1), kApp1W, shapes_[4], dinput ? &dxa : nullptr);

  if (dinput) {
    *dinput = tsm_shift_backward(dm0, depth);
    for (std::size_t i = 0; i < dinput->size(); ++i) dinput->data[i] += dxa.data[i];
  }
  return pred;
}

template <typename T>
std::vector<T> TscanModel<T>::infer(const Tensor4<T>& frames) const {
  check_input(frames);
  const std::size_t depth = config_.frame_depth;
  if (frames.n < depth) throw ShapeError("need at least one frame-depth group of frames");
  const std::size_t full = frames.n / depth * depth;
  std::vector<T> out = forward(slice_samples(frames, 0, full));
  if (full < frames.n) {
    const auto tail = run(slice_samples(frames, frames.n - depth, depth), Mode::kEval, nullptr, nullptr);
    out.insert(out.end(), tail.end() - static_cast<std::ptrdiff_t>(frames.n - full), tail.end());
  }
  return out;
}

template <typename T>
template <typename U>
TscanModel<U> TscanModel<T>::cast() const {
  TscanModel<U> m(config_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& dst = m.parameters()[i].value;
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = static_cast<U>(params_[i].value[k]);
  }
  return m;
}

template <typename T>
T loss_mse(std::span<const T> pred, std::span<const T> labels) {
  if (pred.size() != labels.size()) throw LengthError("prediction and label lengths differ");
  if (pred.empty()) return T(0);
  T acc = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) acc += (pred[i] - labels[i]) * (pred[i] - labels[i]);
  return acc / static_cast<T>(pred.size());
}

template <typename T>
Tensor4<T> horizontal_flip(const Tensor4<T>& x) {
  Tensor4<T> y(x.n, x.c, x.h, x.w);
  for (std::size_t i = 0; i < x.n; ++i) {
    for (std::size_t ch = 0; ch < x.c; ++ch) {
      for (std::size_t r = 0; r < x.h; ++r) {
        for (std::size_t col = 0; col < x.w; ++col) y.at(i, ch, r, col) = x.at(i, ch, r, x.w - 1 - col);
      }
    }
  }
  return y;
}

template class TscanModel<float>;
template class TscanModel<double>;
template TscanModel<double> TscanModel<float>::cast<double>() const;
template TscanModel<float> TscanModel<double>::cast<float>() const;
template TscanModel<float> TscanModel<float>::cast<float>() const;
template TscanModel<double> TscanModel<double>::cast<double>() const;
template float loss_mse(std::span<const float>, std::span<const float>);
template double loss_mse(std::span<const double>, std::span<const double>);
template Tensor4<float> horizontal_flip(const Tensor4<float>&);
template Tensor4<double> horizontal_flip(const Tensor4<double>&);

}  // namespace evpulse::tscan
