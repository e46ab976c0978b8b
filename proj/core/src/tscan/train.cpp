#include "evpulse/tscan/train.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <numeric>
#include <thread>

#include "evpulse/errors.hpp"

namespace evpulse::tscan {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double anneal_cos(double start, double end, double pct) {
  return end + (start - end) / 2.0 * (1.0 + std::cos(std::numbers::pi * pct));
}

struct Task {
  std::size_t item;
  std::size_t group;
  bool flip;
  std::uint64_t seed;
};

}  // namespace

Tensor4<float> standardize_frames(const frames::FrameSet& set) {
  const std::size_t s = set.width;
  if (set.width != set.height) throw ShapeError("frames must be square");
  Tensor4<float> out(set.frames.size(), 1, set.height, s);
  double sum = 0.0, sq = 0.0;
  for (const auto& f : set.frames) {
    for (auto v : f.pixels) {
      sum += v;
      sq += static_cast<double>(v) * v;
    }
  }
  const double n = static_cast<double>(out.size());
  const double mean = n > 0 ? sum / n : 0.0;
  double sd = n > 0 ? std::sqrt(std::max(0.0, sq / n - mean * mean)) : 1.0;
  if (!(sd > 1e-12)) sd = 1.0;
  std::size_t k = 0;
  for (const auto& f : set.frames) {
    for (auto v : f.pixels) out.data[k++] = static_cast<float>((v - mean) / sd);
  }
  return out;
}

Dataset make_chunks(const frames::FrameSet& set, const labels::LabelSeries& labels, std::size_t chunk_len,
                    std::size_t first_label_frame) {
  if (chunk_len == 0) throw ParameterError("chunk length must be positive");
  if (first_label_frame > set.frames.size()) throw LengthError("labels start after the last frame");
  const Tensor4<float> all = standardize_frames(set);
  const std::size_t aligned = std::min(labels.size(), set.frames.size() - first_label_frame);
  Dataset out;
  for (std::size_t start = 0; start + chunk_len <= aligned; start += chunk_len) {
    Chunk c;
    c.frames = slice_samples(all, first_label_frame + start, chunk_len);
    c.labels.resize(chunk_len);
    for (std::size_t j = 0; j < chunk_len; ++j) c.labels[j] = static_cast<float>(labels.values[start + j]);
    out.push_back(std::move(c));
  }
  return out;
}

OneCycleSchedule::OneCycleSchedule(double peak_lr, std::size_t total_steps, double pct_start, double div_factor,
                                   double final_div_factor)
    : peak_(peak_lr),
      initial_(peak_lr / div_factor),
      final_(peak_lr / (div_factor * final_div_factor)),
      total_(total_steps) {
  if (total_steps == 0) throw ParameterError("schedule needs at least one step");
  if (!(pct_start > 0.0 && pct_start < 1.0)) throw ParameterError("pct_start must lie in (0, 1)");
  warm_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(pct_start * static_cast<double>(total_))));
  warm_ = std::min(warm_, total_ - 1);
}

double OneCycleSchedule::at(std::size_t step) const {
  if (total_ <= 1) return peak_;
  const std::size_t s = std::min(step, total_ - 1);
  if (s < warm_) return anneal_cos(initial_, peak_, static_cast<double>(s) / static_cast<double>(warm_));
  if (s == warm_) return peak_;
  const double down = static_cast<double>(std::max<std::size_t>(1, total_ - 1 - warm_));
  return anneal_cos(peak_, final_, static_cast<double>(s - warm_) / down);
}

AdamW::AdamW(const std::vector<Parameter<float>>& params, double weight_decay, double beta1, double beta2, double eps)
    : wd_(weight_decay), b1_(beta1), b2_(beta2), eps_(eps) {
  for (const auto& p : params) {
    m_.emplace_back(p.size(), 0.0f);
    v_.emplace_back(p.size(), 0.0f);
  }
}

void AdamW::step(std::vector<Parameter<float>>& params, const Gradients<float>& grads, double lr) {
  if (params.size() != m_.size() || grads.size() != m_.size()) throw ShapeError("optimizer state mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& w = params[i].value;
    const auto& g = grads[i];
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      double p = w[k];
      p *= 1.0 - lr * wd_;
      const double mk = b1_ * m[k] + (1.0 - b1_) * g[k];
      const double vk = b2_ * v[k] + (1.0 - b2_) * static_cast<double>(g[k]) * g[k];
      m[k] = static_cast<float>(mk);
      v[k] = static_cast<float>(vk);
      p -= lr * (mk / c1) / (std::sqrt(vk / c2) + eps_);
      w[k] = static_cast<float>(p);
    }
  }
}

double evaluate(const TscanModel<float>& model, const Dataset& data) {
  double se = 0.0;
  std::size_t n = 0;
  for (const auto& c : data) {
    const auto pred = model.forward(c.frames);
    for (std::size_t j = 0; j < pred.size(); ++j) {
      const double d = static_cast<double>(pred[j]) - c.labels[j];
      se += d * d;
    }
    n += pred.size();
  }
  return n ? se / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

TrainResult train(TscanModel<float> model, const Dataset& training, const Dataset& validation,
                  const TscanConfig& config) {
  config.validate();
  if (training.empty()) throw LengthError("training dataset is empty");
  const std::size_t depth = model.config().frame_depth;
  for (const auto& c : training) {
    if (c.frames.n != c.labels.size() || c.frames.n % depth != 0) {
      throw ShapeError("chunk frames and labels must match and divide by the frame depth");
    }
  }

  std::mt19937_64 rng(config.seed);
  const std::size_t bs = config.batch_size;
  const std::size_t steps_per_epoch = (training.size() + bs - 1) / bs;
  const OneCycleSchedule schedule(config.learning_rate, std::max<std::size_t>(1, config.epochs * steps_per_epoch));
  AdamW opt(model.parameters(), config.weight_decay);
  std::bernoulli_distribution flip(config.flip_prob);

  TrainResult result{model, {}, 0};
  double best = std::numeric_limits<double>::infinity();
  std::size_t step = 0;
  std::vector<std::size_t> order(training.size());

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_se = 0.0;
    std::size_t epoch_frames = 0;
    double lr = 0.0;

    for (std::size_t b = 0; b < steps_per_epoch; ++b, ++step) {
      const std::size_t first = b * bs;
      const std::size_t last = std::min(order.size(), first + bs);
      std::vector<Task> tasks;
      std::size_t m = 0;
      for (std::size_t k = first; k < last; ++k) {
        const auto& chunk = training[order[k]];
        const bool flipped = flip(rng);
        for (std::size_t g = 0; g < chunk.frames.n / depth; ++g) {
          tasks.push_back({order[k], g, flipped, mix(config.seed ^ mix(step * 1315423911ull + k * 2654435761ull + g))});
        }
        m += chunk.frames.n;
      }
      const float scale = 2.0f / static_cast<float>(m);

      const std::size_t workers = std::min(config.threads, tasks.size());
      std::vector<Gradients<float>> grads(workers, model.zero_gradients());
      std::vector<double> se(workers, 0.0);
      std::vector<std::exception_ptr> errors(workers);
      auto work = [&](std::size_t w, std::size_t lo, std::size_t hi) {
        try {
          for (std::size_t t = lo; t < hi; ++t) {
            const Task& task = tasks[t];
            const auto& chunk = training[task.item];
            Tensor4<float> group = slice_samples(chunk.frames, task.group * depth, depth);
            if (task.flip) group = horizontal_flip(group);
            const std::span<const float> target(chunk.labels.data() + task.group * depth, depth);
            std::mt19937_64 drop(task.seed);
            double local = 0.0;
            model.forward_backward(
                group,
                [&](std::span<const float> pred) {
                  std::vector<float> d(pred.size());
                  for (std::size_t j = 0; j < pred.size(); ++j) {
                    const float diff = pred[j] - target[j];
                    local += static_cast<double>(diff) * diff;
                    d[j] = scale * diff;
                  }
                  return d;
                },
                grads[w], Mode::kTrain, &drop);
            se[w] += local;
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      };
      if (workers <= 1) {
        work(0, 0, tasks.size());
      } else {
        std::vector<std::jthread> pool;
        const std::size_t per = (tasks.size() + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
          pool.emplace_back(work, w, std::min(tasks.size(), w * per), std::min(tasks.size(), (w + 1) * per));
        }
      }
      for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
      }
      for (std::size_t w = 1; w < workers; ++w) {
        for (std::size_t i = 0; i < grads[0].size(); ++i) {
          for (std::size_t k = 0; k < grads[0][i].size(); ++k) grads[0][i][k] += grads[w][i][k];
        }
      }
      for (std::size_t w = 0; w < workers; ++w) epoch_se += se[w];
      epoch_frames += m;

      lr = schedule.at(step);
      opt.step(model.parameters(), grads[0], lr);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_se / static_cast<double>(epoch_frames);
    rec.val_loss = validation.empty() ? std::numeric_limits<double>::quiet_NaN() : evaluate(model, validation);
    rec.last_lr = lr;
    result.history.push_back(rec);
    const double criterion = validation.empty() ? rec.train_loss : rec.val_loss;
    if (criterion < best) {
      best = criterion;
      result.best = model;
      result.best_epoch = epoch;
    }
  }
  if (config.epochs == 0) result.best = model;
  return result;
}

std::vector<double> infer(const TscanModel<float>& model, const Tensor4<float>& frames) {
  const auto pred = model.infer(frames);
  return {pred.begin(), pred.end()};
}

}  // namespace evpulse::tscan
