#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "evpulse/frame_gen.hpp"
#include "evpulse/label_pipeline.hpp"
#include "evpulse/tscan/model.hpp"

namespace evpulse::tscan {

/// Frames and per-frame targets for one training item.
struct Chunk {
  Tensor4<float> frames;
  std::vector<float> labels;
};

using Dataset = std::vector<Chunk>;

/// Whole-recording z-standardization of quantized frames.
Tensor4<float> standardize_frames(const frames::FrameSet& set);

/// Pairs frame j with the label stamped with frame j (labels produced by
/// diff_normalize start at frame index `first_label_frame`) and cuts the
/// aligned run into consecutive chunks, dropping the remainder.
Dataset make_chunks(const frames::FrameSet& set, const labels::LabelSeries& labels, std::size_t chunk_len,
                    std::size_t first_label_frame = 1);

/// Cosine one-cycle schedule: warm up from peak / div_factor to the peak
/// over the first pct_start of steps, then anneal to
/// peak / (div_factor * final_div_factor).
class OneCycleSchedule {
 public:
  OneCycleSchedule(double peak_lr, std::size_t total_steps, double pct_start = 0.3, double div_factor = 25.0,
                   double final_div_factor = 1e4);
  double at(std::size_t step) const;
  std::size_t total_steps() const noexcept { return total_; }
  std::size_t peak_step() const noexcept { return warm_; }

 private:
  double peak_;
  double initial_;
  double final_;
  std::size_t total_;
  std::size_t warm_;
};

/// Adam with decoupled weight decay.
class AdamW {
 public:
  AdamW(const std::vector<Parameter<float>>& params, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
        double eps = 1e-8);
  void step(std::vector<Parameter<float>>& params, const Gradients<float>& grads, double lr);

 private:
  double wd_, b1_, b2_, eps_;
  std::size_t t_ = 0;
  std::vector<std::vector<float>> m_, v_;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double last_lr = 0.0;
};

struct TrainResult {
  TscanModel<float> best;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
};

/// Eval-mode mean squared error over a dataset.
double evaluate(const TscanModel<float>& model, const Dataset& data);

/// MSE training with AdamW and the one-cycle schedule, batch_size chunks per
/// step, per-chunk horizontal flips. Keeps the parameters with the lowest
/// validation loss (training loss when `validation` is empty).
TrainResult train(TscanModel<float> model, const Dataset& training, const Dataset& validation,
                  const TscanConfig& config);

/// Eval-mode predictions for a whole recording of standardized frames.
std::vector<double> infer(const TscanModel<float>& model, const Tensor4<float>& frames);

}  // namespace evpulse::tscan
