#pragma once

#include <cstdint>
#include <vector>

#include "livecast/model.hpp"
#include "livecast/tensor.hpp"

namespace livecast::models {

struct TrainOptions {
  int epochs = 10;
  double lr = 1e-2;
  double clip_norm = 5.0;  // global gradient norm ceiling; <=0 disables
  int window = 32;         // backprop-through-time chunk length, in slots
  std::uint64_t dropout_seed = 1;
};

struct TrainReport {
  std::vector<double> epoch_loss;  // mean per-element squared error, one entry per epoch
};

// Teacher-forced next-step training with plain gradient descent. The series
// is walked in `window`-slot chunks; state carries across chunk boundaries
// but gradients do not. Non-finite values anywhere in an update raise
// DivergenceError with the failing epoch.
TrainReport train(SequenceModel& model, const std::vector<tensor::Tensor>& series,
                  const TrainOptions& opts);

}  // namespace livecast::models
