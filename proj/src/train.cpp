#include "livecast/train.hpp"

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "livecast/error.hpp"

namespace livecast::models {

using tensor::Tape;
using tensor::Tensor;

namespace {

// One gradient-descent update over a window of slots. Returns the summed
// squared error and element count so the caller can aggregate epoch loss.
std::pair<double, long long> run_chunk(SequenceModel& model,
                                       const std::vector<Tensor>& series, std::size_t start,
                                       std::size_t end,
                                       std::vector<std::pair<std::string, Tensor*>>& params,
                                       const TrainOptions& opts) {
  Tape tape;
  std::vector<Tensor> originals;
  originals.reserve(params.size());
  for (auto& [name, p] : params) {
    originals.push_back(*p);
    *p = tape.watch(*p);
  }

  Tensor loss;
  long long count = 0;
  try {
    Tensor loss_acc = Tensor::scalar(0.0);
    for (std::size_t t = start; t < end; ++t) {
      Tensor pred = model.step(series[t]);
      Tensor diff = sub(pred, series[t + 1]);
      loss_acc = add(loss_acc, sum(hadamard(diff, diff)));
      count += pred.size();
    }
    loss = scale(loss_acc, 1.0 / static_cast<double>(count));
    tape.backward(loss);
  } catch (...) {
    // Leave the model usable: untraced parameters, untraced state.
    for (std::size_t idx = 0; idx < params.size(); ++idx) *params[idx].second = originals[idx];
    model.set_state(model.state());
    throw;
  }

  std::vector<std::vector<double>> grads;
  grads.reserve(params.size());
  double sq_norm = 0.0;
  for (auto& [name, p] : params) {
    Tensor g = tape.grad(*p);
    for (double v : g.values()) sq_norm += v * v;
    grads.push_back(g.values());
  }
  double factor = 1.0;
  if (opts.clip_norm > 0.0) {
    double norm = std::sqrt(sq_norm);
    if (norm > opts.clip_norm) factor = opts.clip_norm / norm;
  }

  std::vector<Tensor> next;
  next.reserve(params.size());
  try {
    for (std::size_t idx = 0; idx < params.size(); ++idx) {
      const Tensor& before = originals[idx];
      std::vector<double> updated(before.values());
      const std::vector<double>& g = grads[idx];
      for (std::size_t j = 0; j < updated.size(); ++j) {
        updated[j] -= opts.lr * factor * g[j];
        if (!std::isfinite(updated[j]))
          throw NumericError("parameter '" + params[idx].first + "' became non-finite");
      }
      next.push_back(Tensor::from_values(before.shape(), std::move(updated)));
    }
  } catch (...) {
    for (std::size_t idx = 0; idx < params.size(); ++idx) *params[idx].second = originals[idx];
    model.set_state(model.state());
    throw;
  }
  for (std::size_t idx = 0; idx < params.size(); ++idx) *params[idx].second = next[idx];

  // Drop every tape link before the tape dies: state carries values across
  // the chunk boundary but not gradients.
  model.set_state(model.state());
  return {loss.item() * static_cast<double>(count), count};
}

}  // namespace

TrainReport train(SequenceModel& model, const std::vector<Tensor>& series,
                  const TrainOptions& opts) {
  if (series.size() < 2) throw ConfigError("train: need at least two slots");
  if (opts.epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (opts.window < 1) throw ConfigError("train: window must be >= 1");
  if (!std::isfinite(opts.lr) || opts.lr < 0.0) throw ConfigError("train: bad learning rate");
  const tensor::Shape want = model.sample_shape();
  for (const auto& s : series)
    if (s.shape() != want)
      throw DimensionError("train: series sample shape " + tensor::shape_str(s.shape()) +
                           " does not match model input " + tensor::shape_str(want));

  auto params = model.named_parameters();
  model.set_training(true, opts.dropout_seed);
  TrainReport report;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    model.reset_state();
    double sq_sum = 0.0;
    long long elems = 0;
    try {
      for (std::size_t start = 0; start + 1 < series.size();
           start += static_cast<std::size_t>(opts.window)) {
        std::size_t end = std::min(start + static_cast<std::size_t>(opts.window), series.size() - 1);
        auto [chunk_sq, chunk_elems] = run_chunk(model, series, start, end, params, opts);
        sq_sum += chunk_sq;
        elems += chunk_elems;
      }
    } catch (const NumericError& e) {
      model.set_training(false, 0);
      throw DivergenceError(e.what(), epoch);
    }
    report.epoch_loss.push_back(sq_sum / static_cast<double>(elems));
  }
  model.set_training(false, 0);
  return report;
}

}  // namespace livecast::models
