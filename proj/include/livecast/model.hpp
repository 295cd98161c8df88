#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "livecast/tensor.hpp"

namespace livecast::models {

enum class Arch { lstm, cnn_lstm, convlstm };

std::string arch_name(Arch a);
Arch arch_from_name(const std::string& name);

// Static description of a forecasting network. LSTM variants predict a single
// cell (vector in, scalar out); the grid variants consume and emit whole
// [channels_in, grid_h, grid_w] frames.
struct ModelSpec {
  Arch arch = Arch::lstm;

  int input_dim = 1;    // lstm: features per slot
  int channels_in = 3;  // grid models: frame channels
  int grid_h = 8, grid_w = 8;

  int hidden = 64;       // recurrent width n_h
  int lstm_layers = 2;   // stacked recurrent layers
  int dense_layers = 2;  // layers in the densely connected head
  int dense_width = 64;  // hidden width inside the head
  int kernel = 3;

  std::vector<int> conv_channels{4, 4};      // cnn_lstm encoder outputs per layer
  std::vector<int> convlstm_channels{4, 4};  // convlstm stack outputs per layer
  std::vector<int> head_channels{4};         // convlstm head hidden layers (final layer emits channels_in)

  double dropout = 0.0;  // applied between stacked recurrent layers while training

  void validate() const;
};

// Recurrent state snapshot: h/c vectors per LSTM layer or H/C maps per
// ConvLSTM layer, in layer order. Opaque to callers; restore is exact.
struct NeuralState {
  std::vector<tensor::Tensor> slots;
};

// Common surface of the three architectures: advance one slot and return the
// next-slot estimate.
class SequenceModel {
 public:
  virtual ~SequenceModel() = default;

  virtual tensor::Tensor step(const tensor::Tensor& x) = 0;
  virtual void reset_state() = 0;
  virtual NeuralState state() const = 0;
  virtual void set_state(const NeuralState& s) = 0;

  virtual const ModelSpec& spec() const = 0;
  virtual tensor::Shape sample_shape() const = 0;

  virtual std::vector<std::pair<std::string, tensor::Tensor*>> named_parameters() = 0;

  // Enables dropout and seeds its mask stream. Off by default; inference is
  // fully deterministic.
  virtual void set_training(bool on, std::uint64_t dropout_seed) = 0;
};

std::unique_ptr<SequenceModel> build_model(const ModelSpec& spec, std::uint64_t init_seed);

// Feed the model's own outputs back as inputs. The first returned value is
// step(last_input); each subsequent one is step(previous output).
std::vector<tensor::Tensor> recursive_forecast(SequenceModel& model, const tensor::Tensor& last_input,
                                               int steps);

// Number of learnable scalars, computed from the spec without building the
// network.
long long parameter_count(const ModelSpec& spec);

}  // namespace livecast::models
