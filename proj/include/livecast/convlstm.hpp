#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "livecast/model.hpp"
#include "livecast/rng.hpp"
#include "livecast/tensor.hpp"

namespace livecast::models {

// One step of a convolutional LSTM cell. All linear maps are same-padded
// convolutions; the cell-state terms are elementwise (Hadamard) peepholes:
//
//   i = sigmoid(Wxi * X + Whi * H + Wci . C       + bi)
//   f = sigmoid(Wxf * X + Whf * H + Wcf . C       + bf)
//   C' = f.C + i.tanh(Wxc * X + Whc * H + bc)
//   o = sigmoid(Wxo * X + Who * H + Wco . C'      + bo)
//   H' = o.tanh(C')
//
// Note the output gate peeps at the freshly updated cell state.
struct ConvLstmCell {
  tensor::Tensor wxi, whi, wci, bi;
  tensor::Tensor wxf, whf, wcf, bf;
  tensor::Tensor wxc, whc, bc;
  tensor::Tensor wxo, who, wco, bo;

  ConvLstmCell() = default;
  ConvLstmCell(int in_channels, int out_channels, int kernel, int grid_h, int grid_w, Rng& rng);

  int out_channels() const { return static_cast<int>(bi.shape()[0]); }
  int in_channels() const { return static_cast<int>(wxi.shape()[1]); }

  void collect(const std::string& prefix, std::vector<std::pair<std::string, tensor::Tensor*>>& out);
};

struct ConvLstmStepResult {
  tensor::Tensor h, c;
  tensor::Tensor i, f, o;
};

ConvLstmStepResult convlstm_cell_step(const ConvLstmCell& cell, const tensor::Tensor& x,
                                      const tensor::Tensor& h, const tensor::Tensor& c);

// Densely connected convolutional head: layer l convolves the concatenation
// of the head input and every earlier layer's output along the channel axis.
// Hidden layers are relu, the final layer is linear.
struct ConvHead {
  std::vector<tensor::Tensor> kernels;  // [out, in_l, k, k]
  std::vector<tensor::Tensor> biases;   // [out]

  ConvHead() = default;
  ConvHead(int in_channels, const std::vector<int>& hidden_channels, int out_channels, int kernel,
           Rng& rng);

  tensor::Tensor forward(const tensor::Tensor& x) const;
  void collect(const std::string& prefix, std::vector<std::pair<std::string, tensor::Tensor*>>& out);
};

// Stacked ConvLSTM over whole traffic frames, finished by a densely
// connected convolutional head that maps back to the input channel count.
class ConvLstmModel final : public SequenceModel {
 public:
  ConvLstmModel(const ModelSpec& spec, std::uint64_t init_seed);

  tensor::Tensor step(const tensor::Tensor& x) override;
  void reset_state() override;
  NeuralState state() const override;
  void set_state(const NeuralState& s) override;

  const ModelSpec& spec() const override { return spec_; }
  tensor::Shape sample_shape() const override {
    return {spec_.channels_in, spec_.grid_h, spec_.grid_w};
  }

  std::vector<std::pair<std::string, tensor::Tensor*>> named_parameters() override;
  void set_training(bool on, std::uint64_t dropout_seed) override;

  std::vector<ConvLstmCell>& cells() { return cells_; }
  ConvHead& head() { return head_; }

 private:
  ModelSpec spec_;
  std::vector<ConvLstmCell> cells_;
  ConvHead head_;
  std::vector<tensor::Tensor> h_, c_;
  bool training_ = false;
  Rng dropout_rng_{0};
};

}  // namespace livecast::models
