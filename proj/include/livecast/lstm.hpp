#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "livecast/model.hpp"
#include "livecast/rng.hpp"
#include "livecast/tensor.hpp"

namespace livecast::models {

// One step of a standard (peephole-free) LSTM cell over vectors.
//
//   i = sigmoid(Wxi x + Whi h + bi)
//   f = sigmoid(Wxf x + Whf h + bf)
//   g = tanh   (Wxc x + Whc h + bc)
//   c' = f.c + i.g
//   o = sigmoid(Wxo x + Who h + bo)
//   h' = o.tanh(c')
struct LstmCell {
  tensor::Tensor wxi, whi, bi;
  tensor::Tensor wxf, whf, bf;
  tensor::Tensor wxc, whc, bc;
  tensor::Tensor wxo, who, bo;

  LstmCell() = default;
  LstmCell(int in_dim, int hidden, Rng& rng);

  int hidden() const { return static_cast<int>(bi.shape()[0]); }
  int in_dim() const { return static_cast<int>(wxi.shape()[1]); }

  void collect(const std::string& prefix, std::vector<std::pair<std::string, tensor::Tensor*>>& out);
};

struct LstmStepResult {
  tensor::Tensor h, c;     // next state
  tensor::Tensor i, f, o;  // gate activations, kept for inspection
};

LstmStepResult lstm_cell_step(const LstmCell& cell, const tensor::Tensor& x, const tensor::Tensor& h,
                              const tensor::Tensor& c);

// Densely connected feed-forward head: layer l sees the concatenation of the
// head input and every earlier layer's output. Hidden layers are relu, the
// final layer is linear.
struct DenseHead {
  std::vector<tensor::Tensor> weights;  // [out, in_l]
  std::vector<tensor::Tensor> biases;   // [out]

  DenseHead() = default;
  DenseHead(int in_dim, int width, int depth, int out_dim, Rng& rng);

  tensor::Tensor forward(const tensor::Tensor& x) const;
  void collect(const std::string& prefix, std::vector<std::pair<std::string, tensor::Tensor*>>& out);
};

// Stacked LSTM for a single cell's load series: input_dim features in, one
// scalar out, so the output can be fed straight back in when forecasting
// recursively (input_dim must be 1 for that use).
class LstmModel final : public SequenceModel {
 public:
  LstmModel(const ModelSpec& spec, std::uint64_t init_seed);

  tensor::Tensor step(const tensor::Tensor& x) override;
  void reset_state() override;
  NeuralState state() const override;
  void set_state(const NeuralState& s) override;

  const ModelSpec& spec() const override { return spec_; }
  tensor::Shape sample_shape() const override { return {spec_.input_dim}; }

  std::vector<std::pair<std::string, tensor::Tensor*>> named_parameters() override;
  void set_training(bool on, std::uint64_t dropout_seed) override;

  std::vector<LstmCell>& cells() { return cells_; }
  DenseHead& head() { return head_; }

 private:
  ModelSpec spec_;
  std::vector<LstmCell> cells_;
  DenseHead head_;
  std::vector<tensor::Tensor> h_, c_;
  bool training_ = false;
  Rng dropout_rng_{0};
};

// Shared by the stacked models: inverted dropout mask over a whole tensor.
tensor::Tensor dropout_mask(const tensor::Shape& shape, double rate, Rng& rng);

}  // namespace livecast::models
