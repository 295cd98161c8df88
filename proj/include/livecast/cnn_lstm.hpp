#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "livecast/convlstm.hpp"
#include "livecast/lstm.hpp"
#include "livecast/model.hpp"
#include "livecast/rng.hpp"
#include "livecast/tensor.hpp"

namespace livecast::models {

// Frame-in, frame-out hybrid. Each slot's frame passes through a densely
// connected convolutional encoder; the encoder input and every layer output
// are globally average-pooled and concatenated into the feature vector that
// drives a stacked LSTM. A densely connected feed-forward decoder expands the
// recurrent output back to a full frame.
class CnnLstmModel final : public SequenceModel {
 public:
  CnnLstmModel(const ModelSpec& spec, std::uint64_t init_seed);

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

  // Feature width handed to the recurrent stack: channels_in plus one slot
  // per encoder layer output.
  int feature_dim() const;

  std::vector<tensor::Tensor>& encoder_kernels() { return enc_kernels_; }
  std::vector<tensor::Tensor>& encoder_biases() { return enc_biases_; }
  std::vector<LstmCell>& cells() { return cells_; }
  DenseHead& decoder() { return decoder_; }

 private:
  tensor::Tensor encode(const tensor::Tensor& frame);

  ModelSpec spec_;
  std::vector<tensor::Tensor> enc_kernels_;  // [c_l, c_in + sum(earlier), k, k]
  std::vector<tensor::Tensor> enc_biases_;
  std::vector<LstmCell> cells_;
  DenseHead decoder_;
  std::vector<tensor::Tensor> h_, c_;
  bool training_ = false;
  Rng dropout_rng_{0};
};

}  // namespace livecast::models
