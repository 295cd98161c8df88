#include "livecast/cnn_lstm.hpp"

#include <string>
#include <utility>
#include <vector>

#include "livecast/error.hpp"
#include "model_init.hpp"

namespace livecast::models {

using tensor::Tensor;

CnnLstmModel::CnnLstmModel(const ModelSpec& spec, std::uint64_t init_seed) : spec_(spec) {
  spec_.arch = Arch::cnn_lstm;
  spec_.validate();
  Rng rng(init_seed);
  int acc = spec_.channels_in;
  for (int c : spec_.conv_channels) {
    enc_kernels_.push_back(init_uniform({c, acc, spec_.kernel, spec_.kernel},
                                        acc * spec_.kernel * spec_.kernel, rng));
    enc_biases_.push_back(Tensor::zeros({c}));
    acc += c;
  }
  for (int l = 0; l < spec_.lstm_layers; ++l)
    cells_.emplace_back(l == 0 ? feature_dim() : spec_.hidden, spec_.hidden, rng);
  int frame = spec_.channels_in * spec_.grid_h * spec_.grid_w;
  decoder_ = DenseHead(spec_.hidden, spec_.dense_width, spec_.dense_layers, frame, rng);
  reset_state();
}

int CnnLstmModel::feature_dim() const {
  int d = spec_.channels_in;
  for (int c : spec_.conv_channels) d += c;
  return d;
}

Tensor CnnLstmModel::encode(const Tensor& frame) {
  std::vector<Tensor> stack{frame};
  auto gathered = [&] { return stack.size() == 1 ? stack[0] : concat(stack); };
  for (std::size_t l = 0; l < enc_kernels_.size(); ++l)
    stack.push_back(relu(conv2d_same(gathered(), enc_kernels_[l], enc_biases_[l])));
  std::vector<Tensor> pooled;
  pooled.reserve(stack.size());
  for (const auto& s : stack) pooled.push_back(global_avg_pool(s));
  return pooled.size() == 1 ? pooled[0] : concat(pooled);
}

Tensor CnnLstmModel::step(const Tensor& x) {
  if (x.shape() != sample_shape())
    throw DimensionError("cnn_lstm step: expected input " + tensor::shape_str(sample_shape()) +
                         ", got " + tensor::shape_str(x.shape()));
  Tensor cur = encode(x);
  for (std::size_t l = 0; l < cells_.size(); ++l) {
    auto r = lstm_cell_step(cells_[l], cur, h_[l], c_[l]);
    h_[l] = r.h;
    c_[l] = r.c;
    cur = r.h;
    if (training_ && spec_.dropout > 0.0 && l + 1 < cells_.size())
      cur = hadamard(cur, dropout_mask(cur.shape(), spec_.dropout, dropout_rng_));
  }
  Tensor flat = decoder_.forward(cur);
  return reshape(flat, sample_shape());
}

void CnnLstmModel::reset_state() {
  h_.assign(cells_.size(), Tensor::zeros({spec_.hidden}));
  c_.assign(cells_.size(), Tensor::zeros({spec_.hidden}));
}

NeuralState CnnLstmModel::state() const {
  NeuralState s;
  for (std::size_t l = 0; l < cells_.size(); ++l) {
    s.slots.push_back(h_[l].detached());
    s.slots.push_back(c_[l].detached());
  }
  return s;
}

void CnnLstmModel::set_state(const NeuralState& s) {
  if (s.slots.size() != 2 * cells_.size())
    throw DimensionError("cnn_lstm state: expected " + std::to_string(2 * cells_.size()) +
                         " slots, got " + std::to_string(s.slots.size()));
  for (std::size_t l = 0; l < cells_.size(); ++l) {
    if (s.slots[2 * l].shape() != h_[l].shape() || s.slots[2 * l + 1].shape() != c_[l].shape())
      throw DimensionError("cnn_lstm state: slot shape mismatch at layer " + std::to_string(l));
    h_[l] = s.slots[2 * l].detached();
    c_[l] = s.slots[2 * l + 1].detached();
  }
}

std::vector<std::pair<std::string, Tensor*>> CnnLstmModel::named_parameters() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (std::size_t l = 0; l < enc_kernels_.size(); ++l) {
    out.emplace_back("enc" + std::to_string(l) + "/k", &enc_kernels_[l]);
    out.emplace_back("enc" + std::to_string(l) + "/b", &enc_biases_[l]);
  }
  for (std::size_t l = 0; l < cells_.size(); ++l) cells_[l].collect("lstm" + std::to_string(l), out);
  decoder_.collect("dec", out);
  return out;
}

void CnnLstmModel::set_training(bool on, std::uint64_t dropout_seed) {
  training_ = on;
  dropout_rng_ = Rng(dropout_seed);
}

}  // namespace livecast::models
