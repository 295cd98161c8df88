#include "livecast/convlstm.hpp"

#include <string>
#include <utility>
#include <vector>

#include "livecast/error.hpp"
#include "livecast/lstm.hpp"
#include "model_init.hpp"

namespace livecast::models {

using tensor::Tensor;

ConvLstmCell::ConvLstmCell(int in_channels, int out_channels, int kernel, int grid_h, int grid_w,
                           Rng& rng) {
  if (in_channels <= 0 || out_channels <= 0 || grid_h <= 0 || grid_w <= 0)
    throw ConfigError("ConvLstmCell dims must be positive");
  int k = kernel;
  auto x_kernel = [&] { return init_uniform({out_channels, in_channels, k, k}, in_channels * k * k, rng); };
  auto h_kernel = [&] { return init_uniform({out_channels, out_channels, k, k}, out_channels * k * k, rng); };
  auto peephole = [&] { return Tensor::zeros({out_channels, grid_h, grid_w}); };
  auto bias = [&] { return Tensor::zeros({out_channels}); };

  wxi = x_kernel(); whi = h_kernel(); wci = peephole(); bi = bias();
  wxf = x_kernel(); whf = h_kernel(); wcf = peephole(); bf = bias();
  wxc = x_kernel(); whc = h_kernel(); bc = bias();
  wxo = x_kernel(); who = h_kernel(); wco = peephole(); bo = bias();
}

void ConvLstmCell::collect(const std::string& prefix,
                           std::vector<std::pair<std::string, Tensor*>>& out) {
  out.emplace_back(prefix + "/wxi", &wxi);
  out.emplace_back(prefix + "/whi", &whi);
  out.emplace_back(prefix + "/wci", &wci);
  out.emplace_back(prefix + "/bi", &bi);
  out.emplace_back(prefix + "/wxf", &wxf);
  out.emplace_back(prefix + "/whf", &whf);
  out.emplace_back(prefix + "/wcf", &wcf);
  out.emplace_back(prefix + "/bf", &bf);
  out.emplace_back(prefix + "/wxc", &wxc);
  out.emplace_back(prefix + "/whc", &whc);
  out.emplace_back(prefix + "/bc", &bc);
  out.emplace_back(prefix + "/wxo", &wxo);
  out.emplace_back(prefix + "/who", &who);
  out.emplace_back(prefix + "/wco", &wco);
  out.emplace_back(prefix + "/bo", &bo);
}

ConvLstmStepResult convlstm_cell_step(const ConvLstmCell& cell, const Tensor& x, const Tensor& h,
                                      const Tensor& c) {
  Tensor no_bias = Tensor::zeros({cell.out_channels()});
  auto lin = [&](const Tensor& wx, const Tensor& wh, const Tensor& b) {
    return add(conv2d_same(x, wx, b), conv2d_same(h, wh, no_bias));
  };
  Tensor i = sigmoid(add(lin(cell.wxi, cell.whi, cell.bi), hadamard(cell.wci, c)));
  Tensor f = sigmoid(add(lin(cell.wxf, cell.whf, cell.bf), hadamard(cell.wcf, c)));
  Tensor g = tanh_act(lin(cell.wxc, cell.whc, cell.bc));
  Tensor c_next = add(hadamard(f, c), hadamard(i, g));
  Tensor o = sigmoid(add(lin(cell.wxo, cell.who, cell.bo), hadamard(cell.wco, c_next)));
  Tensor h_next = hadamard(o, tanh_act(c_next));
  return {h_next, c_next, i, f, o};
}

ConvHead::ConvHead(int in_channels, const std::vector<int>& hidden_channels, int out_channels,
                   int kernel, Rng& rng) {
  if (in_channels <= 0 || out_channels <= 0) throw ConfigError("ConvHead dims must be positive");
  int acc = in_channels;
  for (int hc : hidden_channels) {
    kernels.push_back(init_uniform({hc, acc, kernel, kernel}, acc * kernel * kernel, rng));
    biases.push_back(Tensor::zeros({hc}));
    acc += hc;
  }
  kernels.push_back(init_uniform({out_channels, acc, kernel, kernel}, acc * kernel * kernel, rng));
  biases.push_back(Tensor::zeros({out_channels}));
}

Tensor ConvHead::forward(const Tensor& x) const {
  std::vector<Tensor> stack{x};
  auto gathered = [&] { return stack.size() == 1 ? stack[0] : concat(stack); };
  for (std::size_t l = 0; l + 1 < kernels.size(); ++l)
    stack.push_back(relu(conv2d_same(gathered(), kernels[l], biases[l])));
  return conv2d_same(gathered(), kernels.back(), biases.back());
}

void ConvHead::collect(const std::string& prefix,
                       std::vector<std::pair<std::string, Tensor*>>& out) {
  for (std::size_t l = 0; l < kernels.size(); ++l) {
    out.emplace_back(prefix + "/k" + std::to_string(l), &kernels[l]);
    out.emplace_back(prefix + "/b" + std::to_string(l), &biases[l]);
  }
}

ConvLstmModel::ConvLstmModel(const ModelSpec& spec, std::uint64_t init_seed) : spec_(spec) {
  spec_.arch = Arch::convlstm;
  spec_.validate();
  Rng rng(init_seed);
  int prev = spec_.channels_in;
  for (int c : spec_.convlstm_channels) {
    cells_.emplace_back(prev, c, spec_.kernel, spec_.grid_h, spec_.grid_w, rng);
    prev = c;
  }
  head_ = ConvHead(prev, spec_.head_channels, spec_.channels_in, spec_.kernel, rng);
  reset_state();
}

Tensor ConvLstmModel::step(const Tensor& x) {
  if (x.shape() != sample_shape())
    throw DimensionError("convlstm step: expected input " + tensor::shape_str(sample_shape()) +
                         ", got " + tensor::shape_str(x.shape()));
  Tensor cur = x;
  for (std::size_t l = 0; l < cells_.size(); ++l) {
    auto r = convlstm_cell_step(cells_[l], cur, h_[l], c_[l]);
    h_[l] = r.h;
    c_[l] = r.c;
    cur = r.h;
    if (training_ && spec_.dropout > 0.0 && l + 1 < cells_.size())
      cur = hadamard(cur, dropout_mask(cur.shape(), spec_.dropout, dropout_rng_));
  }
  return head_.forward(cur);
}

void ConvLstmModel::reset_state() {
  h_.clear();
  c_.clear();
  for (const auto& cell : cells_) {
    tensor::Shape s{cell.out_channels(), spec_.grid_h, spec_.grid_w};
    h_.push_back(Tensor::zeros(s));
    c_.push_back(Tensor::zeros(s));
  }
}

NeuralState ConvLstmModel::state() const {
  NeuralState s;
  for (std::size_t l = 0; l < cells_.size(); ++l) {
    s.slots.push_back(h_[l].detached());
    s.slots.push_back(c_[l].detached());
  }
  return s;
}

void ConvLstmModel::set_state(const NeuralState& s) {
  if (s.slots.size() != 2 * cells_.size())
    throw DimensionError("convlstm state: expected " + std::to_string(2 * cells_.size()) +
                         " slots, got " + std::to_string(s.slots.size()));
  for (std::size_t l = 0; l < cells_.size(); ++l) {
    if (s.slots[2 * l].shape() != h_[l].shape() || s.slots[2 * l + 1].shape() != c_[l].shape())
      throw DimensionError("convlstm state: slot shape mismatch at layer " + std::to_string(l));
    h_[l] = s.slots[2 * l].detached();
    c_[l] = s.slots[2 * l + 1].detached();
  }
}

std::vector<std::pair<std::string, Tensor*>> ConvLstmModel::named_parameters() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (std::size_t l = 0; l < cells_.size(); ++l) cells_[l].collect("clstm" + std::to_string(l), out);
  head_.collect("head", out);
  return out;
}

void ConvLstmModel::set_training(bool on, std::uint64_t dropout_seed) {
  training_ = on;
  dropout_rng_ = Rng(dropout_seed);
}

}  // namespace livecast::models
