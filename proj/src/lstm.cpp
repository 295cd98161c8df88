#include "livecast/lstm.hpp"

#include <string>
#include <utility>
#include <vector>

#include "livecast/error.hpp"
#include "model_init.hpp"

namespace livecast::models {

using tensor::Tensor;

LstmCell::LstmCell(int in_dim, int hidden, Rng& rng) {
  if (in_dim <= 0 || hidden <= 0) throw ConfigError("LstmCell dims must be positive");
  auto make_gate = [&](Tensor& wx, Tensor& wh, Tensor& b) {
    wx = init_uniform({hidden, in_dim}, in_dim, rng);
    wh = init_uniform({hidden, hidden}, hidden, rng);
    b = Tensor::zeros({hidden});
  };
  make_gate(wxi, whi, bi);
  make_gate(wxf, whf, bf);
  make_gate(wxc, whc, bc);
  make_gate(wxo, who, bo);
}

void LstmCell::collect(const std::string& prefix,
                       std::vector<std::pair<std::string, Tensor*>>& out) {
  out.emplace_back(prefix + "/wxi", &wxi);
  out.emplace_back(prefix + "/whi", &whi);
  out.emplace_back(prefix + "/bi", &bi);
  out.emplace_back(prefix + "/wxf", &wxf);
  out.emplace_back(prefix + "/whf", &whf);
  out.emplace_back(prefix + "/bf", &bf);
  out.emplace_back(prefix + "/wxc", &wxc);
  out.emplace_back(prefix + "/whc", &whc);
  out.emplace_back(prefix + "/bc", &bc);
  out.emplace_back(prefix + "/wxo", &wxo);
  out.emplace_back(prefix + "/who", &who);
  out.emplace_back(prefix + "/bo", &bo);
}

LstmStepResult lstm_cell_step(const LstmCell& cell, const Tensor& x, const Tensor& h,
                              const Tensor& c) {
  auto lin = [&](const Tensor& wx, const Tensor& wh, const Tensor& b) {
    return add(add(matmul(wx, x), matmul(wh, h)), b);
  };
  Tensor i = sigmoid(lin(cell.wxi, cell.whi, cell.bi));
  Tensor f = sigmoid(lin(cell.wxf, cell.whf, cell.bf));
  Tensor g = tanh_act(lin(cell.wxc, cell.whc, cell.bc));
  Tensor c_next = add(hadamard(f, c), hadamard(i, g));
  Tensor o = sigmoid(lin(cell.wxo, cell.who, cell.bo));
  Tensor h_next = hadamard(o, tanh_act(c_next));
  return {h_next, c_next, i, f, o};
}

DenseHead::DenseHead(int in_dim, int width, int depth, int out_dim, Rng& rng) {
  if (in_dim <= 0 || width <= 0 || depth <= 0 || out_dim <= 0)
    throw ConfigError("DenseHead dims must be positive");
  int acc = in_dim;
  for (int l = 0; l < depth - 1; ++l) {
    weights.push_back(init_uniform({width, acc}, acc, rng));
    biases.push_back(Tensor::zeros({width}));
    acc += width;
  }
  weights.push_back(init_uniform({out_dim, acc}, acc, rng));
  biases.push_back(Tensor::zeros({out_dim}));
}

Tensor DenseHead::forward(const Tensor& x) const {
  std::vector<Tensor> stack{x};
  auto gathered = [&] { return stack.size() == 1 ? stack[0] : concat(stack); };
  for (std::size_t l = 0; l + 1 < weights.size(); ++l)
    stack.push_back(relu(add(matmul(weights[l], gathered()), biases[l])));
  return add(matmul(weights.back(), gathered()), biases.back());
}

void DenseHead::collect(const std::string& prefix,
                        std::vector<std::pair<std::string, Tensor*>>& out) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.emplace_back(prefix + "/w" + std::to_string(l), &weights[l]);
    out.emplace_back(prefix + "/b" + std::to_string(l), &biases[l]);
  }
}

Tensor dropout_mask(const tensor::Shape& shape, double rate, Rng& rng) {
  double keep = 1.0 - rate;
  std::vector<double> v(static_cast<std::size_t>(tensor::shape_size(shape)));
  for (auto& e : v) e = rng.uniform() < keep ? 1.0 / keep : 0.0;
  return Tensor::from_values(shape, std::move(v));
}

LstmModel::LstmModel(const ModelSpec& spec, std::uint64_t init_seed) : spec_(spec) {
  spec_.arch = Arch::lstm;
  spec_.validate();
  Rng rng(init_seed);
  for (int l = 0; l < spec_.lstm_layers; ++l)
    cells_.emplace_back(l == 0 ? spec_.input_dim : spec_.hidden, spec_.hidden, rng);
  head_ = DenseHead(spec_.hidden, spec_.dense_width, spec_.dense_layers, 1, rng);
  reset_state();
}

Tensor LstmModel::step(const Tensor& x) {
  if (x.shape() != sample_shape())
    throw DimensionError("lstm step: expected input " + tensor::shape_str(sample_shape()) + ", got " +
                         tensor::shape_str(x.shape()));
  Tensor cur = x;
  for (std::size_t l = 0; l < cells_.size(); ++l) {
    auto r = lstm_cell_step(cells_[l], cur, h_[l], c_[l]);
    h_[l] = r.h;
    c_[l] = r.c;
    cur = r.h;
    if (training_ && spec_.dropout > 0.0 && l + 1 < cells_.size())
      cur = hadamard(cur, dropout_mask(cur.shape(), spec_.dropout, dropout_rng_));
  }
  return head_.forward(cur);
}

void LstmModel::reset_state() {
  h_.assign(cells_.size(), Tensor::zeros({spec_.hidden}));
  c_.assign(cells_.size(), Tensor::zeros({spec_.hidden}));
}

NeuralState LstmModel::state() const {
  NeuralState s;
  for (std::size_t l = 0; l < cells_.size(); ++l) {
    s.slots.push_back(h_[l].detached());
    s.slots.push_back(c_[l].detached());
  }
  return s;
}

void LstmModel::set_state(const NeuralState& s) {
  if (s.slots.size() != 2 * cells_.size())
    throw DimensionError("lstm state: expected " + std::to_string(2 * cells_.size()) + " slots, got " +
                         std::to_string(s.slots.size()));
  for (std::size_t l = 0; l < cells_.size(); ++l) {
    if (s.slots[2 * l].shape() != h_[l].shape() || s.slots[2 * l + 1].shape() != c_[l].shape())
      throw DimensionError("lstm state: slot shape mismatch at layer " + std::to_string(l));
    h_[l] = s.slots[2 * l].detached();
    c_[l] = s.slots[2 * l + 1].detached();
  }
}

std::vector<std::pair<std::string, Tensor*>> LstmModel::named_parameters() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (std::size_t l = 0; l < cells_.size(); ++l) cells_[l].collect("lstm" + std::to_string(l), out);
  head_.collect("head", out);
  return out;
}

void LstmModel::set_training(bool on, std::uint64_t dropout_seed) {
  training_ = on;
  dropout_rng_ = Rng(dropout_seed);
}

}  // namespace livecast::models
