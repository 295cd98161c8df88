#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <doctest.h>

#include "livecast/cnn_lstm.hpp"
#include "livecast/convlstm.hpp"
#include "livecast/error.hpp"
#include "livecast/lstm.hpp"
#include "livecast/model.hpp"
#include "livecast/model_io.hpp"
#include "livecast/rng.hpp"
#include "livecast/serial.hpp"
#include "livecast/tensor.hpp"
#include "livecast/train.hpp"
#include "support/oracles.hpp"

using livecast::Rng;
using livecast::tensor::Tensor;
using namespace livecast::models;

namespace {

using Vec = std::vector<double>;
using ParamMap = std::map<std::string, Vec>;

double sig(double v) { return 1.0 / (1.0 + std::exp(-v)); }

ParamMap param_map(SequenceModel& m) {
  ParamMap out;
  for (auto& [name, p] : m.named_parameters()) out[name] = p->values();
  return out;
}

void randomize_params(SequenceModel& m, Rng& rng, double lo = -0.5, double hi = 0.5) {
  for (auto& [name, p] : m.named_parameters()) {
    Vec v(static_cast<std::size_t>(p->size()));
    for (auto& e : v) e = rng.uniform(lo, hi);
    *p = Tensor::from_values(p->shape(), std::move(v));
  }
}

void zero_params(SequenceModel& m) {
  for (auto& [name, p] : m.named_parameters()) *p = Tensor::zeros(p->shape());
}

Tensor random_tensor(const livecast::tensor::Shape& shape, Rng& rng, double lo = -1.0,
                     double hi = 1.0) {
  Vec v(static_cast<std::size_t>(livecast::tensor::shape_size(shape)));
  for (auto& e : v) e = rng.uniform(lo, hi);
  return Tensor::from_values(shape, std::move(v));
}

double max_abs_diff(const Vec& a, const Vec& b) {
  REQUIRE(a.size() == b.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::fabs(a[i] - b[i]));
  return worst;
}

// --- plain-loop reimplementations of the three forward paths ---------------

struct NaiveState {
  Vec h, c;
};

// Matrix [rows x cols] times vector.
Vec mv(const Vec& w, int rows, int cols, const Vec& x) {
  return oracles::naive_matmul(w, rows, cols, x, 1);
}

NaiveState naive_lstm_cell(const ParamMap& P, const std::string& pre, const Vec& x,
                           const NaiveState& s) {
  const int nh = static_cast<int>(P.at(pre + "/bi").size());
  const int in = static_cast<int>(P.at(pre + "/wxi").size()) / nh;
  auto lin = [&](const char* wx, const char* wh, const char* b) {
    Vec gx = mv(P.at(pre + wx), nh, in, x);
    Vec gh = mv(P.at(pre + wh), nh, nh, s.h);
    const Vec& bb = P.at(pre + b);
    Vec r(static_cast<std::size_t>(nh));
    for (int i = 0; i < nh; ++i) r[static_cast<std::size_t>(i)] = gx[i] + gh[i] + bb[i];
    return r;
  };
  Vec gi = lin("/wxi", "/whi", "/bi");
  Vec gf = lin("/wxf", "/whf", "/bf");
  Vec gg = lin("/wxc", "/whc", "/bc");
  Vec go = lin("/wxo", "/who", "/bo");
  NaiveState out;
  out.h.resize(static_cast<std::size_t>(nh));
  out.c.resize(static_cast<std::size_t>(nh));
  for (int i = 0; i < nh; ++i) {
    const double iv = sig(gi[i]), fv = sig(gf[i]), gv = std::tanh(gg[i]), ov = sig(go[i]);
    out.c[static_cast<std::size_t>(i)] = fv * s.c[static_cast<std::size_t>(i)] + iv * gv;
    out.h[static_cast<std::size_t>(i)] = ov * std::tanh(out.c[static_cast<std::size_t>(i)]);
  }
  return out;
}

// Densely connected head: layer l multiplies the concatenation of the input
// and all earlier outputs.
Vec naive_dense_head(const ParamMap& P, const std::string& pre, const Vec& x, int depth) {
  Vec stack = x;
  for (int l = 0; l < depth; ++l) {
    const Vec& w = P.at(pre + "/w" + std::to_string(l));
    const Vec& b = P.at(pre + "/b" + std::to_string(l));
    const int rows = static_cast<int>(b.size());
    const int cols = static_cast<int>(stack.size());
    Vec y = mv(w, rows, cols, stack);
    for (int i = 0; i < rows; ++i) {
      y[static_cast<std::size_t>(i)] += b[static_cast<std::size_t>(i)];
      if (l + 1 < depth) y[static_cast<std::size_t>(i)] = std::max(0.0, y[static_cast<std::size_t>(i)]);
    }
    if (l + 1 == depth) return y;
    stack.insert(stack.end(), y.begin(), y.end());
  }
  return stack;
}

Vec naive_lstm_model_step(const ParamMap& P, const ModelSpec& spec, const Vec& x,
                          std::vector<NaiveState>& states) {
  Vec cur = x;
  for (int l = 0; l < spec.lstm_layers; ++l) {
    states[static_cast<std::size_t>(l)] =
        naive_lstm_cell(P, "lstm" + std::to_string(l), cur, states[static_cast<std::size_t>(l)]);
    cur = states[static_cast<std::size_t>(l)].h;
  }
  return naive_dense_head(P, "head", cur, spec.dense_layers);
}

struct NaiveConvState {
  Vec h, c;  // [co*H*W]
};

NaiveConvState naive_convlstm_cell(const ParamMap& P, const std::string& pre, const Vec& x, int ci,
                                   int H, int W, const NaiveConvState& s) {
  const int co = static_cast<int>(P.at(pre + "/bi").size());
  const int k2 = static_cast<int>(P.at(pre + "/wxi").size()) / (co * ci);
  const int K = static_cast<int>(std::lround(std::sqrt(static_cast<double>(k2))));
  const Vec zero_bias(static_cast<std::size_t>(co), 0.0);
  auto lin = [&](const char* wx, const char* wh, const char* b) {
    Vec gx = oracles::naive_conv2d(x, ci, H, W, P.at(pre + wx), co, K, P.at(pre + b));
    Vec gh = oracles::naive_conv2d(s.h, co, H, W, P.at(pre + wh), co, K, zero_bias);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gh[i];
    return gx;
  };
  Vec gi = lin("/wxi", "/whi", "/bi");
  Vec gf = lin("/wxf", "/whf", "/bf");
  Vec gg = lin("/wxc", "/whc", "/bc");
  Vec go = lin("/wxo", "/who", "/bo");
  const Vec& wci = P.at(pre + "/wci");
  const Vec& wcf = P.at(pre + "/wcf");
  const Vec& wco = P.at(pre + "/wco");
  NaiveConvState out;
  const std::size_t n = gi.size();
  out.h.resize(n);
  out.c.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double iv = sig(gi[i] + wci[i] * s.c[i]);
    const double fv = sig(gf[i] + wcf[i] * s.c[i]);
    out.c[i] = fv * s.c[i] + iv * std::tanh(gg[i]);
    const double ov = sig(go[i] + wco[i] * out.c[i]);
    out.h[i] = ov * std::tanh(out.c[i]);
  }
  return out;
}

Vec naive_conv_head(const ParamMap& P, const std::string& pre, const Vec& x, int in_channels, int H,
                    int W, int layers) {
  Vec stack = x;
  int channels = in_channels;
  for (int l = 0; l < layers; ++l) {
    const Vec& kern = P.at(pre + "/k" + std::to_string(l));
    const Vec& b = P.at(pre + "/b" + std::to_string(l));
    const int co = static_cast<int>(b.size());
    const int k2 = static_cast<int>(kern.size()) / (co * channels);
    const int K = static_cast<int>(std::lround(std::sqrt(static_cast<double>(k2))));
    Vec y = oracles::naive_conv2d(stack, channels, H, W, kern, co, K, b);
    if (l + 1 == layers) return y;
    for (auto& e : y) e = std::max(0.0, e);
    stack.insert(stack.end(), y.begin(), y.end());
    channels += co;
  }
  return stack;
}

Vec naive_convlstm_model_step(const ParamMap& P, const ModelSpec& spec, const Vec& x,
                              std::vector<NaiveConvState>& states) {
  Vec cur = x;
  int ci = spec.channels_in;
  for (std::size_t l = 0; l < spec.convlstm_channels.size(); ++l) {
    states[l] = naive_convlstm_cell(P, "clstm" + std::to_string(l), cur, ci, spec.grid_h,
                                    spec.grid_w, states[l]);
    cur = states[l].h;
    ci = spec.convlstm_channels[l];
  }
  return naive_conv_head(P, "head", cur, ci, spec.grid_h, spec.grid_w,
                         static_cast<int>(spec.head_channels.size()) + 1);
}

Vec naive_cnn_lstm_model_step(const ParamMap& P, const ModelSpec& spec, const Vec& x,
                              std::vector<NaiveState>& states) {
  const int H = spec.grid_h, W = spec.grid_w;
  Vec stack = x;
  int channels = spec.channels_in;
  std::vector<int> widths{spec.channels_in};
  for (std::size_t l = 0; l < spec.conv_channels.size(); ++l) {
    const Vec& kern = P.at("enc" + std::to_string(l) + "/k");
    const Vec& b = P.at("enc" + std::to_string(l) + "/b");
    const int co = static_cast<int>(b.size());
    const int k2 = static_cast<int>(kern.size()) / (co * channels);
    const int K = static_cast<int>(std::lround(std::sqrt(static_cast<double>(k2))));
    Vec y = oracles::naive_conv2d(stack, channels, H, W, kern, co, K, b);
    for (auto& e : y) e = std::max(0.0, e);
    stack.insert(stack.end(), y.begin(), y.end());
    channels += co;
    widths.push_back(co);
  }
  Vec features;
  std::size_t offset = 0;
  for (int wdt : widths) {
    for (int c = 0; c < wdt; ++c) {
      double s = 0.0;
      for (int i = 0; i < H * W; ++i)
        s += stack[offset + static_cast<std::size_t>(c) * H * W + static_cast<std::size_t>(i)];
      features.push_back(s / (H * W));
    }
    offset += static_cast<std::size_t>(wdt) * H * W;
  }
  Vec cur = features;
  for (int l = 0; l < spec.lstm_layers; ++l) {
    states[static_cast<std::size_t>(l)] =
        naive_lstm_cell(P, "lstm" + std::to_string(l), cur, states[static_cast<std::size_t>(l)]);
    cur = states[static_cast<std::size_t>(l)].h;
  }
  return naive_dense_head(P, "dec", cur, spec.dense_layers);
}

// --- gradient harness -------------------------------------------------------

std::vector<Tensor*> ordered_params(SequenceModel& m, std::vector<std::string>* names = nullptr) {
  std::vector<Tensor*> out;
  for (auto& [name, p] : m.named_parameters()) {
    out.push_back(p);
    if (names) names->push_back(name);
  }
  return out;
}

Vec flatten_params(SequenceModel& m) {
  Vec flat;
  for (auto* p : ordered_params(m)) flat.insert(flat.end(), p->values().begin(), p->values().end());
  return flat;
}

void load_params(SequenceModel& m, const Vec& flat) {
  std::size_t pos = 0;
  for (auto* p : ordered_params(m)) {
    const std::size_t n = static_cast<std::size_t>(p->size());
    Vec v(flat.begin() + static_cast<long>(pos), flat.begin() + static_cast<long>(pos + n));
    *p = Tensor::from_values(p->shape(), std::move(v));
    pos += n;
  }
  REQUIRE(pos == flat.size());
}

// Scalar objective: sum over steps of <step output, fixed sink weights>.
double model_objective(SequenceModel& m, const std::vector<Tensor>& inputs,
                       const std::vector<Tensor>& sinks) {
  m.reset_state();
  double acc = 0.0;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    Tensor out = m.step(inputs[t]);
    const Vec& ov = out.values();
    const Vec& sv = sinks[t].values();
    for (std::size_t i = 0; i < ov.size(); ++i) acc += ov[i] * sv[i];
  }
  return acc;
}

Vec analytic_param_gradient(SequenceModel& m, const std::vector<Tensor>& inputs,
                            const std::vector<Tensor>& sinks) {
  livecast::tensor::Tape tape;
  auto ps = ordered_params(m);
  std::vector<Tensor> originals, watched;
  for (auto* p : ps) {
    originals.push_back(*p);
    Tensor w = tape.watch(*p);
    watched.push_back(w);
    *p = w;
  }
  m.reset_state();
  Tensor acc = Tensor::scalar(0.0);
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    Tensor out = m.step(inputs[t]);
    acc = add(acc, livecast::tensor::sum(hadamard(out, sinks[t])));
  }
  tape.backward(acc);
  Vec flat;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    Tensor g = tape.grad(watched[i]);
    flat.insert(flat.end(), g.values().begin(), g.values().end());
  }
  for (std::size_t i = 0; i < ps.size(); ++i) *ps[i] = originals[i];
  m.set_state(m.state());
  m.reset_state();
  return flat;
}

void check_full_model_gradient(const ModelSpec& spec, std::uint64_t seed, int steps) {
  auto model = build_model(spec, seed);
  Rng rng(seed * 7919 + 13);
  randomize_params(*model, rng);
  std::vector<Tensor> inputs, sinks;
  for (int t = 0; t < steps; ++t) {
    inputs.push_back(random_tensor(model->sample_shape(), rng));
    sinks.push_back(random_tensor(model->sample_shape(), rng));
  }
  // Sink shape must match the output; for the scalar-out LSTM that is [1].
  if (spec.arch == Arch::lstm)
    for (auto& s : sinks) s = random_tensor({1}, rng);

  Vec analytic = analytic_param_gradient(*model, inputs, sinks);
  Vec theta = flatten_params(*model);
  auto objective = [&](const Vec& v) {
    load_params(*model, v);
    return model_objective(*model, inputs, sinks);
  };
  Vec numeric = oracles::fd_gradient(objective, theta, 1e-5);
  load_params(*model, theta);
  REQUIRE(analytic.size() == numeric.size());
  CHECK(oracles::max_rel_err(analytic, numeric) < 1e-4);
}

// Minimal model used to pin the recursive forecast contract.
class Halver final : public SequenceModel {
 public:
  Halver() { spec_.arch = Arch::lstm; spec_.input_dim = 1; }
  Tensor step(const Tensor& x) override { return scale(x, 0.5); }
  void reset_state() override {}
  NeuralState state() const override { return {}; }
  void set_state(const NeuralState&) override {}
  const ModelSpec& spec() const override { return spec_; }
  livecast::tensor::Shape sample_shape() const override { return {1}; }
  std::vector<std::pair<std::string, Tensor*>> named_parameters() override { return {}; }
  void set_training(bool, std::uint64_t) override {}

 private:
  ModelSpec spec_;
};

ModelSpec small_lstm_spec() {
  ModelSpec spec;
  spec.arch = Arch::lstm;
  spec.input_dim = 2;
  spec.hidden = 4;
  spec.lstm_layers = 2;
  spec.dense_layers = 2;
  spec.dense_width = 3;
  return spec;
}

ModelSpec small_convlstm_spec() {
  ModelSpec spec;
  spec.arch = Arch::convlstm;
  spec.channels_in = 2;
  spec.grid_h = 4;
  spec.grid_w = 3;
  spec.kernel = 3;
  spec.convlstm_channels = {3};
  spec.head_channels = {2};
  return spec;
}

ModelSpec small_cnn_lstm_spec() {
  ModelSpec spec;
  spec.arch = Arch::cnn_lstm;
  spec.channels_in = 2;
  spec.grid_h = 3;
  spec.grid_w = 3;
  spec.kernel = 3;
  spec.conv_channels = {3};
  spec.hidden = 4;
  spec.lstm_layers = 2;
  spec.dense_layers = 2;
  spec.dense_width = 5;
  return spec;
}

}  // namespace

TEST_CASE("architecture names round trip and specs validate") {
  for (Arch a : {Arch::lstm, Arch::cnn_lstm, Arch::convlstm})
    CHECK(arch_from_name(arch_name(a)) == a);
  CHECK_THROWS_AS(arch_from_name("gru"), livecast::ConfigError);

  ModelSpec spec;
  spec.kernel = 4;
  CHECK_THROWS_AS(spec.validate(), livecast::ConfigError);
  spec = ModelSpec{};
  spec.dropout = 1.0;
  CHECK_THROWS_AS(spec.validate(), livecast::ConfigError);
  spec = ModelSpec{};
  spec.arch = Arch::convlstm;
  spec.convlstm_channels.clear();
  CHECK_THROWS_AS(spec.validate(), livecast::ConfigError);
  spec = ModelSpec{};
  spec.arch = Arch::cnn_lstm;
  spec.conv_channels = {0};
  CHECK_THROWS_AS(spec.validate(), livecast::ConfigError);
  spec = ModelSpec{};
  spec.hidden = -1;
  CHECK_THROWS_AS(spec.validate(), livecast::ConfigError);
}

TEST_CASE("lstm cell with zero weights gates at one half and keeps zero state") {
  Rng rng(1);
  LstmCell cell(2, 3, rng);
  std::vector<std::pair<std::string, Tensor*>> ps;
  cell.collect("c", ps);
  for (auto& [n, p] : ps) *p = Tensor::zeros(p->shape());

  Tensor x = Tensor::from_values({2}, {0.8, -0.3});
  auto r = lstm_cell_step(cell, x, Tensor::zeros({3}), Tensor::zeros({3}));
  for (int i = 0; i < 3; ++i) {
    CHECK(r.i[i] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(r.f[i] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(r.o[i] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(r.c[i] == 0.0);
    CHECK(r.h[i] == 0.0);
  }
}

TEST_CASE("saturated input and forget gates freeze the lstm cell state") {
  Rng rng(2);
  LstmCell cell(1, 4, rng);
  std::vector<std::pair<std::string, Tensor*>> ps;
  cell.collect("c", ps);
  for (auto& [n, p] : ps) *p = Tensor::zeros(p->shape());
  cell.bf = Tensor::full({4}, 50.0);
  cell.bi = Tensor::full({4}, -50.0);

  Tensor c0 = Tensor::from_values({4}, {1.0, -0.5, 0.25, 2.0});
  auto r = lstm_cell_step(cell, Tensor::from_values({1}, {0.7}), Tensor::zeros({4}), c0);
  for (int i = 0; i < 4; ++i) CHECK(std::fabs(r.c[i] - c0[i]) < 1e-10);
}

TEST_CASE("convlstm cell with zero weights gates at one half and emits a zero frame") {
  ModelSpec spec = small_convlstm_spec();
  ConvLstmModel model(spec, 3);
  zero_params(model);

  Rng rng(4);
  Tensor x = random_tensor(model.sample_shape(), rng);
  auto r = convlstm_cell_step(model.cells()[0], x, Tensor::zeros({3, 4, 3}), Tensor::zeros({3, 4, 3}));
  for (int i = 0; i < r.i.size(); ++i) {
    CHECK(r.i[i] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(r.f[i] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(r.o[i] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(r.c[i] == 0.0);
    CHECK(r.h[i] == 0.0);
  }
  Tensor out = model.step(x);
  for (int i = 0; i < out.size(); ++i) CHECK(out[i] == 0.0);
}

TEST_CASE("output gate peeps at the updated cell state, not the previous one") {
  // With zero weights except wco, the output gate must see C_t (which is zero
  // here only if the update gates are zeroed too). Drive a nonzero C_t via bc
  // and check H_t = sigmoid(wco . C_t) * tanh(C_t) exactly.
  Rng rng(5);
  ConvLstmCell cell(1, 1, 3, 2, 2, rng);
  std::vector<std::pair<std::string, Tensor*>> ps;
  cell.collect("c", ps);
  for (auto& [n, p] : ps) *p = Tensor::zeros(p->shape());
  cell.bc = Tensor::full({1}, 0.9);
  cell.wco = Tensor::full({1, 2, 2}, 2.0);

  Tensor zero = Tensor::zeros({1, 2, 2});
  auto r = convlstm_cell_step(cell, zero, zero, zero);
  const double c_t = 0.5 * std::tanh(0.9);  // i = 0.5, f.C = 0
  for (int i = 0; i < 4; ++i) {
    CHECK(r.c[i] == doctest::Approx(c_t).epsilon(1e-15));
    CHECK(r.h[i] == doctest::Approx(sig(2.0 * c_t) * std::tanh(c_t)).epsilon(1e-14));
  }
}

TEST_CASE("stacked lstm forward matches a plain loop reimplementation") {
  ModelSpec spec = small_lstm_spec();
  LstmModel model(spec, 11);
  Rng rng(12);
  randomize_params(model, rng, -0.6, 0.6);
  ParamMap P = param_map(model);

  std::vector<NaiveState> states(2, {Vec(4, 0.0), Vec(4, 0.0)});
  model.reset_state();
  for (int t = 0; t < 3; ++t) {
    Tensor x = random_tensor({2}, rng);
    Tensor out = model.step(x);
    Vec expect = naive_lstm_model_step(P, spec, x.values(), states);
    CHECK(max_abs_diff(out.values(), expect) < 1e-12);
  }
}

TEST_CASE("convlstm forward matches a plain loop reimplementation") {
  ModelSpec spec = small_convlstm_spec();
  ConvLstmModel model(spec, 21);
  Rng rng(22);
  randomize_params(model, rng, -0.6, 0.6);
  ParamMap P = param_map(model);

  std::vector<NaiveConvState> states(1);
  states[0].h.assign(3 * 4 * 3, 0.0);
  states[0].c.assign(3 * 4 * 3, 0.0);
  model.reset_state();
  for (int t = 0; t < 3; ++t) {
    Tensor x = random_tensor(model.sample_shape(), rng);
    Tensor out = model.step(x);
    Vec expect = naive_convlstm_model_step(P, spec, x.values(), states);
    CHECK(max_abs_diff(out.values(), expect) < 1e-12);
  }
}

TEST_CASE("cnn_lstm forward matches a plain loop reimplementation") {
  ModelSpec spec = small_cnn_lstm_spec();
  CnnLstmModel model(spec, 31);
  Rng rng(32);
  randomize_params(model, rng, -0.6, 0.6);
  ParamMap P = param_map(model);

  std::vector<NaiveState> states(2, {Vec(4, 0.0), Vec(4, 0.0)});
  model.reset_state();
  for (int t = 0; t < 3; ++t) {
    Tensor x = random_tensor(model.sample_shape(), rng);
    Tensor out = model.step(x);
    Vec expect = naive_cnn_lstm_model_step(P, spec, x.values(), states);
    CHECK(out.shape() == model.sample_shape());
    CHECK(max_abs_diff(out.values(), expect) < 1e-12);
  }
}

TEST_CASE("recursive forecast feeds each output back as the next input") {
  Halver halver;
  auto out = recursive_forecast(halver, Tensor::from_values({1}, {1.0}), 3);
  REQUIRE(out.size() == 3);
  CHECK(out[0].item() == doctest::Approx(0.5));
  CHECK(out[1].item() == doctest::Approx(0.25));
  CHECK(out[2].item() == doctest::Approx(0.125));
  CHECK_THROWS_AS(recursive_forecast(halver, Tensor::from_values({1}, {1.0}), -1),
                  livecast::ConfigError);
}

TEST_CASE("recursive forecast chains full frames through the grid models") {
  for (auto spec : {small_convlstm_spec(), small_cnn_lstm_spec()}) {
    auto model = build_model(spec, 41);
    Rng rng(42);
    auto out = recursive_forecast(*model, random_tensor(model->sample_shape(), rng), 4);
    REQUIRE(out.size() == 4);
    for (const auto& t : out) CHECK(t.shape() == model->sample_shape());
  }
}

TEST_CASE("state snapshot and restore reproduce the continuation bitwise") {
  std::vector<ModelSpec> specs{small_lstm_spec(), small_convlstm_spec(), small_cnn_lstm_spec()};
  for (const auto& spec : specs) {
    auto model = build_model(spec, 51);
    Rng rng(52);
    randomize_params(*model, rng, -0.4, 0.4);
    std::vector<Tensor> warm, cont;
    for (int t = 0; t < 5; ++t) warm.push_back(random_tensor(model->sample_shape(), rng));
    for (int t = 0; t < 4; ++t) cont.push_back(random_tensor(model->sample_shape(), rng));

    model->reset_state();
    for (const auto& x : warm) model->step(x);
    NeuralState snap = model->state();

    std::vector<Vec> first;
    for (const auto& x : cont) first.push_back(model->step(x).values());

    model->set_state(snap);
    for (std::size_t t = 0; t < cont.size(); ++t) {
      Vec again = model->step(cont[t]).values();
      CHECK(again == first[t]);
    }

    NeuralState bad = snap;
    bad.slots.pop_back();
    CHECK_THROWS_AS(model->set_state(bad), livecast::DimensionError);
  }
}

TEST_CASE("full model gradients match central finite differences") {
  SUBCASE("lstm") {
    ModelSpec spec = small_lstm_spec();
    spec.hidden = 3;
    check_full_model_gradient(spec, 61, 2);
    check_full_model_gradient(spec, 62, 2);
  }
  SUBCASE("convlstm") {
    ModelSpec spec = small_convlstm_spec();
    spec.grid_h = 3;
    spec.grid_w = 3;
    spec.convlstm_channels = {2};
    spec.head_channels = {};
    check_full_model_gradient(spec, 63, 2);
    check_full_model_gradient(spec, 64, 2);
  }
  SUBCASE("cnn_lstm") {
    ModelSpec spec = small_cnn_lstm_spec();
    spec.conv_channels = {2};
    spec.hidden = 3;
    spec.lstm_layers = 1;
    spec.dense_width = 3;
    check_full_model_gradient(spec, 65, 2);
    check_full_model_gradient(spec, 66, 2);
  }
}

TEST_CASE("two layer convlstm step gradients cover input, state and parameters") {
  const int C = 2, H = 3, W = 3, K = 3;
  Rng rng(71);
  ConvLstmCell cell0(C, C, K, H, W, rng);
  ConvLstmCell cell1(C, C, K, H, W, rng);
  std::vector<std::pair<std::string, Tensor*>> slots;
  // Inputs and initial states participate exactly like parameters here.
  Tensor x = random_tensor({C, H, W}, rng), h0 = random_tensor({C, H, W}, rng),
         c0 = random_tensor({C, H, W}, rng), h1 = random_tensor({C, H, W}, rng),
         c1 = random_tensor({C, H, W}, rng);
  slots.emplace_back("x", &x);
  slots.emplace_back("h0", &h0);
  slots.emplace_back("c0", &c0);
  slots.emplace_back("h1", &h1);
  slots.emplace_back("c1", &c1);
  cell0.collect("l0", slots);
  cell1.collect("l1", slots);
  for (auto& [n, p] : slots) {
    Vec v(static_cast<std::size_t>(p->size()));
    for (auto& e : v) e = rng.uniform(-0.5, 0.5);
    *p = Tensor::from_values(p->shape(), std::move(v));
  }
  Tensor sink_h = random_tensor({C, H, W}, rng), sink_c = random_tensor({C, H, W}, rng);

  auto objective_terms = [&]() {
    auto r0 = convlstm_cell_step(cell0, x, h0, c0);
    auto r1 = convlstm_cell_step(cell1, r0.h, h1, c1);
    return add(livecast::tensor::sum(hadamard(r1.h, sink_h)),
               livecast::tensor::sum(hadamard(r1.c, sink_c)));
  };

  Vec theta;
  for (auto& [n, p] : slots) theta.insert(theta.end(), p->values().begin(), p->values().end());
  auto load = [&](const Vec& flat) {
    std::size_t pos = 0;
    for (auto& [n, p] : slots) {
      const std::size_t sz = static_cast<std::size_t>(p->size());
      Vec v(flat.begin() + static_cast<long>(pos), flat.begin() + static_cast<long>(pos + sz));
      *p = Tensor::from_values(p->shape(), std::move(v));
      pos += sz;
    }
  };

  livecast::tensor::Tape tape;
  std::vector<Tensor> watched;
  for (auto& [n, p] : slots) {
    Tensor w = tape.watch(*p);
    watched.push_back(w);
    *p = w;
  }
  tape.backward(objective_terms());
  Vec analytic;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    Tensor g = tape.grad(watched[i]);
    analytic.insert(analytic.end(), g.values().begin(), g.values().end());
  }
  load(theta);  // back to untraced values

  auto objective = [&](const Vec& flat) {
    load(flat);
    return objective_terms().item();
  };
  Vec numeric = oracles::fd_gradient(objective, theta, 1e-5);
  load(theta);
  REQUIRE(analytic.size() == numeric.size());
  CHECK(oracles::max_rel_err(analytic, numeric) < 1e-4);
}

TEST_CASE("training with zero learning rate leaves parameters untouched") {
  ModelSpec spec = small_lstm_spec();
  spec.input_dim = 1;
  auto model = build_model(spec, 81);
  Rng rng(82);
  std::vector<Tensor> series;
  for (int t = 0; t < 20; ++t) series.push_back(random_tensor({1}, rng));
  Vec before = flatten_params(*model);

  TrainOptions opts;
  opts.epochs = 2;
  opts.lr = 0.0;
  opts.window = 7;
  auto report = train(*model, series, opts);
  CHECK(report.epoch_loss.size() == 2);
  CHECK(flatten_params(*model) == before);
  // Model still steps cleanly after training released its tapes.
  CHECK(std::isfinite(model->step(series[0]).item()));
}

TEST_CASE("training fits a constant series") {
  ModelSpec spec;
  spec.arch = Arch::lstm;
  spec.input_dim = 1;
  spec.hidden = 8;
  spec.lstm_layers = 1;
  spec.dense_layers = 1;
  auto model = build_model(spec, 91);
  std::vector<Tensor> series(30, Tensor::from_values({1}, {0.7}));

  TrainOptions opts;
  opts.epochs = 200;
  opts.lr = 0.1;
  opts.window = 29;
  auto report = train(*model, series, opts);
  CHECK(report.epoch_loss.back() < 1e-3);
}

TEST_CASE("training reduces loss on a noiseless sinusoid") {
  ModelSpec spec;
  spec.arch = Arch::lstm;
  spec.input_dim = 1;
  spec.hidden = 12;
  spec.lstm_layers = 1;
  spec.dense_layers = 2;
  spec.dense_width = 12;
  auto model = build_model(spec, 101);
  std::vector<Tensor> series;
  for (int t = 0; t < 200; ++t)
    series.push_back(Tensor::from_values({1}, {std::sin(2.0 * M_PI * t / 24.0)}));

  TrainOptions opts;
  opts.epochs = 150;
  opts.lr = 0.02;
  opts.window = 40;
  auto report = train(*model, series, opts);
  REQUIRE(report.epoch_loss.size() == 150);
  CHECK(report.epoch_loss.back() < 0.1 * report.epoch_loss.front());
  for (std::size_t e = 0; e + 1 < report.epoch_loss.size(); ++e)
    CHECK(report.epoch_loss[e + 1] <= report.epoch_loss[e] * 1.05 + 1e-12);
}

TEST_CASE("training reports divergence with the failing epoch") {
  ModelSpec spec;
  spec.arch = Arch::lstm;
  spec.input_dim = 1;
  spec.hidden = 6;
  spec.lstm_layers = 1;
  spec.dense_layers = 1;
  auto model = build_model(spec, 111);
  std::vector<Tensor> series;
  for (int t = 0; t < 40; ++t)
    series.push_back(Tensor::from_values({1}, {std::sin(2.0 * M_PI * t / 8.0)}));

  TrainOptions opts;
  opts.epochs = 10;
  opts.lr = 1e8;
  opts.clip_norm = 0.0;
  opts.window = 8;
  try {
    train(*model, series, opts);
    FAIL("expected divergence");
  } catch (const livecast::DivergenceError& e) {
    CHECK(e.epoch >= 0);
    CHECK(e.epoch < 10);
  }
  // The model must remain usable after the failed run.
  model->reset_state();
  CHECK(std::isfinite(model->step(series[0]).item()));
}

TEST_CASE("training rejects bad inputs") {
  ModelSpec spec;
  spec.arch = Arch::lstm;
  spec.input_dim = 1;
  spec.hidden = 4;
  spec.lstm_layers = 1;
  spec.dense_layers = 1;
  auto model = build_model(spec, 121);
  std::vector<Tensor> series(10, Tensor::from_values({1}, {0.5}));

  TrainOptions opts;
  opts.epochs = 0;
  CHECK_THROWS_AS(train(*model, series, opts), livecast::ConfigError);
  opts = TrainOptions{};
  CHECK_THROWS_AS(train(*model, {series[0]}, opts), livecast::ConfigError);
  std::vector<Tensor> wrong(10, Tensor::from_values({2}, {0.5, 0.5}));
  CHECK_THROWS_AS(train(*model, wrong, opts), livecast::DimensionError);
}

TEST_CASE("dropout masks are training-only and seed-deterministic") {
  ModelSpec spec = small_lstm_spec();
  spec.input_dim = 1;
  spec.hidden = 8;
  spec.dropout = 0.5;
  auto model = build_model(spec, 131);
  Rng rng(132);
  Tensor x = random_tensor({1}, rng);

  model->set_training(false, 0);
  model->reset_state();
  Vec off_a = model->step(x).values();
  model->reset_state();
  Vec off_b = model->step(x).values();
  CHECK(off_a == off_b);

  model->set_training(true, 42);
  model->reset_state();
  Vec on_a = model->step(x).values();
  model->set_training(true, 42);
  model->reset_state();
  Vec on_b = model->step(x).values();
  CHECK(on_a == on_b);

  model->set_training(true, 43);
  model->reset_state();
  Vec on_c = model->step(x).values();
  CHECK(on_a != on_c);

  model->set_training(false, 0);
  model->reset_state();
  CHECK(model->step(x).values() == off_a);
}

TEST_CASE("model containers round trip bitwise") {
  std::vector<ModelSpec> specs{small_lstm_spec(), small_convlstm_spec(), small_cnn_lstm_spec()};
  int tag = 0;
  for (const auto& spec : specs) {
    auto model = build_model(spec, 141 + tag);
    Rng rng(142 + tag);
    randomize_params(*model, rng, -0.4, 0.4);
    model->reset_state();
    for (int t = 0; t < 3; ++t) model->step(random_tensor(model->sample_shape(), rng));

    auto entries = to_entries(*model);
    auto clone = from_entries(entries);
    std::vector<Tensor> future;
    for (int t = 0; t < 2; ++t) future.push_back(random_tensor(model->sample_shape(), rng));
    for (const auto& x : future) {
      Vec a = model->step(x).values();
      Vec b = clone->step(x).values();
      CHECK(a == b);
    }

    auto path = std::filesystem::temp_directory_path() /
                ("livecast_model_rt_" + std::to_string(tag) + ".lcst");
    save_model(*model, path.string());
    auto loaded = load_model(path.string());
    Tensor probe = random_tensor(model->sample_shape(), rng);
    CHECK(loaded->step(probe).values() == model->step(probe).values());
    std::filesystem::remove(path);
    ++tag;
  }
}

TEST_CASE("parameter count formula matches the built networks") {
  std::vector<ModelSpec> specs{small_lstm_spec(), small_convlstm_spec(), small_cnn_lstm_spec(),
                               ModelSpec{}};
  ModelSpec deep = small_convlstm_spec();
  deep.convlstm_channels = {2, 3};
  deep.head_channels = {};
  specs.push_back(deep);
  for (const auto& spec : specs) {
    auto model = build_model(spec, 151);
    long long built = 0;
    for (auto& [name, p] : model->named_parameters()) built += p->size();
    CHECK(parameter_count(spec) == built);
  }
}

TEST_CASE("mac meter totals a convlstm step exactly") {
  ModelSpec spec;
  spec.arch = Arch::convlstm;
  spec.channels_in = 2;
  spec.grid_h = 4;
  spec.grid_w = 4;
  spec.kernel = 3;
  spec.convlstm_channels = {2};
  spec.head_channels = {};
  ConvLstmModel model(spec, 161);
  Rng rng(162);
  Tensor x = random_tensor(model.sample_shape(), rng);

  livecast::tensor::MacCounterGuard guard;
  model.step(x);
  // Convolutions: 8 gate convs of 16*9*2*2 plus the head's 16*9*2*2.
  // Hadamards: 3 peepholes + 2 cell-update products + 1 output product, each
  // over 2*16 elements.
  const std::int64_t convs = 8 * (16 * 9 * 2 * 2) + 16 * 9 * 2 * 2;
  const std::int64_t hadamards = 6 * 32;
  CHECK(guard.count() == convs + hadamards);
}
