#include "livecast/model.hpp"

#include <memory>
#include <string>
#include <vector>

#include "livecast/cnn_lstm.hpp"
#include "livecast/convlstm.hpp"
#include "livecast/error.hpp"
#include "livecast/lstm.hpp"

namespace livecast::models {

using tensor::Tensor;

std::string arch_name(Arch a) {
  switch (a) {
    case Arch::lstm:
      return "lstm";
    case Arch::cnn_lstm:
      return "cnn_lstm";
    case Arch::convlstm:
      return "convlstm";
  }
  throw ConfigError("unknown architecture id");
}

Arch arch_from_name(const std::string& name) {
  if (name == "lstm") return Arch::lstm;
  if (name == "cnn_lstm") return Arch::cnn_lstm;
  if (name == "convlstm") return Arch::convlstm;
  throw ConfigError("unknown architecture '" + name + "'");
}

void ModelSpec::validate() const {
  auto positive = [](int v, const char* what) {
    if (v <= 0) throw ConfigError(std::string(what) + " must be positive, got " + std::to_string(v));
  };
  positive(hidden, "hidden");
  positive(dense_layers, "dense_layers");
  positive(dense_width, "dense_width");
  positive(kernel, "kernel");
  if (kernel % 2 == 0) throw ConfigError("kernel must be odd, got " + std::to_string(kernel));
  if (dropout < 0.0 || dropout >= 1.0)
    throw ConfigError("dropout must lie in [0, 1), got " + std::to_string(dropout));

  switch (arch) {
    case Arch::lstm:
      positive(input_dim, "input_dim");
      positive(lstm_layers, "lstm_layers");
      break;
    case Arch::cnn_lstm:
      positive(channels_in, "channels_in");
      positive(grid_h, "grid_h");
      positive(grid_w, "grid_w");
      positive(lstm_layers, "lstm_layers");
      if (conv_channels.empty()) throw ConfigError("cnn_lstm needs at least one encoder layer");
      for (int c : conv_channels) positive(c, "conv_channels entry");
      break;
    case Arch::convlstm:
      positive(channels_in, "channels_in");
      positive(grid_h, "grid_h");
      positive(grid_w, "grid_w");
      if (convlstm_channels.empty()) throw ConfigError("convlstm needs at least one recurrent layer");
      for (int c : convlstm_channels) positive(c, "convlstm_channels entry");
      for (int c : head_channels) positive(c, "head_channels entry");
      break;
  }
}

std::unique_ptr<SequenceModel> build_model(const ModelSpec& spec, std::uint64_t init_seed) {
  spec.validate();
  switch (spec.arch) {
    case Arch::lstm:
      return std::make_unique<LstmModel>(spec, init_seed);
    case Arch::cnn_lstm:
      return std::make_unique<CnnLstmModel>(spec, init_seed);
    case Arch::convlstm:
      return std::make_unique<ConvLstmModel>(spec, init_seed);
  }
  throw ConfigError("unknown architecture id");
}

std::vector<Tensor> recursive_forecast(SequenceModel& model, const Tensor& last_input, int steps) {
  if (steps < 0) throw ConfigError("recursive_forecast: steps must be >= 0");
  std::vector<Tensor> out;
  out.reserve(static_cast<std::size_t>(steps));
  Tensor x = last_input;
  for (int s = 0; s < steps; ++s) {
    x = model.step(x);
    out.push_back(x);
  }
  return out;
}

namespace {

long long dense_head_params(int in_dim, int width, int depth, int out_dim) {
  long long total = 0;
  long long acc = in_dim;
  for (int l = 0; l < depth - 1; ++l) {
    total += static_cast<long long>(width) * acc + width;
    acc += width;
  }
  total += static_cast<long long>(out_dim) * acc + out_dim;
  return total;
}

long long lstm_cell_params(int in_dim, int hidden) {
  return 4LL * hidden * in_dim + 4LL * hidden * hidden + 4LL * hidden;
}

long long conv_layer_params(int ci, int co, int k) { return static_cast<long long>(co) * ci * k * k + co; }

long long convlstm_cell_params(int ci, int co, int k, int grid_h, int grid_w) {
  long long x_convs = 4LL * co * ci * k * k;
  long long h_convs = 4LL * co * co * k * k;
  long long peepholes = 3LL * co * grid_h * grid_w;
  return x_convs + h_convs + peepholes + 4LL * co;
}

long long conv_head_params(int in_channels, const std::vector<int>& hidden_channels, int out_channels,
                           int k) {
  long long total = 0;
  int acc = in_channels;
  for (int hc : hidden_channels) {
    total += conv_layer_params(acc, hc, k);
    acc += hc;
  }
  total += conv_layer_params(acc, out_channels, k);
  return total;
}

}  // namespace

long long parameter_count(const ModelSpec& spec) {
  spec.validate();
  long long total = 0;
  switch (spec.arch) {
    case Arch::lstm: {
      for (int l = 0; l < spec.lstm_layers; ++l)
        total += lstm_cell_params(l == 0 ? spec.input_dim : spec.hidden, spec.hidden);
      total += dense_head_params(spec.hidden, spec.dense_width, spec.dense_layers, 1);
      break;
    }
    case Arch::cnn_lstm: {
      int acc = spec.channels_in;
      int features = spec.channels_in;
      for (int c : spec.conv_channels) {
        total += conv_layer_params(acc, c, spec.kernel);
        acc += c;
        features += c;
      }
      for (int l = 0; l < spec.lstm_layers; ++l)
        total += lstm_cell_params(l == 0 ? features : spec.hidden, spec.hidden);
      int frame = spec.channels_in * spec.grid_h * spec.grid_w;
      total += dense_head_params(spec.hidden, spec.dense_width, spec.dense_layers, frame);
      break;
    }
    case Arch::convlstm: {
      int prev = spec.channels_in;
      for (int c : spec.convlstm_channels) {
        total += convlstm_cell_params(prev, c, spec.kernel, spec.grid_h, spec.grid_w);
        prev = c;
      }
      total += conv_head_params(prev, spec.head_channels, spec.channels_in, spec.kernel);
      break;
    }
  }
  return total;
}

}  // namespace livecast::models
