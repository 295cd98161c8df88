#include "livecast/model_io.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "livecast/error.hpp"

namespace livecast::models {

using serial::Entries;
using serial::Entry;
using tensor::Tensor;

namespace {

constexpr double kFormatVersion = 1.0;

void put_scalar(Entries& entries, const std::string& name, double v) {
  entries.push_back({name, Tensor::scalar(v)});
}

double get_scalar(const Entries& entries, const std::string& name) {
  const Tensor& t = serial::find(entries, name);
  if (t.size() != 1) throw Error("container field '" + name + "' is not a scalar");
  return t[0];
}

int get_int(const Entries& entries, const std::string& name) {
  double v = get_scalar(entries, name);
  double r = std::round(v);
  if (std::abs(v - r) > 1e-9) throw Error("container field '" + name + "' is not an integer");
  return static_cast<int>(r);
}

// Lists are stored length-prefixed so an empty list still has a payload.
void put_int_list(Entries& entries, const std::string& name, const std::vector<int>& v) {
  std::vector<double> payload;
  payload.reserve(v.size() + 1);
  payload.push_back(static_cast<double>(v.size()));
  for (int x : v) payload.push_back(static_cast<double>(x));
  entries.push_back({name, Tensor::from_values({static_cast<int>(payload.size())}, payload)});
}

std::vector<int> get_int_list(const Entries& entries, const std::string& name) {
  const Tensor& t = serial::find(entries, name);
  if (t.shape().size() != 1 || t.size() < 1)
    throw Error("container field '" + name + "' is not a length-prefixed list");
  int n = static_cast<int>(std::round(t[0]));
  if (n < 0 || n + 1 != t.size()) throw Error("container field '" + name + "' has a bad length prefix");
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(static_cast<int>(std::round(t[i + 1])));
  return out;
}

}  // namespace

Entries to_entries(SequenceModel& model) {
  const ModelSpec& spec = model.spec();
  Entries entries;
  put_scalar(entries, "meta/format_version", kFormatVersion);
  put_scalar(entries, "meta/arch", static_cast<double>(static_cast<int>(spec.arch)));
  put_scalar(entries, "meta/input_dim", spec.input_dim);
  put_scalar(entries, "meta/channels_in", spec.channels_in);
  put_scalar(entries, "meta/grid_h", spec.grid_h);
  put_scalar(entries, "meta/grid_w", spec.grid_w);
  put_scalar(entries, "meta/hidden", spec.hidden);
  put_scalar(entries, "meta/lstm_layers", spec.lstm_layers);
  put_scalar(entries, "meta/dense_layers", spec.dense_layers);
  put_scalar(entries, "meta/dense_width", spec.dense_width);
  put_scalar(entries, "meta/kernel", spec.kernel);
  put_scalar(entries, "meta/dropout", spec.dropout);
  put_int_list(entries, "meta/conv_channels", spec.conv_channels);
  put_int_list(entries, "meta/convlstm_channels", spec.convlstm_channels);
  put_int_list(entries, "meta/head_channels", spec.head_channels);

  for (auto& [name, p] : model.named_parameters())
    entries.push_back({"param/" + name, p->detached()});

  NeuralState st = model.state();
  put_scalar(entries, "meta/state_slots", static_cast<double>(st.slots.size()));
  for (std::size_t i = 0; i < st.slots.size(); ++i)
    entries.push_back({"state/" + std::to_string(i), st.slots[i]});
  return entries;
}

std::unique_ptr<SequenceModel> from_entries(const Entries& entries) {
  if (get_int(entries, "meta/format_version") != 1)
    throw Error("unsupported model container version");

  ModelSpec spec;
  int arch_id = get_int(entries, "meta/arch");
  if (arch_id < 0 || arch_id > 2) throw Error("bad architecture id in container");
  spec.arch = static_cast<Arch>(arch_id);
  spec.input_dim = get_int(entries, "meta/input_dim");
  spec.channels_in = get_int(entries, "meta/channels_in");
  spec.grid_h = get_int(entries, "meta/grid_h");
  spec.grid_w = get_int(entries, "meta/grid_w");
  spec.hidden = get_int(entries, "meta/hidden");
  spec.lstm_layers = get_int(entries, "meta/lstm_layers");
  spec.dense_layers = get_int(entries, "meta/dense_layers");
  spec.dense_width = get_int(entries, "meta/dense_width");
  spec.kernel = get_int(entries, "meta/kernel");
  spec.dropout = get_scalar(entries, "meta/dropout");
  spec.conv_channels = get_int_list(entries, "meta/conv_channels");
  spec.convlstm_channels = get_int_list(entries, "meta/convlstm_channels");
  spec.head_channels = get_int_list(entries, "meta/head_channels");

  auto model = build_model(spec, 0);
  for (auto& [name, p] : model->named_parameters()) {
    const Tensor& stored = serial::find(entries, "param/" + name);
    if (stored.shape() != p->shape())
      throw DimensionError("container parameter '" + name + "' has shape " +
                           tensor::shape_str(stored.shape()) + ", expected " +
                           tensor::shape_str(p->shape()));
    *p = stored;
  }

  int slots = get_int(entries, "meta/state_slots");
  NeuralState st;
  st.slots.reserve(static_cast<std::size_t>(slots));
  for (int i = 0; i < slots; ++i) st.slots.push_back(serial::find(entries, "state/" + std::to_string(i)));
  model->set_state(st);
  return model;
}

void save_model(SequenceModel& model, const std::string& path) {
  serial::write_file(path, to_entries(model));
}

std::unique_ptr<SequenceModel> load_model(const std::string& path) {
  return from_entries(serial::read_file(path));
}

}  // namespace livecast::models
