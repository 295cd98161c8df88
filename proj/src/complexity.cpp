#include "livecast/complexity.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>

#include "livecast/error.hpp"

namespace livecast::cost {

using models::Arch;
using models::ModelSpec;
using stats::SarimaOrder;

std::string algorithm_name(Algorithm a) { return a == Algorithm::flsp ? "flsp" : "rolling"; }

namespace {

double lstm_terms(int layers, int hidden, int input_dim, int dense_layers) {
  double h = hidden;
  double n = std::max(hidden, input_dim);
  return layers * h * n + dense_layers * h * h;
}

// Stack channel walk shared by the cnn and convlstm sums; c_0 is the frame
// channel count.
double conv_sum(int k, int c0, const std::vector<int>& channels, int hw, bool gate_constants) {
  double total = 0;
  int prev = c0;
  for (int c : channels) {
    double taps = static_cast<double>(k) * k * prev * c;
    total += gate_constants ? 8.0 * taps + 18.0 * c : taps;
    prev = c;
  }
  return total * hw;
}

std::string with_commas(long long v) {
  std::string digits = std::to_string(v < 0 ? -v : v);
  std::string out;
  int run = 0;
  for (auto it = digits.rbegin(); it != digits.rend(); ++it) {
    if (run && run % 3 == 0) out.push_back(',');
    out.push_back(*it);
    ++run;
  }
  if (v < 0) out.push_back('-');
  std::reverse(out.begin(), out.end());
  return out;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  std::string out = s;
  out.resize(std::max(width, s.size()), ' ');
  return out;
}

std::string rule(const std::vector<std::size_t>& widths) {
  std::string line = "+";
  for (std::size_t w : widths) {
    line.append(w + 2, '-');
    line.push_back('+');
  }
  line.push_back('\n');
  return line;
}

std::string render_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths(rows[0].size(), 0);
  for (const auto& row : rows)
    for (std::size_t i = 0; i < row.size(); ++i) widths[i] = std::max(widths[i], row[i].size());
  std::string out = rule(widths);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out += "|";
    for (std::size_t i = 0; i < widths.size(); ++i) out += " " + pad(rows[r][i], widths[i]) + " |";
    out += "\n";
    if (r == 0) out += rule(widths);
  }
  out += rule(widths);
  return out;
}

nlohmann::json report_json(const CostReport& r) {
  return nlohmann::json{{"model", r.model},
                        {"algorithm", r.algorithm},
                        {"flops", r.flops},
                        {"flops_simplified", r.flops_simplified},
                        {"memory_cells", r.memory_cells},
                        {"parameters", r.parameters},
                        {"overhead", r.overhead},
                        {"flops_formula", r.flops_formula},
                        {"memory_formula", r.memory_formula}};
}

}  // namespace

double flops(const ModelSpec& spec) {
  spec.validate();
  switch (spec.arch) {
    case Arch::lstm:
      return lstm_terms(spec.lstm_layers, spec.hidden, spec.input_dim, spec.dense_layers);
    case Arch::cnn_lstm:
      return conv_sum(spec.kernel, spec.channels_in, spec.conv_channels, spec.grid_h * spec.grid_w, false) +
             lstm_terms(spec.lstm_layers, spec.hidden, spec.conv_channels.back(), spec.dense_layers);
    case Arch::convlstm:
      return conv_sum(spec.kernel, spec.channels_in, spec.convlstm_channels, spec.grid_h * spec.grid_w,
                      true);
  }
  throw ConfigError("unknown architecture");
}

double flops(const SarimaOrder& order) {
  order.validate();
  return order.p + order.q + order.P + order.Q;
}

double flops_simplified(const ModelSpec& spec) {
  spec.validate();
  if (spec.arch != Arch::convlstm) return flops(spec);
  return conv_sum(spec.kernel, spec.channels_in, spec.convlstm_channels, spec.grid_h * spec.grid_w, false);
}

double overhead_ratio(const engine::StreamConfig& cfg) {
  if (cfg.feed_len + cfg.span <= 0) throw ConfigError("overhead ratio needs feed_len + span > 0");
  if (cfg.buffer_len < 0) throw ConfigError("buffer_len must be non-negative");
  return static_cast<double>(cfg.buffer_len + cfg.feed_len + cfg.span) /
         static_cast<double>(cfg.feed_len + cfg.span);
}

long long memory_cells(const ModelSpec& spec, Algorithm algo, const MemoryParams& mem) {
  spec.validate();
  if (mem.batch < 1) throw ConfigError("batch must be at least 1");
  if (mem.buffer_samples < 0) throw ConfigError("buffer_samples must be non-negative");
  if (algo == Algorithm::rolling) {
    long long per_sample = spec.arch == Arch::lstm
                               ? spec.input_dim
                               : static_cast<long long>(spec.channels_in) * spec.grid_h * spec.grid_w;
    return mem.buffer_samples * per_sample;
  }
  if (spec.arch == Arch::convlstm) {
    long long channels = 0;
    for (int c : spec.convlstm_channels) channels += c;
    return 2LL * mem.batch * spec.grid_h * spec.grid_w * channels;
  }
  return 2LL * spec.lstm_layers * spec.hidden * mem.batch;
}

long long memory_cells(const SarimaOrder& order) {
  order.validate();
  return static_cast<long long>(order.P + order.Q) * order.m + (order.p + order.q) + 1;
}

long long parameter_count(const SarimaOrder& order) {
  order.validate();
  return order.p + order.q + order.P + order.Q + 1;  // coefficients plus intercept
}

std::string flops_formula(Arch arch) {
  switch (arch) {
    case Arch::lstm:
      return "O(L_lstm*h*N + L_D*h^2)";
    case Arch::cnn_lstm:
      return "O(sum_l(k_l^2*c_{l-1}*c_l*H*W) + L_lstm*h*N + L_D*h^2)";
    case Arch::convlstm:
      return "O(H*W*sum_l(k_l^2*c_{l-1}*c_l))";
  }
  throw ConfigError("unknown architecture");
}

std::string flops_formula_stat(bool seasonal) { return seasonal ? "O(p+q+P+Q)" : "O(p+q)"; }

std::string memory_formula(Arch arch, Algorithm algo) {
  if (algo == Algorithm::rolling) return arch == Arch::lstm ? "b_f*c_0" : "b_f*c_0*H*W";
  return arch == Arch::convlstm ? "2*n_bs*H*W*sum_l(c_l)" : "2*L_lstm*n_h*n_bs";
}

std::string memory_formula_stat(bool seasonal) { return seasonal ? "(P+Q)*m+(p+q)+1" : "(p+q)+1"; }

CostReport analyze(const ModelSpec& spec, Algorithm algo, const engine::StreamConfig& cfg,
                   const MemoryParams& mem) {
  CostReport r;
  r.model = models::arch_name(spec.arch);
  r.algorithm = algorithm_name(algo);
  r.flops = flops(spec);
  r.flops_simplified = flops_simplified(spec);
  r.memory_cells = memory_cells(spec, algo, mem);
  r.parameters = models::parameter_count(spec);
  r.overhead = algo == Algorithm::rolling ? overhead_ratio(cfg) : 1.0;
  r.flops_formula = flops_formula(spec.arch);
  r.memory_formula = memory_formula(spec.arch, algo);
  return r;
}

CostReport analyze(const SarimaOrder& order, Algorithm algo, const engine::StreamConfig& cfg) {
  CostReport r;
  r.model = order.str();
  r.algorithm = algorithm_name(algo);
  r.flops = flops(order);
  r.flops_simplified = r.flops;
  r.memory_cells = memory_cells(order);
  r.parameters = parameter_count(order);
  r.overhead = algo == Algorithm::rolling ? overhead_ratio(cfg) : 1.0;
  r.flops_formula = flops_formula_stat(order.seasonal());
  r.memory_formula = memory_formula_stat(order.seasonal());
  return r;
}

long long instrumented_count(models::SequenceModel& model, const tensor::Tensor& input) {
  models::NeuralState saved = model.state();
  long long measured = 0;
  {
    tensor::MacCounterGuard guard;
    model.step(input);
    measured = guard.count();
  }
  model.set_state(saved);
  return measured;
}

std::string to_json(const CostReport& report) { return report_json(report).dump(2); }

std::string to_json(const std::vector<CostReport>& reports) {
  nlohmann::json arr = nlohmann::json::array();
  for (const CostReport& r : reports) arr.push_back(report_json(r));
  return arr.dump(2);
}

std::string formula_table() {
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"Model", "Time complexity", "Memory (rolling)", "Memory (snapshot)"});
  rows.push_back({"arima", flops_formula_stat(false), memory_formula_stat(false), "-"});
  rows.push_back({"sarima", flops_formula_stat(true), memory_formula_stat(true), "-"});
  for (Arch arch : {Arch::lstm, Arch::cnn_lstm, Arch::convlstm})
    rows.push_back({models::arch_name(arch), flops_formula(arch),
                    memory_formula(arch, Algorithm::rolling), memory_formula(arch, Algorithm::flsp)});
  return render_table(rows);
}

std::string report_table(const std::vector<CostReport>& reports) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"Model", "Algorithm", "Parameters", "FLOPs/slot", "Memory cells", "Overhead"});
  for (const CostReport& r : reports)
    rows.push_back({r.model, r.algorithm, with_commas(r.parameters), fmt_double(r.flops),
                    with_commas(r.memory_cells), fmt_double(r.overhead)});
  return render_table(rows);
}

}  // namespace livecast::cost
