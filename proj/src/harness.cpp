#include "livecast/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>
#include <utility>

#include <json.hpp>

#include "livecast/error.hpp"
#include "livecast/ingest.hpp"
#include "livecast/predictors.hpp"
#include "livecast/rng.hpp"

namespace livecast::harness {

using engine::GatherMode;
using engine::GridSpec;
using engine::ReportBatch;
using engine::StreamConfig;
using tensor::Tensor;

namespace {

const char* kCellsHeader =
    "model,algorithm,mode,rep,seed,status,mse,predictor_steps,reported_samples,"
    "max_buffer_frames,train_seconds,stream_seconds,detail";

std::string mode_name(GatherMode m) { return m == GatherMode::sync ? "sync" : "async"; }

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_or_empty(double v) { return std::isnan(v) ? std::string() : fmt(v); }

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string cell_csv_line(const CellResult& c) {
  std::ostringstream line;
  line << c.model << ',' << c.algorithm << ',' << c.mode << ',' << c.rep << ',' << c.seed << ','
       << c.status << ',' << fmt_or_empty(c.mse) << ',' << c.predictor_steps << ','
       << c.reported_samples << ',' << c.max_buffer_frames << ',' << fmt(c.train_seconds) << ','
       << fmt(c.stream_seconds) << ',' << csv_quote(c.detail);
  return line.str();
}

}  // namespace

double mse(const std::vector<double>& predicted, const std::vector<double>& actual) {
  if (predicted.size() != actual.size())
    throw Error("mse needs equal lengths, got " + std::to_string(predicted.size()) + " and " +
                std::to_string(actual.size()));
  if (predicted.empty()) throw Error("mse over an empty series is undefined");
  double s = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted[i] - actual[i];
    s += d * d;
  }
  return s / static_cast<double>(predicted.size());
}

double mse(const std::vector<Tensor>& predicted, const std::vector<Tensor>& actual) {
  if (predicted.size() != actual.size())
    throw Error("mse needs equal frame counts, got " + std::to_string(predicted.size()) + " and " +
                std::to_string(actual.size()));
  if (predicted.empty()) throw Error("mse over an empty series is undefined");
  double s = 0.0;
  long long n = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i].shape() != actual[i].shape())
      throw DimensionError("mse frame " + std::to_string(i) + " shapes differ");
    const std::vector<double>& p = predicted[i].values();
    const std::vector<double>& a = actual[i].values();
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double d = p[k] - a[k];
      s += d * d;
    }
    n += static_cast<long long>(p.size());
  }
  return s / static_cast<double>(n);
}

double monitor_mse(const std::vector<engine::ForecastRecord>& monitor,
                   const std::vector<Tensor>& truth) {
  if (monitor.empty()) throw Error("no monitored forecasts to score");
  double s = 0.0;
  long long n = 0;
  for (const engine::ForecastRecord& rec : monitor) {
    if (rec.slot < 0 || rec.slot >= static_cast<long>(truth.size()))
      throw Error("monitored slot " + std::to_string(rec.slot) + " not covered by truth (" +
                  std::to_string(truth.size()) + " slots)");
    const Tensor& t = truth[static_cast<std::size_t>(rec.slot)];
    if (rec.frame.shape() != t.shape())
      throw DimensionError("monitored frame shape differs from truth at slot " +
                           std::to_string(rec.slot));
    const std::vector<double>& p = rec.frame.values();
    const std::vector<double>& a = t.values();
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double d = p[k] - a[k];
      s += d * d;
    }
    n += static_cast<long long>(p.size());
  }
  return s / static_cast<double>(n);
}

CorrelationMap neighbor_correlation(const GridSpec& grid, const std::vector<Tensor>& frames,
                                    int center_cell, int channel) {
  grid.validate();
  if (center_cell < 0 || center_cell >= grid.cells())
    throw Error("center cell " + std::to_string(center_cell) + " out of range");
  if (channel < 0 || channel >= grid.channels)
    throw Error("channel " + std::to_string(channel) + " out of range");
  if (frames.size() < 3) throw Error("correlation needs at least 3 slots");

  const std::size_t T = frames.size();
  for (const Tensor& f : frames)
    if (f.shape() != grid.frame_shape()) throw DimensionError("frame shape does not match grid");

  auto series = [&](int cell) {
    std::vector<double> v(T);
    const int idx = frame_value_index(grid, channel, cell);
    for (std::size_t t = 0; t < T; ++t) v[t] = frames[t].values()[static_cast<std::size_t>(idx)];
    return v;
  };
  auto mean_of = [&](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };

  CorrelationMap map;
  map.center = center_cell;
  map.values.assign(static_cast<std::size_t>(grid.cells()),
                    std::numeric_limits<double>::quiet_NaN());
  map.defined.assign(static_cast<std::size_t>(grid.cells()), false);

  const std::vector<double> c = series(center_cell);
  const double mc = mean_of(c);
  double dc = 0.0;
  for (double x : c) dc += (x - mc) * (x - mc);
  if (dc == 0.0) return map;  // center never varies: every correlation undefined

  for (int cell = 0; cell < grid.cells(); ++cell) {
    const std::vector<double> v = series(cell);
    const double mv = mean_of(v);
    double num = 0.0, dv = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      num += (v[t] - mv) * (c[t] - mc);
      dv += (v[t] - mv) * (v[t] - mv);
    }
    if (dv == 0.0) continue;
    map.values[static_cast<std::size_t>(cell)] = num / (std::sqrt(dv) * std::sqrt(dc));
    map.defined[static_cast<std::size_t>(cell)] = true;
  }
  return map;
}

std::vector<double> extract_series(const GridSpec& grid, const std::vector<Tensor>& frames,
                                   int cell, int channel) {
  grid.validate();
  if (cell < 0 || cell >= grid.cells()) throw Error("cell " + std::to_string(cell) + " out of range");
  if (channel < 0 || channel >= grid.channels)
    throw Error("channel " + std::to_string(channel) + " out of range");
  const std::size_t idx = static_cast<std::size_t>(frame_value_index(grid, channel, cell));
  std::vector<double> out;
  out.reserve(frames.size());
  for (const Tensor& f : frames) {
    if (f.shape() != grid.frame_shape()) throw DimensionError("frame shape does not match grid");
    out.push_back(f.values()[idx]);
  }
  return out;
}

std::vector<Tensor> series_frames(const std::vector<double>& series) {
  std::vector<Tensor> out;
  out.reserve(series.size());
  for (double v : series) out.push_back(Tensor::from_values({1, 1, 1}, {v}));
  return out;
}

ChannelStats channel_stats(const GridSpec& grid, const std::vector<Tensor>& frames) {
  grid.validate();
  if (frames.empty()) throw Error("standardization needs at least one frame");
  ChannelStats stats;
  stats.mean.assign(static_cast<std::size_t>(grid.channels), 0.0);
  stats.scale.assign(static_cast<std::size_t>(grid.channels), 1.0);
  const long long per_channel = static_cast<long long>(frames.size()) * grid.cells();
  for (int ch = 0; ch < grid.channels; ++ch) {
    double s = 0.0;
    for (const Tensor& f : frames) {
      if (f.shape() != grid.frame_shape()) throw DimensionError("frame shape does not match grid");
      const std::vector<double>& v = f.values();
      for (int cell = 0; cell < grid.cells(); ++cell)
        s += v[static_cast<std::size_t>(frame_value_index(grid, ch, cell))];
    }
    const double mean = s / static_cast<double>(per_channel);
    double sq = 0.0;
    for (const Tensor& f : frames) {
      const std::vector<double>& v = f.values();
      for (int cell = 0; cell < grid.cells(); ++cell) {
        const double d = v[static_cast<std::size_t>(frame_value_index(grid, ch, cell))] - mean;
        sq += d * d;
      }
    }
    const double std = std::sqrt(sq / static_cast<double>(per_channel));
    stats.mean[static_cast<std::size_t>(ch)] = mean;
    stats.scale[static_cast<std::size_t>(ch)] = std > 1e-12 ? std : 1.0;
  }
  return stats;
}

std::vector<Tensor> standardize(const GridSpec& grid, const std::vector<Tensor>& frames,
                                const ChannelStats& stats) {
  if (static_cast<int>(stats.mean.size()) != grid.channels ||
      static_cast<int>(stats.scale.size()) != grid.channels)
    throw DimensionError("standardization needs one mean and scale per channel");
  std::vector<Tensor> out;
  out.reserve(frames.size());
  for (const Tensor& f : frames) {
    if (f.shape() != grid.frame_shape()) throw DimensionError("frame shape does not match grid");
    std::vector<double> v = f.values();
    for (int ch = 0; ch < grid.channels; ++ch)
      for (int cell = 0; cell < grid.cells(); ++cell) {
        std::size_t i = static_cast<std::size_t>(frame_value_index(grid, ch, cell));
        v[i] = (v[i] - stats.mean[static_cast<std::size_t>(ch)]) /
               stats.scale[static_cast<std::size_t>(ch)];
      }
    out.push_back(Tensor::from_values(grid.frame_shape(), std::move(v)));
  }
  return out;
}

StandardizedPredictor::StandardizedPredictor(std::unique_ptr<engine::StreamPredictor> inner,
                                             const GridSpec& grid, ChannelStats stats)
    : inner_(std::move(inner)), grid_(grid), stats_(std::move(stats)) {
  grid_.validate();
  if (!inner_) throw Error("standardized predictor needs an inner predictor");
  if (static_cast<int>(stats_.mean.size()) != grid_.channels ||
      static_cast<int>(stats_.scale.size()) != grid_.channels)
    throw DimensionError("standardization needs one mean and scale per channel");
  if (inner_->frame_shape() != grid_.frame_shape())
    throw DimensionError("inner predictor frame shape does not match grid");
}

Tensor StandardizedPredictor::to_standard(const Tensor& frame) const {
  std::vector<double> v = frame.values();
  for (int ch = 0; ch < grid_.channels; ++ch)
    for (int cell = 0; cell < grid_.cells(); ++cell) {
      std::size_t i = static_cast<std::size_t>(frame_value_index(grid_, ch, cell));
      v[i] = (v[i] - stats_.mean[static_cast<std::size_t>(ch)]) /
             stats_.scale[static_cast<std::size_t>(ch)];
    }
  return Tensor::from_values(grid_.frame_shape(), std::move(v));
}

Tensor StandardizedPredictor::to_raw(const Tensor& frame) const {
  std::vector<double> v = frame.values();
  for (int ch = 0; ch < grid_.channels; ++ch)
    for (int cell = 0; cell < grid_.cells(); ++cell) {
      std::size_t i = static_cast<std::size_t>(frame_value_index(grid_, ch, cell));
      v[i] = v[i] * stats_.scale[static_cast<std::size_t>(ch)] +
             stats_.mean[static_cast<std::size_t>(ch)];
    }
  return Tensor::from_values(grid_.frame_shape(), std::move(v));
}

Tensor StandardizedPredictor::do_absorb(const Tensor& frame) {
  return to_raw(inner_->absorb(to_standard(frame)));
}

Tensor StandardizedPredictor::do_project(const Tensor& prev) {
  return to_raw(inner_->project(to_standard(prev)));
}

void StandardizedPredictor::do_online_update(const std::vector<Tensor>& fresh) {
  std::vector<Tensor> z;
  z.reserve(fresh.size());
  for (const Tensor& f : fresh) z.push_back(to_standard(f));
  inner_->online_update(z);
}

SimFeedSource::SimFeedSource(const GridSpec& grid, const std::vector<Tensor>& truth,
                             const StreamConfig& config, int feeds, sim::Consumer consumer)
    : grid_(grid), truth_(&truth), config_(config), feeds_(feeds), consumer_(consumer) {
  grid_.validate();
  config_.validate(consumer == sim::Consumer::rolling);
  if (feeds < 0) throw ConfigError("feed count cannot be negative");
  const long need = config_.seed_len + static_cast<long>(feeds) * config_.feed_len;
  if (static_cast<long>(truth.size()) < need)
    throw ConfigError("truth holds " + std::to_string(truth.size()) + " slots, the session needs " +
                      std::to_string(need));
  if (config_.mode == GatherMode::async && consumer == sim::Consumer::rolling &&
      config_.seed_len < config_.collect_frame)
    throw ConfigError("retroactive reporting reaches one collection frame into the seed; "
                      "seed_len must be at least collect_frame");
}

std::vector<Tensor> SimFeedSource::seed(int length) {
  if (length < 0 || length > static_cast<int>(truth_->size()))
    throw ConfigError("seed length " + std::to_string(length) + " exceeds the truth window");
  return {truth_->begin(), truth_->begin() + length};
}

bool SimFeedSource::has_feed() { return delivered_ < feeds_; }

std::vector<ReportBatch> SimFeedSource::next_feed() {
  const int round = ++delivered_;
  const long window_first = config_.seed_len + static_cast<long>(round - 1) * config_.feed_len;

  std::vector<int> cells;
  if (config_.mode == GatherMode::sync) {
    cells.resize(static_cast<std::size_t>(grid_.cells()));
    for (int c = 0; c < grid_.cells(); ++c) cells[static_cast<std::size_t>(c)] = c;
  } else {
    const int parity = (round - 1) % 2;
    for (int r = 0; r < grid_.rows; ++r)
      for (int c = 0; c < grid_.cols; ++c)
        if ((r + c) % 2 == parity) cells.push_back(cell_index(grid_, r, c));
  }
  if (cells.empty()) return {};

  long first = window_first;
  int num = config_.feed_len;
  if (config_.mode == GatherMode::async && consumer_ == sim::Consumer::rolling) {
    first = window_first - config_.collect_frame;
    num = 2 * config_.collect_frame;
  }

  ReportBatch b;
  b.first_slot = first;
  b.num_slots = num;
  b.cell_ids = std::move(cells);
  b.values.reserve(static_cast<std::size_t>(num) * b.cell_ids.size() *
                   static_cast<std::size_t>(grid_.channels));
  for (int s = 0; s < num; ++s) {
    const std::vector<double>& fv = (*truth_)[static_cast<std::size_t>(first + s)].values();
    for (int cell : b.cell_ids)
      for (int ch = 0; ch < grid_.channels; ++ch)
        b.values.push_back(fv[static_cast<std::size_t>(frame_value_index(grid_, ch, cell))]);
  }
  return {b};
}

std::string AlgoChoice::label() const {
  return algo == Algo::flsp ? "flsp" : "rolling-" + std::to_string(buffer_batches);
}

PlanModel lstm_row() {
  PlanModel row;
  row.name = "lstm";
  row.single_cell = true;
  row.spec.arch = models::Arch::lstm;
  row.spec.input_dim = 1;
  row.spec.hidden = 32;
  row.spec.lstm_layers = 2;
  row.spec.dense_layers = 2;
  row.spec.dense_width = 32;
  row.train.epochs = 8;
  row.train.lr = 5e-3;
  return row;
}

PlanModel cnn_lstm_row(const GridSpec& grid) {
  PlanModel row;
  row.name = "cnn_lstm";
  row.spec.arch = models::Arch::cnn_lstm;
  row.spec.channels_in = grid.channels;
  row.spec.grid_h = grid.rows;
  row.spec.grid_w = grid.cols;
  row.spec.conv_channels = {4, 4};
  row.spec.hidden = 32;
  row.spec.lstm_layers = 2;
  row.spec.dense_layers = 2;
  row.spec.dense_width = 32;
  row.train.epochs = 6;
  row.train.lr = 5e-3;
  return row;
}

PlanModel convlstm_row(const GridSpec& grid) {
  PlanModel row;
  row.name = "convlstm";
  row.spec.arch = models::Arch::convlstm;
  row.spec.channels_in = grid.channels;
  row.spec.grid_h = grid.rows;
  row.spec.grid_w = grid.cols;
  row.spec.convlstm_channels = {4, 4};
  row.spec.head_channels = {4};
  row.train.epochs = 6;
  row.train.lr = 5e-3;
  return row;
}

PlanModel arima_row() {
  PlanModel row;
  row.name = "arima";
  row.statistical = true;
  row.single_cell = true;
  row.order = {2, 0, 2, 0, 0, 0, 1};
  return row;
}

PlanModel sarima_row(int period) {
  PlanModel row;
  row.name = "sarima";
  row.statistical = true;
  row.single_cell = true;
  row.order = {1, 0, 1, 1, 0, 1, period};
  return row;
}

int ExperimentPlan::reps() const {
  return rep_seeds.empty() ? repetitions : static_cast<int>(rep_seeds.size());
}

std::uint64_t ExperimentPlan::seed_for_rep(int rep) const {
  if (!rep_seeds.empty()) return rep_seeds[static_cast<std::size_t>(rep)];
  return derive_seed(master_seed, static_cast<std::uint64_t>(rep));
}

int ExperimentPlan::focus_cell(const GridSpec& g) const {
  const int row = focus_row < 0 ? g.rows / 2 : focus_row;
  const int col = focus_col < 0 ? g.cols / 2 : focus_col;
  if (row >= g.rows || col >= g.cols)
    throw ConfigError("focus cell (" + std::to_string(row) + ", " + std::to_string(col) +
                      ") outside the grid");
  return cell_index(g, row, col);
}

void ExperimentPlan::validate() const {
  if (models.empty()) throw ConfigError("plan needs at least one model");
  if (algorithms.empty()) throw ConfigError("plan needs at least one algorithm");
  if (modes.empty()) throw ConfigError("plan needs at least one gathering mode");
  if (reps() < 1) throw ConfigError("plan needs at least one repetition");
  if (jobs < 0) throw ConfigError("jobs cannot be negative");
  grid.validate();

  for (std::size_t i = 0; i < models.size(); ++i)
    for (std::size_t j = i + 1; j < models.size(); ++j)
      if (models[i].name == models[j].name)
        throw ConfigError("duplicate model name: " + models[i].name);
  for (std::size_t i = 0; i < algorithms.size(); ++i)
    for (std::size_t j = i + 1; j < algorithms.size(); ++j)
      if (algorithms[i].label() == algorithms[j].label())
        throw ConfigError("duplicate algorithm: " + algorithms[i].label());
  for (std::size_t i = 0; i < modes.size(); ++i)
    for (std::size_t j = i + 1; j < modes.size(); ++j)
      if (modes[i] == modes[j]) throw ConfigError("duplicate gathering mode");

  if (train_len < 2) throw ConfigError("train_len must hold at least two slots");
  if (stream_len < stream.feed_len || stream_len % stream.feed_len != 0)
    throw ConfigError("stream_len must be a positive multiple of feed_len");

  bool any_rolling = false;
  for (const AlgoChoice& a : algorithms) {
    if (a.algo == Algo::rolling) {
      any_rolling = true;
      if (a.buffer_batches < 1) throw ConfigError("rolling buffer must be at least one batch");
    }
    for (GatherMode mode : modes) {
      StreamConfig cfg = stream;
      cfg.mode = mode;
      if (a.algo == Algo::rolling) cfg.buffer_len = a.buffer_batches * cfg.feed_len;
      cfg.validate(a.algo == Algo::rolling);
    }
  }
  const bool any_async =
      std::find(modes.begin(), modes.end(), GatherMode::async) != modes.end();
  if (any_rolling && any_async && stream.seed_len < stream.collect_frame)
    throw ConfigError("asynchronous rolling reports reach one collection frame into the seed; "
                      "seed_len must be at least collect_frame");

  for (const PlanModel& row : models) {
    if (row.name.empty()) throw ConfigError("model rows need names");
    if (row.statistical) {
      if (!row.single_cell)
        throw ConfigError("statistical rows run single-cell; set single_cell on " + row.name);
      row.order.validate();
    } else {
      row.spec.validate();
      if (row.single_cell) {
        if (row.spec.arch == models::Arch::lstm) {
          if (row.spec.input_dim != 1)
            throw ConfigError("single-cell recursion needs input_dim 1 on " + row.name);
        } else if (row.spec.channels_in != 1 || row.spec.grid_h != 1 || row.spec.grid_w != 1) {
          throw ConfigError("single-cell grid model must be 1x1 single-channel on " + row.name);
        }
      } else if (row.spec.arch == models::Arch::lstm) {
        throw ConfigError("whole-grid rows need a frame-in frame-out architecture on " + row.name);
      }
    }
  }

  if (frames_file.empty()) {
    focus_cell(grid);  // throws when out of range
    if (focus_channel < 0 || focus_channel >= grid.channels)
      throw ConfigError("focus channel out of range");
  }
}

namespace {

std::string na_reason(const PlanModel& row, const AlgoChoice& algo, GatherMode mode) {
  if (row.statistical && algo.algo == Algo::flsp)
    return "history predictor keeps no restorable latent state";
  if (row.statistical && mode == GatherMode::async)
    return "history predictor cannot rewrite slots it has already committed";
  if (row.single_cell && mode == GatherMode::async)
    return "single-cell series has no reporting halves to alternate";
  return "";
}

std::vector<Tensor> synthetic_frames(const GridSpec& grid, std::uint64_t rep_seed, int total) {
  const std::uint64_t data_seed = derive_seed(rep_seed, 11);
  const std::vector<sim::CellProfile> profiles = sim::default_profiles(grid, data_seed);
  const std::vector<Tensor> raw = sim::generate(grid, profiles, total, derive_seed(data_seed, 1));
  return sim::spatial_smooth(grid, raw, sim::kSmoothRadius, sim::kSmoothStrength);
}

}  // namespace

ExperimentResult run(const ExperimentPlan& plan) {
  plan.validate();

  GridSpec grid = plan.grid;
  std::vector<Tensor> loaded;
  const bool recorded = !plan.frames_file.empty();
  if (recorded) {
    auto [g, frames] = ingest::load_frames(plan.frames_file);
    grid = g;
    loaded = std::move(frames);
  }

  const int R = plan.reps();
  const int M = static_cast<int>(plan.models.size());
  const int A = static_cast<int>(plan.algorithms.size());
  const int D = static_cast<int>(plan.modes.size());
  const int feeds = plan.stream_len / plan.stream.feed_len;
  const int total = plan.train_len + plan.stream.seed_len + plan.stream_len + plan.stream.span;
  if (recorded && static_cast<int>(loaded.size()) < total)
    throw ConfigError("recorded frames hold " + std::to_string(loaded.size()) +
                      " slots, the plan needs " + std::to_string(total));
  const int focus = plan.focus_cell(grid);
  if (plan.focus_channel < 0 || plan.focus_channel >= grid.channels)
    throw ConfigError("focus channel out of range");

  ExperimentResult out;
  out.cells.resize(static_cast<std::size_t>(M) * A * D * R);
  auto cell_index_of = [&](int m, int a, int d, int r) {
    return ((static_cast<std::size_t>(m) * A + static_cast<std::size_t>(a)) * D +
            static_cast<std::size_t>(d)) *
               R +
           static_cast<std::size_t>(r);
  };
  for (int m = 0; m < M; ++m)
    for (int a = 0; a < A; ++a)
      for (int d = 0; d < D; ++d)
        for (int r = 0; r < R; ++r) {
          CellResult& cell = out.cells[cell_index_of(m, a, d, r)];
          cell.model = plan.models[static_cast<std::size_t>(m)].name;
          cell.algorithm = plan.algorithms[static_cast<std::size_t>(a)].label();
          cell.mode = mode_name(plan.modes[static_cast<std::size_t>(d)]);
          cell.rep = r;
          cell.seed = plan.seed_for_rep(r);
        }

  const long monitor_first = plan.stream.seed_len;
  const long monitor_count = static_cast<long>(plan.stream_len) + plan.stream.span;
  out.plot_slots.reserve(static_cast<std::size_t>(monitor_count));
  for (long s = 0; s < monitor_count; ++s) out.plot_slots.push_back(monitor_first + s);
  {
    std::vector<Tensor> rep0_local;
    if (!recorded) rep0_local = synthetic_frames(grid, plan.seed_for_rep(0), total);
    const std::vector<Tensor>& rep0 = recorded ? loaded : rep0_local;
    const std::size_t fidx = static_cast<std::size_t>(frame_value_index(grid, plan.focus_channel, focus));
    out.focus_truth.reserve(out.plot_slots.size());
    for (long slot : out.plot_slots)
      out.focus_truth.push_back(rep0[static_cast<std::size_t>(plan.train_len + slot)].values()[fidx]);
  }

  std::ofstream incremental;
  std::mutex flush_mutex;
  if (!plan.incremental_path.empty()) {
    incremental.open(plan.incremental_path, std::ios::trunc);
    if (!incremental) throw Error("cannot open " + plan.incremental_path + " for writing");
    incremental << kCellsHeader << '\n' << std::flush;
  }

  const int tasks = M * R;
  std::atomic<int> next_task{0};
  std::vector<std::string> task_failures(static_cast<std::size_t>(tasks));

  auto run_task = [&](int m, int r) {
    const PlanModel& row = plan.models[static_cast<std::size_t>(m)];
    const std::uint64_t rep_seed = plan.seed_for_rep(r);
    const std::uint64_t model_seed = derive_seed(rep_seed, fnv1a(row.name));

    std::vector<std::pair<int, int>> live;
    for (int a = 0; a < A; ++a)
      for (int d = 0; d < D; ++d) {
        CellResult& cell = out.cells[cell_index_of(m, a, d, r)];
        const std::string na = na_reason(row, plan.algorithms[static_cast<std::size_t>(a)],
                                         plan.modes[static_cast<std::size_t>(d)]);
        if (!na.empty()) {
          cell.status = "na";
          cell.detail = na;
        } else {
          live.push_back({a, d});
        }
      }

    if (!live.empty()) {
      std::vector<Tensor> local;
      if (!recorded) local = synthetic_frames(grid, rep_seed, total);
      const std::vector<Tensor>& data = recorded ? loaded : local;

      GridSpec sgrid = grid;
      std::vector<Tensor> session_truth;
      std::vector<double> focus_series;
      if (row.single_cell) {
        sgrid = GridSpec{1, 1, 1, grid.slot_minutes};
        focus_series = extract_series(grid, data, focus, plan.focus_channel);
        session_truth = series_frames(std::vector<double>(
            focus_series.begin() + plan.train_len, focus_series.end()));
      } else {
        session_truth.assign(data.begin() + plan.train_len, data.end());
      }

      std::shared_ptr<models::SequenceModel> net;
      std::vector<stats::ReducedForm> forms;
      ChannelStats zstats;
      std::string train_error;
      double train_seconds = 0.0;

      const auto t0 = std::chrono::steady_clock::now();
      try {
        if (row.statistical) {
          const std::vector<double> train_series(focus_series.begin(),
                                                 focus_series.begin() + plan.train_len);
          forms = {stats::fit(train_series, row.order).rf};
        } else if (row.single_cell) {
          const std::vector<Tensor> train_frames = series_frames(std::vector<double>(
              focus_series.begin(), focus_series.begin() + plan.train_len));
          zstats = channel_stats(sgrid, train_frames);
          std::vector<Tensor> ztrain;
          ztrain.reserve(static_cast<std::size_t>(plan.train_len));
          for (int i = 0; i < plan.train_len; ++i)
            ztrain.push_back(Tensor::from_values(
                {1}, {(focus_series[static_cast<std::size_t>(i)] - zstats.mean[0]) / zstats.scale[0]}));
          net = models::build_model(row.spec, derive_seed(model_seed, 1));
          models::TrainOptions opts = row.train;
          opts.dropout_seed = derive_seed(model_seed, 2);
          models::train(*net, ztrain, opts);
        } else {
          const std::vector<Tensor> train_frames(data.begin(), data.begin() + plan.train_len);
          zstats = channel_stats(grid, train_frames);
          const std::vector<Tensor> ztrain = standardize(grid, train_frames, zstats);
          net = models::build_model(row.spec, derive_seed(model_seed, 1));
          models::TrainOptions opts = row.train;
          opts.dropout_seed = derive_seed(model_seed, 2);
          models::train(*net, ztrain, opts);
        }
      } catch (const std::exception& e) {
        train_error = e.what();
      }
      train_seconds = seconds_since(t0);

      for (auto [a, d] : live) {
        CellResult& cell = out.cells[cell_index_of(m, a, d, r)];
        cell.train_seconds = train_seconds;
        if (!train_error.empty()) {
          cell.status = "error";
          cell.detail = train_error;
          continue;
        }

        const AlgoChoice& algo = plan.algorithms[static_cast<std::size_t>(a)];
        const bool rolling = algo.algo == Algo::rolling;
        StreamConfig cfg = plan.stream;
        cfg.mode = plan.modes[static_cast<std::size_t>(d)];
        if (rolling) cfg.buffer_len = algo.buffer_batches * cfg.feed_len;

        try {
          std::unique_ptr<engine::StreamPredictor> predictor;
          if (row.statistical) {
            predictor = std::make_unique<engine::StatStreamPredictor>(forms, sgrid);
          } else {
            predictor = std::make_unique<StandardizedPredictor>(
                std::make_unique<engine::NeuralStreamPredictor>(net, sgrid), sgrid, zstats);
          }
          SimFeedSource source(sgrid, session_truth, cfg, feeds,
                               rolling ? sim::Consumer::rolling : sim::Consumer::snapshot);

          const auto s0 = std::chrono::steady_clock::now();
          const engine::SessionResult sr = rolling
                                               ? engine::rolling_session(*predictor, cfg, source, sgrid)
                                               : engine::flsp_session(*predictor, cfg, source, sgrid);
          cell.stream_seconds = seconds_since(s0);

          cell.mse = monitor_mse(sr.monitor, session_truth);
          cell.predictor_steps = sr.predictor_steps;
          cell.reported_samples = sr.reported_samples;
          cell.max_buffer_frames = sr.max_buffer_frames;
          cell.status = "ok";
          if (r == 0) {
            const std::size_t fidx =
                row.single_cell
                    ? 0
                    : static_cast<std::size_t>(frame_value_index(grid, plan.focus_channel, focus));
            cell.plot.reserve(sr.monitor.size());
            for (const engine::ForecastRecord& rec : sr.monitor)
              cell.plot.push_back(rec.frame.values()[fidx]);
          }
        } catch (const std::exception& e) {
          cell.status = "error";
          cell.detail = e.what();
        }
      }
    }

    if (incremental.is_open()) {
      std::lock_guard<std::mutex> hold(flush_mutex);
      for (int a = 0; a < A; ++a)
        for (int d = 0; d < D; ++d)
          incremental << cell_csv_line(out.cells[cell_index_of(m, a, d, r)]) << '\n';
      incremental.flush();
    }
  };

  int workers = plan.jobs > 0 ? plan.jobs : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, tasks));
  auto worker_loop = [&]() {
    while (true) {
      const int t = next_task.fetch_add(1);
      if (t >= tasks) return;
      try {
        run_task(t / R, t % R);
      } catch (const std::exception& e) {
        task_failures[static_cast<std::size_t>(t)] = e.what();
      }
    }
  };
  if (workers == 1) {
    worker_loop();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker_loop);
    for (std::thread& th : pool) th.join();
  }
  for (const std::string& failure : task_failures)
    if (!failure.empty()) throw Error("experiment task failed: " + failure);

  out.rows.reserve(static_cast<std::size_t>(M) * A * D);
  for (int m = 0; m < M; ++m)
    for (int a = 0; a < A; ++a)
      for (int d = 0; d < D; ++d) {
        ResultRow row;
        row.model = plan.models[static_cast<std::size_t>(m)].name;
        row.algorithm = plan.algorithms[static_cast<std::size_t>(a)].label();
        row.mode = mode_name(plan.modes[static_cast<std::size_t>(d)]);
        double mse_sum = 0.0, train_sum = 0.0, stream_sum = 0.0;
        for (int r = 0; r < R; ++r) {
          const CellResult& cell = out.cells[cell_index_of(m, a, d, r)];
          if (cell.status == "ok") {
            if (row.ok == 0) {
              row.predictor_steps = cell.predictor_steps;
              row.reported_samples = cell.reported_samples;
              row.max_buffer_frames = cell.max_buffer_frames;
            }
            ++row.ok;
            mse_sum += cell.mse;
            train_sum += cell.train_seconds;
            stream_sum += cell.stream_seconds;
          } else if (cell.status == "na") {
            ++row.na;
          } else {
            ++row.errors;
          }
        }
        if (row.ok > 0) {
          row.mean_mse = mse_sum / row.ok;
          row.mean_train_seconds = train_sum / row.ok;
          row.mean_stream_seconds = stream_sum / row.ok;
        }
        out.rows.push_back(std::move(row));
      }
  return out;
}

std::string cells_csv(const ExperimentResult& result) {
  std::ostringstream out;
  out << kCellsHeader << '\n';
  for (const CellResult& c : result.cells) out << cell_csv_line(c) << '\n';
  return out.str();
}

std::string rows_csv(const ExperimentResult& result) {
  std::ostringstream out;
  out << "model,algorithm,mode,ok,na,errors,mean_mse,predictor_steps,reported_samples,"
         "max_buffer_frames,mean_train_seconds,mean_stream_seconds\n";
  for (const ResultRow& r : result.rows) {
    out << r.model << ',' << r.algorithm << ',' << r.mode << ',' << r.ok << ',' << r.na << ','
        << r.errors << ',' << fmt_or_empty(r.mean_mse) << ',' << r.predictor_steps << ','
        << r.reported_samples << ',' << r.max_buffer_frames << ',' << fmt(r.mean_train_seconds)
        << ',' << fmt(r.mean_stream_seconds) << '\n';
  }
  return out.str();
}

std::string to_json(const ExperimentResult& result) {
  nlohmann::json j;
  j["cells"] = nlohmann::json::array();
  for (const CellResult& c : result.cells) {
    nlohmann::json jc{{"model", c.model},
                      {"algorithm", c.algorithm},
                      {"mode", c.mode},
                      {"rep", c.rep},
                      {"seed", c.seed},
                      {"status", c.status},
                      {"detail", c.detail},
                      {"mse", c.mse},
                      {"predictor_steps", c.predictor_steps},
                      {"reported_samples", c.reported_samples},
                      {"max_buffer_frames", c.max_buffer_frames},
                      {"train_seconds", c.train_seconds},
                      {"stream_seconds", c.stream_seconds}};
    if (!c.plot.empty()) jc["plot"] = c.plot;
    j["cells"].push_back(std::move(jc));
  }
  j["rows"] = nlohmann::json::array();
  for (const ResultRow& r : result.rows)
    j["rows"].push_back({{"model", r.model},
                         {"algorithm", r.algorithm},
                         {"mode", r.mode},
                         {"ok", r.ok},
                         {"na", r.na},
                         {"errors", r.errors},
                         {"mean_mse", r.mean_mse},
                         {"predictor_steps", r.predictor_steps},
                         {"reported_samples", r.reported_samples},
                         {"max_buffer_frames", r.max_buffer_frames},
                         {"mean_train_seconds", r.mean_train_seconds},
                         {"mean_stream_seconds", r.mean_stream_seconds}});
  j["plot_slots"] = result.plot_slots;
  j["focus_truth"] = result.focus_truth;
  return j.dump(2);
}

std::string summary_table(const ExperimentResult& result) {
  // Pivot: one line per (model, algorithm), one mean-MSE column per mode.
  std::vector<std::string> modes;
  for (const ResultRow& r : result.rows)
    if (std::find(modes.begin(), modes.end(), r.mode) == modes.end()) modes.push_back(r.mode);

  std::vector<std::pair<std::string, std::string>> lines;  // (model, algorithm)
  for (const ResultRow& r : result.rows) {
    const std::pair<std::string, std::string> key{r.model, r.algorithm};
    if (std::find(lines.begin(), lines.end(), key) == lines.end()) lines.push_back(key);
  }

  auto cell_text = [&](const std::string& model, const std::string& algorithm,
                       const std::string& mode) -> std::string {
    for (const ResultRow& r : result.rows) {
      if (r.model != model || r.algorithm != algorithm || r.mode != mode) continue;
      if (r.ok > 0) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.4f", r.mean_mse);
        return buf;
      }
      if (r.na > 0 && r.errors == 0) return "NA";
      return "error";
    }
    return "";
  };

  std::vector<std::vector<std::string>> table;
  std::vector<std::string> header{"Model", "Algorithm"};
  for (const std::string& mode : modes) header.push_back("MSE " + mode);
  table.push_back(std::move(header));
  for (const auto& [model, algorithm] : lines) {
    std::vector<std::string> line{model, algorithm};
    for (const std::string& mode : modes) line.push_back(cell_text(model, algorithm, mode));
    table.push_back(std::move(line));
  }

  std::vector<std::size_t> widths(table[0].size(), 0);
  for (const auto& line : table)
    for (std::size_t i = 0; i < line.size(); ++i) widths[i] = std::max(widths[i], line[i].size());

  std::ostringstream out;
  auto rule = [&]() {
    out << '+';
    for (std::size_t w : widths) out << std::string(w + 2, '-') << '+';
    out << '\n';
  };
  rule();
  for (std::size_t li = 0; li < table.size(); ++li) {
    out << '|';
    for (std::size_t i = 0; i < table[li].size(); ++i)
      out << ' ' << table[li][i] << std::string(widths[i] - table[li][i].size() + 1, ' ') << '|';
    out << '\n';
    if (li == 0) rule();
  }
  rule();
  return out.str();
}

void write_plot_data(const std::string& path, const ExperimentResult& result) {
  std::vector<const CellResult*> series;
  for (const CellResult& c : result.cells) {
    if (c.plot.empty()) continue;
    if (c.plot.size() != result.plot_slots.size())
      throw Error("plot series for " + c.model + "/" + c.algorithm + "/" + c.mode +
                  " does not align with the monitored slots");
    series.push_back(&c);
  }
  std::ofstream file(path, std::ios::trunc);
  if (!file) throw Error("cannot open " + path + " for writing");
  file << "slot,actual";
  for (const CellResult* c : series) file << ',' << c->model << '/' << c->algorithm << '/' << c->mode;
  file << '\n';
  for (std::size_t i = 0; i < result.plot_slots.size(); ++i) {
    file << result.plot_slots[i] << ',' << fmt(result.focus_truth[i]);
    for (const CellResult* c : series) file << ',' << fmt(c->plot[i]);
    file << '\n';
  }
  file.close();
  if (!file.good()) throw Error("plot data write failed: " + path);
}

ExperimentPlan plan_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("plan JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("plan JSON must be an object");

  auto as_int = [](const nlohmann::json& v, const std::string& key) {
    if (!v.is_number_integer()) throw ConfigError("plan key " + key + " must be an integer");
    return v.get<int>();
  };
  auto as_u64 = [](const nlohmann::json& v, const std::string& key) {
    if (!v.is_number_integer() && !v.is_number_unsigned())
      throw ConfigError("plan key " + key + " must be an integer");
    return v.get<std::uint64_t>();
  };
  auto as_double = [](const nlohmann::json& v, const std::string& key) {
    if (!v.is_number()) throw ConfigError("plan key " + key + " must be a number");
    return v.get<double>();
  };
  auto as_string = [](const nlohmann::json& v, const std::string& key) {
    if (!v.is_string()) throw ConfigError("plan key " + key + " must be a string");
    return v.get<std::string>();
  };
  auto as_int_list = [&](const nlohmann::json& v, const std::string& key) {
    if (!v.is_array()) throw ConfigError("plan key " + key + " must be an array");
    std::vector<int> out;
    for (const auto& e : v) out.push_back(as_int(e, key));
    return out;
  };

  static const std::vector<std::string> known{
      "models",   "algorithms",        "modes",         "repetitions",   "master_seed",
      "rep_seeds", "seed_len",         "feed_len",      "span",          "collect_frame",
      "grid_rows", "grid_cols",        "channels",      "slot_minutes",  "train_len",
      "stream_len", "focus_row",       "focus_col",     "focus_channel", "frames_file",
      "jobs",     "incremental_path",  "epochs",        "learning_rate", "window",
      "hidden",   "lstm_layers",       "dense_layers",  "dense_width",   "kernel",
      "conv_channels", "convlstm_channels", "head_channels", "arima_order", "sarima_order",
      "sarima_period"};
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError("unknown plan key: " + key);
  }

  ExperimentPlan plan;
  if (j.contains("grid_rows")) plan.grid.rows = as_int(j["grid_rows"], "grid_rows");
  if (j.contains("grid_cols")) plan.grid.cols = as_int(j["grid_cols"], "grid_cols");
  if (j.contains("channels")) plan.grid.channels = as_int(j["channels"], "channels");
  if (j.contains("slot_minutes")) plan.grid.slot_minutes = as_int(j["slot_minutes"], "slot_minutes");
  if (j.contains("seed_len")) plan.stream.seed_len = as_int(j["seed_len"], "seed_len");
  if (j.contains("feed_len")) plan.stream.feed_len = as_int(j["feed_len"], "feed_len");
  if (j.contains("span")) plan.stream.span = as_int(j["span"], "span");
  if (j.contains("collect_frame"))
    plan.stream.collect_frame = as_int(j["collect_frame"], "collect_frame");
  if (j.contains("repetitions")) plan.repetitions = as_int(j["repetitions"], "repetitions");
  if (j.contains("master_seed")) plan.master_seed = as_u64(j["master_seed"], "master_seed");
  if (j.contains("rep_seeds"))
    for (const auto& e : j["rep_seeds"]) plan.rep_seeds.push_back(as_u64(e, "rep_seeds"));
  if (j.contains("train_len")) plan.train_len = as_int(j["train_len"], "train_len");
  if (j.contains("stream_len")) plan.stream_len = as_int(j["stream_len"], "stream_len");
  if (j.contains("focus_row")) plan.focus_row = as_int(j["focus_row"], "focus_row");
  if (j.contains("focus_col")) plan.focus_col = as_int(j["focus_col"], "focus_col");
  if (j.contains("focus_channel")) plan.focus_channel = as_int(j["focus_channel"], "focus_channel");
  if (j.contains("frames_file")) plan.frames_file = as_string(j["frames_file"], "frames_file");
  if (j.contains("jobs")) plan.jobs = as_int(j["jobs"], "jobs");
  if (j.contains("incremental_path"))
    plan.incremental_path = as_string(j["incremental_path"], "incremental_path");

  int sarima_period = plan.grid.slots_per_day();
  if (j.contains("sarima_period")) sarima_period = as_int(j["sarima_period"], "sarima_period");

  std::vector<std::string> model_names{"lstm", "cnn_lstm", "convlstm", "arima", "sarima"};
  if (j.contains("models")) {
    if (!j["models"].is_array()) throw ConfigError("plan key models must be an array");
    model_names.clear();
    for (const auto& e : j["models"]) model_names.push_back(as_string(e, "models"));
  }
  for (const std::string& name : model_names) {
    if (name == "lstm") plan.models.push_back(lstm_row());
    else if (name == "cnn_lstm") plan.models.push_back(cnn_lstm_row(plan.grid));
    else if (name == "convlstm") plan.models.push_back(convlstm_row(plan.grid));
    else if (name == "arima") plan.models.push_back(arima_row());
    else if (name == "sarima") plan.models.push_back(sarima_row(sarima_period));
    else throw ConfigError("unknown model: " + name);
  }

  if (j.contains("arima_order") || j.contains("sarima_order")) {
    for (PlanModel& row : plan.models) {
      if (row.name == "arima" && j.contains("arima_order")) {
        const std::vector<int> o = as_int_list(j["arima_order"], "arima_order");
        if (o.size() != 3) throw ConfigError("arima_order must be [p, d, q]");
        row.order = {o[0], o[1], o[2], 0, 0, 0, 1};
      }
      if (row.name == "sarima" && j.contains("sarima_order")) {
        const std::vector<int> o = as_int_list(j["sarima_order"], "sarima_order");
        if (o.size() != 7) throw ConfigError("sarima_order must be [p, d, q, P, D, Q, m]");
        row.order = {o[0], o[1], o[2], o[3], o[4], o[5], o[6]};
      }
    }
  }
  for (PlanModel& row : plan.models) {
    if (row.statistical) continue;
    if (j.contains("epochs")) row.train.epochs = as_int(j["epochs"], "epochs");
    if (j.contains("learning_rate")) row.train.lr = as_double(j["learning_rate"], "learning_rate");
    if (j.contains("window")) row.train.window = as_int(j["window"], "window");
    if (j.contains("hidden")) row.spec.hidden = as_int(j["hidden"], "hidden");
    if (j.contains("lstm_layers")) row.spec.lstm_layers = as_int(j["lstm_layers"], "lstm_layers");
    if (j.contains("dense_layers")) row.spec.dense_layers = as_int(j["dense_layers"], "dense_layers");
    if (j.contains("dense_width")) row.spec.dense_width = as_int(j["dense_width"], "dense_width");
    if (j.contains("kernel")) row.spec.kernel = as_int(j["kernel"], "kernel");
    if (j.contains("conv_channels"))
      row.spec.conv_channels = as_int_list(j["conv_channels"], "conv_channels");
    if (j.contains("convlstm_channels"))
      row.spec.convlstm_channels = as_int_list(j["convlstm_channels"], "convlstm_channels");
    if (j.contains("head_channels"))
      row.spec.head_channels = as_int_list(j["head_channels"], "head_channels");
  }

  std::vector<std::string> algo_names{"flsp", "rolling-20"};
  if (j.contains("algorithms")) {
    if (!j["algorithms"].is_array()) throw ConfigError("plan key algorithms must be an array");
    algo_names.clear();
    for (const auto& e : j["algorithms"]) algo_names.push_back(as_string(e, "algorithms"));
  }
  for (const std::string& name : algo_names) {
    if (name == "flsp") {
      plan.algorithms.push_back({Algo::flsp, 0});
    } else if (name == "rolling") {
      plan.algorithms.push_back({Algo::rolling, 20});
    } else if (name.rfind("rolling-", 0) == 0) {
      int batches = 0;
      try {
        batches = std::stoi(name.substr(8));
      } catch (const std::exception&) {
        throw ConfigError("unknown algorithm: " + name);
      }
      plan.algorithms.push_back({Algo::rolling, batches});
    } else {
      throw ConfigError("unknown algorithm: " + name);
    }
  }

  std::vector<std::string> mode_names{"sync", "async"};
  if (j.contains("modes")) {
    if (!j["modes"].is_array()) throw ConfigError("plan key modes must be an array");
    mode_names.clear();
    for (const auto& e : j["modes"]) mode_names.push_back(as_string(e, "modes"));
  }
  for (const std::string& name : mode_names) {
    if (name == "sync") plan.modes.push_back(GatherMode::sync);
    else if (name == "async") plan.modes.push_back(GatherMode::async);
    else throw ConfigError("unknown gathering mode: " + name);
  }

  plan.validate();
  return plan;
}

}  // namespace livecast::harness
