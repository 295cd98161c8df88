#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "livecast/model.hpp"
#include "livecast/report.hpp"
#include "livecast/sarima.hpp"
#include "livecast/stream.hpp"
#include "livecast/tensor.hpp"
#include "livecast/traffic.hpp"
#include "livecast/train.hpp"

namespace livecast::harness {

// Mean of squared elementwise differences. Inputs must be equal-length and
// non-empty; the frame overload additionally requires matching shapes.
double mse(const std::vector<double>& predicted, const std::vector<double>& actual);
double mse(const std::vector<tensor::Tensor>& predicted, const std::vector<tensor::Tensor>& actual);

// Scores a session's emitted forecasts against per-slot truth, averaging over
// every (record, cell, channel) sample. truth[i] is the frame for slot i in
// session slot space; every monitored slot must be covered.
double monitor_mse(const std::vector<engine::ForecastRecord>& monitor,
                   const std::vector<tensor::Tensor>& truth);

// Pearson correlation of each cell's series against the center cell's, over
// one channel. Zero-variance series leave entries flagged undefined.
struct CorrelationMap {
  int center = 0;
  std::vector<double> values;  // one per cell, meaningful iff defined
  std::vector<bool> defined;
};
CorrelationMap neighbor_correlation(const engine::GridSpec& grid,
                                    const std::vector<tensor::Tensor>& frames, int center_cell,
                                    int channel = 0);

// One (channel, cell) series pulled out of a frame sequence, and the 1x1
// single-channel frames that re-wrap it for a per-cell session.
std::vector<double> extract_series(const engine::GridSpec& grid,
                                   const std::vector<tensor::Tensor>& frames, int cell, int channel);
std::vector<tensor::Tensor> series_frames(const std::vector<double>& series);

// Per-channel standardization constants, estimated from training frames.
// Channels with no spread keep scale 1 so the transform stays invertible.
struct ChannelStats {
  std::vector<double> mean, scale;
};
ChannelStats channel_stats(const engine::GridSpec& grid, const std::vector<tensor::Tensor>& frames);
std::vector<tensor::Tensor> standardize(const engine::GridSpec& grid,
                                        const std::vector<tensor::Tensor>& frames,
                                        const ChannelStats& stats);

// Decorator that runs an inner predictor in standardized units while the
// session sees raw traffic: inputs are scaled down on the way in, forecasts
// scaled back up on the way out. Step counts on this wrapper mirror the
// inner predictor's.
class StandardizedPredictor final : public engine::StreamPredictor {
 public:
  StandardizedPredictor(std::unique_ptr<engine::StreamPredictor> inner, const engine::GridSpec& grid,
                        ChannelStats stats);

  tensor::Shape frame_shape() const override { return inner_->frame_shape(); }
  engine::StateKind state_kind() const override { return inner_->state_kind(); }

  engine::Snapshot snapshot() const override { return inner_->snapshot(); }
  void restore(const engine::Snapshot& snap) override { inner_->restore(snap); }
  void reset() override { inner_->reset(); }

 protected:
  tensor::Tensor do_absorb(const tensor::Tensor& frame) override;
  tensor::Tensor do_project(const tensor::Tensor& prev) override;
  void do_online_update(const std::vector<tensor::Tensor>& fresh) override;

 private:
  tensor::Tensor to_standard(const tensor::Tensor& frame) const;
  tensor::Tensor to_raw(const tensor::Tensor& frame) const;

  std::unique_ptr<engine::StreamPredictor> inner_;
  engine::GridSpec grid_;
  ChannelStats stats_;
};

// Feed source over a prescripted truth array indexed in session slot space
// (index 0 is the first seed slot). Sync: the whole grid reports each feed.
// Async: checkerboard halves alternate, group (round-1) mod 2 matching the
// collection-frame parity of the report simulator; snapshot consumers get the
// fresh window, rolling consumers additionally the previous one (the first
// round reaches back into the seed, so seed_len must cover one collection
// frame).
class SimFeedSource final : public engine::FeedSource {
 public:
  SimFeedSource(const engine::GridSpec& grid, const std::vector<tensor::Tensor>& truth,
                const engine::StreamConfig& config, int feeds, sim::Consumer consumer);

  std::vector<tensor::Tensor> seed(int length) override;
  bool has_feed() override;
  std::vector<engine::ReportBatch> next_feed() override;

 private:
  engine::GridSpec grid_;
  const std::vector<tensor::Tensor>* truth_;
  engine::StreamConfig config_;
  int feeds_;
  sim::Consumer consumer_;
  int delivered_ = 0;
};

enum class Algo { flsp, rolling };

struct AlgoChoice {
  Algo algo = Algo::flsp;
  int buffer_batches = 20;  // rolling window, in feed-sized batches

  std::string label() const;  // "flsp" or "rolling-<batches>"
};

// One model column of the comparison: what to build, how to train, and
// whether it forecasts the focus cell's series or whole frames. Statistical
// rows are always single-cell; their fit happens where neural rows train.
struct PlanModel {
  std::string name;
  bool statistical = false;
  bool single_cell = false;
  models::ModelSpec spec;      // neural rows
  models::TrainOptions train;  // neural rows
  stats::SarimaOrder order;    // statistical rows
};

// Canned rows for the standard lineup.
PlanModel lstm_row();
PlanModel cnn_lstm_row(const engine::GridSpec& grid);
PlanModel convlstm_row(const engine::GridSpec& grid);
PlanModel arima_row();
PlanModel sarima_row(int period);

struct ExperimentPlan {
  std::vector<PlanModel> models;
  std::vector<AlgoChoice> algorithms;
  std::vector<engine::GatherMode> modes;
  int repetitions = 20;
  std::uint64_t master_seed = 1;
  std::vector<std::uint64_t> rep_seeds;  // explicit per-rep seeds; empty derives from master_seed

  engine::StreamConfig stream;  // buffer_len is taken from each AlgoChoice instead
  engine::GridSpec grid{8, 8, 3, 10};
  int train_len = 2000;
  int stream_len = 810;  // streamed slots, a whole number of feeds
  int focus_row = -1, focus_col = -1;  // -1 centers on the grid
  int focus_channel = 0;

  std::string frames_file;  // recorded frame container; empty means synthetic
  int jobs = 0;             // parallel (model, repetition) tasks; 0 = hardware
  std::string incremental_path;  // per-cell CSV appended as tasks finish

  int reps() const;
  std::uint64_t seed_for_rep(int rep) const;
  int focus_cell(const engine::GridSpec& g) const;
  void validate() const;
};

// Flat JSON file to plan; unknown keys are rejected.
ExperimentPlan plan_from_json(const std::string& text);

// One (model, algorithm, mode, repetition) outcome. status is "ok", "na"
// (combination structurally impossible, detail says why) or "error" (training
// or streaming failed, detail carries the message).
struct CellResult {
  std::string model, algorithm, mode;
  int rep = 0;
  std::uint64_t seed = 0;
  std::string status = "ok";
  std::string detail;
  double mse = std::numeric_limits<double>::quiet_NaN();
  long long predictor_steps = 0;
  long long reported_samples = 0;
  int max_buffer_frames = 0;
  double train_seconds = 0.0, stream_seconds = 0.0;
  std::vector<double> plot;  // focus-series forecasts, repetition 0 only
};

struct ResultRow {
  std::string model, algorithm, mode;
  int ok = 0, na = 0, errors = 0;
  double mean_mse = std::numeric_limits<double>::quiet_NaN();
  long long predictor_steps = 0;  // structural, identical across repetitions
  long long reported_samples = 0;
  int max_buffer_frames = 0;
  double mean_train_seconds = 0.0, mean_stream_seconds = 0.0;
};

struct ExperimentResult {
  std::vector<CellResult> cells;  // model-major, then algorithm, mode, repetition
  std::vector<ResultRow> rows;
  std::vector<long> plot_slots;     // monitored slots, session space
  std::vector<double> focus_truth;  // repetition-0 truth on plot_slots
};

// Runs every combination over every repetition. Training happens once per
// (model, repetition) and is shared by all algorithm/mode cells; repetitions
// are independent tasks scheduled across plan.jobs threads, and every output
// is deterministic given the seeds regardless of thread count (wall-clock
// columns aside).
ExperimentResult run(const ExperimentPlan& plan);

std::string cells_csv(const ExperimentResult& result);
std::string rows_csv(const ExperimentResult& result);
std::string to_json(const ExperimentResult& result);
// Models x algorithms pivot with one mean-MSE column per gathering mode.
std::string summary_table(const ExperimentResult& result);
// CSV of slot, actual, and one forecast column per combination captured at
// repetition 0, enough to redraw overlay plots with any external tool.
void write_plot_data(const std::string& path, const ExperimentResult& result);

}  // namespace livecast::harness
