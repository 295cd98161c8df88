#pragma once

#include <any>
#include <deque>
#include <map>
#include <string>
#include <vector>

#include "livecast/report.hpp"
#include "livecast/tensor.hpp"

namespace livecast::engine {

enum class GatherMode { sync, async };
enum class StateKind { latent, history };

// Opaque predictor state handle returned by snapshot(); the concrete payload
// type is private to each predictor.
using Snapshot = std::any;

// Frame-in, frame-out forecaster the sessions schedule. absorb() consumes an
// observed (or merged) frame and returns the next-slot forecast; project()
// continues recursively, taking the previous output as input for predictors
// that feed their forecasts back (history predictors recurse internally and
// ignore it). Each absorb/project call, and each fresh frame consumed by
// online_update, counts as one predictor step.
class StreamPredictor {
 public:
  virtual ~StreamPredictor() = default;

  virtual tensor::Shape frame_shape() const = 0;
  virtual StateKind state_kind() const = 0;

  tensor::Tensor absorb(const tensor::Tensor& frame) {
    tensor::Tensor out = do_absorb(frame);
    ++steps_;
    return out;
  }
  tensor::Tensor project(const tensor::Tensor& prev) {
    tensor::Tensor out = do_project(prev);
    ++steps_;
    return out;
  }
  // Replace the speculative forecasts for the trailing slots with
  // observations, recomputing residuals sequentially (history predictors).
  void online_update(const std::vector<tensor::Tensor>& fresh) {
    do_online_update(fresh);
    steps_ += static_cast<long long>(fresh.size());
  }

  // Latent-state capabilities; defaults report the capability as missing.
  virtual Snapshot snapshot() const;
  virtual void restore(const Snapshot& snap);
  virtual void reset();

  long long steps() const { return steps_; }

 protected:
  virtual tensor::Tensor do_absorb(const tensor::Tensor& frame) = 0;
  virtual tensor::Tensor do_project(const tensor::Tensor& prev) = 0;
  virtual void do_online_update(const std::vector<tensor::Tensor>& fresh);

 private:
  long long steps_ = 0;
};

struct StreamConfig {
  int seed_len = 600;    // l_s
  int feed_len = 15;     // l_f, also the feed cadence in slots
  int span = 30;         // S_p, recursive forecast depth per round
  int buffer_len = 300;  // l_buff, rolling only
  GatherMode mode = GatherMode::sync;
  int collect_frame = 15;  // f_collect, async reporting cadence

  void validate(bool rolling) const;
};

// One emitted forecast. origin_slot is the last slot absorbed before the
// producing span was predicted; round 0 is the seed round.
struct ForecastRecord {
  long slot = 0;
  long origin_slot = 0;
  int round = 0;
  tensor::Tensor frame;
};

// A full recursive forecast: frames[i] predicts slot origin_slot + 1 + i.
struct SpanRecord {
  int round = 0;
  long origin_slot = 0;
  std::vector<tensor::Tensor> frames;
};

struct SessionResult {
  // Exactly-once slot coverage from the first post-seed slot onward: the seed
  // round contributes its whole span, later rounds only their last feed_len
  // frames (the earlier ones refresh slots already emitted).
  std::vector<ForecastRecord> monitor;
  std::vector<SpanRecord> spans;  // every span in full, for horizon analysis
  long long predictor_steps = 0;
  int feeds = 0;
  long long reported_samples = 0;  // (slot, cell, channel) actuals delivered
  int max_buffer_frames = 0;       // rolling high-water mark, 0 otherwise
};

// Delivers the seed window and then one batch set per feed round, in slot
// order. Batches may cover only part of the grid (async gathering).
class FeedSource {
 public:
  virtual ~FeedSource() = default;
  virtual std::vector<tensor::Tensor> seed(int length) = 0;
  virtual bool has_feed() = 0;
  virtual std::vector<ReportBatch> next_feed() = 0;
};

// Chronological frame window with per-cell provenance flags. Appending past
// capacity is allowed transiently; the session truncates after each replay.
class HistoryBuffer {
 public:
  HistoryBuffer(int capacity, const GridSpec& grid);

  void append(long slot, const tensor::Tensor& frame, std::vector<bool> actual);
  void truncate();

  bool contains(long slot) const;
  // Overwrite one cell's channels at a buffered slot with reported values.
  void backfill(long slot, int cell, const std::vector<double>& channel_values);

  int size() const { return static_cast<int>(entries_.size()); }
  int capacity() const { return capacity_; }
  int high_water() const { return high_water_; }
  long first_slot() const;
  long last_slot() const;
  std::vector<tensor::Tensor> frames() const;
  const std::vector<bool>& actual_flags(long slot) const;

 private:
  struct Entry {
    long slot;
    std::vector<double> values;
    std::vector<bool> actual;
  };
  Entry& entry_for(long slot);

  GridSpec grid_;
  std::deque<Entry> entries_;
  int capacity_;
  int high_water_ = 0;
};

// State-snapshot scheduler: condition on the seed once, then per feed restore
// the saved state, absorb the merged feed window, save again and forecast a
// full span recursively. Latent-state predictors only; the transient state
// mutated by the recursion is discarded by the next restore. Both sessions
// reset the predictor before seed conditioning, so a predictor can be reused
// across sequential sessions.
SessionResult flsp_session(StreamPredictor& predictor, const StreamConfig& config,
                           FeedSource& source, const GridSpec& grid);

// Rolling-buffer scheduler. Latent predictors are reset and replay the whole
// buffer plus the fresh window every round (truncation follows the replay, so
// each round touches buffer_len + feed_len + span slots). History predictors
// instead stream through online_update, touching feed_len + span.
SessionResult rolling_session(StreamPredictor& predictor, const StreamConfig& config,
                              FeedSource& source, const GridSpec& grid);

// One CSV row per span frame per cell per channel:
// slot,origin_slot,round,row,col,channel,predicted,actual. The actual column
// is filled from `actuals` (slot -> frame) when known, else left empty.
void write_transcript(const std::string& path, const SessionResult& result, const GridSpec& grid,
                      const std::map<long, tensor::Tensor>& actuals);

}  // namespace livecast::engine
