#include "livecast/stream.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "livecast/error.hpp"

namespace livecast::engine {

using tensor::Tensor;

Snapshot StreamPredictor::snapshot() const {
  throw CapabilityError("predictor does not support state snapshots");
}

void StreamPredictor::restore(const Snapshot&) {
  throw CapabilityError("predictor does not support state restore");
}

void StreamPredictor::reset() { throw CapabilityError("predictor does not support reset"); }

void StreamPredictor::do_online_update(const std::vector<Tensor>&) {
  throw CapabilityError("predictor does not support online updates");
}

void StreamConfig::validate(bool rolling) const {
  if (seed_len < 1) throw ConfigError("seed_len must be at least 1");
  if (feed_len < 1) throw ConfigError("feed_len must be at least 1");
  if (span < feed_len)
    throw ConfigError("span must be at least feed_len so forecasts cover the gap to the next feed");
  if (rolling && buffer_len < feed_len)
    throw ConfigError("buffer_len must be at least feed_len");
  if (mode == GatherMode::async) {
    if (collect_frame < 1) throw ConfigError("collect_frame must be at least 1");
    if (feed_len != collect_frame)
      throw ConfigError("async gathering feeds once per collection frame; feed_len must equal collect_frame");
  }
}

HistoryBuffer::HistoryBuffer(int capacity, const GridSpec& grid) : grid_(grid), capacity_(capacity) {
  if (capacity < 1) throw ConfigError("history buffer capacity must be positive");
  grid.validate();
}

void HistoryBuffer::append(long slot, const Tensor& frame, std::vector<bool> actual) {
  if (!entries_.empty() && slot != entries_.back().slot + 1)
    throw Error("history buffer append out of order: expected slot " +
                std::to_string(entries_.back().slot + 1) + ", got " + std::to_string(slot));
  if (frame.shape() != grid_.frame_shape())
    throw DimensionError("history buffer frame shape mismatch");
  if (static_cast<int>(actual.size()) != grid_.cells())
    throw DimensionError("history buffer needs one actual flag per cell");
  entries_.push_back({slot, frame.values(), std::move(actual)});
  high_water_ = std::max(high_water_, static_cast<int>(entries_.size()));
}

void HistoryBuffer::truncate() {
  while (static_cast<int>(entries_.size()) > capacity_) entries_.pop_front();
}

bool HistoryBuffer::contains(long slot) const {
  return !entries_.empty() && slot >= entries_.front().slot && slot <= entries_.back().slot;
}

HistoryBuffer::Entry& HistoryBuffer::entry_for(long slot) {
  if (!contains(slot)) throw Error("slot " + std::to_string(slot) + " is not buffered");
  return entries_[static_cast<std::size_t>(slot - entries_.front().slot)];
}

void HistoryBuffer::backfill(long slot, int cell, const std::vector<double>& channel_values) {
  if (cell < 0 || cell >= grid_.cells())
    throw Error("backfill cell " + std::to_string(cell) + " out of range");
  if (static_cast<int>(channel_values.size()) != grid_.channels)
    throw DimensionError("backfill expects one value per channel");
  Entry& e = entry_for(slot);
  for (int ch = 0; ch < grid_.channels; ++ch)
    e.values[static_cast<std::size_t>(frame_value_index(grid_, ch, cell))] = channel_values[ch];
  e.actual[static_cast<std::size_t>(cell)] = true;
}

long HistoryBuffer::first_slot() const {
  if (entries_.empty()) throw Error("history buffer is empty");
  return entries_.front().slot;
}

long HistoryBuffer::last_slot() const {
  if (entries_.empty()) throw Error("history buffer is empty");
  return entries_.back().slot;
}

std::vector<Tensor> HistoryBuffer::frames() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const Entry& e : entries_)
    out.push_back(Tensor::from_values(grid_.frame_shape(), e.values));
  return out;
}

const std::vector<bool>& HistoryBuffer::actual_flags(long slot) const {
  if (!contains(slot)) throw Error("slot " + std::to_string(slot) + " is not buffered");
  return entries_[static_cast<std::size_t>(slot - entries_.front().slot)].actual;
}

namespace {

std::vector<Tensor> predict_span_frames(StreamPredictor& predictor, const Tensor& seeded, int span) {
  std::vector<Tensor> frames;
  frames.reserve(static_cast<std::size_t>(span));
  if (predictor.state_kind() == StateKind::latent) {
    // The last absorb already produced the first span frame; each recursive
    // push feeds the previous output back in. The final push lands one slot
    // past the span end and is dropped; the transient state it mutated is
    // discarded by the next restore or replay anyway.
    frames.push_back(seeded);
    Tensor x = seeded;
    for (int i = 0; i < span; ++i) {
      x = predictor.project(x);
      if (static_cast<int>(frames.size()) < span) frames.push_back(x);
    }
  } else {
    // History predictors recurse internally; every span frame is its own
    // speculative step, starting with the first post-observation forecast.
    Tensor x = seeded;
    for (int i = 0; i < span; ++i) {
      x = predictor.project(x);
      frames.push_back(x);
    }
  }
  return frames;
}

void emit_span(SessionResult& out, const SpanRecord& span, int from_index) {
  for (int i = from_index; i < static_cast<int>(span.frames.size()); ++i)
    out.monitor.push_back(
        {span.origin_slot + 1 + i, span.origin_slot, span.round, span.frames[static_cast<std::size_t>(i)]});
}

std::vector<Tensor> window_estimates(const SpanRecord& prev, int feed_len) {
  return {prev.frames.begin(), prev.frames.begin() + feed_len};
}

std::vector<Tensor> checked_seed(FeedSource& source, const StreamConfig& config) {
  std::vector<Tensor> seed = source.seed(config.seed_len);
  if (static_cast<int>(seed.size()) != config.seed_len)
    throw Error("feed source delivered " + std::to_string(seed.size()) + " seed frames, expected " +
                std::to_string(config.seed_len));
  return seed;
}

void check_frame_shape(const StreamPredictor& predictor, const GridSpec& grid) {
  if (predictor.frame_shape() != grid.frame_shape())
    throw DimensionError("predictor frame shape " + tensor::shape_str(predictor.frame_shape()) +
                         " does not match grid " + tensor::shape_str(grid.frame_shape()));
}

}  // namespace

SessionResult flsp_session(StreamPredictor& predictor, const StreamConfig& config,
                           FeedSource& source, const GridSpec& grid) {
  config.validate(false);
  grid.validate();
  check_frame_shape(predictor, grid);
  if (predictor.state_kind() != StateKind::latent)
    throw CapabilityError("state snapshot scheduling needs a latent-state predictor");
  predictor.reset();

  SessionResult out;
  Tensor last;
  for (const Tensor& f : checked_seed(source, config)) last = predictor.absorb(f);
  Snapshot snap = predictor.snapshot();

  SpanRecord span{0, config.seed_len - 1, predict_span_frames(predictor, last, config.span)};
  out.spans.push_back(span);
  emit_span(out, span, 0);

  int round = 0;
  while (source.has_feed()) {
    ++round;
    std::vector<ReportBatch> batches = source.next_feed();
    long window_first = config.seed_len + static_cast<long>(round - 1) * config.feed_len;
    for (const ReportBatch& b : batches) {
      b.validate(grid);
      out.reported_samples += b.sample_count(grid);
    }
    MergedWindow merged =
        merge_reports(grid, window_first, window_estimates(span, config.feed_len), batches);

    predictor.restore(snap);
    for (const Tensor& f : merged.frames) last = predictor.absorb(f);
    snap = predictor.snapshot();

    span = SpanRecord{round, window_first + config.feed_len - 1,
                      predict_span_frames(predictor, last, config.span)};
    out.spans.push_back(span);
    emit_span(out, span, config.span - config.feed_len);
  }
  out.feeds = round;
  out.predictor_steps = predictor.steps();
  return out;
}

SessionResult rolling_session(StreamPredictor& predictor, const StreamConfig& config,
                              FeedSource& source, const GridSpec& grid) {
  config.validate(true);
  grid.validate();
  check_frame_shape(predictor, grid);
  const bool history = predictor.state_kind() == StateKind::history;
  predictor.reset();

  SessionResult out;
  std::vector<Tensor> seed = checked_seed(source, config);
  HistoryBuffer buffer(config.buffer_len, grid);
  Tensor last;
  if (history) {
    // Fixed-size internal rings stand in for the frame buffer: conditioning
    // streams the whole seed through the predictor once.
    for (const Tensor& f : seed) last = predictor.absorb(f);
  } else {
    int keep = std::min(config.buffer_len, config.seed_len);
    for (int i = config.seed_len - keep; i < config.seed_len; ++i)
      buffer.append(i, seed[static_cast<std::size_t>(i)],
                    std::vector<bool>(static_cast<std::size_t>(grid.cells()), true));
    for (const Tensor& f : buffer.frames()) last = predictor.absorb(f);
  }

  SpanRecord span{0, config.seed_len - 1, predict_span_frames(predictor, last, config.span)};
  out.spans.push_back(span);
  emit_span(out, span, 0);

  int round = 0;
  while (source.has_feed()) {
    ++round;
    std::vector<ReportBatch> all = source.next_feed();
    long window_first = config.seed_len + static_cast<long>(round - 1) * config.feed_len;

    std::vector<ReportBatch> current;
    for (ReportBatch& b : all) {
      b.validate(grid);
      out.reported_samples += b.sample_count(grid);
      long before = window_first - b.first_slot;  // slots preceding the fresh window
      if (before > 0) {
        // Retroactive slots replace estimates already sitting in the buffer;
        // a payload may straddle into the fresh window, so split it.
        if (history)
          throw CapabilityError("history predictors cannot rewrite slots they have already committed");
        int retro = static_cast<int>(std::min<long>(before, b.num_slots));
        for (int s = 0; s < retro; ++s) {
          for (std::size_t c = 0; c < b.cell_ids.size(); ++c) {
            std::vector<double> channels(static_cast<std::size_t>(grid.channels));
            for (int ch = 0; ch < grid.channels; ++ch)
              channels[static_cast<std::size_t>(ch)] = b.value(s, static_cast<int>(c), ch, grid.channels);
            buffer.backfill(b.first_slot + s, b.cell_ids[c], channels);
          }
        }
        if (retro < b.num_slots) {
          std::size_t lead = static_cast<std::size_t>(retro) * b.cell_ids.size() *
                             static_cast<std::size_t>(grid.channels);
          b.values.erase(b.values.begin(), b.values.begin() + static_cast<std::ptrdiff_t>(lead));
          b.first_slot += retro;
          b.num_slots -= retro;
          current.push_back(std::move(b));
        }
      } else {
        current.push_back(std::move(b));
      }
    }

    MergedWindow merged =
        merge_reports(grid, window_first, window_estimates(span, config.feed_len), current);

    if (history) {
      predictor.online_update(merged.frames);
      span = SpanRecord{round, window_first + config.feed_len - 1,
                        predict_span_frames(predictor, merged.frames.back(), config.span)};
    } else {
      for (int i = 0; i < config.feed_len; ++i)
        buffer.append(window_first + i, merged.frames[static_cast<std::size_t>(i)],
                      merged.actual[static_cast<std::size_t>(i)]);
      predictor.reset();
      for (const Tensor& f : buffer.frames()) last = predictor.absorb(f);
      span = SpanRecord{round, window_first + config.feed_len - 1,
                        predict_span_frames(predictor, last, config.span)};
      buffer.truncate();
    }
    out.spans.push_back(span);
    emit_span(out, span, config.span - config.feed_len);
  }
  out.feeds = round;
  out.predictor_steps = predictor.steps();
  out.max_buffer_frames = buffer.high_water();
  return out;
}

void write_transcript(const std::string& path, const SessionResult& result, const GridSpec& grid,
                      const std::map<long, Tensor>& actuals) {
  std::ofstream file(path);
  if (!file) throw Error("cannot open transcript file " + path);
  file << "slot,origin_slot,round,row,col,channel,predicted,actual\n";
  char buf[64];
  for (const SpanRecord& span : result.spans) {
    for (std::size_t i = 0; i < span.frames.size(); ++i) {
      long slot = span.origin_slot + 1 + static_cast<long>(i);
      auto it = actuals.find(slot);
      const std::vector<double>& pred = span.frames[i].values();
      const std::vector<double>* truth = it == actuals.end() ? nullptr : &it->second.values();
      for (int row = 0; row < grid.rows; ++row) {
        for (int col = 0; col < grid.cols; ++col) {
          int cell = cell_index(grid, row, col);
          for (int ch = 0; ch < grid.channels; ++ch) {
            std::size_t v = static_cast<std::size_t>(frame_value_index(grid, ch, cell));
            file << slot << ',' << span.origin_slot << ',' << span.round << ',' << row << ',' << col
                 << ',' << ch << ',';
            std::snprintf(buf, sizeof buf, "%.17g", pred[v]);
            file << buf << ',';
            if (truth) {
              std::snprintf(buf, sizeof buf, "%.17g", (*truth)[v]);
              file << buf;
            }
            file << '\n';
          }
        }
      }
    }
  }
  file.close();
  if (!file.good()) throw Error("transcript write failed: " + path);
}

}  // namespace livecast::engine
