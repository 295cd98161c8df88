#include "livecast/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "livecast/error.hpp"
#include "livecast/rng.hpp"

namespace livecast::sim {

using engine::GridSpec;
using engine::ReportBatch;
using tensor::Tensor;

std::vector<CellProfile> default_profiles(const GridSpec& grid, std::uint64_t seed) {
  grid.validate();
  Rng rng(derive_seed(seed, 0x70726f66));
  std::vector<CellProfile> profiles(static_cast<std::size_t>(grid.frame_size()));
  for (auto& p : profiles) {
    p.base = rng.uniform(3.0, 7.0);
    p.daily_amp = p.base * rng.uniform(0.35, 0.55);
    p.daily_phase = rng.uniform(-0.25, 0.25);
    p.weekly_amp = p.base * rng.uniform(0.08, 0.18);
    p.trend = rng.uniform(-2e-4, 2e-4);
    p.noise_std = p.base * rng.uniform(0.04, 0.10);
  }
  return profiles;
}

std::vector<Tensor> generate(const GridSpec& grid, const std::vector<CellProfile>& profiles,
                             int length, std::uint64_t seed) {
  grid.validate();
  if (length < 1) throw ConfigError("length must be at least 1");
  if (static_cast<int>(profiles.size()) != grid.frame_size())
    throw DimensionError("need one profile per (channel, cell) series: expected " +
                         std::to_string(grid.frame_size()) + ", got " +
                         std::to_string(profiles.size()));

  const double daily = grid.slots_per_day();
  const double weekly = 7.0 * daily;
  const double two_pi = 2.0 * std::numbers::pi;

  std::vector<std::vector<double>> values(static_cast<std::size_t>(length));
  for (auto& v : values) v.resize(profiles.size());

  for (std::size_t s = 0; s < profiles.size(); ++s) {
    const CellProfile& p = profiles[s];
    Rng rng(derive_seed(seed, s));
    for (int t = 0; t < length; ++t) {
      double v = p.base + p.trend * t + p.daily_amp * std::sin(two_pi * t / daily + p.daily_phase) +
                 p.weekly_amp * std::sin(two_pi * t / weekly) + rng.normal(0.0, p.noise_std);
      values[static_cast<std::size_t>(t)][s] = std::max(v, 0.0);
    }
  }

  std::vector<Tensor> frames;
  frames.reserve(static_cast<std::size_t>(length));
  for (auto& v : values) frames.push_back(Tensor::from_values(grid.frame_shape(), std::move(v)));
  return frames;
}

std::vector<Tensor> spatial_smooth(const GridSpec& grid, const std::vector<Tensor>& frames,
                                   int radius, double strength) {
  grid.validate();
  if (radius < 0) throw ConfigError("smoothing radius must be non-negative");
  if (strength < 0.0 || strength > 1.0) throw ConfigError("smoothing strength must lie in [0, 1]");
  if (radius == 0 || strength == 0.0) return frames;

  std::vector<Tensor> out;
  out.reserve(frames.size());
  for (const Tensor& f : frames) {
    if (f.shape() != grid.frame_shape()) throw DimensionError("frame shape mismatch in smoothing");
    const std::vector<double>& v = f.values();
    std::vector<double> o(v.size());
    for (int ch = 0; ch < grid.channels; ++ch) {
      for (int r = 0; r < grid.rows; ++r) {
        for (int c = 0; c < grid.cols; ++c) {
          double acc = 0.0;
          int n = 0;
          for (int rr = std::max(0, r - radius); rr <= std::min(grid.rows - 1, r + radius); ++rr)
            for (int cc = std::max(0, c - radius); cc <= std::min(grid.cols - 1, c + radius); ++cc) {
              acc += v[static_cast<std::size_t>(frame_value_index(grid, ch, cell_index(grid, rr, cc)))];
              ++n;
            }
          std::size_t i = static_cast<std::size_t>(frame_value_index(grid, ch, cell_index(grid, r, c)));
          o[i] = (1.0 - strength) * v[i] + strength * acc / n;
        }
      }
    }
    out.push_back(Tensor::from_values(grid.frame_shape(), std::move(o)));
  }
  return out;
}

int ReportSchedule::group_of(const GridSpec& grid, int cell) const {
  if (!groups.empty()) return groups[static_cast<std::size_t>(cell)];
  return (cell / grid.cols + cell % grid.cols) % 2;
}

void ReportSchedule::validate(const GridSpec& grid) const {
  grid.validate();
  if (collect_frame < 1) throw ConfigError("collect_frame must be at least 1");
  if (!groups.empty() && static_cast<int>(groups.size()) != grid.cells())
    throw ConfigError("group assignment must cover every cell");
  for (int g : groups)
    if (g != 0 && g != 1) throw ConfigError("report groups are 0 or 1");
  if (mode == engine::GatherMode::async) {
    int count[2] = {0, 0};
    for (int cell = 0; cell < grid.cells(); ++cell) ++count[group_of(grid, cell)];
    if (std::abs(count[0] - count[1]) > 1)
      throw ConfigError("async report groups must split the grid evenly");
  }
}

namespace {

ReportBatch window_batch(const GridSpec& grid, const std::vector<Tensor>& frames, long first_slot,
                         int num_slots, std::vector<int> cells) {
  ReportBatch b;
  b.first_slot = first_slot;
  b.num_slots = num_slots;
  b.cell_ids = std::move(cells);
  b.values.reserve(static_cast<std::size_t>(num_slots) * b.cell_ids.size() *
                   static_cast<std::size_t>(grid.channels));
  for (int s = 0; s < num_slots; ++s) {
    const std::vector<double>& fv = frames[static_cast<std::size_t>(first_slot + s)].values();
    for (int cell : b.cell_ids)
      for (int ch = 0; ch < grid.channels; ++ch)
        b.values.push_back(fv[static_cast<std::size_t>(frame_value_index(grid, ch, cell))]);
  }
  return b;
}

}  // namespace

std::vector<std::vector<ReportBatch>> emit_reports(const GridSpec& grid,
                                                   const std::vector<Tensor>& frames,
                                                   const ReportSchedule& schedule,
                                                   Consumer consumer) {
  schedule.validate(grid);
  const int fc = schedule.collect_frame;
  if (static_cast<int>(frames.size()) < fc)
    throw Error("stream covers less than one collection frame");

  const int n_frames = static_cast<int>(frames.size()) / fc;
  std::vector<std::vector<ReportBatch>> out(static_cast<std::size_t>(n_frames));
  for (int k = 0; k < n_frames; ++k) {
    long window_first = static_cast<long>(k) * fc;
    std::vector<int> cells;
    if (schedule.mode == engine::GatherMode::sync) {
      cells.resize(static_cast<std::size_t>(grid.cells()));
      for (int c = 0; c < grid.cells(); ++c) cells[static_cast<std::size_t>(c)] = c;
    } else {
      for (int c = 0; c < grid.cells(); ++c)
        if (schedule.group_of(grid, c) == k % 2) cells.push_back(c);
    }
    if (cells.empty()) continue;

    long first = window_first;
    if (schedule.mode == engine::GatherMode::async && consumer == Consumer::rolling)
      first = std::max(0L, window_first - fc);
    int num = static_cast<int>(window_first + fc - first);
    out[static_cast<std::size_t>(k)].push_back(
        window_batch(grid, frames, first, num, std::move(cells)));
  }
  return out;
}

BandwidthReport bandwidth_meter(const GridSpec& grid,
                                const std::vector<std::vector<ReportBatch>>& stream) {
  BandwidthReport report;
  report.per_frame.reserve(stream.size());
  for (const auto& frame : stream) {
    long long n = 0;
    for (const ReportBatch& b : frame) n += b.sample_count(grid);
    report.per_frame.push_back(n);
    report.cumulative += n;
  }
  return report;
}

void export_traffic_csv(const std::string& path, const GridSpec& grid,
                        const std::vector<Tensor>& frames, long long start_epoch_ms) {
  grid.validate();
  if (grid.channels != 3)
    throw ConfigError("record export needs the 3-channel layout (call, sms, internet)");
  std::ofstream file(path);
  if (!file) throw Error("cannot open " + path + " for writing");
  file << "square_id,timestamp_ms,country_code,sms_in,sms_out,call_in,call_out,internet\n";
  const long long slot_ms = static_cast<long long>(grid.slot_minutes) * 60000;
  char buf[64];
  auto emit = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    file << buf;
  };
  for (std::size_t t = 0; t < frames.size(); ++t) {
    if (frames[t].shape() != grid.frame_shape())
      throw DimensionError("frame shape mismatch in export");
    const std::vector<double>& v = frames[t].values();
    long long ts = start_epoch_ms + static_cast<long long>(t) * slot_ms;
    for (int cell = 0; cell < grid.cells(); ++cell) {
      double call = v[static_cast<std::size_t>(frame_value_index(grid, 0, cell))];
      double sms = v[static_cast<std::size_t>(frame_value_index(grid, 1, cell))];
      double net = v[static_cast<std::size_t>(frame_value_index(grid, 2, cell))];
      file << (cell + 1) << ',' << ts << ",39,";
      emit(sms / 2);
      file << ',';
      emit(sms / 2);
      file << ',';
      emit(call / 2);
      file << ',';
      emit(call / 2);
      file << ',';
      emit(net);
      file << '\n';
    }
  }
  file.close();
  if (!file.good()) throw Error("export write failed: " + path);
}

}  // namespace livecast::sim
