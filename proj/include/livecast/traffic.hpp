#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "livecast/report.hpp"
#include "livecast/stream.hpp"
#include "livecast/tensor.hpp"

namespace livecast::sim {

// Additive load model for one (channel, cell) series: base level, linear
// trend, daily and weekly sinusoids, Gaussian noise, clamped at zero.
struct CellProfile {
  double base = 4.0;
  double daily_amp = 2.0;
  double daily_phase = 0.0;  // radians
  double weekly_amp = 0.8;
  double trend = 0.0;  // per slot
  double noise_std = 0.3;
};

// Plausible spread of profiles, one per (channel, cell) series in flattened
// frame order. Mild phase jitter keeps neighbouring series in step.
std::vector<CellProfile> default_profiles(const engine::GridSpec& grid, std::uint64_t seed);

// Per-series noise streams are derived from (seed, series index), so the
// output is independent of evaluation order and safe to parallelize.
std::vector<tensor::Tensor> generate(const engine::GridSpec& grid,
                                     const std::vector<CellProfile>& profiles, int length,
                                     std::uint64_t seed);

// Blend every cell with its box neighbourhood mean (Chebyshev radius, borders
// clipped): out = (1-strength)*v + strength*mean. Channels stay independent.
std::vector<tensor::Tensor> spatial_smooth(const engine::GridSpec& grid,
                                           const std::vector<tensor::Tensor>& frames, int radius,
                                           double strength);

// Defaults calibrated so adjacent cells correlate at 0.86 or better on
// default profiles.
inline constexpr int kSmoothRadius = 1;
inline constexpr double kSmoothStrength = 0.6;

// Which scheduler drains the reports. Snapshot consumers only ever use the
// freshest collection window; rolling consumers also re-request the previous
// window so late reports can overwrite buffered estimates.
enum class Consumer { snapshot, rolling };

struct ReportSchedule {
  engine::GatherMode mode = engine::GatherMode::sync;
  int collect_frame = 15;
  // Per-cell report group (0 or 1), async only. Empty means checkerboard
  // parity of (row + col). Groups must split the grid evenly (+-1 cell).
  std::vector<int> groups;

  int group_of(const engine::GridSpec& grid, int cell) const;
  void validate(const engine::GridSpec& grid) const;
};

// Cut the stream into collection frames of collect_frame slots and emit each
// frame's report batches. Sync: every cell reports its fresh window. Async:
// group (k mod 2) reports at collection frame k; the payload covers the fresh
// window for snapshot consumers and additionally the previous window for
// rolling consumers (the very first frame has no previous window to extend
// into). Inner vectors may be empty when the reporting group holds no cells.
std::vector<std::vector<engine::ReportBatch>> emit_reports(
    const engine::GridSpec& grid, const std::vector<tensor::Tensor>& frames,
    const ReportSchedule& schedule, Consumer consumer);

struct BandwidthReport {
  std::vector<long long> per_frame;  // scalar samples per collection frame
  long long cumulative = 0;
};

BandwidthReport bandwidth_meter(const engine::GridSpec& grid,
                                const std::vector<std::vector<engine::ReportBatch>>& stream);

// One row per (slot, cell) in the record schema the ingest side parses:
// square_id,timestamp_ms,country_code,sms_in,sms_out,call_in,call_out,internet
// with channel 0 = call, 1 = sms, 2 = internet and in/out split evenly.
// square ids are 1-based row-major.
void export_traffic_csv(const std::string& path, const engine::GridSpec& grid,
                        const std::vector<tensor::Tensor>& frames, long long start_epoch_ms);

}  // namespace livecast::sim
