#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "livecast/error.hpp"
#include "livecast/report.hpp"
#include "livecast/traffic.hpp"
#include "support/oracles.hpp"

using livecast::ConfigError;
using livecast::DimensionError;
using livecast::Error;
using livecast::tensor::Tensor;
using namespace livecast::sim;
using livecast::engine::GatherMode;
using livecast::engine::GridSpec;
using livecast::engine::MergedWindow;
using livecast::engine::ReportBatch;

namespace {

using Vec = std::vector<double>;

GridSpec grid_of(int rows, int cols, int channels) {
  GridSpec g;
  g.rows = rows;
  g.cols = cols;
  g.channels = channels;
  return g;
}

std::vector<CellProfile> flat_profiles(const GridSpec& grid, double base) {
  CellProfile p;
  p.base = base;
  p.daily_amp = 0.0;
  p.weekly_amp = 0.0;
  p.trend = 0.0;
  p.noise_std = 0.0;
  return std::vector<CellProfile>(static_cast<size_t>(grid.frame_size()), p);
}

Vec series_of(const std::vector<Tensor>& frames, int index) {
  Vec v;
  v.reserve(frames.size());
  for (const Tensor& f : frames) v.push_back(f.values()[static_cast<size_t>(index)]);
  return v;
}

}  // namespace

TEST_CASE("generation is flat when every modulation is off") {
  GridSpec grid = grid_of(2, 3, 2);
  auto frames = generate(grid, flat_profiles(grid, 4.5), 50, 7);
  REQUIRE(frames.size() == 50);
  for (const Tensor& f : frames)
    for (double v : f.values()) CHECK(v == 4.5);
}

TEST_CASE("generation is reproducible from the seed alone") {
  GridSpec grid = grid_of(3, 3, 3);
  auto profiles = default_profiles(grid, 11);
  auto a = generate(grid, profiles, 80, 123);
  auto b = generate(grid, profiles, 80, 123);
  auto c = generate(grid, profiles, 80, 124);
  REQUIRE(a.size() == b.size());
  bool any_diff = false;
  for (size_t t = 0; t < a.size(); ++t) {
    CHECK(a[t].values() == b[t].values());
    if (a[t].values() != c[t].values()) any_diff = true;
  }
  CHECK(any_diff);

  // Profiles are seeded too.
  auto p2 = default_profiles(grid, 11);
  CHECK(profiles[0].base == p2[0].base);
  CHECK(profiles.back().noise_std == p2.back().noise_std);
}

TEST_CASE("a daily-only series repeats with one-day autocorrelation above 0.9") {
  GridSpec grid = grid_of(1, 1, 1);
  CellProfile p;
  p.base = 5.0;
  p.daily_amp = 2.0;
  p.daily_phase = 0.4;
  p.weekly_amp = 0.0;
  p.trend = 0.0;
  p.noise_std = 0.0;
  auto frames = generate(grid, {p}, 4320, 3);
  Vec series = series_of(frames, 0);
  CHECK(oracles::autocorrelation(series, grid.slots_per_day()) > 0.9);
}

TEST_CASE("noise never drives traffic negative") {
  GridSpec grid = grid_of(2, 2, 1);
  CellProfile p;
  p.base = 0.1;
  p.daily_amp = 0.0;
  p.weekly_amp = 0.0;
  p.trend = 0.0;
  p.noise_std = 5.0;
  auto frames = generate(grid, std::vector<CellProfile>(4, p), 300, 9);
  double lowest = 1e300;
  for (const Tensor& f : frames)
    for (double v : f.values()) lowest = std::min(lowest, v);
  CHECK(lowest == 0.0);  // heavy noise on a tiny base must clamp somewhere
}

TEST_CASE("generation rejects bad lengths and profile counts") {
  GridSpec grid = grid_of(2, 2, 1);
  CHECK_THROWS_AS(generate(grid, flat_profiles(grid, 1.0), 0, 1), ConfigError);
  CHECK_THROWS_AS(generate(grid, std::vector<CellProfile>(3), 10, 1), DimensionError);
}

TEST_CASE("smoothing blends neighbourhoods without touching the extremes") {
  GridSpec grid = grid_of(2, 2, 1);
  auto profiles = default_profiles(grid, 21);
  auto frames = generate(grid, profiles, 12, 5);

  SUBCASE("zero strength or zero radius is the identity") {
    auto s0 = spatial_smooth(grid, frames, 1, 0.0);
    auto r0 = spatial_smooth(grid, frames, 0, 0.8);
    for (size_t t = 0; t < frames.size(); ++t) {
      CHECK(s0[t].values() == frames[t].values());
      CHECK(r0[t].values() == frames[t].values());
    }
  }

  SUBCASE("full radius at strength one averages the whole grid") {
    auto sm = spatial_smooth(grid, frames, 2, 1.0);
    for (size_t t = 0; t < frames.size(); ++t) {
      const Vec& v = frames[t].values();
      double mean = (v[0] + v[1] + v[2] + v[3]) / 4.0;
      for (double o : sm[t].values()) CHECK(o == doctest::Approx(mean).epsilon(1e-12));
    }
  }

  SUBCASE("bad parameters are rejected") {
    CHECK_THROWS_AS(spatial_smooth(grid, frames, -1, 0.5), ConfigError);
    CHECK_THROWS_AS(spatial_smooth(grid, frames, 1, 1.5), ConfigError);
  }
}

TEST_CASE("default smoothing holds neighbour correlation at 0.86 or better") {
  GridSpec grid = grid_of(8, 8, 3);
  auto profiles = default_profiles(grid, 99);
  auto frames = spatial_smooth(grid, generate(grid, profiles, 2000, 99), kSmoothRadius,
                               kSmoothStrength);

  double lowest = 1.0;
  for (int ch = 0; ch < grid.channels; ++ch) {
    for (int r = 0; r < grid.rows; ++r) {
      for (int c = 0; c < grid.cols; ++c) {
        int here = frame_value_index(grid, ch, cell_index(grid, r, c));
        Vec a = series_of(frames, here);
        if (c + 1 < grid.cols) {
          Vec b = series_of(frames, frame_value_index(grid, ch, cell_index(grid, r, c + 1)));
          lowest = std::min(lowest, oracles::pearson(a, b));
        }
        if (r + 1 < grid.rows) {
          Vec b = series_of(frames, frame_value_index(grid, ch, cell_index(grid, r + 1, c)));
          lowest = std::min(lowest, oracles::pearson(a, b));
        }
      }
    }
  }
  CHECK(lowest >= 0.86);
}

TEST_CASE("sync reporting covers every cell and reproduces the stream") {
  GridSpec grid = grid_of(2, 2, 2);
  auto frames = generate(grid, default_profiles(grid, 31), 9, 77);
  ReportSchedule sched;
  sched.mode = GatherMode::sync;
  sched.collect_frame = 3;

  auto stream = emit_reports(grid, frames, sched, Consumer::snapshot);
  REQUIRE(stream.size() == 3);
  for (size_t k = 0; k < stream.size(); ++k) {
    REQUIRE(stream[k].size() == 1);
    const ReportBatch& b = stream[k][0];
    CHECK(b.cell_ids.size() == static_cast<size_t>(grid.cells()));
    CHECK(b.first_slot == static_cast<long>(k) * 3);
    CHECK(b.num_slots == 3);

    // Conservation: merged over junk estimates, the batch rebuilds the truth.
    std::vector<Tensor> junk(3, Tensor::full(grid.frame_shape(), -1.0));
    MergedWindow m = livecast::engine::merge_reports(grid, b.first_slot, junk, {b});
    for (int s = 0; s < 3; ++s)
      CHECK(m.frames[static_cast<size_t>(s)].values() ==
            frames[k * 3 + static_cast<size_t>(s)].values());
    CHECK(m.actual_count() == 3LL * grid.cells());
  }

  // Both consumers see identical sync payloads.
  auto rolling_stream = emit_reports(grid, frames, sched, Consumer::rolling);
  REQUIRE(rolling_stream.size() == stream.size());
  for (size_t k = 0; k < stream.size(); ++k) {
    CHECK(rolling_stream[k][0].first_slot == stream[k][0].first_slot);
    CHECK(rolling_stream[k][0].values == stream[k][0].values);
  }
}

TEST_CASE("async reporting alternates halves and doubles the rolling payload") {
  GridSpec grid = grid_of(2, 2, 3);
  auto frames = generate(grid, default_profiles(grid, 41), 8, 13);
  ReportSchedule sched;
  sched.mode = GatherMode::async;
  sched.collect_frame = 2;

  auto flsp = emit_reports(grid, frames, sched, Consumer::snapshot);
  auto roll = emit_reports(grid, frames, sched, Consumer::rolling);
  REQUIRE(flsp.size() == 4);
  REQUIRE(roll.size() == 4);

  // Checkerboard on 2x2: parity-0 group is {0, 3}, parity-1 group is {1, 2}.
  for (size_t k = 0; k < flsp.size(); ++k) {
    REQUIRE(flsp[k].size() == 1);
    const ReportBatch& b = flsp[k][0];
    std::vector<int> expect = (k % 2 == 0) ? std::vector<int>{0, 3} : std::vector<int>{1, 2};
    CHECK(b.cell_ids == expect);
    CHECK(b.first_slot == static_cast<long>(k) * 2);
    CHECK(b.num_slots == 2);
    CHECK(roll[k][0].cell_ids == expect);
  }

  // Union of two consecutive frames covers all cells exactly once.
  std::vector<int> seen(static_cast<size_t>(grid.cells()), 0);
  for (int cell : flsp[0][0].cell_ids) ++seen[static_cast<size_t>(cell)];
  for (int cell : flsp[1][0].cell_ids) ++seen[static_cast<size_t>(cell)];
  CHECK(seen == std::vector<int>(static_cast<size_t>(grid.cells()), 1));

  // The rolling payload reaches one collection frame back (except at the
  // very start of the stream, where there is nothing to reach into).
  CHECK(roll[0][0].first_slot == 0);
  CHECK(roll[0][0].num_slots == 2);
  for (size_t k = 1; k < roll.size(); ++k) {
    CHECK(roll[k][0].first_slot == static_cast<long>(k - 1) * 2);
    CHECK(roll[k][0].num_slots == 4);
  }

  // Live-phase bandwidth ratio is exactly two.
  auto meter_f = bandwidth_meter(grid, flsp);
  auto meter_r = bandwidth_meter(grid, roll);
  long long flsp_live = 0, roll_live = 0;
  for (size_t k = 1; k < meter_f.per_frame.size(); ++k) {
    flsp_live += meter_f.per_frame[k];
    roll_live += meter_r.per_frame[k];
  }
  CHECK(roll_live == 2 * flsp_live);
}

TEST_CASE("bandwidth meter counts scalar samples per collection frame") {
  GridSpec grid = grid_of(3, 3, 2);
  auto frames = generate(grid, default_profiles(grid, 51), 8, 3);
  ReportSchedule sched;
  sched.collect_frame = 4;

  auto stream = emit_reports(grid, frames, sched, Consumer::snapshot);
  auto meter = bandwidth_meter(grid, stream);
  REQUIRE(meter.per_frame.size() == 2);
  CHECK(meter.per_frame[0] == grid.cells() * grid.channels * 4);
  CHECK(meter.per_frame[1] == grid.cells() * grid.channels * 4);
  CHECK(meter.cumulative == 2LL * grid.cells() * grid.channels * 4);

  CHECK(bandwidth_meter(grid, {}).cumulative == 0);
}

TEST_CASE("report schedules validate their shape") {
  GridSpec grid = grid_of(2, 2, 1);
  ReportSchedule s;
  s.collect_frame = 0;
  CHECK_THROWS_AS(s.validate(grid), ConfigError);

  s.collect_frame = 2;
  s.groups = {0, 1, 1};  // wrong size
  CHECK_THROWS_AS(s.validate(grid), ConfigError);

  s.groups = {0, 1, 2, 1};
  CHECK_THROWS_AS(s.validate(grid), ConfigError);

  s.groups = {0, 0, 0, 0};
  s.mode = GatherMode::sync;
  CHECK_NOTHROW(s.validate(grid));  // sync never partitions
  s.mode = GatherMode::async;
  CHECK_THROWS_AS(s.validate(grid), ConfigError);

  s.groups = {0, 0, 1, 1};
  CHECK_NOTHROW(s.validate(grid));

  s.groups.clear();  // checkerboard default balances any grid
  CHECK_NOTHROW(s.validate(grid));

  auto frames = generate(grid, flat_profiles(grid, 1.0), 1, 1);
  CHECK_THROWS_AS(emit_reports(grid, frames, s, Consumer::snapshot), Error);
}

TEST_CASE("record export writes one row per slot and cell") {
  GridSpec grid = grid_of(2, 2, 3);
  auto frames = generate(grid, default_profiles(grid, 61), 4, 15);
  auto path = std::filesystem::temp_directory_path() / "livecast_export_test.csv";
  export_traffic_csv(path.string(), grid, frames, 1700000000000LL);

  std::ifstream in(path);
  REQUIRE(in.good());
  std::string header;
  std::getline(in, header);
  CHECK(header == "square_id,timestamp_ms,country_code,sms_in,sms_out,call_in,call_out,internet");

  size_t rows = 0;
  std::string line, first;
  while (std::getline(in, line)) {
    if (rows == 0) first = line;
    ++rows;
  }
  CHECK(rows == 4u * 4u);
  CHECK(first.substr(0, 16) == "1,1700000000000,");

  std::filesystem::remove(path);

  GridSpec two = grid_of(2, 2, 2);
  auto f2 = generate(two, flat_profiles(two, 1.0), 2, 1);
  CHECK_THROWS_AS(export_traffic_csv(path.string(), two, f2, 0), ConfigError);
}
