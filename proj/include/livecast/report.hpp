#pragma once

#include <vector>

#include "livecast/tensor.hpp"

namespace livecast::engine {

struct GridSpec {
  int rows = 8, cols = 8;
  int channels = 3;
  int slot_minutes = 10;

  int cells() const { return rows * cols; }
  int frame_size() const { return channels * rows * cols; }
  tensor::Shape frame_shape() const { return {channels, rows, cols}; }
  int slots_per_day() const { return 24 * 60 / slot_minutes; }
  void validate() const;
};

inline int cell_index(const GridSpec& grid, int row, int col) { return row * grid.cols + col; }

// Position of (channel, cell) inside a flattened [channels, rows, cols] frame.
inline int frame_value_index(const GridSpec& grid, int channel, int cell) {
  return channel * grid.cells() + cell;
}

// Telemetry from a set of cells covering a contiguous slot range. Values are
// laid out slot-major, then cell (in cell_ids order), then channel.
struct ReportBatch {
  long first_slot = 0;
  int num_slots = 0;
  std::vector<int> cell_ids;  // row * cols + col
  std::vector<double> values;

  double value(int slot_offset, int cell_pos, int channel, int channels) const {
    return values[(static_cast<std::size_t>(slot_offset) * cell_ids.size() +
                   static_cast<std::size_t>(cell_pos)) *
                      static_cast<std::size_t>(channels) +
                  static_cast<std::size_t>(channel)];
  }
  long long sample_count(const GridSpec& grid) const {
    return static_cast<long long>(num_slots) * static_cast<long long>(cell_ids.size()) * grid.channels;
  }
  void validate(const GridSpec& grid) const;
};

// A slot window where every cell holds either a fresh report or the retained
// estimate, per the replace-estimates-with-actuals merge rule.
struct MergedWindow {
  long first_slot = 0;
  std::vector<tensor::Tensor> frames;
  std::vector<std::vector<bool>> actual;  // [slot][cell]

  long long actual_count() const;
};

// Overlay reports onto estimated frames. `estimates` holds one frame per slot
// starting at first_slot; every report must fall inside that window. Two
// reports disagreeing on the same (cell, slot) value are an error.
MergedWindow merge_reports(const GridSpec& grid, long first_slot,
                           const std::vector<tensor::Tensor>& estimates,
                           const std::vector<ReportBatch>& reports);

}  // namespace livecast::engine
