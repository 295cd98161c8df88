#pragma once

#include <istream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "livecast/report.hpp"
#include "livecast/tensor.hpp"

namespace livecast::ingest {

// One telemetry row. Traffic fields absent from the input default to zero;
// line carries the 1-based source line for row-level error reporting.
struct CdrRecord {
  long square_id = 0;
  long long timestamp_ms = 0;
  int country_code = 0;
  double sms_in = 0, sms_out = 0, call_in = 0, call_out = 0, internet = 0;
  int line = 0;
};

// Comma- or tab-separated rows in the column order
// square_id,timestamp_ms,country_code,sms_in,sms_out,call_in,call_out,internet.
// The delimiter is sniffed from the first line and a leading header row is
// skipped automatically. Rows need at least the first three columns; missing
// or empty traffic fields read as zero. Malformed rows fail fast with
// "<source>:<line>:" context.
std::vector<CdrRecord> parse_cdr(std::istream& in, const std::string& source);
std::vector<CdrRecord> parse_cdr_file(const std::string& path);

// Slot range to aggregate into: slot i covers
// [start_ms + i*slot, start_ms + (i+1)*slot).
struct SlotWindow {
  long long start_ms = 0;
  int slots = 0;
};

// Optional square_id -> cell routing, e.g. when ids are not laid out
// row-major. File rows are "square_id,row,col" (header optional).
using SquareMap = std::map<long, int>;
SquareMap load_square_map(const std::string& path, const engine::GridSpec& grid);

// Sum records into (call, sms, internet) frames: call = call_in + call_out
// and sms likewise, folded over every country code; cells or slots nobody
// reported stay zero. Records outside the window are dropped. With no map,
// square ids are 1-based row-major. Records are re-ordered internally before
// summing, so the output is identical for any permutation of the input.
std::vector<tensor::Tensor> aggregate(const std::vector<CdrRecord>& records,
                                      const engine::GridSpec& grid, const SlotWindow& window,
                                      const SquareMap& square_map = {});

// Cut the [row_first, row_first+rows) x [col_first, col_first+cols) block out
// of every frame and re-index it as its own grid.
std::pair<engine::GridSpec, std::vector<tensor::Tensor>> crop(const engine::GridSpec& grid,
                                                              const std::vector<tensor::Tensor>& frames,
                                                              int row_first, int rows, int col_first,
                                                              int cols);

// Frame sequence in the binary tensor container, round-trip exact.
void save_frames(const std::string& path, const engine::GridSpec& grid,
                 const std::vector<tensor::Tensor>& frames);
std::pair<engine::GridSpec, std::vector<tensor::Tensor>> load_frames(const std::string& path);

// Plain-text frames: slot,cell_row,cell_col,call,sms,internet (3 channels).
void write_frames_csv(const std::string& path, const engine::GridSpec& grid,
                      const std::vector<tensor::Tensor>& frames);

}  // namespace livecast::ingest
