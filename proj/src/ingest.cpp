#include "livecast/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <tuple>

#include "livecast/error.hpp"
#include "livecast/serial.hpp"

namespace livecast::ingest {

using engine::GridSpec;
using tensor::Tensor;

namespace {

std::string trimmed(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(delim, start);
    if (pos == std::string::npos) {
      out.push_back(trimmed(line.substr(start)));
      return out;
    }
    out.push_back(trimmed(line.substr(start, pos - start)));
    start = pos + 1;
  }
}

bool parse_ll(const std::string& s, long long& out) {
  const char* end = s.data() + s.size();
  auto res = std::from_chars(s.data(), end, out);
  return res.ec == std::errc() && res.ptr == end && !s.empty();
}

bool parse_d(const std::string& s, double& out) {
  const char* end = s.data() + s.size();
  auto res = std::from_chars(s.data(), end, out);
  return res.ec == std::errc() && res.ptr == end && !s.empty();
}

[[noreturn]] void fail_row(const std::string& source, int line, const std::string& what) {
  throw ParseError(source + ": " + what, line);
}

// First line decides the delimiter; a non-numeric leading field marks a header.
char sniff_delimiter(const std::string& line) {
  return line.find('\t') != std::string::npos ? '\t' : ',';
}

bool looks_like_header(const std::string& line, char delim) {
  std::vector<std::string> fields = split(line, delim);
  long long ignored;
  return fields.empty() || !parse_ll(fields[0], ignored);
}

std::string record_context(const CdrRecord& r) {
  if (r.line > 0) return "line " + std::to_string(r.line) + ": ";
  return "";
}

}  // namespace

std::vector<CdrRecord> parse_cdr(std::istream& in, const std::string& source) {
  std::vector<CdrRecord> records;
  std::string line;
  int line_no = 0;
  char delim = ',';
  bool first_content = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (trimmed(line).empty()) continue;
    if (first_content) {
      first_content = false;
      delim = sniff_delimiter(line);
      if (looks_like_header(line, delim)) continue;
    }
    std::vector<std::string> fields = split(line, delim);
    if (fields.size() < 3) fail_row(source, line_no, "expected at least 3 columns, got " + std::to_string(fields.size()));
    if (fields.size() > 8) fail_row(source, line_no, "expected at most 8 columns, got " + std::to_string(fields.size()));
    CdrRecord r;
    r.line = line_no;
    long long id, ts, cc;
    if (!parse_ll(fields[0], id)) fail_row(source, line_no, "bad square_id '" + fields[0] + "'");
    if (!parse_ll(fields[1], ts)) fail_row(source, line_no, "bad timestamp '" + fields[1] + "'");
    if (!parse_ll(fields[2], cc)) fail_row(source, line_no, "bad country_code '" + fields[2] + "'");
    r.square_id = static_cast<long>(id);
    r.timestamp_ms = ts;
    r.country_code = static_cast<int>(cc);
    double* slots[5] = {&r.sms_in, &r.sms_out, &r.call_in, &r.call_out, &r.internet};
    static const char* names[5] = {"sms_in", "sms_out", "call_in", "call_out", "internet"};
    for (std::size_t i = 3; i < fields.size(); ++i) {
      if (fields[i].empty()) continue;  // absent measurement reads as zero
      double v;
      if (!parse_d(fields[i], v)) fail_row(source, line_no, std::string("bad ") + names[i - 3] + " '" + fields[i] + "'");
      if (!(v >= 0)) fail_row(source, line_no, std::string(names[i - 3]) + " must be non-negative");
      *slots[i - 3] = v;
    }
    records.push_back(r);
  }
  return records;
}

std::vector<CdrRecord> parse_cdr_file(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw Error("cannot open " + path);
  return parse_cdr(file, path);
}

SquareMap load_square_map(const std::string& path, const GridSpec& grid) {
  grid.validate();
  std::ifstream file(path);
  if (!file) throw Error("cannot open " + path);
  SquareMap map;
  std::string line;
  int line_no = 0;
  char delim = ',';
  bool first_content = true;
  while (std::getline(file, line)) {
    ++line_no;
    if (trimmed(line).empty()) continue;
    if (first_content) {
      first_content = false;
      delim = sniff_delimiter(line);
      if (looks_like_header(line, delim)) continue;
    }
    std::vector<std::string> fields = split(line, delim);
    if (fields.size() != 3) fail_row(path, line_no, "mapping rows are square_id,row,col");
    long long id, row, col;
    if (!parse_ll(fields[0], id) || !parse_ll(fields[1], row) || !parse_ll(fields[2], col))
      fail_row(path, line_no, "bad mapping entry");
    if (row < 0 || row >= grid.rows || col < 0 || col >= grid.cols)
      fail_row(path, line_no, "mapped cell outside the grid");
    if (!map.emplace(static_cast<long>(id), engine::cell_index(grid, static_cast<int>(row), static_cast<int>(col))).second)
      fail_row(path, line_no, "duplicate square_id " + std::to_string(id));
  }
  return map;
}

std::vector<Tensor> aggregate(const std::vector<CdrRecord>& records, const GridSpec& grid,
                              const SlotWindow& window, const SquareMap& square_map) {
  grid.validate();
  if (grid.channels != 3)
    throw ConfigError("record aggregation produces the 3-channel layout (call, sms, internet)");
  if (window.slots < 1) throw ConfigError("aggregation window needs at least one slot");
  const long long slot_ms = static_cast<long long>(grid.slot_minutes) * 60000;

  // A canonical accumulation order makes the result identical for any
  // permutation of the input, not just close.
  std::vector<const CdrRecord*> order;
  order.reserve(records.size());
  for (const CdrRecord& r : records) order.push_back(&r);
  std::sort(order.begin(), order.end(), [](const CdrRecord* a, const CdrRecord* b) {
    return std::tie(a->timestamp_ms, a->square_id, a->country_code, a->sms_in, a->sms_out, a->call_in,
                    a->call_out, a->internet) < std::tie(b->timestamp_ms, b->square_id, b->country_code,
                                                         b->sms_in, b->sms_out, b->call_in, b->call_out,
                                                         b->internet);
  });

  std::vector<std::vector<double>> acc(static_cast<std::size_t>(window.slots),
                                       std::vector<double>(static_cast<std::size_t>(grid.frame_size()), 0.0));
  for (const CdrRecord* r : order) {
    int cell;
    if (!square_map.empty()) {
      auto it = square_map.find(r->square_id);
      if (it == square_map.end())
        throw Error(record_context(*r) + "square_id " + std::to_string(r->square_id) + " not in mapping");
      cell = it->second;
    } else {
      if (r->square_id < 1 || r->square_id > grid.cells())
        throw Error(record_context(*r) + "square_id " + std::to_string(r->square_id) +
                    " out of range for a " + std::to_string(grid.rows) + "x" + std::to_string(grid.cols) +
                    " grid");
      cell = static_cast<int>(r->square_id - 1);
    }
    long long off = r->timestamp_ms - window.start_ms;
    if (off % slot_ms != 0)
      throw Error(record_context(*r) + "timestamp " + std::to_string(r->timestamp_ms) +
                  " not aligned to the slot grid");
    long long slot = off / slot_ms;
    if (slot < 0 || slot >= window.slots) continue;
    std::vector<double>& frame = acc[static_cast<std::size_t>(slot)];
    frame[static_cast<std::size_t>(engine::frame_value_index(grid, 0, cell))] += r->call_in + r->call_out;
    frame[static_cast<std::size_t>(engine::frame_value_index(grid, 1, cell))] += r->sms_in + r->sms_out;
    frame[static_cast<std::size_t>(engine::frame_value_index(grid, 2, cell))] += r->internet;
  }

  std::vector<Tensor> frames;
  frames.reserve(acc.size());
  for (std::vector<double>& v : acc) frames.push_back(Tensor::from_values(grid.frame_shape(), std::move(v)));
  return frames;
}

std::pair<GridSpec, std::vector<Tensor>> crop(const GridSpec& grid, const std::vector<Tensor>& frames,
                                              int row_first, int rows, int col_first, int cols) {
  grid.validate();
  if (rows < 1 || cols < 1) throw ConfigError("crop window must keep at least one cell");
  if (row_first < 0 || col_first < 0 || row_first + rows > grid.rows || col_first + cols > grid.cols)
    throw ConfigError("crop window outside the grid");
  GridSpec sub = grid;
  sub.rows = rows;
  sub.cols = cols;
  std::vector<Tensor> out;
  out.reserve(frames.size());
  for (const Tensor& frame : frames) {
    if (frame.shape() != grid.frame_shape()) throw DimensionError("frame shape mismatch in crop");
    const std::vector<double>& src = frame.values();
    std::vector<double> dst(static_cast<std::size_t>(sub.frame_size()));
    std::size_t n = 0;
    for (int ch = 0; ch < grid.channels; ++ch)
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
          dst[n++] = src[static_cast<std::size_t>(
              engine::frame_value_index(grid, ch, engine::cell_index(grid, row_first + r, col_first + c)))];
    out.push_back(Tensor::from_values(sub.frame_shape(), std::move(dst)));
  }
  return {sub, std::move(out)};
}

void save_frames(const std::string& path, const GridSpec& grid, const std::vector<Tensor>& frames) {
  grid.validate();
  serial::Entries entries;
  entries.push_back({"grid", Tensor::from_values({5}, {static_cast<double>(grid.rows), static_cast<double>(grid.cols),
                                                       static_cast<double>(grid.channels),
                                                       static_cast<double>(grid.slot_minutes),
                                                       static_cast<double>(frames.size())})});
  if (!frames.empty()) {
    std::vector<double> flat;
    flat.reserve(frames.size() * static_cast<std::size_t>(grid.frame_size()));
    for (const Tensor& frame : frames) {
      if (frame.shape() != grid.frame_shape()) throw DimensionError("frame shape mismatch in save_frames");
      flat.insert(flat.end(), frame.values().begin(), frame.values().end());
    }
    entries.push_back({"frames", Tensor::from_values({static_cast<int>(frames.size()), grid.channels,
                                                      grid.rows, grid.cols},
                                                     std::move(flat))});
  }
  serial::write_file(path, entries);
}

std::pair<GridSpec, std::vector<Tensor>> load_frames(const std::string& path) {
  serial::Entries entries = serial::read_file(path);
  const Tensor& meta = serial::find(entries, "grid");
  if (meta.shape() != tensor::Shape{5}) throw Error("corrupt frames file: bad grid entry");
  auto as_int = [&](int i) {
    double v = meta.values()[static_cast<std::size_t>(i)];
    if (v != std::floor(v) || v < 0 || v > 1e9) throw Error("corrupt frames file: bad grid entry");
    return static_cast<int>(v);
  };
  GridSpec grid;
  grid.rows = as_int(0);
  grid.cols = as_int(1);
  grid.channels = as_int(2);
  grid.slot_minutes = as_int(3);
  grid.validate();
  int count = as_int(4);
  std::vector<Tensor> frames;
  frames.reserve(static_cast<std::size_t>(count));
  if (count > 0) {
    const Tensor& flat = serial::find(entries, "frames");
    tensor::Shape want{count, grid.channels, grid.rows, grid.cols};
    if (flat.shape() != want) throw Error("corrupt frames file: frame block does not match grid");
    const std::vector<double>& v = flat.values();
    std::size_t per = static_cast<std::size_t>(grid.frame_size());
    for (int t = 0; t < count; ++t)
      frames.push_back(Tensor::from_values(
          grid.frame_shape(),
          std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(t * per),
                              v.begin() + static_cast<std::ptrdiff_t>((t + 1) * per))));
  }
  return {grid, std::move(frames)};
}

void write_frames_csv(const std::string& path, const GridSpec& grid, const std::vector<Tensor>& frames) {
  grid.validate();
  if (grid.channels != 3)
    throw ConfigError("frame export needs the 3-channel layout (call, sms, internet)");
  std::ofstream file(path);
  if (!file) throw Error("cannot open " + path + " for writing");
  file << "slot,cell_row,cell_col,call,sms,internet\n";
  char buf[64];
  auto emit = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    file << buf;
  };
  for (std::size_t t = 0; t < frames.size(); ++t) {
    if (frames[t].shape() != grid.frame_shape()) throw DimensionError("frame shape mismatch in export");
    const std::vector<double>& v = frames[t].values();
    for (int r = 0; r < grid.rows; ++r)
      for (int c = 0; c < grid.cols; ++c) {
        int cell = engine::cell_index(grid, r, c);
        file << t << ',' << r << ',' << c << ',';
        emit(v[static_cast<std::size_t>(engine::frame_value_index(grid, 0, cell))]);
        file << ',';
        emit(v[static_cast<std::size_t>(engine::frame_value_index(grid, 1, cell))]);
        file << ',';
        emit(v[static_cast<std::size_t>(engine::frame_value_index(grid, 2, cell))]);
        file << '\n';
      }
  }
  file.close();
  if (!file.good()) throw Error("frame export write failed: " + path);
}

}  // namespace livecast::ingest
