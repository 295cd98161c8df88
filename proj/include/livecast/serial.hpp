#pragma once

#include <string>
#include <utility>
#include <vector>

#include "livecast/tensor.hpp"

namespace livecast::serial {

// Versioned binary container for named tensors. Layout, all integers
// little-endian:
//   magic "LCST1"
//   u32 entry count
//   per entry: u16 name length, name bytes, u8 rank, u32 dims[rank]
//   payload: for each entry in order, prod(dims) IEEE-754 doubles (LE)
struct Entry {
  std::string name;
  tensor::Tensor value;
};

using Entries = std::vector<Entry>;

std::vector<unsigned char> pack(const std::vector<Entry>& entries);
std::vector<Entry> unpack(const std::vector<unsigned char>& bytes);

void write_file(const std::string& path, const std::vector<Entry>& entries);
std::vector<Entry> read_file(const std::string& path);

// Convenience lookup; throws livecast::Error when absent.
const tensor::Tensor& find(const std::vector<Entry>& entries, const std::string& name);
bool contains(const std::vector<Entry>& entries, const std::string& name);

}  // namespace livecast::serial
