#include "livecast/serial.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "livecast/error.hpp"

namespace livecast::serial {

namespace {

constexpr char kMagic[5] = {'L', 'C', 'S', 'T', '1'};

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big,
              "mixed-endian platforms unsupported");

template <typename T>
void put(std::vector<unsigned char>& out, T v) {
  unsigned char raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (size_t i = 0; i < sizeof(T); ++i) out.push_back(raw[sizeof(T) - 1 - i]);
  } else {
    out.insert(out.end(), raw, raw + sizeof(T));
  }
}

template <typename T>
T get(const std::vector<unsigned char>& in, size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw Error("container truncated");
  unsigned char raw[sizeof(T)];
  if constexpr (std::endian::native == std::endian::big) {
    for (size_t i = 0; i < sizeof(T); ++i) raw[i] = in[pos + sizeof(T) - 1 - i];
  } else {
    std::memcpy(raw, in.data() + pos, sizeof(T));
  }
  pos += sizeof(T);
  T v;
  std::memcpy(&v, raw, sizeof(T));
  return v;
}

}  // namespace

std::vector<unsigned char> pack(const std::vector<Entry>& entries) {
  std::vector<unsigned char> out;
  out.insert(out.end(), kMagic, kMagic + 5);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
  for (const Entry& e : entries) {
    if (e.name.size() > 0xffff) throw Error("entry name too long: " + e.name);
    if (!e.value.defined()) throw Error("undefined tensor for entry: " + e.name);
    put<std::uint16_t>(out, static_cast<std::uint16_t>(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    const auto& shape = e.value.shape();
    if (shape.size() > 0xff) throw Error("rank too large for entry: " + e.name);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(shape.size()));
    for (int d : shape) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  }
  for (const Entry& e : entries)
    for (double v : e.value.values()) put<double>(out, v);
  return out;
}

std::vector<Entry> unpack(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 5 || std::memcmp(bytes.data(), kMagic, 5) != 0)
    throw Error("bad magic: not an LCST1 container");
  size_t pos = 5;
  const auto count = get<std::uint32_t>(bytes, pos);
  std::vector<std::string> names(count);
  std::vector<tensor::Shape> shapes(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = get<std::uint16_t>(bytes, pos);
    if (pos + name_len > bytes.size()) throw Error("container truncated");
    names[i].assign(reinterpret_cast<const char*>(bytes.data()) + pos, name_len);
    pos += name_len;
    const auto rank = get<std::uint8_t>(bytes, pos);
    shapes[i].resize(rank);
    for (int d = 0; d < rank; ++d) shapes[i][d] = static_cast<int>(get<std::uint32_t>(bytes, pos));
  }
  std::vector<Entry> entries;
  entries.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const int n = tensor::shape_size(shapes[i]);
    std::vector<double> vals(n);
    for (int j = 0; j < n; ++j) vals[j] = get<double>(bytes, pos);
    entries.push_back({names[i], tensor::Tensor::from_values(shapes[i], std::move(vals))});
  }
  if (pos != bytes.size()) throw Error("trailing bytes after container payload");
  return entries;
}

void write_file(const std::string& path, const std::vector<Entry>& entries) {
  const auto bytes = pack(entries);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open for writing: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("write failed: " + path);
}

std::vector<Entry> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return unpack(bytes);
}

const tensor::Tensor& find(const std::vector<Entry>& entries, const std::string& name) {
  for (const Entry& e : entries)
    if (e.name == name) return e.value;
  throw Error("container entry not found: " + name);
}

bool contains(const std::vector<Entry>& entries, const std::string& name) {
  for (const Entry& e : entries)
    if (e.name == name) return true;
  return false;
}

}  // namespace livecast::serial
