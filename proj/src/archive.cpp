#include "semantify/archive.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <fmt/format.h>

#include "semantify/error.hpp"

namespace semantify {

static_assert(std::endian::native == std::endian::little,
              "archive codecs assume a little-endian host");

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(fmt::format("short write to '{}'", path.string()));
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text_file(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

namespace {

std::uint16_t get_u16(const Bytes& b, std::size_t at) {
  if (at + 2 > b.size()) throw DataError("truncated zip structure");
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

std::uint32_t get_u32(const Bytes& b, std::size_t at) {
  if (at + 4 > b.size()) throw DataError("truncated zip structure");
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) |
         (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

void put_u16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

Bytes inflate_raw(std::span<const std::uint8_t> in, std::size_t expected) {
  Bytes out(expected);
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw DataError("zlib init failed");
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  const auto produced = zs.total_out;
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || produced != expected) throw DataError("corrupt deflate stream in zip");
  return out;
}

constexpr std::uint32_t kLocalSig = 0x04034b50;
constexpr std::uint32_t kCentralSig = 0x02014b50;
constexpr std::uint32_t kEndSig = 0x06054b50;

}  // namespace

std::map<std::string, Bytes> read_zip(const std::filesystem::path& path) {
  const Bytes data = read_file(path);
  if (data.size() < 22) throw DataError(fmt::format("'{}' is not a zip file", path.string()));

  std::size_t eocd = std::string::npos;
  const std::size_t stop = data.size() > 65557 ? data.size() - 65557 : 0;
  for (std::size_t at = data.size() - 22;; --at) {
    if (get_u32(data, at) == kEndSig) {
      eocd = at;
      break;
    }
    if (at == stop) break;
  }
  if (eocd == std::string::npos)
    throw DataError(fmt::format("'{}': end of central directory not found", path.string()));

  const std::uint16_t entries = get_u16(data, eocd + 10);
  std::size_t cursor = get_u32(data, eocd + 16);
  if (entries == 0xffff || cursor == 0xffffffffu) throw DataError("zip64 archives are not supported");

  std::map<std::string, Bytes> out;
  for (std::uint16_t i = 0; i < entries; ++i) {
    if (get_u32(data, cursor) != kCentralSig) throw DataError("bad zip central directory");
    const std::uint16_t method = get_u16(data, cursor + 10);
    const std::uint32_t csize = get_u32(data, cursor + 20);
    const std::uint32_t usize = get_u32(data, cursor + 24);
    const std::uint16_t name_len = get_u16(data, cursor + 28);
    const std::uint16_t extra_len = get_u16(data, cursor + 30);
    const std::uint16_t comment_len = get_u16(data, cursor + 32);
    const std::uint32_t local = get_u32(data, cursor + 42);
    if (cursor + 46 + name_len > data.size()) throw DataError("truncated zip central directory");
    std::string name(reinterpret_cast<const char*>(&data[cursor + 46]), name_len);
    cursor += 46u + name_len + extra_len + comment_len;

    if (name.empty() || name.back() == '/') continue;
    if (get_u32(data, local) != kLocalSig) throw DataError("bad zip local header");
    const std::size_t payload =
        local + 30u + get_u16(data, local + 26) + get_u16(data, local + 28);
    if (payload + csize > data.size()) throw DataError("truncated zip entry '" + name + "'");
    std::span<const std::uint8_t> raw(&data[payload], csize);

    Bytes content;
    if (method == 0) {
      content.assign(raw.begin(), raw.end());
    } else if (method == 8) {
      content = inflate_raw(raw, usize);
    } else {
      throw DataError(fmt::format("zip entry '{}' uses unsupported method {}", name, method));
    }
    // Strip a single leading directory so "model/manifest.json" resolves too.
    if (const auto slash = name.rfind('/'); slash != std::string::npos) name = name.substr(slash + 1);
    out.emplace(std::move(name), std::move(content));
  }
  return out;
}

void write_zip(const std::filesystem::path& path, const std::map<std::string, Bytes>& entries) {
  Bytes out;
  Bytes central;
  std::uint16_t count = 0;
  for (const auto& [name, content] : entries) {
    const auto crc = static_cast<std::uint32_t>(
        crc32(0L, content.data(), static_cast<uInt>(content.size())));
    const auto offset = static_cast<std::uint32_t>(out.size());
    const auto size = static_cast<std::uint32_t>(content.size());
    const auto name_len = static_cast<std::uint16_t>(name.size());

    append_u32_le(out, kLocalSig);
    put_u16(out, 20);      // version needed
    put_u16(out, 0);       // flags
    put_u16(out, 0);       // stored
    put_u16(out, 0);       // time
    put_u16(out, 0x0021);  // date: 1980-01-01
    append_u32_le(out, crc);
    append_u32_le(out, size);
    append_u32_le(out, size);
    put_u16(out, name_len);
    put_u16(out, 0);
    out.insert(out.end(), name.begin(), name.end());
    out.insert(out.end(), content.begin(), content.end());

    append_u32_le(central, kCentralSig);
    put_u16(central, 20);
    put_u16(central, 20);
    put_u16(central, 0);
    put_u16(central, 0);
    put_u16(central, 0);
    put_u16(central, 0x0021);
    append_u32_le(central, crc);
    append_u32_le(central, size);
    append_u32_le(central, size);
    put_u16(central, name_len);
    put_u16(central, 0);
    put_u16(central, 0);
    put_u16(central, 0);
    put_u16(central, 0);
    append_u32_le(central, 0);
    append_u32_le(central, offset);
    central.insert(central.end(), name.begin(), name.end());
    ++count;
  }
  const auto cd_offset = static_cast<std::uint32_t>(out.size());
  out.insert(out.end(), central.begin(), central.end());
  append_u32_le(out, kEndSig);
  put_u16(out, 0);
  put_u16(out, 0);
  put_u16(out, count);
  put_u16(out, count);
  append_u32_le(out, static_cast<std::uint32_t>(central.size()));
  append_u32_le(out, cd_offset);
  put_u16(out, 0);
  write_file(path, out);
}

void append_f32_le(Bytes& out, float value) {
  const auto bits = std::bit_cast<std::uint32_t>(value);
  append_u32_le(out, bits);
}

void append_f64_le(Bytes& out, double value) {
  const auto bits = std::bit_cast<std::uint64_t>(value);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

void append_u32_le(Bytes& out, std::uint32_t value) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

namespace {

template <typename T>
std::vector<T> decode_le(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % sizeof(T) != 0)
    throw DataError(fmt::format("binary payload of {} bytes is not a multiple of {}", bytes.size(),
                                sizeof(T)));
  std::vector<T> out(bytes.size() / sizeof(T));
  std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

}  // namespace

std::vector<float> decode_f32_le(std::span<const std::uint8_t> bytes) {
  return decode_le<float>(bytes);
}
std::vector<double> decode_f64_le(std::span<const std::uint8_t> bytes) {
  return decode_le<double>(bytes);
}
std::vector<std::uint32_t> decode_u32_le(std::span<const std::uint8_t> bytes) {
  return decode_le<std::uint32_t>(bytes);
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace semantify
