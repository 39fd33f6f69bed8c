#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace semantify {

using Bytes = std::vector<std::uint8_t>;

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

/// Reads every regular entry of a zip file. Supports stored and deflated
/// entries; directory entries are skipped.
std::map<std::string, Bytes> read_zip(const std::filesystem::path& path);

/// Writes a zip containing `entries` with the stored (uncompressed) method.
void write_zip(const std::filesystem::path& path, const std::map<std::string, Bytes>& entries);

// Little-endian array codecs.
void append_f32_le(Bytes& out, float value);
void append_f64_le(Bytes& out, double value);
void append_u32_le(Bytes& out, std::uint32_t value);
std::vector<float> decode_f32_le(std::span<const std::uint8_t> bytes);
std::vector<double> decode_f64_le(std::span<const std::uint8_t> bytes);
std::vector<std::uint32_t> decode_u32_le(std::span<const std::uint8_t> bytes);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

}  // namespace semantify
