#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace nda {

/// Write to "<path>.tmp" then rename over path.
void write_file_atomic(const std::filesystem::path &path, std::string_view contents);
void write_file_atomic(const std::filesystem::path &path, const std::vector<std::uint8_t> &bytes);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path &path);
std::string read_file_text(const std::filesystem::path &path);

/// 64-bit FNV-1a, rendered as 16 lowercase hex digits by checksum_hex.
std::uint64_t fnv1a64(std::string_view bytes);
std::string checksum_hex(std::string_view bytes);

} // namespace nda
