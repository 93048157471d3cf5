#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace adgen::io {

// Whole-file read; throws ValidationError naming the path when missing.
std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

// 64-bit FNV-1a, rendered as 16 lowercase hex digits by hex64().
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 1469598103934665603ULL);
std::string hex64(std::uint64_t value);

}  // namespace adgen::io
