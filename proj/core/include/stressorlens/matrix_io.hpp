#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "stressorlens/matrix.hpp"

namespace stressorlens {

// Named artifact blobs, written and hashed together by the snapshot store.
using FileSet = std::map<std::string, std::string>;

// Binary matrix layout, all fields little-endian:
//   bytes 0..3   magic "SLMX"
//   bytes 4..7   u32 format version (1)
//   bytes 8..15  u64 rows
//   bytes 16..23 u64 cols
//   then rows*cols IEEE-754 binary64 values, row-major.
inline constexpr char kMatrixMagic[4] = {'S', 'L', 'M', 'X'};
inline constexpr std::uint32_t kMatrixFormatVersion = 1;

std::string encode_matrix(const Matrix& m);
Matrix decode_matrix(std::string_view bytes);  // throws Error on malformed input

void write_matrix_file(const std::filesystem::path& path, const Matrix& m);
Matrix read_matrix_file(const std::filesystem::path& path);

// Whole-file helpers shared by the persistence code.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace stressorlens
