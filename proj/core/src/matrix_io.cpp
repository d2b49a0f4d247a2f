#include "stressorlens/matrix_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "stressorlens/error.hpp"

namespace stressorlens {
namespace {

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64(std::string_view in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  }
  return v;
}

std::uint32_t get_u32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  }
  return v;
}

constexpr std::size_t kHeaderSize = 24;

}  // namespace

std::string encode_matrix(const Matrix& m) {
  std::string out;
  out.reserve(kHeaderSize + m.data().size() * 8);
  out.append(kMatrixMagic, 4);
  put_u32(out, kMatrixFormatVersion);
  put_u64(out, m.rows());
  put_u64(out, m.cols());
  for (double v : m.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

Matrix decode_matrix(std::string_view bytes) {
  if (bytes.size() < kHeaderSize || std::memcmp(bytes.data(), kMatrixMagic, 4) != 0) {
    throw Error("matrix blob: bad magic");
  }
  if (get_u32(bytes, 4) != kMatrixFormatVersion) throw Error("matrix blob: unsupported version");
  const std::uint64_t rows = get_u64(bytes, 8);
  const std::uint64_t cols = get_u64(bytes, 16);
  if (cols != 0 && rows > (bytes.size() - kHeaderSize) / 8 / cols) {
    throw Error("matrix blob: truncated payload");
  }
  if (bytes.size() != kHeaderSize + rows * cols * 8) throw Error("matrix blob: size mismatch");
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.data().size(); ++i) {
    m.data()[i] = std::bit_cast<double>(get_u64(bytes, kHeaderSize + 8 * i));
  }
  return m;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

void write_matrix_file(const std::filesystem::path& path, const Matrix& m) {
  write_file(path, encode_matrix(m));
}

Matrix read_matrix_file(const std::filesystem::path& path) { return decode_matrix(read_file(path)); }

}  // namespace stressorlens
