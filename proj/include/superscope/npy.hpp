#pragma once

// NPY v1.0 reader/writer. Only little-endian float32 ('<f4') and uint8 ('|u1')
// payloads in C order are accepted; everything else is rejected up front.

#include "superscope/core.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace superscope::npy {

enum class Dtype { Float32, UInt8 };

struct Array {
  Dtype dtype = Dtype::Float32;
  std::vector<std::size_t> shape;
  std::vector<std::uint8_t> bytes;

  std::size_t element_count() const {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }
  std::size_t element_size() const { return dtype == Dtype::Float32 ? 4 : 1; }

  float f32(std::size_t i) const {
    float v;
    std::memcpy(&v, bytes.data() + 4 * i, 4);
    return v;
  }
};

static_assert(std::endian::native == std::endian::little, "NPY I/O assumes a little-endian host");

inline constexpr std::array<std::uint8_t, 6> kMagic = {0x93, 'N', 'U', 'M', 'P', 'Y'};

namespace detail {

inline std::string shape_text(const std::vector<std::size_t>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    s += std::to_string(shape[i]);
    if (shape.size() == 1 || i + 1 < shape.size()) s += ",";
    if (i + 1 < shape.size()) s += " ";
  }
  return s + ")";
}

inline std::string header_text(Dtype dtype, const std::vector<std::size_t>& shape) {
  std::string dict = "{'descr': '";
  dict += dtype == Dtype::Float32 ? "<f4" : "|u1";
  dict += "', 'fortran_order': False, 'shape': " + shape_text(shape) + ", }";
  // magic(6) + version(2) + header length(2) + dict + padding + '\n' is a multiple of 64
  const std::size_t unpadded = 10 + dict.size() + 1;
  const std::size_t padded = (unpadded + 63) / 64 * 64;
  dict.append(padded - unpadded, ' ');
  dict += '\n';
  return dict;
}

// Returns the value text following 'key': in a Python dict literal.
inline std::string dict_value(const std::string& header, const std::string& key) {
  const std::string needle = "'" + key + "'";
  auto pos = header.find(needle);
  if (pos == std::string::npos) fail(ErrorCode::BadFormat, "npy header lacks key " + key);
  pos = header.find(':', pos + needle.size());
  if (pos == std::string::npos) fail(ErrorCode::BadFormat, "npy header malformed at " + key);
  ++pos;
  while (pos < header.size() && header[pos] == ' ') ++pos;
  if (pos >= header.size()) fail(ErrorCode::BadFormat, "npy header truncated");
  if (header[pos] == '(') {
    auto end = header.find(')', pos);
    if (end == std::string::npos) fail(ErrorCode::BadFormat, "npy shape not closed");
    return header.substr(pos, end - pos + 1);
  }
  if (header[pos] == '\'' || header[pos] == '"') {
    const char q = header[pos];
    auto end = header.find(q, pos + 1);
    if (end == std::string::npos) fail(ErrorCode::BadFormat, "npy string not closed");
    return header.substr(pos + 1, end - pos - 1);
  }
  auto end = header.find_first_of(",}", pos);
  return header.substr(pos, end - pos);
}

inline std::vector<std::size_t> parse_shape(const std::string& text) {
  std::vector<std::size_t> shape;
  std::string inner = text.substr(1, text.size() - 2);
  std::stringstream ss(inner);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto first = item.find_first_not_of(' ');
    if (first == std::string::npos) continue;
    const auto last = item.find_last_not_of(' ');
    item = item.substr(first, last - first + 1);
    if (!item.empty() && item.back() == 'L') item.pop_back();
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      fail(ErrorCode::BadFormat, "npy shape entry '" + item + "' is not an integer");
    }
    if (used != item.size()) fail(ErrorCode::BadFormat, "npy shape entry '" + item + "' is not an integer");
    shape.push_back(static_cast<std::size_t>(v));
  }
  return shape;
}

}  // namespace detail

inline std::vector<std::uint8_t> encode(const Array& a) {
  if (a.bytes.size() != a.element_count() * a.element_size())
    fail(ErrorCode::ShapeMismatch, "payload does not match declared shape");
  const std::string header = detail::header_text(a.dtype, a.shape);
  std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
  out.push_back(1);
  out.push_back(0);
  const auto len = static_cast<std::uint16_t>(header.size());
  out.push_back(static_cast<std::uint8_t>(len & 0xFF));
  out.push_back(static_cast<std::uint8_t>(len >> 8));
  out.insert(out.end(), header.begin(), header.end());
  out.insert(out.end(), a.bytes.begin(), a.bytes.end());
  return out;
}

inline Array decode(std::span<const std::uint8_t> buf) {
  if (buf.size() < 10 || !std::equal(kMagic.begin(), kMagic.end(), buf.begin()))
    fail(ErrorCode::BadMagic, "missing \\x93NUMPY signature");
  if (buf[6] != 1 || buf[7] != 0)
    fail(ErrorCode::UnsupportedDtype,
         "only NPY version 1.0 is supported (got " + std::to_string(buf[6]) + "." + std::to_string(buf[7]) + ")");
  const std::size_t header_len = static_cast<std::size_t>(buf[8]) | (static_cast<std::size_t>(buf[9]) << 8);
  if (buf.size() < 10 + header_len) fail(ErrorCode::BadFormat, "npy header truncated");
  const std::string header(reinterpret_cast<const char*>(buf.data()) + 10, header_len);

  Array a;
  const std::string descr = detail::dict_value(header, "descr");
  if (descr == "<f4") {
    a.dtype = Dtype::Float32;
  } else if (descr == "|u1" || descr == "<u1" || descr == "u1") {
    a.dtype = Dtype::UInt8;
  } else {
    fail(ErrorCode::UnsupportedDtype, "dtype '" + descr + "' (expected <f4 or |u1)");
  }
  const std::string fortran = detail::dict_value(header, "fortran_order");
  if (fortran.find("False") == std::string::npos)
    fail(ErrorCode::UnsupportedDtype, "fortran_order arrays are not supported");
  a.shape = detail::parse_shape(detail::dict_value(header, "shape"));

  const std::size_t payload = buf.size() - 10 - header_len;
  const std::size_t expected = a.element_count() * a.element_size();
  if (payload != expected)
    fail(ErrorCode::ShapeMismatch, "header declares " + std::to_string(expected) + " payload bytes, file has " +
                                       std::to_string(payload));
  a.bytes.assign(buf.begin() + static_cast<std::ptrdiff_t>(10 + header_len), buf.end());
  return a;
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

/// Writes to a sibling temp file and renames, so readers never see a partial file.
inline void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoFailure, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) fail(ErrorCode::IoFailure, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorCode::IoFailure, "rename to " + path.string() + ": " + ec.message());
}

inline Array read(const std::filesystem::path& path) { return decode(read_file(path)); }

inline void write(const std::filesystem::path& path, const Array& a) { write_file_atomic(path, encode(a)); }

/// Loads a 1-D or 2-D float32/uint8 array as a double matrix (1-D becomes a column).
inline RowMatrix load_matrix(const std::filesystem::path& path) {
  const Array a = read(path);
  if (a.shape.empty() || a.shape.size() > 2)
    fail(ErrorCode::ShapeMismatch, path.string() + ": expected a 1-D or 2-D array");
  const auto rows = static_cast<Eigen::Index>(a.shape[0]);
  const auto cols = static_cast<Eigen::Index>(a.shape.size() == 2 ? a.shape[1] : 1);
  RowMatrix m(rows, cols);
  for (std::size_t i = 0; i < a.element_count(); ++i)
    m.data()[i] = a.dtype == Dtype::Float32 ? static_cast<double>(a.f32(i)) : static_cast<double>(a.bytes[i]);
  return m;
}

inline Array from_matrix(const RowMatrix& m) {
  Array a;
  a.dtype = Dtype::Float32;
  a.shape = {static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())};
  a.bytes.resize(a.element_count() * 4);
  for (std::size_t i = 0; i < a.element_count(); ++i) {
    const float v = static_cast<float>(m.data()[i]);
    std::memcpy(a.bytes.data() + 4 * i, &v, 4);
  }
  return a;
}

/// Saves as float32; values representable in float32 round-trip exactly.
inline void save_matrix(const std::filesystem::path& path, const RowMatrix& m) { write(path, from_matrix(m)); }

inline void save_vector(const std::filesystem::path& path, const std::vector<double>& v) {
  Array a;
  a.dtype = Dtype::Float32;
  a.shape = {v.size()};
  a.bytes.resize(v.size() * 4);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const float f = static_cast<float>(v[i]);
    std::memcpy(a.bytes.data() + 4 * i, &f, 4);
  }
  write(path, a);
}

}  // namespace superscope::npy
