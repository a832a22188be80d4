/**
 * Copyright 2026 The attnseg Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "attnseg/npy.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <regex>
#include <sstream>
#include <vector>

#include "attnseg/error.hpp"

namespace attnseg {

namespace {

constexpr char kMagic[] = "\x93NUMPY";
constexpr std::size_t kMagicLen = 6;
constexpr std::size_t kAlign = 64;

[[noreturn]] void unsupported(const std::filesystem::path& path,
                              const std::string& what) {
  throw Error(ErrorCode::kUnsupportedFormat, path.string() + ": " + what);
}

std::size_t item_size(NpyDtype d) { return d == NpyDtype::kFloat32 ? 4 : 2; }

Shape parse_shape(const std::filesystem::path& path, const std::string& text) {
  Shape shape;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    const auto e = item.find_last_not_of(" \tL");
    const std::string digits = item.substr(b, e - b + 1);
    if (digits.empty() ||
        digits.find_first_not_of("0123456789") != std::string::npos) {
      unsupported(path, "malformed shape entry '" + item + "'");
    }
    shape.push_back(std::stoull(digits));
  }
  return shape;
}

std::string header_dict(NpyDtype dtype, const Shape& shape) {
  std::ostringstream os;
  os << "{'descr': '" << (dtype == NpyDtype::kFloat32 ? "<f4" : "<f2")
     << "', 'fortran_order': False, 'shape': (";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  if (shape.size() == 1) os << ',';
  os << "), }";
  return os.str();
}

}  // namespace

std::uint16_t float_to_half(float value) {
  const std::uint32_t x = std::bit_cast<std::uint32_t>(value);
  const std::uint16_t sign = static_cast<std::uint16_t>((x >> 16) & 0x8000u);
  const std::uint32_t abs = x & 0x7fffffffu;
  if (abs >= 0x7f800000u) {
    return sign | 0x7c00u | (abs > 0x7f800000u ? 0x0200u : 0u);
  }
  if (abs >= 0x477ff000u) return sign | 0x7c00u;  // rounds to infinity
  if (abs < 0x38800000u) {
    // Subnormal half; scaling by 2^24 is exact and nearbyint rounds to even.
    const float scaled = std::bit_cast<float>(abs) * 16777216.0f;
    return sign | static_cast<std::uint16_t>(std::nearbyint(scaled));
  }
  const std::uint32_t exponent = (abs >> 23) - 127 + 15;
  const std::uint32_t mantissa = abs & 0x7fffffu;
  std::uint32_t h = (exponent << 10) | (mantissa >> 13);
  const std::uint32_t rest = mantissa & 0x1fffu;
  if (rest > 0x1000u || (rest == 0x1000u && (h & 1u))) ++h;
  return sign | static_cast<std::uint16_t>(h);
}

float half_to_float(std::uint16_t bits) {
  const std::uint32_t sign = static_cast<std::uint32_t>(bits & 0x8000u) << 16;
  const std::uint32_t exponent = (bits >> 10) & 0x1fu;
  const std::uint32_t mantissa = bits & 0x3ffu;
  if (exponent == 0) {
    const float v = std::ldexp(static_cast<float>(mantissa), -24);
    return sign ? -v : v;
  }
  if (exponent == 31) {
    return std::bit_cast<float>(sign | 0x7f800000u | (mantissa << 13));
  }
  return std::bit_cast<float>(sign | ((exponent - 15 + 127) << 23) |
                              (mantissa << 13));
}

NpyHeader read_npy_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kMissingFile, "cannot open tensor file " + path.string());
  }
  unsigned char pre[10];
  if (!in.read(reinterpret_cast<char*>(pre), sizeof pre)) {
    throw Error(ErrorCode::kIo, "truncated tensor header in " + path.string());
  }
  if (std::memcmp(pre, kMagic, kMagicLen) != 0) {
    unsupported(path, "not an NPY file");
  }
  if (pre[6] != 1 || pre[7] != 0) {
    unsupported(path, "unsupported NPY version " + std::to_string(pre[6]) +
                          "." + std::to_string(pre[7]));
  }
  const std::size_t header_len = pre[8] | (std::size_t{pre[9]} << 8);
  std::string dict(header_len, '\0');
  if (!in.read(dict.data(), static_cast<std::streamsize>(header_len))) {
    throw Error(ErrorCode::kIo, "truncated tensor header in " + path.string());
  }

  static const std::regex descr_re(R"('descr'\s*:\s*'([^']*)')");
  static const std::regex order_re(R"('fortran_order'\s*:\s*(True|False))");
  static const std::regex shape_re(R"('shape'\s*:\s*\(([^)]*)\))");
  std::smatch m;
  NpyHeader header;
  if (!std::regex_search(dict, m, descr_re)) unsupported(path, "missing descr");
  if (m[1] == "<f4") {
    header.dtype = NpyDtype::kFloat32;
  } else if (m[1] == "<f2") {
    header.dtype = NpyDtype::kFloat16;
  } else {
    unsupported(path, "unsupported dtype '" + m[1].str() + "'");
  }
  if (!std::regex_search(dict, m, order_re)) {
    unsupported(path, "missing fortran_order");
  }
  if (m[1] == "True") unsupported(path, "Fortran-order arrays are not supported");
  if (!std::regex_search(dict, m, shape_re)) unsupported(path, "missing shape");
  header.shape = parse_shape(path, m[1].str());
  header.data_offset = sizeof pre + header_len;
  return header;
}

Tensor read_npy(const std::filesystem::path& path) {
  const NpyHeader header = read_npy_header(path);
  const std::size_t count = shape_elements(header.shape);
  const std::size_t bytes = count * item_size(header.dtype);

  std::error_code ec;
  const auto file_size = std::filesystem::file_size(path, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot stat " + path.string());
  if (file_size < header.data_offset + bytes) {
    throw Error(ErrorCode::kIo,
                "truncated tensor file " + path.string() + ": expected " +
                    std::to_string(header.data_offset + bytes) + " bytes, found " +
                    std::to_string(file_size));
  }
  if (file_size > header.data_offset + bytes) {
    unsupported(path, "trailing bytes after tensor payload");
  }

  std::ifstream in(path, std::ios::binary);
  in.seekg(static_cast<std::streamoff>(header.data_offset));
  std::vector<unsigned char> raw(bytes);
  if (!in.read(reinterpret_cast<char*>(raw.data()),
               static_cast<std::streamsize>(bytes))) {
    throw Error(ErrorCode::kIo, "failed reading " + path.string());
  }

  std::vector<float> values(count);
  if (header.dtype == NpyDtype::kFloat32) {
    for (std::size_t i = 0; i < count; ++i) {
      const unsigned char* b = raw.data() + 4 * i;
      const std::uint32_t u = b[0] | (std::uint32_t{b[1]} << 8) |
                              (std::uint32_t{b[2]} << 16) |
                              (std::uint32_t{b[3]} << 24);
      values[i] = std::bit_cast<float>(u);
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      const unsigned char* b = raw.data() + 2 * i;
      values[i] = half_to_float(static_cast<std::uint16_t>(b[0] | (b[1] << 8)));
    }
  }
  return Tensor(header.shape, std::move(values));
}

void write_npy(const std::filesystem::path& path, const Tensor& tensor,
               NpyDtype dtype) {
  std::string dict = header_dict(dtype, tensor.shape());
  const std::size_t unpadded = 10 + dict.size() + 1;
  dict.append((kAlign - unpadded % kAlign) % kAlign, ' ');
  dict.push_back('\n');
  if (dict.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw Error(ErrorCode::kInvalidArgument, "tensor rank too large for NPY v1.0");
  }

  std::string out(kMagic, kMagicLen);
  out.push_back('\x01');
  out.push_back('\x00');
  out.push_back(static_cast<char>(dict.size() & 0xff));
  out.push_back(static_cast<char>(dict.size() >> 8));
  out += dict;

  const std::size_t header_size = out.size();
  out.resize(header_size + tensor.size() * item_size(dtype));
  char* dst = out.data() + header_size;
  for (std::size_t i = 0; i < tensor.size(); ++i) {
    if (dtype == NpyDtype::kFloat32) {
      const auto u = std::bit_cast<std::uint32_t>(tensor[i]);
      for (int b = 0; b < 4; ++b) *dst++ = static_cast<char>((u >> (8 * b)) & 0xff);
    } else {
      const std::uint16_t h = float_to_half(tensor[i]);
      *dst++ = static_cast<char>(h & 0xff);
      *dst++ = static_cast<char>(h >> 8);
    }
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f || !f.write(out.data(), static_cast<std::streamsize>(out.size()))) {
    throw Error(ErrorCode::kIo, "cannot write tensor file " + path.string());
  }
}

}  // namespace attnseg
