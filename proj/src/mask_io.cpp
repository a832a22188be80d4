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
#include "attnseg/mask_io.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "attnseg/error.hpp"

namespace attnseg {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kMaxSide = 1u << 16;

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingFile, "cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void spill(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()))) {
    throw Error(ErrorCode::kIo, "cannot write " + path.string());
  }
}

// Reads one header integer, skipping whitespace and '#' comments.
std::size_t header_number(const std::string& b, std::size_t& pos,
                          const std::string& origin, const char* what) {
  for (;;) {
    while (pos < b.size() && std::isspace(static_cast<unsigned char>(b[pos]))) ++pos;
    if (pos < b.size() && b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  if (pos >= b.size()) {
    throw Error(ErrorCode::kIo, origin + ": truncated PGM header");
  }
  std::size_t value = 0, digits = 0;
  while (pos < b.size() && std::isdigit(static_cast<unsigned char>(b[pos]))) {
    if (++digits > 9) {
      throw Error(ErrorCode::kUnsupportedFormat,
                  origin + ": PGM " + what + " overflows");
    }
    value = value * 10 + static_cast<std::size_t>(b[pos++] - '0');
  }
  if (digits == 0) {
    throw Error(ErrorCode::kUnsupportedFormat,
                origin + ": malformed PGM " + what);
  }
  return value;
}

}  // namespace

fs::path legend_path(const fs::path& mask_path) {
  fs::path p = mask_path;
  p += ".legend.json";
  return p;
}

std::string encode_pgm(const LabelMask& mask) {
  if (mask.rows == 0 || mask.cols == 0 ||
      mask.labels.size() != mask.rows * mask.cols) {
    throw Error(ErrorCode::kInvalidArgument, "mask geometry is inconsistent");
  }
  std::string out = "P5\n" + std::to_string(mask.cols) + " " +
                    std::to_string(mask.rows) + "\n255\n";
  out.reserve(out.size() + mask.labels.size());
  for (std::int32_t v : mask.labels) {
    if (v < 0 || v > 255) {
      throw Error(ErrorCode::kInvalidArgument,
                  "label " + std::to_string(v) + " does not fit in a PGM byte");
    }
    out.push_back(static_cast<char>(v));
  }
  return out;
}

LabelMask decode_pgm(const std::string& bytes, const std::string& origin) {
  if (bytes.size() < 2 || bytes[0] != 'P') {
    throw Error(ErrorCode::kUnsupportedFormat, origin + ": not a PGM file");
  }
  if (bytes[1] != '5') {
    throw Error(ErrorCode::kUnsupportedFormat,
                origin + ": only binary P5 PGM is supported, found P" +
                    std::string(1, bytes[1]));
  }
  std::size_t pos = 2;
  const std::size_t cols = header_number(bytes, pos, origin, "width");
  const std::size_t rows = header_number(bytes, pos, origin, "height");
  const std::size_t maxval = header_number(bytes, pos, origin, "maxval");
  if (cols == 0 || rows == 0 || cols > kMaxSide || rows > kMaxSide) {
    throw Error(ErrorCode::kUnsupportedFormat,
                origin + ": PGM dimensions " + std::to_string(cols) + "x" +
                    std::to_string(rows) + " out of range");
  }
  if (maxval != 255) {
    throw Error(ErrorCode::kUnsupportedFormat,
                origin + ": maxval must be 255, found " + std::to_string(maxval));
  }
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw Error(ErrorCode::kIo, origin + ": truncated PGM header");
  }
  ++pos;
  if (bytes.size() - pos != rows * cols) {
    throw Error(ErrorCode::kIo,
                origin + ": expected " + std::to_string(rows * cols) +
                    " payload bytes, found " + std::to_string(bytes.size() - pos));
  }
  LabelMask mask;
  mask.rows = rows;
  mask.cols = cols;
  mask.labels.resize(rows * cols);
  for (std::size_t i = 0; i < rows * cols; ++i) {
    mask.labels[i] = static_cast<unsigned char>(bytes[pos + i]);
  }
  return mask;
}

void write_mask(const LabelMask& mask, const fs::path& path) {
  spill(path, encode_pgm(mask));
  if (mask.legend.empty()) return;
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  auto& labels = j["labels"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < mask.legend.size(); ++i) {
    nlohmann::ordered_json e;
    e["index"] = i;
    e["name"] = mask.legend[i];
    labels.push_back(std::move(e));
  }
  spill(legend_path(path), j.dump(2) + "\n");
}

LabelMask read_mask(const fs::path& path) {
  LabelMask mask = decode_pgm(slurp(path), path.string());
  const fs::path sidecar = legend_path(path);
  if (!fs::exists(sidecar)) return mask;
  try {
    const auto j = nlohmann::json::parse(slurp(sidecar));
    const auto& labels = j.at("labels");
    mask.legend.resize(labels.size());
    for (const auto& e : labels) {
      const auto index = e.at("index").get<std::size_t>();
      if (index >= labels.size()) {
        throw Error(ErrorCode::kSchema,
                    sidecar.string() + ": legend index out of range");
      }
      mask.legend[index] = e.at("name").get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchema, sidecar.string() + ": " + e.what());
  }
  return mask;
}

}  // namespace attnseg
