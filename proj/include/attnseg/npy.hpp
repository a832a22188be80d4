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
#pragma once

// NPY v1.0 single-tensor files: little-endian float32 ("<f4") or float16
// ("<f2"), C order. Anything else is rejected with kUnsupportedFormat.

#include <cstdint>
#include <filesystem>
#include <string>

#include "attnseg/tensor.hpp"

namespace attnseg {

enum class NpyDtype { kFloat32, kFloat16 };

struct NpyHeader {
  NpyDtype dtype = NpyDtype::kFloat32;
  Shape shape;
  std::size_t data_offset = 0;
};

/// Parses the header only. Throws kMissingFile, kIo or kUnsupportedFormat.
NpyHeader read_npy_header(const std::filesystem::path& path);

/// Loads the tensor; float16 payloads are widened to float32.
Tensor read_npy(const std::filesystem::path& path);

/// Writes a byte-deterministic file. Throws kIo when the path is unwritable.
void write_npy(const std::filesystem::path& path, const Tensor& tensor,
               NpyDtype dtype = NpyDtype::kFloat32);

std::uint16_t float_to_half(float value);
float half_to_float(std::uint16_t bits);

}  // namespace attnseg
