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

// Label masks are binary PGM (P5, maxval 255); the pixel value is the label.
// The legend lives next to the image in "<mask path>.legend.json".

#include <filesystem>
#include <string>

#include "attnseg/model.hpp"

namespace attnseg {

std::filesystem::path legend_path(const std::filesystem::path& mask_path);

/// Writes the PGM and, when the mask has a legend, its sidecar.
void write_mask(const LabelMask& mask, const std::filesystem::path& path);

/// Exact inverse of write_mask. A missing sidecar yields an empty legend.
LabelMask read_mask(const std::filesystem::path& path);

std::string encode_pgm(const LabelMask& mask);
LabelMask decode_pgm(const std::string& bytes, const std::string& origin);

}  // namespace attnseg
