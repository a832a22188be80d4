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

// Dump directory layout:
//
//   manifest.json            geometry, prompts, class spans, tensor index
//   cross_r{R}_l{N}.npy      (R, R, T) cross-attention, layer N
//   self_r{R}_l{N}.npy       (R, R, R, R) self-attention, layer N

#include <filesystem>
#include <string>
#include <string_view>

#include "attnseg/model.hpp"
#include "attnseg/npy.hpp"

namespace attnseg {

inline constexpr std::string_view kManifestName = "manifest.json";

/// Loads a dump directory. Errors: kMissingFile, kIo, kShapeMismatch (header
/// vs manifest), kUnsupportedFormat, kSchema, and kValidation when `validate`
/// is set and the loaded dump violates an invariant.
AttentionDump read_dump(const std::filesystem::path& dir, bool validate = true);

/// Writes manifest and tensors; identical dumps give identical bytes.
void write_dump(const AttentionDump& dump, const std::filesystem::path& dir,
                NpyDtype dtype = NpyDtype::kFloat32);

std::string manifest_json(const AttentionDump& dump, NpyDtype dtype);

std::string sha256_hex(std::string_view bytes);
std::string file_sha256(const std::filesystem::path& path);

/// JSON form: {"cross": {"8": w, ...}, "self": {...}, "alpha": a,
/// "norm": "per_resolution" | "after_sum"}. Omitted keys keep defaults.
FusionWeights read_weights(const std::filesystem::path& path);
FusionWeights parse_weights(std::string_view json_text);
std::string weights_json(const FusionWeights& weights);

}  // namespace attnseg
