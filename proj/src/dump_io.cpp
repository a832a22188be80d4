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
#include "attnseg/dump_io.hpp"

#include <array>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <sstream>
#include <tuple>

#include <json.hpp>
#include <openssl/evp.h>

#include "attnseg/error.hpp"

namespace attnseg {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string tensor_file(const char* kind, std::size_t r, std::size_t layer) {
  return std::string(kind) + "_r" + std::to_string(r) + "_l" +
         std::to_string(layer) + ".npy";
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingFile, "cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::kIo, "failed reading " + path.string());
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !out.write(text.data(), static_cast<std::streamsize>(text.size()))) {
    throw Error(ErrorCode::kIo, "cannot write " + path.string());
  }
}

[[noreturn]] void schema(const fs::path& where, const std::string& what) {
  throw Error(ErrorCode::kSchema, where.string() + ": " + what);
}

template <typename T>
T field(const ordered_json& j, const char* key, const fs::path& where) {
  const auto it = j.find(key);
  if (it == j.end()) schema(where, std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    schema(where, std::string("field '") + key + "' has the wrong type");
  }
}

const char* dtype_name(NpyDtype d) {
  return d == NpyDtype::kFloat32 ? "<f4" : "<f2";
}

}  // namespace

std::string manifest_json(const AttentionDump& dump, NpyDtype dtype) {
  const auto& m = dump.manifest;
  ordered_json j;
  j["format_version"] = m.format_version;
  j["model_id"] = m.model_id;
  j["prompt"] = m.prompt;
  j["class_prompt"] = m.class_prompt;
  j["image_height"] = m.image_height;
  j["image_width"] = m.image_width;
  j["flipped"] = m.flipped;
  j["layers_preaveraged"] = m.layers_preaveraged;

  auto& classes = j["classes"] = ordered_json::array();
  for (std::size_t c = 0; c < dump.token_map.classes.size(); ++c) {
    ordered_json e;
    e["name"] = dump.token_map.classes[c];
    e["token_begin"] = dump.token_map.spans.at(c).begin;
    e["token_end"] = dump.token_map.spans.at(c).end;
    classes.push_back(std::move(e));
  }

  auto& tensors = j["tensors"] = ordered_json::array();
  auto list = [&](const char* kind, std::size_t r,
                  const std::vector<Tensor>& layers) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      ordered_json e;
      e["kind"] = kind;
      e["resolution"] = r;
      e["layer"] = l;
      e["file"] = tensor_file(kind, r, l);
      e["dtype"] = dtype_name(dtype);
      e["shape"] = layers[l].shape();
      tensors.push_back(std::move(e));
    }
  };
  for (const auto& [r, s] : dump.cross) list("cross", r, s.layers);
  for (const auto& [r, s] : dump.self) list("self", r, s.layers);
  return j.dump(2) + "\n";
}

void write_dump(const AttentionDump& dump, const fs::path& dir, NpyDtype dtype) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error(ErrorCode::kIo, "cannot create dump directory " + dir.string());
  }
  for (const auto& [r, s] : dump.cross) {
    for (std::size_t l = 0; l < s.layers.size(); ++l) {
      write_npy(dir / tensor_file("cross", r, l), s.layers[l], dtype);
    }
  }
  for (const auto& [r, s] : dump.self) {
    for (std::size_t l = 0; l < s.layers.size(); ++l) {
      write_npy(dir / tensor_file("self", r, l), s.layers[l], dtype);
    }
  }
  write_text(dir / kManifestName, manifest_json(dump, dtype));
}

AttentionDump read_dump(const fs::path& dir, bool validate) {
  const fs::path manifest_path = dir / kManifestName;
  if (!fs::exists(manifest_path)) {
    throw Error(ErrorCode::kMissingFile, "no manifest at " + manifest_path.string());
  }
  ordered_json j;
  try {
    j = ordered_json::parse(read_text(manifest_path));
  } catch (const nlohmann::json::parse_error& e) {
    schema(manifest_path, std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) schema(manifest_path, "manifest must be an object");

  AttentionDump dump;
  auto& m = dump.manifest;
  m.format_version = field<int>(j, "format_version", manifest_path);
  if (m.format_version != 1) {
    throw Error(ErrorCode::kUnsupportedFormat,
                manifest_path.string() + ": unsupported format_version " +
                    std::to_string(m.format_version));
  }
  m.model_id = field<std::string>(j, "model_id", manifest_path);
  m.prompt = field<std::string>(j, "prompt", manifest_path);
  m.class_prompt = field<std::string>(j, "class_prompt", manifest_path);
  m.image_height = field<std::size_t>(j, "image_height", manifest_path);
  m.image_width = field<std::size_t>(j, "image_width", manifest_path);
  m.flipped = field<bool>(j, "flipped", manifest_path);
  m.layers_preaveraged = field<bool>(j, "layers_preaveraged", manifest_path);

  const auto classes = field<ordered_json>(j, "classes", manifest_path);
  if (!classes.is_array()) schema(manifest_path, "'classes' must be an array");
  for (const auto& c : classes) {
    dump.token_map.classes.push_back(field<std::string>(c, "name", manifest_path));
    dump.token_map.spans.push_back(
        {field<std::size_t>(c, "token_begin", manifest_path),
         field<std::size_t>(c, "token_end", manifest_path)});
  }

  const auto tensors = field<ordered_json>(j, "tensors", manifest_path);
  if (!tensors.is_array()) schema(manifest_path, "'tensors' must be an array");
  using Key = std::tuple<std::string, std::size_t, std::size_t>;
  std::map<Key, Tensor> loaded;
  for (const auto& t : tensors) {
    const auto kind = field<std::string>(t, "kind", manifest_path);
    if (kind != "cross" && kind != "self") {
      schema(manifest_path, "unknown tensor kind '" + kind + "'");
    }
    const auto r = field<std::size_t>(t, "resolution", manifest_path);
    const auto layer = field<std::size_t>(t, "layer", manifest_path);
    const auto file = field<std::string>(t, "file", manifest_path);
    const auto dtype = field<std::string>(t, "dtype", manifest_path);
    const auto shape = field<Shape>(t, "shape", manifest_path);
    if (file.empty() || fs::path(file).filename() != fs::path(file)) {
      schema(manifest_path, "tensor file '" + file + "' must be a bare file name");
    }
    const fs::path path = dir / file;
    const NpyHeader header = read_npy_header(path);
    if (dtype != dtype_name(header.dtype)) {
      schema(manifest_path, file + ": manifest dtype '" + dtype +
                                "' but file holds '" + dtype_name(header.dtype) +
                                "'");
    }
    if (header.shape != shape) {
      throw Error(ErrorCode::kShapeMismatch,
                  path.string() + ": manifest declares " + shape_to_string(shape) +
                      " but file header has " + shape_to_string(header.shape));
    }
    if (!loaded.emplace(Key{kind, r, layer}, read_npy(path)).second) {
      schema(manifest_path, "duplicate tensor entry " + kind + " r=" +
                                std::to_string(r) + " layer " +
                                std::to_string(layer));
    }
  }

  for (auto& [key, tensor] : loaded) {
    const auto& [kind, r, layer] = key;
    auto& layers = kind == "cross" ? dump.cross[r].layers : dump.self[r].layers;
    if (kind == "cross") {
      dump.cross[r].resolution = r;
    } else {
      dump.self[r].resolution = r;
    }
    if (layer != layers.size()) {
      schema(manifest_path, kind + " layers at r=" + std::to_string(r) +
                                " are not numbered 0..L-1");
    }
    layers.push_back(std::move(tensor));
  }

  if (validate) {
    if (const auto report = validate_dump(dump); !report.ok()) {
      throw Error(ErrorCode::kValidation,
                  dir.string() + " failed validation:\n" + report.to_string());
    }
  }
  return dump;
}

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(),
                 nullptr) != 1) {
    throw Error(ErrorCode::kIo, "sha256 computation failed");
  }
  std::ostringstream os;
  os << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < len; ++i) os << std::setw(2) << int{digest[i]};
  return os.str();
}

std::string file_sha256(const fs::path& path) {
  return sha256_hex(read_text(path));
}

namespace {

FusionWeights parse_weights_from(std::string_view json_text, const fs::path& where) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    schema(where, std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) schema(where, "weights must be a JSON object");

  FusionWeights w;
  auto levels = [&](const ordered_json& obj, LevelWeights& out, const char* name) {
    if (!obj.is_object()) schema(where, std::string("'") + name + "' must be an object");
    LevelWeights parsed;
    for (const auto& [key, value] : obj.items()) {
      if (key.empty() || key.find_first_not_of("0123456789") != std::string::npos) {
        schema(where, std::string(name) + ": resolution key '" + key +
                          "' is not an integer");
      }
      if (!value.is_number()) {
        schema(where, std::string(name) + ": weight at r=" + key + " is not a number");
      }
      parsed[std::stoull(key)] = value.get<double>();
    }
    out = std::move(parsed);
  };
  for (const auto& [key, value] : j.items()) {
    if (key == "cross") {
      levels(value, w.cross, "cross");
    } else if (key == "self") {
      levels(value, w.self, "self");
    } else if (key == "alpha") {
      if (!value.is_number()) schema(where, "'alpha' must be a number");
      w.alpha = value.get<double>();
    } else if (key == "norm") {
      const auto s = value.is_string() ? value.get<std::string>() : std::string();
      if (s == "per_resolution") {
        w.norm = NormPlacement::kPerResolution;
      } else if (s == "after_sum") {
        w.norm = NormPlacement::kAfterSum;
      } else {
        schema(where, "'norm' must be \"per_resolution\" or \"after_sum\"");
      }
    } else {
      schema(where, "unknown key '" + key + "'");
    }
  }
  return w;
}

}  // namespace

FusionWeights parse_weights(std::string_view json_text) {
  return parse_weights_from(json_text, "<weights>");
}

FusionWeights read_weights(const fs::path& path) {
  return parse_weights_from(read_text(path), path);
}

std::string weights_json(const FusionWeights& weights) {
  ordered_json j;
  auto levels = [](const LevelWeights& w) {
    ordered_json o = ordered_json::object();
    for (const auto& [r, v] : w) o[std::to_string(r)] = v;
    return o;
  };
  j["cross"] = levels(weights.cross);
  j["self"] = levels(weights.self);
  j["alpha"] = weights.alpha;
  j["norm"] = weights.norm == NormPlacement::kPerResolution ? "per_resolution"
                                                            : "after_sum";
  return j.dump(2) + "\n";
}

}  // namespace attnseg
