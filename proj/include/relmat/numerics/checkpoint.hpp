// Copyright 2026 The relmat Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <json.hpp>

#include "relmat/error.hpp"
#include "relmat/numerics/nn.hpp"

namespace relmat {

// Checkpoint layout:
//   "RORCKPT1" | u64 LE header length | JSON header | tensor payloads (LE)
// The header maps each parameter name to {"shape", "dtype", "offset", "nbytes"}
// (offset relative to the payload start); "__metadata__" carries model
// config and vocabulary.
inline constexpr char kCheckpointMagic[] = "RORCKPT1";

enum class StorageType { f64, f32 };

struct Checkpoint {
  ParamStore params;
  nlohmann::json metadata;
};

namespace detail {

template <typename T>
void append_le(std::string& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(std::begin(bytes), std::end(bytes));
  }
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(const char* p) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(std::begin(bytes), std::end(bytes));
  }
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

}  // namespace detail

inline std::string serialize_checkpoint(const ParamStore& params,
                                        const nlohmann::json& metadata,
                                        StorageType dtype = StorageType::f64) {
  nlohmann::json header = nlohmann::json::object();
  header["__metadata__"] = metadata;
  std::string payload;
  const std::size_t width = dtype == StorageType::f64 ? 8 : 4;
  for (const auto& [name, t] : params) {
    header[name] = {{"shape", t.shape()},
                    {"dtype", dtype == StorageType::f64 ? "f64" : "f32"},
                    {"offset", payload.size()},
                    {"nbytes", t.numel() * width}};
    for (double v : t.data()) {
      if (dtype == StorageType::f64) {
        detail::append_le(payload, v);
      } else {
        detail::append_le(payload, static_cast<float>(v));
      }
    }
  }
  const std::string hdr = header.dump();
  std::string out(kCheckpointMagic, 8);
  detail::append_le(out, static_cast<std::uint64_t>(hdr.size()));
  out += hdr;
  out += payload;
  return out;
}

inline Checkpoint deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < 16 || bytes.compare(0, 8, kCheckpointMagic) != 0) {
    throw DataError("not a checkpoint (bad magic)");
  }
  const auto hlen = detail::read_le<std::uint64_t>(bytes.data() + 8);
  if (hlen > bytes.size() - 16) throw DataError("checkpoint header length out of range");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(16, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("corrupt checkpoint header: ") + e.what());
  }
  const std::size_t base = 16 + hlen;
  Checkpoint ck;
  for (auto it = header.begin(); it != header.end(); ++it) {
    if (it.key() == "__metadata__") {
      ck.metadata = it.value();
      continue;
    }
    const auto& e = it.value();
    const auto shape = e.at("shape").get<Shape>();
    const auto dtype = e.at("dtype").get<std::string>();
    const auto offset = e.at("offset").get<std::size_t>();
    const std::size_t n = shape_numel(shape);
    const std::size_t width = dtype == "f64" ? 8 : dtype == "f32" ? 4 : 0;
    if (width == 0) throw DataError("unsupported checkpoint dtype '" + dtype + "'");
    if (base + offset + n * width > bytes.size()) {
      throw DataError("checkpoint tensor '" + it.key() + "' overruns the file");
    }
    std::vector<double> v(n);
    const char* p = bytes.data() + base + offset;
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = width == 8 ? detail::read_le<double>(p + 8 * i)
                        : static_cast<double>(detail::read_le<float>(p + 4 * i));
    }
    ck.params.add(it.key(), Tensor(shape, std::move(v), true));
  }
  return ck;
}

inline void save_checkpoint(const std::string& path, const ParamStore& params,
                            const nlohmann::json& metadata,
                            StorageType dtype = StorageType::f64) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint '" + path + "'");
  const auto bytes = serialize_checkpoint(params, metadata, dtype);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for checkpoint '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace relmat
