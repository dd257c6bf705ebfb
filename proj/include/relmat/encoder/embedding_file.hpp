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

#include <cstdint>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "relmat/error.hpp"
#include "relmat/numerics/checkpoint.hpp"

namespace relmat {

// Frozen per-entity vectors produced offline by a contextual encoder.
//   "ROREMB01" | u64 LE header length | JSON header | f32 LE rows
// Header: {"dim": d, "docs": [{"doc_id", "n_entities", "offset"}]} with
// offsets in bytes from the payload start.
inline constexpr char kEmbeddingMagic[] = "ROREMB01";

struct DocEmbeddings {
  std::size_t n_entities = 0;
  std::vector<float> rows;  // n_entities x dim
};

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return docs_.size(); }

  void add(const std::string& doc_id, std::size_t n_entities, std::vector<float> rows) {
    if (rows.size() != n_entities * dim_) {
      throw DataError("embedding rows for '" + doc_id + "' do not match n_entities x dim");
    }
    if (!docs_.count(doc_id)) order_.push_back(doc_id);
    docs_[doc_id] = {n_entities, std::move(rows)};
  }

  const DocEmbeddings& at(const std::string& doc_id) const {
    auto it = docs_.find(doc_id);
    if (it == docs_.end()) throw DataError("embedding file has no entry for doc '" + doc_id + "'");
    return it->second;
  }

  bool contains(const std::string& doc_id) const { return docs_.count(doc_id) > 0; }

  // Ids in insertion (file) order.
  const std::vector<std::string>& order() const { return order_; }

 private:
  std::size_t dim_ = 0;
  std::map<std::string, DocEmbeddings> docs_;
  std::vector<std::string> order_;
};

inline EmbeddingTable parse_embedding_file(const std::string& bytes) {
  if (bytes.size() < 16 || bytes.compare(0, 8, kEmbeddingMagic) != 0) {
    throw DataError("not an embedding file (bad magic)");
  }
  const auto hlen = detail::read_le<std::uint64_t>(bytes.data() + 8);
  if (hlen > bytes.size() - 16) throw DataError("embedding header length out of range");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(16, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("corrupt embedding header: ") + e.what());
  }
  const std::size_t base = 16 + hlen;
  try {
    EmbeddingTable table(header.at("dim").get<std::size_t>());
    for (const auto& d : header.at("docs")) {
      const auto id = d.at("doc_id").get<std::string>();
      const auto n = d.at("n_entities").get<std::size_t>();
      const auto off = d.at("offset").get<std::size_t>();
      const std::size_t count = n * table.dim();
      if (base + off + 4 * count > bytes.size()) {
        throw DataError("embedding rows for '" + id + "' overrun the file");
      }
      std::vector<float> rows(count);
      for (std::size_t i = 0; i < count; ++i) {
        rows[i] = detail::read_le<float>(bytes.data() + base + off + 4 * i);
      }
      table.add(id, n, std::move(rows));
    }
    return table;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed embedding header: ") + e.what());
  }
}

inline EmbeddingTable read_embedding_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open embedding file '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_embedding_file(bytes);
}

inline void write_embedding_file(const std::string& path, const EmbeddingTable& table) {
  nlohmann::json docs = nlohmann::json::array();
  std::string payload;
  for (const auto& id : table.order()) {
    const auto& d = table.at(id);
    docs.push_back({{"doc_id", id}, {"n_entities", d.n_entities}, {"offset", payload.size()}});
    for (float v : d.rows) detail::append_le(payload, v);
  }
  const std::string hdr = nlohmann::json{{"dim", table.dim()}, {"docs", docs}}.dump();
  std::string out(kEmbeddingMagic, 8);
  detail::append_le(out, static_cast<std::uint64_t>(hdr.size()));
  out += hdr;
  out += payload;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write embedding file '" + path + "'");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

}  // namespace relmat
