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

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "relmat/corpus/schema.hpp"
#include "relmat/error.hpp"

namespace relmat {

// 0 is NO_RELATION; relation type r has label r + 1.
using Label = int;
inline constexpr Label kNoRelation = 0;

inline Label label_of_relation(std::size_t r) { return static_cast<Label>(r) + 1; }
inline std::size_t relation_of_label(Label l) { return static_cast<std::size_t>(l - 1); }

struct Entity {
  std::size_t id = 0;
  std::size_t start = 0;  // token span [start, end)
  std::size_t end = 0;
  int etype = 0;          // index into TypeSchema::entity_types()

  std::size_t length() const { return end - start; }
  bool operator==(const Entity&) const = default;
};

/// Square M x M grid of labels, row-major.
class RelationMatrix {
 public:
  RelationMatrix() = default;
  explicit RelationMatrix(std::size_t m) : m_(m), cells_(m * m, kNoRelation) {}

  std::size_t size() const { return m_; }
  Label operator()(std::size_t i, std::size_t j) const { return cells_[i * m_ + j]; }
  Label& operator()(std::size_t i, std::size_t j) { return cells_[i * m_ + j]; }
  Label at(std::size_t i, std::size_t j) const {
    if (i >= m_ || j >= m_) throw DataError("relation matrix index out of range");
    return cells_[i * m_ + j];
  }
  const std::vector<Label>& cells() const { return cells_; }

  std::size_t count_positive(bool include_diagonal = false) const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t j = 0; j < m_; ++j) {
        if ((i != j || include_diagonal) && (*this)(i, j) != kNoRelation) ++n;
      }
    }
    return n;
  }

  bool operator==(const RelationMatrix&) const = default;

 private:
  std::size_t m_ = 0;
  std::vector<Label> cells_;
};

struct Document {
  std::string doc_id;
  std::vector<std::string> tokens;
  std::vector<Entity> entities;
  RelationMatrix gold;

  std::size_t num_entities() const { return entities.size(); }
  bool operator==(const Document&) const = default;
};

struct Corpus {
  TypeSchema schema;
  std::vector<Document> documents;

  std::size_t size() const { return documents.size(); }
  bool empty() const { return documents.empty(); }
};

/// All ordered entity pairs (i, j) in row-major order.
inline std::vector<std::pair<std::size_t, std::size_t>> relation_pairs(std::size_t m,
                                                                      bool include_diagonal) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(include_diagonal ? m * m : m * (m > 0 ? m - 1 : 0));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (i != j || include_diagonal) out.emplace_back(i, j);
    }
  }
  return out;
}

inline std::vector<std::pair<std::size_t, std::size_t>> relation_pairs(
    const Document& doc, bool include_diagonal) {
  return relation_pairs(doc.num_entities(), include_diagonal);
}

/// Checks every positive cell against the schema's argument types and
/// returns the number of violating cells.
inline std::size_t count_schema_violations(const Document& doc, const TypeSchema& schema) {
  std::size_t bad = 0;
  const std::size_t m = doc.num_entities();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const Label l = doc.gold(i, j);
      if (l == kNoRelation) continue;
      const std::size_t r = relation_of_label(l);
      if (!schema.allows(r, 0, doc.entities[i].etype) ||
          !schema.allows(r, 1, doc.entities[j].etype)) {
        ++bad;
      }
    }
  }
  return bad;
}

}  // namespace relmat
