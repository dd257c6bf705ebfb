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

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "relmat/error.hpp"

namespace relmat {

// Bit i set <=> entity type i is allowed.
using TypeMask = std::uint64_t;

struct RelationType {
  std::string name;
  bool symmetric = false;
  // Allowed entity types for arg0 / arg1.
  std::array<TypeMask, 2> arg_types{0, 0};
};

/// Entity types, relation types and the per-role valid argument types.
///
/// Relations are addressed by index 0..K-1; the label of relation r inside a
/// RelationMatrix is r + 1 (label 0 is NO_RELATION).
class TypeSchema {
 public:
  static constexpr std::size_t kMaxEntityTypes = 64;

  TypeSchema() = default;
  TypeSchema(std::vector<std::string> entity_types,
             std::vector<RelationType> relations)
      : entity_types_(std::move(entity_types)), relations_(std::move(relations)) {
    validate();
  }

  const std::vector<std::string>& entity_types() const { return entity_types_; }
  const std::vector<RelationType>& relations() const { return relations_; }
  std::size_t num_entity_types() const { return entity_types_.size(); }
  std::size_t num_relations() const { return relations_.size(); }
  const RelationType& relation(std::size_t r) const { return relations_.at(r); }

  std::optional<int> entity_type_index(const std::string& name) const {
    for (std::size_t i = 0; i < entity_types_.size(); ++i) {
      if (entity_types_[i] == name) return static_cast<int>(i);
    }
    return std::nullopt;
  }

  std::optional<int> relation_index(const std::string& name) const {
    for (std::size_t i = 0; i < relations_.size(); ++i) {
      if (relations_[i].name == name) return static_cast<int>(i);
    }
    return std::nullopt;
  }

  TypeMask valid_args(std::size_t r, int arg_pos) const {
    return relations_.at(r).arg_types.at(static_cast<std::size_t>(arg_pos));
  }

  bool allows(std::size_t r, int arg_pos, int etype) const {
    return (valid_args(r, arg_pos) >> etype) & 1u;
  }

  std::vector<int> types_in(TypeMask mask) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < entity_types_.size(); ++i) {
      if ((mask >> i) & 1u) out.push_back(static_cast<int>(i));
    }
    return out;
  }

  TypeMask mask_of(const std::vector<std::string>& names) const {
    TypeMask m = 0;
    for (const auto& n : names) {
      auto idx = entity_type_index(n);
      if (!idx) throw DataError("unknown entity type '" + n + "'");
      m |= TypeMask{1} << *idx;
    }
    return m;
  }

  nlohmann::json to_json() const {
    nlohmann::json rels = nlohmann::json::array();
    for (const auto& r : relations_) {
      nlohmann::json a0 = nlohmann::json::array(), a1 = nlohmann::json::array();
      for (int t : types_in(r.arg_types[0])) a0.push_back(entity_types_[t]);
      for (int t : types_in(r.arg_types[1])) a1.push_back(entity_types_[t]);
      rels.push_back({{"name", r.name},
                      {"symmetric", r.symmetric},
                      {"arg0_types", a0},
                      {"arg1_types", a1}});
    }
    return {{"entity_types", entity_types_}, {"relations", rels}};
  }

  static TypeSchema from_json(const nlohmann::json& j) {
    try {
      auto types = j.at("entity_types").get<std::vector<std::string>>();
      TypeSchema probe;
      probe.entity_types_ = types;
      std::vector<RelationType> rels;
      for (const auto& rj : j.at("relations")) {
        RelationType r;
        r.name = rj.at("name").get<std::string>();
        r.symmetric = rj.value("symmetric", false);
        r.arg_types[0] = probe.mask_of(rj.at("arg0_types").get<std::vector<std::string>>());
        r.arg_types[1] = probe.mask_of(rj.at("arg1_types").get<std::vector<std::string>>());
        rels.push_back(std::move(r));
      }
      return TypeSchema(std::move(types), std::move(rels));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("invalid schema JSON: ") + e.what());
    }
  }

 private:
  void validate() const {
    if (entity_types_.size() > kMaxEntityTypes) {
      throw DataError("schema supports at most 64 entity types");
    }
    std::set<std::string> seen;
    for (const auto& t : entity_types_) {
      if (t.empty()) throw DataError("empty entity type name");
      if (!seen.insert(t).second) throw DataError("duplicate entity type '" + t + "'");
    }
    const TypeMask all = entity_types_.size() == 64
                             ? ~TypeMask{0}
                             : (TypeMask{1} << entity_types_.size()) - 1;
    std::set<std::string> rel_names;
    for (const auto& r : relations_) {
      if (r.name.empty()) throw DataError("empty relation name");
      if (r.name == "NO_RELATION") throw DataError("NO_RELATION is reserved");
      if (!rel_names.insert(r.name).second) {
        throw DataError("duplicate relation '" + r.name + "'");
      }
      for (int p = 0; p < 2; ++p) {
        if (r.arg_types[p] == 0) {
          throw DataError("relation '" + r.name + "' has an empty arg" +
                          std::to_string(p) + " type set");
        }
        if ((r.arg_types[p] & ~all) != 0) {
          throw DataError("relation '" + r.name + "' references unknown entity types");
        }
      }
      if (r.symmetric && r.arg_types[0] != r.arg_types[1]) {
        throw DataError("symmetric relation '" + r.name +
                        "' must allow the same types for both arguments");
      }
    }
  }

  std::vector<std::string> entity_types_;
  std::vector<RelationType> relations_;
};

inline TypeSchema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open schema file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed schema file '" + path + "': " + e.what());
  }
  return TypeSchema::from_json(j);
}

/// The six ACE 2005 relation types with their valid argument types.
inline TypeSchema ace2005_schema(bool per_soc_symmetric = true) {
  const nlohmann::json j = {
      {"entity_types", {"PER", "FAC", "LOC", "GPE", "ORG", "VEH", "WEA"}},
      {"relations",
       {
           {{"name", "Per-Soc"}, {"symmetric", per_soc_symmetric},
            {"arg0_types", {"PER"}}, {"arg1_types", {"PER"}}},
           {{"name", "Part-Whole"}, {"symmetric", false},
            {"arg0_types", {"FAC", "LOC", "GPE", "ORG"}},
            {"arg1_types", {"FAC", "LOC", "GPE", "ORG"}}},
           {{"name", "Phys"}, {"symmetric", false},
            {"arg0_types", {"PER", "FAC", "LOC", "GPE"}},
            {"arg1_types", {"PER", "FAC", "LOC", "GPE"}}},
           {{"name", "Org-Aff"}, {"symmetric", false},
            {"arg0_types", {"PER", "ORG", "GPE"}}, {"arg1_types", {"ORG", "GPE"}}},
           {{"name", "Art"}, {"symmetric", false},
            {"arg0_types", {"PER", "ORG", "GPE"}}, {"arg1_types", {"FAC"}}},
           {{"name", "Gen-Aff"}, {"symmetric", false},
            {"arg0_types", {"PER"}}, {"arg1_types", {"PER", "LOC", "GPE", "ORG"}}},
       }}};
  return TypeSchema::from_json(j);
}

}  // namespace relmat
