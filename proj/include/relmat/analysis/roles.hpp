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
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "relmat/corpus/schema.hpp"
#include "relmat/error.hpp"

namespace relmat {

/// A (relation, argument position) pair.
struct Role {
  std::size_t relation = 0;
  int arg_pos = 0;

  auto operator<=>(const Role&) const = default;
};

inline std::string role_name(const TypeSchema& schema, const Role& r, bool merged = false) {
  const auto& rel = schema.relation(r.relation);
  if (merged && rel.symmetric) return rel.name;
  return rel.name + " (arg" + std::to_string(r.arg_pos) + ")";
}

/// Roles in schema order. With `merge_symmetric`, a symmetric relation
/// contributes only its arg0 role (both positions share one type set).
inline std::vector<Role> schema_roles(const TypeSchema& schema, bool merge_symmetric) {
  std::vector<Role> out;
  for (std::size_t r = 0; r < schema.num_relations(); ++r) {
    out.push_back({r, 0});
    if (!(merge_symmetric && schema.relation(r).symmetric)) out.push_back({r, 1});
  }
  return out;
}

using RolePair = std::pair<Role, Role>;  // first < second

/// Unordered role pairs whose valid type sets are disjoint.
inline std::set<RolePair> derive_incompatibility_rules(const TypeSchema& schema,
                                                       bool merge_symmetric) {
  const auto roles = schema_roles(schema, merge_symmetric);
  std::set<RolePair> rules;
  for (std::size_t a = 0; a < roles.size(); ++a) {
    for (std::size_t b = a + 1; b < roles.size(); ++b) {
      const TypeMask ma = schema.valid_args(roles[a].relation, roles[a].arg_pos);
      const TypeMask mb = schema.valid_args(roles[b].relation, roles[b].arg_pos);
      if ((ma & mb) == 0) rules.insert({std::min(roles[a], roles[b]), std::max(roles[a], roles[b])});
    }
  }
  return rules;
}

enum class CombinationConvention { distinct_roles_merged, multiset_all_roles };

struct InvalidFraction {
  std::size_t k = 0;
  std::size_t invalid = 0;
  std::size_t total = 0;
  double percent() const { return total == 0 ? 0.0 : 100.0 * invalid / total; }
};

/// Share of size-k role combinations no single entity type can satisfy.
inline InvalidFraction invalid_fraction(const TypeSchema& schema, std::size_t k,
                                        CombinationConvention conv) {
  if (k == 0) throw ConfigError("invalid_fraction: k must be >= 1");
  const bool distinct = conv == CombinationConvention::distinct_roles_merged;
  const auto roles = schema_roles(schema, distinct);
  if (distinct && k > roles.size()) {
    throw ConfigError("invalid_fraction: k=" + std::to_string(k) + " exceeds the " +
                      std::to_string(roles.size()) + " distinct roles");
  }
  std::vector<TypeMask> masks;
  for (const auto& r : roles) masks.push_back(schema.valid_args(r.relation, r.arg_pos));

  InvalidFraction res;
  res.k = k;
  // Depth-first over non-decreasing index sequences; `distinct` makes them
  // strictly increasing.
  auto rec = [&](auto&& self, std::size_t depth, std::size_t from, TypeMask acc) -> void {
    if (depth == k) {
      ++res.total;
      if (acc == 0) ++res.invalid;
      return;
    }
    for (std::size_t i = from; i < masks.size(); ++i) {
      self(self, depth + 1, distinct ? i + 1 : i, acc & masks[i]);
    }
  };
  rec(rec, 0, 0, ~TypeMask{0});
  return res;
}

}  // namespace relmat
