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

#include <string>
#include <utility>
#include <vector>

#include "relmat/corpus/document.hpp"

namespace relmat {

/// Entity nodes 0..M-1, then one node per relation cell in row-major order.
/// Each relation node (i, j) links to entity nodes i and j (just i when i == j).
struct RelGraph {
  std::size_t num_entities = 0;
  std::vector<std::pair<std::size_t, std::size_t>> cells;  // per relation node
  std::vector<std::vector<std::size_t>> adjacency;         // per node

  std::size_t num_nodes() const { return num_entities + cells.size(); }
  std::size_t num_relation_nodes() const { return cells.size(); }
  std::size_t relation_node(std::size_t k) const { return num_entities + k; }
  std::size_t degree(std::size_t node) const { return adjacency.at(node).size(); }
};

inline RelGraph build_graph(std::size_t m, bool include_diagonal) {
  RelGraph g;
  g.num_entities = m;
  g.cells = relation_pairs(m, include_diagonal);
  g.adjacency.resize(g.num_nodes());
  for (std::size_t k = 0; k < g.cells.size(); ++k) {
    const auto [i, j] = g.cells[k];
    const std::size_t r = g.relation_node(k);
    g.adjacency[r].push_back(i);
    g.adjacency[i].push_back(r);
    if (j != i) {
      g.adjacency[r].push_back(j);
      g.adjacency[j].push_back(r);
    }
  }
  return g;
}

inline RelGraph build_graph(const Document& doc, bool include_diagonal) {
  return build_graph(doc.num_entities(), include_diagonal);
}

}  // namespace relmat
