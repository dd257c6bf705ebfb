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
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "relmat/corpus/document.hpp"

namespace relmat {

/// Token <-> id map. Id 0 is reserved for unknown tokens.
class Vocabulary {
 public:
  static constexpr std::size_t kUnk = 0;

  Vocabulary() : tokens_{"<unk>"} {}

  explicit Vocabulary(std::vector<std::string> tokens) : tokens_{"<unk>"} {
    for (auto& t : tokens) {
      if (t == "<unk>" || index_.count(t)) continue;
      index_.emplace(t, tokens_.size());
      tokens_.push_back(std::move(t));
    }
  }

  std::size_t size() const { return tokens_.size(); }

  std::size_t id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
  }

  const std::string& token(std::size_t id) const { return tokens_.at(id); }

  // Without the reserved unknown entry.
  std::vector<std::string> entries() const { return {tokens_.begin() + 1, tokens_.end()}; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Most frequent corpus tokens (ties broken lexicographically), capped so the
/// vocabulary including <unk> has at most `max_size` entries.
inline Vocabulary build_vocabulary(const Corpus& corpus, std::size_t max_size) {
  std::map<std::string, std::size_t> counts;
  for (const auto& doc : corpus.documents) {
    for (const auto& t : doc.tokens) ++counts[t];
  }
  std::vector<std::pair<std::string, std::size_t>> items(counts.begin(), counts.end());
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens;
  for (const auto& [tok, _] : items) {
    if (tokens.size() + 1 >= max_size) break;
    tokens.push_back(tok);
  }
  return Vocabulary(std::move(tokens));
}

}  // namespace relmat
