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

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "relmat/corpus/document.hpp"
#include "relmat/corpus/schema.hpp"
#include "relmat/error.hpp"

namespace relmat {

struct LoadReport {
  std::size_t documents = 0;
  // Documents accepted in lax mode despite schema violations.
  std::size_t schema_warnings = 0;
};

namespace detail {

inline std::string at_line(std::size_t line) {
  return "line " + std::to_string(line) + ": ";
}

}  // namespace detail

/// Parses one corpus JSONL record. `line` is only used in error messages.
inline Document parse_document(const nlohmann::json& j, const TypeSchema& schema,
                               bool strict, std::size_t line = 0,
                               LoadReport* report = nullptr) {
  const std::string where = detail::at_line(line);
  Document doc;
  try {
    doc.doc_id = j.at("doc_id").get<std::string>();
    doc.tokens = j.at("tokens").get<std::vector<std::string>>();
    const auto& ents = j.at("entities");
    for (std::size_t k = 0; k < ents.size(); ++k) {
      const auto& e = ents[k];
      Entity ent;
      const auto id = e.at("id").get<long long>();
      if (id != static_cast<long long>(k)) {
        throw DataError(where + "entity ids must be 0..M-1 in order (got " +
                        std::to_string(id) + " at position " + std::to_string(k) + ")");
      }
      ent.id = k;
      const auto start = e.at("start").get<long long>();
      const auto end = e.at("end").get<long long>();
      if (start < 0 || start >= end || end > static_cast<long long>(doc.tokens.size())) {
        throw DataError(where + "entity " + std::to_string(k) + " span [" +
                        std::to_string(start) + "," + std::to_string(end) +
                        ") outside token range");
      }
      ent.start = static_cast<std::size_t>(start);
      ent.end = static_cast<std::size_t>(end);
      const auto tname = e.at("type").get<std::string>();
      const auto t = schema.entity_type_index(tname);
      if (!t) throw DataError(where + "unknown entity type '" + tname + "'");
      ent.etype = *t;
      doc.entities.push_back(ent);
    }
    const std::size_t m = doc.entities.size();
    doc.gold = RelationMatrix(m);
    std::size_t violations = 0;
    const auto rels = j.contains("relations") ? j.at("relations") : nlohmann::json::array();
    for (const auto& r : rels) {
      const auto a0 = r.at("arg0").get<long long>();
      const auto a1 = r.at("arg1").get<long long>();
      if (a0 < 0 || a1 < 0 || a0 >= static_cast<long long>(m) ||
          a1 >= static_cast<long long>(m)) {
        throw DataError(where + "relation argument index out of range (" +
                        std::to_string(a0) + "," + std::to_string(a1) + ") with " +
                        std::to_string(m) + " entities");
      }
      if (a0 == a1) {
        throw DataError(where + "self-relation on entity " + std::to_string(a0));
      }
      const auto rname = r.at("type").get<std::string>();
      const auto ri = schema.relation_index(rname);
      if (!ri) throw DataError(where + "unknown relation type '" + rname + "'");
      auto& cell = doc.gold(static_cast<std::size_t>(a0), static_cast<std::size_t>(a1));
      if (cell != kNoRelation) {
        throw DataError(where + "duplicate relation annotation for pair (" +
                        std::to_string(a0) + "," + std::to_string(a1) + ")");
      }
      cell = label_of_relation(static_cast<std::size_t>(*ri));
      if (!schema.allows(*ri, 0, doc.entities[a0].etype) ||
          !schema.allows(*ri, 1, doc.entities[a1].etype)) {
        if (strict) {
          throw SchemaViolation(
              where + "relation " + rname + "(" + std::to_string(a0) + "," +
              std::to_string(a1) + ") violates argument types: " +
              schema.entity_types()[doc.entities[a0].etype] + " -> " +
              schema.entity_types()[doc.entities[a1].etype]);
        }
        ++violations;
      }
    }
    if (violations > 0 && report) ++report->schema_warnings;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(where + "malformed document: " + e.what());
  }
  return doc;
}

inline nlohmann::json document_to_json(const Document& doc, const TypeSchema& schema) {
  nlohmann::json ents = nlohmann::json::array();
  for (const auto& e : doc.entities) {
    ents.push_back({{"id", e.id},
                    {"start", e.start},
                    {"end", e.end},
                    {"type", schema.entity_types().at(e.etype)}});
  }
  nlohmann::json rels = nlohmann::json::array();
  const std::size_t m = doc.num_entities();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const Label l = doc.gold(i, j);
      if (l == kNoRelation) continue;
      rels.push_back({{"arg0", i},
                      {"arg1", j},
                      {"type", schema.relation(relation_of_label(l)).name}});
    }
  }
  return {{"doc_id", doc.doc_id}, {"tokens", doc.tokens}, {"entities", ents},
          {"relations", rels}};
}

inline Corpus read_corpus(std::istream& in, const TypeSchema& schema, bool strict,
                          LoadReport* report = nullptr) {
  Corpus corpus;
  corpus.schema = schema;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(detail::at_line(line) + "malformed JSON: " + e.what());
    }
    corpus.documents.push_back(parse_document(j, schema, strict, line, report));
  }
  if (report) report->documents = corpus.documents.size();
  return corpus;
}

inline Corpus load_corpus(const std::string& path, const TypeSchema& schema, bool strict,
                          LoadReport* report = nullptr) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file '" + path + "'");
  return read_corpus(in, schema, strict, report);
}

inline void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& doc : corpus.documents) {
    out << document_to_json(doc, corpus.schema).dump() << '\n';
  }
}

inline void save_corpus(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write corpus file '" + path + "'");
  write_corpus(out, corpus);
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace relmat
