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


#include <cstdio>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "relmat/encoder/encoder.hpp"

namespace relmat {
namespace {

Document make_doc(std::vector<std::string> tokens,
                  std::vector<std::pair<std::size_t, std::size_t>> spans) {
  Document d;
  d.doc_id = "doc";
  d.tokens = std::move(tokens);
  for (std::size_t k = 0; k < spans.size(); ++k) {
    d.entities.push_back({k, spans[k].first, spans[k].second, 0});
  }
  d.gold = RelationMatrix(spans.size());
  return d;
}

struct Fixture {
  EncoderConfig cfg;
  ParamStore ps;
  std::unique_ptr<EntityEncoder> enc;

  explicit Fixture(EntityIndicator ind = EntityIndicator::none, std::size_t d = 4) {
    cfg.embed_dim = d;
    cfg.entity_indicator = ind;
    Vocabulary v({"a", "b", "c", "d"});
    std::mt19937_64 rng(1);
    init_encoder_params(ps, cfg, v.size(), rng);
    enc = std::make_unique<EntityEncoder>(cfg, std::move(v));
  }

  std::vector<double> row(const std::string& tok) const {
    const auto id = enc->vocabulary().id(tok);
    const auto& t = ps.at("enc.tok");
    return {t.data().begin() + id * cfg.embed_dim, t.data().begin() + (id + 1) * cfg.embed_dim};
  }
};

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

TEST(Vocabulary, UnknownIsZeroAndOrderIsByFrequency) {
  Corpus c;
  c.documents.push_back(make_doc({"x", "y", "y", "z", "z", "z"}, {}));
  const auto v = build_vocabulary(c, 3);
  EXPECT_EQ(v.size(), 3u);
  EXPECT_EQ(v.id("z"), 1u);
  EXPECT_EQ(v.id("y"), 2u);
  EXPECT_EQ(v.id("x"), Vocabulary::kUnk);
  EXPECT_EQ(v.token(0), "<unk>");
}

TEST(EmbedEntities, SingleTokenSpanEqualsTokenVector) {
  Fixture f;
  const auto e = f.enc->embed_entities(make_doc({"a", "b"}, {{1, 2}}), f.ps);
  const auto b = f.row("b");
  for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(e[k], b[k]);
}

TEST(EmbedEntities, TwoTokenSpanIsMean) {
  Fixture f;
  const auto e = f.enc->embed_entities(make_doc({"a", "c", "q"}, {{0, 2}, {2, 3}}), f.ps);
  const auto a = f.row("a"), c = f.row("c"), unk = f.row("<unk>");
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_NEAR(e[k], (a[k] + c[k]) / 2, 1e-15);
    EXPECT_EQ(e[4 + k], unk[k]);
  }
}

TEST(EmbedEntities, IndicatorRowIsAdded) {
  Fixture f(EntityIndicator::sentence_index);
  const auto e = f.enc->embed_entities(make_doc({"a"}, {{0, 1}}), f.ps);
  const auto a = f.row("a");
  const auto& ind = f.ps.at("enc.indicator");
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(e[k], a[k] + ind[4 + k], 1e-15);
}

TEST(EmbedEntities, PoolingIgnoresTokenOrderInSpan) {
  Fixture f;
  const auto e1 = f.enc->embed_entities(make_doc({"a", "b", "c"}, {{0, 3}}), f.ps);
  const auto e2 = f.enc->embed_entities(make_doc({"c", "a", "b"}, {{0, 3}}), f.ps);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(e1[k], e2[k], 1e-15);
}

TEST(EmbedEntities, GradientsReachOnlySpanTokens) {
  Fixture f;
  auto& table = f.ps.at("enc.tok");
  sum_all(f.enc->embed_entities(make_doc({"a", "b", "c", "d"}, {{1, 2}, {3, 4}}), f.ps)).backward();
  for (const auto* tok : {"<unk>", "a", "b", "c", "d"}) {
    const auto id = f.enc->vocabulary().id(tok);
    double n = 0;
    for (std::size_t k = 0; k < 4; ++k) n += std::abs(table.grad()[id * 4 + k]);
    const bool in_span = std::string(tok) == "b" || std::string(tok) == "d";
    EXPECT_EQ(n > 0, in_span) << tok;
  }
}

TEST(EmbedEntities, RejectsSpanOutsideTokens) {
  Fixture f;
  EXPECT_THROW(f.enc->embed_entities(make_doc({"a"}, {{0, 2}}), f.ps), DataError);
}

TEST(EmbeddingFile, RoundTripThroughEncoder) {
  EmbeddingTable table(3);
  table.add("d1", 2, {0.1f, 0.2f, 0.3f, -1.5f, 2.25f, 1e-3f});
  table.add("d0", 1, {7.0f, 8.0f, 9.0f});
  const auto path = temp_path("relmat_enc_roundtrip.bin");
  write_embedding_file(path, table);
  auto loaded = std::make_shared<EmbeddingTable>(read_embedding_file(path));
  std::remove(path.c_str());
  EXPECT_EQ(loaded->order(), (std::vector<std::string>{"d1", "d0"}));

  EncoderConfig cfg;
  cfg.embed_dim = 3;
  cfg.source = EmbeddingSource::external_file;
  EntityEncoder enc(cfg, loaded);
  ParamStore ps;
  std::mt19937_64 rng(1);
  init_encoder_params(ps, cfg, 0, rng);
  EXPECT_FALSE(ps.contains("enc.tok"));
  auto doc = make_doc({"x", "y"}, {{0, 1}, {1, 2}});
  doc.doc_id = "d1";
  const auto e = enc.embed_entities(doc, ps);
  const std::vector<double> want{0.1, 0.2, 0.3, -1.5, 2.25, 1e-3};
  for (std::size_t k = 0; k < want.size(); ++k) EXPECT_NEAR(e[k], want[k], 1e-5);
  EXPECT_FALSE(e.requires_grad());

  doc.doc_id = "missing";
  EXPECT_THROW(enc.embed_entities(doc, ps), DataError);
  doc.doc_id = "d0";  // one entity in the file, two in the document
  EXPECT_THROW(enc.embed_entities(doc, ps), DataError);
  cfg.embed_dim = 4;
  EXPECT_THROW(EntityEncoder(cfg, loaded), DataError);
}

TEST(EmbeddingFile, ParsesHandBuiltBytes) {
  // Independent construction of the byte layout.
  const std::string header = R"({"dim":2,"docs":[{"doc_id":"a","n_entities":1,"offset":0}]})";
  std::string bytes = "ROREMB01";
  std::uint64_t n = header.size();
  for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<char>((n >> (8 * i)) & 0xff));
  bytes += header;
  const float vals[2] = {1.5f, -2.0f};
  bytes.append(reinterpret_cast<const char*>(vals), sizeof vals);  // little-endian host
  const auto t = parse_embedding_file(bytes);
  EXPECT_EQ(t.dim(), 2u);
  EXPECT_EQ(t.at("a").rows, (std::vector<float>{1.5f, -2.0f}));
  EXPECT_THROW(parse_embedding_file(bytes.substr(0, bytes.size() - 1)), DataError);
  EXPECT_THROW(parse_embedding_file("XXXXXXXX" + bytes.substr(8)), DataError);
}

TEST(InitRelations, SingleEntity) {
  ParamStore ps;
  std::mt19937_64 rng(2);
  add_linear(ps, "enc.rel.ffn1", 4, 4, rng);
  add_linear(ps, "enc.rel.ffn2", 4, 2, rng);
  Tensor e({1, 2}, {0.3, -0.7});
  const auto r = init_relations(e, ps);
  EXPECT_EQ(r.shape(), (Shape{1, 1, 2}));
  const Tensor x({1, 4}, {0.3, -0.7, 0.3, -0.7});
  const auto ref = apply_linear(ps, "enc.rel.ffn2", relu(apply_linear(ps, "enc.rel.ffn1", x)));
  EXPECT_NEAR(r[0], ref[0], 1e-15);
  EXPECT_NEAR(r[1], ref[1], 1e-15);
}

TEST(InitRelations, HandSetWeightsCopyFirstArgument) {
  const std::size_t d = 3;
  ParamStore ps;
  std::vector<double> w1(2 * d * 2 * d, 0.0), w2(2 * d * d, 0.0);
  for (std::size_t k = 0; k < 2 * d; ++k) w1[k * 2 * d + k] = 1.0;  // identity
  for (std::size_t k = 0; k < d; ++k) w2[k * d + k] = 1.0;          // keep first half
  ps.add("enc.rel.ffn1.weight", Tensor({2 * d, 2 * d}, w1));
  ps.add("enc.rel.ffn1.bias", Tensor::zeros({2 * d}));
  ps.add("enc.rel.ffn2.weight", Tensor({2 * d, d}, w2));
  ps.add("enc.rel.ffn2.bias", Tensor::zeros({d}));
  // nonnegative so the ReLU passes them through
  Tensor e({3, d}, {0.1, 0.2, 0.3, 1.0, 2.0, 3.0, 0.5, 0.0, 4.0});
  const auto r = init_relations(e, ps);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      for (std::size_t k = 0; k < d; ++k) EXPECT_EQ(r[(i * 3 + j) * d + k], e[i * d + k]);
    }
  }
}

TEST(InitRelations, OrderedConcatenationIsAsymmetric) {
  ParamStore ps;
  std::mt19937_64 rng(4);
  add_linear(ps, "enc.rel.ffn1", 4, 4, rng);
  add_linear(ps, "enc.rel.ffn2", 4, 2, rng);
  Tensor e({2, 2}, {0.3, -0.7, 1.1, 0.4});
  const auto r = init_relations(e, ps);
  EXPECT_TRUE(r[2] != r[4] || r[3] != r[5]);
  EXPECT_THROW(init_relations(Tensor::zeros({2, 3}), ps), ShapeError);
}

}  // namespace
}  // namespace relmat
