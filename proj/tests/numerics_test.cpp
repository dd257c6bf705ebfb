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


#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "relmat/numerics/checkpoint.hpp"
#include "relmat/numerics/grad_check.hpp"
#include "relmat/numerics/nn.hpp"
#include "relmat/numerics/optim.hpp"

namespace relmat {
namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = u(rng);
  return Tensor(std::move(shape), std::move(v), true);
}

// Weighted sum with fixed pseudo-random weights so every output element
// contributes a distinct gradient.
Tensor probe(const Tensor& t) {
  std::vector<double> w(t.numel());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::sin(1.3 * static_cast<double>(i) + 0.7);
  return sum_all(mul(t, Tensor(t.shape(), std::move(w))));
}

double check(const ScalarFn& f, std::vector<Tensor> in) {
  const auto r = grad_check(f, std::move(in), 1e-6);
  EXPECT_TRUE(r.reliable());
  return r.max_relative_error;
}

TEST(Ops, SoftmaxOfZerosIsUniform) {
  const auto s = softmax(Tensor({2}, {0.0, 0.0}), 0);
  EXPECT_DOUBLE_EQ(s[0], 0.5);
  EXPECT_DOUBLE_EQ(s[1], 0.5);
}

TEST(Ops, SoftmaxRowsSumToOne) {
  const auto x = random_tensor({4, 5, 3}, 1, -20, 20);
  for (std::size_t axis = 0; axis < 3; ++axis) {
    const auto s = softmax(x, axis);
    const auto total = sum(s, axis);
    for (double v : total.data()) EXPECT_NEAR(v, 1.0, 1e-12);
    for (double v : s.data()) EXPECT_GE(v, 0.0);
  }
}

TEST(Ops, CrossEntropyOfUniformLogits) {
  const auto l = cross_entropy(Tensor({1, 3}, {0, 0, 0}), {1});
  EXPECT_NEAR(l.item(), std::log(3.0), 1e-12);
}

TEST(Ops, CrossEntropyIgnoresLabel) {
  const Tensor logits({2, 2}, {5.0, -5.0, 0.0, 0.0});
  EXPECT_NEAR(cross_entropy(logits, {-1, 0}).item(), std::log(2.0), 1e-12);
  EXPECT_THROW(cross_entropy(logits, {2, 0}), ShapeError);
}

TEST(Ops, MatmulGradientIsColumnSums) {
  auto a = random_tensor({3, 4}, 2);
  auto b = random_tensor({4, 2}, 3);
  sum_all(matmul(a, b)).backward();
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t k = 0; k < 4; ++k) {
      EXPECT_NEAR(a.grad()[i * 4 + k], b[k * 2] + b[k * 2 + 1], 1e-14);
    }
  }
  EXPECT_LT(check([](const auto& in) { return sum_all(matmul(in[0], in[1])); },
                  {random_tensor({3, 4}, 2), random_tensor({4, 2}, 3)}),
            1e-6);
}

TEST(Ops, ShapeErrorsNameBothShapes) {
  try {
    matmul(Tensor::zeros({2, 3}), Tensor::zeros({4, 2}));
    FAIL();
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2,3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4,2]"), std::string::npos) << msg;
  }
  EXPECT_THROW(softmax(Tensor::zeros({2}), 1), ShapeError);
  EXPECT_THROW(add(Tensor::zeros({2, 3}), Tensor::zeros({3, 2})), ShapeError);
}

struct OpCase {
  const char* name;
  ScalarFn f;
  std::vector<Shape> shapes;
};

class OpGradient : public ::testing::TestWithParam<int> {};

std::vector<OpCase> op_cases() {
  return {
      {"add_broadcast", [](const auto& in) { return probe(add(in[0], in[1])); }, {{3, 4}, {4}}},
      {"add_general", [](const auto& in) { return probe(add(in[0], in[1])); }, {{3, 1, 4}, {1, 2, 4}}},
      {"sub", [](const auto& in) { return probe(sub(in[0], in[1])); }, {{2, 3}, {2, 3}}},
      {"mul", [](const auto& in) { return probe(mul(in[0], in[1])); }, {{2, 3}, {3}}},
      {"scale", [](const auto& in) { return probe(scale(in[0], -2.5)); }, {{5}}},
      {"relu", [](const auto& in) { return probe(relu(in[0])); }, {{3, 3}}},
      {"matmul_batched", [](const auto& in) { return probe(matmul(in[0], in[1])); }, {{2, 3, 4}, {2, 4, 5}}},
      {"permute", [](const auto& in) { return probe(permute(in[0], {2, 0, 1})); }, {{2, 3, 4}}},
      {"transpose", [](const auto& in) { return probe(transpose(in[0])); }, {{3, 2}}},
      {"reshape", [](const auto& in) { return probe(reshape(in[0], {3, 4})); }, {{2, 6}}},
      {"concat", [](const auto& in) { return probe(concat({in[0], in[1]}, 1)); }, {{2, 3}, {2, 2}}},
      {"slice", [](const auto& in) { return probe(slice(in[0], 1, 1, 3)); }, {{2, 4}}},
      {"gather_rows", [](const auto& in) { return probe(gather_rows(in[0], {2, 0, 2, 1})); }, {{3, 2}}},
      {"sum_axis", [](const auto& in) { return probe(sum(in[0], 1)); }, {{2, 3, 2}}},
      {"mean_axis", [](const auto& in) { return probe(mean(in[0], 0, true)); }, {{3, 2}}},
      {"softmax", [](const auto& in) { return probe(softmax(in[0], 1)); }, {{3, 4}}},
      {"layer_norm", [](const auto& in) { return probe(layer_norm(in[0], in[1], in[2])); }, {{3, 5}, {5}, {5}}},
      {"segment_softmax",
       [](const auto& in) { return probe(segment_softmax(in[0], {0, 1, 0, 1, 1}, 2)); }, {{5, 2}}},
      {"segment_sum", [](const auto& in) { return probe(segment_sum(in[0], {1, 0, 1}, 3)); }, {{3, 2}}},
      {"cross_entropy",
       [](const auto& in) { return cross_entropy(in[0], {2, -1, 0}, -1, Reduction::mean); }, {{3, 4}}},
  };
}

TEST_P(OpGradient, MatchesFiniteDifferences) {
  const auto c = op_cases()[static_cast<std::size_t>(GetParam())];
  std::vector<Tensor> in;
  for (std::size_t k = 0; k < c.shapes.size(); ++k) in.push_back(random_tensor(c.shapes[k], 10 + k));
  EXPECT_LT(check(c.f, in), 1e-6) << c.name;
}

INSTANTIATE_TEST_SUITE_P(AllOps, OpGradient,
                         ::testing::Range(0, static_cast<int>(op_cases().size())),
                         [](const auto& info) {
                           return std::string(op_cases()[static_cast<std::size_t>(info.param)].name);
                         });

TEST(GradCheck, QuadraticIsExact) {
  const auto r = grad_check([](const auto& in) { return sum_all(square(in[0])); },
                            {random_tensor({5}, 4)}, 1e-5);
  EXPECT_LT(r.max_relative_error, 1e-7);
  EXPECT_EQ(r.checked, 5u);
}

TEST(GradCheck, FloorAbsorbsRoundOff) {
  // tiny gradient on top of a large value: the differences are mostly noise
  auto f = [](const auto& in) { return sum_all(add(scale(in[0], 1e-9), in[1])); };
  const std::vector<Tensor> in = {Tensor({1}, {0.3}), Tensor({1}, {1e6})};
  EXPECT_GT(grad_check(f, in, 1e-6).max_relative_error, 0.05);
  EXPECT_LT(grad_check(f, in, 1e-6, 1.0).max_relative_error, 1e-3);
  EXPECT_THROW(grad_check(f, in, 1e-6, 0.0), ConfigError);
}

TEST(GradCheck, ValidatesArguments) {
  auto f = [](const auto& in) { return sum_all(in[0]); };
  EXPECT_THROW(grad_check(f, {random_tensor({2}, 1)}, 1e-9), ConfigError);
  EXPECT_THROW(grad_check(f, {random_tensor({2}, 1)}, 1e-2), ConfigError);
  EXPECT_THROW(grad_check([](const auto& in) { return in[0]; }, {random_tensor({2}, 1)}),
               ShapeError);
}

TEST(GradCheck, LiveDropoutIsFlaggedUnreliable) {
  std::mt19937_64 rng(3);
  auto live = [&](const auto& in) { return probe(dropout(in[0], 0.5, true, &rng)); };
  EXPECT_FALSE(grad_check(live, {random_tensor({6}, 2)}).reliable());

  // Reseeding before every evaluation freezes the mask.
  auto frozen = [](const auto& in) {
    std::mt19937_64 r(3);
    return probe(dropout(in[0], 0.5, true, &r));
  };
  const auto res = grad_check(frozen, {random_tensor({6}, 2)});
  EXPECT_TRUE(res.reliable());
  EXPECT_LT(res.max_relative_error, 1e-3);
}

TEST(Dropout, EvalModeIsIdentity) {
  const auto x = random_tensor({4}, 1);
  const auto y = dropout(x, 0.3, false, nullptr);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(x[i], y[i]);
}

TEST(Backward, SharedSubexpressionAccumulates) {
  Tensor x({1}, {3.0}, true);
  Tensor y = mul(x, x);        // x^2
  sum_all(add(y, mul(y, x))).backward();  // x^2 + x^3
  EXPECT_NEAR(x.grad()[0], 2 * 3.0 + 3 * 9.0, 1e-12);
}

TEST(Schedule, WarmupThenCosine) {
  EXPECT_EQ(lr_at(0, 100, 0.1, 1e-4), 0.0);
  EXPECT_NEAR(lr_at(10, 100, 0.1, 1e-4), 1e-4, 1e-18);
  const double expect = 1e-4 * 0.5 * (1.0 + std::cos(std::numbers::pi * 45.0 / 90.0));
  EXPECT_NEAR(lr_at(55, 100, 0.1, 1e-4), expect, 1e-18);
  EXPECT_NEAR(lr_at(55, 100, 0.1, 1e-4), 5e-5, 1e-15);
  EXPECT_NEAR(lr_at(100, 100, 0.1, 1e-4), 0.0, 1e-18);
  EXPECT_EQ(lr_at(101, 100, 0.1, 1e-4), 0.0);
  EXPECT_THROW(lr_at(1, 100, 1.0, 1e-4), ConfigError);
  EXPECT_THROW(lr_at(1, 100, -0.1, 1e-4), ConfigError);
}

TEST(Adam, ZeroGradientOnlyAppliesDecay) {
  std::vector<double> p{1.0, -2.0}, g{0.0, 0.0};
  AdamMoments st;
  adam_step(p, g, st, {}, 1e-2, 1);
  EXPECT_EQ(p[0], 1.0);
  EXPECT_EQ(p[1], -2.0);
  AdamConfig decay;
  decay.weight_decay = 0.1;
  adam_step(p, g, st, decay, 1e-2, 2);
  EXPECT_NEAR(p[0], 1.0 - 1e-2 * 0.1 * 1.0, 1e-15);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  // Bias-corrected first step is lr * g / (|g| + eps).
  std::vector<double> p{0.5}, g{4.0};
  AdamMoments st;
  adam_step(p, g, st, {}, 0.1, 1);
  EXPECT_NEAR(p[0], 0.5 - 0.1 * 4.0 / (4.0 + 1e-8), 1e-12);
}

TEST(Adam, MinimizesQuadratic) {
  ParamStore ps;
  ps.add("x", Tensor({2}, {3.0, -4.0}));
  Adam opt;
  for (int s = 0; s < 2000; ++s) {
    ps.zero_grad();
    sum_all(square(ps.at("x"))).backward();
    opt.step(ps, 0.05);
  }
  EXPECT_NEAR(ps.at("x")[0], 0.0, 1e-3);
  EXPECT_NEAR(ps.at("x")[1], 0.0, 1e-3);
}

TEST(ClipGradNorm, RescalesToMaxNorm) {
  ParamStore ps;
  ps.add("a", Tensor({2}, {0.0, 0.0}));
  auto& a = ps.at("a");
  a.mutable_grad()[0] = 3.0;
  a.mutable_grad()[1] = 4.0;
  EXPECT_DOUBLE_EQ(clip_grad_norm(ps, 1.0), 5.0);
  EXPECT_NEAR(a.grad()[0], 0.6, 1e-15);
  EXPECT_NEAR(a.grad()[1], 0.8, 1e-15);
}

TEST(Init, XavierWithinLimit) {
  std::mt19937_64 rng(1);
  const auto w = xavier_uniform(10, 30, rng);
  const double lim = std::sqrt(6.0 / 40.0);
  for (double v : w.data()) EXPECT_LE(std::abs(v), lim);
}

TEST(Determinism, RepeatedForwardBackwardIsBitIdentical) {
  auto run = [] {
    auto a = random_tensor({4, 6}, 8);
    auto b = random_tensor({6, 3}, 9);
    auto l = cross_entropy(softmax(matmul(a, b), 1), {0, 1, 2, 1});
    l.backward();
    std::vector<double> out{l.item()};
    out.insert(out.end(), a.grad().begin(), a.grad().end());
    return out;
  };
  EXPECT_EQ(run(), run());
}

TEST(Checkpoint, RoundTripIsBitExact) {
  ParamStore ps;
  ps.add("w", random_tensor({3, 4}, 1, -1e3, 1e3));
  ps.add("b", Tensor({2}, {1.0 / 3.0, -0.0}));
  ps.add("s", Tensor({}, {std::nextafter(1.0, 2.0)}));
  const nlohmann::json md = {{"note", "x"}};
  const auto ck = deserialize_checkpoint(serialize_checkpoint(ps, md));
  EXPECT_EQ(ck.metadata, md);
  ASSERT_EQ(ck.params.size(), ps.size());
  for (const auto& [name, t] : ps) {
    const auto& u = ck.params.at(name);
    EXPECT_EQ(u.shape(), t.shape());
    EXPECT_EQ(std::memcmp(u.data().data(), t.data().data(), t.numel() * sizeof(double)), 0);
  }
  // f32 storage rounds each value once
  const auto ck32 = deserialize_checkpoint(serialize_checkpoint(ps, md, StorageType::f32));
  EXPECT_EQ(ck32.params.at("b")[0], static_cast<double>(static_cast<float>(1.0 / 3.0)));
}

TEST(Checkpoint, RejectsCorruptFiles) {
  EXPECT_THROW(deserialize_checkpoint("NOTACKPT12345678"), DataError);
  ParamStore ps;
  ps.add("w", random_tensor({3}, 1));
  auto bytes = serialize_checkpoint(ps, {});
  EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, bytes.size() - 4)), DataError);
  EXPECT_THROW(load_checkpoint("/nonexistent.ckpt"), IoError);
}

}  // namespace
}  // namespace relmat
