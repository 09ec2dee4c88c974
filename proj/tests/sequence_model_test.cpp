// Copyright 2026 The FedNN Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fednn/sequence_model.hpp"

#include <cmath>

#include "fednn/error.hpp"
#include "gtest/gtest.h"
#include "test_util.hpp"

namespace fednn {
namespace {

double norm(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += double(x) * x;
  return std::sqrt(s);
}

TEST(ToyModelTest, EmbeddingsAreUnitNorm) {
  ToyModel m;
  for (TokenId t = 0; t < m.vocab_size(); ++t) EXPECT_NEAR(norm(m.embedding(t)), 1.0, 1e-6);
}

TEST(ToyModelTest, ContextMatchesDefinition) {
  ToyModel m;
  const TokenSeq src{5, 9, 11};
  const TokenSeq prefix{20, 21, 22};
  std::vector<double> expect(m.dim(), 0.0);
  for (std::size_t i = 0; i < m.dim(); ++i) {
    for (TokenId t : src) expect[i] += m.embedding(t)[i] / 3.0;
    expect[i] += 0.5 * m.embedding(22)[i] + 0.25 * m.embedding(21)[i];
  }
  double n = 0.0;
  for (double v : expect) n += v * v;
  n = std::sqrt(n);
  auto ctx = m.context(src, prefix);
  for (std::size_t i = 0; i < m.dim(); ++i) EXPECT_NEAR(ctx[i], expect[i] / n, 1e-6);
}

TEST(ToyModelTest, DistributionSumsToOne) {
  rnd::Engine rng(2);
  ToyModel m;
  m.set_parameters(testing::random_vector(rng, m.dim() * m.vocab_size()));
  auto c = testing::random_corpus(rng, 20, 64);
  for (const auto& p : c.pairs) {
    auto d = m.next_token_dist(p.source, std::span<const TokenId>(p.target).first(p.target.size() / 2));
    EXPECT_NEAR(testing::sum(d), 1.0, 1e-9);
    for (double x : d) EXPECT_GE(x, 0.0);
  }
}

TEST(ToyModelTest, TrainingOnOnePairLowersItsLoss) {
  ParallelCorpus c;
  c.pairs.push_back({{4, 5, 6}, {10, 11, vocab::kEos}});
  ToyModel m;
  const double before = m.mean_loss(c);
  m.train_steps(c, 50, 0.1);
  EXPECT_LT(m.mean_loss(c), before);
}

TEST(ToyModelTest, ParameterBlobRoundTrip) {
  rnd::Engine rng(3);
  ToyModel a;
  a.set_parameters(testing::random_vector(rng, a.dim() * a.vocab_size()));
  ToyModel b;
  b.load_parameters(a.serialize_parameters());
  EXPECT_EQ(a.parameters(), b.parameters());
  EXPECT_THROW(b.set_parameters(std::vector<float>(3)), DimensionError);
}

TEST(ToyModelTest, CloneIsIndependent) {
  ToyModel a;
  auto b = a.clone();
  ParallelCorpus c;
  c.pairs.push_back({{4}, {9, vocab::kEos}});
  b->train_steps(c, 5, 0.5);
  EXPECT_NE(a.parameters(), b->parameters());
}

TEST(TraceModelTest, ReplaysRecordedModel) {
  rnd::Engine rng(4);
  ToyModel m;
  m.set_parameters(testing::random_vector(rng, m.dim() * m.vocab_size()));
  auto c = testing::random_corpus(rng, 10, 64);
  auto trace = TraceModel::record(m, c);
  auto back = TraceModel::deserialize(trace.serialize());
  EXPECT_EQ(back.entries(), c.target_tokens());
  for (const auto& p : c.pairs) {
    for (std::size_t t = 0; t < p.target.size(); ++t) {
      std::span<const TokenId> prefix(p.target.data(), t);
      EXPECT_EQ(back.context(p.source, prefix), m.context(p.source, prefix));
      auto want = m.next_token_dist(p.source, prefix);
      auto got = back.next_token_dist(p.source, prefix);
      ASSERT_EQ(got.size(), want.size());
      EXPECT_NEAR(testing::sum(got), 1.0, 1e-9);
      for (std::size_t v = 0; v < want.size(); ++v) EXPECT_NEAR(got[v], want[v], 1e-6);
    }
  }
}

TEST(TraceModelTest, UnknownStepAndBadHeader) {
  TraceModel t(2, 4);
  t.add({3}, {}, {1.0f, 0.0f}, {0.25f, 0.25f, 0.25f, 0.25f});
  const TokenSeq other{3, 3};
  EXPECT_THROW(t.context(other, {}), InvalidArgument);
  Bytes blob = t.serialize();
  blob[0] = 'X';
  EXPECT_THROW(TraceModel::deserialize(blob), FormatError);
}

}  // namespace
}  // namespace fednn
