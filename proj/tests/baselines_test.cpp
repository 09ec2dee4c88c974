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

#include "fednn/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "fednn/error.hpp"
#include "gtest/gtest.h"
#include "test_util.hpp"

namespace fednn {
namespace {

using ::fednn::testing::sum;

TEST(FedAvgAggregateTest, Examples) {
  std::vector<std::vector<float>> same{{1.5f, -2.0f}, {1.5f, -2.0f}, {1.5f, -2.0f}};
  EXPECT_EQ(fedavg_aggregate(same, std::vector<double>{1, 7, 2}), same[0]);
  std::vector<std::vector<float>> two{{0.0f}, {4.0f}};
  EXPECT_EQ(fedavg_aggregate(two, std::vector<double>{1, 3}), std::vector<float>{3.0f});
}

TEST(FedAvgAggregateTest, MatchesWeightedMeanAndIsScaleInvariant) {
  rnd::Engine rng(81);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rnd::uniform_index(rng, 5), dim = 1 + rnd::uniform_index(rng, 10);
    std::vector<std::vector<float>> params(n, std::vector<float>(dim));
    std::vector<double> counts(n);
    for (std::size_t m = 0; m < n; ++m) {
      counts[m] = 1 + static_cast<double>(rnd::uniform_index(rng, 100));
      for (auto& x : params[m]) x = static_cast<float>(rnd::normal(rng));
    }
    auto out = fedavg_aggregate(params, counts);
    const double total = sum(counts);
    for (std::size_t j = 0; j < dim; ++j) {
      double expect = 0.0;
      for (std::size_t m = 0; m < n; ++m) expect += counts[m] / total * params[m][j];
      EXPECT_NEAR(out[j], expect, 1e-5);
    }
    auto scaled = counts;
    for (auto& c : scaled) c *= 37.0;
    auto out2 = fedavg_aggregate(params, scaled);
    for (std::size_t j = 0; j < dim; ++j) EXPECT_NEAR(out2[j], out[j], 1e-6);
  }
}

TEST(FedAvgAggregateTest, Errors) {
  std::vector<std::vector<float>> ragged{{1.0f}, {1.0f, 2.0f}};
  EXPECT_THROW(fedavg_aggregate(ragged, std::vector<double>{1, 1}), DimensionError);
  std::vector<std::vector<float>> two{{1.0f}, {2.0f}};
  EXPECT_THROW(fedavg_aggregate(two, std::vector<double>{0, 0}), InvalidArgument);
  EXPECT_THROW(fedavg_aggregate(two, std::vector<double>{1}), DimensionError);
  EXPECT_THROW(fedavg_aggregate(std::vector<std::vector<float>>{}, std::vector<double>{}), InvalidArgument);
}

ToyModelConfig small_model() {
  ToyModelConfig c;
  c.dim = 16;
  return c;
}

std::vector<FederatedClient> three_clients(std::size_t size) {
  std::vector<FederatedClient> out;
  for (std::size_t d = 0; d < 3; ++d) out.push_back({static_cast<NodeId>(d + 1), make_domain_corpus(d, size, 4)});
  return out;
}

TEST(FedAvgRunTest, ZeroLocalStepsLeavesModelUnchanged) {
  ToyModel server(small_model());
  ParallelCorpus pub = make_domain_corpus(1000, 40, 2);
  server.train_steps(pub, 20, 0.5);
  std::vector<FederatedClient> one{{1, make_domain_corpus(0, 20, 3)}};
  FedAvgOptions opt;
  opt.rounds = 1;
  opt.frequency = 1;
  opt.local_steps = 0;
  auto r = fedavg_run(server, one, opt);
  EXPECT_EQ(r.model->parameters(), server.parameters());
  EXPECT_EQ(r.aggregations, 1u);
}

TEST(FedAvgRunTest, LedgerIsTwoModelsPerClientPerRound) {
  ToyModel server(small_model());
  const std::uint64_t m = server.serialize_parameters().size();
  auto clients = three_clients(10);
  for (std::size_t rounds : {1u, 2u, 5u}) {
    FedAvgOptions opt;
    opt.rounds = rounds;
    opt.local_steps = 2;
    auto r = fedavg_run(server, clients, opt);
    EXPECT_EQ(r.ledger.total_bytes(), m * 3 * rounds * 2);
    EXPECT_EQ(r.ledger.messages(MessageKind::kModelAggregate), 3 * rounds);
    EXPECT_EQ(r.ledger.messages(MessageKind::kModelUpdate), 3 * rounds);
    EXPECT_EQ(r.aggregations, rounds);
  }
}

TEST(FedAvgRunTest, AggregateOnceIsOneExchange) {
  ToyModel server(small_model());
  const std::uint64_t m = server.serialize_parameters().size();
  FedAvgOptions opt;
  opt.rounds = 6;
  opt.frequency = kAggregateOnce;
  opt.local_steps = 2;
  auto r = fedavg_run(server, three_clients(10), opt);
  EXPECT_EQ(r.ledger.total_bytes(), m * 3 * 2);
  EXPECT_EQ(r.aggregations, 1u);
  opt.frequency = 4;
  EXPECT_EQ(fedavg_run(server, three_clients(10), opt).aggregations, 2u);
}

TEST(FedAvgRunTest, TrainingReducesLossAndIsDeterministic) {
  ToyModel server(small_model());
  auto clients = three_clients(30);
  ParallelCorpus all;
  for (const auto& c : clients) all.pairs.insert(all.pairs.end(), c.corpus.pairs.begin(), c.corpus.pairs.end());
  FedAvgOptions opt;
  opt.rounds = 3;
  auto a = fedavg_run(server, clients, opt);
  auto b = fedavg_run(server, clients, opt);
  EXPECT_LT(a.final_loss, server.mean_loss(all));
  EXPECT_NEAR(a.final_loss, a.model->mean_loss(all), 1e-9);
  EXPECT_EQ(a.model->parameters(), b.model->parameters());
}

TEST(FedAvgRunTest, ServerDataParticipates) {
  ToyModel server(small_model());
  auto clients = three_clients(10);
  ParallelCorpus server_data = make_domain_corpus(5, 30, 6);
  FedAvgOptions opt;
  opt.rounds = 1;
  opt.local_steps = 5;
  auto without = fedavg_run(server, clients, opt);
  opt.include_server_data = true;
  auto with = fedavg_run(server, clients, opt, &server_data);
  EXPECT_NE(with.model->parameters(), without.model->parameters());
  EXPECT_EQ(with.ledger.total_bytes(), without.ledger.total_bytes());
  EXPECT_LT(with.model->mean_loss(server_data), without.model->mean_loss(server_data));
}

class FixedModel final : public SequenceModel {
 public:
  explicit FixedModel(std::vector<double> dist) : dist_(std::move(dist)) {}
  std::size_t vocab_size() const override { return dist_.size(); }
  std::size_t dim() const override { return 1; }
  std::vector<float> context(std::span<const TokenId>, std::span<const TokenId>) const override { return {0.0f}; }
  std::vector<double> next_token_dist(std::span<const TokenId>, std::span<const TokenId>) const override {
    return dist_;
  }
  std::vector<float> parameters() const override { return {}; }
  void set_parameters(std::span<const float>) override {}
  double train_steps(const ParallelCorpus&, std::size_t, double) override { return 0.0; }
  std::unique_ptr<SequenceModel> clone() const override { return std::make_unique<FixedModel>(dist_); }

 private:
  std::vector<double> dist_;
};

TEST(FTEnsembleTest, Examples) {
  FixedModel a({1.0, 0.0}), b({0.0, 1.0});
  const TokenSeq src{3};
  std::vector<const SequenceModel*> one{&a};
  EXPECT_EQ(ft_ensemble_predict(one, src, {}, EnsembleMode::kMean), (std::vector<double>{1.0, 0.0}));
  std::vector<const SequenceModel*> both{&a, &b};
  EXPECT_EQ(ft_ensemble_predict(both, src, {}, EnsembleMode::kMean), (std::vector<double>{0.5, 0.5}));
  auto w = ft_ensemble_predict(both, src, {}, EnsembleMode::kWeighted, std::vector<double>{1, 3});
  EXPECT_NEAR(w[0], 0.25, 1e-12);
  EXPECT_NEAR(w[1], 0.75, 1e-12);
}

TEST(FTEnsembleTest, Errors) {
  FixedModel a({1.0, 0.0}), c({0.2, 0.3, 0.5});
  const TokenSeq src{3};
  std::vector<const SequenceModel*> mixed{&a, &c};
  EXPECT_THROW(ft_ensemble_predict(mixed, src, {}, EnsembleMode::kMean), DimensionError);
  EXPECT_THROW(ft_ensemble_predict(std::vector<const SequenceModel*>{}, src, {}, EnsembleMode::kMean), InvalidArgument);
}

TEST(FTEnsembleTest, ToyModelsSumToOne) {
  ToyModel pub(small_model());
  FTEnsembleOptions opt;
  opt.epochs = 1;
  auto clients = three_clients(10);
  auto r = ft_ensemble_run(pub, clients, opt);
  ASSERT_EQ(r.models.size(), 3u);
  std::vector<const SequenceModel*> ptrs;
  for (const auto& m : r.models) ptrs.push_back(m.get());
  for (const auto& pair : clients[0].corpus.pairs) {
    EXPECT_NEAR(sum(ft_ensemble_predict(ptrs, pair.source, {}, EnsembleMode::kMean)), 1.0, 1e-9);
    EXPECT_NEAR(sum(ft_ensemble_predict(ptrs, pair.source, {}, EnsembleMode::kWeighted, r.counts)), 1.0, 1e-9);
  }
}

TEST(FTEnsembleTest, LedgerIsModelTimesNTimesNPlusOne) {
  ToyModel pub(small_model());
  const std::uint64_t m = pub.serialize_parameters().size();
  FTEnsembleOptions opt;
  opt.epochs = 1;
  for (std::size_t n : {1u, 2u, 4u}) {
    std::vector<FederatedClient> clients;
    for (std::size_t i = 0; i < n; ++i) clients.push_back({static_cast<NodeId>(i + 1), make_domain_corpus(i % 3, 5, 9)});
    auto r = ft_ensemble_run(pub, clients, opt);
    EXPECT_EQ(r.ledger.total_bytes(), m * n * (n + 1));
  }
}

TEST(SyntheticDomainTest, DeterministicAndSized) {
  EXPECT_TRUE(make_domain_corpus(0, 0, 1).empty());
  auto a = make_domain_corpus(2, 50, 8);
  EXPECT_EQ(a, make_domain_corpus(2, 50, 8));
  EXPECT_EQ(a.size(), 50u);
  EXPECT_NE(a, make_domain_corpus(2, 50, 9));
}

TEST(SyntheticDomainTest, TargetsArePermutedSources) {
  SyntheticDomain d(1);
  auto c = d.sample(100, 3);
  for (const auto& pair : c.pairs) {
    ASSERT_EQ(pair.target.size(), pair.source.size() + 1);
    EXPECT_EQ(pair.target.back(), vocab::kEos);
    for (std::size_t i = 0; i < pair.source.size(); ++i) {
      EXPECT_EQ(pair.target[i], d.translate(pair.source[i]));
      EXPECT_GE(pair.source[i], vocab::kFirstContent);
    }
    EXPECT_GE(pair.source.size(), d.options().min_len);
    EXPECT_LE(pair.source.size(), d.options().max_len);
  }
}

TEST(SyntheticDomainTest, DomainsHaveDistinctPermutations) {
  std::vector<std::vector<TokenId>> perms;
  for (std::size_t id = 0; id < 8; ++id) perms.push_back(SyntheticDomain(id).permutation());
  for (std::size_t i = 0; i < perms.size(); ++i) {
    auto sorted = perms[i];
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t v = 0; v < sorted.size(); ++v) EXPECT_EQ(sorted[v], v);
    for (std::size_t v = 0; v < vocab::kFirstContent; ++v) EXPECT_EQ(perms[i][v], v);
    for (std::size_t j = i + 1; j < perms.size(); ++j) EXPECT_NE(perms[i], perms[j]);
  }
}

// Pairs with unique sources so partitions can be checked by identity.
std::vector<ParallelCorpus> tagged_domains(std::vector<std::size_t> sizes) {
  std::vector<ParallelCorpus> out;
  std::size_t next = 0;
  for (std::size_t d = 0; d < sizes.size(); ++d) {
    ParallelCorpus c;
    c.domain = "d" + std::to_string(d);
    for (std::size_t i = 0; i < sizes[d]; ++i, ++next) {
      c.pairs.push_back({{static_cast<TokenId>(3 + next / 61), static_cast<TokenId>(3 + next % 61)},
                         {static_cast<TokenId>(3 + d), vocab::kEos}});
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::map<TokenSeq, int> multiset(const std::vector<ParallelCorpus>& corpora) {
  std::map<TokenSeq, int> m;
  for (const auto& c : corpora) {
    for (const auto& p : c.pairs) ++m[p.source];
  }
  return m;
}

TEST(PartitionTest, NonIidAndAlphaZeroKeepDomains) {
  auto domains = tagged_domains({30, 50, 70});
  for (auto mode : {PartitionMode::kNonIid, PartitionMode::kAlphaMix}) {
    PartitionSpec spec;
    spec.mode = mode;
    spec.alpha = 0.0;
    auto clients = partition(domains, spec);
    ASSERT_EQ(clients.size(), 3u);
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(clients[c].pairs, domains[c].pairs);
  }
}

TEST(PartitionTest, ConservationAndDisjointness) {
  rnd::Engine rng(82);
  auto domains = tagged_domains({101, 57, 230});
  const auto input = multiset(domains);
  for (int trial = 0; trial < 20; ++trial) {
    PartitionSpec spec;
    spec.seed = trial;
    spec.alpha = rnd::uniform01(rng);
    for (auto mode : {PartitionMode::kIid, PartitionMode::kAlphaMix, PartitionMode::kClientScale}) {
      spec.mode = mode;
      spec.n_clients = mode == PartitionMode::kAlphaMix ? 3 : (mode == PartitionMode::kIid ? 5 : 6);
      auto clients = partition(domains, spec);
      EXPECT_EQ(multiset(clients), input);
      for (const auto& [src, count] : multiset(clients)) ASSERT_EQ(count, 1);
    }
  }
}

TEST(PartitionTest, AlphaMixSizesAndShares) {
  auto domains = tagged_domains({100, 60, 40});
  PartitionSpec spec;
  spec.mode = PartitionMode::kAlphaMix;
  spec.alpha = 0.5;
  spec.seed = 3;
  auto clients = partition(domains, spec);
  const std::vector<std::size_t> sizes{100, 60, 40};
  auto expect = alpha_mix_sizes(sizes, 0.5);
  EXPECT_EQ(expect, (std::vector<std::size_t>{50 + 34, 30 + 33, 20 + 33}));
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_EQ(clients[c].size(), expect[c]);
    const auto own = std::count_if(clients[c].pairs.begin(), clients[c].pairs.end(),
                                   [&](const SentencePair& p) { return p.target[0] == 3 + c; });
    EXPECT_GE(static_cast<std::size_t>(own), sizes[c] / 2);
  }
}

TEST(PartitionTest, AlphaMixLargeCorpusSizes) {
  const std::vector<std::size_t> sizes{222927, 248009, 467309};
  auto out = alpha_mix_sizes(sizes, 0.6);
  EXPECT_EQ(out[0], 276820u);
  // floor(0.6 n) drawn per domain, pool split three ways
  const std::size_t drawn0 = 222927 * 6 / 10, drawn1 = 248009 * 6 / 10, drawn2 = 467309 * 6 / 10;
  const std::size_t pool = drawn0 + drawn1 + drawn2;
  EXPECT_EQ(out[0], 222927 - drawn0 + pool / 3 + (pool % 3 > 0));
  EXPECT_EQ(out[0] + out[1] + out[2], 222927u + 248009u + 467309u);
}

TEST(PartitionTest, BetaSubsamplesFirst) {
  auto domains = tagged_domains({100, 60, 41});
  PartitionSpec spec;
  spec.beta = 0.5;
  auto clients = partition(domains, spec);
  EXPECT_EQ(clients[0].size(), 50u);
  EXPECT_EQ(clients[1].size(), 30u);
  EXPECT_EQ(clients[2].size(), 20u);
  for (std::size_t c = 0; c < 3; ++c) {
    for (const auto& p : clients[c].pairs) {
      EXPECT_NE(std::find(domains[c].pairs.begin(), domains[c].pairs.end(), p), domains[c].pairs.end());
    }
  }
}

TEST(PartitionTest, ClientScaleSplitsEachDomain) {
  auto domains = tagged_domains({30, 30, 30});
  PartitionSpec spec;
  spec.mode = PartitionMode::kClientScale;
  spec.n_clients = 6;
  auto clients = partition(domains, spec);
  ASSERT_EQ(clients.size(), 6u);
  for (std::size_t c = 0; c < 6; ++c) {
    EXPECT_EQ(clients[c].size(), 15u);
    for (const auto& p : clients[c].pairs) EXPECT_EQ(p.target[0], 3 + c / 2);
  }
}

TEST(PartitionTest, DeterministicGivenSeed) {
  auto domains = tagged_domains({40, 40, 40});
  PartitionSpec spec;
  spec.mode = PartitionMode::kIid;
  spec.seed = 5;
  auto a = partition(domains, spec);
  EXPECT_EQ(a, partition(domains, spec));
  spec.seed = 6;
  EXPECT_NE(a, partition(domains, spec));
}

TEST(PartitionTest, InvalidSpecs) {
  auto domains = tagged_domains({10, 10, 10});
  PartitionSpec spec;
  spec.n_clients = 2;
  EXPECT_THROW(partition(domains, spec), InvalidArgument);
  spec = {};
  spec.alpha = 1.5;
  EXPECT_THROW(partition(domains, spec), InvalidArgument);
  spec = {};
  spec.beta = 0.0;
  EXPECT_THROW(partition(domains, spec), InvalidArgument);
  spec = {};
  spec.mode = PartitionMode::kClientScale;
  spec.n_clients = 4;
  EXPECT_THROW(partition(domains, spec), InvalidArgument);
  spec = {};
  spec.n_clients = 0;
  EXPECT_THROW(partition(domains, spec), InvalidArgument);
  EXPECT_THROW(parse_partition_mode("dirichlet"), InvalidArgument);
  for (auto m : {PartitionMode::kNonIid, PartitionMode::kIid, PartitionMode::kAlphaMix, PartitionMode::kClientScale}) {
    EXPECT_EQ(parse_partition_mode(to_string(m)), m);
  }
}

}  // namespace
}  // namespace fednn
