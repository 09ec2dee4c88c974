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

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fednn/corpus.hpp"
#include "fednn/federation.hpp"
#include "fednn/sequence_model.hpp"

namespace fednn {

// theta = sum_m (n_m / n) theta_m
std::vector<float> fedavg_aggregate(std::span<const std::vector<float>> params,
                                    std::span<const double> counts);

struct FederatedClient {
  NodeId id = 1;
  ParallelCorpus corpus;
};

struct FedAvgOptions {
  std::size_t rounds = 10;     // R, local update rounds in total
  std::size_t frequency = 1;   // k; 0 means aggregate once at the end
  bool include_server_data = false;
  std::optional<std::size_t> local_steps;  // per local round; unset means one epoch
  double learning_rate = 0.5;
};

inline constexpr std::size_t kAggregateOnce = 0;

struct FedAvgResult {
  std::unique_ptr<SequenceModel> model;
  CostLedger ledger;
  std::size_t aggregations = 0;
  double final_loss = 0.0;  // mean NLL of the global model on all client data
};

// Multi-round parameter averaging. Each aggregation cycle costs one model
// download and one upload per client.
FedAvgResult fedavg_run(const SequenceModel& server_model, std::span<const FederatedClient> clients,
                        const FedAvgOptions& options, const ParallelCorpus* server_data = nullptr);

enum class EnsembleMode { kMean, kWeighted };

// Mean (or count-weighted) mixture of the models' next-token distributions.
std::vector<double> ft_ensemble_predict(std::span<const SequenceModel* const> models,
                                        std::span<const TokenId> source,
                                        std::span<const TokenId> prefix, EnsembleMode mode,
                                        std::span<const double> counts = {});

struct FTEnsembleOptions {
  std::size_t epochs = 5;
  double learning_rate = 0.5;
};

struct FTEnsembleResult {
  std::vector<std::unique_ptr<SequenceModel>> models;
  std::vector<double> counts;
  CostLedger ledger;
};

// Fine-tunes one copy of the public model per client, then every client
// receives every other client's model: M*N*(N+1) in total.
FTEnsembleResult ft_ensemble_run(const SequenceModel& public_model,
                                 std::span<const FederatedClient> clients,
                                 const FTEnsembleOptions& options);

// ---------------------------------------------------------------------------
// Synthetic domains

struct DomainOptions {
  std::size_t vocab_size = 64;
  std::size_t domain_vocab = 16;  // source tokens used by one domain
  std::size_t min_len = 4;
  std::size_t max_len = 10;
  double follow_prob = 0.9;        // chance the next source token follows the domain chain
  std::uint64_t world_seed = 2023;
};

// A vocabulary-permutation translation task. Sources walk a domain-specific
// successor chain over a domain-specific token subset; the target is the
// domain permutation applied token by token, followed by EOS.
class SyntheticDomain {
 public:
  SyntheticDomain(std::size_t domain_id, const DomainOptions& options = {});

  ParallelCorpus sample(std::size_t size, std::uint64_t seed) const;

  std::size_t id() const { return id_; }
  TokenId translate(TokenId source_token) const { return permutation_[source_token]; }
  const std::vector<TokenId>& permutation() const { return permutation_; }
  const std::vector<TokenId>& source_vocab() const { return source_vocab_; }
  const DomainOptions& options() const { return options_; }

 private:
  std::size_t id_;
  DomainOptions options_;
  std::vector<TokenId> permutation_;   // full vocab; reserved ids fixed
  std::vector<TokenId> source_vocab_;  // in chain order
  std::vector<TokenId> successor_;     // full vocab, only chain entries used
};

ParallelCorpus make_domain_corpus(std::size_t domain_id, std::size_t size, std::uint64_t seed,
                                  const DomainOptions& options = {});

// ---------------------------------------------------------------------------
// Partitioning

enum class PartitionMode { kNonIid, kIid, kAlphaMix, kClientScale };

PartitionMode parse_partition_mode(const std::string& name);
std::string to_string(PartitionMode mode);

struct PartitionSpec {
  PartitionMode mode = PartitionMode::kNonIid;
  std::size_t n_clients = 3;
  double alpha = 0.0;  // fraction pooled from each domain (alpha_mix)
  double beta = 1.0;   // per-domain subsampling ratio applied first
  std::uint64_t seed = 0;

  void validate(std::size_t n_domains) const;
};

// Client sizes for alpha_mix: client c keeps |D_c| - floor(alpha |D_c|) of
// its own pairs plus a 1/N share of the pool; pool remainders go to the
// lowest client ids.
std::vector<std::size_t> alpha_mix_sizes(std::span<const std::size_t> domain_sizes, double alpha);

std::vector<ParallelCorpus> partition(std::span<const ParallelCorpus> domains,
                                      const PartitionSpec& spec);

}  // namespace fednn
