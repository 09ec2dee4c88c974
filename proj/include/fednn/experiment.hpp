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
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fednn/baselines.hpp"
#include "fednn/inference.hpp"
#include "fednn/privacy.hpp"
#include "fednn/quantizer.hpp"
#include "fednn/sequence_model.hpp"
#include "json.hpp"

namespace fednn {

inline constexpr int kReportVersion = 1;

struct ExperimentConfig {
  PartitionMode scenario = PartitionMode::kNonIid;
  std::size_t n_domains = 3;
  std::size_t n_clients = 3;
  double alpha = 0.0;
  double beta = 1.0;

  std::size_t vocab_size = 64;
  std::size_t domain_vocab = 16;
  std::size_t train_size = 2000;  // pairs per domain
  std::size_t test_size = 200;
  std::size_t public_size = 2000;
  std::size_t vertical_size = 500;
  std::uint64_t world_seed = 2023;
  std::uint64_t data_seed = 1;

  std::size_t model_dim = 32;
  std::uint64_t embedding_seed = 7;
  std::uint64_t train_seed = 11;
  std::size_t public_epochs = 3;
  double learning_rate = 0.5;

  PQConfig pq;
  MetaKConfig meta = [] {
    MetaKConfig m;
    m.pad_distance = 8.0;  // keys are unit-norm, so real distances stay below ~4
    m.normalize_distances = true;
    return m;
  }();
  std::size_t meta_epochs = 20;
  std::uint64_t meta_seed = 5;

  std::vector<std::string> methods = {"public", "fednn"};
  std::size_t fedavg_rounds = 10;
  std::size_t fedavg_frequency = 1;
  std::size_t ft_epochs = 3;
  std::uint64_t protocol_seed = 99;
  std::uint64_t key_seed = 42;

  std::optional<double> m_mb;
  std::optional<double> d_mb;
  std::string output;

  void validate() const;
  // Resolved key/value view, in documented key order.
  std::vector<std::pair<std::string, std::string>> entries() const;
};

// Flat "key = value" lines; '#' starts a comment. Unknown keys and bad
// values raise ConfigError naming every offending key.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);
const std::vector<std::string>& config_keys();

// Everything an experiment derives from its config before any method runs.
struct World {
  ExperimentConfig config;
  DomainOptions domain_options;
  std::vector<ParallelCorpus> domain_train;
  std::vector<ParallelCorpus> domain_test;
  ParallelCorpus public_train;
  ParallelCorpus public_test;
  ParallelCorpus vertical;
  std::vector<ParallelCorpus> client_train;
  std::vector<ParallelCorpus> client_test;
  std::unique_ptr<ToyModel> public_model;
  PQModel pq;
  std::unique_ptr<MetaKNetwork> meta_k;
};

inline constexpr std::size_t kPublicDomain = 1000;
inline constexpr std::size_t kVerticalDomain = 1001;

// The general-purpose public domain draws from the whole content vocabulary.
DomainOptions public_domain_options(const DomainOptions& base);

World build_world(const ExperimentConfig& config);

// Server-side Meta-k training. Half of the vertical corpus forms the
// datastore; queries come from the other half plus as many off-domain pairs.
MetaKNetwork train_shared_meta_k(const SequenceModel& model, const PQModel& pq,
                                 const ParallelCorpus& vertical, const ParallelCorpus& off_domain,
                                 const MetaKConfig& meta, std::size_t epochs, std::uint64_t seed);

NextTokenFn model_fn(const SequenceModel& model);

struct FedNNOutcome {
  FedNNRoundResult round;
  std::vector<std::unique_ptr<PQIndex>> indexes;  // one per client
};

FedNNOutcome run_fednn(const World& world);

nlohmann::ordered_json run_experiment(const ExperimentConfig& config);
std::string report_text(const nlohmann::ordered_json& report);
std::string content_hash(const ExperimentConfig& config);

struct PrivacyEvalOptions {
  std::size_t defender_domain = 0;
  std::size_t attacker_domain = 0;
  std::size_t size = 300;          // defender pairs
  std::size_t attacker_size = 300;  // attacker-owned pairs
  double overlap = 0.5;             // fraction of defender pairs the attacker also holds
  std::size_t public_size = 2000;
  double tau = kDefaultTau;
  std::uint64_t seed = 1;
  DomainOptions domain;
  std::size_t model_dim = 32;
  PQConfig pq;
};

struct PrivacyEvalResult {
  PrivacyReport raw;
  PrivacyReport encoded;
};

// Paired attack: the same records are attacked once through raw keys and
// once through PQ codes.
PrivacyEvalResult run_privacy_eval(const PrivacyEvalOptions& options);

}  // namespace fednn
