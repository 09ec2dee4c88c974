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
#include <numeric>

#include "fednn/error.hpp"
#include "fednn/random.hpp"

namespace fednn {

std::vector<float> fedavg_aggregate(std::span<const std::vector<float>> params,
                                    std::span<const double> counts) {
  if (params.empty()) throw InvalidArgument("fedavg_aggregate needs at least one model");
  if (params.size() != counts.size()) throw DimensionError("one count per model is required");
  const std::size_t len = params.front().size();
  double total = 0.0;
  for (std::size_t m = 0; m < params.size(); ++m) {
    if (params[m].size() != len) throw DimensionError("parameter vectors differ in length");
    if (counts[m] < 0.0 || !std::isfinite(counts[m])) throw InvalidArgument("counts must be non-negative");
    total += counts[m];
  }
  if (!(total > 0.0)) throw InvalidArgument("fedavg_aggregate: total count is zero");
  std::vector<double> acc(len, 0.0);
  for (std::size_t m = 0; m < params.size(); ++m) {
    const double w = counts[m] / total;
    for (std::size_t i = 0; i < len; ++i) acc[i] += w * params[m][i];
  }
  return {acc.begin(), acc.end()};
}

namespace {

std::size_t local_round_steps(const SequenceModel& model, const ParallelCorpus& corpus,
                              std::optional<std::size_t> local_steps) {
  return local_steps ? *local_steps : model.steps_per_epoch(corpus);
}

ParallelCorpus concat(std::span<const FederatedClient> clients) {
  ParallelCorpus all;
  for (const auto& c : clients) {
    all.pairs.insert(all.pairs.end(), c.corpus.pairs.begin(), c.corpus.pairs.end());
  }
  return all;
}

}  // namespace

FedAvgResult fedavg_run(const SequenceModel& server_model, std::span<const FederatedClient> clients,
                        const FedAvgOptions& options, const ParallelCorpus* server_data) {
  if (options.rounds == 0) throw InvalidArgument("FedAvg needs R >= 1");
  if (clients.empty()) throw InvalidArgument("FedAvg needs at least one client");
  if (options.include_server_data && !server_data) {
    throw InvalidArgument("include_server_data requires server data");
  }
  Network net(false);
  auto global = server_model.clone();
  const std::size_t per_cycle =
      options.frequency == kAggregateOnce ? options.rounds : std::min(options.frequency, options.rounds);
  std::size_t done_rounds = 0;
  std::size_t cycles = 0;
  std::size_t model_bytes = 0;

  while (done_rounds < options.rounds) {
    const std::size_t this_cycle = std::min(per_cycle, options.rounds - done_rounds);
    const Bytes blob = global->serialize_parameters();
    model_bytes = blob.size();
    for (const auto& c : clients) net.send({MessageKind::kModelAggregate, kServerNode, c.id, blob});

    for (const auto& c : clients) {
      auto msg = net.receive(c.id);
      if (!msg) throw ProtocolError("client missed the global model");
      auto local = server_model.clone();
      local->load_parameters(msg->payload);
      const std::size_t steps = local_round_steps(*local, c.corpus, options.local_steps);
      for (std::size_t r = 0; r < this_cycle && steps > 0 && !c.corpus.empty(); ++r) {
        local->train_steps(c.corpus, steps, options.learning_rate);
      }
      net.send({MessageKind::kModelUpdate, c.id, kServerNode, local->serialize_parameters()});
    }

    std::vector<std::vector<float>> params;
    std::vector<double> counts;
    for (const auto& c : clients) {
      auto msg = net.receive(kServerNode);
      if (!msg) throw ProtocolError("server missed a client update");
      auto update = server_model.clone();
      update->load_parameters(msg->payload);
      params.push_back(update->parameters());
      counts.push_back(static_cast<double>(c.corpus.size()));
    }
    if (options.include_server_data) {
      auto own = global->clone();
      const std::size_t steps = local_round_steps(*own, *server_data, options.local_steps);
      for (std::size_t r = 0; r < this_cycle && steps > 0 && !server_data->empty(); ++r) {
        own->train_steps(*server_data, steps, options.learning_rate);
      }
      params.push_back(own->parameters());
      counts.push_back(static_cast<double>(server_data->size()));
    }
    global->set_parameters(fedavg_aggregate(params, counts));
    done_rounds += this_cycle;
    ++cycles;
  }

  FedAvgResult result;
  result.ledger = net.ledger();
  result.ledger.model_bytes = model_bytes;
  result.ledger.clients = clients.size();
  result.ledger.rounds = cycles;
  result.aggregations = cycles;
  result.final_loss = global->mean_loss(concat(clients));
  result.model = std::move(global);
  return result;
}

std::vector<double> ft_ensemble_predict(std::span<const SequenceModel* const> models,
                                        std::span<const TokenId> source,
                                        std::span<const TokenId> prefix, EnsembleMode mode,
                                        std::span<const double> counts) {
  if (models.empty()) throw InvalidArgument("FT-Ensemble needs at least one model");
  const std::size_t vocab_n = models.front()->vocab_size();
  std::vector<double> weights(models.size(), 1.0 / static_cast<double>(models.size()));
  if (mode == EnsembleMode::kWeighted) {
    if (counts.size() != models.size()) throw DimensionError("one count per model is required");
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    if (!(total > 0.0)) throw InvalidArgument("weighted ensemble needs a positive total count");
    for (std::size_t m = 0; m < models.size(); ++m) weights[m] = counts[m] / total;
  }
  std::vector<double> out(vocab_n, 0.0);
  for (std::size_t m = 0; m < models.size(); ++m) {
    if (models[m]->vocab_size() != vocab_n) throw DimensionError("ensemble members differ in vocabulary");
    auto dist = models[m]->next_token_dist(source, prefix);
    for (std::size_t v = 0; v < vocab_n; ++v) out[v] += weights[m] * dist[v];
  }
  return out;
}

FTEnsembleResult ft_ensemble_run(const SequenceModel& public_model,
                                 std::span<const FederatedClient> clients,
                                 const FTEnsembleOptions& options) {
  Network net(false);
  const Bytes blob = public_model.serialize_parameters();
  for (const auto& c : clients) net.send({MessageKind::kBroadcastModel, kServerNode, c.id, blob});

  FTEnsembleResult result;
  for (const auto& c : clients) {
    auto msg = net.receive(c.id);
    if (!msg) throw ProtocolError("client missed the public model");
    auto local = public_model.clone();
    local->load_parameters(msg->payload);
    if (!c.corpus.empty()) {
      local->train_steps(c.corpus, options.epochs * local->steps_per_epoch(c.corpus),
                         options.learning_rate);
    }
    net.send({MessageKind::kModelUpdate, c.id, kServerNode, local->serialize_parameters()});
    result.models.push_back(std::move(local));
    result.counts.push_back(static_cast<double>(c.corpus.size()));
  }
  std::vector<Bytes> uploads;
  for (std::size_t i = 0; i < clients.size(); ++i) {
    auto msg = net.receive(kServerNode);
    if (!msg) throw ProtocolError("server missed a fine-tuned model");
    uploads.push_back(std::move(msg->payload));
  }
  for (std::size_t to = 0; to < clients.size(); ++to) {
    for (std::size_t from = 0; from < clients.size(); ++from) {
      if (from == to) continue;
      net.send({MessageKind::kModelAggregate, kServerNode, clients[to].id, uploads[from]});
    }
  }
  result.ledger = net.ledger();
  result.ledger.model_bytes = blob.size();
  result.ledger.clients = clients.size();
  result.ledger.rounds = 1;
  return result;
}

// ---------------------------------------------------------------------------

SyntheticDomain::SyntheticDomain(std::size_t domain_id, const DomainOptions& options)
    : id_(domain_id), options_(options) {
  const std::size_t vocab_n = options.vocab_size;
  if (vocab_n <= vocab::kFirstContent) throw InvalidArgument("vocabulary too small for a domain");
  const std::size_t content = vocab_n - vocab::kFirstContent;
  if (options.domain_vocab == 0 || options.domain_vocab > content) {
    throw InvalidArgument("domain_vocab must be in 1..(vocab_size - reserved)");
  }
  if (options.min_len == 0 || options.min_len > options.max_len) {
    throw InvalidArgument("length range must satisfy 1 <= min_len <= max_len");
  }
  if (options.follow_prob < 0.0 || options.follow_prob > 1.0) {
    throw InvalidArgument("follow_prob must be in [0, 1]");
  }
  rnd::Engine rng(rnd::derive_seed(options.world_seed, domain_id));

  std::vector<TokenId> shuffled(content);
  std::iota(shuffled.begin(), shuffled.end(), vocab::kFirstContent);
  rnd::shuffle(std::span(shuffled), rng);
  permutation_.resize(vocab_n);
  std::iota(permutation_.begin(), permutation_.begin() + vocab::kFirstContent, TokenId{0});
  for (std::size_t i = 0; i < content; ++i) permutation_[vocab::kFirstContent + i] = shuffled[i];

  std::vector<TokenId> pool(content);
  std::iota(pool.begin(), pool.end(), vocab::kFirstContent);
  rnd::shuffle(std::span(pool), rng);
  source_vocab_.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(options.domain_vocab));
  successor_.assign(vocab_n, 0);
  for (std::size_t i = 0; i < source_vocab_.size(); ++i) {
    successor_[source_vocab_[i]] = source_vocab_[(i + 1) % source_vocab_.size()];
  }
}

ParallelCorpus SyntheticDomain::sample(std::size_t size, std::uint64_t seed) const {
  rnd::Engine rng(rnd::derive_seed(rnd::derive_seed(seed, id_), options_.world_seed));
  ParallelCorpus corpus;
  corpus.domain = "domain" + std::to_string(id_);
  corpus.pairs.reserve(size);
  const std::size_t span_len = options_.max_len - options_.min_len + 1;
  auto random_token = [&] {
    return source_vocab_[rnd::uniform_index(rng, source_vocab_.size())];
  };
  for (std::size_t i = 0; i < size; ++i) {
    const std::size_t len = options_.min_len + rnd::uniform_index(rng, span_len);
    SentencePair pair;
    pair.source.reserve(len);
    TokenId tok = random_token();
    for (std::size_t t = 0; t < len; ++t) {
      if (t > 0) tok = rnd::uniform01(rng) < options_.follow_prob ? successor_[tok] : random_token();
      pair.source.push_back(tok);
    }
    pair.target.reserve(len + 1);
    for (TokenId s : pair.source) pair.target.push_back(translate(s));
    pair.target.push_back(vocab::kEos);
    corpus.pairs.push_back(std::move(pair));
  }
  return corpus;
}

ParallelCorpus make_domain_corpus(std::size_t domain_id, std::size_t size, std::uint64_t seed,
                                  const DomainOptions& options) {
  return SyntheticDomain(domain_id, options).sample(size, seed);
}

// ---------------------------------------------------------------------------

PartitionMode parse_partition_mode(const std::string& name) {
  if (name == "non_iid") return PartitionMode::kNonIid;
  if (name == "iid") return PartitionMode::kIid;
  if (name == "alpha_mix") return PartitionMode::kAlphaMix;
  if (name == "client_scale") return PartitionMode::kClientScale;
  throw InvalidArgument("unknown partition mode '" + name + "'");
}

std::string to_string(PartitionMode mode) {
  switch (mode) {
    case PartitionMode::kNonIid: return "non_iid";
    case PartitionMode::kIid: return "iid";
    case PartitionMode::kAlphaMix: return "alpha_mix";
    case PartitionMode::kClientScale: return "client_scale";
  }
  return "unknown";
}

void PartitionSpec::validate(std::size_t n_domains) const {
  if (n_clients == 0) throw InvalidArgument("n_clients must be >= 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must be in [0, 1]");
  if (!(beta > 0.0 && beta <= 1.0)) throw InvalidArgument("beta must be in (0, 1]");
  if ((mode == PartitionMode::kNonIid || mode == PartitionMode::kAlphaMix) &&
      n_clients != n_domains) {
    throw InvalidArgument(to_string(mode) + " needs one client per domain");
  }
  if (mode == PartitionMode::kClientScale && (n_domains == 0 || n_clients % n_domains != 0)) {
    throw InvalidArgument("client_scale needs n_clients to be a multiple of the domain count");
  }
}

namespace {

// Splits n items into `parts` near-equal shares; earlier shares get the
// remainder.
std::vector<std::size_t> equal_shares(std::size_t n, std::size_t parts) {
  std::vector<std::size_t> shares(parts, n / parts);
  for (std::size_t i = 0; i < n % parts; ++i) ++shares[i];
  return shares;
}

std::vector<SentencePair> take_random(std::vector<SentencePair>& from, std::size_t count,
                                      rnd::Engine& rng) {
  std::vector<std::size_t> idx(from.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  rnd::shuffle(std::span(idx), rng);
  std::vector<bool> taken(from.size(), false);
  for (std::size_t i = 0; i < count; ++i) taken[idx[i]] = true;
  std::vector<SentencePair> picked, kept;
  for (std::size_t i = 0; i < from.size(); ++i) {
    (taken[i] ? picked : kept).push_back(std::move(from[i]));
  }
  from = std::move(kept);
  return picked;
}

}  // namespace

std::vector<std::size_t> alpha_mix_sizes(std::span<const std::size_t> domain_sizes, double alpha) {
  std::size_t pool = 0;
  std::vector<std::size_t> kept;
  for (std::size_t n : domain_sizes) {
    const auto drawn = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(n)));
    pool += drawn;
    kept.push_back(n - drawn);
  }
  auto shares = equal_shares(pool, domain_sizes.size());
  for (std::size_t c = 0; c < kept.size(); ++c) kept[c] += shares[c];
  return kept;
}

std::vector<ParallelCorpus> partition(std::span<const ParallelCorpus> domains,
                                      const PartitionSpec& spec) {
  spec.validate(domains.size());
  rnd::Engine rng(spec.seed);

  std::vector<std::vector<SentencePair>> pools;
  for (const auto& d : domains) {
    std::vector<SentencePair> pairs = d.pairs;
    if (spec.beta < 1.0) {
      const auto keep = static_cast<std::size_t>(std::floor(spec.beta * static_cast<double>(pairs.size())));
      pairs = take_random(pairs, keep, rng);
    }
    pools.push_back(std::move(pairs));
  }

  const std::size_t N = spec.n_clients;
  std::vector<ParallelCorpus> clients(N);
  switch (spec.mode) {
    case PartitionMode::kNonIid:
      for (std::size_t c = 0; c < N; ++c) {
        clients[c].pairs = std::move(pools[c]);
        clients[c].domain = domains[c].domain;
      }
      break;
    case PartitionMode::kIid: {
      std::vector<SentencePair> all;
      for (auto& p : pools) all.insert(all.end(), std::make_move_iterator(p.begin()), std::make_move_iterator(p.end()));
      rnd::shuffle(std::span(all), rng);
      auto shares = equal_shares(all.size(), N);
      std::size_t pos = 0;
      for (std::size_t c = 0; c < N; ++c) {
        clients[c].domain = "iid";
        clients[c].pairs.assign(std::make_move_iterator(all.begin() + static_cast<std::ptrdiff_t>(pos)),
                                std::make_move_iterator(all.begin() + static_cast<std::ptrdiff_t>(pos + shares[c])));
        pos += shares[c];
      }
      break;
    }
    case PartitionMode::kAlphaMix: {
      std::vector<SentencePair> pooled;
      for (auto& p : pools) {
        const auto drawn = static_cast<std::size_t>(std::floor(spec.alpha * static_cast<double>(p.size())));
        auto picked = take_random(p, drawn, rng);
        pooled.insert(pooled.end(), std::make_move_iterator(picked.begin()), std::make_move_iterator(picked.end()));
      }
      rnd::shuffle(std::span(pooled), rng);
      auto shares = equal_shares(pooled.size(), N);
      std::size_t pos = 0;
      for (std::size_t c = 0; c < N; ++c) {
        clients[c].domain = domains[c].domain;
        clients[c].pairs = std::move(pools[c]);
        clients[c].pairs.insert(clients[c].pairs.end(),
                                std::make_move_iterator(pooled.begin() + static_cast<std::ptrdiff_t>(pos)),
                                std::make_move_iterator(pooled.begin() + static_cast<std::ptrdiff_t>(pos + shares[c])));
        pos += shares[c];
      }
      break;
    }
    case PartitionMode::kClientScale: {
      const std::size_t per_domain = N / domains.size();
      for (std::size_t d = 0; d < domains.size(); ++d) {
        auto& p = pools[d];
        rnd::shuffle(std::span(p), rng);
        auto shares = equal_shares(p.size(), per_domain);
        std::size_t pos = 0;
        for (std::size_t s = 0; s < per_domain; ++s) {
          auto& client = clients[d * per_domain + s];
          client.domain = domains[d].domain;
          client.pairs.assign(std::make_move_iterator(p.begin() + static_cast<std::ptrdiff_t>(pos)),
                              std::make_move_iterator(p.begin() + static_cast<std::ptrdiff_t>(pos + shares[s])));
          pos += shares[s];
        }
      }
      break;
    }
  }
  return clients;
}

}  // namespace fednn
