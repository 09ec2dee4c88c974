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
#include <map>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fednn/bytes.hpp"
#include "fednn/corpus.hpp"

namespace fednn {

// A conditional next-token model that also exposes its decoder context
// representation, which is what datastore keys are made of.
class SequenceModel {
 public:
  virtual ~SequenceModel() = default;

  virtual std::size_t vocab_size() const = 0;
  virtual std::size_t dim() const = 0;

  // Context representation for predicting target position |prefix|.
  virtual std::vector<float> context(std::span<const TokenId> source,
                                     std::span<const TokenId> prefix) const = 0;

  // Next-token distribution; sums to 1.
  virtual std::vector<double> next_token_dist(std::span<const TokenId> source,
                                              std::span<const TokenId> prefix) const = 0;

  virtual std::vector<float> parameters() const = 0;
  virtual void set_parameters(std::span<const float> params) = 0;

  // Runs `steps` mini-batch gradient steps on mean cross-entropy over the
  // corpus. Returns the corpus mean loss after the last step.
  virtual double train_steps(const ParallelCorpus& corpus, std::size_t steps, double lr) = 0;

  // Mean per-token negative log-likelihood of the corpus targets.
  virtual double mean_loss(const ParallelCorpus& corpus) const;

  // Mini-batch steps that make one pass over the corpus.
  virtual std::size_t steps_per_epoch(const ParallelCorpus& corpus) const {
    return corpus.target_tokens();
  }

  virtual std::unique_ptr<SequenceModel> clone() const = 0;

  // Parameters as little-endian float32, the form that crosses the wire.
  Bytes serialize_parameters() const;
  void load_parameters(std::span<const std::uint8_t> bytes);
};

struct ToyModelConfig {
  std::size_t vocab_size = 64;
  std::size_t dim = 32;
  std::uint64_t embedding_seed = 7;
  std::uint64_t train_seed = 11;
  std::size_t batch_size = 32;
};

// Desk-scale stand-in for a Transformer NMT model. Embeddings are frozen
// pseudo-random unit vectors; only the output projection is trained.
//
//   context = normalize(mean_j E[x_j] + 0.5 E[y_{t-1}] + 0.25 E[y_{t-2}])
//   p(. | x, y_<t) = softmax(W^T context)
class ToyModel final : public SequenceModel {
 public:
  explicit ToyModel(const ToyModelConfig& config = {});

  std::size_t vocab_size() const override { return config_.vocab_size; }
  std::size_t dim() const override { return config_.dim; }

  std::vector<float> context(std::span<const TokenId> source,
                             std::span<const TokenId> prefix) const override;
  std::vector<double> next_token_dist(std::span<const TokenId> source,
                                      std::span<const TokenId> prefix) const override;

  std::vector<float> parameters() const override { return output_; }
  void set_parameters(std::span<const float> params) override;

  double train_steps(const ParallelCorpus& corpus, std::size_t steps, double lr) override;
  double mean_loss(const ParallelCorpus& corpus) const override;

  std::unique_ptr<SequenceModel> clone() const override;

  std::size_t steps_per_epoch(const ParallelCorpus& corpus) const override;

  std::span<const float> embedding(TokenId token) const;
  const ToyModelConfig& config() const { return config_; }

 private:
  std::vector<double> dist_from_context(std::span<const float> ctx) const;

  ToyModelConfig config_;
  std::vector<float> embeddings_;  // vocab x dim, row-major
  std::vector<float> output_;      // dim x vocab, row-major
  std::mt19937_64 batch_rng_;
};

// Replays (context, distribution) pairs precomputed by an external model.
// Lookups are keyed by the exact (source, prefix) token sequences.
//
// FNTR layout (little-endian): "FNTR", u32 version, u32 dim, u32 vocab,
// u32 count, then per entry: u32 |x|, x ids, u32 |prefix|, prefix ids,
// dim float32 context, vocab float32 distribution.
class TraceModel final : public SequenceModel {
 public:
  static constexpr std::uint32_t kVersion = 1;

  TraceModel(std::size_t dim, std::size_t vocab_size);

  static TraceModel deserialize(std::span<const std::uint8_t> bytes);
  static TraceModel load(const std::string& path);
  Bytes serialize() const;

  // Captures `model` at every target step of `corpus`.
  static TraceModel record(const SequenceModel& model, const ParallelCorpus& corpus);

  void add(TokenSeq source, TokenSeq prefix, std::vector<float> context,
           std::vector<float> distribution);
  std::size_t entries() const { return entries_.size(); }

  std::size_t vocab_size() const override { return vocab_; }
  std::size_t dim() const override { return dim_; }
  std::vector<float> context(std::span<const TokenId> source,
                             std::span<const TokenId> prefix) const override;
  std::vector<double> next_token_dist(std::span<const TokenId> source,
                                      std::span<const TokenId> prefix) const override;
  std::vector<float> parameters() const override { return {}; }
  void set_parameters(std::span<const float> params) override;
  // Frozen: returns the current mean loss without changing anything.
  double train_steps(const ParallelCorpus& corpus, std::size_t steps, double lr) override;
  std::unique_ptr<SequenceModel> clone() const override;

 private:
  struct Entry {
    TokenSeq source;
    TokenSeq prefix;
    std::vector<float> context;
    std::vector<float> distribution;
  };
  const Entry& find(std::span<const TokenId> source, std::span<const TokenId> prefix) const;

  std::size_t dim_;
  std::size_t vocab_;
  std::vector<Entry> entries_;
  std::map<std::pair<TokenSeq, TokenSeq>, std::size_t> lookup_;
};

}  // namespace fednn
