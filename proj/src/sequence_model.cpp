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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

#include "fednn/error.hpp"
#include "fednn/random.hpp"

namespace fednn {
namespace {

void softmax_inplace(std::vector<double>& logits) {
  double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double& v : logits) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : logits) v /= sum;
}

}  // namespace

double SequenceModel::mean_loss(const ParallelCorpus& corpus) const {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& pair : corpus.pairs) {
    std::span<const TokenId> target(pair.target);
    for (std::size_t t = 0; t < target.size(); ++t) {
      auto dist = next_token_dist(pair.source, target.first(t));
      total -= std::log(std::max(dist[target[t]], 1e-300));
      ++count;
    }
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

Bytes SequenceModel::serialize_parameters() const {
  ByteWriter w;
  auto params = parameters();
  w.f32s(params);
  return w.take();
}

void SequenceModel::load_parameters(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % 4 != 0) {
    throw FormatError(FormatErrc::kCorrupt, "parameter blob not a multiple of 4 bytes");
  }
  std::vector<float> params(bytes.size() / 4);
  ByteReader r(bytes);
  r.f32s(params);
  set_parameters(params);
}

// ---------------------------------------------------------------------------
// ToyModel

ToyModel::ToyModel(const ToyModelConfig& config)
    : config_(config),
      embeddings_(config.vocab_size * config.dim),
      output_(config.dim * config.vocab_size, 0.0f),
      batch_rng_(config.train_seed) {
  if (config.vocab_size <= vocab::kFirstContent || config.dim == 0) {
    throw InvalidArgument("ToyModel needs dim > 0 and room for reserved tokens");
  }
  if (config.batch_size == 0) throw InvalidArgument("batch_size must be positive");
  rnd::Engine rng(config.embedding_seed);
  for (std::size_t v = 0; v < config.vocab_size; ++v) {
    std::vector<double> row(config.dim);
    double norm = 0.0;
    for (double& x : row) {
      x = rnd::normal(rng);
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < config.dim; ++i) {
      embeddings_[v * config.dim + i] = static_cast<float>(row[i] / norm);
    }
  }
}

std::span<const float> ToyModel::embedding(TokenId token) const {
  if (token >= config_.vocab_size) throw InvalidArgument("token outside vocabulary");
  return std::span<const float>(embeddings_).subspan(token * config_.dim, config_.dim);
}

std::vector<float> ToyModel::context(std::span<const TokenId> source,
                                     std::span<const TokenId> prefix) const {
  const std::size_t d = config_.dim;
  std::vector<double> acc(d, 0.0);
  if (!source.empty()) {
    for (TokenId tok : source) {
      auto e = embedding(tok);
      for (std::size_t i = 0; i < d; ++i) acc[i] += e[i];
    }
    for (double& v : acc) v /= static_cast<double>(source.size());
  }
  const double weights[2] = {0.5, 0.25};
  for (std::size_t back = 0; back < 2 && back < prefix.size(); ++back) {
    auto e = embedding(prefix[prefix.size() - 1 - back]);
    for (std::size_t i = 0; i < d; ++i) acc[i] += weights[back] * e[i];
  }
  double norm = 0.0;
  for (double v : acc) norm += v * v;
  norm = std::sqrt(norm);
  std::vector<float> out(d, 0.0f);
  if (norm > 0.0) {
    for (std::size_t i = 0; i < d; ++i) out[i] = static_cast<float>(acc[i] / norm);
  }
  return out;
}

std::vector<double> ToyModel::dist_from_context(std::span<const float> ctx) const {
  const std::size_t d = config_.dim;
  const std::size_t vocab_n = config_.vocab_size;
  std::vector<double> logits(vocab_n, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    const double c = ctx[i];
    const float* row = output_.data() + i * vocab_n;
    for (std::size_t j = 0; j < vocab_n; ++j) logits[j] += c * row[j];
  }
  softmax_inplace(logits);
  return logits;
}

std::vector<double> ToyModel::next_token_dist(std::span<const TokenId> source,
                                              std::span<const TokenId> prefix) const {
  return dist_from_context(context(source, prefix));
}

void ToyModel::set_parameters(std::span<const float> params) {
  if (params.size() != output_.size()) {
    throw DimensionError("ToyModel expects " + std::to_string(output_.size()) +
                         " parameters, got " + std::to_string(params.size()));
  }
  std::copy(params.begin(), params.end(), output_.begin());
}

std::size_t ToyModel::steps_per_epoch(const ParallelCorpus& corpus) const {
  std::size_t n = corpus.target_tokens();
  return (n + config_.batch_size - 1) / config_.batch_size;
}

double ToyModel::train_steps(const ParallelCorpus& corpus, std::size_t steps, double lr) {
  validate_corpus(corpus, config_.vocab_size);
  const std::size_t d = config_.dim;
  const std::size_t vocab_n = config_.vocab_size;

  // Contexts depend only on the frozen embeddings.
  std::vector<float> contexts;
  std::vector<TokenId> golds;
  for (const auto& pair : corpus.pairs) {
    std::span<const TokenId> target(pair.target);
    for (std::size_t t = 0; t < target.size(); ++t) {
      auto ctx = context(pair.source, target.first(t));
      contexts.insert(contexts.end(), ctx.begin(), ctx.end());
      golds.push_back(target[t]);
    }
  }
  const std::size_t n = golds.size();
  if (n == 0 || steps == 0) return mean_loss(corpus);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rnd::shuffle(std::span(order), batch_rng_);
  std::size_t cursor = 0;

  std::vector<double> grad(output_.size());
  for (std::size_t step = 0; step < steps; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    const std::size_t batch = std::min(config_.batch_size, n);
    for (std::size_t b = 0; b < batch; ++b) {
      if (cursor == n) {
        rnd::shuffle(std::span(order), batch_rng_);
        cursor = 0;
      }
      const std::size_t ex = order[cursor++];
      std::span<const float> ctx(contexts.data() + ex * d, d);
      auto p = dist_from_context(ctx);
      p[golds[ex]] -= 1.0;
      for (std::size_t i = 0; i < d; ++i) {
        const double c = ctx[i];
        double* g = grad.data() + i * vocab_n;
        for (std::size_t j = 0; j < vocab_n; ++j) g[j] += c * p[j];
      }
    }
    const double scale = lr / static_cast<double>(batch);
    for (std::size_t k = 0; k < output_.size(); ++k) {
      output_[k] = static_cast<float>(output_[k] - scale * grad[k]);
    }
  }
  return mean_loss(corpus);
}

double ToyModel::mean_loss(const ParallelCorpus& corpus) const {
  return SequenceModel::mean_loss(corpus);
}

std::unique_ptr<SequenceModel> ToyModel::clone() const {
  return std::make_unique<ToyModel>(*this);
}

// ---------------------------------------------------------------------------
// TraceModel

TraceModel::TraceModel(std::size_t dim, std::size_t vocab_size) : dim_(dim), vocab_(vocab_size) {}

void TraceModel::add(TokenSeq source, TokenSeq prefix, std::vector<float> context,
                     std::vector<float> distribution) {
  if (context.size() != dim_ || distribution.size() != vocab_) {
    throw DimensionError("trace entry shape does not match the trace model");
  }
  auto key = std::make_pair(source, prefix);
  auto [it, inserted] = lookup_.emplace(std::move(key), entries_.size());
  if (!inserted) {
    entries_[it->second] = {std::move(source), std::move(prefix), std::move(context),
                            std::move(distribution)};
    return;
  }
  entries_.push_back({std::move(source), std::move(prefix), std::move(context),
                      std::move(distribution)});
}

const TraceModel::Entry& TraceModel::find(std::span<const TokenId> source,
                                          std::span<const TokenId> prefix) const {
  auto it = lookup_.find({TokenSeq(source.begin(), source.end()),
                          TokenSeq(prefix.begin(), prefix.end())});
  if (it == lookup_.end()) {
    throw InvalidArgument("trace model has no entry for the requested step");
  }
  return entries_[it->second];
}

std::vector<float> TraceModel::context(std::span<const TokenId> source,
                                       std::span<const TokenId> prefix) const {
  return find(source, prefix).context;
}

std::vector<double> TraceModel::next_token_dist(std::span<const TokenId> source,
                                                std::span<const TokenId> prefix) const {
  const auto& dist = find(source, prefix).distribution;
  std::vector<double> out(dist.begin(), dist.end());
  double sum = std::accumulate(out.begin(), out.end(), 0.0);
  if (!(sum > 0.0)) throw InvalidArgument("trace distribution has no mass");
  for (double& v : out) v /= sum;
  return out;
}

void TraceModel::set_parameters(std::span<const float> params) {
  if (!params.empty()) throw DimensionError("trace model has no parameters");
}

double TraceModel::train_steps(const ParallelCorpus& corpus, std::size_t, double) {
  return mean_loss(corpus);
}

std::unique_ptr<SequenceModel> TraceModel::clone() const {
  return std::make_unique<TraceModel>(*this);
}

Bytes TraceModel::serialize() const {
  ByteWriter w;
  w.magic("FNTR");
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(dim_));
  w.u32(static_cast<std::uint32_t>(vocab_));
  w.u32(static_cast<std::uint32_t>(entries_.size()));
  for (const auto& e : entries_) {
    w.u32(static_cast<std::uint32_t>(e.source.size()));
    for (TokenId t : e.source) w.u32(t);
    w.u32(static_cast<std::uint32_t>(e.prefix.size()));
    for (TokenId t : e.prefix) w.u32(t);
    w.f32s(e.context);
    w.f32s(e.distribution);
  }
  return w.take();
}

TraceModel TraceModel::deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (!r.expect_magic("FNTR")) throw FormatError(FormatErrc::kBadMagic, "not an FNTR trace");
  if (r.u32() != kVersion) {
    throw FormatError(FormatErrc::kVersionMismatch, "unsupported FNTR version");
  }
  const std::size_t dim = r.u32();
  const std::size_t vocab_n = r.u32();
  const std::size_t count = r.u32();
  TraceModel model(dim, vocab_n);
  for (std::size_t i = 0; i < count; ++i) {
    auto read_ids = [&r] {
      TokenSeq ids(r.u32());
      for (auto& t : ids) t = r.u32();
      return ids;
    };
    TokenSeq source = read_ids();
    TokenSeq prefix = read_ids();
    std::vector<float> ctx(dim), dist(vocab_n);
    r.f32s(ctx);
    r.f32s(dist);
    model.add(std::move(source), std::move(prefix), std::move(ctx), std::move(dist));
  }
  if (!r.done()) throw FormatError(FormatErrc::kCorrupt, "trailing bytes after FNTR entries");
  return model;
}

TraceModel TraceModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

TraceModel TraceModel::record(const SequenceModel& model, const ParallelCorpus& corpus) {
  TraceModel trace(model.dim(), model.vocab_size());
  for (const auto& pair : corpus.pairs) {
    std::span<const TokenId> target(pair.target);
    for (std::size_t t = 0; t < target.size(); ++t) {
      auto prefix = target.first(t);
      auto dist = model.next_token_dist(pair.source, prefix);
      trace.add(pair.source, TokenSeq(prefix.begin(), prefix.end()),
                model.context(pair.source, prefix),
                std::vector<float>(dist.begin(), dist.end()));
    }
  }
  return trace;
}

}  // namespace fednn
