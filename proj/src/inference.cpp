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

#include "fednn/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <tuple>

#include "fednn/error.hpp"
#include "fednn/random.hpp"

namespace fednn {
namespace {

bool is_power_of_two(std::size_t v) { return v && !(v & (v - 1)); }

// Normalized kernel weights of the first k neighbours.
std::vector<double> knn_weights(const RetrievalSet& retrieval, std::size_t k, double temperature,
                                DistanceKernel kernel) {
  k = std::min(k, retrieval.size());
  auto energy = [&](double d) { return kernel == DistanceKernel::kSquared ? d * d : d; };
  double lowest = energy(retrieval.distances[0]);
  for (std::size_t i = 1; i < k; ++i) lowest = std::min(lowest, energy(retrieval.distances[i]));
  std::vector<double> w(k);
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    w[i] = std::exp(-(energy(retrieval.distances[i]) - lowest) / temperature);
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

void softmax_inplace(std::vector<double>& z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

}  // namespace

std::vector<std::size_t> MetaKConfig::candidate_sizes() const {
  std::vector<std::size_t> s{0};
  for (std::size_t k = 1; k <= max_k; k *= 2) s.push_back(k);
  return s;
}

void MetaKConfig::validate() const {
  if (!is_power_of_two(max_k)) throw InvalidArgument("K must be a power of two");
  if (!(temperature > 0.0)) throw InvalidArgument("temperature must be positive");
  if (hidden == 0) throw InvalidArgument("Meta-k hidden size must be positive");
}

RetrievalSet RetrievalSet::from(const SearchResult& result) {
  RetrievalSet r;
  r.distances.reserve(result.neighbors.size());
  r.values.reserve(result.neighbors.size());
  for (const auto& nb : result.neighbors) {
    r.distances.push_back(nb.distance);
    r.values.push_back(nb.value);
  }
  return r;
}

std::vector<std::size_t> RetrievalSet::distinct_counts() const {
  std::vector<std::size_t> counts;
  counts.reserve(values.size());
  std::set<TokenId> seen;
  for (TokenId v : values) {
    seen.insert(v);
    counts.push_back(seen.size());
  }
  return counts;
}

std::vector<double> knn_distribution(const RetrievalSet& retrieval, std::size_t k,
                                     double temperature, std::size_t vocab_size,
                                     DistanceKernel kernel) {
  if (k == 0 || retrieval.empty()) {
    throw InvalidArgument("knn_distribution needs at least one neighbour; use the base model for k = 0");
  }
  if (!(temperature > 0.0)) throw InvalidArgument("temperature must be positive");
  auto w = knn_weights(retrieval, k, temperature, kernel);
  std::vector<double> p(vocab_size, 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (retrieval.values[i] >= vocab_size) throw InvalidArgument("neighbour value outside vocabulary");
    p[retrieval.values[i]] += w[i];
  }
  return p;
}

std::vector<double> meta_features(const RetrievalSet& retrieval, const MetaKConfig& config) {
  const std::size_t K = config.max_k;
  std::vector<double> f(2 * K);
  const auto counts = retrieval.distinct_counts();
  const double scale =
      (config.normalize_distances && !retrieval.empty()) ? retrieval.distances[0] + 1e-6 : 1.0;
  for (std::size_t i = 0; i < K; ++i) {
    if (i < retrieval.size()) {
      f[i] = retrieval.distances[i] / scale;
      f[K + i] = static_cast<double>(counts[i]);
    } else {
      f[i] = config.pad_distance;
      f[K + i] = counts.empty() ? 0.0 : static_cast<double>(counts.back());
    }
  }
  return f;
}

// ---------------------------------------------------------------------------
// MetaKNetwork

MetaKNetwork::MetaKNetwork(const MetaKConfig& config)
    : config_(config), sizes_(config.candidate_sizes()) {
  config_.validate();
  params_.assign(b2_offset() + sizes_.size(), 0.0);
}

MetaKNetwork::MetaKNetwork(const MetaKConfig& config, std::uint64_t seed, double init_scale)
    : MetaKNetwork(config) {
  rnd::Engine rng(seed);
  // Weights random, biases zero.
  for (std::size_t i = w1_offset(); i < b1_offset(); ++i) params_[i] = init_scale * rnd::normal(rng);
  for (std::size_t i = w2_offset(); i < b2_offset(); ++i) params_[i] = init_scale * rnd::normal(rng);
}

void MetaKNetwork::set_parameters(std::span<const double> params) {
  if (params.size() != params_.size()) throw DimensionError("Meta-k parameter count mismatch");
  for (double v : params) {
    if (!std::isfinite(v)) throw InvalidArgument("Meta-k parameters must be finite");
  }
  std::copy(params.begin(), params.end(), params_.begin());
}

void MetaKNetwork::hidden_pre(std::span<const double> features, std::vector<double>& pre) const {
  if (features.size() != config_.feature_size()) {
    throw DimensionError("Meta-k expects " + std::to_string(config_.feature_size()) + " features");
  }
  const std::size_t H = config_.hidden;
  pre.assign(params_.begin() + static_cast<std::ptrdiff_t>(b1_offset()),
             params_.begin() + static_cast<std::ptrdiff_t>(w2_offset()));
  for (std::size_t i = 0; i < features.size(); ++i) {
    const double f = features[i];
    if (!std::isfinite(f)) throw InvalidArgument("Meta-k features must be finite");
    const double* row = params_.data() + w1_offset() + i * H;
    for (std::size_t h = 0; h < H; ++h) pre[h] += f * row[h];
  }
}

std::vector<double> MetaKNetwork::logits(const std::vector<double>& hidden) const {
  const std::size_t S = sizes_.size();
  std::vector<double> z(params_.begin() + static_cast<std::ptrdiff_t>(b2_offset()), params_.end());
  for (std::size_t h = 0; h < hidden.size(); ++h) {
    const double a = hidden[h];
    if (a == 0.0) continue;
    const double* row = params_.data() + w2_offset() + h * S;
    for (std::size_t k = 0; k < S; ++k) z[k] += a * row[k];
  }
  return z;
}

std::vector<double> MetaKNetwork::forward(std::span<const double> features) const {
  std::vector<double> pre;
  hidden_pre(features, pre);
  for (double& v : pre) v = std::max(v, 0.0);
  auto z = logits(pre);
  softmax_inplace(z);
  return z;
}

double MetaKNetwork::loss_and_gradient(std::span<const double> features,
                                       std::span<const double> component,
                                       std::vector<double>* gradient) const {
  const std::size_t S = sizes_.size();
  const std::size_t H = config_.hidden;
  if (component.size() != S) throw DimensionError("component vector must have |S| entries");
  std::vector<double> pre;
  hidden_pre(features, pre);
  std::vector<double> act(H);
  for (std::size_t h = 0; h < H; ++h) act[h] = std::max(pre[h], 0.0);
  auto p = logits(act);
  softmax_inplace(p);

  double mix = 0.0;
  for (std::size_t k = 0; k < S; ++k) mix += p[k] * component[k];
  const double loss = -std::log(mix);
  if (!gradient) return loss;

  gradient->assign(params_.size(), 0.0);
  auto& g = *gradient;
  // dL/dz_k = p_k (1 - c_k / mix)
  std::vector<double> dz(S);
  for (std::size_t k = 0; k < S; ++k) dz[k] = p[k] * (1.0 - component[k] / mix);
  for (std::size_t k = 0; k < S; ++k) g[b2_offset() + k] = dz[k];
  std::vector<double> da(H, 0.0);
  for (std::size_t h = 0; h < H; ++h) {
    const double* row = params_.data() + w2_offset() + h * S;
    double back = 0.0;
    for (std::size_t k = 0; k < S; ++k) {
      g[w2_offset() + h * S + k] = act[h] * dz[k];
      back += row[k] * dz[k];
    }
    da[h] = pre[h] > 0.0 ? back : 0.0;
    g[b1_offset() + h] = da[h];
  }
  for (std::size_t i = 0; i < features.size(); ++i) {
    for (std::size_t h = 0; h < H; ++h) g[w1_offset() + i * H + h] = features[i] * da[h];
  }
  return loss;
}

Bytes MetaKNetwork::serialize() const {
  ByteWriter w;
  w.magic("FNMK");
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(config_.max_k));
  w.u32(static_cast<std::uint32_t>(config_.hidden));
  w.u32(static_cast<std::uint32_t>(sizes_.size()));
  for (double v : params_) w.f32(static_cast<float>(v));
  return w.take();
}

MetaKNetwork MetaKNetwork::deserialize(std::span<const std::uint8_t> bytes, MetaKConfig base) {
  ByteReader r(bytes);
  if (!r.expect_magic("FNMK")) throw FormatError(FormatErrc::kBadMagic, "not an FNMK network");
  if (r.u32() != kVersion) throw FormatError(FormatErrc::kVersionMismatch, "unsupported FNMK version");
  base.max_k = r.u32();
  base.hidden = r.u32();
  const std::size_t s = r.u32();
  if (!is_power_of_two(base.max_k) || base.hidden == 0) {
    throw FormatError(FormatErrc::kCorrupt, "FNMK header describes an invalid network");
  }
  MetaKNetwork net(base);
  if (s != net.output_size()) throw FormatError(FormatErrc::kCorrupt, "FNMK |S| disagrees with K");
  std::vector<double> params(net.parameter_count());
  for (double& v : params) v = r.f32();
  if (!r.done()) throw FormatError(FormatErrc::kCorrupt, "trailing bytes after FNMK parameters");
  net.set_parameters(params);
  return net;
}

std::vector<double> meta_k_forward(const MetaKNetwork& net, std::span<const double> features) {
  return net.forward(features);
}

// ---------------------------------------------------------------------------
// Ensemble

std::vector<double> ensemble_with_weights(std::span<const double> base_dist,
                                          const RetrievalSet& retrieval,
                                          std::span<const double> p_meta,
                                          const MetaKConfig& config) {
  std::vector<double> out(base_dist.begin(), base_dist.end());
  if (retrieval.empty()) return out;
  const auto sizes = config.candidate_sizes();
  if (p_meta.size() != sizes.size()) throw DimensionError("p_Meta must have |S| entries");
  for (double& v : out) v *= p_meta[0];
  for (std::size_t s = 1; s < sizes.size(); ++s) {
    if (p_meta[s] == 0.0) continue;
    auto w = knn_weights(retrieval, sizes[s], config.temperature, config.kernel);
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (retrieval.values[i] >= out.size()) throw InvalidArgument("neighbour value outside vocabulary");
      out[retrieval.values[i]] += p_meta[s] * w[i];
    }
  }
  return out;
}

std::vector<double> ensemble_predict(std::span<const double> base_dist,
                                     const RetrievalSet& retrieval, const MetaKNetwork& net,
                                     std::vector<double>* p_meta_out) {
  if (retrieval.empty()) {
    if (p_meta_out) {
      p_meta_out->assign(net.output_size(), 0.0);
      (*p_meta_out)[0] = 1.0;
    }
    return {base_dist.begin(), base_dist.end()};
  }
  auto p_meta = net.forward(meta_features(retrieval, net.config()));
  auto out = ensemble_with_weights(base_dist, retrieval, p_meta, net.config());
  if (p_meta_out) *p_meta_out = std::move(p_meta);
  return out;
}

std::vector<double> component_probabilities(std::span<const double> base_dist,
                                            const RetrievalSet& retrieval, TokenId gold,
                                            const MetaKConfig& config) {
  const auto sizes = config.candidate_sizes();
  std::vector<double> comp(sizes.size(), 0.0);
  comp[0] = base_dist[gold];
  if (retrieval.empty()) return comp;
  for (std::size_t s = 1; s < sizes.size(); ++s) {
    auto w = knn_weights(retrieval, sizes[s], config.temperature, config.kernel);
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (retrieval.values[i] == gold) comp[s] += w[i];
    }
  }
  return comp;
}

MetaKExample make_meta_k_example(std::span<const double> base_dist, const RetrievalSet& retrieval,
                                 TokenId gold, const MetaKConfig& config) {
  return {meta_features(retrieval, config),
          component_probabilities(base_dist, retrieval, gold, config)};
}

double mean_meta_k_loss(const MetaKNetwork& net, std::span<const MetaKExample> examples) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& ex : examples) {
    if (std::all_of(ex.component.begin(), ex.component.end(), [](double c) { return c <= 0.0; })) {
      continue;
    }
    total += net.loss_and_gradient(ex.features, ex.component, nullptr);
    ++n;
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

MetaKTrainReport train_meta_k(MetaKNetwork& net, std::span<const MetaKExample> examples,
                              const MetaKTrainOptions& options) {
  if (examples.empty()) throw InvalidArgument("train_meta_k needs at least one example");
  if (options.batch_size == 0) throw InvalidArgument("batch size must be positive");
  MetaKTrainReport report;
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& c = examples[i].component;
    if (std::all_of(c.begin(), c.end(), [](double v) { return v <= 0.0; })) {
      ++report.skipped;
      continue;
    }
    usable.push_back(i);
  }
  if (report.skipped) {
    report.warnings.push_back(std::to_string(report.skipped) +
                              " example(s) skipped: gold token has zero probability under every "
                              "mixture component");
  }

  rnd::Engine rng(options.seed);
  std::vector<double> params = net.parameters();
  std::vector<double> grad, step(params.size());
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    report.epoch_loss.push_back(mean_meta_k_loss(net, examples));
    rnd::shuffle(std::span(usable), rng);
    for (std::size_t start = 0; start < usable.size(); start += options.batch_size) {
      const std::size_t end = std::min(usable.size(), start + options.batch_size);
      std::fill(step.begin(), step.end(), 0.0);
      for (std::size_t b = start; b < end; ++b) {
        const auto& ex = examples[usable[b]];
        net.loss_and_gradient(ex.features, ex.component, &grad);
        for (std::size_t p = 0; p < grad.size(); ++p) step[p] += grad[p];
      }
      const double scale = options.learning_rate / static_cast<double>(end - start);
      for (std::size_t p = 0; p < params.size(); ++p) params[p] -= scale * step[p];
      net.set_parameters(params);
    }
  }
  report.epoch_loss.push_back(mean_meta_k_loss(net, examples));
  return report;
}

// ---------------------------------------------------------------------------
// Decoding

KnnPredictor::KnnPredictor(const SequenceModel& model, const PQIndex& index,
                           const MetaKNetwork& net, std::size_t n_probe)
    : model_(&model), index_(&index), net_(&net), n_probe_(n_probe) {
  if (index.model().dim() != model.dim()) throw DimensionError("index and model dims differ");
}

RetrievalSet KnnPredictor::retrieve(std::span<const float> query) const {
  return RetrievalSet::from(index_->search(query, net_->config().max_k, n_probe_));
}

std::vector<double> KnnPredictor::operator()(std::span<const TokenId> source,
                                             std::span<const TokenId> prefix,
                                             std::vector<double>* p_meta) const {
  auto base = model_->next_token_dist(source, prefix);
  auto retrieval = retrieve(model_->context(source, prefix));
  return ensemble_predict(base, retrieval, *net_, p_meta);
}

std::size_t argmax(std::span<const double> dist) {
  return static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
}

DecodeResult greedy_decode(const NextTokenFn& next, std::span<const TokenId> source,
                           std::size_t max_len) {
  DecodeResult out;
  for (std::size_t t = 0; t < max_len; ++t) {
    auto dist = next(source, out.tokens);
    const auto tok = static_cast<TokenId>(argmax(dist));
    out.tokens.push_back(tok);
    if (tok == vocab::kEos) return out;
  }
  out.truncated = true;
  return out;
}

DecodeResult beam_decode(const NextTokenFn& next, std::span<const TokenId> source,
                         std::size_t max_len, std::size_t beam_size) {
  if (beam_size == 0) throw InvalidArgument("beam size must be positive");
  struct Hyp {
    TokenSeq tokens;
    double score;
  };
  auto better = [](const Hyp& a, const Hyp& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.tokens < b.tokens;
  };
  std::vector<Hyp> active{{{}, 0.0}};
  std::vector<Hyp> finished;
  for (std::size_t t = 0; t < max_len && !active.empty() && finished.size() < beam_size; ++t) {
    std::vector<Hyp> candidates;
    for (const auto& h : active) {
      auto dist = next(source, h.tokens);
      for (std::size_t v = 0; v < dist.size(); ++v) {
        if (dist[v] <= 0.0) continue;
        Hyp c{h.tokens, h.score + std::log(dist[v])};
        c.tokens.push_back(static_cast<TokenId>(v));
        candidates.push_back(std::move(c));
      }
    }
    const std::size_t keep = std::min(beam_size, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                      candidates.end(), better);
    active.clear();
    for (std::size_t i = 0; i < keep; ++i) {
      if (candidates[i].tokens.back() == vocab::kEos) {
        finished.push_back(std::move(candidates[i]));
      } else {
        active.push_back(std::move(candidates[i]));
      }
    }
  }
  DecodeResult out;
  auto normalized = [](const Hyp& h) { return h.score / static_cast<double>(h.tokens.size()); };
  if (!finished.empty()) {
    const Hyp* best = &finished.front();
    for (const auto& h : finished) {
      if (normalized(h) > normalized(*best)) best = &h;
    }
    out.tokens = best->tokens;
    return out;
  }
  out.truncated = true;
  if (!active.empty()) out.tokens = std::min_element(active.begin(), active.end(), better)->tokens;
  return out;
}

DecodeResult decode(const SequenceModel& model, const PQIndex& index, const MetaKNetwork& net,
                    std::span<const TokenId> source, const DecodeOptions& options,
                    std::size_t n_probe, bool record_p_meta) {
  KnnPredictor predictor(model, index, net, n_probe);
  if (options.mode == DecodeMode::kBeam) {
    NextTokenFn fn = [&](std::span<const TokenId> src, std::span<const TokenId> prefix) {
      return predictor(src, prefix);
    };
    return beam_decode(fn, source, options.max_len, options.beam_size);
  }
  std::vector<std::vector<double>> metas;
  NextTokenFn fn = [&](std::span<const TokenId> src, std::span<const TokenId> prefix) {
    if (!record_p_meta) return predictor(src, prefix);
    std::vector<double> pm;
    auto dist = predictor(src, prefix, &pm);
    metas.push_back(std::move(pm));
    return dist;
  };
  auto out = greedy_decode(fn, source, options.max_len);
  out.p_meta = std::move(metas);
  return out;
}

double token_accuracy(const NextTokenFn& next, const ParallelCorpus& corpus) {
  std::size_t hits = 0, total = 0;
  for (const auto& pair : corpus.pairs) {
    std::span<const TokenId> target(pair.target);
    for (std::size_t t = 0; t < target.size(); ++t) {
      auto dist = next(pair.source, target.first(t));
      hits += argmax(dist) == target[t];
      ++total;
    }
  }
  return total ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;
}

double decode_accuracy(const NextTokenFn& next, const ParallelCorpus& corpus, std::size_t max_len) {
  std::size_t hits = 0, total = 0;
  for (const auto& pair : corpus.pairs) {
    auto hyp = greedy_decode(next, pair.source, max_len);
    for (std::size_t t = 0; t < pair.target.size(); ++t) {
      hits += t < hyp.tokens.size() && hyp.tokens[t] == pair.target[t];
    }
    total += pair.target.size();
  }
  return total ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;
}

}  // namespace fednn
