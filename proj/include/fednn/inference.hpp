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
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fednn/bytes.hpp"
#include "fednn/corpus.hpp"
#include "fednn/quantizer.hpp"
#include "fednn/sequence_model.hpp"

namespace fednn {

// How a retrieved squared-L2 distance d enters the kNN kernel.
enum class DistanceKernel {
  kLinear,   // exp(-d / T), d already squared L2
  kSquared,  // exp(-d^2 / T)
};

struct MetaKConfig {
  std::size_t max_k = 8;  // K, a power of two
  std::size_t hidden = 32;
  double temperature = 10.0;
  bool normalize_distances = false;  // divide distances by (d_1 + 1e-6)
  double pad_distance = 1.0e4;       // feature value for missing neighbours
  DistanceKernel kernel = DistanceKernel::kLinear;

  // S = {0} u {1, 2, 4, ..., K}
  std::vector<std::size_t> candidate_sizes() const;
  std::size_t feature_size() const { return 2 * max_k; }
  void validate() const;
};

// Retrieved neighbours in ascending distance order.
struct RetrievalSet {
  std::vector<double> distances;
  std::vector<TokenId> values;

  static RetrievalSet from(const SearchResult& result);

  std::size_t size() const { return values.size(); }
  bool empty() const { return values.empty(); }
  // c_i: distinct values among the first i neighbours.
  std::vector<std::size_t> distinct_counts() const;
};

// p(v) proportional to the kernel-weighted votes of the first k neighbours.
// Throws InvalidArgument when k == 0 or the set is empty.
std::vector<double> knn_distribution(const RetrievalSet& retrieval, std::size_t k,
                                     double temperature, std::size_t vocab_size,
                                     DistanceKernel kernel = DistanceKernel::kLinear);

// [d_1..d_K ; c_1..c_K], padded with the sentinel distance and the last count.
std::vector<double> meta_features(const RetrievalSet& retrieval, const MetaKConfig& config);

// One-hidden-layer ReLU gate producing p_Meta over S.
class MetaKNetwork {
 public:
  static constexpr std::uint32_t kVersion = 1;

  explicit MetaKNetwork(const MetaKConfig& config);  // all-zero parameters
  MetaKNetwork(const MetaKConfig& config, std::uint64_t seed, double init_scale = 0.1);

  const MetaKConfig& config() const { return config_; }
  std::size_t output_size() const { return sizes_.size(); }
  const std::vector<std::size_t>& sizes() const { return sizes_; }

  std::vector<double> forward(std::span<const double> features) const;

  // Loss -log(sum_k p_Meta(k) * component[k]) and its gradient w.r.t. the
  // flat parameter vector. component[k] is p_{k NN}(gold) for k in S.
  double loss_and_gradient(std::span<const double> features, std::span<const double> component,
                           std::vector<double>* gradient) const;

  std::size_t parameter_count() const { return params_.size(); }
  const std::vector<double>& parameters() const { return params_; }
  void set_parameters(std::span<const double> params);

  // FNMK: "FNMK", u32 version, u32 K, u32 hidden, u32 |S|, then W1 (2K x H),
  // b1 (H), W2 (H x |S|), b2 (|S|) as row-major float32.
  Bytes serialize() const;
  static MetaKNetwork deserialize(std::span<const std::uint8_t> bytes, MetaKConfig base = {});

 private:
  std::size_t w1_offset() const { return 0; }
  std::size_t b1_offset() const { return config_.feature_size() * config_.hidden; }
  std::size_t w2_offset() const { return b1_offset() + config_.hidden; }
  std::size_t b2_offset() const { return w2_offset() + config_.hidden * sizes_.size(); }

  void hidden_pre(std::span<const double> features, std::vector<double>& pre) const;
  std::vector<double> logits(const std::vector<double>& hidden) const;

  MetaKConfig config_;
  std::vector<std::size_t> sizes_;
  std::vector<double> params_;
};

std::vector<double> meta_k_forward(const MetaKNetwork& net, std::span<const double> features);

// sum_k p_Meta(k) p_{kNN}, with p_{0NN} the base distribution. Returns the
// base distribution unchanged when the retrieval set is empty.
std::vector<double> ensemble_with_weights(std::span<const double> base_dist,
                                          const RetrievalSet& retrieval,
                                          std::span<const double> p_meta,
                                          const MetaKConfig& config);

std::vector<double> ensemble_predict(std::span<const double> base_dist,
                                     const RetrievalSet& retrieval, const MetaKNetwork& net,
                                     std::vector<double>* p_meta_out = nullptr);

// p_{kNN}(gold) for every k in S (k = 0 is the base model).
std::vector<double> component_probabilities(std::span<const double> base_dist,
                                            const RetrievalSet& retrieval, TokenId gold,
                                            const MetaKConfig& config);

struct MetaKExample {
  std::vector<double> features;
  std::vector<double> component;  // see component_probabilities
};

MetaKExample make_meta_k_example(std::span<const double> base_dist, const RetrievalSet& retrieval,
                                 TokenId gold, const MetaKConfig& config);

struct MetaKTrainOptions {
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  double learning_rate = 0.05;
  std::uint64_t seed = 3;
};

struct MetaKTrainReport {
  std::vector<double> epoch_loss;  // mean loss before each epoch, then final
  std::size_t skipped = 0;          // examples with zero gold mass everywhere
  std::vector<std::string> warnings;
};

// Mini-batch gradient descent on the mean ensemble NLL.
MetaKTrainReport train_meta_k(MetaKNetwork& net, std::span<const MetaKExample> examples,
                              const MetaKTrainOptions& options = {});

double mean_meta_k_loss(const MetaKNetwork& net, std::span<const MetaKExample> examples);

// ---------------------------------------------------------------------------
// Decoding

struct InferenceConfig {
  MetaKConfig meta;
  std::size_t n_probe = 16;
};

using NextTokenFn =
    std::function<std::vector<double>(std::span<const TokenId> source, std::span<const TokenId> prefix)>;

// Base model + adaptive kNN retrieval over a PQ index.
class KnnPredictor {
 public:
  KnnPredictor(const SequenceModel& model, const PQIndex& index, const MetaKNetwork& net,
               std::size_t n_probe);

  std::vector<double> operator()(std::span<const TokenId> source, std::span<const TokenId> prefix,
                                 std::vector<double>* p_meta = nullptr) const;

  RetrievalSet retrieve(std::span<const float> query) const;

 private:
  const SequenceModel* model_;
  const PQIndex* index_;
  const MetaKNetwork* net_;
  std::size_t n_probe_;
};

enum class DecodeMode { kGreedy, kBeam };

struct DecodeOptions {
  DecodeMode mode = DecodeMode::kGreedy;
  std::size_t beam_size = 1;
  std::size_t max_len = 64;
};

struct DecodeResult {
  TokenSeq tokens;  // includes the final EOS unless truncated
  bool truncated = false;
  std::vector<std::vector<double>> p_meta;  // per step, greedy only, when requested
};

DecodeResult greedy_decode(const NextTokenFn& next, std::span<const TokenId> source,
                           std::size_t max_len);
DecodeResult beam_decode(const NextTokenFn& next, std::span<const TokenId> source,
                         std::size_t max_len, std::size_t beam_size);

DecodeResult decode(const SequenceModel& model, const PQIndex& index, const MetaKNetwork& net,
                    std::span<const TokenId> source, const DecodeOptions& options,
                    std::size_t n_probe, bool record_p_meta = false);

// Teacher-forced next-token accuracy over every target position.
double token_accuracy(const NextTokenFn& next, const ParallelCorpus& corpus);

// Fraction of reference positions reproduced by greedy decoding.
double decode_accuracy(const NextTokenFn& next, const ParallelCorpus& corpus, std::size_t max_len);

std::size_t argmax(std::span<const double> dist);

}  // namespace fednn
