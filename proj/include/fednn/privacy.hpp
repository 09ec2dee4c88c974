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
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "fednn/corpus.hpp"
#include "fednn/quantizer.hpp"
#include "fednn/sequence_model.hpp"
#include "json.hpp"

namespace fednn {

// One attacked memory record with the sequence that produced it:
//   <2src> x_1..x_n <2tgt> y_1..y_{t-1} y_t
struct ThreatSample {
  std::vector<float> raw_key;      // empty when encoded
  std::optional<EncodedKey> code;  // set when encoded
  TokenId value = 0;
  TokenSeq target;

  bool encoded() const { return code.has_value(); }
};

TokenSeq threat_sequence(std::span<const TokenId> source, std::span<const TokenId> prefix,
                         TokenId value);

// One sample per (pair, step), EOS step included. With encrypted set, keys
// are PQ-encoded with the given quantizer (required).
std::vector<ThreatSample> build_threat_dataset(const ParallelCorpus& corpus,
                                               const SequenceModel& model, bool encrypted,
                                               const PQModel* quantizer = nullptr);

struct PrivacyDictionary {
  std::set<TokenId> tokens;
  double tau = 2.0;

  bool contains(TokenId t) const { return tokens.count(t) != 0; }
  std::size_t size() const { return tokens.size(); }
};

inline constexpr double kDefaultTau = 2.0;

// Keeps t when f_priv(t) / (f_pub(t) + eps) >= tau; frequencies are relative
// over content tokens of both sides and eps is one public pseudo-count.
PrivacyDictionary extract_privacy_dictionary(const ParallelCorpus& private_corpus,
                                             const ParallelCorpus& public_corpus,
                                             double tau = kDefaultTau);

struct PrivacyScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

PrivacyScores privacy_prf(std::span<const TokenSeq> hypotheses, std::span<const TokenSeq> references,
                          const PrivacyDictionary& dict);

// Corpus BLEU-4, in percent.
double reconstruction_bleu(std::span<const TokenSeq> hypotheses, std::span<const TokenSeq> references);

class Attacker {
 public:
  virtual ~Attacker() = default;
  virtual std::string name() const = 0;
  // One hypothesis per record. Encoded records need the quantizer.
  virtual std::vector<TokenSeq> reconstruct(std::span<const ThreatSample> records,
                                            const PQModel* quantizer) const = 0;
};

// Emits the auxiliary sequence whose raw key is nearest to each record
// (L2 for raw records, ADC for encoded ones).
class NearestNeighborAttacker final : public Attacker {
 public:
  explicit NearestNeighborAttacker(std::vector<ThreatSample> auxiliary);

  std::string name() const override { return "nearest_neighbor"; }
  std::vector<TokenSeq> reconstruct(std::span<const ThreatSample> records,
                                    const PQModel* quantizer) const override;

 private:
  std::vector<ThreatSample> auxiliary_;
  std::size_t dim_ = 0;
};

std::vector<TokenSeq> nn_baseline_attack(std::span<const ThreatSample> records,
                                         std::span<const ThreatSample> auxiliary,
                                         const PQModel* quantizer = nullptr);

struct PrivacyReport {
  std::string attacker;
  std::string defender;
  bool encrypted = false;
  double bleu = 0.0;
  PrivacyScores scores;
  std::size_t dict_size = 0;
  double tau = kDefaultTau;

  nlohmann::ordered_json to_json() const;
};

PrivacyReport evaluate_attack(const Attacker& attacker, std::span<const ThreatSample> records,
                              const PrivacyDictionary& dict, const PQModel* quantizer,
                              const std::string& defender);

}  // namespace fednn
