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

#include "fednn/privacy.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <unordered_set>

#include "fednn/error.hpp"
#include "fednn/kmeans.hpp"

namespace fednn {

TokenSeq threat_sequence(std::span<const TokenId> source, std::span<const TokenId> prefix,
                         TokenId value) {
  TokenSeq seq;
  seq.reserve(source.size() + prefix.size() + 3);
  seq.push_back(vocab::kSrcTag);
  seq.insert(seq.end(), source.begin(), source.end());
  seq.push_back(vocab::kTgtTag);
  seq.insert(seq.end(), prefix.begin(), prefix.end());
  seq.push_back(value);
  return seq;
}

std::vector<ThreatSample> build_threat_dataset(const ParallelCorpus& corpus,
                                               const SequenceModel& model, bool encrypted,
                                               const PQModel* quantizer) {
  if (encrypted && !quantizer) throw InvalidArgument("encrypted threat data needs a quantizer");
  std::vector<ThreatSample> out;
  out.reserve(corpus.target_tokens());
  for (const auto& pair : corpus.pairs) {
    for (std::size_t t = 0; t < pair.target.size(); ++t) {
      std::span<const TokenId> prefix(pair.target.data(), t);
      ThreatSample s;
      auto key = model.context(pair.source, prefix);
      if (encrypted) {
        s.code = quantizer->encode(key);
      } else {
        s.raw_key = std::move(key);
      }
      s.value = pair.target[t];
      s.target = threat_sequence(pair.source, prefix, s.value);
      out.push_back(std::move(s));
    }
  }
  return out;
}

namespace {

std::map<TokenId, std::size_t> content_counts(const ParallelCorpus& corpus, std::size_t& total) {
  std::map<TokenId, std::size_t> counts;
  total = 0;
  auto add = [&](const TokenSeq& seq) {
    for (TokenId t : seq) {
      if (t < vocab::kFirstContent) continue;
      ++counts[t];
      ++total;
    }
  };
  for (const auto& p : corpus.pairs) {
    add(p.source);
    add(p.target);
  }
  return counts;
}

}  // namespace

PrivacyDictionary extract_privacy_dictionary(const ParallelCorpus& private_corpus,
                                             const ParallelCorpus& public_corpus, double tau) {
  if (!(tau > 1.0)) throw InvalidArgument("tau must be > 1");
  std::size_t n_priv = 0, n_pub = 0;
  const auto priv = content_counts(private_corpus, n_priv);
  const auto pub = content_counts(public_corpus, n_pub);
  PrivacyDictionary dict;
  dict.tau = tau;
  if (n_priv == 0) return dict;
  const double pub_norm = static_cast<double>(n_pub ? n_pub : 1);
  for (const auto& [tok, c] : priv) {
    const double f_priv = static_cast<double>(c) / static_cast<double>(n_priv);
    auto it = pub.find(tok);
    const double c_pub = it == pub.end() ? 0.0 : static_cast<double>(it->second);
    const double f_pub_eps = (c_pub + 1.0) / pub_norm;
    if (f_priv / f_pub_eps >= tau) dict.tokens.insert(tok);
  }
  return dict;
}

PrivacyScores privacy_prf(std::span<const TokenSeq> hypotheses, std::span<const TokenSeq> references,
                          const PrivacyDictionary& dict) {
  if (hypotheses.size() != references.size()) {
    throw DimensionError("hypotheses and references differ in count");
  }
  std::size_t p_num = 0, p_den = 0, r_num = 0, r_den = 0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    TokenSeq h, g;
    for (TokenId t : hypotheses[i]) if (dict.contains(t)) h.push_back(t);
    for (TokenId t : references[i]) if (dict.contains(t)) g.push_back(t);
    const std::unordered_set<TokenId> hs(h.begin(), h.end()), gs(g.begin(), g.end());
    for (TokenId t : g) p_num += hs.count(t);
    for (TokenId t : h) r_num += gs.count(t);
    p_den += h.size();
    r_den += g.size();
  }
  PrivacyScores s;
  s.precision = p_den ? static_cast<double>(p_num) / static_cast<double>(p_den) : 0.0;
  s.recall = r_den ? static_cast<double>(r_num) / static_cast<double>(r_den) : 0.0;
  s.f1 = (s.precision + s.recall) > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

double reconstruction_bleu(std::span<const TokenSeq> hypotheses, std::span<const TokenSeq> references) {
  if (hypotheses.empty()) throw InvalidArgument("BLEU needs at least one hypothesis");
  if (hypotheses.size() != references.size()) {
    throw DimensionError("hypotheses and references differ in count");
  }
  constexpr std::size_t kOrder = 4;
  std::size_t matches[kOrder] = {}, totals[kOrder] = {};
  std::size_t hyp_len = 0, ref_len = 0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const auto& h = hypotheses[i];
    const auto& r = references[i];
    hyp_len += h.size();
    ref_len += r.size();
    for (std::size_t n = 1; n <= kOrder; ++n) {
      std::map<TokenSeq, std::size_t> ref_ngrams;
      for (std::size_t j = 0; j + n <= r.size(); ++j) ++ref_ngrams[TokenSeq(r.begin() + j, r.begin() + j + n)];
      std::map<TokenSeq, std::size_t> hyp_ngrams;
      for (std::size_t j = 0; j + n <= h.size(); ++j) ++hyp_ngrams[TokenSeq(h.begin() + j, h.begin() + j + n)];
      for (const auto& [gram, c] : hyp_ngrams) {
        auto it = ref_ngrams.find(gram);
        if (it != ref_ngrams.end()) matches[n - 1] += std::min(c, it->second);
        totals[n - 1] += c;
      }
    }
  }
  double log_sum = 0.0;
  for (std::size_t n = 0; n < kOrder; ++n) {
    if (matches[n] == 0 || totals[n] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(matches[n]) / static_cast<double>(totals[n]));
  }
  const double bp = hyp_len >= ref_len
                        ? 1.0
                        : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
  return 100.0 * bp * std::exp(log_sum / kOrder);
}

NearestNeighborAttacker::NearestNeighborAttacker(std::vector<ThreatSample> auxiliary)
    : auxiliary_(std::move(auxiliary)) {
  if (auxiliary_.empty()) throw InvalidArgument("attacker needs auxiliary data");
  dim_ = auxiliary_.front().raw_key.size();
  for (const auto& s : auxiliary_) {
    if (s.encoded() || s.raw_key.size() != dim_ || dim_ == 0) {
      throw DimensionError("auxiliary samples need raw keys of one dimension");
    }
  }
}

std::vector<TokenSeq> NearestNeighborAttacker::reconstruct(std::span<const ThreatSample> records,
                                                           const PQModel* quantizer) const {
  const std::size_t n = records.size();
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> arg(n, 0);
  bool any_encoded = false;
  for (const auto& r : records) {
    if (r.encoded()) {
      any_encoded = true;
      if (!quantizer) throw InvalidArgument("encoded records need the quantizer");
      quantizer->check_code(*r.code);
    } else if (r.raw_key.size() != dim_) {
      throw DimensionError("record key dimension differs from the attacker's");
    }
  }
  if (any_encoded && quantizer->dim() != dim_) {
    throw DimensionError("quantizer dimension differs from the attacker's");
  }
  const std::size_t n_coarse = any_encoded ? quantizer->config().n_coarse : 0;
  for (std::size_t a = 0; a < auxiliary_.size(); ++a) {
    const auto& q = auxiliary_[a].raw_key;
    std::vector<std::optional<AdcTable>> tables(n_coarse);
    for (std::size_t i = 0; i < n; ++i) {
      double d;
      if (records[i].encoded()) {
        const auto& code = *records[i].code;
        auto& table = tables[code.coarse_id];
        if (!table) table.emplace(*quantizer, q, code.coarse_id);
        d = table->distance(code.subcodes);
      } else {
        d = squared_l2(q, records[i].raw_key);
      }
      if (d < best[i]) {
        best[i] = d;
        arg[i] = a;
      }
    }
  }
  std::vector<TokenSeq> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(auxiliary_[arg[i]].target);
  return out;
}

std::vector<TokenSeq> nn_baseline_attack(std::span<const ThreatSample> records,
                                         std::span<const ThreatSample> auxiliary,
                                         const PQModel* quantizer) {
  NearestNeighborAttacker attacker({auxiliary.begin(), auxiliary.end()});
  return attacker.reconstruct(records, quantizer);
}

nlohmann::ordered_json PrivacyReport::to_json() const {
  nlohmann::ordered_json j;
  j["attacker"] = attacker;
  j["defender"] = defender;
  j["encrypted"] = encrypted;
  j["bleu"] = bleu;
  j["precision"] = scores.precision;
  j["recall"] = scores.recall;
  j["f1"] = scores.f1;
  j["dict_size"] = dict_size;
  j["tau"] = tau;
  return j;
}

PrivacyReport evaluate_attack(const Attacker& attacker, std::span<const ThreatSample> records,
                              const PrivacyDictionary& dict, const PQModel* quantizer,
                              const std::string& defender) {
  PrivacyReport report;
  report.attacker = attacker.name();
  report.defender = defender;
  report.encrypted = !records.empty() && records.front().encoded();
  report.dict_size = dict.size();
  report.tau = dict.tau;
  if (records.empty()) return report;
  const auto hyps = attacker.reconstruct(records, quantizer);
  std::vector<TokenSeq> refs;
  refs.reserve(records.size());
  for (const auto& r : records) refs.push_back(r.target);
  report.bleu = reconstruction_bleu(hyps, refs);
  report.scores = privacy_prf(hyps, refs, dict);
  return report;
}

}  // namespace fednn
