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

#include "fednn/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "fednn/error.hpp"
#include "fednn/kmeans.hpp"
#include "fednn/random.hpp"

namespace fednn {

PQConfig PQConfig::full_scale() {
  PQConfig c;
  c.n_coarse = 4096;
  c.n_probe = 64;
  return c;
}

void PQConfig::validate(std::size_t dim) const {
  if (m == 0 || dim % m != 0) {
    throw InvalidArgument("dim " + std::to_string(dim) + " not divisible by m = " + std::to_string(m));
  }
  if (bits < 1 || bits > 16) throw InvalidArgument("bits must be in 1..16");
  if (n_coarse == 0) throw InvalidArgument("n_coarse must be positive");
  if (n_probe == 0 || n_probe > n_coarse) throw InvalidArgument("n_probe must be in 1..n_coarse");
}

PQModel::PQModel(std::size_t dim, PQConfig config, std::vector<float> coarse,
                 std::vector<float> codebooks)
    : dim_(dim), config_(config), coarse_(std::move(coarse)), codebooks_(std::move(codebooks)) {
  if (dim_ == 0 || dim_ % config_.m != 0 || config_.bits < 1 || config_.bits > 16) {
    throw InvalidArgument("PQ model shape is inconsistent");
  }
  if (coarse_.size() != config_.n_coarse * dim_ ||
      codebooks_.size() != config_.codebook_size() * dim_) {
    throw DimensionError("PQ model arrays do not match the configuration");
  }
  for (float v : coarse_) {
    if (!std::isfinite(v)) throw InvalidArgument("coarse centroids must be finite");
  }
  for (float v : codebooks_) {
    if (!std::isfinite(v)) throw InvalidArgument("codebooks must be finite");
  }
}

std::span<const float> PQModel::coarse_centroid(std::size_t c) const {
  return std::span<const float>(coarse_).subspan(c * dim_, dim_);
}

std::span<const float> PQModel::codeword(std::size_t subspace, std::size_t code) const {
  const std::size_t ds = sub_dim();
  return std::span<const float>(codebooks_).subspan(
      (subspace * config_.codebook_size() + code) * ds, ds);
}

void PQModel::check_code(const EncodedKey& code) const {
  if (code.coarse_id >= config_.n_coarse) throw InvalidArgument("coarse id out of range");
  if (code.subcodes.size() != config_.m) throw DimensionError("wrong number of sub-codes");
  for (auto s : code.subcodes) {
    if (s >= config_.codebook_size()) throw InvalidArgument("sub-code out of range");
  }
}

EncodedKey PQModel::encode(std::span<const float> key) const {
  if (key.size() != dim_) {
    throw DimensionError("key dim " + std::to_string(key.size()) + " != model dim " +
                         std::to_string(dim_));
  }
  EncodedKey code;
  code.coarse_id = static_cast<std::uint32_t>(nearest_centroid(key, coarse_, dim_));
  auto centroid = coarse_centroid(code.coarse_id);
  std::vector<float> residual(dim_);
  for (std::size_t i = 0; i < dim_; ++i) residual[i] = key[i] - centroid[i];

  const std::size_t ds = sub_dim();
  const std::size_t ks = config_.codebook_size();
  code.subcodes.resize(config_.m);
  for (std::size_t j = 0; j < config_.m; ++j) {
    auto book = std::span<const float>(codebooks_).subspan(j * ks * ds, ks * ds);
    code.subcodes[j] = static_cast<std::uint16_t>(
        nearest_centroid(std::span<const float>(residual).subspan(j * ds, ds), book, ds));
  }
  return code;
}

std::vector<float> PQModel::decode(const EncodedKey& code) const {
  check_code(code);
  std::vector<float> out(coarse_centroid(code.coarse_id).begin(),
                         coarse_centroid(code.coarse_id).end());
  const std::size_t ds = sub_dim();
  for (std::size_t j = 0; j < config_.m; ++j) {
    auto word = codeword(j, code.subcodes[j]);
    for (std::size_t i = 0; i < ds; ++i) out[j * ds + i] += word[i];
  }
  return out;
}

double PQModel::adc_distance(std::span<const float> query, const EncodedKey& code) const {
  check_code(code);
  if (query.size() != dim_) throw DimensionError("query dim does not match PQ model");
  return AdcTable(*this, query, code.coarse_id).distance(code.subcodes);
}

Bytes PQModel::serialize() const {
  ByteWriter w;
  w.magic("FNPQ");
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(dim_));
  w.u32(static_cast<std::uint32_t>(config_.m));
  w.u32(static_cast<std::uint32_t>(config_.bits));
  w.u32(static_cast<std::uint32_t>(config_.n_coarse));
  w.f32s(coarse_);
  w.f32s(codebooks_);
  return w.take();
}

PQModel PQModel::deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (!r.expect_magic("FNPQ")) throw FormatError(FormatErrc::kBadMagic, "not an FNPQ model");
  if (r.u32() != kVersion) throw FormatError(FormatErrc::kVersionMismatch, "unsupported FNPQ version");
  const std::size_t dim = r.u32();
  PQConfig config;
  config.m = r.u32();
  config.bits = r.u32();
  config.n_coarse = r.u32();
  config.n_probe = std::min<std::size_t>(PQConfig{}.n_probe, config.n_coarse);
  if (config.m == 0 || config.bits < 1 || config.bits > 16 || dim == 0 || dim % config.m != 0) {
    throw FormatError(FormatErrc::kCorrupt, "FNPQ header describes an invalid model");
  }
  std::vector<float> coarse(config.n_coarse * dim);
  std::vector<float> books(config.codebook_size() * dim);
  r.f32s(coarse);
  r.f32s(books);
  if (!r.done()) throw FormatError(FormatErrc::kCorrupt, "trailing bytes after FNPQ model");
  return PQModel(dim, config, std::move(coarse), std::move(books));
}

PQModel train_pq(std::span<const float> keys, std::size_t dim, const PQConfig& config) {
  config.validate(dim);
  if (keys.size() % dim != 0) throw DimensionError("training keys are not n x dim");
  const std::size_t n = keys.size() / dim;
  if (n < config.n_coarse || n < config.codebook_size()) {
    throw InvalidArgument("train_pq needs at least max(n_coarse, 2^bits) samples, got " +
                          std::to_string(n));
  }

  KMeansOptions coarse_opts;
  coarse_opts.k = config.n_coarse;
  coarse_opts.iterations = config.kmeans_iters;
  coarse_opts.seed = rnd::derive_seed(config.seed, 0);
  KMeansResult coarse = kmeans(keys, dim, coarse_opts);

  const std::size_t ds = dim / config.m;
  const std::size_t ks = config.codebook_size();
  std::vector<float> books(config.m * ks * ds);
  std::vector<float> sub(n * ds);
  for (std::size_t j = 0; j < config.m; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      const float* key = keys.data() + i * dim + j * ds;
      const float* cen = coarse.centroids.data() + coarse.assignment[i] * dim + j * ds;
      for (std::size_t t = 0; t < ds; ++t) sub[i * ds + t] = key[t] - cen[t];
    }
    KMeansOptions opts;
    opts.k = ks;
    opts.iterations = config.kmeans_iters;
    opts.seed = rnd::derive_seed(config.seed, j + 1);
    KMeansResult book = kmeans(sub, ds, opts);
    std::copy(book.centroids.begin(), book.centroids.end(), books.begin() + j * ks * ds);
  }
  return PQModel(dim, config, std::move(coarse.centroids), std::move(books));
}

PQModel train_pq(const Datastore& sample, const PQConfig& config) {
  return train_pq(sample.keys(), sample.dim(), config);
}

EncodedKey encode_key(const PQModel& model, std::span<const float> key) { return model.encode(key); }

std::vector<float> decode_key(const PQModel& model, const EncodedKey& code) {
  return model.decode(code);
}

double adc_distance(const PQModel& model, std::span<const float> query, const EncodedKey& code) {
  return model.adc_distance(query, code);
}

AdcTable::AdcTable(const PQModel& model, std::span<const float> query, std::size_t coarse_id)
    : codebook_size_(model.config().codebook_size()),
      table_(model.config().m * codebook_size_) {
  const std::size_t ds = model.sub_dim();
  auto centroid = model.coarse_centroid(coarse_id);
  std::vector<double> residual(model.dim());
  for (std::size_t i = 0; i < residual.size(); ++i) {
    residual[i] = static_cast<double>(query[i]) - static_cast<double>(centroid[i]);
  }
  for (std::size_t j = 0; j < model.config().m; ++j) {
    for (std::size_t c = 0; c < codebook_size_; ++c) {
      auto word = model.codeword(j, c);
      double s = 0.0;
      for (std::size_t t = 0; t < ds; ++t) {
        const double diff = residual[j * ds + t] - static_cast<double>(word[t]);
        s += diff * diff;
      }
      table_[j * codebook_size_ + c] = s;
    }
  }
}

double AdcTable::distance(std::span<const std::uint16_t> subcodes) const {
  double s = 0.0;
  for (std::size_t j = 0; j < subcodes.size(); ++j) s += table_[j * codebook_size_ + subcodes[j]];
  return s;
}

EncodedStore encode_datastore(const PQModel& model, const Datastore& store) {
  EncodedStore out;
  out.reserve(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    out.push_back({model.encode(store.key(i)), store.value(i)});
  }
  return out;
}

void serialize_record(const CodedRecord& record, ByteWriter& out) {
  out.u32(record.key.coarse_id);
  for (auto s : record.key.subcodes) out.u16(s);
  out.u32(record.value);
}

Bytes serialize_record(const CodedRecord& record) {
  ByteWriter w;
  serialize_record(record, w);
  return w.take();
}

CodedRecord deserialize_record(std::span<const std::uint8_t> bytes, std::size_t m) {
  ByteReader r(bytes);
  CodedRecord rec;
  rec.key.coarse_id = r.u32();
  rec.key.subcodes.resize(m);
  for (auto& s : rec.key.subcodes) s = r.u16();
  rec.value = r.u32();
  if (!r.done()) throw FormatError(FormatErrc::kCorrupt, "trailing bytes after coded record");
  return rec;
}

void PQIndex::add(const CodedRecord& record) {
  model_.check_code(record.key);
  auto& list = lists_[record.key.coarse_id];
  list.subcodes.insert(list.subcodes.end(), record.key.subcodes.begin(), record.key.subcodes.end());
  list.values.push_back(record.value);
  list.insertion.push_back(size_++);
}

void PQIndex::add(std::span<const CodedRecord> records) {
  for (const auto& r : records) add(r);
}

SearchResult PQIndex::search(std::span<const float> query, std::size_t k, std::size_t n_probe) const {
  if (k == 0) throw InvalidArgument("knn_search needs K >= 1");
  if (query.size() != model_.dim()) throw DimensionError("query dim does not match index");
  SearchResult result;
  if (size_ == 0) {
    result.index_empty = true;
    return result;
  }
  const std::size_t n_coarse = model_.config().n_coarse;
  n_probe = std::clamp<std::size_t>(n_probe, 1, n_coarse);

  std::vector<std::pair<double, std::size_t>> coarse(n_coarse);
  for (std::size_t c = 0; c < n_coarse; ++c) {
    coarse[c] = {squared_l2(query, model_.coarse_centroid(c)), c};
  }
  std::partial_sort(coarse.begin(), coarse.begin() + static_cast<std::ptrdiff_t>(n_probe),
                    coarse.end());

  struct Candidate {
    double distance;
    std::size_t insertion;
    std::size_t list;
    std::size_t pos;
  };
  std::vector<Candidate> candidates;
  const std::size_t m = model_.config().m;
  for (std::size_t p = 0; p < n_probe; ++p) {
    const std::size_t c = coarse[p].second;
    const auto& list = lists_[c];
    if (list.values.empty()) continue;
    AdcTable table(model_, query, c);
    for (std::size_t e = 0; e < list.values.size(); ++e) {
      std::span<const std::uint16_t> codes(list.subcodes.data() + e * m, m);
      candidates.push_back({table.distance(codes), list.insertion[e], c, e});
    }
  }
  auto less = [](const Candidate& a, const Candidate& b) {
    return std::tie(a.distance, a.insertion) < std::tie(b.distance, b.insertion);
  };
  const std::size_t take = std::min(k, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take),
                    candidates.end(), less);
  result.neighbors.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    const auto& cand = candidates[i];
    const auto& list = lists_[cand.list];
    Neighbor nb;
    nb.distance = cand.distance;
    nb.value = list.values[cand.pos];
    nb.key.coarse_id = static_cast<std::uint32_t>(cand.list);
    nb.key.subcodes.assign(list.subcodes.begin() + static_cast<std::ptrdiff_t>(cand.pos * m),
                           list.subcodes.begin() + static_cast<std::ptrdiff_t>((cand.pos + 1) * m));
    nb.insertion = cand.insertion;
    result.neighbors.push_back(std::move(nb));
  }
  return result;
}

EncodedStore PQIndex::records() const {
  EncodedStore out(size_);
  const std::size_t m = model_.config().m;
  for (std::size_t c = 0; c < lists_.size(); ++c) {
    const auto& list = lists_[c];
    for (std::size_t e = 0; e < list.values.size(); ++e) {
      auto& rec = out[list.insertion[e]];
      rec.key.coarse_id = static_cast<std::uint32_t>(c);
      rec.key.subcodes.assign(list.subcodes.begin() + static_cast<std::ptrdiff_t>(e * m),
                              list.subcodes.begin() + static_cast<std::ptrdiff_t>((e + 1) * m));
      rec.value = list.values[e];
    }
  }
  return out;
}

PQIndex build_index(const PQModel& model, std::span<const CodedRecord> records) {
  PQIndex index(model);
  index.add(records);
  return index;
}

SearchResult knn_search(const PQIndex& index, std::span<const float> query, std::size_t k,
                        std::size_t n_probe) {
  return index.search(query, k, n_probe);
}

}  // namespace fednn
