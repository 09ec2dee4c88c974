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

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fednn/bytes.hpp"
#include "fednn/corpus.hpp"
#include "fednn/memstore.hpp"

namespace fednn {

struct PQConfig {
  std::size_t n_coarse = 64;
  std::size_t m = 4;       // subspaces
  std::size_t bits = 4;    // per sub-code
  std::size_t n_probe = 16;
  std::size_t kmeans_iters = 25;
  std::uint64_t seed = 1;

  // 4096 coarse centroids, 64 lists probed per query.
  static PQConfig full_scale();

  std::size_t codebook_size() const { return std::size_t{1} << bits; }
  // Throws InvalidArgument when the config cannot describe a dim-d model.
  void validate(std::size_t dim) const;
};

struct EncodedKey {
  std::uint32_t coarse_id = 0;
  std::vector<std::uint16_t> subcodes;

  auto operator<=>(const EncodedKey&) const = default;
};

// A K-encrypted datastore record.
struct CodedRecord {
  EncodedKey key;
  TokenId value = 0;

  auto operator<=>(const CodedRecord&) const = default;
};
using EncodedStore = std::vector<CodedRecord>;

// Inverted-file product quantizer: coarse centroids plus one codebook per
// subspace, applied to residuals (key - coarse centroid).
class PQModel {
 public:
  static constexpr std::uint32_t kVersion = 1;

  PQModel() = default;
  PQModel(std::size_t dim, PQConfig config, std::vector<float> coarse,
          std::vector<float> codebooks);

  std::size_t dim() const { return dim_; }
  std::size_t sub_dim() const { return dim_ / config_.m; }
  const PQConfig& config() const { return config_; }

  std::span<const float> coarse_centroid(std::size_t c) const;
  std::span<const float> codeword(std::size_t subspace, std::size_t code) const;
  std::span<const float> coarse_centroids() const { return coarse_; }
  std::span<const float> codebooks() const { return codebooks_; }

  EncodedKey encode(std::span<const float> key) const;
  std::vector<float> decode(const EncodedKey& code) const;
  double adc_distance(std::span<const float> query, const EncodedKey& code) const;
  void check_code(const EncodedKey& code) const;

  // FNPQ: "FNPQ", u32 version, u32 d, u32 m, u32 bits, u32 n_coarse, then
  // coarse centroids and codebooks as float32, little-endian.
  Bytes serialize() const;
  static PQModel deserialize(std::span<const std::uint8_t> bytes);

  // Bytes of one record once encoded on the wire: u32 coarse id,
  // m x u16 sub-codes, u32 token.
  std::size_t record_bytes() const { return 8 + 2 * config_.m; }

 private:
  std::size_t dim_ = 0;
  PQConfig config_;
  std::vector<float> coarse_;     // n_coarse x dim
  std::vector<float> codebooks_;  // m x 2^bits x sub_dim
};

PQModel train_pq(std::span<const float> keys, std::size_t dim, const PQConfig& config);
PQModel train_pq(const Datastore& sample, const PQConfig& config);

EncodedKey encode_key(const PQModel& model, std::span<const float> key);
std::vector<float> decode_key(const PQModel& model, const EncodedKey& code);
double adc_distance(const PQModel& model, std::span<const float> query, const EncodedKey& code);

// Per-query lookup table of squared sub-distances for one coarse list.
class AdcTable {
 public:
  AdcTable(const PQModel& model, std::span<const float> query, std::size_t coarse_id);
  double distance(std::span<const std::uint16_t> subcodes) const;

 private:
  std::size_t codebook_size_;
  std::vector<double> table_;  // m x 2^bits
};

EncodedStore encode_datastore(const PQModel& model, const Datastore& store);

Bytes serialize_record(const CodedRecord& record);
void serialize_record(const CodedRecord& record, ByteWriter& out);
CodedRecord deserialize_record(std::span<const std::uint8_t> bytes, std::size_t m);

struct Neighbor {
  double distance = 0.0;  // squared L2 (ADC)
  TokenId value = 0;
  EncodedKey key;
  std::size_t insertion = 0;  // position in the build order
};

struct SearchResult {
  bool index_empty = false;
  std::vector<Neighbor> neighbors;  // ascending (distance, insertion)
};

// Searchable inverted lists of coded records.
class PQIndex {
 public:
  explicit PQIndex(PQModel model) : model_(std::move(model)), lists_(model_.config().n_coarse) {}

  void add(const CodedRecord& record);
  void add(std::span<const CodedRecord> records);

  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  const PQModel& model() const { return model_; }
  std::size_t list_size(std::size_t coarse_id) const { return lists_[coarse_id].values.size(); }

  // Scans the n_probe nearest coarse lists; n_probe is clamped to n_coarse.
  SearchResult search(std::span<const float> query, std::size_t k, std::size_t n_probe) const;

  // Entries in insertion order.
  EncodedStore records() const;

 private:
  struct InvertedList {
    std::vector<std::uint16_t> subcodes;  // flat, m per entry
    std::vector<TokenId> values;
    std::vector<std::size_t> insertion;
  };

  PQModel model_;
  std::vector<InvertedList> lists_;
  std::size_t size_ = 0;
};

PQIndex build_index(const PQModel& model, std::span<const CodedRecord> records);
SearchResult knn_search(const PQIndex& index, std::span<const float> query, std::size_t k,
                        std::size_t n_probe);

}  // namespace fednn
