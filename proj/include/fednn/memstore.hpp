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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fednn/bytes.hpp"
#include "fednn/corpus.hpp"
#include "fednn/sequence_model.hpp"

namespace fednn {

// Ordered (key vector, token) memory records, keys stored flat.
class Datastore {
 public:
  explicit Datastore(std::size_t dim = 0) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::span<const float> key(std::size_t i) const {
    return std::span<const float>(keys_).subspan(i * dim_, dim_);
  }
  TokenId value(std::size_t i) const { return values_[i]; }

  const std::vector<float>& keys() const { return keys_; }
  const std::vector<TokenId>& values() const { return values_; }

  // Throws DimensionError on a wrong key length, InvalidArgument on
  // non-finite entries.
  void push_back(std::span<const float> key, TokenId value);
  void reserve(std::size_t n);

  // Local-only client tag. Never serialized.
  std::optional<std::uint32_t> provenance;

  // Field-for-field equality of the shared content (ignores provenance).
  bool operator==(const Datastore& other) const {
    return dim_ == other.dim_ && keys_ == other.keys_ && values_ == other.values_;
  }

 private:
  std::size_t dim_;
  std::vector<float> keys_;
  std::vector<TokenId> values_;
};

// One record per target token, in corpus order then timestep order. The key
// for position t is model.context(x, y_<t); the value is y_t.
Datastore build_datastore(const SequenceModel& model, const ParallelCorpus& corpus);

// As above, but also checks the model output against a declared dimension.
Datastore build_datastore(const SequenceModel& model, const ParallelCorpus& corpus,
                          std::size_t declared_dim);

// FNDS: "FNDS", u32 version, u32 dim, u32 count (16 bytes, little-endian),
// then count x (dim float32 key, u32 token).
inline constexpr std::uint32_t kDatastoreVersion = 1;
inline constexpr std::size_t kDatastoreHeaderBytes = 16;

Bytes serialize_datastore(const Datastore& store);
Datastore deserialize_datastore(std::span<const std::uint8_t> bytes);

void save_datastore(const std::string& path, const Datastore& store);
Datastore load_datastore(const std::string& path);

}  // namespace fednn
