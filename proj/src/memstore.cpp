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

#include "fednn/memstore.hpp"

#include <cmath>
#include <fstream>
#include <iterator>

#include "fednn/error.hpp"

namespace fednn {

void Datastore::push_back(std::span<const float> key, TokenId value) {
  if (key.size() != dim_) {
    throw DimensionError("key of length " + std::to_string(key.size()) +
                         " pushed into datastore of dim " + std::to_string(dim_));
  }
  for (float v : key) {
    if (!std::isfinite(v)) throw InvalidArgument("datastore keys must be finite");
  }
  keys_.insert(keys_.end(), key.begin(), key.end());
  values_.push_back(value);
}

void Datastore::reserve(std::size_t n) {
  keys_.reserve(n * dim_);
  values_.reserve(n);
}

Datastore build_datastore(const SequenceModel& model, const ParallelCorpus& corpus) {
  return build_datastore(model, corpus, model.dim());
}

Datastore build_datastore(const SequenceModel& model, const ParallelCorpus& corpus,
                          std::size_t declared_dim) {
  validate_corpus(corpus, model.vocab_size());
  Datastore store(declared_dim);
  store.reserve(corpus.target_tokens());
  for (const auto& pair : corpus.pairs) {
    std::span<const TokenId> target(pair.target);
    for (std::size_t t = 0; t < target.size(); ++t) {
      auto key = model.context(pair.source, target.first(t));
      if (key.size() != declared_dim) {
        throw DimensionError("model produced a " + std::to_string(key.size()) +
                             "-d context, expected " + std::to_string(declared_dim));
      }
      store.push_back(key, target[t]);
    }
  }
  return store;
}

Bytes serialize_datastore(const Datastore& store) {
  Bytes out;
  out.reserve(kDatastoreHeaderBytes + store.size() * (store.dim() * 4 + 4));
  ByteWriter w(out);
  w.magic("FNDS");
  w.u32(kDatastoreVersion);
  w.u32(static_cast<std::uint32_t>(store.dim()));
  w.u32(static_cast<std::uint32_t>(store.size()));
  for (std::size_t i = 0; i < store.size(); ++i) {
    w.f32s(store.key(i));
    w.u32(store.value(i));
  }
  return out;
}

Datastore deserialize_datastore(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (!r.expect_magic("FNDS")) throw FormatError(FormatErrc::kBadMagic, "not an FNDS datastore");
  const std::uint32_t version = r.u32();
  if (version != kDatastoreVersion) {
    throw FormatError(FormatErrc::kVersionMismatch,
                      "FNDS version " + std::to_string(version) + " unsupported");
  }
  const std::size_t dim = r.u32();
  const std::size_t count = r.u32();
  const std::size_t record_bytes = dim * 4 + 4;
  if (r.remaining() < count * record_bytes) {
    throw FormatError(FormatErrc::kTruncated,
                      "FNDS body truncated: " + std::to_string(count) + " records declared");
  }
  Datastore store(dim);
  store.reserve(count);
  std::vector<float> key(dim);
  for (std::size_t i = 0; i < count; ++i) {
    r.f32s(key);
    store.push_back(key, r.u32());
  }
  if (!r.done()) throw FormatError(FormatErrc::kCorrupt, "trailing bytes after FNDS records");
  return store;
}

void save_datastore(const std::string& path, const Datastore& store) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  auto bytes = serialize_datastore(store);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Datastore load_datastore(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_datastore(bytes);
}

}  // namespace fednn
