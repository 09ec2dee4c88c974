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
#include <iosfwd>
#include <string>
#include <vector>

namespace fednn {

using TokenId = std::uint32_t;
using TokenSeq = std::vector<TokenId>;

// Reserved vocabulary ids shared by every model and corpus.
namespace vocab {
inline constexpr TokenId kEos = 0;
inline constexpr TokenId kSrcTag = 1;  // <2src>
inline constexpr TokenId kTgtTag = 2;  // <2tgt>
inline constexpr TokenId kFirstContent = 3;
}  // namespace vocab

struct SentencePair {
  TokenSeq source;
  TokenSeq target;  // includes the trailing EOS

  bool operator==(const SentencePair&) const = default;
};

struct ParallelCorpus {
  std::vector<SentencePair> pairs;
  std::string domain;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
  // Sum of target lengths, i.e. the number of datastore records it yields.
  std::size_t target_tokens() const;

  bool operator==(const ParallelCorpus&) const = default;
};

// Throws InvalidArgument if a target is empty or any id is >= vocab_size.
void validate_corpus(const ParallelCorpus& corpus, std::size_t vocab_size);

// Line format: "src ids<TAB>tgt ids", ids space separated, UTF-8.
void write_corpus(std::ostream& out, const ParallelCorpus& corpus);
ParallelCorpus read_corpus(std::istream& in, std::string domain = {});

void save_corpus(const std::string& path, const ParallelCorpus& corpus);
ParallelCorpus load_corpus(const std::string& path, std::string domain = {});

}  // namespace fednn
