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

#include "fednn/corpus.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <string_view>

#include "fednn/error.hpp"

namespace fednn {
namespace {

void write_ids(std::ostream& out, const TokenSeq& ids) {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out << ' ';
    out << ids[i];
  }
}

TokenSeq parse_ids(std::string_view text, std::size_t line_no) {
  TokenSeq ids;
  std::size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() && text[pos] == ' ') ++pos;
    if (pos == text.size()) break;
    TokenId v = 0;
    auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + text.size(), v);
    if (ec != std::errc{} || (ptr != text.data() + text.size() && *ptr != ' ')) {
      throw FormatError(FormatErrc::kCorrupt,
                        "corpus line " + std::to_string(line_no) + ": bad token id");
    }
    ids.push_back(v);
    pos = static_cast<std::size_t>(ptr - text.data());
  }
  return ids;
}

}  // namespace

std::size_t ParallelCorpus::target_tokens() const {
  std::size_t n = 0;
  for (const auto& p : pairs) n += p.target.size();
  return n;
}

void validate_corpus(const ParallelCorpus& corpus, std::size_t vocab_size) {
  for (std::size_t i = 0; i < corpus.pairs.size(); ++i) {
    const auto& p = corpus.pairs[i];
    if (p.target.empty()) {
      throw InvalidArgument("pair " + std::to_string(i) + " has an empty target");
    }
    for (const auto* seq : {&p.source, &p.target}) {
      for (TokenId t : *seq) {
        if (t >= vocab_size) {
          throw InvalidArgument("pair " + std::to_string(i) + ": token " +
                                std::to_string(t) + " outside vocabulary of " +
                                std::to_string(vocab_size));
        }
      }
    }
  }
}

void write_corpus(std::ostream& out, const ParallelCorpus& corpus) {
  for (const auto& p : corpus.pairs) {
    write_ids(out, p.source);
    out << '\t';
    write_ids(out, p.target);
    out << '\n';
  }
}

ParallelCorpus read_corpus(std::istream& in, std::string domain) {
  ParallelCorpus corpus;
  corpus.domain = std::move(domain);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw FormatError(FormatErrc::kCorrupt,
                        "corpus line " + std::to_string(line_no) + ": missing tab");
    }
    std::string_view view(line);
    corpus.pairs.push_back({parse_ids(view.substr(0, tab), line_no),
                            parse_ids(view.substr(tab + 1), line_no)});
  }
  return corpus;
}

void save_corpus(const std::string& path, const ParallelCorpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  write_corpus(out, corpus);
}

ParallelCorpus load_corpus(const std::string& path, std::string domain) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return read_corpus(in, std::move(domain));
}

}  // namespace fednn
