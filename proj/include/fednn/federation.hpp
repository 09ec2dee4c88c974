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
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "fednn/bytes.hpp"
#include "fednn/corpus.hpp"
#include "fednn/quantizer.hpp"
#include "fednn/random.hpp"
#include "fednn/sealing.hpp"
#include "fednn/sequence_model.hpp"

namespace fednn {

enum class MessageKind : std::uint8_t {
  kBroadcastModel = 1,
  kBroadcastKE = 2,
  kUploadSealedStore = 3,
  kBroadcastGlobalStore = 4,
  kModelUpdate = 5,
  kModelAggregate = 6,
};

std::string_view to_string(MessageKind kind);

using NodeId = std::uint16_t;
inline constexpr NodeId kServerNode = 0;

struct Message {
  MessageKind kind = MessageKind::kBroadcastModel;
  NodeId sender = 0;
  NodeId receiver = 0;
  Bytes payload;

  bool operator==(const Message&) const = default;
};

// Frame: u32 payload length, u8 kind, u16 sender, u16 receiver, payload.
Bytes frame_message(const Message& message);
Message parse_frame(std::span<const std::uint8_t> frame);

// Byte accounting for everything that crosses the simulated wire.
class CostLedger {
 public:
  struct Entry {
    std::uint64_t bytes = 0;
    std::uint64_t messages = 0;
  };

  void record(const Message& message);

  std::uint64_t total_bytes() const { return total_; }
  std::uint64_t bytes(MessageKind kind) const;
  std::uint64_t bytes(MessageKind kind, NodeId sender) const;
  std::uint64_t messages(MessageKind kind) const;
  std::uint64_t messages_to(MessageKind kind, NodeId receiver) const;
  std::uint64_t messages_from(MessageKind kind, NodeId sender) const;
  const std::map<std::pair<MessageKind, NodeId>, Entry>& entries() const { return by_sender_; }

  // Unit constants that tie measured bytes back to the closed forms.
  std::uint64_t model_bytes = 0;  // M: per-client model broadcast (incl. f_KE)
  std::uint64_t store_bytes = 0;  // D: total sealed bytes uploaded
  std::size_t clients = 0;        // N
  std::size_t rounds = 0;         // R

 private:
  std::map<std::pair<MessageKind, NodeId>, Entry> by_sender_;
  std::map<std::pair<MessageKind, NodeId>, std::uint64_t> to_receiver_;
  std::uint64_t total_ = 0;
};

// In-process deterministic message queue. Every send is charged to the
// ledger exactly once.
class Network {
 public:
  explicit Network(bool keep_transcript = true) : keep_transcript_(keep_transcript) {}

  void send(Message message);
  // Earliest undelivered message addressed to `receiver`, if any.
  std::optional<Message> receive(NodeId receiver);
  std::size_t pending() const { return queue_.size(); }

  const CostLedger& ledger() const { return ledger_; }
  CostLedger& ledger() { return ledger_; }
  const std::vector<Message>& transcript() const { return transcript_; }

 private:
  bool keep_transcript_;
  std::deque<Message> queue_;
  std::vector<Message> transcript_;
  CostLedger ledger_;
};

// Server-side V-encryption: a seeded uniform permutation of the records.
template <typename T>
std::vector<T> shuffle_v_encrypt(std::vector<T> records, std::uint64_t seed) {
  rnd::Engine rng(seed);
  rnd::shuffle(std::span<T>(records), rng);
  return records;
}

struct GlobalSealedStore {
  std::vector<SealedRecord> records;

  std::size_t count() const { return records.size(); }
  // u32 count followed by the sealed records.
  Bytes serialize() const;
  static GlobalSealedStore deserialize(std::span<const std::uint8_t> bytes);
};

struct FedNNClient {
  NodeId id = 1;
  ParallelCorpus corpus;
};

struct FedNNRoundResult {
  std::vector<EncodedStore> global_stores;  // decrypted, one per client
  std::vector<EncodedStore> local_stores;   // each client's pre-seal records
  CostLedger ledger;
  std::vector<Message> transcript;
};

// Size of the aggregated store: the sum of the client store sizes.
std::uint64_t global_store_records(std::span<const std::uint64_t> client_records);

// One-round memorization exchange: the server broadcasts the model and
// f_KE, each client uploads its sealed K-encrypted datastore, the server
// concatenates and shuffles the sealed records and unicasts the result, and
// every client decrypts it. Throws ProtocolError if a record fails to open.
FedNNRoundResult run_fednn_round(const SequenceModel& server_model, const PQModel& pq,
                                 std::span<const FedNNClient> clients, const KeyPair& shared_keys,
                                 std::uint64_t seed);

// Serialized form of a decrypted global store: u32 count, u32 m, records.
Bytes serialize_encoded_store(const EncodedStore& store, std::size_t m);

enum class CommMethod { kFedAvg, kFTEnsemble, kFedNN };

CommMethod parse_comm_method(std::string_view name);
std::string_view to_string(CommMethod method);

// Closed-form communication in MB:
//   FedAvg      M*N*R*2
//   FT-Ensemble M*N*(N+1)
//   FedNN       M*N + D*(N-1)
double closed_form_comm_mb(CommMethod method, double model_mb, std::size_t clients,
                           std::size_t rounds, double store_mb);
// Same, in GB (MB / 1024) rounded half-to-even at two decimals.
double closed_form_comm(CommMethod method, double model_mb, std::size_t clients,
                        std::size_t rounds, double store_mb);

double round2(double value);
double bytes_to_mb(std::uint64_t bytes);
double bytes_to_gb(std::uint64_t bytes);

struct LedgerReport {
  std::string method;
  std::size_t clients = 0;
  std::size_t rounds = 0;
  double model_mb = 0.0;
  double store_mb = 0.0;
  std::uint64_t total_bytes = 0;
  std::map<std::string, std::uint64_t> bytes_by_kind;
  std::map<std::string, std::uint64_t> messages_by_kind;
  double measured_gb = 0.0;
  double closed_form_gb = 0.0;

  nlohmann::json to_json() const;
};

// Totals from the ledger alongside the closed form evaluated on the
// ledger's own M/D/N/R constants (or the overrides when given).
LedgerReport ledger_report(const CostLedger& ledger, CommMethod method,
                           std::optional<double> model_mb_override = std::nullopt,
                           std::optional<double> store_mb_override = std::nullopt);

}  // namespace fednn
