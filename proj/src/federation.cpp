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

#include "fednn/federation.hpp"

#include <cfenv>
#include <cmath>
#include <limits>

#include "fednn/error.hpp"
#include "fednn/memstore.hpp"

namespace fednn {

std::string_view to_string(MessageKind kind) {
  switch (kind) {
    case MessageKind::kBroadcastModel: return "BroadcastModel";
    case MessageKind::kBroadcastKE: return "BroadcastKE";
    case MessageKind::kUploadSealedStore: return "UploadSealedStore";
    case MessageKind::kBroadcastGlobalStore: return "BroadcastGlobalStore";
    case MessageKind::kModelUpdate: return "ModelUpdate";
    case MessageKind::kModelAggregate: return "ModelAggregate";
  }
  return "Unknown";
}

Bytes frame_message(const Message& message) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(message.payload.size()));
  w.u8(static_cast<std::uint8_t>(message.kind));
  w.u16(message.sender);
  w.u16(message.receiver);
  w.raw(message.payload);
  return w.take();
}

Message parse_frame(std::span<const std::uint8_t> frame) {
  ByteReader r(frame);
  const std::size_t length = r.u32();
  Message m;
  const std::uint8_t kind = r.u8();
  if (kind < 1 || kind > 6) throw FormatError(FormatErrc::kCorrupt, "unknown message kind");
  m.kind = static_cast<MessageKind>(kind);
  m.sender = r.u16();
  m.receiver = r.u16();
  auto payload = r.raw(length);
  m.payload.assign(payload.begin(), payload.end());
  if (!r.done()) throw FormatError(FormatErrc::kCorrupt, "trailing bytes after message frame");
  return m;
}

void CostLedger::record(const Message& message) {
  const std::uint64_t n = message.payload.size();
  auto& e = by_sender_[{message.kind, message.sender}];
  e.bytes += n;
  e.messages += 1;
  to_receiver_[{message.kind, message.receiver}] += 1;
  total_ += n;
}

std::uint64_t CostLedger::bytes(MessageKind kind) const {
  std::uint64_t s = 0;
  for (const auto& [key, e] : by_sender_) {
    if (key.first == kind) s += e.bytes;
  }
  return s;
}

std::uint64_t CostLedger::bytes(MessageKind kind, NodeId sender) const {
  auto it = by_sender_.find({kind, sender});
  return it == by_sender_.end() ? 0 : it->second.bytes;
}

std::uint64_t CostLedger::messages(MessageKind kind) const {
  std::uint64_t s = 0;
  for (const auto& [key, e] : by_sender_) {
    if (key.first == kind) s += e.messages;
  }
  return s;
}

std::uint64_t CostLedger::messages_to(MessageKind kind, NodeId receiver) const {
  auto it = to_receiver_.find({kind, receiver});
  return it == to_receiver_.end() ? 0 : it->second;
}

std::uint64_t CostLedger::messages_from(MessageKind kind, NodeId sender) const {
  auto it = by_sender_.find({kind, sender});
  return it == by_sender_.end() ? 0 : it->second.messages;
}

void Network::send(Message message) {
  ledger_.record(message);
  if (keep_transcript_) transcript_.push_back(message);
  queue_.push_back(std::move(message));
}

std::optional<Message> Network::receive(NodeId receiver) {
  for (auto it = queue_.begin(); it != queue_.end(); ++it) {
    if (it->receiver == receiver) {
      Message m = std::move(*it);
      queue_.erase(it);
      return m;
    }
  }
  return std::nullopt;
}

Bytes GlobalSealedStore::serialize() const {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(records.size()));
  for (const auto& r : records) write_sealed(r, w);
  return w.take();
}

GlobalSealedStore GlobalSealedStore::deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  const std::size_t count = r.u32();
  GlobalSealedStore store;
  store.records.reserve(count);
  for (std::size_t i = 0; i < count; ++i) store.records.push_back(read_sealed(r));
  if (!r.done()) throw FormatError(FormatErrc::kCorrupt, "trailing bytes after global store");
  return store;
}

Bytes serialize_encoded_store(const EncodedStore& store, std::size_t m) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(store.size()));
  w.u32(static_cast<std::uint32_t>(m));
  for (const auto& rec : store) serialize_record(rec, w);
  return w.take();
}

std::uint64_t global_store_records(std::span<const std::uint64_t> client_records) {
  std::uint64_t total = 0;
  for (auto n : client_records) {
    if (total > std::numeric_limits<std::uint64_t>::max() - n) {
      throw InvalidArgument("global store size overflows");
    }
    total += n;
  }
  return total;
}

FedNNRoundResult run_fednn_round(const SequenceModel& server_model, const PQModel& pq,
                                 std::span<const FedNNClient> clients, const KeyPair& shared_keys,
                                 std::uint64_t seed) {
  Network net;
  const Bytes model_blob = server_model.serialize_parameters();
  const Bytes pq_blob = pq.serialize();

  // Initialization: f_theta and f_KE go out together.
  for (const auto& c : clients) {
    if (c.id == kServerNode) throw ProtocolError("client id 0 is reserved for the server");
    net.send({MessageKind::kBroadcastModel, kServerNode, c.id, model_blob});
    net.send({MessageKind::kBroadcastKE, kServerNode, c.id, pq_blob});
  }

  FedNNRoundResult result;
  // Private memorization construction, per client.
  for (const auto& c : clients) {
    auto model_msg = net.receive(c.id);
    auto ke_msg = net.receive(c.id);
    if (!model_msg || !ke_msg) throw ProtocolError("client did not receive the initial broadcast");
    auto local_model = server_model.clone();
    local_model->load_parameters(model_msg->payload);
    const PQModel local_pq = PQModel::deserialize(ke_msg->payload);

    Datastore store = build_datastore(*local_model, c.corpus);
    store.provenance = c.id;
    EncodedStore coded = encode_datastore(local_pq, store);

    NonceSource nonces(rnd::derive_seed(seed, c.id));
    ByteWriter upload;
    for (const auto& rec : coded) {
      write_sealed(seal_record(shared_keys.public_key, serialize_record(rec), nonces), upload);
    }
    net.send({MessageKind::kUploadSealedStore, c.id, kServerNode, upload.take()});
    result.local_stores.push_back(std::move(coded));
  }

  // Global memorization aggregation: concatenate, then V-encrypt.
  std::vector<std::vector<SealedRecord>> uploads;
  std::vector<std::uint64_t> upload_sizes;
  for (std::size_t i = 0; i < clients.size(); ++i) {
    auto msg = net.receive(kServerNode);
    if (!msg || msg->kind != MessageKind::kUploadSealedStore) {
      throw ProtocolError("server expected a sealed datastore upload");
    }
    uploads.push_back(split_sealed_stream(msg->payload));
    upload_sizes.push_back(uploads.back().size());
  }
  GlobalSealedStore global;
  global.records.reserve(static_cast<std::size_t>(global_store_records(upload_sizes)));
  for (auto& records : uploads) {
    global.records.insert(global.records.end(), std::make_move_iterator(records.begin()),
                          std::make_move_iterator(records.end()));
  }
  global.records = shuffle_v_encrypt(std::move(global.records), rnd::derive_seed(seed, 0xF00D));
  const Bytes global_blob = global.serialize();
  for (const auto& c : clients) {
    net.send({MessageKind::kBroadcastGlobalStore, kServerNode, c.id, global_blob});
  }

  // Clients decrypt.
  const std::size_t m = pq.config().m;
  for (const auto& c : clients) {
    auto msg = net.receive(c.id);
    if (!msg || msg->kind != MessageKind::kBroadcastGlobalStore) {
      throw ProtocolError("client did not receive the global store");
    }
    auto received = GlobalSealedStore::deserialize(msg->payload);
    EncodedStore decrypted;
    decrypted.reserve(received.count());
    for (std::size_t i = 0; i < received.records.size(); ++i) {
      try {
        decrypted.push_back(deserialize_record(open_record(shared_keys, received.records[i]), m));
      } catch (const Error& e) {
        throw ProtocolError("client " + std::to_string(c.id) + ": global record " +
                            std::to_string(i) + " could not be opened: " + e.what());
      }
    }
    result.global_stores.push_back(std::move(decrypted));
  }

  result.ledger = net.ledger();
  result.ledger.model_bytes = model_blob.size() + pq_blob.size();
  result.ledger.store_bytes = result.ledger.bytes(MessageKind::kUploadSealedStore);
  result.ledger.clients = clients.size();
  result.ledger.rounds = 1;
  result.transcript = net.transcript();
  return result;
}

CommMethod parse_comm_method(std::string_view name) {
  if (name == "fedavg") return CommMethod::kFedAvg;
  if (name == "ft-ensemble" || name == "ft_ensemble") return CommMethod::kFTEnsemble;
  if (name == "fednn") return CommMethod::kFedNN;
  throw InvalidArgument("unknown method id '" + std::string(name) + "'");
}

std::string_view to_string(CommMethod method) {
  switch (method) {
    case CommMethod::kFedAvg: return "fedavg";
    case CommMethod::kFTEnsemble: return "ft-ensemble";
    case CommMethod::kFedNN: return "fednn";
  }
  return "unknown";
}

double closed_form_comm_mb(CommMethod method, double model_mb, std::size_t clients,
                           std::size_t rounds, double store_mb) {
  const double n = static_cast<double>(clients);
  switch (method) {
    case CommMethod::kFedAvg: return model_mb * n * static_cast<double>(rounds) * 2.0;
    case CommMethod::kFTEnsemble: return model_mb * n * (n + 1.0);
    case CommMethod::kFedNN: return model_mb * n + store_mb * (n - 1.0);
  }
  throw InvalidArgument("unknown method id");
}

double round2(double value) {
  // Half-to-even under the default rounding mode: 388.125 -> 388.12.
  const int saved = std::fegetround();
  std::fesetround(FE_TONEAREST);
  const double r = std::nearbyint(value * 100.0) / 100.0;
  std::fesetround(saved);
  return r;
}

double closed_form_comm(CommMethod method, double model_mb, std::size_t clients,
                        std::size_t rounds, double store_mb) {
  if (!(model_mb > 0.0) || clients == 0) {
    throw InvalidArgument("closed-form communication needs positive M and N");
  }
  if (method == CommMethod::kFedAvg && rounds == 0) throw InvalidArgument("FedAvg needs R >= 1");
  if (method == CommMethod::kFedNN && !(store_mb > 0.0)) throw InvalidArgument("FedNN needs D > 0");
  return round2(closed_form_comm_mb(method, model_mb, clients, rounds, store_mb) / 1024.0);
}

double bytes_to_mb(std::uint64_t bytes) { return static_cast<double>(bytes) / (1024.0 * 1024.0); }

double bytes_to_gb(std::uint64_t bytes) { return bytes_to_mb(bytes) / 1024.0; }

nlohmann::json LedgerReport::to_json() const {
  nlohmann::json j;
  j["method"] = method;
  j["N"] = clients;
  j["M_mb"] = model_mb;
  j["D_mb"] = store_mb;
  j["R"] = rounds;
  j["measured_gb"] = measured_gb;
  j["closed_form_gb"] = closed_form_gb;
  j["total_bytes"] = total_bytes;
  j["bytes_by_kind"] = bytes_by_kind;
  j["messages_by_kind"] = messages_by_kind;
  return j;
}

LedgerReport ledger_report(const CostLedger& ledger, CommMethod method,
                           std::optional<double> model_mb_override,
                           std::optional<double> store_mb_override) {
  LedgerReport report;
  report.method = std::string(to_string(method));
  report.clients = ledger.clients;
  report.rounds = ledger.rounds;
  report.model_mb = model_mb_override.value_or(bytes_to_mb(ledger.model_bytes));
  report.store_mb = store_mb_override.value_or(bytes_to_mb(ledger.store_bytes));
  report.total_bytes = ledger.total_bytes();
  for (const auto& [key, entry] : ledger.entries()) {
    report.bytes_by_kind[std::string(to_string(key.first))] += entry.bytes;
    report.messages_by_kind[std::string(to_string(key.first))] += entry.messages;
  }
  report.measured_gb = bytes_to_gb(report.total_bytes);
  const bool defined = report.model_mb > 0.0 && report.clients > 0 &&
                       (method != CommMethod::kFedAvg || report.rounds > 0) &&
                       (method != CommMethod::kFedNN || report.store_mb > 0.0);
  report.closed_form_gb =
      defined ? round2(closed_form_comm_mb(method, report.model_mb, report.clients, report.rounds,
                                           report.store_mb) /
                       1024.0)
              : 0.0;
  return report;
}

}  // namespace fednn
