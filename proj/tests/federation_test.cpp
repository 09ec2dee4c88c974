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

#include <algorithm>
#include <cmath>

#include "fednn/baselines.hpp"
#include "fednn/error.hpp"
#include "fednn/memstore.hpp"
#include "gtest/gtest.h"
#include "test_util.hpp"

namespace fednn {
namespace {

TEST(FrameTest, RoundTripAndLayout) {
  Message m{MessageKind::kUploadSealedStore, 3, 0, Bytes{7, 8, 9}};
  Bytes f = frame_message(m);
  ASSERT_EQ(f.size(), 4u + 1 + 2 + 2 + 3);
  EXPECT_EQ(f[0], 3u);
  EXPECT_EQ(f[4], 3u);
  EXPECT_EQ(f[5], 3u);
  EXPECT_EQ(parse_frame(f), m);
  f[4] = 9;
  EXPECT_THROW(parse_frame(f), FormatError);
}

TEST(CostLedgerTest, EmptyLedgerReportsZeros) {
  CostLedger l;
  auto r = ledger_report(l, CommMethod::kFedAvg);
  EXPECT_EQ(r.total_bytes, 0u);
  EXPECT_EQ(r.measured_gb, 0.0);
  EXPECT_EQ(r.closed_form_gb, 0.0);
}

TEST(CostLedgerTest, CountsEveryPayloadOnce) {
  Network net;
  net.send({MessageKind::kModelUpdate, 1, 0, Bytes(100)});
  EXPECT_EQ(net.ledger().total_bytes(), 100u);
  net.send({MessageKind::kModelAggregate, 0, 1, Bytes(20)});
  net.send({MessageKind::kModelAggregate, 0, 2, Bytes(30)});
  const auto& l = net.ledger();
  EXPECT_EQ(l.total_bytes(), 150u);
  EXPECT_EQ(l.bytes(MessageKind::kModelAggregate), 50u);
  EXPECT_EQ(l.bytes(MessageKind::kModelUpdate, 1), 100u);
  EXPECT_EQ(l.messages(MessageKind::kModelAggregate), 2u);
  EXPECT_EQ(l.messages_to(MessageKind::kModelAggregate, 2), 1u);
  EXPECT_EQ(l.messages_from(MessageKind::kModelAggregate, 0), 2u);
  auto r = ledger_report(l, CommMethod::kFedAvg);
  EXPECT_EQ(r.total_bytes, 150u);
}

TEST(NetworkTest, DeliversInOrderPerReceiver) {
  Network net;
  net.send({MessageKind::kModelAggregate, 0, 1, Bytes{1}});
  net.send({MessageKind::kModelAggregate, 0, 2, Bytes{2}});
  net.send({MessageKind::kModelAggregate, 0, 1, Bytes{3}});
  EXPECT_EQ(net.receive(1)->payload, Bytes{1});
  EXPECT_EQ(net.receive(1)->payload, Bytes{3});
  EXPECT_FALSE(net.receive(1).has_value());
  EXPECT_EQ(net.receive(2)->payload, Bytes{2});
  EXPECT_EQ(net.transcript().size(), 3u);
}

TEST(ShuffleTest, SeededPermutation) {
  EXPECT_TRUE(shuffle_v_encrypt(std::vector<int>{}, 1).empty());
  std::vector<int> in(200);
  for (int i = 0; i < 200; ++i) in[i] = i;
  auto a = shuffle_v_encrypt(in, 5);
  EXPECT_EQ(a, shuffle_v_encrypt(in, 5));
  EXPECT_NE(a, in);
  std::sort(a.begin(), a.end());
  EXPECT_EQ(a, in);
}

// M*N*R*2, M*N*(N+1), M*N + D*(N-1), in MB, then /1024.
double closed_form_oracle(const std::string& method, double m, double n, double r, double d) {
  double mb = 0.0;
  if (method == "fedavg") mb = m * n * r * 2;
  if (method == "ft") mb = m * n * (n + 1);
  if (method == "fednn") mb = m * n + d * (n - 1);
  return mb / 1024.0;
}

TEST(ClosedFormTest, TableValues) {
  EXPECT_DOUBLE_EQ(closed_form_comm(CommMethod::kFedAvg, 414, 3, 160, 0), 388.12);
  EXPECT_NEAR(closed_form_oracle("fedavg", 414, 3, 160, 0), 388.12, 0.01);
  const std::size_t ns[] = {3, 6, 12, 18};
  const double ft[] = {4.85, 16.98, 63.07, 138.27};
  const double nn[] = {5.08, 12.08, 26.10, 40.12};
  for (int i = 0; i < 4; ++i) {
    EXPECT_DOUBLE_EQ(closed_form_comm(CommMethod::kFTEnsemble, 414, ns[i], 1, 0), ft[i]);
    EXPECT_DOUBLE_EQ(closed_form_comm(CommMethod::kFedNN, 414, ns[i], 1, 1978), nn[i]);
    EXPECT_NEAR(closed_form_oracle("ft", 414, ns[i], 1, 0), ft[i], 0.01);
    EXPECT_NEAR(closed_form_oracle("fednn", 414, ns[i], 1, 1978), nn[i], 0.01);
  }
}

TEST(ClosedFormTest, MegabytesMatchOracle) {
  rnd::Engine rng(61);
  for (int i = 0; i < 100; ++i) {
    const double m = 1 + 500 * rnd::uniform01(rng), d = 1 + 3000 * rnd::uniform01(rng);
    const std::size_t n = 1 + rnd::uniform_index(rng, 30), r = 1 + rnd::uniform_index(rng, 200);
    EXPECT_NEAR(closed_form_comm_mb(CommMethod::kFedAvg, m, n, r, d) / 1024, closed_form_oracle("fedavg", m, n, r, d), 1e-9);
    EXPECT_NEAR(closed_form_comm_mb(CommMethod::kFTEnsemble, m, n, r, d) / 1024, closed_form_oracle("ft", m, n, r, d), 1e-9);
    EXPECT_NEAR(closed_form_comm_mb(CommMethod::kFedNN, m, n, r, d) / 1024, closed_form_oracle("fednn", m, n, r, d), 1e-9);
  }
}

TEST(ClosedFormTest, MethodNamesAndErrors) {
  EXPECT_EQ(parse_comm_method("fedavg"), CommMethod::kFedAvg);
  EXPECT_EQ(parse_comm_method("ft-ensemble"), CommMethod::kFTEnsemble);
  EXPECT_EQ(parse_comm_method("fednn"), CommMethod::kFedNN);
  EXPECT_THROW(parse_comm_method("controller"), InvalidArgument);
  EXPECT_THROW(closed_form_comm(CommMethod::kFedAvg, 0, 3, 1, 0), InvalidArgument);
  EXPECT_THROW(closed_form_comm(CommMethod::kFedNN, 414, 3, 1, 0), InvalidArgument);
}

TEST(ClosedFormTest, RoundHalfEven) {
  EXPECT_DOUBLE_EQ(round2(388.125), 388.12);
  EXPECT_DOUBLE_EQ(round2(0.125), 0.12);
  EXPECT_DOUBLE_EQ(round2(0.375), 0.38);
}

class FedNNRoundTest : public ::testing::Test {
 protected:
  void SetUp() override {
    ParallelCorpus pub = make_domain_corpus(1000, 200, 1);
    keys_ = train_pq(build_datastore(model_, pub), small_pq());
    for (std::size_t d = 0; d < 3; ++d) {
      clients_.push_back({static_cast<NodeId>(d + 1), make_domain_corpus(d, 20 + 5 * d, 3)});
    }
  }
  static PQConfig small_pq() {
    PQConfig c;
    c.n_coarse = 8;
    c.n_probe = 4;
    c.kmeans_iters = 10;
    return c;
  }
  ToyModel model_;
  PQModel keys_;
  std::vector<FedNNClient> clients_;
};

bool contains(const Bytes& hay, const Bytes& needle) {
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

TEST_F(FedNNRoundTest, OneRoundAndIdenticalStores) {
  auto r = run_fednn_round(model_, keys_, clients_, keygen(9), 77);
  EXPECT_EQ(r.ledger.messages(MessageKind::kUploadSealedStore), 3u);
  EXPECT_EQ(r.ledger.messages(MessageKind::kBroadcastGlobalStore), 3u);
  for (const auto& c : clients_) {
    EXPECT_EQ(r.ledger.messages_from(MessageKind::kUploadSealedStore, c.id), 1u);
    EXPECT_EQ(r.ledger.messages_to(MessageKind::kBroadcastGlobalStore, c.id), 1u);
  }
  const Bytes first = serialize_encoded_store(r.global_stores[0], 4);
  for (const auto& s : r.global_stores) EXPECT_EQ(serialize_encoded_store(s, 4), first);
}

TEST_F(FedNNRoundTest, GlobalStoreIsTheMultisetUnion) {
  auto r = run_fednn_round(model_, keys_, clients_, keygen(9), 78);
  EncodedStore expect;
  std::size_t total = 0;
  for (const auto& c : clients_) {
    auto local = encode_datastore(keys_, build_datastore(model_, c.corpus));
    total += local.size();
    expect.insert(expect.end(), local.begin(), local.end());
  }
  auto got = r.global_stores[1];
  EXPECT_EQ(got.size(), total);
  EXPECT_NE(got, expect);  // shuffled
  std::sort(expect.begin(), expect.end());
  std::sort(got.begin(), got.end());
  EXPECT_EQ(got, expect);
}

TEST_F(FedNNRoundTest, NoPlaintextOnTheWire) {
  auto r = run_fednn_round(model_, keys_, clients_, keygen(9), 79);
  for (const auto& msg : r.transcript) {
    if (msg.kind != MessageKind::kUploadSealedStore && msg.kind != MessageKind::kBroadcastGlobalStore) continue;
    for (const auto& store : r.local_stores) {
      for (const auto& rec : store) ASSERT_FALSE(contains(msg.payload, serialize_record(rec)));
    }
  }
}

TEST_F(FedNNRoundTest, GlobalBroadcastBytesFromStoreSize) {
  auto r = run_fednn_round(model_, keys_, clients_, keygen(9), 80);
  const std::size_t records = r.global_stores[0].size();
  const std::size_t per_record = 4 + 1 + default_cipher().nonce_bytes() + keys_.record_bytes() +
                                 default_cipher().overhead_bytes();
  const std::size_t store_bytes = 4 + records * per_record;
  EXPECT_EQ(r.ledger.bytes(MessageKind::kBroadcastGlobalStore), clients_.size() * store_bytes);
  EXPECT_EQ(r.ledger.bytes(MessageKind::kUploadSealedStore), records * per_record);
  EXPECT_EQ(r.ledger.model_bytes, model_.serialize_parameters().size() + keys_.serialize().size());
}

TEST_F(FedNNRoundTest, SingleClientGetsItsOwnStoreShuffled) {
  std::vector<FedNNClient> one{clients_[0]};
  auto r = run_fednn_round(model_, keys_, one, keygen(9), 81);
  auto local = r.local_stores[0];
  auto global = r.global_stores[0];
  std::sort(local.begin(), local.end());
  std::sort(global.begin(), global.end());
  EXPECT_EQ(global, local);
}

TEST_F(FedNNRoundTest, EmptyClientContributesNothing) {
  auto clients = clients_;
  clients[1].corpus.pairs.clear();
  auto r = run_fednn_round(model_, keys_, clients, keygen(9), 82);
  EXPECT_EQ(r.global_stores[0].size(), r.local_stores[0].size() + r.local_stores[2].size());
  EXPECT_EQ(r.ledger.messages(MessageKind::kUploadSealedStore), 3u);
}

TEST_F(FedNNRoundTest, DecryptionFailureIsProtocolError) {
  KeyPair mixed = keygen(9);
  mixed.private_key = keygen(10).private_key;
  try {
    run_fednn_round(model_, keys_, clients_, mixed, 83);
    FAIL() << "expected ProtocolError";
  } catch (const ProtocolError& e) {
    EXPECT_NE(std::string(e.what()).find("record 0"), std::string::npos);
  }
}

TEST_F(FedNNRoundTest, DeterministicGivenSeed) {
  auto a = run_fednn_round(model_, keys_, clients_, keygen(9), 84);
  auto b = run_fednn_round(model_, keys_, clients_, keygen(9), 84);
  EXPECT_EQ(a.transcript, b.transcript);
}

TEST_F(FedNNRoundTest, MeasuredBytesAffineInClientCount) {
  // Fixed total data split over N clients: total = N (M + D + 4) + D.
  ParallelCorpus all = make_domain_corpus(0, 24, 5);
  std::vector<std::uint64_t> totals;
  std::uint64_t d_bytes = 0, m_bytes = 0;
  for (std::size_t n = 1; n <= 4; ++n) {
    std::vector<FedNNClient> clients;
    for (std::size_t c = 0; c < n; ++c) {
      FedNNClient cl{static_cast<NodeId>(c + 1), {}};
      for (std::size_t i = c; i < all.size(); i += n) cl.corpus.pairs.push_back(all.pairs[i]);
      clients.push_back(cl);
    }
    auto r = run_fednn_round(model_, keys_, clients, keygen(9), 85);
    totals.push_back(r.ledger.total_bytes());
    d_bytes = r.ledger.store_bytes;
    m_bytes = r.ledger.model_bytes;
  }
  for (std::size_t i = 1; i < totals.size(); ++i) EXPECT_EQ(totals[i] - totals[i - 1], m_bytes + d_bytes + 4);
  EXPECT_EQ(totals[0], m_bytes + 2 * d_bytes + 4);
}

TEST_F(FedNNRoundTest, LedgerReportJson) {
  auto r = run_fednn_round(model_, keys_, clients_, keygen(9), 86);
  auto rep = ledger_report(r.ledger, CommMethod::kFedNN);
  auto j = rep.to_json();
  for (const char* key : {"method", "N", "M_mb", "D_mb", "R", "measured_gb", "closed_form_gb"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["N"], 3);
  EXPECT_EQ(rep.total_bytes, r.ledger.total_bytes());
  auto scaled = ledger_report(r.ledger, CommMethod::kFedNN, 414.0, 1978.0);
  EXPECT_DOUBLE_EQ(scaled.closed_form_gb, 5.08);
}

TEST(GlobalStoreSizeTest, SumOfClientStores) {
  const std::vector<std::uint64_t> sizes{3085523, 5858648, 16868065};
  EXPECT_EQ(global_store_records(sizes), 25812236u);
  EXPECT_EQ(global_store_records(std::vector<std::uint64_t>{}), 0u);
  EXPECT_THROW(global_store_records(std::vector<std::uint64_t>{~0ull, 1}), InvalidArgument);
}

TEST(GlobalSealedStoreTest, RoundTrip) {
  NonceSource nonces(1);
  GlobalSealedStore g;
  for (int i = 0; i < 5; ++i) g.records.push_back(seal_record(keygen(1).public_key, Bytes{std::uint8_t(i + 1)}, nonces));
  auto back = GlobalSealedStore::deserialize(g.serialize());
  EXPECT_EQ(back.records, g.records);
  Bytes b = g.serialize();
  b.push_back(0);
  EXPECT_THROW(GlobalSealedStore::deserialize(b), FormatError);
}

}  // namespace
}  // namespace fednn
