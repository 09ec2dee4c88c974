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

#include "fednn/sealing.hpp"

#include <algorithm>

#include "fednn/error.hpp"
#include "gtest/gtest.h"
#include "test_util.hpp"

namespace fednn {
namespace {

Bytes random_bytes(rnd::Engine& rng, std::size_t n) {
  Bytes b(n);
  for (auto& x : b) x = static_cast<std::uint8_t>(rng());
  return b;
}

TEST(KeygenTest, SameSeedSamePair) {
  EXPECT_EQ(keygen(7), keygen(7));
  EXPECT_NE(keygen(7).public_key, keygen(8).public_key);
  EXPECT_EQ(keygen(7).public_key.size(), 32u);
}

TEST(SealTest, RoundTripRandomPayloads) {
  rnd::Engine rng(51);
  const auto keys = keygen(1);
  NonceSource nonces(2);
  for (int i = 0; i < 1000; ++i) {
    Bytes pt = random_bytes(rng, 1 + rnd::uniform_index(rng, 64));
    auto sealed = seal_record(keys.public_key, pt, nonces);
    EXPECT_GE(sealed.ciphertext.size(), pt.size());
    EXPECT_NE(sealed.ciphertext, pt);
    EXPECT_EQ(open_record(keys, sealed), pt);
  }
}

TEST(SealTest, FreshNoncePerSeal) {
  const auto keys = keygen(1);
  NonceSource nonces(3);
  const Bytes pt{1, 2, 3, 4};
  auto a = seal_record(keys.public_key, pt, nonces);
  auto b = seal_record(keys.public_key, pt, nonces);
  EXPECT_NE(a.ciphertext, b.ciphertext);
  EXPECT_NE(a.nonce, b.nonce);
}

TEST(SealTest, NonceSourceIsReproducible) {
  const auto keys = keygen(1);
  const Bytes pt{9, 9, 9};
  NonceSource a(5), b(5);
  EXPECT_EQ(seal_record(keys.public_key, pt, a), seal_record(keys.public_key, pt, b));
}

TEST(SealTest, WrongKeyFailsAuthentication) {
  NonceSource nonces(4);
  auto sealed = seal_record(keygen(1).public_key, Bytes{1, 2, 3}, nonces);
  EXPECT_THROW(open_record(keygen(2), sealed), AuthenticationError);
}

TEST(SealTest, TamperingFailsAuthentication) {
  const auto keys = keygen(1);
  NonceSource nonces(4);
  auto sealed = seal_record(keys.public_key, Bytes{1, 2, 3, 4, 5}, nonces);
  for (std::size_t i = 0; i < sealed.ciphertext.size(); ++i) {
    auto t = sealed;
    t.ciphertext[i] ^= 0x01;
    EXPECT_THROW(open_record(keys, t), AuthenticationError);
  }
  auto t = sealed;
  t.nonce.back() ^= 0x80;
  EXPECT_THROW(open_record(keys, t), AuthenticationError);
}

TEST(SealTest, EmptyPlaintextRejected) {
  NonceSource nonces(4);
  EXPECT_THROW(seal_record(keygen(1).public_key, Bytes{}, nonces), InvalidArgument);
}

TEST(SealedWireTest, LayoutIsLengthPrefixed) {
  NonceSource nonces(6);
  auto sealed = seal_record(keygen(1).public_key, Bytes{1, 2, 3}, nonces);
  Bytes wire = serialize_sealed(sealed);
  EXPECT_EQ(wire.size(), sealed_wire_bytes(sealed));
  const std::uint32_t len = wire[0] | (wire[1] << 8) | (wire[2] << 16) | (std::uint32_t(wire[3]) << 24);
  EXPECT_EQ(len, wire.size() - 4);
  EXPECT_EQ(wire[4], static_cast<std::uint8_t>(SchemeId::kBoxEnvelope));
  EXPECT_EQ(wire.size(), 4u + 1u + default_cipher().nonce_bytes() + 3u + default_cipher().overhead_bytes());
}

TEST(SealedWireTest, StreamSplitsWithoutOutOfBandLengths) {
  rnd::Engine rng(52);
  const auto keys = keygen(1);
  NonceSource nonces(7);
  std::vector<SealedRecord> records;
  ByteWriter w;
  for (int i = 0; i < 50; ++i) {
    records.push_back(seal_record(keys.public_key, random_bytes(rng, 1 + i % 13), nonces));
    write_sealed(records.back(), w);
  }
  EXPECT_EQ(split_sealed_stream(w.take()), records);
}

TEST(SealedWireTest, TruncatedBlobIsFormatError) {
  NonceSource nonces(8);
  Bytes wire = serialize_sealed(seal_record(keygen(1).public_key, Bytes{1, 2}, nonces));
  for (std::size_t cut : {1u, 4u, 10u}) {
    Bytes t(wire.begin(), wire.end() - cut);
    EXPECT_THROW(split_sealed_stream(t), FormatError);
  }
}

TEST(SealedWireTest, UnknownSchemeRejected) {
  EXPECT_THROW(cipher_for(static_cast<SchemeId>(9)), FormatError);
}

}  // namespace
}  // namespace fednn
