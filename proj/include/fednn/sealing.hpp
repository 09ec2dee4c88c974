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
#include <memory>
#include <span>
#include <vector>

#include "fednn/bytes.hpp"

namespace fednn {

enum class SchemeId : std::uint8_t {
  // Ephemeral X25519 key agreement + XSalsa20-Poly1305 (libsodium crypto_box).
  kBoxEnvelope = 1,
};

struct KeyPair {
  Bytes public_key;
  Bytes private_key;
  SchemeId scheme = SchemeId::kBoxEnvelope;

  bool operator==(const KeyPair&) const = default;
};

struct SealedRecord {
  SchemeId scheme = SchemeId::kBoxEnvelope;
  Bytes nonce;  // ephemeral public key followed by the AEAD nonce
  Bytes ciphertext;

  bool operator==(const SealedRecord&) const = default;
};

// Deterministic stream of nonce and ephemeral-key material (keyed BLAKE2b
// in counter mode). Reproducible given the seed; never repeats within a
// stream.
class NonceSource {
 public:
  explicit NonceSource(std::uint64_t seed);
  void fill(std::span<std::uint8_t> out);

 private:
  std::uint8_t key_[32];
  std::uint64_t counter_ = 0;
};

// Content encryption shared by all clients; the relaying server never holds
// the private key.
class ContentCipher {
 public:
  virtual ~ContentCipher() = default;
  virtual SchemeId scheme() const = 0;
  virtual std::size_t nonce_bytes() const = 0;
  virtual std::size_t overhead_bytes() const = 0;  // ciphertext - plaintext
  virtual KeyPair keygen(std::uint64_t seed) const = 0;
  virtual SealedRecord seal(std::span<const std::uint8_t> public_key,
                            std::span<const std::uint8_t> plaintext, NonceSource& nonces) const = 0;
  // Throws AuthenticationError when the key is wrong or the record was
  // modified.
  virtual Bytes open(std::span<const std::uint8_t> private_key, const SealedRecord& record) const = 0;
};

class BoxEnvelopeCipher final : public ContentCipher {
 public:
  BoxEnvelopeCipher();
  SchemeId scheme() const override { return SchemeId::kBoxEnvelope; }
  std::size_t nonce_bytes() const override;
  std::size_t overhead_bytes() const override;
  KeyPair keygen(std::uint64_t seed) const override;
  SealedRecord seal(std::span<const std::uint8_t> public_key, std::span<const std::uint8_t> plaintext,
                    NonceSource& nonces) const override;
  Bytes open(std::span<const std::uint8_t> private_key, const SealedRecord& record) const override;
};

const ContentCipher& default_cipher();
const ContentCipher& cipher_for(SchemeId scheme);

KeyPair keygen(std::uint64_t seed);
SealedRecord seal_record(std::span<const std::uint8_t> public_key,
                         std::span<const std::uint8_t> plaintext, NonceSource& nonces);
Bytes open_record(const KeyPair& keys, const SealedRecord& record);

// Wire layout: u32 length of what follows, u8 scheme id, nonce, ciphertext.
void write_sealed(const SealedRecord& record, ByteWriter& out);
Bytes serialize_sealed(const SealedRecord& record);
SealedRecord read_sealed(ByteReader& in);
std::size_t sealed_wire_bytes(const SealedRecord& record);

// Splits a concatenation of self-delimiting sealed records.
std::vector<SealedRecord> split_sealed_stream(std::span<const std::uint8_t> bytes);

}  // namespace fednn
