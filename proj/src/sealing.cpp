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

#include <sodium.h>

#include <cstring>

#include "fednn/error.hpp"

namespace fednn {
namespace {

void ensure_sodium() {
  static const int status = sodium_init();
  if (status < 0) throw Error("libsodium failed to initialise");
}

constexpr std::size_t kEphemeralBytes = crypto_box_PUBLICKEYBYTES;
constexpr std::size_t kBoxNonceBytes = crypto_box_NONCEBYTES;

}  // namespace

NonceSource::NonceSource(std::uint64_t seed) {
  ensure_sodium();
  std::uint8_t in[16] = {'f', 'e', 'd', 'n', 'n', '-', 'n', 'o'};
  for (int i = 0; i < 8; ++i) in[8 + i] = static_cast<std::uint8_t>(seed >> (8 * i));
  crypto_generichash(key_, sizeof key_, in, sizeof in, nullptr, 0);
}

void NonceSource::fill(std::span<std::uint8_t> out) {
  std::size_t done = 0;
  while (done < out.size()) {
    std::uint8_t block[64];
    std::uint8_t ctr[8];
    for (int i = 0; i < 8; ++i) ctr[i] = static_cast<std::uint8_t>(counter_ >> (8 * i));
    ++counter_;
    crypto_generichash(block, sizeof block, ctr, sizeof ctr, key_, sizeof key_);
    const std::size_t n = std::min(sizeof block, out.size() - done);
    std::memcpy(out.data() + done, block, n);
    done += n;
  }
}

BoxEnvelopeCipher::BoxEnvelopeCipher() { ensure_sodium(); }

std::size_t BoxEnvelopeCipher::nonce_bytes() const { return kEphemeralBytes + kBoxNonceBytes; }

std::size_t BoxEnvelopeCipher::overhead_bytes() const { return crypto_box_MACBYTES; }

KeyPair BoxEnvelopeCipher::keygen(std::uint64_t seed) const {
  std::uint8_t in[16] = {'f', 'e', 'd', 'n', 'n', '-', 'k', 'g'};
  for (int i = 0; i < 8; ++i) in[8 + i] = static_cast<std::uint8_t>(seed >> (8 * i));
  std::uint8_t key_seed[crypto_box_SEEDBYTES];
  crypto_generichash(key_seed, sizeof key_seed, in, sizeof in, nullptr, 0);
  KeyPair kp;
  kp.scheme = SchemeId::kBoxEnvelope;
  kp.public_key.resize(crypto_box_PUBLICKEYBYTES);
  kp.private_key.resize(crypto_box_SECRETKEYBYTES);
  crypto_box_seed_keypair(kp.public_key.data(), kp.private_key.data(), key_seed);
  sodium_memzero(key_seed, sizeof key_seed);
  return kp;
}

SealedRecord BoxEnvelopeCipher::seal(std::span<const std::uint8_t> public_key,
                                     std::span<const std::uint8_t> plaintext,
                                     NonceSource& nonces) const {
  if (plaintext.empty()) throw InvalidArgument("cannot seal an empty plaintext");
  if (public_key.size() != crypto_box_PUBLICKEYBYTES) throw InvalidArgument("bad public key length");

  std::uint8_t eph_seed[crypto_box_SEEDBYTES];
  nonces.fill(eph_seed);
  std::uint8_t eph_pk[crypto_box_PUBLICKEYBYTES];
  std::uint8_t eph_sk[crypto_box_SECRETKEYBYTES];
  crypto_box_seed_keypair(eph_pk, eph_sk, eph_seed);

  SealedRecord rec;
  rec.scheme = SchemeId::kBoxEnvelope;
  rec.nonce.resize(nonce_bytes());
  std::memcpy(rec.nonce.data(), eph_pk, kEphemeralBytes);
  nonces.fill(std::span(rec.nonce).subspan(kEphemeralBytes));

  rec.ciphertext.resize(plaintext.size() + crypto_box_MACBYTES);
  const int rc = crypto_box_easy(rec.ciphertext.data(), plaintext.data(), plaintext.size(),
                                 rec.nonce.data() + kEphemeralBytes, public_key.data(), eph_sk);
  sodium_memzero(eph_sk, sizeof eph_sk);
  sodium_memzero(eph_seed, sizeof eph_seed);
  if (rc != 0) throw Error("crypto_box_easy failed");
  return rec;
}

Bytes BoxEnvelopeCipher::open(std::span<const std::uint8_t> private_key,
                              const SealedRecord& record) const {
  if (record.scheme != SchemeId::kBoxEnvelope) throw AuthenticationError("scheme mismatch");
  if (private_key.size() != crypto_box_SECRETKEYBYTES) throw InvalidArgument("bad private key length");
  if (record.nonce.size() != nonce_bytes() || record.ciphertext.size() <= crypto_box_MACBYTES) {
    throw FormatError(FormatErrc::kCorrupt, "sealed record has an invalid shape");
  }
  Bytes plain(record.ciphertext.size() - crypto_box_MACBYTES);
  if (crypto_box_open_easy(plain.data(), record.ciphertext.data(), record.ciphertext.size(),
                           record.nonce.data() + kEphemeralBytes, record.nonce.data(),
                           private_key.data()) != 0) {
    throw AuthenticationError("sealed record failed authentication");
  }
  return plain;
}

const ContentCipher& default_cipher() {
  static const BoxEnvelopeCipher cipher;
  return cipher;
}

const ContentCipher& cipher_for(SchemeId scheme) {
  if (scheme == SchemeId::kBoxEnvelope) return default_cipher();
  throw FormatError(FormatErrc::kCorrupt,
                    "unknown sealing scheme " + std::to_string(static_cast<int>(scheme)));
}

KeyPair keygen(std::uint64_t seed) { return default_cipher().keygen(seed); }

SealedRecord seal_record(std::span<const std::uint8_t> public_key,
                         std::span<const std::uint8_t> plaintext, NonceSource& nonces) {
  return default_cipher().seal(public_key, plaintext, nonces);
}

Bytes open_record(const KeyPair& keys, const SealedRecord& record) {
  return cipher_for(record.scheme).open(keys.private_key, record);
}

std::size_t sealed_wire_bytes(const SealedRecord& record) {
  return 4 + 1 + record.nonce.size() + record.ciphertext.size();
}

void write_sealed(const SealedRecord& record, ByteWriter& out) {
  out.u32(static_cast<std::uint32_t>(1 + record.nonce.size() + record.ciphertext.size()));
  out.u8(static_cast<std::uint8_t>(record.scheme));
  out.raw(record.nonce);
  out.raw(record.ciphertext);
}

Bytes serialize_sealed(const SealedRecord& record) {
  ByteWriter w;
  write_sealed(record, w);
  return w.take();
}

SealedRecord read_sealed(ByteReader& in) {
  const std::size_t length = in.u32();
  if (length > in.remaining()) {
    throw FormatError(FormatErrc::kTruncated, "sealed record length exceeds the stream");
  }
  if (length < 1) throw FormatError(FormatErrc::kCorrupt, "sealed record is empty");
  SealedRecord rec;
  rec.scheme = static_cast<SchemeId>(in.u8());
  const auto& cipher = cipher_for(rec.scheme);
  const std::size_t nonce_n = cipher.nonce_bytes();
  if (length < 1 + nonce_n + cipher.overhead_bytes() + 1) {
    throw FormatError(FormatErrc::kTruncated, "sealed record shorter than its scheme allows");
  }
  auto nonce = in.raw(nonce_n);
  auto ct = in.raw(length - 1 - nonce_n);
  rec.nonce.assign(nonce.begin(), nonce.end());
  rec.ciphertext.assign(ct.begin(), ct.end());
  return rec;
}

std::vector<SealedRecord> split_sealed_stream(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  std::vector<SealedRecord> out;
  while (!r.done()) out.push_back(read_sealed(r));
  return out;
}

}  // namespace fednn
