#pragma once

// Cryptographic primitives behind the protocol: Ed25519 signatures, sealed
// boxes to a recipient key (Curve25519 + XSalsa20-Poly1305), SHA-256 digests,
// and Pedersen commitments with Schnorr-style opening proofs on ristretto255.
// All randomness is injected via DetRng so flows replay deterministically;
// seal() reproduces libsodium's sealed-box bytes exactly (interoperability is
// pinned by tests against crypto_box_seal/seal_open).

#include <sodium.h>

#include <array>
#include <cstring>
#include <string>
#include <string_view>

#include "bytes.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace fedtrust::crypto {

constexpr std::size_t kSeedBytes = 32;
constexpr std::size_t kPublicKeyBytes = crypto_sign_PUBLICKEYBYTES;  // 32
constexpr std::size_t kSecretKeyBytes = crypto_sign_SECRETKEYBYTES;  // 64
constexpr std::size_t kSignatureBytes = crypto_sign_BYTES;           // 64
// Sealed-box expansion: 32-byte ephemeral public key + 16-byte MAC.
constexpr std::size_t kSealOverheadBytes = crypto_box_SEALBYTES;     // 48

struct KeyPair {
  Bytes secret_key;  // 64 bytes (seed || public key)
  Bytes public_key;  // 32 bytes
};

inline KeyPair generate_keypair(const Bytes& seed) {
  detail::ensure_sodium();
  if (seed.size() != kSeedBytes)
    throw InvalidSeedError("key seed must be exactly 32 bytes");
  KeyPair kp;
  kp.secret_key.resize(kSecretKeyBytes);
  kp.public_key.resize(kPublicKeyBytes);
  crypto_sign_seed_keypair(kp.public_key.data(), kp.secret_key.data(), seed.data());
  return kp;
}

inline Bytes sign(const Bytes& secret_key, const unsigned char* msg, std::size_t len) {
  detail::ensure_sodium();
  if (secret_key.size() != kSecretKeyBytes)
    throw InvalidSeedError("signing key must be 64 bytes");
  Bytes sig(kSignatureBytes);
  crypto_sign_detached(sig.data(), nullptr, msg, len, secret_key.data());
  return sig;
}

inline Bytes sign(const Bytes& secret_key, const Bytes& message) {
  return sign(secret_key, message.data(), message.size());
}

inline Bytes sign(const Bytes& secret_key, std::string_view message) {
  return sign(secret_key, reinterpret_cast<const unsigned char*>(message.data()),
              message.size());
}

inline bool verify(const Bytes& public_key, const unsigned char* msg, std::size_t len,
                   const Bytes& signature) {
  detail::ensure_sodium();
  if (public_key.size() != kPublicKeyBytes || signature.size() != kSignatureBytes)
    return false;
  return crypto_sign_verify_detached(signature.data(), msg, len, public_key.data()) == 0;
}

inline bool verify(const Bytes& public_key, const Bytes& message, const Bytes& signature) {
  return verify(public_key, message.data(), message.size(), signature);
}

inline bool verify(const Bytes& public_key, std::string_view message, const Bytes& signature) {
  return verify(public_key, reinterpret_cast<const unsigned char*>(message.data()),
                message.size(), signature);
}

// Encrypt to the holder of an Ed25519 key. Wire layout is the standard sealed
// box — ephemeral_pk || box(m) with nonce = BLAKE2b(ephemeral_pk || recipient_pk)
// — except the ephemeral key comes from the injected RNG.
inline Bytes seal(const Bytes& recipient_public_key, const Bytes& plaintext, DetRng& rng) {
  detail::ensure_sodium();
  if (recipient_public_key.size() != kPublicKeyBytes)
    throw InvalidSeedError("recipient public key must be 32 bytes");
  unsigned char xpk[crypto_box_PUBLICKEYBYTES];
  if (crypto_sign_ed25519_pk_to_curve25519(xpk, recipient_public_key.data()) != 0)
    throw InvalidSeedError("recipient public key is not convertible");

  Bytes eseed = rng.bytes(crypto_box_SEEDBYTES);
  unsigned char epk[crypto_box_PUBLICKEYBYTES], esk[crypto_box_SECRETKEYBYTES];
  crypto_box_seed_keypair(epk, esk, eseed.data());

  unsigned char nonce[crypto_box_NONCEBYTES];
  crypto_generichash_state st;
  crypto_generichash_init(&st, nullptr, 0, sizeof nonce);
  crypto_generichash_update(&st, epk, sizeof epk);
  crypto_generichash_update(&st, xpk, sizeof xpk);
  crypto_generichash_final(&st, nonce, sizeof nonce);

  Bytes out(kSealOverheadBytes + plaintext.size());
  std::memcpy(out.data(), epk, sizeof epk);
  if (crypto_box_easy(out.data() + sizeof epk, plaintext.data(), plaintext.size(),
                      nonce, xpk, esk) != 0)
    throw Error("sealing failed");
  sodium_memzero(esk, sizeof esk);
  return out;
}

inline Bytes open(const Bytes& recipient_secret_key, const Bytes& ciphertext) {
  detail::ensure_sodium();
  if (recipient_secret_key.size() != kSecretKeyBytes)
    throw InvalidSeedError("recipient secret key must be 64 bytes");
  if (ciphertext.size() < kSealOverheadBytes)
    throw DecryptionFailureError("ciphertext shorter than sealed-box overhead");
  unsigned char xsk[crypto_box_SECRETKEYBYTES];
  unsigned char edpk[crypto_sign_PUBLICKEYBYTES];
  unsigned char xpk[crypto_box_PUBLICKEYBYTES];
  if (crypto_sign_ed25519_sk_to_curve25519(xsk, recipient_secret_key.data()) != 0 ||
      crypto_sign_ed25519_sk_to_pk(edpk, recipient_secret_key.data()) != 0 ||
      crypto_sign_ed25519_pk_to_curve25519(xpk, edpk) != 0)
    throw DecryptionFailureError("recipient key is not convertible");
  Bytes out(ciphertext.size() - kSealOverheadBytes);
  if (crypto_box_seal_open(out.data(), ciphertext.data(), ciphertext.size(), xpk, xsk) != 0) {
    sodium_memzero(xsk, sizeof xsk);
    throw DecryptionFailureError("sealed box failed to open");
  }
  sodium_memzero(xsk, sizeof xsk);
  return out;
}

inline Hash32 digest(const unsigned char* data, std::size_t len) {
  detail::ensure_sodium();
  Hash32 out;
  crypto_hash_sha256(out.data(), data, len);
  return out;
}

inline Hash32 digest(const Bytes& b) { return digest(b.data(), b.size()); }
inline Hash32 digest(std::string_view s) {
  return digest(reinterpret_cast<const unsigned char*>(s.data()), s.size());
}

// ---------------------------------------------------------------------------
// Pedersen commitments on ristretto255: C = g^secret * h^blinding, where h is
// derived from g by hash-to-group so nobody knows log_g(h) (no trusted setup).
// ---------------------------------------------------------------------------

using Scalar = std::array<unsigned char, 32>;        // little-endian, reduced mod L
using GroupElement = std::array<unsigned char, 32>;  // canonical ristretto encoding

inline bool scalar_is_zero(const Scalar& s) {
  unsigned char acc = 0;
  for (unsigned char b : s) acc |= b;
  return acc == 0;
}

inline Scalar random_scalar(DetRng& rng) {
  detail::ensure_sodium();
  Bytes wide = rng.bytes(crypto_core_ristretto255_NONREDUCEDSCALARBYTES);
  Scalar out;
  crypto_core_ristretto255_scalar_reduce(out.data(), wide.data());
  return out;
}

inline Scalar scalar_from_hash(const Hash32& h) {
  detail::ensure_sodium();
  unsigned char wide[crypto_core_ristretto255_NONREDUCEDSCALARBYTES] = {0};
  std::memcpy(wide, h.data(), h.size());
  Scalar out;
  crypto_core_ristretto255_scalar_reduce(out.data(), wide);
  return out;
}

inline Scalar scalar_add(const Scalar& a, const Scalar& b) {
  Scalar out;
  crypto_core_ristretto255_scalar_add(out.data(), a.data(), b.data());
  return out;
}

inline Scalar scalar_mul(const Scalar& a, const Scalar& b) {
  Scalar out;
  crypto_core_ristretto255_scalar_mul(out.data(), a.data(), b.data());
  return out;
}

inline GroupElement group_identity() { return GroupElement{}; }

inline bool is_identity(const GroupElement& p) {
  unsigned char acc = 0;
  for (unsigned char b : p) acc |= b;
  return acc == 0;
}

inline GroupElement group_base() {
  detail::ensure_sodium();
  Scalar one{};
  one[0] = 1;
  GroupElement g;
  crypto_scalarmult_ristretto255_base(g.data(), one.data());
  return g;
}

// Second generator, derived by hashing a domain tag plus g to the group.
inline const GroupElement& pedersen_h() {
  static const GroupElement h = [] {
    detail::ensure_sodium();
    static constexpr char tag[] = "fedtrust/pedersen-h/v1";
    GroupElement g = group_base();
    unsigned char wide[crypto_core_ristretto255_HASHBYTES];
    crypto_hash_sha512_state st;
    crypto_hash_sha512_init(&st);
    crypto_hash_sha512_update(&st, reinterpret_cast<const unsigned char*>(tag), sizeof tag - 1);
    crypto_hash_sha512_update(&st, g.data(), g.size());
    unsigned char full[crypto_hash_sha512_BYTES];
    crypto_hash_sha512_final(&st, full);
    std::memcpy(wide, full, sizeof wide);
    GroupElement h_out;
    crypto_core_ristretto255_from_hash(h_out.data(), wide);
    return h_out;
  }();
  return h;
}

// Scalar multiplications below special-case zero inputs: libsodium refuses to
// return the identity from scalarmult, but the identity is a legal commitment
// value here (e.g. commit(0, 0)).
inline bool group_mul_base(GroupElement& out, const Scalar& s) {
  detail::ensure_sodium();
  if (scalar_is_zero(s)) {
    out = group_identity();
    return true;
  }
  return crypto_scalarmult_ristretto255_base(out.data(), s.data()) == 0;
}

inline bool group_mul(GroupElement& out, const Scalar& s, const GroupElement& p) {
  detail::ensure_sodium();
  if (crypto_core_ristretto255_is_valid_point(p.data()) != 1 && !is_identity(p)) return false;
  if (scalar_is_zero(s) || is_identity(p)) {
    out = group_identity();
    return true;
  }
  return crypto_scalarmult_ristretto255(out.data(), s.data(), p.data()) == 0;
}

inline bool group_add(GroupElement& out, const GroupElement& a, const GroupElement& b) {
  detail::ensure_sodium();
  return crypto_core_ristretto255_add(out.data(), a.data(), b.data()) == 0;
}

inline bool group_sub(GroupElement& out, const GroupElement& a, const GroupElement& b) {
  detail::ensure_sodium();
  return crypto_core_ristretto255_sub(out.data(), a.data(), b.data()) == 0;
}

struct Commitment {
  GroupElement value{};
  std::string context;  // binds the commitment to a schema / usage domain

  bool operator==(const Commitment&) const = default;
};

// pre: secret and blinding already reduced mod the group order.
inline Commitment commit(const Scalar& secret, const Scalar& blinding, std::string context) {
  GroupElement gs, hb, sum;
  if (!group_mul_base(gs, secret) || !group_mul(hb, blinding, pedersen_h()) ||
      !group_add(sum, gs, hb))
    throw Error("commitment arithmetic failed");
  return Commitment{sum, std::move(context)};
}

struct OpeningProof {
  Commitment commitment;
  Scalar challenge{};
  Scalar response_secret{};
  Scalar response_blinding{};
  Bytes bound_nonce;
};

// challenge = digest(commitment || announcement || bound_nonce || context),
// reduced to a scalar. Rebinding any component changes the challenge.
inline Scalar opening_challenge(const Commitment& c, const GroupElement& announcement,
                                const Bytes& bound_nonce) {
  detail::ensure_sodium();
  crypto_hash_sha256_state st;
  crypto_hash_sha256_init(&st);
  crypto_hash_sha256_update(&st, c.value.data(), c.value.size());
  crypto_hash_sha256_update(&st, announcement.data(), announcement.size());
  crypto_hash_sha256_update(&st, bound_nonce.data(), bound_nonce.size());
  crypto_hash_sha256_update(&st, reinterpret_cast<const unsigned char*>(c.context.data()),
                            c.context.size());
  Hash32 h;
  crypto_hash_sha256_final(&st, h.data());
  return scalar_from_hash(h);
}

inline OpeningProof prove_opening(const Scalar& secret, const Scalar& blinding,
                                  const Commitment& commitment, const Bytes& bound_nonce,
                                  DetRng& rng) {
  const Scalar a1 = random_scalar(rng);
  const Scalar a2 = random_scalar(rng);
  GroupElement t1, t2, announcement;
  if (!group_mul_base(t1, a1) || !group_mul(t2, a2, pedersen_h()) ||
      !group_add(announcement, t1, t2))
    throw Error("proof arithmetic failed");
  const Scalar c = opening_challenge(commitment, announcement, bound_nonce);
  OpeningProof proof;
  proof.commitment = commitment;
  proof.challenge = c;
  proof.response_secret = scalar_add(a1, scalar_mul(c, secret));
  proof.response_blinding = scalar_add(a2, scalar_mul(c, blinding));
  proof.bound_nonce = bound_nonce;
  return proof;
}

// Recomputes the announcement as g^z1 * h^z2 - C^c and checks the challenge
// re-derives. Anything structurally off (wrong nonce, mismatched commitment,
// non-group bytes) verifies false rather than throwing.
inline bool verify_opening(const Commitment& commitment, const OpeningProof& proof,
                           const Bytes& bound_nonce) {
  if (proof.bound_nonce != bound_nonce) return false;
  if (!(proof.commitment == commitment)) return false;
  if (!is_identity(commitment.value) &&
      crypto_core_ristretto255_is_valid_point(commitment.value.data()) != 1)
    return false;
  GroupElement gz, hz, lhs, cc, announcement;
  if (!group_mul_base(gz, proof.response_secret) ||
      !group_mul(hz, proof.response_blinding, pedersen_h()) ||
      !group_add(lhs, gz, hz) ||
      !group_mul(cc, proof.challenge, commitment.value) ||
      !group_sub(announcement, lhs, cc))
    return false;
  return opening_challenge(commitment, announcement, bound_nonce) == proof.challenge;
}

}  // namespace fedtrust::crypto
