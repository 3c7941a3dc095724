#pragma once

// Decentralised identifiers, DID documents and the signed-and-encrypted
// message envelope. Wire formats are stable: an envelope is the compact UTF-8
// JSON of {"ct_b64","from","mid","sig_b64","thid","to"} (keys sorted), and the
// encrypted payload is the compact JSON of {"body","thid","type"}. Envelopes
// are encrypted to the recipient first, then signed over the whole envelope
// header (routing fields, correlation ids and ciphertext — everything except
// the signature itself), and are verified before any decryption is attempted,
// so a change to any single wire byte is caught.

#include <json.hpp>

#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <utility>

#include "crypto.hpp"

namespace fedtrust {

using nlohmann::json;

enum class DidMethod { peer, pub };

inline std::string_view to_string(DidMethod m) {
  return m == DidMethod::peer ? "peer" : "pub";
}

struct Did {
  DidMethod method = DidMethod::peer;
  std::string identifier;

  std::string str() const {
    return std::string("did:") + std::string(to_string(method)) + ":" + identifier;
  }

  static Did parse(std::string_view s) {
    if (s.rfind("did:peer:", 0) == 0 && s.size() > 9)
      return Did{DidMethod::peer, std::string(s.substr(9))};
    if (s.rfind("did:pub:", 0) == 0 && s.size() > 8)
      return Did{DidMethod::pub, std::string(s.substr(8))};
    throw EncodingError("not a DID: " + std::string(s));
  }

  auto operator<=>(const Did&) const = default;
};

// DID identifiers are self-certifying: base58 of the first 16 bytes of the
// SHA-256 of the verification key.
inline std::string key_identifier(const Bytes& public_key) {
  Hash32 h = crypto::digest(public_key);
  return base58_encode(h.data(), 16);
}

inline Did did_from_key(DidMethod method, const Bytes& public_key) {
  return Did{method, key_identifier(public_key)};
}

struct DidDocument {
  Did id;
  Bytes verification_key;
  std::string endpoint;

  // Invariant linking the document to its key.
  bool self_consistent() const {
    return verification_key.size() == crypto::kPublicKeyBytes &&
           key_identifier(verification_key) == id.identifier;
  }

  json to_json() const {
    return json{{"id", id.str()},
                {"key_b64", base64_encode(verification_key)},
                {"endpoint", endpoint}};
  }

  static DidDocument from_json(const json& j) {
    if (!j.is_object() || !j.contains("id") || !j.contains("key_b64") ||
        !j.contains("endpoint") || !j.at("id").is_string() ||
        !j.at("key_b64").is_string() || !j.at("endpoint").is_string())
      throw EncodingError("malformed DID document");
    return DidDocument{Did::parse(j.at("id").get<std::string>()),
                       base64_decode(j.at("key_b64").get<std::string>()),
                       j.at("endpoint").get<std::string>()};
  }

  bool operator==(const DidDocument&) const = default;
};

inline std::pair<Did, DidDocument> create_peer_did(const crypto::KeyPair& keys,
                                                   std::string endpoint) {
  if (endpoint.empty()) throw ConfigError("DID document endpoint must be non-empty");
  Did did = did_from_key(DidMethod::peer, keys.public_key);
  return {did, DidDocument{did, keys.public_key, std::move(endpoint)}};
}

inline std::pair<Did, DidDocument> create_public_did(const crypto::KeyPair& keys,
                                                     std::string endpoint) {
  if (endpoint.empty()) throw ConfigError("DID document endpoint must be non-empty");
  Did did = did_from_key(DidMethod::pub, keys.public_key);
  return {did, DidDocument{did, keys.public_key, std::move(endpoint)}};
}

// ---------------------------------------------------------------------------
// Messages
// ---------------------------------------------------------------------------

enum class MessageType {
  did_exchange_request,
  did_exchange_response,
  credential_offer,
  credential_request,
  credential_issue,
  proof_request,
  proof_presentation,
  train_request,
  train_result,
  ack,
  problem_report,
};

inline std::string_view to_string(MessageType t) {
  switch (t) {
    case MessageType::did_exchange_request: return "did_exchange_request";
    case MessageType::did_exchange_response: return "did_exchange_response";
    case MessageType::credential_offer: return "credential_offer";
    case MessageType::credential_request: return "credential_request";
    case MessageType::credential_issue: return "credential_issue";
    case MessageType::proof_request: return "proof_request";
    case MessageType::proof_presentation: return "proof_presentation";
    case MessageType::train_request: return "train_request";
    case MessageType::train_result: return "train_result";
    case MessageType::ack: return "ack";
    case MessageType::problem_report: return "problem_report";
  }
  return "unknown";
}

inline MessageType message_type_from_string(std::string_view s) {
  static const std::map<std::string_view, MessageType> table = {
      {"did_exchange_request", MessageType::did_exchange_request},
      {"did_exchange_response", MessageType::did_exchange_response},
      {"credential_offer", MessageType::credential_offer},
      {"credential_request", MessageType::credential_request},
      {"credential_issue", MessageType::credential_issue},
      {"proof_request", MessageType::proof_request},
      {"proof_presentation", MessageType::proof_presentation},
      {"train_request", MessageType::train_request},
      {"train_result", MessageType::train_result},
      {"ack", MessageType::ack},
      {"problem_report", MessageType::problem_report},
  };
  auto it = table.find(s);
  if (it == table.end())
    throw UnsupportedTypeError("unsupported message type: " + std::string(s));
  return it->second;
}

// problem_report codes.
inline constexpr const char* kProblemUntrustedConnection = "untrusted_connection";
inline constexpr const char* kProblemProofRejected = "proof_rejected";
inline constexpr const char* kProblemUnsupportedType = "unsupported_type";
inline constexpr const char* kProblemInternal = "internal";

struct Message {
  MessageType type = MessageType::ack;
  json body = json::object();
  std::optional<std::string> thread_id;
};

// The exact byte string that gets encrypted and, transitively, signed.
inline std::string canonical_message_bytes(const Message& m) {
  json j;
  j["type"] = std::string(to_string(m.type));
  j["thid"] = m.thread_id ? json(*m.thread_id) : json(nullptr);
  j["body"] = m.body;
  try {
    return j.dump();
  } catch (const json::exception& e) {
    throw EncodingError(std::string("message body not serialisable: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Envelopes
// ---------------------------------------------------------------------------

struct Envelope {
  Did to;
  Did from;
  Bytes ciphertext;
  Bytes signature;
  std::string message_id;
  std::optional<std::string> thread_id;

  // What the sender signs: the wire form without the signature field. Binding
  // the routing fields and correlation ids (not just the ciphertext) means no
  // single-byte change to an envelope can survive verification.
  std::string signing_bytes() const {
    json j;
    j["to"] = to.str();
    j["from"] = from.str();
    j["mid"] = message_id;
    j["thid"] = thread_id ? json(*thread_id) : json(nullptr);
    j["ct_b64"] = base64_encode(ciphertext);
    return j.dump();
  }

  std::string wire() const {
    json j;
    j["to"] = to.str();
    j["from"] = from.str();
    j["mid"] = message_id;
    j["thid"] = thread_id ? json(*thread_id) : json(nullptr);
    j["ct_b64"] = base64_encode(ciphertext);
    j["sig_b64"] = base64_encode(signature);
    return j.dump();
  }

  static Envelope from_wire(std::string_view bytes) {
    json j;
    try {
      j = json::parse(bytes);
    } catch (const json::exception& e) {
      throw EncodingError(std::string("envelope is not valid JSON: ") + e.what());
    }
    static constexpr const char* keys[] = {"ct_b64", "from", "mid", "sig_b64", "thid", "to"};
    if (!j.is_object() || j.size() != 6)
      throw EncodingError("envelope must carry exactly its six fields");
    for (const char* k : keys)
      if (!j.contains(k)) throw EncodingError(std::string("envelope missing field ") + k);
    if (!j["to"].is_string() || !j["from"].is_string() || !j["mid"].is_string() ||
        !j["ct_b64"].is_string() || !j["sig_b64"].is_string() ||
        !(j["thid"].is_string() || j["thid"].is_null()))
      throw EncodingError("envelope field has wrong type");
    Envelope env;
    env.to = Did::parse(j["to"].get<std::string>());
    env.from = Did::parse(j["from"].get<std::string>());
    env.message_id = j["mid"].get<std::string>();
    if (j["thid"].is_string()) env.thread_id = j["thid"].get<std::string>();
    env.ciphertext = base64_decode(j["ct_b64"].get<std::string>());
    env.signature = base64_decode(j["sig_b64"].get<std::string>());
    return env;
  }
};

// Encrypt-then-sign: the detached signature covers the envelope's signing
// bytes (routing fields, ids and ciphertext), so any tampering is rejected
// without touching the plaintext.
inline Envelope pack(const Message& m, const crypto::KeyPair& sender_keys,
                     const Did& sender_did, const DidDocument& recipient,
                     std::string message_id, DetRng& rng) {
  if (!recipient.self_consistent())
    throw CorruptDocumentError("recipient document key does not match its DID");
  const std::string canonical = canonical_message_bytes(m);
  Envelope env;
  env.to = recipient.id;
  env.from = sender_did;
  env.ciphertext = crypto::seal(recipient.verification_key, to_bytes(canonical), rng);
  env.message_id = std::move(message_id);
  env.thread_id = m.thread_id;
  env.signature = crypto::sign(sender_keys.secret_key, env.signing_bytes());
  return env;
}

inline Message decode_message(const Bytes& plaintext) {
  json j;
  try {
    j = json::parse(plaintext.begin(), plaintext.end());
  } catch (const json::exception& e) {
    throw EncodingError(std::string("payload is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("type") || !j.contains("thid") || !j.contains("body") ||
      !j["type"].is_string() || !(j["thid"].is_string() || j["thid"].is_null()))
    throw EncodingError("payload missing type/thid/body");
  Message m;
  m.type = message_type_from_string(j["type"].get<std::string>());
  if (j["thid"].is_string()) m.thread_id = j["thid"].get<std::string>();
  m.body = j["body"];
  return m;
}

// Signature verification strictly precedes decryption. Failures are typed:
// a bad signature (or sender mismatch) is an IntegrityError, an undecryptable
// payload a ConfidentialityError.
inline Message unpack(const Envelope& env, const crypto::KeyPair& recipient_keys,
                      const DidDocument& sender_doc) {
  if (!sender_doc.self_consistent())
    throw CorruptDocumentError("sender document key does not match its DID");
  if (env.from != sender_doc.id)
    throw IntegrityError("envelope sender does not match supplied document");
  if (!crypto::verify(sender_doc.verification_key, env.signing_bytes(), env.signature))
    throw IntegrityError("envelope signature failed to verify");
  Bytes plaintext;
  try {
    plaintext = crypto::open(recipient_keys.secret_key, env.ciphertext);
  } catch (const DecryptionFailureError& e) {
    throw ConfidentialityError(e.what());
  }
  return decode_message(plaintext);
}

// First-contact path: a connection request carries the sender's fresh document
// inside the encrypted payload, so there is nothing to verify against until
// after decryption. The embedded document must be self-certifying and match
// the envelope sender, and the envelope signature is still checked before the
// message is accepted. Only did_exchange_request may take this path.
inline std::pair<Message, DidDocument> unpack_first_contact(
    const Envelope& env, const crypto::KeyPair& recipient_keys) {
  Bytes plaintext;
  try {
    plaintext = crypto::open(recipient_keys.secret_key, env.ciphertext);
  } catch (const DecryptionFailureError& e) {
    throw ConfidentialityError(e.what());
  }
  Message m = decode_message(plaintext);
  if (m.type != MessageType::did_exchange_request)
    throw IntegrityError("unknown sender for a non-bootstrap message");
  if (!m.body.is_object() || !m.body.contains("doc"))
    throw EncodingError("connection request carries no document");
  DidDocument doc = DidDocument::from_json(m.body.at("doc"));
  if (!doc.self_consistent())
    throw CorruptDocumentError("embedded document key does not match its DID");
  if (doc.id != env.from)
    throw IntegrityError("embedded document does not match envelope sender");
  if (!crypto::verify(doc.verification_key, env.signing_bytes(), env.signature))
    throw IntegrityError("envelope signature failed to verify");
  return {std::move(m), std::move(doc)};
}

// Thread-safe store of peer DID documents learned through connections.
class PeerStore {
 public:
  void put(const DidDocument& doc) {
    std::unique_lock lk(mx_);
    docs_[doc.id.str()] = doc;
  }

  std::optional<DidDocument> get(const Did& did) const {
    std::shared_lock lk(mx_);
    auto it = docs_.find(did.str());
    if (it == docs_.end()) return std::nullopt;
    return it->second;
  }

 private:
  mutable std::shared_mutex mx_;
  std::map<std::string, DidDocument> docs_;
};

// Resolution: peer DIDs from a local peer store, public DIDs from a registry
// (any type exposing resolve_did). The returned document must uphold the
// key<->identifier invariant.
template <class RegistryT>
DidDocument resolve(const Did& did, const PeerStore& peers, const RegistryT& registry) {
  std::optional<DidDocument> doc = did.method == DidMethod::peer
                                       ? peers.get(did)
                                       : registry.resolve_did(did);
  if (!doc) throw NotFoundError("cannot resolve " + did.str());
  if (doc->id != did || !doc->self_consistent())
    throw CorruptDocumentError("resolved document violates the key binding for " + did.str());
  return *doc;
}

}  // namespace fedtrust
