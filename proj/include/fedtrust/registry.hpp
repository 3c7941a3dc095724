#pragma once

// In-process verifiable data registry: public issuer DID documents, credential
// schemas, issuance grants (who may issue which schema) and revoked credential
// hashes. Append-only — nothing is ever removed or rewritten. Thread-safe for
// concurrent readers and writers.

#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "identity.hpp"

namespace fedtrust {

struct CredentialSchema {
  std::string name;
  std::string version;
  std::vector<std::string> attribute_names;  // unique, sorted ascending

  std::string schema_id() const { return name + ":" + version; }

  void validate() const {
    if (name.empty() || version.empty())
      throw ConfigError("schema name and version must be non-empty");
    if (attribute_names.empty())
      throw ConfigError("schema must declare at least one attribute");
    for (std::size_t i = 0; i < attribute_names.size(); ++i) {
      if (attribute_names[i].empty())
        throw ConfigError("schema attribute names must be non-empty");
      if (i > 0 && !(attribute_names[i - 1] < attribute_names[i]))
        throw ConfigError("schema attribute names must be unique and sorted ascending");
    }
  }

  json to_json() const {
    return json{{"name", name}, {"version", version}, {"attributes", attribute_names}};
  }

  static CredentialSchema from_json(const json& j) {
    if (!j.is_object() || !j.contains("name") || !j.contains("version") ||
        !j.contains("attributes") || !j.at("attributes").is_array())
      throw EncodingError("malformed schema");
    CredentialSchema s;
    s.name = j.at("name").get<std::string>();
    s.version = j.at("version").get<std::string>();
    for (const auto& a : j.at("attributes")) s.attribute_names.push_back(a.get<std::string>());
    return s;
  }

  bool operator==(const CredentialSchema&) const = default;
};

class Registry {
 public:
  Registry() = default;
  // Movable for construction-time handoff only (no concurrent users yet).
  Registry(Registry&& other) noexcept
      : dids_(std::move(other.dids_)),
        schemas_(std::move(other.schemas_)),
        grants_(std::move(other.grants_)),
        revoked_(std::move(other.revoked_)) {}

  // Registers a public issuer document. Idempotent for an identical document;
  // re-registering the same DID with different contents is a conflict.
  void register_issuer(const DidDocument& doc) {
    if (doc.id.method != DidMethod::pub)
      throw ConfigError("only public DIDs can be registered as issuers");
    if (!doc.self_consistent())
      throw CorruptDocumentError("issuer document key does not match its DID");
    std::unique_lock lk(mx_);
    auto it = dids_.find(doc.id.str());
    if (it != dids_.end()) {
      if (it->second == doc) return;  // idempotent
      throw ConflictError("issuer " + doc.id.str() + " already registered differently");
    }
    dids_.emplace(doc.id.str(), doc);
  }

  std::optional<DidDocument> resolve_did(const Did& did) const {
    std::shared_lock lk(mx_);
    auto it = dids_.find(did.str());
    if (it == dids_.end()) return std::nullopt;
    return it->second;
  }

  std::string register_schema(const CredentialSchema& schema) {
    schema.validate();
    std::unique_lock lk(mx_);
    const std::string id = schema.schema_id();
    auto it = schemas_.find(id);
    if (it != schemas_.end()) {
      if (it->second == schema) return id;  // idempotent
      throw ConflictError("schema " + id + " already registered differently");
    }
    schemas_.emplace(id, schema);
    return id;
  }

  std::optional<CredentialSchema> schema(const std::string& schema_id) const {
    std::shared_lock lk(mx_);
    auto it = schemas_.find(schema_id);
    if (it == schemas_.end()) return std::nullopt;
    return it->second;
  }

  // Grants require both sides to exist already, so every grant always points
  // at a registered schema and a registered issuer document.
  void authorize(const std::string& schema_id, const Did& issuer) {
    std::unique_lock lk(mx_);
    if (!schemas_.contains(schema_id))
      throw NotFoundError("cannot authorize issuer for unknown schema " + schema_id);
    if (!dids_.contains(issuer.str()))
      throw NotFoundError("cannot authorize unregistered issuer " + issuer.str());
    grants_[schema_id].insert(issuer.str());
  }

  bool is_authorized(const std::string& schema_id, const Did& issuer) const {
    std::shared_lock lk(mx_);
    auto it = grants_.find(schema_id);
    return it != grants_.end() && it->second.contains(issuer.str());
  }

  void revoke(const Hash32& credential_hash) {
    std::unique_lock lk(mx_);
    revoked_.insert(to_hex(credential_hash));
  }

  bool is_revoked(const Hash32& credential_hash) const {
    std::shared_lock lk(mx_);
    return revoked_.contains(to_hex(credential_hash));
  }

  json snapshot() const {
    std::shared_lock lk(mx_);
    json dids = json::array();
    for (const auto& [_, doc] : dids_) dids.push_back(doc.to_json());
    json schemas = json::array();
    for (const auto& [_, s] : schemas_) schemas.push_back(s.to_json());
    json grants = json::object();
    for (const auto& [sid, issuers] : grants_)
      grants[sid] = std::vector<std::string>(issuers.begin(), issuers.end());
    json revoked = json::array();
    for (const auto& h : revoked_) revoked.push_back(h);
    return json{{"dids", dids}, {"schemas", schemas}, {"grants", grants}, {"revoked", revoked}};
  }

  // Rebuilds a registry from a snapshot, re-checking every invariant the
  // normal write path enforces.
  static Registry from_snapshot(const json& j) {
    if (!j.is_object() || !j.contains("dids") || !j.contains("schemas") ||
        !j.contains("grants") || !j.contains("revoked"))
      throw EncodingError("malformed registry snapshot");
    Registry r;
    for (const auto& d : j.at("dids")) r.register_issuer(DidDocument::from_json(d));
    for (const auto& s : j.at("schemas")) r.register_schema(CredentialSchema::from_json(s));
    for (const auto& [sid, issuers] : j.at("grants").items())
      for (const auto& i : issuers)
        r.authorize(sid, Did::parse(i.get<std::string>()));
    for (const auto& h : j.at("revoked")) {
      Bytes raw = from_hex(h.get<std::string>());
      if (raw.size() != 32) throw EncodingError("revoked entry is not a 32-byte hash");
      Hash32 hash;
      std::copy(raw.begin(), raw.end(), hash.begin());
      r.revoke(hash);
    }
    return r;
  }

 private:
  mutable std::shared_mutex mx_;
  std::map<std::string, DidDocument> dids_;
  std::map<std::string, CredentialSchema> schemas_;
  std::map<std::string, std::set<std::string>> grants_;
  std::set<std::string> revoked_;  // lowercase hex of credential hashes
};

}  // namespace fedtrust
