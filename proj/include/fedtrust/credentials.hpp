#pragma once

// Verifiable credentials. A credential binds schema attributes to a holder
// through a Pedersen commitment to the holder's long-lived link secret; the
// issuer signs the canonical encoding. A presentation re-proves knowledge of
// the commitment opening against the verifier's fresh nonce, and verification
// runs five independent checks, always evaluating all of them.

#include <algorithm>
#include <array>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "registry.hpp"

namespace fedtrust {

struct LinkSecret {
  crypto::Scalar secret{};

  static LinkSecret generate(DetRng& rng) { return LinkSecret{crypto::random_scalar(rng)}; }
};

inline json commitment_to_json(const crypto::Commitment& c) {
  return json{{"value_b64", base64_encode(c.value.data(), c.value.size())},
              {"context", c.context}};
}

inline crypto::Commitment commitment_from_json(const json& j) {
  if (!j.is_object() || !j.contains("value_b64") || !j.contains("context"))
    throw EncodingError("malformed commitment");
  Bytes raw = base64_decode(j.at("value_b64").get<std::string>());
  if (raw.size() != 32) throw EncodingError("commitment value must be 32 bytes");
  crypto::Commitment c;
  std::copy(raw.begin(), raw.end(), c.value.begin());
  c.context = j.at("context").get<std::string>();
  return c;
}

struct Credential {
  std::string schema_id;
  Did issuer_did;
  std::vector<std::pair<std::string, std::string>> attributes;  // sorted by name
  crypto::Commitment link_commitment;
  Bytes issuer_signature;
  Hash32 credential_hash{};

  json to_json() const {
    json attrs = json::object();
    for (const auto& [k, v] : attributes) attrs[k] = v;
    return json{{"schema_id", schema_id},
                {"issuer", issuer_did.str()},
                {"attributes", attrs},
                {"link", commitment_to_json(link_commitment)},
                {"sig_b64", base64_encode(issuer_signature)},
                {"hash_hex", to_hex(credential_hash)}};
  }

  static Credential from_json(const json& j) {
    if (!j.is_object() || !j.contains("schema_id") || !j.contains("issuer") ||
        !j.contains("attributes") || !j.contains("link") || !j.contains("sig_b64") ||
        !j.contains("hash_hex") || !j.at("attributes").is_object())
      throw EncodingError("malformed credential");
    Credential c;
    c.schema_id = j.at("schema_id").get<std::string>();
    c.issuer_did = Did::parse(j.at("issuer").get<std::string>());
    for (const auto& [k, v] : j.at("attributes").items())
      c.attributes.emplace_back(k, v.get<std::string>());
    std::sort(c.attributes.begin(), c.attributes.end());
    c.link_commitment = commitment_from_json(j.at("link"));
    c.issuer_signature = base64_decode(j.at("sig_b64").get<std::string>());
    Bytes raw = from_hex(j.at("hash_hex").get<std::string>());
    if (raw.size() != 32) throw EncodingError("credential hash must be 32 bytes");
    std::copy(raw.begin(), raw.end(), c.credential_hash.begin());
    return c;
  }

  bool operator==(const Credential&) const = default;
};

// Canonical byte encoding, stable across processes: one "name=value" line per
// attribute sorted by name, then schema, issuer and the base64 commitment
// value, joined with '\n' and no trailing newline. Signatures and the
// credential hash are computed over exactly these bytes.
inline std::string canonical_credential_encoding(
    const std::string& schema_id, const Did& issuer,
    const std::vector<std::pair<std::string, std::string>>& attributes,
    const crypto::Commitment& commitment) {
  std::vector<std::pair<std::string, std::string>> sorted_attributes = attributes;
  std::sort(sorted_attributes.begin(), sorted_attributes.end());
  std::string out;
  for (const auto& [name, value] : sorted_attributes) {
    out += name;
    out += '=';
    out += value;
    out += '\n';
  }
  out += "schema=" + schema_id + "\n";
  out += "issuer=" + issuer.str() + "\n";
  out += "link=" + base64_encode(commitment.value.data(), commitment.value.size());
  return out;
}

struct CredentialRequest {
  std::string schema_id;
  crypto::Commitment commitment;

  json to_json() const {
    return json{{"schema_id", schema_id}, {"commitment", commitment_to_json(commitment)}};
  }

  static CredentialRequest from_json(const json& j) {
    if (!j.is_object() || !j.contains("schema_id") || !j.contains("commitment"))
      throw EncodingError("malformed credential request");
    return CredentialRequest{j.at("schema_id").get<std::string>(),
                             commitment_from_json(j.at("commitment"))};
  }
};

// The holder's side of a request: the commitment goes to the issuer, the
// blinding factor never leaves the wallet.
inline std::pair<CredentialRequest, crypto::Scalar> request_credential(
    const LinkSecret& link, const CredentialSchema& schema, DetRng& rng) {
  crypto::Scalar blinding = crypto::random_scalar(rng);
  crypto::Commitment commitment = crypto::commit(link.secret, blinding, schema.schema_id());
  return {CredentialRequest{schema.schema_id(), commitment}, blinding};
}

inline Credential issue(const crypto::KeyPair& issuer_keys, const Did& issuer_did,
                        const CredentialSchema& schema,
                        const std::map<std::string, std::string>& attribute_values,
                        const crypto::Commitment& link_commitment) {
  // The attribute set must cover the schema exactly.
  std::vector<std::string> given;
  for (const auto& [k, _] : attribute_values) given.push_back(k);
  if (given != schema.attribute_names) {
    std::string detail = "attributes do not match schema " + schema.schema_id() + "; expected [";
    for (const auto& a : schema.attribute_names) detail += a + " ";
    detail += "] got [";
    for (const auto& a : given) detail += a + " ";
    detail += "]";
    throw SchemaViolationError(detail);
  }
  Credential c;
  c.schema_id = schema.schema_id();
  c.issuer_did = issuer_did;
  c.attributes.assign(attribute_values.begin(), attribute_values.end());
  c.link_commitment = link_commitment;
  const std::string canonical = canonical_credential_encoding(
      c.schema_id, c.issuer_did, c.attributes, c.link_commitment);
  c.issuer_signature = crypto::sign(issuer_keys.secret_key, canonical);
  c.credential_hash = crypto::digest(canonical);
  return c;
}

struct ProofRequest {
  Bytes nonce;  // 32 fresh bytes per request
  std::string schema_id;
  Did required_issuer;
  std::vector<std::string> disclosed_attributes;
  std::vector<std::pair<std::string, std::string>> attribute_constraints;

  json to_json() const {
    json constraints = json::object();
    for (const auto& [k, v] : attribute_constraints) constraints[k] = v;
    return json{{"nonce_b64", base64_encode(nonce)},
                {"schema_id", schema_id},
                {"required_issuer", required_issuer.str()},
                {"disclosed", disclosed_attributes},
                {"constraints", constraints}};
  }

  static ProofRequest from_json(const json& j) {
    if (!j.is_object() || !j.contains("nonce_b64") || !j.contains("schema_id") ||
        !j.contains("required_issuer") || !j.contains("disclosed") || !j.contains("constraints"))
      throw EncodingError("malformed proof request");
    ProofRequest r;
    r.nonce = base64_decode(j.at("nonce_b64").get<std::string>());
    r.schema_id = j.at("schema_id").get<std::string>();
    r.required_issuer = Did::parse(j.at("required_issuer").get<std::string>());
    for (const auto& d : j.at("disclosed")) r.disclosed_attributes.push_back(d.get<std::string>());
    for (const auto& [k, v] : j.at("constraints").items())
      r.attribute_constraints.emplace_back(k, v.get<std::string>());
    return r;
  }
};

inline ProofRequest make_proof_request(
    const std::string& schema_id, const Did& required_issuer,
    std::vector<std::string> disclosed,
    std::vector<std::pair<std::string, std::string>> constraints, DetRng& rng) {
  ProofRequest r;
  r.nonce = rng.bytes(32);
  r.schema_id = schema_id;
  r.required_issuer = required_issuer;
  r.disclosed_attributes = std::move(disclosed);
  r.attribute_constraints = std::move(constraints);
  return r;
}

inline json opening_proof_to_json(const crypto::OpeningProof& p) {
  return json{{"commitment", commitment_to_json(p.commitment)},
              {"challenge_b64", base64_encode(p.challenge.data(), p.challenge.size())},
              {"z_secret_b64", base64_encode(p.response_secret.data(), p.response_secret.size())},
              {"z_blinding_b64",
               base64_encode(p.response_blinding.data(), p.response_blinding.size())},
              {"nonce_b64", base64_encode(p.bound_nonce)}};
}

inline crypto::OpeningProof opening_proof_from_json(const json& j) {
  if (!j.is_object() || !j.contains("commitment") || !j.contains("challenge_b64") ||
      !j.contains("z_secret_b64") || !j.contains("z_blinding_b64") || !j.contains("nonce_b64"))
    throw EncodingError("malformed opening proof");
  auto scalar_of = [](const json& field) {
    Bytes raw = base64_decode(field.get<std::string>());
    if (raw.size() != 32) throw EncodingError("proof scalar must be 32 bytes");
    crypto::Scalar s;
    std::copy(raw.begin(), raw.end(), s.begin());
    return s;
  };
  crypto::OpeningProof p;
  p.commitment = commitment_from_json(j.at("commitment"));
  p.challenge = scalar_of(j.at("challenge_b64"));
  p.response_secret = scalar_of(j.at("z_secret_b64"));
  p.response_blinding = scalar_of(j.at("z_blinding_b64"));
  p.bound_nonce = base64_decode(j.at("nonce_b64").get<std::string>());
  return p;
}

struct Presentation {
  Credential credential;
  crypto::OpeningProof opening_proof;

  json to_json() const {
    return json{{"credential", credential.to_json()},
                {"proof", opening_proof_to_json(opening_proof)}};
  }

  static Presentation from_json(const json& j) {
    if (!j.is_object() || !j.contains("credential") || !j.contains("proof"))
      throw EncodingError("malformed presentation");
    return Presentation{Credential::from_json(j.at("credential")),
                        opening_proof_from_json(j.at("proof"))};
  }
};

inline Presentation present(const Credential& credential, const LinkSecret& link,
                            const crypto::Scalar& blinding, const ProofRequest& request,
                            DetRng& rng) {
  if (credential.schema_id != request.schema_id)
    throw CannotSatisfyError("held credential is for schema " + credential.schema_id +
                             ", request wants " + request.schema_id);
  crypto::OpeningProof proof = crypto::prove_opening(
      link.secret, blinding, credential.link_commitment, request.nonce, rng);
  return Presentation{credential, std::move(proof)};
}

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string reason;

  json to_json() const { return json{{"name", name}, {"passed", passed}, {"reason", reason}}; }
};

struct VerificationReport {
  std::array<CheckResult, 5> checks;

  bool accepted() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }

  json to_json() const {
    json arr = json::array();
    for (const auto& c : checks) arr.push_back(c.to_json());
    return json{{"checks", arr}, {"accepted", accepted()}};
  }
};

// The five checks, every one always evaluated (no short-circuiting):
//   1. the issuer DID resolves on the registry and its signature over the
//      credential's canonical encoding verifies;
//   2. the holder proves knowledge of the link-secret commitment opening,
//      bound to this request's nonce;
//   3. the registry authorizes the issuer for the schema, and the issuer is
//      the one the verifier's policy names;
//   4. the credential (by recomputed canonical hash) is not revoked;
//   5. the presented schema matches the request and every constrained
//      attribute carries the required value.
inline VerificationReport verify_presentation(const Presentation& presentation,
                                              const ProofRequest& request,
                                              const Registry& registry) {
  const Credential& cred = presentation.credential;
  const std::string canonical = canonical_credential_encoding(
      cred.schema_id, cred.issuer_did, cred.attributes, cred.link_commitment);
  const Hash32 recomputed_hash = crypto::digest(canonical);

  VerificationReport report;

  {  // 1: issuer resolution + signature
    CheckResult& c = report.checks[0];
    c.name = "issuer-signature";
    auto doc = registry.resolve_did(cred.issuer_did);
    if (!doc) {
      c.reason = "issuer DID " + cred.issuer_did.str() + " not found on the registry";
    } else if (!doc->self_consistent()) {
      c.reason = "registry document for the issuer violates its key binding";
    } else if (!crypto::verify(doc->verification_key, canonical, cred.issuer_signature)) {
      c.reason = "issuer signature over the canonical encoding failed to verify";
    } else {
      c.passed = true;
      c.reason = "issuer DID resolved and signature verified";
    }
  }

  {  // 2: holder binding
    CheckResult& c = report.checks[1];
    c.name = "holder-binding";
    if (crypto::verify_opening(cred.link_commitment, presentation.opening_proof,
                               request.nonce)) {
      c.passed = true;
      c.reason = "link-secret opening proof verified against the request nonce";
    } else {
      c.reason = "link-secret opening proof did not verify against the request nonce";
    }
  }

  {  // 3: issuer authority. An unresolvable issuer is the resolution check's
     // finding, not this one's: authority is only judged for issuers the
     // registry knows, so each defect is reported by exactly one check.
    CheckResult& c = report.checks[2];
    c.name = "issuer-authority";
    const bool resolvable = registry.resolve_did(cred.issuer_did).has_value();
    const bool granted =
        resolvable && registry.is_authorized(cred.schema_id, cred.issuer_did);
    const bool named = cred.issuer_did == request.required_issuer;
    if (!named) {
      c.reason = "issuer is " + cred.issuer_did.str() + " but the policy requires " +
                 request.required_issuer.str();
    } else if (!resolvable) {
      c.passed = true;
      c.reason = "issuer authority deferred: the DID is unresolvable, which the "
                 "resolution check reports";
    } else if (!granted) {
      c.reason = "registry holds no issuance grant for " + cred.issuer_did.str() +
                 " on schema " + cred.schema_id;
    } else {
      c.passed = true;
      c.reason = "issuer holds a grant for the schema and matches the required issuer";
    }
  }

  {  // 4: revocation
    CheckResult& c = report.checks[3];
    c.name = "not-revoked";
    if (registry.is_revoked(recomputed_hash)) {
      c.reason = "credential hash is on the revocation list";
    } else {
      c.passed = true;
      c.reason = "credential hash is not on the revocation list";
    }
  }

  {  // 5: schema and attribute criteria
    CheckResult& c = report.checks[4];
    c.name = "attribute-criteria";
    if (cred.schema_id != request.schema_id) {
      c.reason = "presented schema " + cred.schema_id + " does not match requested " +
                 request.schema_id;
    } else {
      std::string failure;
      for (const auto& [name, expected] : request.attribute_constraints) {
        auto it = std::find_if(cred.attributes.begin(), cred.attributes.end(),
                               [&](const auto& kv) { return kv.first == name; });
        if (it == cred.attributes.end()) {
          failure = "constrained attribute '" + name + "' is absent";
          break;
        }
        if (it->second != expected) {
          failure = "attribute '" + name + "' is '" + it->second + "', policy requires '" +
                    expected + "'";
          break;
        }
      }
      if (failure.empty()) {
        c.passed = true;
        c.reason = "schema matches and all constrained attributes carry required values";
      } else {
        c.reason = failure;
      }
    }
  }

  return report;
}

}  // namespace fedtrust
