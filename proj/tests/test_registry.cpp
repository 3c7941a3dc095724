// Registry semantics: issuer/schema registration (idempotent, conflicting
// re-registration rejected), authority grants, revocation by credential hash,
// and snapshot round trips.

#include <catch2/catch_amalgamated.hpp>

#include <fedtrust/identity.hpp>
#include <fedtrust/registry.hpp>
#include <fedtrust/rng.hpp>

using namespace fedtrust;

namespace {

struct Fixture {
  DetRng rng{101};
  crypto::KeyPair keys_a = crypto::generate_keypair(rng.bytes(32));
  crypto::KeyPair keys_b = crypto::generate_keypair(rng.bytes(32));
  Did did_a, did_b;
  DidDocument doc_a, doc_b;
  CredentialSchema schema{"VerifiedHospital", "1.0", {"name", "role"}};

  Fixture() {
    std::tie(did_a, doc_a) = create_public_did(keys_a, "127.0.0.1:1");
    std::tie(did_b, doc_b) = create_public_did(keys_b, "127.0.0.1:2");
  }
};

}  // namespace

TEST_CASE("schema validation enforces sorted unique attribute names") {
  CredentialSchema good{"S", "1.0", {"a", "b", "c"}};
  CHECK_NOTHROW(good.validate());
  CHECK(good.schema_id() == "S:1.0");

  CHECK_THROWS_AS((CredentialSchema{"", "1.0", {"a"}}.validate()), ConfigError);
  CHECK_THROWS_AS((CredentialSchema{"S", "", {"a"}}.validate()), ConfigError);
  CHECK_THROWS_AS((CredentialSchema{"S", "1.0", {}}.validate()), ConfigError);
  CHECK_THROWS_AS((CredentialSchema{"S", "1.0", {"b", "a"}}.validate()), ConfigError);
  CHECK_THROWS_AS((CredentialSchema{"S", "1.0", {"a", "a"}}.validate()), ConfigError);
  CHECK_THROWS_AS((CredentialSchema{"S", "1.0", {""}}.validate()), ConfigError);

  CHECK(CredentialSchema::from_json(good.to_json()) == good);
}

TEST_CASE("issuer registration is idempotent but conflicts are rejected") {
  Fixture f;
  Registry reg;
  reg.register_issuer(f.doc_a);
  CHECK_NOTHROW(reg.register_issuer(f.doc_a));  // same document again: fine

  CHECK(reg.resolve_did(f.did_a) == f.doc_a);
  CHECK_FALSE(reg.resolve_did(f.did_b).has_value());

  // Same DID with a different endpoint is a conflicting claim.
  DidDocument moved = f.doc_a;
  moved.endpoint = "127.0.0.1:9";
  CHECK_THROWS_AS(reg.register_issuer(moved), ConflictError);

  // Peer DIDs do not belong on the public registry.
  auto [peer_did, peer_doc] = create_peer_did(f.keys_b, "127.0.0.1:3");
  CHECK_THROWS_AS(reg.register_issuer(peer_doc), ConfigError);

  // A document whose key does not hash to its DID never enters.
  DidDocument forged = f.doc_b;
  forged.verification_key = f.keys_a.public_key;
  CHECK_THROWS_AS(reg.register_issuer(forged), CorruptDocumentError);
}

TEST_CASE("schema registration mirrors the same idempotence rules") {
  Fixture f;
  Registry reg;
  reg.register_schema(f.schema);
  CHECK_NOTHROW(reg.register_schema(f.schema));
  REQUIRE(reg.schema(f.schema.schema_id()).has_value());
  CHECK(*reg.schema(f.schema.schema_id()) == f.schema);

  CredentialSchema changed = f.schema;
  changed.attribute_names = {"name", "region", "role"};
  CHECK_THROWS_AS(reg.register_schema(changed), ConflictError);

  CHECK_FALSE(reg.schema("Nope:9.9").has_value());
}

TEST_CASE("authority grants are explicit, per schema, per issuer") {
  Fixture f;
  Registry reg;
  reg.register_issuer(f.doc_a);
  reg.register_issuer(f.doc_b);
  reg.register_schema(f.schema);
  const std::string sid = f.schema.schema_id();

  CHECK_FALSE(reg.is_authorized(sid, f.did_a));
  reg.authorize(sid, f.did_a);
  CHECK(reg.is_authorized(sid, f.did_a));
  CHECK_FALSE(reg.is_authorized(sid, f.did_b));  // no transitivity

  CHECK_THROWS_AS(reg.authorize("Nope:9.9", f.did_a), NotFoundError);
  Did ghost = Did::parse("did:pub:unknown");
  CHECK_THROWS_AS(reg.authorize(sid, ghost), NotFoundError);
}

TEST_CASE("revocation is by credential hash and is permanent") {
  Registry reg;
  Hash32 h = crypto::digest(std::string_view{"some credential"});
  CHECK_FALSE(reg.is_revoked(h));
  reg.revoke(h);
  CHECK(reg.is_revoked(h));
  CHECK_NOTHROW(reg.revoke(h));  // revoking again is a no-op
  CHECK_FALSE(reg.is_revoked(crypto::digest(std::string_view{"another"})));
}

TEST_CASE("snapshots round-trip the whole registry state") {
  Fixture f;
  Registry reg;
  reg.register_issuer(f.doc_a);
  reg.register_issuer(f.doc_b);
  reg.register_schema(f.schema);
  reg.authorize(f.schema.schema_id(), f.did_a);
  Hash32 h = crypto::digest(std::string_view{"revoked credential"});
  reg.revoke(h);

  json snap = reg.snapshot();
  Registry back = Registry::from_snapshot(snap);
  CHECK(back.resolve_did(f.did_a) == f.doc_a);
  CHECK(back.resolve_did(f.did_b) == f.doc_b);
  CHECK(back.schema(f.schema.schema_id()).has_value());
  CHECK(back.is_authorized(f.schema.schema_id(), f.did_a));
  CHECK_FALSE(back.is_authorized(f.schema.schema_id(), f.did_b));
  CHECK(back.is_revoked(h));

  // The snapshot of the restored registry is byte-identical.
  CHECK(back.snapshot().dump() == snap.dump());
}

TEST_CASE("snapshots with corrupt entries are rejected on load") {
  Fixture f;
  Registry reg;
  reg.register_issuer(f.doc_a);
  json snap = reg.snapshot();

  json bad = snap;
  bad["dids"][0]["key_b64"] = base64_encode(f.keys_b.public_key);  // breaks self-certification
  CHECK_THROWS_AS(Registry::from_snapshot(bad), CorruptDocumentError);

  json bad_revoked = snap;
  bad_revoked["revoked"].push_back("abcd");  // not a 32-byte hash
  CHECK_THROWS_AS(Registry::from_snapshot(bad_revoked), EncodingError);
}
