// Credential lifecycle: the frozen canonical encoding, issuance against a
// schema, presentation with a link-secret opening proof, and the five-check
// verification with each check isolated by a targeted mutation.

#include <catch2/catch_amalgamated.hpp>

#include <fedtrust/credentials.hpp>
#include <fedtrust/registry.hpp>
#include <fedtrust/rng.hpp>

using namespace fedtrust;

namespace {

// One issuer, one holder, one schema, one issued credential: the happy path
// every mutation below starts from.
struct World {
  DetRng rng{2024};
  Registry registry;
  crypto::KeyPair issuer_keys = crypto::generate_keypair(rng.bytes(32));
  crypto::KeyPair other_keys = crypto::generate_keypair(rng.bytes(32));
  Did issuer_did, other_did;
  DidDocument issuer_doc, other_doc;
  CredentialSchema schema{"VerifiedHospital", "1.0", {"name", "role"}};
  LinkSecret link = LinkSecret::generate(rng);
  Credential credential;
  crypto::Scalar blinding{};
  ProofRequest request;

  World() {
    std::tie(issuer_did, issuer_doc) = create_public_did(issuer_keys, "127.0.0.1:1");
    std::tie(other_did, other_doc) = create_public_did(other_keys, "127.0.0.1:2");
    registry.register_issuer(issuer_doc);
    registry.register_issuer(other_doc);
    registry.register_schema(schema);
    registry.authorize(schema.schema_id(), issuer_did);

    auto [req, blind] = request_credential(link, schema, rng);
    blinding = blind;
    credential = issue(issuer_keys, issuer_did, schema,
                       {{"name", "hospital-1"}, {"role", "hospital"}}, req.commitment);
    request = make_proof_request(schema.schema_id(), issuer_did, {"name", "role"},
                                 {{"role", "hospital"}}, rng);
  }

  Presentation honest() { return present(credential, link, blinding, request, rng); }
};

void expect_only_failures(const VerificationReport& report,
                          std::initializer_list<std::size_t> failing) {
  for (std::size_t i = 0; i < report.checks.size(); ++i) {
    const bool should_fail =
        std::find(failing.begin(), failing.end(), i) != failing.end();
    INFO("check " << i << " (" << report.checks[i].name
                  << "): " << report.checks[i].reason);
    CHECK(report.checks[i].passed == !should_fail);
  }
  CHECK(report.accepted() == (failing.size() == 0));
}

}  // namespace

TEST_CASE("canonical credential encoding is the frozen line format") {
  crypto::Commitment identity_commitment;  // all-zero value, context "S:1.0"
  identity_commitment.value = crypto::group_identity();
  identity_commitment.context = "S:1.0";
  std::vector<std::pair<std::string, std::string>> attrs{{"name", "h1"},
                                                         {"role", "hospital"}};
  const std::string canonical = canonical_credential_encoding(
      "S:1.0", Did::parse("did:pub:X"), attrs, identity_commitment);
  CHECK(canonical ==
        "name=h1\n"
        "role=hospital\n"
        "schema=S:1.0\n"
        "issuer=did:pub:X\n"
        "link=AAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAA=");

  // Attribute order in memory does not change the encoding.
  std::vector<std::pair<std::string, std::string>> reversed{{"role", "hospital"},
                                                            {"name", "h1"}};
  CHECK(canonical_credential_encoding("S:1.0", Did::parse("did:pub:X"), reversed,
                                      identity_commitment) == canonical);
}

TEST_CASE("issuance signs the canonical encoding and pins the hash") {
  World w;
  const std::string canonical = canonical_credential_encoding(
      w.credential.schema_id, w.credential.issuer_did, w.credential.attributes,
      w.credential.link_commitment);
  CHECK(crypto::verify(w.issuer_keys.public_key, canonical, w.credential.issuer_signature));
  CHECK(w.credential.credential_hash == crypto::digest(canonical));
  CHECK(w.credential.schema_id == "VerifiedHospital:1.0");
}

TEST_CASE("issuance rejects attribute sets that do not match the schema") {
  World w;
  auto [req, _] = request_credential(w.link, w.schema, w.rng);
  CHECK_THROWS_AS(issue(w.issuer_keys, w.issuer_did, w.schema, {{"name", "x"}},
                        req.commitment),
                  SchemaViolationError);
  CHECK_THROWS_AS(issue(w.issuer_keys, w.issuer_did, w.schema,
                        {{"name", "x"}, {"region", "y"}, {"role", "z"}}, req.commitment),
                  SchemaViolationError);
  CHECK_THROWS_AS(issue(w.issuer_keys, w.issuer_did, w.schema,
                        {{"name", "x"}, {"region", "y"}}, req.commitment),
                  SchemaViolationError);
}

TEST_CASE("credentials and presentations survive JSON round trips") {
  World w;
  CHECK(Credential::from_json(w.credential.to_json()) == w.credential);

  Presentation p = w.honest();
  json j = p.to_json();
  Presentation back = Presentation::from_json(j);
  CHECK(back.credential == p.credential);
  CHECK(back.opening_proof.challenge == p.opening_proof.challenge);
  CHECK(back.opening_proof.bound_nonce == p.opening_proof.bound_nonce);

  json req_json = w.request.to_json();
  ProofRequest req_back = ProofRequest::from_json(req_json);
  CHECK(req_back.nonce == w.request.nonce);
  CHECK(req_back.schema_id == w.request.schema_id);
  CHECK(req_back.required_issuer == w.request.required_issuer);
  CHECK(req_back.attribute_constraints == w.request.attribute_constraints);
}

TEST_CASE("presenting against a request for a different schema cannot be satisfied") {
  World w;
  ProofRequest other = w.request;
  other.schema_id = "SomethingElse:2.0";
  CHECK_THROWS_AS(present(w.credential, w.link, w.blinding, other, w.rng),
                  CannotSatisfyError);
}

TEST_CASE("an honest presentation passes all five checks") {
  World w;
  VerificationReport report = verify_presentation(w.honest(), w.request, w.registry);
  expect_only_failures(report, {});
  CHECK(report.checks[0].name == "issuer-signature");
  CHECK(report.checks[1].name == "holder-binding");
  CHECK(report.checks[2].name == "issuer-authority");
  CHECK(report.checks[3].name == "not-revoked");
  CHECK(report.checks[4].name == "attribute-criteria");
}

TEST_CASE("check 1 in isolation: a registered issuer whose signature is wrong") {
  World w;
  Presentation p = w.honest();
  p.credential.issuer_signature[10] ^= 0x01;
  expect_only_failures(verify_presentation(p, w.request, w.registry), {0});
}

TEST_CASE("check 1 in isolation: signature over different bytes than presented") {
  World w;
  Presentation p = w.honest();
  // The holder edits a non-constrained attribute after issuance; the
  // signature no longer covers what is presented.
  for (auto& [k, v] : p.credential.attributes)
    if (k == "name") v = "hospital-1-renamed";
  expect_only_failures(verify_presentation(p, w.request, w.registry), {0});
}

TEST_CASE("check 2 in isolation: proof bound to a stale nonce") {
  World w;
  Presentation p = w.honest();
  ProofRequest fresh = make_proof_request(w.schema.schema_id(), w.issuer_did,
                                          {"name", "role"}, {{"role", "hospital"}}, w.rng);
  // Present the old proof against the fresh request: only holder binding dies.
  expect_only_failures(verify_presentation(p, fresh, w.registry), {1});
}

TEST_CASE("check 2 in isolation: prover without the link secret") {
  World w;
  LinkSecret thief = LinkSecret::generate(w.rng);
  crypto::Scalar thief_blinding = crypto::random_scalar(w.rng);
  Presentation p = w.honest();
  p.opening_proof = crypto::prove_opening(thief.secret, thief_blinding,
                                          w.credential.link_commitment, w.request.nonce,
                                          w.rng);
  expect_only_failures(verify_presentation(p, w.request, w.registry), {1});
}

TEST_CASE("check 3 in isolation: registered issuer without a grant") {
  // The credential is formed correctly and signed by a registered issuer who
  // simply holds no grant for the schema: the self-certification attack.
  World w;
  auto [req, blinding] = request_credential(w.link, w.schema, w.rng);
  Credential rogue = issue(w.other_keys, w.other_did, w.schema,
                           {{"name", "mallory"}, {"role", "hospital"}}, req.commitment);
  ProofRequest request = make_proof_request(w.schema.schema_id(), w.other_did,
                                            {"name", "role"}, {{"role", "hospital"}}, w.rng);
  Presentation p = present(rogue, w.link, blinding, request, w.rng);
  expect_only_failures(verify_presentation(p, request, w.registry), {2});
}

TEST_CASE("check 3 also fails when the issuer is not the one the policy names") {
  World w;
  w.registry.authorize(w.schema.schema_id(), w.other_did);  // granted, but not named
  auto [req, blinding] = request_credential(w.link, w.schema, w.rng);
  Credential cred = issue(w.other_keys, w.other_did, w.schema,
                          {{"name", "x"}, {"role", "hospital"}}, req.commitment);
  // Policy still requires w.issuer_did.
  ProofRequest request = make_proof_request(w.schema.schema_id(), w.issuer_did,
                                            {"name", "role"}, {{"role", "hospital"}}, w.rng);
  Presentation p = present(cred, w.link, blinding, request, w.rng);
  expect_only_failures(verify_presentation(p, request, w.registry), {2});
}

TEST_CASE("an unregistered issuer fails exactly the resolution check") {
  World w;
  DetRng hidden(77);
  crypto::KeyPair ghost_keys = crypto::generate_keypair(hidden.bytes(32));
  auto [ghost_did, ghost_doc] = create_public_did(ghost_keys, "127.0.0.1:66");
  // ghost_doc never registered. The authority check defers: an unknown DID is
  // the resolution check's finding, so each defect maps to exactly one check.
  auto [req, blinding] = request_credential(w.link, w.schema, w.rng);
  Credential cred = issue(ghost_keys, ghost_did, w.schema,
                          {{"name", "ghost"}, {"role", "hospital"}}, req.commitment);
  ProofRequest request = make_proof_request(w.schema.schema_id(), ghost_did,
                                            {"name", "role"}, {{"role", "hospital"}}, w.rng);
  Presentation p = present(cred, w.link, blinding, request, w.rng);
  VerificationReport report = verify_presentation(p, request, w.registry);
  expect_only_failures(report, {0});
  CHECK(report.checks[2].reason.find("deferred") != std::string::npos);
}

TEST_CASE("check 4 in isolation: revocation by recomputed hash") {
  World w;
  w.registry.revoke(w.credential.credential_hash);
  expect_only_failures(verify_presentation(w.honest(), w.request, w.registry), {3});
}

TEST_CASE("revocation keys on the canonical bytes, not the carried hash field") {
  World w;
  w.registry.revoke(w.credential.credential_hash);
  Presentation p = w.honest();
  p.credential.credential_hash.fill(0x00);  // lying about the hash does not help
  expect_only_failures(verify_presentation(p, w.request, w.registry), {3});
}

TEST_CASE("check 5 in isolation: constrained attribute with the wrong value") {
  World w;
  auto [req, blinding] = request_credential(w.link, w.schema, w.rng);
  Credential clinic = issue(w.issuer_keys, w.issuer_did, w.schema,
                            {{"name", "c1"}, {"role", "clinic"}}, req.commitment);
  Presentation p = present(clinic, w.link, blinding, w.request, w.rng);
  expect_only_failures(verify_presentation(p, w.request, w.registry), {4});
}

TEST_CASE("check 5 reports a schema mismatch even when everything else holds") {
  World w;
  CredentialSchema other_schema{"Clinic", "2.0", {"name", "role"}};
  w.registry.register_schema(other_schema);
  w.registry.authorize(other_schema.schema_id(), w.issuer_did);
  auto [req, blinding] = request_credential(w.link, other_schema, w.rng);
  Credential cred = issue(w.issuer_keys, w.issuer_did, other_schema,
                          {{"name", "c"}, {"role", "hospital"}}, req.commitment);
  // Force the mismatch the present() guard would normally stop.
  Presentation p;
  p.credential = cred;
  p.opening_proof = crypto::prove_opening(w.link.secret, blinding, cred.link_commitment,
                                          w.request.nonce, w.rng);
  // Checks: signature fine (1 ok), binding fine (2 ok), authority checks the
  // presented schema (granted + named: ok), not revoked, but schema mismatch.
  expect_only_failures(verify_presentation(p, w.request, w.registry), {4});
}

TEST_CASE("every check is evaluated even when an earlier one fails") {
  World w;
  Presentation p = w.honest();
  p.credential.issuer_signature[0] ^= 0xff;         // kills check 1
  w.registry.revoke(w.credential.credential_hash);  // kills check 4
  VerificationReport report = verify_presentation(p, w.request, w.registry);
  expect_only_failures(report, {0, 3});
  // Both failures carry reasons: no short-circuiting happened.
  CHECK_FALSE(report.checks[0].reason.empty());
  CHECK_FALSE(report.checks[3].reason.empty());
}
