// Identity layer: base58/DID derivation against frozen values, the exact
// envelope wire format, the encrypt-then-sign ordering of failures, and the
// first-contact handshake unpacking.

#include <catch2/catch_amalgamated.hpp>

#include <fedtrust/identity.hpp>
#include <fedtrust/registry.hpp>
#include <fedtrust/rng.hpp>

using namespace fedtrust;

namespace {

crypto::KeyPair test_keys1() {
  return crypto::generate_keypair(
      from_hex("9d61b19deffd5a60ba844af492ec2cc44449c5697b326919703bac031cae7f60"));
}

crypto::KeyPair test_keys2() {
  return crypto::generate_keypair(
      from_hex("4ccd089b28ff96da9db6c346ec114e0f5b8a319f35aba624da8cf6ed4fb8a6fb"));
}

}  // namespace

TEST_CASE("base58 encoding matches frozen expectations") {
  Bytes zeros(16, 0x00);
  CHECK(base58_encode(zeros.data(), zeros.size()) == "1111111111111111");
  Bytes hello = to_bytes("hello");
  CHECK(base58_encode(hello.data(), hello.size()) == "Cn8eVZg");
  CHECK(base58_encode(nullptr, 0).empty());
}

TEST_CASE("DID identifiers derive deterministically from the public key") {
  // base58 of the first 16 bytes of sha-256 over the key, frozen from an
  // independent computation.
  CHECK(key_identifier(test_keys1().public_key) == "5CThzzdZPTPGPuLz6gwdFk");

  auto [did, doc] = create_peer_did(test_keys1(), "127.0.0.1:1");
  CHECK(did.str() == "did:peer:5CThzzdZPTPGPuLz6gwdFk");
  CHECK(doc.self_consistent());

  auto [pub_did, pub_doc] = create_public_did(test_keys1(), "127.0.0.1:1");
  CHECK(pub_did.str() == "did:pub:5CThzzdZPTPGPuLz6gwdFk");
  CHECK(pub_did != did);
}

TEST_CASE("DID strings parse strictly") {
  Did d = Did::parse("did:peer:abc");
  CHECK(d.method == DidMethod::peer);
  CHECK(d.identifier == "abc");
  CHECK(Did::parse("did:pub:xyz").method == DidMethod::pub);

  CHECK_THROWS_AS(Did::parse("did:web:abc"), EncodingError);
  CHECK_THROWS_AS(Did::parse("did:peer:"), EncodingError);
  CHECK_THROWS_AS(Did::parse("not-a-did"), EncodingError);
  CHECK_THROWS_AS(Did::parse(""), EncodingError);
}

TEST_CASE("documents are self-certifying and survive JSON round trips") {
  auto [did, doc] = create_peer_did(test_keys1(), "127.0.0.1:9000");
  CHECK(doc.self_consistent());
  CHECK(DidDocument::from_json(doc.to_json()) == doc);

  DidDocument forged = doc;
  forged.verification_key = test_keys2().public_key;  // key swap breaks the binding
  CHECK_FALSE(forged.self_consistent());

  CHECK_THROWS_AS(create_peer_did(test_keys1(), ""), ConfigError);
}

TEST_CASE("canonical message bytes are sorted compact JSON") {
  Message m;
  m.type = MessageType::ack;
  m.body = json{{"b", 2}, {"a", 1}};
  m.thread_id = "t-1";
  CHECK(canonical_message_bytes(m) == R"({"body":{"a":1,"b":2},"thid":"t-1","type":"ack"})");

  m.thread_id.reset();
  CHECK(canonical_message_bytes(m) == R"({"body":{"a":1,"b":2},"thid":null,"type":"ack"})");
}

TEST_CASE("envelope wire bytes are exactly the six sorted fields") {
  Envelope env;
  env.to = Did::parse("did:peer:AAA");
  env.from = Did::parse("did:peer:BBB");
  env.message_id = "0123456789abcdef";
  env.ciphertext = Bytes{0x01, 0x02};
  env.signature = Bytes{0x03};
  CHECK(env.wire() ==
        R"({"ct_b64":"AQI=","from":"did:peer:BBB","mid":"0123456789abcdef",)"
        R"("sig_b64":"Aw==","thid":null,"to":"did:peer:AAA"})");

  env.thread_id = "ff00";
  CHECK(env.wire() ==
        R"({"ct_b64":"AQI=","from":"did:peer:BBB","mid":"0123456789abcdef",)"
        R"("sig_b64":"Aw==","thid":"ff00","to":"did:peer:AAA"})");

  Envelope back = Envelope::from_wire(env.wire());
  CHECK(back.wire() == env.wire());
}

TEST_CASE("malformed envelopes are rejected with encoding errors") {
  CHECK_THROWS_AS(Envelope::from_wire("not json"), EncodingError);
  CHECK_THROWS_AS(Envelope::from_wire("[]"), EncodingError);
  // missing field
  CHECK_THROWS_AS(
      Envelope::from_wire(
          R"({"ct_b64":"AQI=","from":"did:peer:B","mid":"m","sig_b64":"Aw==","thid":null})"),
      EncodingError);
  // extra field
  CHECK_THROWS_AS(
      Envelope::from_wire(
          R"({"ct_b64":"AQI=","extra":1,"from":"did:peer:B","mid":"m","sig_b64":"Aw==",)"
          R"("thid":null,"to":"did:peer:A"})"),
      EncodingError);
  // wrong type
  CHECK_THROWS_AS(
      Envelope::from_wire(
          R"({"ct_b64":"AQI=","from":"did:peer:B","mid":7,"sig_b64":"Aw==","thid":null,)"
          R"("to":"did:peer:A"})"),
      EncodingError);
}

TEST_CASE("pack/unpack round-trips a message between two parties") {
  DetRng rng(31);
  crypto::KeyPair alice_keys = test_keys1();
  crypto::KeyPair bob_keys = test_keys2();
  auto [alice_did, alice_doc] = create_peer_did(alice_keys, "127.0.0.1:1");
  auto [bob_did, bob_doc] = create_peer_did(bob_keys, "127.0.0.1:2");

  Message m;
  m.type = MessageType::train_request;
  m.body = json{{"model", "d=1\nversion=0\nbias=0\nw=0"}};
  m.thread_id = "abcd";

  Envelope env = pack(m, alice_keys, alice_did, bob_doc, "deadbeef00000000", rng);
  CHECK(env.to == bob_did);
  CHECK(env.from == alice_did);
  CHECK(env.thread_id == m.thread_id);

  Message back = unpack(env, bob_keys, alice_doc);
  CHECK(back.type == m.type);
  CHECK(back.body == m.body);
  CHECK(back.thread_id == m.thread_id);
}

TEST_CASE("failure taxonomy: integrity before confidentiality") {
  DetRng rng(37);
  crypto::KeyPair alice_keys = test_keys1();
  crypto::KeyPair bob_keys = test_keys2();
  auto [alice_did, alice_doc] = create_peer_did(alice_keys, "127.0.0.1:1");
  auto [bob_did, bob_doc] = create_peer_did(bob_keys, "127.0.0.1:2");
  Message m{MessageType::ack, json{{"status", "stored"}}, std::nullopt};
  Envelope env = pack(m, alice_keys, alice_did, bob_doc, "00ff00ff00ff00ff", rng);

  SECTION("tampered ciphertext fails the signature, never reaching decryption") {
    Envelope tampered = env;
    tampered.ciphertext[5] ^= 0x80;
    CHECK_THROWS_AS(unpack(tampered, bob_keys, alice_doc), IntegrityError);
  }
  SECTION("claimed sender that does not match the document is an integrity failure") {
    Envelope relabeled = env;
    relabeled.from = bob_did;
    CHECK_THROWS_AS(unpack(relabeled, bob_keys, alice_doc), IntegrityError);
  }
  SECTION("the signature binds the routing fields, not just the ciphertext") {
    Envelope rerouted = env;
    rerouted.to = alice_did;  // redirect an otherwise untouched envelope
    CHECK_THROWS_AS(unpack(rerouted, bob_keys, alice_doc), IntegrityError);

    Envelope renumbered = env;
    renumbered.message_id = "ffffffffffffffff";  // splice onto another flow
    CHECK_THROWS_AS(unpack(renumbered, bob_keys, alice_doc), IntegrityError);

    Envelope rethreaded = env;
    rethreaded.thread_id = "00ff00ff00ff00ff";  // forge a correlation
    CHECK_THROWS_AS(unpack(rethreaded, bob_keys, alice_doc), IntegrityError);
  }
  SECTION("intact signature with the wrong recipient key is a confidentiality failure") {
    crypto::KeyPair eve_keys = crypto::generate_keypair(rng.bytes(32));
    CHECK_THROWS_AS(unpack(env, eve_keys, alice_doc), ConfidentialityError);
  }
  SECTION("non-self-certifying sender document is rejected outright") {
    DidDocument forged = alice_doc;
    forged.verification_key = bob_keys.public_key;
    CHECK_THROWS_AS(unpack(env, bob_keys, forged), CorruptDocumentError);
  }
}

TEST_CASE("unknown message types surface after the crypto succeeds") {
  Bytes payload = to_bytes(R"({"body":{},"thid":null,"type":"no_such_type"})");
  CHECK_THROWS_AS(decode_message(payload), UnsupportedTypeError);

  Bytes malformed = to_bytes(R"({"body":{}})");
  CHECK_THROWS_AS(decode_message(malformed), EncodingError);
}

TEST_CASE("first contact carries a self-certifying document inside the payload") {
  DetRng rng(41);
  crypto::KeyPair inviter_keys = test_keys1();
  auto [inviter_did, inviter_doc] = create_peer_did(inviter_keys, "127.0.0.1:1");
  crypto::KeyPair joiner_keys = crypto::generate_keypair(rng.bytes(32));
  auto [joiner_did, joiner_doc] = create_peer_did(joiner_keys, "127.0.0.1:2");

  Message m;
  m.type = MessageType::did_exchange_request;
  m.body = json{{"token", "tok"}, {"doc", joiner_doc.to_json()}};
  Envelope env = pack(m, joiner_keys, joiner_did, inviter_doc, "1111222233334444", rng);

  auto [message, doc] = unpack_first_contact(env, inviter_keys);
  CHECK(message.type == MessageType::did_exchange_request);
  CHECK(doc == joiner_doc);

  SECTION("only a connection request may use this path") {
    Message wrong{MessageType::ack, json{{"doc", joiner_doc.to_json()}}, std::nullopt};
    Envelope bad = pack(wrong, joiner_keys, joiner_did, inviter_doc, "1111222233334445", rng);
    CHECK_THROWS_AS(unpack_first_contact(bad, inviter_keys), IntegrityError);
  }
  SECTION("an embedded document that is not self-certifying is rejected") {
    DidDocument forged = joiner_doc;
    forged.verification_key = inviter_keys.public_key;
    Message bad_msg{MessageType::did_exchange_request,
                    json{{"token", "tok"}, {"doc", forged.to_json()}}, std::nullopt};
    Envelope bad = pack(bad_msg, joiner_keys, joiner_did, inviter_doc, "1111222233334446", rng);
    CHECK_THROWS_AS(unpack_first_contact(bad, inviter_keys), CorruptDocumentError);
  }
  SECTION("the envelope sender must be the embedded document's DID") {
    Envelope relabeled = env;
    relabeled.from = inviter_did;
    CHECK_THROWS_AS(unpack_first_contact(relabeled, inviter_keys), IntegrityError);
  }
  SECTION("a signature that does not match the embedded key is rejected") {
    Envelope resigned = env;
    resigned.signature = crypto::sign(inviter_keys.secret_key, resigned.ciphertext);
    CHECK_THROWS_AS(unpack_first_contact(resigned, inviter_keys), IntegrityError);
  }
}

TEST_CASE("resolution prefers the peer store and falls back to the registry") {
  PeerStore peers;
  Registry registry;

  crypto::KeyPair peer_keys = test_keys1();
  auto [peer_did, peer_doc] = create_peer_did(peer_keys, "127.0.0.1:1");
  peers.put(peer_doc);
  CHECK(resolve(peer_did, peers, registry) == peer_doc);

  crypto::KeyPair pub_keys = test_keys2();
  auto [pub_did, pub_doc] = create_public_did(pub_keys, "127.0.0.1:2");
  registry.register_issuer(pub_doc);
  CHECK(resolve(pub_did, peers, registry) == pub_doc);

  Did unknown = Did::parse("did:peer:zzzz");
  CHECK_THROWS_AS(resolve(unknown, peers, registry), NotFoundError);
}

TEST_CASE("message ids from the deterministic rng are 16 hex characters") {
  DetRng rng(43);
  std::string mid = rng.hex(8);
  CHECK(mid.size() == 16);
  CHECK(mid.find_first_not_of("0123456789abcdef") == std::string::npos);
}
