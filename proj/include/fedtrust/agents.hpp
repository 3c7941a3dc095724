#pragma once

// Agent runtime. An agent owns a wallet (link secret, credentials, peer
// documents), pairwise connections with fresh per-connection DIDs, and a
// message dispatcher wired to a transport. Connection setup, credential
// issuance, trust establishment (proof exchange + five-check verification)
// and training requests are blocking flows correlated by thread ids; inbound
// traffic is handled either inline (in-memory transport) or on the agent's
// worker thread (socket transport).

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "credentials.hpp"
#include "fedlearn.hpp"
#include "transport.hpp"

namespace fedtrust {

struct TrustPolicy {
  std::string schema_id;
  Did required_issuer;
  std::vector<std::pair<std::string, std::string>> attribute_constraints;
};

enum class ConnState { invited, requested, complete };

inline std::string_view to_string(ConnState s) {
  switch (s) {
    case ConnState::invited: return "invited";
    case ConnState::requested: return "requested";
    case ConnState::complete: return "complete";
  }
  return "unknown";
}

struct Connection {
  std::string connection_id;
  Did my_did;
  Did their_did;
  DidDocument their_document;
  crypto::KeyPair my_keys;
  ConnState state = ConnState::invited;
  bool trusted = false;  // directional: set only by this side's verification
  std::vector<std::pair<std::string, std::string>> verified_attributes;
  std::vector<ConnState> state_history;
};

struct Invitation {
  Did inviter_did;
  Bytes inviter_key;
  std::string endpoint;
  std::string token;  // single use

  json to_json() const {
    return json{{"did", inviter_did.str()},
                {"key_b64", base64_encode(inviter_key)},
                {"endpoint", endpoint},
                {"token", token}};
  }

  static Invitation from_json(const json& j) {
    return Invitation{Did::parse(j.at("did").get<std::string>()),
                      base64_decode(j.at("key_b64").get<std::string>()),
                      j.at("endpoint").get<std::string>(), j.at("token").get<std::string>()};
  }
};

struct StoredCredential {
  Credential credential;
  crypto::Scalar blinding{};  // commitment opening; never leaves the wallet
};

struct AgentCounters {
  std::uint64_t messages_sent = 0;
  std::uint64_t messages_received = 0;
  std::uint64_t bytes_sent = 0;
  std::uint64_t bytes_received = 0;
  std::uint64_t envelopes_dropped = 0;
  std::uint64_t bytes_dropped = 0;
};

struct AuditRecord {
  std::string event;  // train_request_sent / train_request_received / train_request_processed
  std::string connection_id;
  bool trusted_at_time = false;
  std::string detail;
};

struct AwaitBudget {
  int max_steps = 20000;   // in-memory deliveries per awaited flow
  int timeout_ms = 10000;  // wall-clock budget (socket transport)
};

struct TrustOutcome {
  bool trusted = false;
  std::optional<VerificationReport> report;  // absent if no presentation came back
  std::string detail;
};

struct IssueOutcome {
  bool stored = false;
  std::string detail;
};

struct TrainOutcome {
  bool ok = false;
  std::string model_text;
  std::string problem_code;
  std::string detail;
};

class Agent {
 public:
  Agent(std::string name, std::string endpoint, std::uint64_t seed, Transport& transport,
        Registry& registry)
      : name_(std::move(name)),
        endpoint_(std::move(endpoint)),
        rng_(seed),
        transport_(&transport),
        registry_(&registry),
        link_secret_(LinkSecret::generate(rng_)) {}

  Agent(const Agent&) = delete;
  Agent& operator=(const Agent&) = delete;
  ~Agent() { stop_worker(); }

  const std::string& name() const { return name_; }
  const std::string& endpoint() const { return endpoint_; }

  // --- issuer identity -----------------------------------------------------

  // Issuers (and self-certifying adversaries) carry one long-lived public DID.
  void create_public_identity() {
    std::lock_guard lk(mx_);
    public_keys_ = crypto::generate_keypair(rng_.bytes(crypto::kSeedBytes));
    auto [did, doc] = create_public_did(*public_keys_, endpoint_);
    public_did_ = did;
    public_document_ = doc;
  }

  DidDocument public_document() const {
    std::lock_guard lk(mx_);
    if (!public_document_) throw ConfigError(name_ + " has no public identity");
    return *public_document_;
  }

  std::optional<Did> public_did() const {
    std::lock_guard lk(mx_);
    return public_did_;
  }

  // --- configuration -------------------------------------------------------

  void set_trainer(fedlearn::Dataset data, fedlearn::TrainConfig config) {
    std::lock_guard lk(mx_);
    trainer_ = TrainerContext{std::move(data), config};
  }

  void set_auto_accept_offers(bool on) {
    std::lock_guard lk(mx_);
    auto_accept_offers_ = on;
  }

  // Honest agents keep the sender-side trust gate on; adversaries switch it
  // off so their probes actually reach the defender.
  void set_enforce_local_trust(bool on) {
    std::lock_guard lk(mx_);
    enforce_local_trust_ = on;
  }

  // --- connection establishment --------------------------------------------

  Invitation create_invitation() {
    std::lock_guard lk(mx_);
    crypto::KeyPair keys = crypto::generate_keypair(rng_.bytes(crypto::kSeedBytes));
    auto [did, doc] = create_peer_did(keys, endpoint_);
    std::string token = rng_.hex(16);
    invites_[token] = InviteInfo{keys, did, false};
    invite_route_[did.str()] = token;
    return Invitation{did, keys.public_key, endpoint_, token};
  }

  std::string connect(const Invitation& invitation, const AwaitBudget& budget = {}) {
    std::string mid, conn_id;
    {
      std::lock_guard lk(mx_);
      DidDocument inviter_doc{invitation.inviter_did, invitation.inviter_key,
                              invitation.endpoint};
      if (!inviter_doc.self_consistent())
        throw CorruptDocumentError("invitation key does not match the inviter DID");
      crypto::KeyPair keys = crypto::generate_keypair(rng_.bytes(crypto::kSeedBytes));
      auto [did, doc] = create_peer_did(keys, endpoint_);
      Connection conn;
      conn.connection_id = "c-" + rng_.hex(6);
      conn.my_did = did;
      conn.my_keys = keys;
      conn.their_did = invitation.inviter_did;
      conn.their_document = inviter_doc;
      set_state(conn, ConnState::invited);
      conn_id = conn.connection_id;
      route_[did.str()] = conn_id;
      conn_order_.push_back(conn_id);
      peers_.put(inviter_doc);
      mid = fresh_mid();
      Flow f;
      f.kind = FlowKind::connect;
      f.connection_id = conn_id;
      flows_[mid] = std::move(f);
      Message m{MessageType::did_exchange_request,
                json{{"token", invitation.token}, {"doc", doc.to_json()}}, std::nullopt};
      Connection& stored = conns_[conn_id] = std::move(conn);
      send_on(stored, m, mid);
      set_state(stored, ConnState::requested);
    }
    Message reply = await_event(mid, budget);
    std::lock_guard lk(mx_);
    flows_.erase(mid);
    if (reply.type == MessageType::problem_report)
      throw DeliveryError("connection rejected: " +
                          reply.body.value("detail", std::string("unspecified")));
    return conn_id;
  }

  // --- credential issuance (issuer side drives) -----------------------------

  IssueOutcome offer_credential(const std::string& conn_id, const std::string& schema_id,
                                const std::map<std::string, std::string>& attributes,
                                const AwaitBudget& budget = {}) {
    std::string mid;
    {
      std::lock_guard lk(mx_);
      Connection& conn = require_complete(conn_id);
      if (!public_keys_) throw ConfigError(name_ + " has no issuing identity");
      mid = fresh_mid();
      Flow f;
      f.kind = FlowKind::issue_offer;
      f.connection_id = conn_id;
      f.schema_id = schema_id;
      f.attributes = attributes;
      flows_[mid] = std::move(f);
      json attrs = json::object();
      for (const auto& [k, v] : attributes) attrs[k] = v;
      Message m{MessageType::credential_offer,
                json{{"schema_id", schema_id}, {"attributes", attrs}}, std::nullopt};
      send_on(conn, m, mid);
    }
    Message reply = await_event(mid, budget);
    std::lock_guard lk(mx_);
    flows_.erase(mid);
    if (reply.type == MessageType::ack && reply.body.value("status", "") == "stored")
      return IssueOutcome{true, "stored"};
    return IssueOutcome{false, reply.body.value("reason",
                                reply.body.value("detail", std::string("rejected")))};
  }

  // Crafts a credential signed by this agent's own public identity and stores
  // it in its own wallet — the self-certification an open registry cannot
  // prevent, and exactly what issuer-authority verification must catch.
  void issue_to_self(const std::string& schema_id,
                     const std::map<std::string, std::string>& attributes) {
    std::lock_guard lk(mx_);
    if (!public_keys_) throw ConfigError(name_ + " has no issuing identity");
    auto schema = registry_->schema(schema_id);
    if (!schema) throw NotFoundError("unknown schema " + schema_id);
    auto [request, blinding] = request_credential(link_secret_, *schema, rng_);
    Credential cred = issue(*public_keys_, *public_did_, *schema, attributes,
                            request.commitment);
    credentials_[to_hex(cred.credential_hash)] = StoredCredential{cred, blinding};
  }

  // --- trust establishment (verifier side drives) ---------------------------

  TrustOutcome establish_trust(const std::string& conn_id, const TrustPolicy& policy,
                               const AwaitBudget& budget = {}) {
    std::string mid;
    {
      std::lock_guard lk(mx_);
      Connection& conn = require_complete(conn_id);
      auto schema = registry_->schema(policy.schema_id);
      std::vector<std::string> disclosed =
          schema ? schema->attribute_names : std::vector<std::string>{};
      ProofRequest request = make_proof_request(policy.schema_id, policy.required_issuer,
                                                disclosed, policy.attribute_constraints, rng_);
      mid = fresh_mid();
      Flow f;
      f.kind = FlowKind::trust;
      f.connection_id = conn_id;
      f.proof_request = request;
      flows_[mid] = std::move(f);
      Message m{MessageType::proof_request, request.to_json(), std::nullopt};
      send_on(conn, m, mid);
    }
    Message reply = await_event(mid, budget);
    std::lock_guard lk(mx_);
    TrustOutcome out;
    auto it = flows_.find(mid);
    if (it != flows_.end()) {
      out.report = it->second.report;
      flows_.erase(it);
    }
    out.trusted = out.report && out.report->accepted();
    if (reply.type == MessageType::problem_report)
      out.detail = reply.body.value("detail", "");
    return out;
  }

  // --- federated-learning hop ------------------------------------------------

  TrainOutcome send_train_request(const std::string& conn_id, const std::string& model_text,
                                  const AwaitBudget& budget = {}) {
    std::string mid;
    {
      std::lock_guard lk(mx_);
      Connection& conn = require_complete(conn_id);
      if (enforce_local_trust_ && !conn.trusted)
        throw DeliveryError("refusing to send a train request on untrusted connection " +
                            conn_id);
      audit_.push_back({"train_request_sent", conn_id, conn.trusted, ""});
      mid = fresh_mid();
      Flow f;
      f.kind = FlowKind::train;
      f.connection_id = conn_id;
      flows_[mid] = std::move(f);
      Message m{MessageType::train_request, json{{"model", model_text}}, std::nullopt};
      send_on(conn, m, mid);
    }
    Message reply = await_event(mid, budget);
    std::lock_guard lk(mx_);
    flows_.erase(mid);
    if (reply.type == MessageType::train_result)
      return TrainOutcome{true, reply.body.value("model", ""), "", ""};
    return TrainOutcome{false, "", reply.body.value("code", ""),
                        reply.body.value("detail", "")};
  }

  // --- inbound ---------------------------------------------------------------

  void deliver(const std::string& wire) {
    if (worker_running_.load()) {
      {
        std::lock_guard lk(inbox_mx_);
        inbox_.push_back(wire);
      }
      inbox_cv_.notify_one();
    } else {
      process_wire(wire);
    }
  }

  void start_worker() {
    bool expected = false;
    if (!worker_running_.compare_exchange_strong(expected, true)) return;
    worker_ = std::thread([this] { worker_main(); });
  }

  void stop_worker() {
    if (!worker_running_.exchange(false)) return;
    inbox_cv_.notify_all();
    if (worker_.joinable()) worker_.join();
  }

  // --- introspection (harness, reports, tests) -------------------------------

  Connection connection(const std::string& conn_id) const {
    std::lock_guard lk(mx_);
    return conns_.at(conn_id);
  }

  std::vector<Connection> connections() const {
    std::lock_guard lk(mx_);
    std::vector<Connection> out;
    for (const auto& id : conn_order_) out.push_back(conns_.at(id));
    return out;
  }

  std::optional<std::string> find_connection_by_their_did(const Did& did) const {
    std::lock_guard lk(mx_);
    for (const auto& id : conn_order_)
      if (conns_.at(id).their_did == did) return id;
    return std::nullopt;
  }

  std::size_t credential_count() const {
    std::lock_guard lk(mx_);
    return credentials_.size();
  }

  std::vector<std::pair<std::string, VerificationReport>> verification_log() const {
    std::lock_guard lk(mx_);
    return verification_log_;
  }

  std::vector<AuditRecord> audit_log() const {
    std::lock_guard lk(mx_);
    return audit_;
  }

  AgentCounters counters() const {
    std::lock_guard lk(mx_);
    return counters_;
  }

  // True when nothing is queued and the worker is between messages. Once every
  // agent is idle at once, no envelope exists anywhere in the system: a send
  // only ever happens inside someone's processing, which idle() excludes.
  bool idle() const {
    std::lock_guard lk(inbox_mx_);
    return inbox_.empty() && !worker_busy_;
  }

  std::uint64_t train_requests_processed() const {
    std::lock_guard lk(mx_);
    return train_requests_processed_;
  }

  std::uint64_t train_requests_refused() const {
    std::lock_guard lk(mx_);
    return train_requests_refused_;
  }

 private:
  enum class FlowKind { connect, issue_offer, trust, train };

  struct Flow {
    FlowKind kind = FlowKind::connect;
    std::string connection_id;
    std::string schema_id;                         // issue_offer
    std::map<std::string, std::string> attributes; // issue_offer
    ProofRequest proof_request;                    // trust
    std::optional<VerificationReport> report;      // trust
    std::deque<Message> events;
  };

  struct InviteInfo {
    crypto::KeyPair keys;
    Did did;
    bool used = false;
  };

  struct TrainerContext {
    fedlearn::Dataset data;
    fedlearn::TrainConfig config;
  };

  static void set_state(Connection& conn, ConnState s) {
    conn.state = s;
    conn.state_history.push_back(s);
  }

  Connection& require_complete(const std::string& conn_id) {
    auto it = conns_.find(conn_id);
    if (it == conns_.end()) throw NotFoundError("unknown connection " + conn_id);
    if (it->second.state != ConnState::complete)
      throw ConfigError("connection " + conn_id + " is not complete");
    return it->second;
  }

  std::string fresh_mid() { return rng_.hex(8); }  // fixed-length 16-hex ids

  void send_from(const Did& from, const crypto::KeyPair& keys, const DidDocument& to,
                 const Message& m, std::string mid) {
    Envelope env = pack(m, keys, from, to, std::move(mid), rng_);
    const std::string wire = env.wire();
    ++counters_.messages_sent;
    counters_.bytes_sent += wire.size();
    transport_->send(to.endpoint, wire);
  }

  void send_on(Connection& conn, const Message& m, std::string mid = "") {
    if (mid.empty()) mid = fresh_mid();
    send_from(conn.my_did, conn.my_keys, conn.their_document, m, std::move(mid));
  }

  void reply_problem(Connection& conn, const std::string& thid, const std::string& code,
                     const std::string& detail) {
    Message m{MessageType::problem_report, json{{"code", code}, {"detail", detail}}, thid};
    send_on(conn, m);
  }

  void drop_envelope(std::size_t size) {
    ++counters_.envelopes_dropped;
    counters_.bytes_dropped += size;
  }

  void push_event(const std::string& flow_id, Message m) {
    auto it = flows_.find(flow_id);
    if (it == flows_.end()) return;  // stray terminal message
    it->second.events.push_back(std::move(m));
  }

  void worker_main() {
    for (;;) {
      std::string wire;
      {
        std::unique_lock lk(inbox_mx_);
        inbox_cv_.wait(lk, [&] { return !inbox_.empty() || !worker_running_.load(); });
        if (inbox_.empty()) {
          if (!worker_running_.load()) return;
          continue;
        }
        wire = std::move(inbox_.front());
        inbox_.pop_front();
        worker_busy_ = true;  // stays set until process_wire finishes, so
                              // idle() never sees an empty inbox mid-message
      }
      process_wire(wire);
      {
        std::lock_guard lk(inbox_mx_);
        worker_busy_ = false;
      }
    }
  }

  // Awaits the next event on a flow. With a pull transport this drives global
  // delivery; an empty queue with no event means the flow can never finish.
  Message await_event(const std::string& flow_id, const AwaitBudget& budget) {
    const auto deadline =
        std::chrono::steady_clock::now() + std::chrono::milliseconds(budget.timeout_ms);
    int steps = 0;
    for (;;) {
      {
        std::lock_guard lk(mx_);
        auto it = flows_.find(flow_id);
        if (it == flows_.end()) throw Error("awaiting an unknown flow");
        if (!it->second.events.empty()) {
          Message m = std::move(it->second.events.front());
          it->second.events.pop_front();
          return m;
        }
      }
      if (transport_->pump_one()) {
        if (++steps > budget.max_steps)
          throw TimeoutError("flow exceeded its delivery-step budget");
        continue;
      }
      if (worker_running_.load()) {
        if (std::chrono::steady_clock::now() >= deadline)
          throw TimeoutError("no reply within " + std::to_string(budget.timeout_ms) + " ms");
        std::this_thread::sleep_for(std::chrono::milliseconds(1));
      } else {
        throw TimeoutError("flow stalled: nothing left to deliver");
      }
    }
  }

  void process_wire(const std::string& wire) {
    Envelope env;
    try {
      env = Envelope::from_wire(wire);
    } catch (const Error&) {
      std::lock_guard lk(mx_);
      drop_envelope(wire.size());
      return;
    }
    std::lock_guard lk(mx_);
    const std::string to = env.to.str();
    if (auto inv = invite_route_.find(to); inv != invite_route_.end()) {
      handle_first_contact(env, inv->second, wire.size());
      return;
    }
    auto rt = route_.find(to);
    if (rt == route_.end()) {
      drop_envelope(wire.size());
      return;
    }
    Connection& conn = conns_.at(rt->second);
    Message msg;
    try {
      msg = unpack(env, conn.my_keys, conn.their_document);
    } catch (const UnsupportedTypeError&) {
      // Verified and decrypted, but the type is unknown: count it and answer.
      ++counters_.messages_received;
      counters_.bytes_received += wire.size();
      reply_problem(conn, env.thread_id ? *env.thread_id : env.message_id,
                    kProblemUnsupportedType, "message type not supported");
      return;
    } catch (const Error&) {
      // IntegrityError, ConfidentialityError or malformed payload: drop.
      drop_envelope(wire.size());
      return;
    }
    ++counters_.messages_received;
    counters_.bytes_received += wire.size();
    dispatch(conn, msg, env.message_id);
  }

  void handle_first_contact(const Envelope& env, const std::string& token,
                            std::size_t wire_size) {
    InviteInfo& invite = invites_.at(token);
    Message msg;
    DidDocument requester_doc;
    try {
      std::tie(msg, requester_doc) = unpack_first_contact(env, invite.keys);
    } catch (const Error&) {
      drop_envelope(wire_size);
      return;
    }
    ++counters_.messages_received;
    counters_.bytes_received += wire_size;
    const std::string presented = msg.body.value("token", std::string());
    if (presented != token || invite.used) {
      Message m{MessageType::problem_report,
                json{{"code", kProblemInternal},
                     {"detail", invite.used ? "invitation already used"
                                             : "invitation token mismatch"}},
                env.message_id};
      send_from(invite.did, invite.keys, requester_doc, m, fresh_mid());
      return;
    }
    invite.used = true;
    crypto::KeyPair keys = crypto::generate_keypair(rng_.bytes(crypto::kSeedBytes));
    auto [did, doc] = create_peer_did(keys, endpoint_);
    Connection conn;
    conn.connection_id = "c-" + rng_.hex(6);
    conn.my_did = did;
    conn.my_keys = keys;
    conn.their_did = requester_doc.id;
    conn.their_document = requester_doc;
    set_state(conn, ConnState::invited);
    set_state(conn, ConnState::requested);
    peers_.put(requester_doc);
    route_[did.str()] = conn.connection_id;
    conn_order_.push_back(conn.connection_id);
    Connection& stored = conns_[conn.connection_id] = std::move(conn);
    // The response travels from the invitation identity — the only key the
    // requester can verify yet — and carries the fresh per-connection document.
    Message resp{MessageType::did_exchange_response, json{{"doc", doc.to_json()}},
                 env.message_id};
    send_from(invite.did, invite.keys, requester_doc, resp, fresh_mid());
    set_state(stored, ConnState::complete);
  }

  void dispatch(Connection& conn, const Message& msg, const std::string& mid) {
    const std::string flow_id = msg.thread_id.value_or(mid);
    switch (msg.type) {
      case MessageType::did_exchange_request:
        reply_problem(conn, flow_id, kProblemInternal,
                      "unexpected connection request on an established connection");
        break;

      case MessageType::did_exchange_response: {
        if (conn.state != ConnState::requested) {
          reply_problem(conn, flow_id, kProblemInternal,
                        "connection is not awaiting a response");
          break;
        }
        DidDocument doc;
        try {
          doc = DidDocument::from_json(msg.body.at("doc"));
        } catch (const std::exception&) {
          reply_problem(conn, flow_id, kProblemInternal, "malformed response document");
          break;
        }
        if (!doc.self_consistent()) {
          reply_problem(conn, flow_id, kProblemInternal,
                        "response document violates its key binding");
          break;
        }
        conn.their_did = doc.id;
        conn.their_document = doc;
        peers_.put(doc);
        set_state(conn, ConnState::complete);
        push_event(flow_id, msg);
        break;
      }

      case MessageType::credential_offer:
        handle_credential_offer(conn, msg, flow_id);
        break;
      case MessageType::credential_request:
        handle_credential_request(conn, msg, flow_id);
        break;
      case MessageType::credential_issue:
        handle_credential_issue(conn, msg, flow_id);
        break;
      case MessageType::proof_request:
        handle_proof_request(conn, msg, flow_id);
        break;
      case MessageType::proof_presentation:
        handle_proof_presentation(conn, msg, flow_id);
        break;
      case MessageType::train_request:
        handle_train_request(conn, msg, flow_id);
        break;

      case MessageType::train_result:
      case MessageType::ack:
      case MessageType::problem_report:
        push_event(flow_id, msg);
        break;
    }
  }

  void handle_credential_offer(Connection& conn, const Message& msg,
                               const std::string& flow_id) {
    const std::string schema_id = msg.body.value("schema_id", std::string());
    auto schema = registry_->schema(schema_id);
    if (!auto_accept_offers_ || !schema) {
      Message a{MessageType::ack,
                json{{"status", "declined"},
                     {"reason", schema ? std::string("offers are not accepted")
                                        : "unknown schema " + schema_id}},
                flow_id};
      send_on(conn, a);
      return;
    }
    auto [request, blinding] = request_credential(link_secret_, *schema, rng_);
    pending_bindings_[flow_id] = blinding;
    Message m{MessageType::credential_request, request.to_json(), flow_id};
    send_on(conn, m);
  }

  void handle_credential_request(Connection& conn, const Message& msg,
                                 const std::string& flow_id) {
    auto it = flows_.find(flow_id);
    if (it == flows_.end() || it->second.kind != FlowKind::issue_offer ||
        it->second.connection_id != conn.connection_id) {
      reply_problem(conn, flow_id, kProblemInternal, "no open offer for this thread");
      return;
    }
    if (!public_keys_) {
      reply_problem(conn, flow_id, kProblemInternal, "agent has no issuing identity");
      return;
    }
    try {
      CredentialRequest request = CredentialRequest::from_json(msg.body);
      if (request.schema_id != it->second.schema_id)
        throw SchemaViolationError("request schema does not match the offer");
      auto schema = registry_->schema(request.schema_id);
      if (!schema) throw NotFoundError("unknown schema " + request.schema_id);
      Credential cred = issue(*public_keys_, *public_did_, *schema, it->second.attributes,
                              request.commitment);
      Message m{MessageType::credential_issue, json{{"credential", cred.to_json()}}, flow_id};
      send_on(conn, m);
    } catch (const Error& e) {
      reply_problem(conn, flow_id, kProblemInternal, e.what());
    }
  }

  void handle_credential_issue(Connection& conn, const Message& msg,
                               const std::string& flow_id) {
    auto binding = pending_bindings_.find(flow_id);
    if (binding == pending_bindings_.end()) {
      reply_problem(conn, flow_id, kProblemInternal, "no pending credential request");
      return;
    }
    try {
      Credential cred = Credential::from_json(msg.body.at("credential"));
      const std::string canonical = canonical_credential_encoding(
          cred.schema_id, cred.issuer_did, cred.attributes, cred.link_commitment);
      auto issuer_doc = registry_->resolve_did(cred.issuer_did);
      const bool signature_ok =
          issuer_doc &&
          crypto::verify(issuer_doc->verification_key, canonical, cred.issuer_signature) &&
          crypto::digest(canonical) == cred.credential_hash;
      if (!signature_ok) {
        pending_bindings_.erase(binding);
        reply_problem(conn, flow_id, kProblemInternal,
                      "issuer signature rejected; credential discarded");
        return;
      }
      credentials_[to_hex(cred.credential_hash)] =
          StoredCredential{std::move(cred), binding->second};
      pending_bindings_.erase(binding);
      Message a{MessageType::ack, json{{"status", "stored"}}, flow_id};
      send_on(conn, a);
    } catch (const Error& e) {
      pending_bindings_.erase(flow_id);
      reply_problem(conn, flow_id, kProblemInternal, e.what());
    }
  }

  void handle_proof_request(Connection& conn, const Message& msg,
                            const std::string& flow_id) {
    try {
      ProofRequest request = ProofRequest::from_json(msg.body);
      const StoredCredential* match = nullptr;
      for (const auto& [_, sc] : credentials_)
        if (sc.credential.schema_id == request.schema_id) {
          match = &sc;
          break;
        }
      if (!match) {
        reply_problem(conn, flow_id, kProblemProofRejected,
                      "no credential held for schema " + request.schema_id);
        return;
      }
      Presentation pres = present(match->credential, link_secret_, match->blinding,
                                  request, rng_);
      Message m{MessageType::proof_presentation, pres.to_json(), flow_id};
      send_on(conn, m);
    } catch (const CannotSatisfyError& e) {
      reply_problem(conn, flow_id, kProblemProofRejected, e.what());
    } catch (const Error& e) {
      reply_problem(conn, flow_id, kProblemInternal, e.what());
    }
  }

  void handle_proof_presentation(Connection& conn, const Message& msg,
                                 const std::string& flow_id) {
    auto it = flows_.find(flow_id);
    if (it == flows_.end() || it->second.kind != FlowKind::trust ||
        it->second.connection_id != conn.connection_id) {
      reply_problem(conn, flow_id, kProblemInternal, "no open proof request for this thread");
      return;
    }
    try {
      Presentation pres = Presentation::from_json(msg.body);
      VerificationReport report =
          verify_presentation(pres, it->second.proof_request, *registry_);
      it->second.report = report;
      verification_log_.emplace_back(conn.connection_id, report);
      if (report.accepted()) {
        conn.trusted = true;
        conn.verified_attributes.clear();
        for (const auto& name : it->second.proof_request.disclosed_attributes) {
          auto attr = std::find_if(pres.credential.attributes.begin(),
                                   pres.credential.attributes.end(),
                                   [&](const auto& kv) { return kv.first == name; });
          if (attr != pres.credential.attributes.end())
            conn.verified_attributes.push_back(*attr);
        }
        Message a{MessageType::ack, json{{"status", "trusted"}}, flow_id};
        send_on(conn, a);
      } else {
        std::string detail;
        for (const auto& c : report.checks)
          if (!c.passed) detail += (detail.empty() ? "" : "; ") + c.name + ": " + c.reason;
        reply_problem(conn, flow_id, kProblemProofRejected, detail);
      }
      push_event(flow_id, msg);
    } catch (const Error& e) {
      reply_problem(conn, flow_id, kProblemProofRejected,
                    std::string("malformed presentation: ") + e.what());
      push_event(flow_id, msg);
    }
  }

  void handle_train_request(Connection& conn, const Message& msg,
                            const std::string& flow_id) {
    audit_.push_back({"train_request_received", conn.connection_id, conn.trusted, ""});
    if (!conn.trusted) {
      ++train_requests_refused_;
      reply_problem(conn, flow_id, kProblemUntrustedConnection,
                    "connection is not trusted for training");
      return;
    }
    if (!trainer_) {
      reply_problem(conn, flow_id, kProblemInternal, "agent holds no training data");
      return;
    }
    try {
      fedlearn::ModelParams model =
          fedlearn::deserialize_model(msg.body.value("model", std::string()));
      fedlearn::ModelParams next =
          fedlearn::train_local(model, trainer_->data, trainer_->config);
      ++train_requests_processed_;
      audit_.push_back({"train_request_processed", conn.connection_id, conn.trusted, ""});
      Message m{MessageType::train_result,
                json{{"model", fedlearn::serialize_model(next)}}, flow_id};
      send_on(conn, m);
    } catch (const Error& e) {
      reply_problem(conn, flow_id, kProblemInternal, e.what());
    }
  }

  // --- state ------------------------------------------------------------------

  std::string name_;
  std::string endpoint_;
  DetRng rng_;
  Transport* transport_;
  Registry* registry_;

  mutable std::mutex mx_;
  LinkSecret link_secret_;
  std::optional<crypto::KeyPair> public_keys_;
  std::optional<Did> public_did_;
  std::optional<DidDocument> public_document_;
  PeerStore peers_;
  std::map<std::string, StoredCredential> credentials_;  // keyed by hash hex
  std::map<std::string, Connection> conns_;
  std::vector<std::string> conn_order_;
  std::map<std::string, std::string> route_;        // my per-connection DID -> conn id
  std::map<std::string, InviteInfo> invites_;       // token -> invitation identity
  std::map<std::string, std::string> invite_route_; // invitation DID -> token
  std::map<std::string, Flow> flows_;
  std::map<std::string, crypto::Scalar> pending_bindings_;
  std::vector<std::pair<std::string, VerificationReport>> verification_log_;
  std::vector<AuditRecord> audit_;
  AgentCounters counters_;
  std::uint64_t train_requests_processed_ = 0;
  std::uint64_t train_requests_refused_ = 0;
  bool auto_accept_offers_ = true;
  bool enforce_local_trust_ = true;
  std::optional<TrainerContext> trainer_;

  std::atomic<bool> worker_running_{false};
  std::thread worker_;
  mutable std::mutex inbox_mx_;
  std::condition_variable inbox_cv_;
  std::deque<std::string> inbox_;
  bool worker_busy_ = false;  // guarded by inbox_mx_
};

}  // namespace fedtrust
