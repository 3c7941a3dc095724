#pragma once

// Scenario harness: builds a registry, transport and agents from a
// declarative JSON config, drives the trust-establishment and federated-
// learning phases, collects metrics and verification evidence, evaluates the
// run's own assertions, and renders the result as JSON (byte-stable) or as a
// table. Given the same config and seed, a run produces an identical report.

#include <algorithm>
#include <cstdio>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "agents.hpp"
#include "fedlearn.hpp"
#include "http_transport.hpp"
#include "registry.hpp"
#include "transport.hpp"

namespace fedtrust::harness {

enum class AgentRole {
  nhs_trust,
  regulator,
  hospital,
  researcher,
  malicious_no_cred,
  malicious_self_signed,
};

inline std::string_view to_string(AgentRole r) {
  switch (r) {
    case AgentRole::nhs_trust: return "nhs_trust";
    case AgentRole::regulator: return "regulator";
    case AgentRole::hospital: return "hospital";
    case AgentRole::researcher: return "researcher";
    case AgentRole::malicious_no_cred: return "malicious_no_cred";
    case AgentRole::malicious_self_signed: return "malicious_self_signed";
  }
  return "unknown";
}

inline AgentRole role_from_string(std::string_view s) {
  if (s == "nhs_trust") return AgentRole::nhs_trust;
  if (s == "regulator") return AgentRole::regulator;
  if (s == "hospital") return AgentRole::hospital;
  if (s == "researcher") return AgentRole::researcher;
  if (s == "malicious_no_cred") return AgentRole::malicious_no_cred;
  if (s == "malicious_self_signed") return AgentRole::malicious_self_signed;
  throw ConfigError("unknown agent role: " + std::string(s));
}

inline bool is_issuer_role(AgentRole r) {
  return r == AgentRole::nhs_trust || r == AgentRole::regulator ||
         r == AgentRole::malicious_self_signed;
}

inline bool is_adversary_role(AgentRole r) {
  return r == AgentRole::malicious_no_cred || r == AgentRole::malicious_self_signed;
}

struct AgentSpec {
  std::string name;
  AgentRole role = AgentRole::hospital;
  std::string endpoint;
};

struct SchemaSpec {
  CredentialSchema schema;
  std::vector<std::string> issuer_agents;  // agents granted issuance rights
};

// One issuance action. When issuer == holder the agent certifies itself
// (the self-signed adversary); otherwise the issuer connects and offers.
struct IssuanceRule {
  std::string issuer_agent;
  std::string schema_id;
  std::string holder_role;
  std::map<std::string, std::string> attributes;  // "name" defaults to the holder's name
};

struct TrustRule {
  AgentRole verifier_role = AgentRole::researcher;
  std::string schema_id;
  std::string required_issuer_agent;
  std::vector<std::pair<std::string, std::string>> constraints;
};

struct DatasetSpec {
  std::string kind = "synthetic";  // "synthetic" | "csv"
  std::size_t rows = 1000;
  std::size_t features = 10;
  double separation = 3.0;
  std::uint64_t seed = 1;
  std::uint64_t partition_seed = 1;
  std::string csv_path;
  std::vector<double> label_flip_rates;  // optional, per partition
};

struct AssertionSpec {
  std::optional<double> min_final_accuracy;
  bool require_improvement = false;
};

struct ScenarioConfig {
  std::string name = "scenario";
  std::uint64_t seed = 1;
  std::string transport = "mem";  // "mem" | "socket"
  std::vector<AgentSpec> agents;
  std::vector<SchemaSpec> schemas;
  std::vector<IssuanceRule> issuance;
  std::vector<TrustRule> trust;
  DatasetSpec dataset;
  fedlearn::TrainConfig train;
  AwaitBudget budget;
  AssertionSpec assertions;

  const AgentSpec& researcher() const {
    for (const auto& a : agents)
      if (a.role == AgentRole::researcher) return a;
    throw ConfigError("no researcher in config");
  }

  void validate() const {
    if (name.empty()) throw ConfigError("scenario name must be non-empty");
    if (transport != "mem" && transport != "socket")
      throw ConfigError("transport must be 'mem' or 'socket'");
    std::set<std::string> names, endpoints;
    std::size_t researchers = 0, hospitals = 0;
    for (const auto& a : agents) {
      if (a.name.empty() || a.endpoint.empty())
        throw ConfigError("agents need non-empty names and endpoints");
      if (!names.insert(a.name).second) throw ConfigError("duplicate agent name " + a.name);
      if (!endpoints.insert(a.endpoint).second)
        throw ConfigError("duplicate endpoint " + a.endpoint);
      if (a.role == AgentRole::researcher) ++researchers;
      if (a.role == AgentRole::hospital) ++hospitals;
    }
    if (researchers != 1) throw ConfigError("config must name exactly one researcher");
    if (hospitals < 1) throw ConfigError("config must name at least one hospital");
    std::set<std::string> schema_ids;
    for (const auto& s : schemas) {
      s.schema.validate();
      schema_ids.insert(s.schema.schema_id());
      for (const auto& issuer : s.issuer_agents)
        if (!names.contains(issuer))
          throw ConfigError("schema issuer " + issuer + " is not a configured agent");
    }
    for (const auto& r : issuance) {
      if (!names.contains(r.issuer_agent))
        throw ConfigError("issuance rule names unknown agent " + r.issuer_agent);
      if (!schema_ids.contains(r.schema_id))
        throw ConfigError("issuance rule names unknown schema " + r.schema_id);
      role_from_string(r.holder_role);
    }
    for (const auto& r : trust) {
      if (!schema_ids.contains(r.schema_id))
        throw ConfigError("trust rule names unknown schema " + r.schema_id);
      if (!names.contains(r.required_issuer_agent))
        throw ConfigError("trust rule names unknown issuer " + r.required_issuer_agent);
    }
    if (dataset.kind != "synthetic" && dataset.kind != "csv")
      throw ConfigError("dataset.kind must be 'synthetic' or 'csv'");
    if (dataset.kind == "synthetic" && (dataset.rows == 0 || dataset.features == 0))
      throw ConfigError("synthetic dataset needs rows >= 1 and features >= 1");
    if (dataset.kind == "csv" && dataset.csv_path.empty())
      throw ConfigError("csv dataset needs a path");
    for (double r : dataset.label_flip_rates)
      if (r < 0.0 || r > 1.0) throw ConfigError("label flip rates must lie in [0, 1]");
    train.validate();
    if (budget.max_steps < 1 || budget.timeout_ms < 1)
      throw ConfigError("await budget must be positive");
  }

  static ScenarioConfig from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    ScenarioConfig c;
    c.name = j.value("name", c.name);
    c.seed = j.value("seed", c.seed);
    c.transport = j.value("transport", c.transport);
    if (!j.contains("agents") || !j.at("agents").is_array())
      throw ConfigError("config needs an agents array");
    for (const auto& a : j.at("agents"))
      c.agents.push_back(AgentSpec{a.at("name").get<std::string>(),
                                   role_from_string(a.at("role").get<std::string>()),
                                   a.at("endpoint").get<std::string>()});
    for (const auto& s : j.value("schemas", json::array())) {
      SchemaSpec spec;
      spec.schema.name = s.at("name").get<std::string>();
      spec.schema.version = s.at("version").get<std::string>();
      for (const auto& attr : s.at("attributes"))
        spec.schema.attribute_names.push_back(attr.get<std::string>());
      for (const auto& issuer : s.value("issuers", json::array()))
        spec.issuer_agents.push_back(issuer.get<std::string>());
      c.schemas.push_back(std::move(spec));
    }
    for (const auto& r : j.value("issuance", json::array())) {
      IssuanceRule rule;
      rule.issuer_agent = r.at("issuer").get<std::string>();
      rule.schema_id = r.at("schema").get<std::string>();
      rule.holder_role = r.at("holder_role").get<std::string>();
      const json attrs = r.value("attributes", json::object());
      for (const auto& [k, v] : attrs.items()) rule.attributes[k] = v.get<std::string>();
      c.issuance.push_back(std::move(rule));
    }
    for (const auto& r : j.value("trust", json::array())) {
      TrustRule rule;
      rule.verifier_role = role_from_string(r.at("verifier_role").get<std::string>());
      rule.schema_id = r.at("schema").get<std::string>();
      rule.required_issuer_agent = r.at("required_issuer").get<std::string>();
      const json constraints = r.value("constraints", json::object());
      for (const auto& [k, v] : constraints.items())
        rule.constraints.emplace_back(k, v.get<std::string>());
      c.trust.push_back(std::move(rule));
    }
    if (j.contains("dataset")) {
      const auto& d = j.at("dataset");
      c.dataset.kind = d.value("type", c.dataset.kind);
      c.dataset.rows = d.value("rows", c.dataset.rows);
      c.dataset.features = d.value("features", c.dataset.features);
      c.dataset.separation = d.value("separation", c.dataset.separation);
      c.dataset.seed = d.value("seed", c.dataset.seed);
      c.dataset.partition_seed = d.value("partition_seed", c.dataset.partition_seed);
      c.dataset.csv_path = d.value("path", c.dataset.csv_path);
      for (const auto& r : d.value("label_flip_rates", json::array()))
        c.dataset.label_flip_rates.push_back(r.get<double>());
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
      c.train.epochs = t.value("epochs", c.train.epochs);
      c.train.threshold = t.value("threshold", c.train.threshold);
    }
    if (j.contains("budget")) {
      c.budget.max_steps = j.at("budget").value("max_steps", c.budget.max_steps);
      c.budget.timeout_ms = j.at("budget").value("timeout_ms", c.budget.timeout_ms);
    }
    if (j.contains("assertions")) {
      const auto& a = j.at("assertions");
      if (a.contains("min_final_accuracy"))
        c.assertions.min_final_accuracy = a.at("min_final_accuracy").get<double>();
      c.assertions.require_improvement =
          a.value("require_improvement", c.assertions.require_improvement);
    }
    return c;
  }
};

// Cumulative per-agent byte counts captured after each training batch.
struct BandwidthSnapshot {
  int batch = 0;
  std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> by_agent;  // sent, received
};

struct RunReport {
  json doc;
  bool passed = false;
};

// Blocks until no envelope exists anywhere in the system: the pull
// transport's queue is drained and every worker is between messages. Counter
// snapshots taken without this can race the tail delivery of a phase (e.g.
// the final trust acknowledgement) and differ across transports.
inline void quiesce(Transport& transport,
                    const std::vector<std::unique_ptr<Agent>>& agents) {
  for (;;) {
    while (transport.pump_one()) {
    }
    bool all_idle = true;
    for (const auto& agent : agents) all_idle = all_idle && agent->idle();
    if (all_idle && !transport.pump_one()) return;
    std::this_thread::yield();
  }
}

inline void snapshot_bandwidth(std::vector<BandwidthSnapshot>& snapshots, int batch,
                               const std::vector<std::unique_ptr<Agent>>& agents) {
  BandwidthSnapshot snap;
  snap.batch = batch;
  for (const auto& agent : agents) {
    AgentCounters c = agent->counters();
    snap.by_agent[agent->name()] = {c.bytes_sent, c.bytes_received};
  }
  snapshots.push_back(std::move(snap));
}

struct ScenarioAssertion {
  std::string name;
  bool passed = false;
  std::string detail;
};

inline RunReport run_scenario(const ScenarioConfig& config) {
  config.validate();

  // --- infrastructure -------------------------------------------------------
  Registry registry;
  std::unique_ptr<Transport> transport;
  const bool socket_mode = config.transport == "socket";
  if (socket_mode)
    transport = std::make_unique<HttpTransport>();
  else
    transport = std::make_unique<InMemoryBus>();

  std::vector<std::unique_ptr<Agent>> agents;
  std::map<std::string, Agent*> by_name;
  std::map<std::string, AgentRole> role_of;
  for (const auto& spec : config.agents) {
    auto agent = std::make_unique<Agent>(spec.name, spec.endpoint,
                                         derive_seed(config.seed, "agent:" + spec.name),
                                         *transport, registry);
    by_name[spec.name] = agent.get();
    role_of[spec.name] = spec.role;
    agents.push_back(std::move(agent));
  }
  for (auto& agent : agents) {
    Agent* a = agent.get();
    transport->attach(a->endpoint(), [a](const std::string& wire) { a->deliver(wire); });
    if (socket_mode) a->start_worker();
  }
  // Adversaries bypass their own sender-side gate; the defender's check is
  // the behaviour under test.
  for (const auto& spec : config.agents)
    if (is_adversary_role(spec.role)) by_name[spec.name]->set_enforce_local_trust(false);

  // --- registry bootstrap ----------------------------------------------------
  for (const auto& spec : config.agents) {
    if (is_issuer_role(spec.role)) {
      Agent* a = by_name[spec.name];
      a->create_public_identity();
      registry.register_issuer(a->public_document());
    }
  }
  for (const auto& s : config.schemas) {
    registry.register_schema(s.schema);
    for (const auto& issuer : s.issuer_agents)
      registry.authorize(s.schema.schema_id(), *by_name[issuer]->public_did());
  }

  // --- data -----------------------------------------------------------------
  fedlearn::Dataset full = config.dataset.kind == "csv"
                               ? fedlearn::load_csv(config.dataset.csv_path)
                               : fedlearn::make_synthetic(config.dataset.rows,
                                                          config.dataset.features,
                                                          config.dataset.separation,
                                                          config.dataset.seed);
  std::vector<std::string> hospital_names;
  for (const auto& spec : config.agents)
    if (spec.role == AgentRole::hospital) hospital_names.push_back(spec.name);
  std::vector<fedlearn::Dataset> parts =
      fedlearn::partition(full, hospital_names.size() + 1, config.dataset.partition_seed);
  for (std::size_t p = 0; p < config.dataset.label_flip_rates.size() && p < parts.size(); ++p) {
    DetRng flip_rng(derive_seed(config.dataset.seed, "flip:" + std::to_string(p)));
    fedlearn::flip_labels(parts[p], config.dataset.label_flip_rates[p], flip_rng);
  }
  for (std::size_t h = 0; h < hospital_names.size(); ++h)
    by_name[hospital_names[h]]->set_trainer(parts[h], config.train);
  const fedlearn::Dataset& validation = parts.back();

  // --- credential issuance ----------------------------------------------------
  // Issuers invite each holder of the rule's role and run the offer flow;
  // a rule whose issuer is its own holder is the self-certification path.
  json issuance_log = json::array();
  for (const auto& rule : config.issuance) {
    Agent* issuer = by_name[rule.issuer_agent];
    const AgentRole holder_role = role_from_string(rule.holder_role);
    for (const auto& spec : config.agents) {
      if (spec.role != holder_role) continue;
      std::map<std::string, std::string> attributes = rule.attributes;
      if (!attributes.contains("name")) attributes["name"] = spec.name;
      if (spec.name == rule.issuer_agent) {
        by_name[spec.name]->issue_to_self(rule.schema_id, attributes);
        issuance_log.push_back(json{{"issuer", rule.issuer_agent},
                                    {"holder", spec.name},
                                    {"schema", rule.schema_id},
                                    {"stored", true},
                                    {"self_issued", true}});
        continue;
      }
      Agent* holder = by_name[spec.name];
      Invitation inv = issuer->create_invitation();
      holder->connect(inv, config.budget);
      auto issuer_conn =
          issuer->find_connection_by_their_did(holder->connections().back().my_did);
      IssueOutcome outcome = issuer->offer_credential(*issuer_conn, rule.schema_id,
                                                      attributes, config.budget);
      issuance_log.push_back(json{{"issuer", rule.issuer_agent},
                                  {"holder", spec.name},
                                  {"schema", rule.schema_id},
                                  {"stored", outcome.stored},
                                  {"self_issued", false}});
    }
  }

  // --- trust establishment ------------------------------------------------------
  Agent* researcher = by_name[config.researcher().name];
  auto policy_for = [&](AgentRole verifier_role) -> std::optional<TrustPolicy> {
    for (const auto& rule : config.trust) {
      if (rule.verifier_role != verifier_role) continue;
      Agent* required = by_name[rule.required_issuer_agent];
      if (!required->public_did()) continue;
      return TrustPolicy{rule.schema_id, *required->public_did(), rule.constraints};
    }
    return std::nullopt;
  };

  struct Pairing {
    std::string agent;            // counterparty name
    AgentRole role;
    std::string researcher_conn;  // connection id on the researcher
    std::string agent_conn;       // connection id on the counterparty
    bool researcher_trusts = false;
    bool agent_trusts = false;
  };
  std::vector<Pairing> pairings;

  for (const auto& spec : config.agents) {
    if (spec.role != AgentRole::hospital && !is_adversary_role(spec.role)) continue;
    Agent* counterparty = by_name[spec.name];
    Invitation inv = researcher->create_invitation();
    Pairing pairing;
    pairing.agent = spec.name;
    pairing.role = spec.role;
    pairing.agent_conn = counterparty->connect(inv, config.budget);
    pairing.researcher_conn = *researcher->find_connection_by_their_did(
        counterparty->connection(pairing.agent_conn).my_did);

    if (auto policy = policy_for(AgentRole::researcher)) {
      TrustOutcome out =
          researcher->establish_trust(pairing.researcher_conn, *policy, config.budget);
      pairing.researcher_trusts = out.trusted;
    }
    // Hospitals verify back; adversaries skip verification entirely.
    if (spec.role == AgentRole::hospital) {
      if (auto policy = policy_for(AgentRole::hospital)) {
        TrustOutcome out =
            counterparty->establish_trust(pairing.agent_conn, *policy, config.budget);
        pairing.agent_trusts = out.trusted;
      }
    }
    pairings.push_back(std::move(pairing));
  }

  // --- adversary probes -----------------------------------------------------
  // Every adversary fires a train request at the researcher despite holding no
  // trust; the defender must answer with an untrusted_connection report.
  json probe_log = json::array();
  {
    fedlearn::ModelParams probe_model;
    probe_model.weights.assign(full.d, 0.0);
    const std::string probe_text = fedlearn::serialize_model(probe_model);
    for (const auto& pairing : pairings) {
      if (!is_adversary_role(pairing.role)) continue;
      Agent* adversary = by_name[pairing.agent];
      TrainOutcome out =
          adversary->send_train_request(pairing.agent_conn, probe_text, config.budget);
      probe_log.push_back(json{{"agent", pairing.agent},
                               {"accepted", out.ok},
                               {"problem_code", out.problem_code},
                               {"detail", out.detail}});
    }
  }

  // --- federated learning -----------------------------------------------------
  std::vector<std::string> fl_hospitals;
  std::vector<std::string> fl_conns;
  for (const auto& pairing : pairings) {
    if (pairing.role != AgentRole::hospital) continue;
    if (pairing.researcher_trusts && pairing.agent_trusts) {
      fl_hospitals.push_back(pairing.agent);
      fl_conns.push_back(pairing.researcher_conn);
    }
  }

  std::vector<BandwidthSnapshot> snapshots;
  fedlearn::ModelParams initial;
  initial.weights.assign(full.d, 0.0);
  std::string fl_error;
  fedlearn::FlResult fl;
  try {
    fl = fedlearn::run_vanilla_fl(
        initial, validation, config.train, fl_hospitals,
        [&](std::size_t i, const std::string& text) {
          TrainOutcome out =
              researcher->send_train_request(fl_conns[i], text, config.budget);
          if (!out.ok)
            throw DeliveryError("hospital " + fl_hospitals[i] + " refused training: " +
                                out.problem_code + " " + out.detail);
          return out.model_text;
        },
        [&](int batch) {
          quiesce(*transport, agents);
          snapshot_bandwidth(snapshots, batch, agents);
        });
  } catch (const Error& e) {
    fl_error = e.what();
  }
  quiesce(*transport, agents);

  if (socket_mode)
    for (auto& agent : agents) agent->stop_worker();

  // --- assertions ---------------------------------------------------------------
  std::vector<ScenarioAssertion> checks;
  auto assert_that = [&](const std::string& name, bool ok, std::string detail) {
    checks.push_back(ScenarioAssertion{name, ok, std::move(detail)});
  };

  {
    std::size_t expected = 0, got = 0;
    for (const auto& p : pairings)
      if (p.role == AgentRole::hospital) {
        ++expected;
        if (p.researcher_trusts && p.agent_trusts) ++got;
      }
    assert_that("hospitals_mutually_trusted", got == expected,
                std::to_string(got) + "/" + std::to_string(expected) +
                    " hospital connections reached mutual trust");
  }
  {
    bool ok = true;
    std::string detail = "all adversary connections stayed untrusted";
    for (const auto& p : pairings) {
      if (!is_adversary_role(p.role)) continue;
      const bool researcher_side =
          researcher->connection(p.researcher_conn).trusted;
      const bool agent_side = by_name[p.agent]->connection(p.agent_conn).trusted;
      if (researcher_side || agent_side || p.researcher_trusts) {
        ok = false;
        detail = p.agent + " gained trust";
      }
    }
    assert_that("adversaries_untrusted", ok, detail);
  }
  {
    bool ok = true;
    std::string detail = "no train request was processed or sent on an untrusted connection";
    for (const auto& agent : agents) {
      for (const auto& rec : agent->audit_log()) {
        if (rec.event == "train_request_processed" && !rec.trusted_at_time) {
          ok = false;
          detail = agent->name() + " processed a train request while untrusted";
        }
        if (agent.get() == researcher && rec.event == "train_request_sent" &&
            !rec.trusted_at_time) {
          ok = false;
          detail = "the coordinator sent a train request on an untrusted connection";
        }
      }
    }
    assert_that("no_untrusted_training", ok, detail);
  }
  {
    bool ok = true;
    std::string detail = "every probe was rejected with untrusted_connection";
    for (const auto& probe : probe_log) {
      if (probe.at("accepted").get<bool>() ||
          probe.at("problem_code").get<std::string>() != kProblemUntrustedConnection) {
        ok = false;
        detail = probe.at("agent").get<std::string>() + " was not rejected correctly";
      }
    }
    if (probe_log.empty()) detail = "no adversaries in this scenario";
    assert_that("adversary_probes_rejected", ok, detail);
  }
  assert_that("fl_completed", fl_error.empty(),
              fl_error.empty() ? "training loop finished" : fl_error);
  assert_that("benchmark_count",
              fl.batches.size() == fl_hospitals.size() + 1,
              std::to_string(fl.batches.size()) + " benchmarks for " +
                  std::to_string(fl_hospitals.size()) + " hospitals");
  {
    bool ok = true;
    for (const auto& b : fl.batches)
      if (b.matrix.total() != static_cast<long>(validation.n)) ok = false;
    assert_that("confusion_totals_constant", ok,
                "every confusion matrix sums to " + std::to_string(validation.n));
  }
  {
    bool ok = true;
    std::string detail = "model hashes chain hospital to hospital";
    for (std::size_t i = 0; i < fl.lineage.size(); ++i) {
      if (fl.lineage[i].sent_version != static_cast<int>(i) ||
          fl.lineage[i].received_version != static_cast<int>(i) + 1)
        ok = false, detail = "version numbers do not advance one per hop";
      if (i > 0 && fl.lineage[i].sent_hash_hex != fl.lineage[i - 1].received_hash_hex)
        ok = false, detail = "hash chain broken at round " + std::to_string(i);
    }
    if (!fl.lineage.empty() && !fl.batches.empty() &&
        fl.batches.back().model_hash_hex != fl.lineage.back().received_hash_hex)
      ok = false, detail = "final benchmark model is not the last received model";
    assert_that("model_lineage_sequential", ok, detail);
  }
  {
    std::set<std::string> contributors;
    for (const auto& t : fl.lineage) contributors.insert(t.hospital);
    const std::set<std::string> expected(fl_hospitals.begin(), fl_hospitals.end());
    assert_that("model_influenced_by_credentialed_only", contributors == expected,
                std::to_string(contributors.size()) + " contributors, all mutually trusted");
  }
  {
    std::uint64_t sent = 0, received = 0, dropped = 0;
    for (const auto& agent : agents) {
      AgentCounters c = agent->counters();
      sent += c.bytes_sent;
      received += c.bytes_received;
      dropped += c.bytes_dropped;
    }
    assert_that("byte_conservation", sent == received + dropped,
                std::to_string(sent) + " sent = " + std::to_string(received) +
                    " received + " + std::to_string(dropped) + " dropped");
  }
  {
    bool ok = true;
    for (std::size_t i = 1; i < snapshots.size(); ++i) {
      const auto& prev = snapshots[i - 1].by_agent.at(researcher->name());
      const auto& cur = snapshots[i].by_agent.at(researcher->name());
      if (!(cur.first > prev.first)) ok = false;
    }
    assert_that("coordinator_bandwidth_monotone", ok,
                "coordinator bytes_sent strictly increases across rounds");
  }
  if (config.assertions.min_final_accuracy) {
    const double acc = fl.batches.empty() ? 0.0 : fl.batches.back().matrix.accuracy();
    assert_that("final_accuracy",
                acc >= *config.assertions.min_final_accuracy,
                "final accuracy " + std::to_string(acc) + " vs required " +
                    std::to_string(*config.assertions.min_final_accuracy));
  }
  if (config.assertions.require_improvement) {
    const bool ok = fl.batches.size() >= 2 &&
                    fl.batches.back().matrix.accuracy() > fl.batches.front().matrix.accuracy();
    assert_that("accuracy_improved", ok, "final accuracy exceeds the untrained benchmark");
  }

  bool all_passed = true;
  for (const auto& c : checks) all_passed = all_passed && c.passed;

  // --- report --------------------------------------------------------------------
  json doc;
  doc["scenario"] = json{{"name", config.name},
                         {"seed", config.seed},
                         {"transport", config.transport}};
  {
    json reg;
    json issuers = json::array();
    for (const auto& spec : config.agents)
      if (is_issuer_role(spec.role))
        issuers.push_back(json{{"agent", spec.name},
                               {"did", by_name[spec.name]->public_did()->str()}});
    json schema_ids = json::array();
    for (const auto& s : config.schemas) schema_ids.push_back(s.schema.schema_id());
    reg["issuers"] = issuers;
    reg["schemas"] = schema_ids;
    doc["registry"] = reg;
  }
  {
    // Map every DID seen on a connection back to an agent name for readability.
    std::map<std::string, std::string> did_owner;
    for (const auto& agent : agents)
      for (const auto& conn : agent->connections())
        did_owner[conn.my_did.str()] = agent->name();
    json conns = json::array();
    for (const auto& agent : agents) {
      for (const auto& conn : agent->connections()) {
        json states = json::array();
        for (ConnState s : conn.state_history) states.push_back(std::string(to_string(s)));
        json attrs = json::object();
        for (const auto& [k, v] : conn.verified_attributes) attrs[k] = v;
        auto owner = did_owner.find(conn.their_did.str());
        conns.push_back(json{{"agent", agent->name()},
                             {"connection_id", conn.connection_id},
                             {"peer", owner == did_owner.end() ? "" : owner->second},
                             {"my_did", conn.my_did.str()},
                             {"their_did", conn.their_did.str()},
                             {"state", std::string(to_string(conn.state))},
                             {"state_history", states},
                             {"trusted", conn.trusted},
                             {"verified_attributes", attrs}});
      }
    }
    doc["connections"] = conns;
  }
  {
    json verifications = json::array();
    for (const auto& agent : agents)
      for (const auto& [conn_id, report] : agent->verification_log()) {
        json v = report.to_json();
        v["verifier"] = agent->name();
        v["connection_id"] = conn_id;
        verifications.push_back(v);
      }
    doc["verifications"] = verifications;
  }
  doc["issuance"] = issuance_log;
  {
    json wallets = json::object();
    for (const auto& agent : agents)
      wallets[agent->name()] = json{{"credentials", agent->credential_count()}};
    doc["wallets"] = wallets;
  }
  doc["adversary_probes"] = probe_log;
  {
    json fl_doc;
    json batches = json::array();
    for (const auto& b : fl.batches)
      batches.push_back(json{{"batch", b.batch},
                             {"tp", b.matrix.tp},
                             {"fp", b.matrix.fp},
                             {"tn", b.matrix.tn},
                             {"fn", b.matrix.fn},
                             {"accuracy", b.matrix.accuracy()},
                             {"model_version", b.model_version},
                             {"model_hash", b.model_hash_hex}});
    json lineage = json::array();
    for (const auto& t : fl.lineage)
      lineage.push_back(json{{"round", t.round},
                             {"hospital", t.hospital},
                             {"sent_version", t.sent_version},
                             {"sent_hash", t.sent_hash_hex},
                             {"received_version", t.received_version},
                             {"received_hash", t.received_hash_hex}});
    fl_doc["hospitals"] = fl_hospitals;
    fl_doc["batches"] = batches;
    fl_doc["lineage"] = lineage;
    fl_doc["validation_rows"] = validation.n;
    if (!fl_error.empty()) fl_doc["error"] = fl_error;
    doc["fedlearn"] = fl_doc;
  }
  {
    json metrics;
    json per_agent = json::object();
    for (const auto& agent : agents) {
      AgentCounters c = agent->counters();
      per_agent[agent->name()] = json{{"messages_sent", c.messages_sent},
                                      {"messages_received", c.messages_received},
                                      {"bytes_sent", c.bytes_sent},
                                      {"bytes_received", c.bytes_received},
                                      {"envelopes_dropped", c.envelopes_dropped},
                                      {"bytes_dropped", c.bytes_dropped}};
    }
    json snaps = json::array();
    for (const auto& s : snapshots) {
      json entry;
      entry["batch"] = s.batch;
      json by_agent = json::object();
      for (const auto& [name, bytes] : s.by_agent)
        by_agent[name] = json{{"bytes_sent", bytes.first}, {"bytes_received", bytes.second}};
      entry["cumulative"] = by_agent;
      snaps.push_back(entry);
    }
    metrics["agents"] = per_agent;
    metrics["bandwidth_snapshots"] = snaps;
    doc["metrics"] = metrics;
  }
  {
    json arr = json::array();
    for (const auto& c : checks)
      arr.push_back(json{{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    doc["assertions"] = arr;
  }
  doc["passed"] = all_passed;
  doc["note"] =
      "Network activity is measured as per-agent envelope and byte counters at "
      "the transport boundary; no OS-level resource metrics are collected.";

  RunReport report;
  report.doc = std::move(doc);
  report.passed = all_passed;
  return report;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

inline std::string emit_report_json(const RunReport& report) {
  return report.doc.dump(2) + "\n";
}

// Four-row confusion table (one column per batch) plus trust, traffic and
// assertion sections. Missing sections render as empty/zero rather than
// failing.
inline std::string emit_report_table(const RunReport& report) {
  const json& doc = report.doc;
  std::string out;
  const json scenario = doc.value("scenario", json::object());
  out += "Scenario: " + scenario.value("name", std::string("?")) + "  (seed " +
         std::to_string(scenario.value("seed", 0)) + ", transport " +
         scenario.value("transport", std::string("?")) + ")\n\n";

  const json fl = doc.value("fedlearn", json::object());
  const json batches = fl.value("batches", json::array());
  out += "Per-batch confusion matrices (validation set)\n";
  auto cell = [](const std::string& s, std::size_t width) {
    std::string c = s;
    while (c.size() < width) c.insert(c.begin(), ' ');
    return c;
  };
  const std::size_t label_width = 18, col_width = 8;
  out += cell("Batch", label_width);
  for (const auto& b : batches) out += cell(std::to_string(b.value("batch", 0)), col_width);
  if (batches.empty()) out += cell("0", col_width);
  out += "\n";
  const std::pair<const char*, const char*> rows[] = {{"True Positives", "tp"},
                                                      {"False Positives", "fp"},
                                                      {"True Negatives", "tn"},
                                                      {"False Negatives", "fn"}};
  for (const auto& [label, key] : rows) {
    out += cell(label, label_width);
    if (batches.empty()) out += cell("0", col_width);
    for (const auto& b : batches)
      out += cell(std::to_string(b.value(key, 0L)), col_width);
    out += "\n";
  }
  out += "\n";

  out += "Trust verifications\n";
  const json verifications = doc.value("verifications", json::array());
  if (verifications.empty()) out += "  (none)\n";
  for (const auto& v : verifications) {
    int passed = 0;
    for (const auto& c : v.value("checks", json::array()))
      if (c.value("passed", false)) ++passed;
    out += "  " + v.value("verifier", std::string("?")) + " on " +
           v.value("connection_id", std::string("?")) + ": " +
           (v.value("accepted", false) ? "trusted" : "rejected") + " (" +
           std::to_string(passed) + "/5 checks)\n";
  }
  out += "\n";

  out += "Agent traffic (cumulative)\n";
  out += cell("agent", label_width) + cell("sent", 12) + cell("received", 12) +
         cell("dropped", 12) + "\n";
  const json metrics = doc.value("metrics", json::object());
  const json agent_counters = metrics.value("agents", json::object());
  for (const auto& [name, c] : agent_counters.items())
    out += cell(name, label_width) + cell(std::to_string(c.value("bytes_sent", 0ULL)), 12) +
           cell(std::to_string(c.value("bytes_received", 0ULL)), 12) +
           cell(std::to_string(c.value("bytes_dropped", 0ULL)), 12) + "\n";
  out += "\n";

  out += "Assertions\n";
  for (const auto& a : doc.value("assertions", json::array()))
    out += std::string("  [") + (a.value("passed", false) ? "PASS" : "FAIL") + "] " +
           a.value("name", std::string("?")) + ": " + a.value("detail", std::string()) + "\n";
  out += "\n";
  out += doc.value("note", std::string()) + "\n";
  return out;
}

inline std::string emit_report(const RunReport& report, const std::string& format) {
  if (format == "json") return emit_report_json(report);
  if (format == "table") return emit_report_table(report);
  throw ConfigError("unknown report format " + format);
}

}  // namespace fedtrust::harness
