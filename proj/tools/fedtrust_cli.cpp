// Command-line front end for the trust-gated federated-learning simulator.
//
//   fedtrust run --config configs/baseline.json [--seed N] [--transport mem|socket]
//                [--format json|table] [--out report.json]
//   fedtrust validate-config --config configs/baseline.json
//   fedtrust bootstrap-registry --config configs/baseline.json [--seed N] [--out reg.json]
//   fedtrust report --in report.json --format table
//
// `run` exits 0 only when every scenario assertion passed.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include <fedtrust/fedtrust.hpp>

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw fedtrust::ConfigError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spill(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw fedtrust::ConfigError("cannot write " + path);
  out << text;
}

fedtrust::harness::ScenarioConfig load_config(const std::string& path) {
  fedtrust::json j;
  try {
    j = fedtrust::json::parse(slurp(path));
  } catch (const fedtrust::json::exception& e) {
    throw fedtrust::ConfigError(path + " is not valid JSON: " + e.what());
  }
  return fedtrust::harness::ScenarioConfig::from_json(j);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trust-gated federated learning simulator"};
  app.require_subcommand(1);

  std::string config_path, out_path, in_path;
  std::string format = "json";
  std::string transport;
  std::uint64_t seed = 0;
  bool seed_given = false;

  CLI::App* run = app.add_subcommand("run", "execute a scenario and report on it");
  run->add_option("--config", config_path, "scenario config JSON")->required();
  run->add_option("--seed", seed, "override the config seed")->each([&](const std::string&) {
    seed_given = true;
  });
  run->add_option("--transport", transport, "override the transport (mem|socket)");
  run->add_option("--format", format, "report format (json|table)")
      ->check(CLI::IsMember({"json", "table"}));
  run->add_option("--out", out_path, "also write the JSON report to this file");

  CLI::App* validate = app.add_subcommand("validate-config", "parse and validate a config");
  validate->add_option("--config", config_path, "scenario config JSON")->required();

  CLI::App* bootstrap = app.add_subcommand(
      "bootstrap-registry", "emit the registry a scenario would start from");
  bootstrap->add_option("--config", config_path, "scenario config JSON")->required();
  bootstrap->add_option("--seed", seed, "override the config seed")
      ->each([&](const std::string&) { seed_given = true; });
  bootstrap->add_option("--out", out_path, "write the registry snapshot to this file");

  CLI::App* report = app.add_subcommand("report", "re-render a stored JSON report");
  report->add_option("--in", in_path, "report JSON produced by `run`")->required();
  report->add_option("--format", format, "report format (json|table)")
      ->check(CLI::IsMember({"json", "table"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      fedtrust::harness::ScenarioConfig config = load_config(config_path);
      if (seed_given) config.seed = seed;
      if (!transport.empty()) config.transport = transport;
      fedtrust::harness::RunReport result = fedtrust::harness::run_scenario(config);
      std::cout << fedtrust::harness::emit_report(result, format);
      if (!out_path.empty()) spill(out_path, fedtrust::harness::emit_report_json(result));
      return result.passed ? 0 : 1;
    }
    if (validate->parsed()) {
      fedtrust::harness::ScenarioConfig config = load_config(config_path);
      config.validate();
      std::cout << "ok: " << config.name << " (" << config.agents.size() << " agents, "
                << config.schemas.size() << " schemas)\n";
      return 0;
    }
    if (bootstrap->parsed()) {
      fedtrust::harness::ScenarioConfig config = load_config(config_path);
      if (seed_given) config.seed = seed;
      // Rebuild just the registry phase: issuer identities, schemas, grants.
      fedtrust::Registry registry;
      fedtrust::InMemoryBus bus;
      std::map<std::string, std::unique_ptr<fedtrust::Agent>> issuers;
      for (const auto& spec : config.agents) {
        if (!fedtrust::harness::is_issuer_role(spec.role)) continue;
        auto agent = std::make_unique<fedtrust::Agent>(
            spec.name, spec.endpoint,
            fedtrust::derive_seed(config.seed, "agent:" + spec.name), bus, registry);
        agent->create_public_identity();
        registry.register_issuer(agent->public_document());
        issuers[spec.name] = std::move(agent);
      }
      for (const auto& s : config.schemas) {
        registry.register_schema(s.schema);
        for (const auto& issuer : s.issuer_agents)
          registry.authorize(s.schema.schema_id(), *issuers.at(issuer)->public_did());
      }
      const std::string text = registry.snapshot().dump(2) + "\n";
      if (out_path.empty())
        std::cout << text;
      else
        spill(out_path, text);
      return 0;
    }
    if (report->parsed()) {
      fedtrust::harness::RunReport stored;
      stored.doc = fedtrust::json::parse(slurp(in_path));
      stored.passed = stored.doc.value("passed", false);
      std::cout << fedtrust::harness::emit_report(stored, format);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
