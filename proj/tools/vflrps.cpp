// Copyright 2026 The vflrps Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// vflrps command line: select, experiment, serve-party.
// Every flag can also be set through VFLRPS_<FLAG> (e.g. VFLRPS_M, VFLRPS_SEED);
// an explicit flag wins over the environment.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "vflrps/pipeline.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct CommonFlags {
  std::string scenario;
  std::optional<std::size_t> m;
  std::optional<double> theta;
  std::optional<double> delta;
  std::optional<double> tau;
  std::optional<std::uint64_t> seed;
  std::string transport = "inproc";
  std::string out;
  std::string endpoints;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--scenario", f.scenario, "Scenario JSON file")->required()->envname("VFLRPS_SCENARIO");
  cmd->add_option("--m", f.m, "Number of passive parties to select")->envname("VFLRPS_M");
  cmd->add_option("--theta", f.theta, "Active-overlap threshold")->envname("VFLRPS_THETA");
  cmd->add_option("--delta", f.delta, "Correlation-pattern distance threshold")->envname("VFLRPS_DELTA");
  cmd->add_option("--tau", f.tau, "Direct-correlation confirmation threshold")->envname("VFLRPS_TAU");
  cmd->add_option("--seed", f.seed, "Protocol seed")->envname("VFLRPS_SEED");
  cmd->add_option("--transport", f.transport, "inproc or tcp")
      ->check(CLI::IsMember({"inproc", "tcp"}))
      ->envname("VFLRPS_TRANSPORT");
  cmd->add_option("--out", f.out, "Report path (JSON); .txt and .csv siblings are written next to it")
      ->envname("VFLRPS_OUT");
  cmd->add_option("--endpoints", f.endpoints, "Remote parties as id=host:port,...; implies tcp")
      ->envname("VFLRPS_ENDPOINTS");
}

std::map<int, std::string> parse_endpoints(const std::string& text) {
  std::map<int, std::string> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string::npos) comma = text.size();
    const std::string item = text.substr(pos, comma - pos);
    const std::size_t eq = item.find('=');
    if (eq == std::string::npos) {
      throw vflrps::Error(vflrps::ErrorCode::kInvalidConfig, "endpoint '" + item + "' is not id=host:port");
    }
    try {
      out[std::stoi(item.substr(0, eq))] = item.substr(eq + 1);
    } catch (const std::exception&) {
      throw vflrps::Error(vflrps::ErrorCode::kInvalidConfig, "endpoint '" + item + "' has a bad party id");
    }
    pos = comma + 1;
  }
  return out;
}

vflrps::PreparedScenario prepare(const CommonFlags& f) {
  vflrps::Overrides o;
  o.m = f.m;
  o.theta = f.theta;
  o.delta = f.delta;
  o.tau = f.tau;
  o.seed = f.seed;
  o.endpoints = parse_endpoints(f.endpoints);
  return vflrps::prepare_scenario(vflrps::apply_overrides(vflrps::ScenarioConfig::load(f.scenario), o));
}

std::unique_ptr<vflrps::Federation> make_federation(const vflrps::PreparedScenario& s, const CommonFlags& f) {
  if (!f.endpoints.empty()) return vflrps::Federation::remote(s, s.config.endpoints);
  if (f.transport == "tcp" && !s.config.endpoints.empty()) return vflrps::Federation::remote(s, s.config.endpoints);
  return vflrps::Federation::local(s, f.transport == "tcp" ? vflrps::TransportKind::kTcp
                                                           : vflrps::TransportKind::kInProcess);
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw vflrps::Error(vflrps::ErrorCode::kIoError, "cannot write " + path.string());
  out << text;
}

std::filesystem::path sibling(const std::string& out, const char* ext) {
  return std::filesystem::path(out).replace_extension(ext);
}

int cmd_select(const CommonFlags& f) {
  const auto scenario = prepare(f);
  auto federation = make_federation(scenario, f);
  const vflrps::SelectionRun run = vflrps::run_selection(scenario, *federation);
  federation->shutdown();
  const std::string table = vflrps::selection_table(scenario, run);
  std::cout << table;
  std::cerr << "selection time: " << run.seconds << " s\n";
  if (!f.out.empty()) {
    write_file(f.out, vflrps::selection_report(scenario, run).dump(2) + "\n");
    write_file(sibling(f.out, ".txt"), table);
  }
  return 0;
}

int cmd_experiment(const CommonFlags& f) {
  const auto scenario = prepare(f);
  auto federation = make_federation(scenario, f);
  const vflrps::RunReport report = vflrps::run_experiment(scenario, *federation);
  federation->shutdown();
  const std::string table = vflrps::experiment_table(report, scenario);
  std::cout << table;
  if (!f.out.empty()) {
    write_file(f.out, vflrps::to_json(report, scenario).dump(2) + "\n");
    write_file(sibling(f.out, ".txt"), table);
    write_file(sibling(f.out, ".csv"), vflrps::loss_curves_csv(report));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Participant selection for vertical federated learning"};
  app.require_subcommand(1);

  CommonFlags select_flags;
  CLI::App* select = app.add_subcommand("select", "Run correlation, redundancy detection and forward selection");
  add_common(select, select_flags);

  CommonFlags experiment_flags;
  CLI::App* experiment =
      app.add_subcommand("experiment", "Run selection, then train ALL, ACTIVE_ONLY, RANDOM and VFL-RPS");
  add_common(experiment, experiment_flags);

  std::string serve_scenario;
  int party_id = 0;
  std::string address = "127.0.0.1:0";
  std::string port_file;
  std::optional<std::uint64_t> serve_seed;
  CLI::App* serve = app.add_subcommand("serve-party", "Host one passive party over TCP until shutdown");
  serve->add_option("--scenario", serve_scenario, "Scenario JSON file")->required()->envname("VFLRPS_SCENARIO");
  serve->add_option("--party-id", party_id, "Passive party id")->required()->envname("VFLRPS_PARTY_ID");
  serve->add_option("--address", address, "host:port to bind; port 0 picks one")->envname("VFLRPS_ADDRESS");
  serve->add_option("--port-file", port_file, "Write the bound port here once listening")
      ->envname("VFLRPS_PORT_FILE");
  serve->add_option("--seed", serve_seed, "Protocol seed")->envname("VFLRPS_SEED");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*select) return cmd_select(select_flags);
    if (*experiment) return cmd_experiment(experiment_flags);
    vflrps::Overrides o;
    o.seed = serve_seed;
    const auto scenario =
        vflrps::prepare_scenario(vflrps::apply_overrides(vflrps::ScenarioConfig::load(serve_scenario), o));
    vflrps::serve_party(scenario, party_id, address,
                        port_file.empty() ? std::nullopt : std::optional<std::filesystem::path>(port_file));
    return 0;
  } catch (const vflrps::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return vflrps::is_config_error(e.code()) ? kExitConfig : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
