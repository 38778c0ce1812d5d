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

#include "vflrps/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "vflrps/random.hpp"

namespace vflrps {
namespace {

const PartyDataset* find_party(const Partition& partition, int party_id) {
  for (const auto& p : partition.passive) {
    if (p.party_id == party_id) return &p;
  }
  return nullptr;
}

std::string local_address(int party_id) { return "party-" + std::to_string(party_id); }

std::string fmt(double v, int precision = 4) {
  if (std::isnan(v)) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
  return buf;
}

std::string party_list(const std::vector<int>& parties) {
  if (parties.empty()) return "-";
  std::string out;
  for (int p : parties) out += (out.empty() ? "" : ",") + std::to_string(p);
  return "{" + out + "}";
}

json metrics_json(const MetricReport& m) {
  if (m.task == Task::kRegression) {
    return {{"mse", m.mse}, {"rmse", m.rmse}, {"r2", m.r2_defined ? json(m.r2) : json(nullptr)}};
  }
  return {{"accuracy", m.accuracy}, {"f1", m.f1}};
}

}  // namespace

ScenarioConfig apply_overrides(ScenarioConfig config, const Overrides& o) {
  if (o.m) config.m = *o.m;
  if (o.theta) config.thresholds.theta = *o.theta;
  if (o.delta) config.thresholds.delta = *o.delta;
  if (o.tau) config.thresholds.tau = *o.tau;
  if (o.seed) config.seeds.protocol = *o.seed;
  for (const auto& [id, address] : o.endpoints) config.endpoints[id] = address;
  config.validate();
  return config;
}

// ---------------------------------------------------------------------------
// Federation

struct Federation::Impl {
  std::unique_ptr<Network> network;
  std::vector<std::unique_ptr<PassiveNode>> nodes;
  std::vector<std::unique_ptr<TcpServer>> servers;
  std::vector<PassiveLink> links;
  bool remote = false;
};

Federation::Federation() : impl_(std::make_unique<Impl>()) {}

Federation::~Federation() {
  for (auto& s : impl_->servers) s->stop();
}

std::unique_ptr<Federation> Federation::local(const PreparedScenario& scenario, TransportKind transport) {
  std::unique_ptr<Federation> f(new Federation());
  Impl& impl = *f->impl_;
  if (transport == TransportKind::kInProcess) {
    impl.network = std::make_unique<InProcNetwork>(InProcNetwork::Mode::kDirect);
  } else {
    impl.network = std::make_unique<TcpNetwork>();
  }
  for (const auto& train : scenario.train.passive) {
    const PartyDataset* test = find_party(scenario.test, train.party_id);
    auto node = std::make_unique<PassiveNode>(
        train, *test, *impl.network,
        PassiveNode::Options{party_private_seed(scenario.config.seeds.protocol, train.party_id), scenario.digest});
    std::string address;
    if (transport == TransportKind::kInProcess) {
      address = local_address(train.party_id);
      static_cast<InProcNetwork&>(*impl.network).serve(address, node->handler());
    } else {
      impl.servers.push_back(std::make_unique<TcpServer>("127.0.0.1:0", node->handler()));
      address = impl.servers.back()->address();
    }
    impl.links.push_back({train.party_id, address});
    impl.nodes.push_back(std::move(node));
  }
  return f;
}

std::unique_ptr<Federation> Federation::remote(const PreparedScenario& scenario,
                                               const std::map<int, std::string>& endpoints) {
  std::unique_ptr<Federation> f(new Federation());
  Impl& impl = *f->impl_;
  impl.network = std::make_unique<TcpNetwork>();
  impl.remote = true;
  for (const auto& p : scenario.train.passive) {
    const auto it = endpoints.find(p.party_id);
    if (it == endpoints.end()) {
      throw Error(ErrorCode::kInvalidConfig, "no endpoint for party " + std::to_string(p.party_id));
    }
    impl.links.push_back({p.party_id, it->second});
  }
  return f;
}

Network& Federation::network() { return *impl_->network; }

std::vector<PassiveLink> Federation::links() const { return impl_->links; }

void Federation::shutdown() {
  if (!impl_->remote) return;
  for (const auto& link : impl_->links) {
    auto connection = impl_->network->connect(link.address);
    connection->send(make_control(derive_session_id({0x53485554, static_cast<std::uint64_t>(link.party_id)}),
                                  {{"op", "shutdown"}}));
    throw_if_error(connection->receive());
  }
}

// ---------------------------------------------------------------------------
// Selection

SelectionRun run_selection(const PreparedScenario& scenario, Federation& federation) {
  const ScenarioConfig& config = scenario.config;
  CorrelationOptions options;
  options.protocol_seed = config.seeds.protocol;
  options.mask_width = config.mask_width;
  options.concurrency = config.concurrency;
  ActiveParty active(scenario.train.active, federation.network(), options);

  SelectionRun run;
  for (const auto& link : federation.links()) {
    run.peers.push_back(active.hello(link.party_id, link.address, scenario.digest));
  }

  const auto start = std::chrono::steady_clock::now();
  for (const auto& peer : run.peers) run.matrices.push_back(active.compute_correlation_matrix(peer));
  run.redundancy = active.build_redundancy_report(run.peers, run.matrices, config.thresholds);
  run.result = forward_select(run.matrices, run.redundancy, {config.m, config.thresholds});
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return run;
}

json selection_report(const PreparedScenario& scenario, const SelectionRun& run) {
  json matrices = json::array();
  for (const auto& m : run.matrices) matrices.push_back(to_json(m));
  json names = json::object();
  for (const auto& p : run.peers) names[std::to_string(p.party_id)] = p.feature_names;
  return {{"scenario", scenario.config.name},
          {"digest", scenario.digest},
          {"seeds", scenario.config.to_json()["seeds"]},
          {"samples", scenario.train.active.samples()},
          {"active_features", scenario.train.active.feature_names},
          {"passive_features", names},
          {"correlation_matrices", matrices},
          {"redundancy", to_json(run.redundancy)},
          {"selection", to_json(run.result)}};
}

std::string selection_table(const PreparedScenario& scenario, const SelectionRun& run) {
  std::map<int, std::vector<std::string>> names;
  for (const auto& p : run.peers) names[p.party_id] = p.feature_names;
  std::ostringstream out;
  out << "Scenario " << scenario.config.name << " (digest " << scenario.digest << ")\n";
  out << "Selected M=" << run.result.selected.size() << ": " << party_list(run.result.selected) << "\n\n";
  out << render_ranking_table(run.result, names);
  return out.str();
}

// ---------------------------------------------------------------------------
// Training baselines

BaselineRun train_baseline(const PreparedScenario& scenario, Federation& federation, const std::string& name,
                           const std::vector<int>& parties) {
  const ColumnScaler scaler = ColumnScaler::fit(scenario.train.active.columns);
  FederatedTrainer trainer(scaler.apply(scenario.train.active.columns), scaler.apply(scenario.test.active.columns),
                           *scenario.train.active.labels, federation.network());
  std::vector<PassiveLink> links;
  for (const auto& link : federation.links()) {
    if (std::count(parties.begin(), parties.end(), link.party_id)) links.push_back(link);
  }
  if (links.size() != parties.size()) throw Error(ErrorCode::kInvalidConfig, "baseline names an unknown party");

  TrainConfig config;
  config.learning_rate = scenario.config.learning_rate;
  config.epochs = scenario.config.epochs;
  config.task = scenario.config.task;
  const FederatedModel model = trainer.fit(links, config, scenario.digest + "/" + name);

  BaselineRun run;
  run.name = name;
  for (const auto& l : links) run.parties.push_back(l.party_id);
  run.metrics = evaluate_run(trainer, model, links, *scenario.test.active.labels);
  run.loss_curve = model.loss_curve;
  return run;
}

std::vector<int> random_parties(const std::vector<int>& all, std::size_t m, std::uint64_t seed, std::size_t repeat) {
  std::vector<int> order = all;
  SplitMix64 rng(derive_seed({seed, 0x52414E44, repeat}));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  order.resize(std::min(m, order.size()));
  std::sort(order.begin(), order.end());
  return order;
}

RunReport run_experiment(const PreparedScenario& scenario, Federation& federation) {
  RunReport report;
  report.digest = scenario.digest;
  report.selection = run_selection(scenario, federation);

  std::vector<int> all;
  for (const auto& l : federation.links()) all.push_back(l.party_id);
  const std::size_t m = scenario.config.m;

  report.all = train_baseline(scenario, federation, "ALL", all);
  report.active_only = train_baseline(scenario, federation, "ACTIVE_ONLY", {});
  for (std::size_t r = 0; r < scenario.config.random_repeats; ++r) {
    report.random.draws.push_back(train_baseline(scenario, federation, "RANDOM-" + std::to_string(r + 1),
                                                 random_parties(all, m, scenario.config.seeds.random, r)));
  }
  std::vector<int> chosen = report.selection.result.selected;
  std::sort(chosen.begin(), chosen.end());
  report.vfl_rps = train_baseline(scenario, federation, "VFL-RPS", chosen);

  auto summarize = [&](auto field) {
    std::vector<double> v;
    for (const auto& d : report.random.draws) v.push_back(field(d.metrics));
    return std::pair{mean(v), std_pop(v)};
  };
  MetricReport& mu = report.random.mean;
  MetricReport& sd = report.random.stddev;
  mu.task = sd.task = scenario.config.task;
  std::tie(mu.mse, sd.mse) = summarize([](const MetricReport& x) { return x.mse; });
  std::tie(mu.rmse, sd.rmse) = summarize([](const MetricReport& x) { return x.rmse; });
  std::tie(mu.r2, sd.r2) = summarize([](const MetricReport& x) { return x.r2; });
  mu.r2_defined = sd.r2_defined = std::all_of(report.random.draws.begin(), report.random.draws.end(),
                                              [](const BaselineRun& d) { return d.metrics.r2_defined; });
  std::tie(mu.accuracy, sd.accuracy) = summarize([](const MetricReport& x) { return x.accuracy; });
  std::tie(mu.f1, sd.f1) = summarize([](const MetricReport& x) { return x.f1; });
  return report;
}

json to_json(const RunReport& report, const PreparedScenario& scenario) {
  auto baseline = [](const BaselineRun& b) {
    return json{{"name", b.name}, {"parties", b.parties}, {"metrics", metrics_json(b.metrics)}};
  };
  json draws = json::array();
  for (const auto& d : report.random.draws) draws.push_back(baseline(d));
  return {{"scenario", scenario.config.name},
          {"digest", report.digest},
          {"task", scenario.config.task == Task::kRegression ? "regression" : "classification"},
          {"seeds", scenario.config.to_json()["seeds"]},
          {"selection", to_json(report.selection.result)},
          {"redundancy", to_json(report.selection.redundancy)},
          {"selection_seconds", report.selection.seconds},
          {"baselines",
           {baseline(report.all),
            baseline(report.active_only),
            {{"name", "RANDOM"},
             {"mean", metrics_json(report.random.mean)},
             {"std", metrics_json(report.random.stddev)},
             {"draws", draws}},
            baseline(report.vfl_rps)}},
          {"ground_truth",
           {{"informative_parties", scenario.truth.informative_parties},
            {"noise_parties", scenario.truth.noise_parties}}}};
}

std::string experiment_table(const RunReport& report, const PreparedScenario& scenario) {
  const bool regression = scenario.config.task == Task::kRegression;
  std::ostringstream out;
  char line[256];
  out << "Scenario " << scenario.config.name << " (K=" << report.all.parties.size() << ", M=" << scenario.config.m
      << ")\n";
  if (regression) {
    std::snprintf(line, sizeof(line), "%-12s %-17s %-17s %-17s %-14s %s\n", "Baseline", "MSE", "RMSE", "R2",
                  "Selection(s)", "Parties");
  } else {
    std::snprintf(line, sizeof(line), "%-12s %-17s %-17s %-14s %s\n", "Baseline", "F1", "Accuracy", "Selection(s)",
                  "Parties");
  }
  out << line;
  auto row = [&](const std::string& name, const std::string& a, const std::string& b, const std::string& c,
                 const std::string& time, const std::string& parties) {
    if (regression) {
      std::snprintf(line, sizeof(line), "%-12s %-17s %-17s %-17s %-14s %s\n", name.c_str(), a.c_str(), b.c_str(),
                    c.c_str(), time.c_str(), parties.c_str());
    } else {
      std::snprintf(line, sizeof(line), "%-12s %-17s %-17s %-14s %s\n", name.c_str(), a.c_str(), b.c_str(),
                    time.c_str(), parties.c_str());
    }
    out << line;
  };
  auto single = [&](const BaselineRun& b, const std::string& time) {
    const MetricReport& m = b.metrics;
    if (regression) {
      row(b.name, fmt(m.mse), fmt(m.rmse), m.r2_defined ? fmt(m.r2) : "n/a", time, party_list(b.parties));
    } else {
      row(b.name, fmt(m.f1), fmt(m.accuracy), "", time, party_list(b.parties));
    }
  };
  single(report.all, "-");
  single(report.active_only, "-");
  const MetricReport& mu = report.random.mean;
  const MetricReport& sd = report.random.stddev;
  const std::string draws = std::to_string(report.random.draws.size()) + " draws";
  if (regression) {
    row("RANDOM", fmt(mu.mse) + "+-" + fmt(sd.mse), fmt(mu.rmse) + "+-" + fmt(sd.rmse),
        mu.r2_defined ? fmt(mu.r2) + "+-" + fmt(sd.r2) : "n/a", "-", draws);
  } else {
    row("RANDOM", fmt(mu.f1) + "+-" + fmt(sd.f1), fmt(mu.accuracy) + "+-" + fmt(sd.accuracy), "", "-", draws);
  }
  single(report.vfl_rps, fmt(report.selection.seconds, 3));
  out << "\nRanking: ";
  for (std::size_t i = 0; i < report.selection.result.ranking.size(); ++i) {
    out << (i ? " > " : "") << "P" << report.selection.result.ranking[i];
  }
  out << "\n";
  return out.str();
}

std::string loss_curves_csv(const RunReport& report) {
  std::vector<const BaselineRun*> runs{&report.all, &report.active_only};
  for (const auto& d : report.random.draws) runs.push_back(&d);
  runs.push_back(&report.vfl_rps);
  std::ostringstream out;
  out << "epoch";
  for (const auto* r : runs) out << "," << r->name;
  out << "\n";
  std::size_t epochs = 0;
  for (const auto* r : runs) epochs = std::max(epochs, r->loss_curve.size());
  char buf[40];
  for (std::size_t e = 0; e < epochs; ++e) {
    out << e + 1;
    for (const auto* r : runs) {
      if (e < r->loss_curve.size()) {
        std::snprintf(buf, sizeof(buf), "%.10g", r->loss_curve[e]);
        out << "," << buf;
      } else {
        out << ",";
      }
    }
    out << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Party process

void serve_party(const PreparedScenario& scenario, int party_id, const std::string& address,
                 const std::optional<std::filesystem::path>& port_file) {
  const PartyDataset* train = find_party(scenario.train, party_id);
  const PartyDataset* test = find_party(scenario.test, party_id);
  if (!train || !test) throw Error(ErrorCode::kInvalidConfig, "party " + std::to_string(party_id) + " is not in the scenario");

  TcpNetwork network;
  PassiveNode node(*train, *test, network,
                   {party_private_seed(scenario.config.seeds.protocol, party_id), scenario.digest});
  TcpServer server(address, node.handler());
  node.on_shutdown([&server] { server.request_stop(); });
  if (port_file) {
    const std::filesystem::path tmp = port_file->string() + ".tmp";
    {
      std::ofstream out(tmp);
      if (!out) throw Error(ErrorCode::kIoError, "cannot write " + tmp.string());
      out << server.port() << "\n";
    }
    std::filesystem::rename(tmp, *port_file);
  }
  server.wait();
  server.stop();
}

}  // namespace vflrps
