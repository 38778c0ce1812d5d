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

#include "vflrps/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "vflrps/random.hpp"

namespace vflrps {
namespace {

constexpr std::uint64_t kNoiseTag = 0x4E4F495345;
constexpr std::uint64_t kSyntheticTag = 0x53594E;
constexpr std::uint64_t kEpsilonTag = 0x455053;

[[noreturn]] void config_error(const std::string& message) { throw Error(ErrorCode::kInvalidConfig, message); }

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  s = s.substr(b, e - b);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return std::string(s);
}

std::vector<std::string> split_fields(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') quoted = !quoted;
    if (c == delim && !quoted) {
      out.push_back(trim(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  out.push_back(trim(field));
  return out;
}

bool is_missing(const std::string& cell) {
  return cell.empty() || cell == "NA" || cell == "na" || cell == "NaN" || cell == "nan" || cell == "?";
}

std::optional<double> parse_number(const std::string& cell) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = first + cell.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

const char* kind_name(ConfigKind k) {
  switch (k) {
    case ConfigKind::kBasic: return "basic";
    case ConfigKind::kOverlapping: return "overlapping";
    case ConfigKind::kIrrelevant: return "irrelevant";
  }
  return "basic";
}

ConfigKind kind_from(const std::string& s) {
  if (s == "basic") return ConfigKind::kBasic;
  if (s == "overlapping") return ConfigKind::kOverlapping;
  if (s == "irrelevant") return ConfigKind::kIrrelevant;
  config_error("unknown config_kind '" + s + "'");
}

const char* transform_name(DuplicateTransform t) {
  switch (t) {
    case DuplicateTransform::kCopy: return "copy";
    case DuplicateTransform::kAffine: return "affine";
    case DuplicateTransform::kCube: return "cube";
  }
  return "copy";
}

DuplicateTransform transform_from(const std::string& s) {
  if (s == "copy") return DuplicateTransform::kCopy;
  if (s == "affine") return DuplicateTransform::kAffine;
  if (s == "cube") return DuplicateTransform::kCube;
  config_error("unknown duplicate transform '" + s + "'");
}

double apply_transform(DuplicateTransform t, double v) {
  switch (t) {
    case DuplicateTransform::kCopy: return v;
    case DuplicateTransform::kAffine: return 2.0 * v + 1.0;
    case DuplicateTransform::kCube: return v * v * v;
  }
  return v;
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) config_error(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) == allowed.end()) {
      config_error("unknown key '" + key + "' in " + where);
    }
  }
}

int parse_party_key(const std::string& key) {
  int id = 0;
  const auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), id);
  if (ec != std::errc() || ptr != key.data() + key.size()) config_error("party key '" + key + "' is not an integer");
  return id;
}

}  // namespace

// ---------------------------------------------------------------------------
// Table and CSV

std::size_t Table::index_of(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) config_error("column '" + name + "' not found");
  return static_cast<std::size_t>(it - names.begin());
}

bool Table::has(const std::string& name) const { return std::find(names.begin(), names.end(), name) != names.end(); }

Table Table::select_rows(const std::vector<std::size_t>& rows) const {
  Table out;
  out.names = names;
  out.dropped_rows = dropped_rows;
  for (const auto& col : columns) {
    std::vector<double> picked;
    picked.reserve(rows.size());
    for (std::size_t r : rows) picked.push_back(col.at(r));
    out.columns.push_back(std::move(picked));
  }
  return out;
}

Table load_csv(const std::filesystem::path& path, const std::string& target) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw Error(ErrorCode::kEmptyAfterFiltering, path.string() + " is empty");
  if (!header.empty() && header.back() == '\r') header.pop_back();
  const char delim =
      std::count(header.begin(), header.end(), ';') > std::count(header.begin(), header.end(), ',') ? ';' : ',';

  Table table;
  table.names = split_fields(header, delim);
  if (!table.has(target)) {
    throw Error(ErrorCode::kMissingTarget, "target column '" + target + "' not in " + path.string());
  }
  table.columns.resize(table.names.size());

  std::string line;
  std::size_t line_no = 1;
  std::vector<double> row(table.names.size());
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto cells = split_fields(line, delim);
    if (cells.size() != table.names.size()) {
      throw Error(ErrorCode::kInvalidInput, path.string() + ":" + std::to_string(line_no) + ": expected " +
                                                std::to_string(table.names.size()) + " fields, got " +
                                                std::to_string(cells.size()));
    }
    bool missing = false;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (is_missing(cells[c])) {
        missing = true;
        continue;
      }
      const auto v = parse_number(cells[c]);
      if (!v) {
        throw Error(ErrorCode::kNonNumericColumn, "column '" + table.names[c] + "' is not numeric (line " +
                                                      std::to_string(line_no) + ": '" + cells[c] + "')");
      }
      row[c] = *v;
    }
    if (missing) {
      ++table.dropped_rows;
      continue;
    }
    for (std::size_t c = 0; c < row.size(); ++c) table.columns[c].push_back(row[c]);
  }
  if (table.rows() == 0) throw Error(ErrorCode::kEmptyAfterFiltering, path.string() + " has no complete rows");
  return table;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double ratio,
                                                                            std::uint64_t seed) {
  if (n < 5) config_error("train/test split needs at least 5 rows, got " + std::to_string(n));
  if (!(ratio > 0.0 && ratio < 1.0)) config_error("train ratio must lie in (0, 1)");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  SplitMix64 rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
  auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return {std::move(train), std::move(test)};
}

std::pair<Table, Table> split_train_test(const Table& table, double ratio, std::uint64_t seed) {
  const auto [train, test] = split_indices(table.rows(), ratio, seed);
  return {table.select_rows(train), table.select_rows(test)};
}

// ---------------------------------------------------------------------------
// Scenario files

ScenarioConfig ScenarioConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
  ScenarioConfig c;
  try {
    check_keys(j,
               {"name", "task", "source", "active", "parties", "ignore", "config_kind", "duplicates", "noise_parties",
                "selection", "training", "train_ratio", "random_repeats", "seeds", "endpoints"},
               "scenario");
    c.name = j.value("name", "");
    const std::string task = j.value("task", "regression");
    if (task == "regression") {
      c.task = Task::kRegression;
    } else if (task == "classification") {
      c.task = Task::kClassification;
    } else {
      config_error("unknown task '" + task + "'");
    }

    const json& source = j.at("source");
    check_keys(source, {"csv", "synthetic", "target", "binarize_at"}, "source");
    c.target = source.value("target", "y");
    if (source.contains("binarize_at")) c.binarize_at = source.at("binarize_at").get<double>();
    if (source.contains("csv")) {
      std::filesystem::path p = source.at("csv").get<std::string>();
      c.csv = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
      c.csv_as_written = source.at("csv").get<std::string>();
    }
    if (source.contains("synthetic")) {
      const json& s = source.at("synthetic");
      check_keys(s, {"n", "features", "noise_sigma", "intercept"}, "source.synthetic");
      SyntheticSpec spec;
      spec.n = s.at("n").get<std::size_t>();
      spec.noise_sigma = s.value("noise_sigma", 0.0);
      spec.intercept = s.value("intercept", 0.0);
      for (const auto& f : s.at("features")) {
        check_keys(f, {"name", "beta"}, "synthetic feature");
        spec.features.push_back({f.at("name").get<std::string>(), f.value("beta", 0.0)});
      }
      c.synthetic = std::move(spec);
    }

    c.active = j.value("active", std::vector<std::string>{});
    for (const auto& [key, cols] : j.at("parties").items()) {
      c.parties[parse_party_key(key)] = cols.get<std::vector<std::string>>();
    }
    c.ignore = j.value("ignore", std::vector<std::string>{});
    c.kind = kind_from(j.value("config_kind", "basic"));
    for (const auto& d : j.value("duplicates", json::array())) {
      check_keys(d, {"column", "party", "transform"}, "duplicate");
      c.duplicates.push_back(
          {d.at("column").get<std::string>(), d.at("party").get<int>(), transform_from(d.value("transform", "copy"))});
    }
    for (const auto& np : j.value("noise_parties", json::array())) {
      check_keys(np, {"party", "features"}, "noise party");
      c.noise_parties.push_back({np.at("party").get<int>(), np.at("features").get<std::size_t>()});
    }

    const json sel = j.value("selection", json::object());
    check_keys(sel, {"m", "theta", "delta", "tau", "concurrency", "mask_width"}, "selection");
    c.m = sel.value("m", std::size_t{1});
    c.thresholds.theta = sel.value("theta", c.thresholds.theta);
    c.thresholds.delta = sel.value("delta", c.thresholds.delta);
    c.thresholds.tau = sel.value("tau", c.thresholds.tau);
    c.concurrency = sel.value("concurrency", c.concurrency);
    if (sel.contains("mask_width") && !sel.at("mask_width").is_null()) {
      c.mask_width = sel.at("mask_width").get<std::size_t>();
    }

    const json tr = j.value("training", json::object());
    check_keys(tr, {"learning_rate", "epochs"}, "training");
    c.learning_rate = tr.value("learning_rate", c.learning_rate);
    c.epochs = tr.value("epochs", c.epochs);

    c.train_ratio = j.value("train_ratio", c.train_ratio);
    c.random_repeats = j.value("random_repeats", c.random_repeats);

    const json seeds = j.value("seeds", json::object());
    check_keys(seeds, {"split", "protocol", "data", "random"}, "seeds");
    c.seeds.split = seeds.value("split", std::uint64_t{0});
    c.seeds.protocol = seeds.value("protocol", std::uint64_t{0});
    c.seeds.data = seeds.value("data", std::uint64_t{0});
    c.seeds.random = seeds.value("random", std::uint64_t{0});

    for (const auto& [key, address] : j.value("endpoints", json::object()).items()) {
      c.endpoints[parse_party_key(key)] = address.get<std::string>();
    }
  } catch (const json::exception& e) {
    config_error(std::string("scenario: ") + e.what());
  }
  c.validate();
  return c;
}

ScenarioConfig ScenarioConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open scenario " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    config_error(path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

json ScenarioConfig::to_json() const {
  json source = json::object();
  source["target"] = target;
  if (csv) source["csv"] = csv_as_written.empty() ? csv->string() : csv_as_written;
  if (binarize_at) source["binarize_at"] = *binarize_at;
  if (synthetic) {
    json features = json::array();
    for (const auto& f : synthetic->features) features.push_back({{"name", f.name}, {"beta", f.beta}});
    source["synthetic"] = {{"n", synthetic->n},
                           {"features", features},
                           {"noise_sigma", synthetic->noise_sigma},
                           {"intercept", synthetic->intercept}};
  }
  json parties_j = json::object();
  for (const auto& [id, cols] : parties) parties_j[std::to_string(id)] = cols;
  json dups = json::array();
  for (const auto& d : duplicates) {
    dups.push_back({{"column", d.column}, {"party", d.party}, {"transform", transform_name(d.transform)}});
  }
  json noise = json::array();
  for (const auto& np : noise_parties) noise.push_back({{"party", np.party}, {"features", np.features}});
  json endpoints_j = json::object();
  for (const auto& [id, address] : endpoints) endpoints_j[std::to_string(id)] = address;

  json selection = {{"m", m},
                    {"theta", thresholds.theta},
                    {"delta", thresholds.delta},
                    {"tau", thresholds.tau},
                    {"concurrency", concurrency}};
  selection["mask_width"] = mask_width ? json(*mask_width) : json(nullptr);

  return {{"name", name},
          {"task", task == Task::kRegression ? "regression" : "classification"},
          {"source", source},
          {"active", active},
          {"parties", parties_j},
          {"ignore", ignore},
          {"config_kind", kind_name(kind)},
          {"duplicates", dups},
          {"noise_parties", noise},
          {"selection", selection},
          {"training", {{"learning_rate", learning_rate}, {"epochs", epochs}}},
          {"train_ratio", train_ratio},
          {"random_repeats", random_repeats},
          {"seeds",
           {{"split", seeds.split}, {"protocol", seeds.protocol}, {"data", seeds.data}, {"random", seeds.random}}},
          {"endpoints", endpoints_j}};
}

std::vector<int> ScenarioConfig::party_ids() const {
  std::set<int> ids;
  for (const auto& [id, cols] : parties) ids.insert(id);
  for (const auto& d : duplicates) ids.insert(d.party);
  for (const auto& np : noise_parties) ids.insert(np.party);
  return {ids.begin(), ids.end()};
}

void ScenarioConfig::validate() const {
  if (csv.has_value() == synthetic.has_value()) config_error("source needs exactly one of csv or synthetic");
  if (target.empty()) config_error("target column must be named");
  if (binarize_at && task != Task::kClassification) config_error("binarize_at only applies to classification");

  std::set<std::string> assigned;
  auto assign = [&](const std::string& col, const std::string& owner) {
    if (col == target) config_error("target '" + target + "' must stay with the active party, not " + owner);
    if (!assigned.insert(col).second) config_error("column '" + col + "' assigned more than once");
  };
  for (const auto& col : active) assign(col, "the active features");
  for (const auto& [id, cols] : parties) {
    if (id < 1) config_error("passive party ids start at 1");
    for (const auto& col : cols) assign(col, "party " + std::to_string(id));
  }
  for (const auto& col : ignore) assign(col, "the ignore list");

  if (synthetic) {
    if (synthetic->n < 5) config_error("synthetic n must be at least 5");
    std::set<std::string> names;
    for (const auto& f : synthetic->features) {
      if (!std::isfinite(f.beta)) config_error("synthetic beta must be finite");
      if (f.name == target) config_error("synthetic feature named like the target");
      if (!names.insert(f.name).second) config_error("duplicate synthetic feature '" + f.name + "'");
    }
    if (names != assigned) config_error("every synthetic feature must be assigned exactly once");
  }

  if (kind != ConfigKind::kOverlapping && !duplicates.empty()) config_error("duplicates need config_kind overlapping");
  if (kind != ConfigKind::kIrrelevant && !noise_parties.empty()) {
    config_error("noise_parties need config_kind irrelevant");
  }
  std::set<std::pair<std::string, int>> placed;
  for (const auto& d : duplicates) {
    if (d.party < 1) config_error("duplicate target party must be >= 1");
    if (!placed.emplace(d.column, d.party).second) {
      config_error("'" + d.column + "' duplicated into party " + std::to_string(d.party) + " twice");
    }
    if (!assigned.count(d.column) || std::count(ignore.begin(), ignore.end(), d.column)) {
      config_error("duplicate source '" + d.column + "' is not an assigned feature");
    }
    const auto home = parties.find(d.party);
    if (home != parties.end() && std::count(home->second.begin(), home->second.end(), d.column)) {
      config_error("duplicate of '" + d.column + "' lands in its own party");
    }
  }
  std::set<int> noise_ids;
  for (const auto& np : noise_parties) {
    if (np.party < 1) config_error("noise party ids start at 1");
    if (np.features == 0) config_error("noise party needs at least one feature");
    if (parties.count(np.party) || !noise_ids.insert(np.party).second) {
      config_error("noise party " + std::to_string(np.party) + " collides with another party");
    }
    for (const auto& d : duplicates) {
      if (d.party == np.party) config_error("noise party " + std::to_string(np.party) + " also receives duplicates");
    }
  }

  const std::size_t k = party_ids().size();
  if (k == 0) config_error("scenario needs at least one passive party");
  if (m < 1 || m > k) config_error("M must lie in [1, " + std::to_string(k) + "], got " + std::to_string(m));
  thresholds.validate();
  if (concurrency < 1) config_error("concurrency must be >= 1");
  if (mask_width && *mask_width < 1) config_error("mask_width must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) config_error("learning_rate must be positive");
  if (epochs < 1) config_error("epochs must be >= 1");
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) config_error("train_ratio must lie in (0, 1)");
  if (random_repeats < 1) config_error("random_repeats must be >= 1");
}

std::string scenario_digest(const ScenarioConfig& config) {
  json j = config.to_json();
  j.erase("selection");
  j.erase("training");
  j.erase("endpoints");
  j.erase("random_repeats");
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash_string(j.dump())));
  return buf;
}

// ---------------------------------------------------------------------------
// Partitioning and generators

Partition partition_vertical(const Table& table, const ScenarioConfig& config,
                             const std::map<std::string, double>& betas) {
  config.validate();
  std::set<std::string> expected;
  for (const auto& name : table.names) {
    if (name != config.target) expected.insert(name);
  }
  std::set<std::string> assigned(config.active.begin(), config.active.end());
  for (const auto& [id, cols] : config.parties) assigned.insert(cols.begin(), cols.end());
  assigned.insert(config.ignore.begin(), config.ignore.end());
  for (const auto& name : assigned) {
    if (!expected.count(name)) config_error("column '" + name + "' is not in the data");
  }
  for (const auto& name : expected) {
    if (!assigned.count(name)) config_error("column '" + name + "' is not assigned to any party");
  }

  Partition out;
  out.active.party_id = 0;
  out.active.feature_names = config.active;
  for (const auto& name : config.active) out.active.columns.push_back(table.column(name));
  std::vector<double> labels = table.column(config.target);
  if (config.task == Task::kClassification) {
    for (double& y : labels) {
      if (config.binarize_at) {
        y = y >= *config.binarize_at ? 1.0 : 0.0;
      } else if (y != 0.0 && y != 1.0) {
        config_error("classification target must be 0/1 or set source.binarize_at");
      }
    }
  }
  out.active.labels = std::move(labels);

  std::map<int, PartyDataset> parties;
  std::map<std::string, FeatureRef> home;
  for (const auto& [id, cols] : config.parties) {
    PartyDataset& p = parties[id];
    p.party_id = id;
    for (const auto& name : cols) {
      home[name] = FeatureRef{id, p.columns.size()};
      p.feature_names.push_back(name);
      p.columns.push_back(table.column(name));
    }
  }

  auto beta_of = [&](const std::string& name) {
    const auto it = betas.find(name);
    return it == betas.end() ? 0.0 : it->second;
  };

  // Every passive holder of a source column, original first, then its copies.
  std::map<std::string, std::vector<FeatureRef>> holders;
  for (const auto& d : config.duplicates) {
    PartyDataset& p = parties[d.party];
    p.party_id = d.party;
    std::vector<double> col = table.column(d.column);
    for (double& v : col) v = apply_transform(d.transform, v);
    const FeatureRef copy{d.party, p.columns.size()};
    p.feature_names.push_back(d.column + "_dup" + std::to_string(d.party));
    p.columns.push_back(std::move(col));
    const auto src = home.find(d.column);
    if (src == home.end()) {
      out.truth.active_duplicates.insert(copy);
    } else {
      auto& group = holders[d.column];
      if (group.empty()) group.push_back(src->second);
      for (const FeatureRef& other : group) out.truth.redundant_feature_pairs.insert(std::minmax(other, copy));
      group.push_back(copy);
    }
    if (beta_of(d.column) != 0.0) out.truth.informative_parties.insert(d.party);
  }

  for (const auto& np : config.noise_parties) {
    PartyDataset& p = parties[np.party];
    p.party_id = np.party;
    for (std::size_t f = 0; f < np.features; ++f) {
      SplitMix64 rng(derive_seed({config.seeds.data, kNoiseTag, static_cast<std::uint64_t>(np.party), f}));
      std::vector<double> col(table.rows());
      for (double& v : col) v = rng.normal();
      p.feature_names.push_back("noise" + std::to_string(np.party) + "_" + std::to_string(f));
      p.columns.push_back(std::move(col));
    }
    out.truth.noise_parties.insert(np.party);
  }

  for (const auto& [id, cols] : config.parties) {
    for (const auto& name : cols) {
      if (beta_of(name) != 0.0) out.truth.informative_parties.insert(id);
    }
  }
  for (auto& [id, p] : parties) out.passive.push_back(std::move(p));
  return out;
}

Partition select_rows(const Partition& partition, const std::vector<std::size_t>& rows) {
  auto pick = [&](const std::vector<double>& col) {
    std::vector<double> out;
    out.reserve(rows.size());
    for (std::size_t r : rows) out.push_back(col.at(r));
    return out;
  };
  auto pick_party = [&](const PartyDataset& p) {
    PartyDataset q;
    q.party_id = p.party_id;
    q.feature_names = p.feature_names;
    for (const auto& col : p.columns) q.columns.push_back(pick(col));
    if (p.labels) q.labels = pick(*p.labels);
    return q;
  };
  Partition out;
  out.active = pick_party(partition.active);
  for (const auto& p : partition.passive) out.passive.push_back(pick_party(p));
  out.truth = partition.truth;
  return out;
}

Table generate_synthetic(const SyntheticSpec& spec, Task task, std::uint64_t seed, const std::string& target) {
  Table t;
  std::vector<double> score(spec.n, spec.intercept);
  for (std::size_t j = 0; j < spec.features.size(); ++j) {
    SplitMix64 rng(derive_seed({seed, kSyntheticTag, j}));
    std::vector<double> col(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
      col[i] = rng.normal();
      score[i] += spec.features[j].beta * col[i];
    }
    t.names.push_back(spec.features[j].name);
    t.columns.push_back(std::move(col));
  }
  SplitMix64 eps(derive_seed({seed, kEpsilonTag}));
  std::vector<double> y(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    if (task == Task::kRegression) {
      y[i] = score[i] + spec.noise_sigma * eps.normal();
    } else {
      y[i] = eps.uniform() < sigmoid(score[i]) ? 1.0 : 0.0;
    }
  }
  t.names.push_back(target);
  t.columns.push_back(std::move(y));
  return t;
}

PreparedScenario prepare_scenario(const ScenarioConfig& config) {
  config.validate();
  Table table;
  std::map<std::string, double> betas;
  if (config.synthetic) {
    table = generate_synthetic(*config.synthetic, config.task, config.seeds.data, config.target);
    for (const auto& f : config.synthetic->features) betas[f.name] = f.beta;
  } else {
    table = load_csv(*config.csv, config.target);
  }
  const Partition full = partition_vertical(table, config, betas);
  const auto [train_rows, test_rows] = split_indices(table.rows(), config.train_ratio, config.seeds.split);

  PreparedScenario out;
  out.config = config;
  out.digest = scenario_digest(config);
  out.train = select_rows(full, train_rows);
  out.test = select_rows(full, test_rows);
  out.truth = full.truth;
  out.dropped_rows = table.dropped_rows;

  if (config.task == Task::kRegression) {
    std::vector<double>& ytr = *out.train.active.labels;
    const double mu = mean(ytr);
    const double sd = std_pop(ytr);
    if (!(sd > 0.0)) config_error("regression target is constant on the training split");
    for (double& y : ytr) y = (y - mu) / sd;
    for (double& y : *out.test.active.labels) y = (y - mu) / sd;
  }
  return out;
}

}  // namespace vflrps
