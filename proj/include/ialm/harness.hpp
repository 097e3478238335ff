// Copyright 2026 The ialm Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Experiment harness behind the command-line tool: configuration, problem
// assembly, the solve/sweep/check/gradcheck commands and their output.
//
// Configuration is flat key=value text grouped in [sections]. Every key can
// also be set through the environment as IALM_<SECTION>_<KEY>; precedence is
// defaults < file < environment < command-line flags.

#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <future>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "ialm/gradcheck.hpp"
#include "ialm/problems.hpp"
#include "ialm/regularity.hpp"
#include "ialm/solver.hpp"

namespace ialm::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailure = 1,
  kExitConfigError = 2,
  kExitSolverFailure = 3,
  kExitNumericFault = 4,
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct RunConfig {
  std::uint64_t seed = 1;

  // [problem]
  std::string kind = "geneig";  // geneig | clustering | basis_pursuit | quadratic
  int n = 50;
  std::string spectrum = "gaussian_iid";  // gaussian_iid | poly_decay | exp_decay
  double p = 1.0;
  bool rotate = true;
  int clusters = 3;
  int points_per_cluster = 20;
  int dim = 2;
  double separation = 10.0;
  int rank = 0;  // <= 0: clusters + 2
  std::string distance_csv;
  int d = 100;
  int rows = 50;
  int sparsity = 5;
  double noise_sigma = 1e-3;
  int size = 10;
  double condition = 10.0;
  int zero_constraints = 0;

  // [init]
  std::string init = "default";  // default | random | least_squares | eigenvector
  double init_scale = 1.0;
  double init_offset = 1e-2;
  int eigen_index = 1;

  // [ialm]
  IalmConfig ialm;

  // [sweep]
  std::vector<double> taus{1e-1, 3e-2, 1e-2, 3e-3, 1e-3};
  int jobs = 0;  // 0: hardware concurrency

  // [gradcheck]
  int gradcheck_trials = 100;
  double gradcheck_tol = 1e-5;
  double gradcheck_radius = 1.0;

  // [output]
  std::string out_path;  // empty: stdout
  std::string format = "csv";
  bool timing = false;
};

// ---------------------------------------------------------------------------
// Value parsing and formatting

inline std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  try {
    size_t used = 0;
    const double out = std::stod(v, &used);
    if (used == v.size() && std::isfinite(out)) return out;
  } catch (const std::exception&) {
  }
  throw ConfigError("config: '" + key + "' expects a finite number, got '" +
                    raw + "'");
}

inline long long parse_int(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  long long out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("config: '" + key + "' expects an integer, got '" + raw +
                      "'");
  }
  return out;
}

inline int parse_int32(const std::string& key, const std::string& raw) {
  const long long v = parse_int(key, raw);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw ConfigError("config: '" + key + "' is out of range");
  }
  return static_cast<int>(v);
}

inline bool parse_bool(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config: '" + key + "' expects a boolean, got '" + raw + "'");
}

inline std::string parse_choice(const std::string& key, const std::string& raw,
                                const std::vector<std::string>& allowed) {
  const std::string v = trim(raw);
  if (std::find(allowed.begin(), allowed.end(), v) != allowed.end()) return v;
  std::string list;
  for (const auto& a : allowed) list += (list.empty() ? "" : "|") + a;
  throw ConfigError("config: '" + key + "' must be one of " + list + ", got '" +
                    raw + "'");
}

inline std::vector<double> parse_list(const std::string& key,
                                      const std::string& raw) {
  std::vector<double> out;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(key, item));
  return out;
}

inline std::string format_list(const std::vector<double>& v) {
  std::string out;
  for (double x : v) out += (out.empty() ? "" : ",") + format_number(x);
  return out;
}

inline std::string subsolver_name(const SubsolverKind& kind) {
  if (std::holds_alternative<ApgmOptions>(kind)) return "apgm";
  if (std::holds_alternative<ProjectedGradientOptions>(kind)) {
    return "projected_gradient";
  }
  return "trust_region";
}

// ---------------------------------------------------------------------------
// Key table

struct ConfigKey {
  std::string section;
  std::string name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;

  std::string full() const { return section + "." + name; }
  std::string env() const {
    std::string out = "IALM_" + section + "_" + name;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return out;
  }
};

namespace detail {

template <class T>
ConfigKey number_key(std::string section, std::string name, T RunConfig::*field) {
  const std::string full = section + "." + name;
  ConfigKey key{std::move(section), std::move(name), nullptr, nullptr};
  key.set = [field, full](RunConfig& c, const std::string& v) {
    if constexpr (std::is_same_v<T, double>) {
      c.*field = parse_double(full, v);
    } else if constexpr (std::is_same_v<T, int>) {
      c.*field = parse_int32(full, v);
    } else if constexpr (std::is_same_v<T, bool>) {
      c.*field = parse_bool(full, v);
    } else {
      c.*field = trim(v);
    }
  };
  key.get = [field](const RunConfig& c) {
    if constexpr (std::is_same_v<T, double>) {
      return format_number(c.*field);
    } else if constexpr (std::is_same_v<T, int>) {
      return std::to_string(c.*field);
    } else if constexpr (std::is_same_v<T, bool>) {
      return std::string(c.*field ? "true" : "false");
    } else {
      return c.*field;
    }
  };
  return key;
}

template <class T>
ConfigKey ialm_key(std::string name, T IalmConfig::*field) {
  const std::string full = "ialm." + name;
  ConfigKey key{"ialm", std::move(name), nullptr, nullptr};
  key.set = [field, full](RunConfig& c, const std::string& v) {
    if constexpr (std::is_same_v<T, double>) {
      c.ialm.*field = parse_double(full, v);
    } else {
      c.ialm.*field = parse_int32(full, v);
    }
  };
  key.get = [field](const RunConfig& c) {
    if constexpr (std::is_same_v<T, double>) {
      return format_number(c.ialm.*field);
    } else {
      return std::to_string(c.ialm.*field);
    }
  };
  return key;
}

inline ConfigKey choice_key(std::string section, std::string name,
                     std::string RunConfig::*field,
                     std::vector<std::string> allowed) {
  ConfigKey key = number_key(section, name, field);
  const std::string full = section + "." + name;
  key.set = [field, full, allowed](RunConfig& c, const std::string& v) {
    c.*field = parse_choice(full, v, allowed);
  };
  return key;
}

}  // namespace detail

inline const std::vector<ConfigKey>& config_keys() {
  using detail::choice_key;
  using detail::ialm_key;
  using detail::number_key;
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    k.push_back({"run", "seed",
                 [](RunConfig& c, const std::string& v) {
                   const long long s = parse_int("run.seed", v);
                   if (s < 0) throw ConfigError("config: 'run.seed' must be >= 0");
                   c.seed = static_cast<std::uint64_t>(s);
                 },
                 [](const RunConfig& c) { return std::to_string(c.seed); }});

    k.push_back(choice_key("problem", "kind", &RunConfig::kind,
                           {"geneig", "clustering", "basis_pursuit", "quadratic"}));
    k.push_back(number_key("problem", "n", &RunConfig::n));
    k.push_back(choice_key("problem", "spectrum", &RunConfig::spectrum,
                           {"gaussian_iid", "poly_decay", "exp_decay"}));
    k.push_back(number_key("problem", "p", &RunConfig::p));
    k.push_back(number_key("problem", "rotate", &RunConfig::rotate));
    k.push_back(number_key("problem", "clusters", &RunConfig::clusters));
    k.push_back(number_key("problem", "points_per_cluster",
                           &RunConfig::points_per_cluster));
    k.push_back(number_key("problem", "dim", &RunConfig::dim));
    k.push_back(number_key("problem", "separation", &RunConfig::separation));
    k.push_back(number_key("problem", "rank", &RunConfig::rank));
    k.push_back(number_key("problem", "distance_csv", &RunConfig::distance_csv));
    k.push_back(number_key("problem", "d", &RunConfig::d));
    k.push_back(number_key("problem", "rows", &RunConfig::rows));
    k.push_back(number_key("problem", "sparsity", &RunConfig::sparsity));
    k.push_back(number_key("problem", "noise_sigma", &RunConfig::noise_sigma));
    k.push_back(number_key("problem", "size", &RunConfig::size));
    k.push_back(number_key("problem", "condition", &RunConfig::condition));
    k.push_back(number_key("problem", "zero_constraints",
                           &RunConfig::zero_constraints));

    k.push_back(choice_key("init", "kind", &RunConfig::init,
                           {"default", "random", "least_squares", "eigenvector"}));
    k.push_back(number_key("init", "scale", &RunConfig::init_scale));
    k.push_back(number_key("init", "offset", &RunConfig::init_offset));
    k.push_back(number_key("init", "eigen_index", &RunConfig::eigen_index));

    k.push_back(ialm_key("beta1", &IalmConfig::beta1));
    k.push_back(ialm_key("b", &IalmConfig::b));
    k.push_back(ialm_key("sigma1", &IalmConfig::sigma1));
    k.push_back(ialm_key("tau_f", &IalmConfig::tau_f));
    k.push_back(ialm_key("tau_s", &IalmConfig::tau_s));
    k.push_back(ialm_key("max_outer", &IalmConfig::max_outer));
    k.push_back(ialm_key("inner_max_iters", &IalmConfig::inner_max_iters));
    k.push_back({"ialm", "mode",
                 [](RunConfig& c, const std::string& v) {
                   c.ialm.mode = parse_choice("ialm.mode", v,
                                              {"first_order", "second_order"}) ==
                                         "first_order"
                                     ? StationarityMode::FirstOrder
                                     : StationarityMode::SecondOrder;
                 },
                 [](const RunConfig& c) {
                   return std::string(c.ialm.mode == StationarityMode::FirstOrder
                                          ? "first_order"
                                          : "second_order");
                 }});
    k.push_back({"ialm", "subsolver",
                 [](RunConfig& c, const std::string& v) {
                   const std::string s = parse_choice(
                       "ialm.subsolver", v,
                       {"apgm", "projected_gradient", "trust_region"});
                   if (s == "apgm") {
                     c.ialm.subsolver = ApgmOptions{};
                   } else if (s == "projected_gradient") {
                     c.ialm.subsolver = ProjectedGradientOptions{};
                   } else {
                     c.ialm.subsolver = TrustRegionOptions{};
                   }
                 },
                 [](const RunConfig& c) { return subsolver_name(c.ialm.subsolver); }});

    k.push_back({"sweep", "taus",
                 [](RunConfig& c, const std::string& v) {
                   c.taus = parse_list("sweep.taus", v);
                 },
                 [](const RunConfig& c) { return format_list(c.taus); }});
    k.push_back(number_key("sweep", "jobs", &RunConfig::jobs));

    k.push_back(number_key("gradcheck", "trials", &RunConfig::gradcheck_trials));
    k.push_back(number_key("gradcheck", "tol", &RunConfig::gradcheck_tol));
    k.push_back(number_key("gradcheck", "radius", &RunConfig::gradcheck_radius));

    k.push_back(number_key("output", "path", &RunConfig::out_path));
    k.push_back(choice_key("output", "format", &RunConfig::format, {"csv", "json"}));
    k.push_back(number_key("output", "timing", &RunConfig::timing));
    return k;
  }();
  return keys;
}

inline const ConfigKey& find_key(const std::string& section,
                                 const std::string& name) {
  for (const auto& key : config_keys()) {
    if (key.section == section && key.name == name) return key;
  }
  throw ConfigError("config: unknown key '" + section + "." + name + "'");
}

inline void set_value(RunConfig& cfg, const std::string& dotted,
                      const std::string& value) {
  const auto dot = dotted.find('.');
  if (dot == std::string::npos) {
    throw ConfigError("config: key '" + dotted + "' must be section.key");
  }
  find_key(dotted.substr(0, dot), dotted.substr(dot + 1)).set(cfg, value);
}

// Applies a key=value text with [sections]; unknown sections or keys are
// rejected.
inline void apply_config_text(RunConfig& cfg, std::istream& in,
                              const std::string& origin) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("config '" + origin + "': " + e.message() + " (line " +
                      std::to_string(e.line()) + ")");
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      throw ConfigError("config '" + origin + "': key '" + section +
                        "' appears outside a section");
    }
    for (const auto& [name, value] : body) {
      find_key(section, name).set(cfg, value.data());
    }
  }
}

inline void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  apply_config_text(cfg, in, path);
}

// Applies IALM_<SECTION>_<KEY> variables. The lookup function is injectable
// for tests.
inline void apply_environment(
    RunConfig& cfg,
    const std::function<const char*(const char*)>& lookup = [](const char* n) {
      return std::getenv(n);
    }) {
  for (const auto& key : config_keys()) {
    if (const char* v = lookup(key.env().c_str())) key.set(cfg, v);
  }
}

inline void validate(const RunConfig& cfg) {
  try {
    cfg.ialm.validate();
  } catch (const ContractError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError("config: " + msg);
  };
  need(cfg.init_scale > 0.0, "init.scale must be positive");
  need(cfg.init_offset >= 0.0, "init.offset must be >= 0");
  need(cfg.gradcheck_trials >= 1, "gradcheck.trials must be >= 1");
  need(cfg.gradcheck_tol > 0.0, "gradcheck.tol must be positive");
  need(cfg.gradcheck_radius > 0.0, "gradcheck.radius must be positive");
  need(cfg.jobs >= 0, "sweep.jobs must be >= 0");
  for (double t : cfg.taus) need(t > 0.0, "sweep.taus entries must be positive");
  if (cfg.kind == "geneig") {
    need(cfg.n >= 2, "problem.n must be >= 2");
    need(cfg.p > 0.0, "problem.p must be positive");
  } else if (cfg.kind == "clustering") {
    need(cfg.clusters >= 1 && cfg.points_per_cluster >= 1 && cfg.dim >= 1,
         "clustering sizes must be positive");
    need(cfg.separation >= 0.0, "problem.separation must be >= 0");
  } else if (cfg.kind == "basis_pursuit") {
    need(cfg.sparsity >= 0 && cfg.sparsity <= cfg.rows && cfg.rows <= cfg.d &&
             cfg.rows >= 1,
         "basis pursuit needs 0 <= sparsity <= rows <= d");
    need(cfg.noise_sigma >= 0.0, "problem.noise_sigma must be >= 0");
  } else {
    need(cfg.size >= 1, "problem.size must be >= 1");
    need(cfg.condition >= 1.0, "problem.condition must be >= 1");
    need(cfg.zero_constraints >= 0, "problem.zero_constraints must be >= 0");
  }
  if (cfg.init == "least_squares") {
    need(cfg.kind == "basis_pursuit", "init.kind=least_squares needs basis_pursuit");
  }
  if (cfg.init == "eigenvector") {
    need(cfg.kind == "geneig", "init.kind=eigenvector needs geneig");
    need(cfg.eigen_index >= 0 && cfg.eigen_index < cfg.n,
         "init.eigen_index out of range");
  }
}

// Effective values of every key, in table order.
inline std::vector<std::pair<std::string, std::string>> dump(const RunConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& key : config_keys()) out.emplace_back(key.full(), key.get(cfg));
  return out;
}

// ---------------------------------------------------------------------------
// Problem assembly

struct Experiment {
  ProblemDef prob;
  Vector x1;
  Vector y0;
  std::optional<GenEigInstance> geneig;
  std::optional<double> dense_min_eig;  // geneig: smallest pencil eigenvalue
  std::optional<BpSample> bp;
  std::optional<ClusteringInstance> clustering;
  std::vector<int> labels;  // planted clustering labels when generated
};

inline std::uint64_t init_seed(std::uint64_t seed) {
  return seed ^ 0x9e3779b97f4a7c15ULL;
}

inline Experiment build_experiment(const RunConfig& cfg) {
  Experiment ex;
  const std::string init = cfg.init;
  if (cfg.kind == "geneig") {
    Spectrum spectrum;
    spectrum.p = cfg.p;
    spectrum.kind = cfg.spectrum == "gaussian_iid" ? SpectrumKind::GaussianIID
                    : cfg.spectrum == "poly_decay" ? SpectrumKind::PolyDecay
                                                   : SpectrumKind::ExpDecay;
    ex.geneig = gen_geneig(cfg.n, spectrum, cfg.seed, cfg.rotate);
    ex.prob = make_geneig(*ex.geneig);
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(ex.geneig->C,
                                                        ex.geneig->B);
    ex.dense_min_eig = es.eigenvalues()[0];
    if (init == "eigenvector") {
      // A B-normalized eigenvector with its exact multiplier: a KKT point,
      // and a saddle unless the index is 0.
      ex.x1 = es.eigenvectors().col(cfg.eigen_index);
      ex.y0 = Vector::Constant(1, -es.eigenvalues()[cfg.eigen_index]);
      return ex;
    }
  } else if (cfg.kind == "clustering") {
    ClusteringInstance inst;
    if (!cfg.distance_csv.empty()) {
      inst.D = read_distance_csv(cfg.distance_csv);
      inst.s = cfg.clusters;
      inst.r = cfg.rank > 0 ? cfg.rank : cfg.clusters + 2;
    } else {
      SyntheticClusters sc =
          gen_synthetic_clusters(cfg.clusters, cfg.points_per_cluster, cfg.dim,
                                 cfg.separation, cfg.seed, cfg.rank);
      inst = std::move(sc.instance);
      ex.labels = std::move(sc.labels);
    }
    ex.clustering = inst;
    ex.prob = make_clustering(inst);
  } else if (cfg.kind == "basis_pursuit") {
    ex.bp = gen_bp(cfg.d, cfg.rows, cfg.sparsity, cfg.noise_sigma, cfg.seed);
    ex.prob = make_basis_pursuit(ex.bp->instance);
    if (init == "default" || init == "least_squares") {
      ex.x1 = bp_least_squares_init(ex.bp->instance, cfg.init_offset);
    }
  } else {
    Vector h(cfg.size);
    for (int i = 0; i < cfg.size; ++i) {
      h[i] = cfg.size == 1 ? 1.0
                           : std::pow(cfg.condition, static_cast<double>(i) /
                                                         (cfg.size - 1));
    }
    ex.prob = make_quadratic(h, cfg.zero_constraints);
  }
  if (ex.x1.size() == 0) {
    ex.x1 = random_initial_point(ex.prob, cfg.init_scale, init_seed(cfg.seed));
  }
  ex.y0 = Vector::Zero(ex.prob.dim_constraint);
  return ex;
}

// ---------------------------------------------------------------------------
// Output

using Value = std::variant<bool, std::int64_t, double, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Value>> rows;
};

using Summary = std::vector<std::pair<std::string, Value>>;

inline std::string to_text(const Value& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, bool>) {
          return x ? "true" : "false";
        } else if constexpr (std::is_same_v<T, std::int64_t>) {
          return std::to_string(x);
        } else if constexpr (std::is_same_v<T, double>) {
          return format_number(x);
        } else {
          return x;
        }
      },
      v);
}

inline nlohmann::ordered_json to_json(const Value& v) {
  return std::visit([](const auto& x) { return nlohmann::ordered_json(x); }, v);
}

// Throws NumericalError naming the first non-finite field.
inline void require_finite(const Table& table, const Summary& summary) {
  for (const auto& row : table.rows) {
    for (size_t j = 0; j < row.size(); ++j) {
      if (const double* d = std::get_if<double>(&row[j]); d && !std::isfinite(*d)) {
        throw NumericalError("non-finite value in column '" + table.columns[j] + "'");
      }
    }
  }
  for (const auto& [key, value] : summary) {
    if (const double* d = std::get_if<double>(&value); d && !std::isfinite(*d)) {
      throw NumericalError("non-finite value in summary field '" + key + "'");
    }
  }
}

inline void write_csv(std::ostream& os, const Table& table,
                      const Summary& summary) {
  for (size_t j = 0; j < table.columns.size(); ++j) {
    os << (j ? "," : "") << table.columns[j];
  }
  os << '\n';
  for (const auto& row : table.rows) {
    for (size_t j = 0; j < row.size(); ++j) os << (j ? "," : "") << to_text(row[j]);
    os << '\n';
  }
  for (const auto& [key, value] : summary) {
    os << "# " << key << '=' << to_text(value) << '\n';
  }
}

inline void write_json(std::ostream& os, const std::string& table_name,
                       const Table& table, const Summary& summary) {
  nlohmann::ordered_json doc;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& row : table.rows) {
    nlohmann::ordered_json obj;
    for (size_t j = 0; j < row.size(); ++j) obj[table.columns[j]] = to_json(row[j]);
    rows.push_back(std::move(obj));
  }
  doc[table_name] = std::move(rows);
  nlohmann::ordered_json sum = nlohmann::ordered_json::object();
  for (const auto& [key, value] : summary) sum[key] = to_json(value);
  doc["summary"] = std::move(sum);
  os << doc.dump(2) << '\n';
}

// Writes to cfg.out_path (stdout when empty) in cfg.format.
inline void emit(const RunConfig& cfg, const std::string& table_name,
                 const Table& table, const Summary& summary) {
  require_finite(table, summary);
  std::ostringstream buf;
  if (cfg.format == "json") {
    write_json(buf, table_name, table, summary);
  } else {
    write_csv(buf, table, summary);
  }
  if (cfg.out_path.empty()) {
    std::cout << buf.str();
    std::cout.flush();
    return;
  }
  std::ofstream out(cfg.out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open output file '" + cfg.out_path + "'");
  out << buf.str();
  if (!out) throw ConfigError("failed writing '" + cfg.out_path + "'");
}

// ---------------------------------------------------------------------------
// Commands

inline const std::vector<std::string>& trace_columns() {
  static const std::vector<std::string> cols{
      "k",         "beta",     "eps",        "sigma",      "feas",
      "grad_resid", "nu_hat",  "y_norm",     "grad_evals", "proj_evals",
      "hvp_evals", "wall_ms"};
  return cols;
}

// Degenerate rows (||A(x)|| <= 1e-12) carry nu_hat = -1.
inline std::vector<Value> trace_row(const TraceRecord& r, bool timing) {
  return {static_cast<std::int64_t>(r.k),
          r.beta,
          r.eps,
          r.sigma,
          r.feasibility,
          r.grad_residual,
          r.nu.degenerate ? -1.0 : r.nu.nu_hat,
          r.y_norm,
          r.inner_calls.grad_evals,
          r.inner_calls.prox_evals,
          r.inner_calls.hvp_evals,
          timing ? r.wall_ms : 0.0};
}

struct SolveOutcome {
  Experiment experiment;
  SolveReport report;
  Summary summary;
};

inline Summary solve_summary(const RunConfig& cfg, const Experiment& ex,
                             const SolveReport& rep) {
  Summary s;
  s.emplace_back("problem", ex.prob.name);
  s.emplace_back("certified", rep.certified);
  s.emplace_back("stop_reason", std::string(to_string(rep.stop_reason)));
  s.emplace_back("outer_iters", static_cast<std::int64_t>(rep.trace.size()));
  s.emplace_back("grad_evals", rep.totals.grad_evals);
  s.emplace_back("f_evals", rep.totals.f_evals);
  s.emplace_back("proj_evals", rep.totals.prox_evals);
  s.emplace_back("hvp_evals", rep.totals.hvp_evals);
  double max_y = rep.y0_norm;
  for (const auto& r : rep.trace) max_y = std::max(max_y, r.y_norm);
  s.emplace_back("y_max_bound", y_max_bound(rep));
  s.emplace_back("max_y_norm", max_y);
  s.emplace_back("A1_norm", rep.A1_norm);
  if (!rep.trace.empty()) {
    s.emplace_back("final_feas", rep.trace.back().feasibility);
    s.emplace_back("final_grad_resid", rep.trace.back().grad_residual);
  }
  const Vector& x = rep.x_final;
  const double f = ex.prob.f_eval(x);
  s.emplace_back("f_final", f);
  if (ex.geneig) {
    const double lmin = *ex.dense_min_eig;
    s.emplace_back("dense_min_eig", lmin);
    s.emplace_back("f_rel_error", std::abs(f - lmin) / std::max(std::abs(lmin), 1e-300));
    s.emplace_back("constraint_residual", std::abs(x.dot(ex.geneig->B * x) - 1.0));
  }
  if (ex.bp) {
    const Vector z = decode_bp(x);
    const double zn = ex.bp->z_star.norm();
    s.emplace_back("recovery_rel_error",
                   zn > 0.0 ? (z - ex.bp->z_star).norm() / zn : z.norm());
  }
  if (ex.clustering) {
    const Matrix V = as_factor(x, ex.clustering->n(), ex.clustering->r);
    const Vector ones = Vector::Ones(V.rows());
    s.emplace_back("row_sum_residual",
                   (V * (V.transpose() * ones) - ones).norm());
    if (!ex.labels.empty() && V.rows() >= 2) {
      s.emplace_back("co_cluster_agreement", co_cluster_agreement(V, ex.labels));
    }
  }
  for (const auto& [key, value] : dump(cfg)) {
    if (key.rfind("output.", 0) == 0) continue;
    s.emplace_back("config." + key, value);
  }
  s.emplace_back("config.y0", std::string(ex.y0.norm() == 0.0 ? "zero" : "given"));
  return s;
}

inline SolveOutcome run_solve(const RunConfig& cfg, Experiment ex,
                              const IterationObserver& observer = {}) {
  SolveOutcome out;
  out.report = ialm_solve(ex.prob, cfg.ialm, ex.x1, ex.y0, observer);
  out.summary = solve_summary(cfg, ex, out.report);
  out.experiment = std::move(ex);
  return out;
}

inline Table trace_table(const SolveReport& rep, bool timing) {
  Table t;
  t.columns = trace_columns();
  for (const auto& r : rep.trace) t.rows.push_back(trace_row(r, timing));
  return t;
}

// Maps exceptions to exit codes around a command body.
template <class Body>
int guarded(const char* command, Body&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    std::cerr << command << ": " << e.what() << '\n';
    return kExitConfigError;
  } catch (const NumericalError& e) {
    std::cerr << command << ": numeric fault: " << e.what() << '\n';
    return kExitNumericFault;
  } catch (const std::exception& e) {
    std::cerr << command << ": " << e.what() << '\n';
    return kExitSolverFailure;
  }
}

// Instance construction failures are configuration errors.
inline Experiment build_or_config_error(const RunConfig& cfg) {
  validate(cfg);
  try {
    return build_experiment(cfg);
  } catch (const NumericalError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

inline int cmd_solve(const RunConfig& cfg) {
  return guarded("solve", [&] {
    Experiment ex = build_or_config_error(cfg);
    const SolveOutcome out = run_solve(cfg, std::move(ex));
    emit(cfg, "trace", trace_table(out.report, cfg.timing), out.summary);
    if (out.report.certified) return static_cast<int>(kExitOk);
    std::cerr << "solve: not certified (" << to_string(out.report.stop_reason)
              << ")\n";
    return static_cast<int>(kExitSolverFailure);
  });
}

struct SweepPoint {
  double tau_f = 0.0;
  std::int64_t T = 0;  // total gradient evaluations
  bool certified = false;
  int outer_iters = 0;
};

struct SweepResult {
  std::vector<SweepPoint> points;  // in tau order
  bool fit = false;
  double slope = 0.0;
  double intercept = 0.0;
  double fit_residual = 0.0;  // RMS of the log-log residuals
  int certified_points = 0;
};

// Least-squares slope of log T against log(1/tau) over certified points.
inline void fit_sweep(SweepResult& res) {
  std::vector<double> xs, ys;
  for (const auto& p : res.points) {
    if (p.certified && p.T > 0) {
      xs.push_back(std::log(1.0 / p.tau_f));
      ys.push_back(std::log(static_cast<double>(p.T)));
    }
  }
  res.certified_points = static_cast<int>(xs.size());
  res.fit = xs.size() >= 3;
  if (!res.fit) return;
  const double nn = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i] / nn;
    my += ys[i] / nn;
  }
  double sxx = 0.0, sxy = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) {
    res.fit = false;
    return;
  }
  res.slope = sxy / sxx;
  res.intercept = my - res.slope * mx;
  double ss = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (res.intercept + res.slope * xs[i]);
    ss += r * r;
  }
  res.fit_residual = std::sqrt(ss / nn);
}

inline void validate_taus(const std::vector<double>& taus) {
  if (taus.size() < 3) {
    throw ConfigError("sweep: sweep.taus needs at least 3 entries");
  }
  for (size_t i = 1; i < taus.size(); ++i) {
    if (!(taus[i] < taus[i - 1])) {
      throw ConfigError("sweep: sweep.taus must be strictly decreasing");
    }
  }
}

// One fresh, seed-fixed solve per tau; solves may run concurrently and the
// result is ordered by tau.
inline SweepResult run_sweep(const RunConfig& cfg) {
  validate(cfg);
  validate_taus(cfg.taus);
  build_or_config_error(cfg);  // surface instance errors before any solve
  const size_t count = cfg.taus.size();
  size_t jobs = cfg.jobs > 0 ? static_cast<size_t>(cfg.jobs)
                             : std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, count);

  SweepResult res;
  res.points.resize(count);
  auto one = [&cfg](double tau) {
    RunConfig local = cfg;
    local.ialm.tau_f = tau;
    Experiment ex = build_experiment(local);
    const SolveReport rep = ialm_solve(ex.prob, local.ialm, ex.x1, ex.y0);
    SweepPoint p;
    p.tau_f = tau;
    p.T = rep.totals.grad_evals;
    p.certified = rep.certified;
    p.outer_iters = static_cast<int>(rep.trace.size());
    return p;
  };
  for (size_t start = 0; start < count; start += jobs) {
    std::vector<std::future<SweepPoint>> batch;
    const size_t stop = std::min(count, start + jobs);
    for (size_t i = start; i < stop; ++i) {
      batch.push_back(std::async(jobs > 1 ? std::launch::async : std::launch::deferred,
                                 one, cfg.taus[i]));
    }
    for (size_t i = start; i < stop; ++i) res.points[i] = batch[i - start].get();
  }
  fit_sweep(res);
  return res;
}

inline int cmd_sweep(const RunConfig& cfg) {
  return guarded("sweep", [&] {
    const SweepResult res = run_sweep(cfg);
    Table t;
    t.columns = {"tau_f", "T", "certified", "outer_iters"};
    for (const auto& p : res.points) {
      t.rows.push_back({p.tau_f, p.T, p.certified,
                        static_cast<std::int64_t>(p.outer_iters)});
    }
    Summary s;
    s.emplace_back("problem", cfg.kind);
    s.emplace_back("fit", std::string(res.fit ? "fit" : "unfit"));
    s.emplace_back("certified_points", static_cast<std::int64_t>(res.certified_points));
    if (res.fit) {
      s.emplace_back("slope", res.slope);
      s.emplace_back("intercept", res.intercept);
      s.emplace_back("fit_residual", res.fit_residual);
    }
    emit(cfg, "points", t, s);
    const bool all = res.certified_points == static_cast<int>(res.points.size());
    return static_cast<int>(res.fit && all ? kExitOk : kExitSolverFailure);
  });
}

struct CheckRow {
  int k = 0;
  double beta = 0.0;
  double feasibility = 0.0;
  NuEstimate nu;
  double bound = 0.0;
  bool preconditions = false;
  bool bound_ok = true;
  // Basis pursuit sparse-signal condition, evaluated as a flag.
  std::optional<BpConditionReport> condition;
};

struct CheckResult {
  SolveOutcome outcome;
  std::vector<CheckRow> rows;
  int violations = 0;
  std::optional<SubsetSingularValue> subset;
};

inline constexpr double kBoundSlack = 1e-8;

inline CheckResult run_check(const RunConfig& cfg) {
  Experiment ex = build_or_config_error(cfg);
  CheckResult res;
  const auto keep = std::make_shared<const Experiment>(ex);
  const Experiment* e = keep.get();
  if (ex.bp) res.subset = bp_min_subset_singular(ex.bp->instance.B);
  auto observer = [&](const TraceRecord& rec, const Vector& x, const Vector&) {
    CheckRow row;
    row.k = rec.k;
    row.beta = rec.beta;
    row.feasibility = rec.feasibility;
    row.nu = rec.nu;
    if (e->geneig) {
      row.bound = geneig_nu_lower_bound(e->geneig->B, x);
      row.preconditions = true;
    } else if (e->bp) {
      row.bound = bp_nu_lower_bound(e->bp->instance.B, x);
      row.preconditions = true;
      if (!rec.nu.degenerate && rec.nu.nu_hat > 0.0) {
        row.condition = bp_nu_condition(decode_bp(x), e->bp->instance.B,
                                        rec.nu.nu_hat, &*res.subset);
      }
    } else if (e->clustering) {
      const Matrix V = as_factor(x, e->clustering->n(), e->clustering->r);
      row.bound = clustering_nu_lower_bound(V);
      row.preconditions =
          clustering_preconditions(V, std::sqrt(static_cast<double>(e->clustering->s)))
              .holds;
    }
    if (!rec.nu.degenerate && row.preconditions) {
      row.bound_ok = rec.nu.nu_hat >= row.bound - kBoundSlack;
      if (!row.bound_ok) ++res.violations;
    }
    res.rows.push_back(row);
  };
  res.outcome = run_solve(cfg, std::move(ex), observer);
  return res;
}

inline int cmd_check(const RunConfig& cfg) {
  return guarded("check", [&] {
    const CheckResult res = run_check(cfg);
    Table t;
    t.columns = {"k", "beta", "feas", "nu_hat", "degenerate", "bound",
                 "preconditions", "bound_ok"};
    const bool bp = res.subset.has_value();
    if (bp) {
      t.columns.insert(t.columns.end(), {"condition", "z_nth", "threshold"});
    }
    for (const auto& r : res.rows) {
      std::vector<Value> row{static_cast<std::int64_t>(r.k), r.beta, r.feasibility,
                             r.nu.degenerate ? -1.0 : r.nu.nu_hat, r.nu.degenerate,
                             r.bound, r.preconditions, r.bound_ok};
      if (bp) {
        row.push_back(r.condition ? r.condition->holds : false);
        row.push_back(r.condition ? r.condition->z_nth : 0.0);
        row.push_back(r.condition && std::isfinite(r.condition->threshold)
                          ? r.condition->threshold
                          : -1.0);
      }
      t.rows.push_back(std::move(row));
    }
    Summary s = res.outcome.summary;
    s.emplace_back("bound_violations", static_cast<std::int64_t>(res.violations));
    if (bp) {
      s.emplace_back("subset_min_singular", res.subset->value);
      s.emplace_back("subset_exact", !res.subset->approximate);
      s.emplace_back("subsets_examined", static_cast<std::int64_t>(res.subset->subsets));
    }
    emit(cfg, "rows", t, s);
    if (res.violations > 0) return static_cast<int>(kExitCheckFailure);
    if (res.outcome.report.stop_reason == StopReason::InnerFailure) {
      return static_cast<int>(kExitSolverFailure);
    }
    return static_cast<int>(kExitOk);
  });
}

inline GradcheckOptions gradcheck_options(const RunConfig& cfg) {
  GradcheckOptions o;
  o.trials = cfg.gradcheck_trials;
  o.tol = cfg.gradcheck_tol;
  o.point_radius = cfg.gradcheck_radius;
  o.seed = cfg.seed;
  return o;
}

// Runs the checks on an explicit problem (used with fixtures) and reports.
inline int gradcheck_problem(const ProblemDef& prob, const RunConfig& cfg) {
  return guarded("gradcheck", [&] {
    const GradcheckReport rep = run_derivative_checks(prob, gradcheck_options(cfg));
    Table t;
    t.columns = {"check", "status", "trials", "worst_error"};
    for (const auto& c : rep.checks) {
      const std::string status = c.skipped ? "skipped" : c.passed ? "pass" : "fail";
      t.rows.push_back({c.name, status, static_cast<std::int64_t>(c.trials),
                        c.worst_error});
      if (!c.skipped && !c.passed) {
        std::cerr << "gradcheck: " << c.name << " failed, worst error "
                  << format_number(c.worst_error) << '\n';
      }
    }
    Summary s{{"problem", prob.name}, {"passed", rep.passed()},
              {"tol", cfg.gradcheck_tol}};
    emit(cfg, "checks", t, s);
    return static_cast<int>(rep.passed() ? kExitOk : kExitCheckFailure);
  });
}

inline int cmd_gradcheck(const RunConfig& cfg) {
  Experiment ex;
  try {
    ex = build_or_config_error(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "gradcheck: " << e.what() << '\n';
    return kExitConfigError;
  }
  return gradcheck_problem(ex.prob, cfg);
}

}  // namespace ialm::cli
