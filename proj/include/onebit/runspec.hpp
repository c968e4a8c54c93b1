#pragma once

// Experiment description files (YAML) for the command-line front end.
//
//   seed: 7
//   trials: 10
//   output: out/smv
//   scenario:
//     M: 256
//     L: 1
//     grid: {start: -90, stop: 90, step: 0.5}
//     true_doas: [-3, 2, 75]
//     amplitudes_db: [12, 22, 20]
//   snr_db: [0, 10, 20]
//   algorithms: [bsbl, bsbl-topk, biht]
//   bsbl: {iterations: 500, gamma: 0.6, a: 1, b: 0}
//   biht: {iterations: 100, tau: 1}

#include <yaml-cpp/yaml.h>

#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "onebit/doa.hpp"

namespace onebit {

/// Malformed or invalid run spec. `line` is 1-based, 0 when unknown.
class ConfigError : public std::runtime_error
{
public:
  ConfigError(int line, const std::string& message)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message : message),
      line_(line)
  {}

  int line() const noexcept { return line_; }

private:
  int line_;
};

struct RunSpec
{
  Scenario scenario;
  std::vector<AlgorithmSpec> algorithms;
  std::vector<double> snr_db;
  int trials = 10;
  std::filesystem::path output = "out";
  std::uint64_t seed = 1;
  unsigned threads = 1;
  /// When false, runtime columns are written as 0 so repeated runs are
  /// byte-identical.
  bool record_runtime = true;
};

namespace detail {

inline int line_of(const YAML::Node& node) { return node.Mark().line + 1; }

template <class T>
T as(const YAML::Node& node, const std::string& what)
{
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(line_of(node), "invalid value for '" + what + "'");
  }
}

inline void check_keys(const YAML::Node& map, const std::set<std::string>& allowed,
                       const std::string& where)
{
  if (!map.IsMap())
    throw ConfigError(line_of(map), "'" + where + "' must be a mapping");
  for (const auto& kv : map) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key))
      throw ConfigError(line_of(kv.first), "unknown key '" + key + "' in " + where);
  }
}

inline std::vector<double> as_list(const YAML::Node& node, const std::string& what)
{
  if (!node.IsSequence())
    throw ConfigError(line_of(node), "'" + what + "' must be a list");
  std::vector<double> out;
  for (const auto& item : node)
    out.push_back(as<double>(item, what));
  return out;
}

inline Scenario parse_scenario(const YAML::Node& node)
{
  check_keys(node, {"M", "L", "grid", "true_doas", "amplitudes_db", "d_over_lambda"}, "scenario");
  Scenario s;
  if (auto n = node["M"]) {
    s.sensors = as<Index>(n, "M");
    if (s.sensors < 1)
      throw ConfigError(line_of(n), "M must be >= 1");
  }
  if (auto n = node["L"]) {
    s.snapshots = as<Index>(n, "L");
    if (s.snapshots < 1)
      throw ConfigError(line_of(n), "L must be >= 1");
  }
  if (auto n = node["grid"]) {
    if (n.IsSequence()) {
      s.grid = as_list(n, "grid");
    } else {
      check_keys(n, {"start", "stop", "step"}, "grid");
      if (!n["start"] || !n["stop"] || !n["step"])
        throw ConfigError(line_of(n), "grid needs start, stop and step");
      try {
        s.grid = angle_grid(as<double>(n["start"], "start"), as<double>(n["stop"], "stop"),
                            as<double>(n["step"], "step"));
      } catch (const InvalidArgument& e) {
        throw ConfigError(line_of(n), e.what());
      }
    }
  }
  if (auto n = node["true_doas"])
    s.true_doas = as_list(n, "true_doas");
  if (auto n = node["amplitudes_db"])
    s.amplitudes_db = as_list(n, "amplitudes_db");
  if (auto n = node["d_over_lambda"])
    s.d_over_lambda = as<double>(n, "d_over_lambda");
  try {
    s.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(line_of(node), e.what());
  }
  return s;
}

inline SolverConfig parse_bsbl(const YAML::Node& node)
{
  check_keys(node,
             {"a", "b", "gamma", "iterations", "alpha_max", "jitter", "covariance", "early_stop",
              "early_stop_tolerance"},
             "bsbl");
  SolverConfig c;
  if (auto n = node["a"]) c.prior.a = as<double>(n, "a");
  if (auto n = node["b"]) c.prior.b = as<double>(n, "b");
  if (auto n = node["gamma"]) c.gamma = as<double>(n, "gamma");
  if (auto n = node["iterations"]) c.iterations = as<int>(n, "iterations");
  if (auto n = node["alpha_max"]) c.alpha_max = as<double>(n, "alpha_max");
  if (auto n = node["jitter"]) c.jitter = as<double>(n, "jitter");
  if (auto n = node["early_stop"]) c.early_stop = as<bool>(n, "early_stop");
  if (auto n = node["early_stop_tolerance"])
    c.early_stop_tolerance = as<double>(n, "early_stop_tolerance");
  if (auto n = node["covariance"]) {
    const auto mode = as<std::string>(n, "covariance");
    if (mode == "full")
      c.covariance = CovarianceMode::full;
    else if (mode == "diagonal")
      c.covariance = CovarianceMode::diagonal;
    else
      throw ConfigError(line_of(n), "covariance must be 'full' or 'diagonal'");
  }
  return c;
}

inline BihtConfig parse_biht(const YAML::Node& node)
{
  check_keys(node, {"tau", "iterations"}, "biht");
  BihtConfig c;
  if (auto n = node["tau"]) c.tau = as<double>(n, "tau");
  if (auto n = node["iterations"]) c.iterations = as<int>(n, "iterations");
  return c;
}

}  // namespace detail

/// Parses and validates a run spec document. Throws ConfigError.
inline RunSpec parse_run_spec(const std::string& text)
{
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(e.mark.line + 1, e.msg);
  }
  if (!root.IsMap())
    throw ConfigError(0, "run spec must be a mapping");

  using detail::as;
  using detail::line_of;
  detail::check_keys(root,
                     {"seed", "trials", "output", "threads", "record_runtime", "scenario", "snr_db",
                      "algorithms", "bsbl", "biht"},
                     "run spec");

  RunSpec spec;
  if (auto n = root["seed"]) spec.seed = as<std::uint64_t>(n, "seed");
  if (auto n = root["trials"]) {
    spec.trials = as<int>(n, "trials");
    if (spec.trials < 1)
      throw ConfigError(line_of(n), "trials must be >= 1");
  }
  if (auto n = root["output"]) spec.output = as<std::string>(n, "output");
  if (auto n = root["threads"]) spec.threads = std::max(1u, as<unsigned>(n, "threads"));
  if (auto n = root["record_runtime"]) spec.record_runtime = as<bool>(n, "record_runtime");
  if (auto n = root["scenario"]) spec.scenario = detail::parse_scenario(n);

  const YAML::Node snr = root["snr_db"];
  if (!snr)
    throw ConfigError(0, "missing 'snr_db'");
  spec.snr_db = snr.IsSequence() ? detail::as_list(snr, "snr_db")
                                 : std::vector<double>{as<double>(snr, "snr_db")};
  if (spec.snr_db.empty())
    throw ConfigError(line_of(snr), "'snr_db' must not be empty");

  const SolverConfig bsbl = root["bsbl"] ? detail::parse_bsbl(root["bsbl"]) : SolverConfig{};
  const BihtConfig biht = root["biht"] ? detail::parse_biht(root["biht"]) : BihtConfig{};
  try {
    bsbl.validate(2 * static_cast<Index>(spec.scenario.grid.size()), spec.scenario.snapshots);
    biht.validate(static_cast<Index>(spec.scenario.grid.size()));
  } catch (const std::invalid_argument& e) {
    const YAML::Node where = root["bsbl"] ? root["bsbl"] : root;
    throw ConfigError(line_of(where), e.what());
  }

  const YAML::Node algs = root["algorithms"];
  if (!algs)
    throw ConfigError(0, "missing 'algorithms'");
  if (!algs.IsSequence() || algs.size() == 0)
    throw ConfigError(line_of(algs), "'algorithms' must be a non-empty list");
  for (const auto& item : algs) {
    const auto id = as<std::string>(item, "algorithms");
    AlgorithmSpec alg;
    try {
      alg = AlgorithmSpec::from_id(id);
    } catch (const InvalidArgument& e) {
      throw ConfigError(line_of(item), e.what());
    }
    for (const auto& prev : spec.algorithms)
      if (prev.name == id)
        throw ConfigError(line_of(item), "duplicate algorithm '" + id + "'");
    if (alg.kind == AlgorithmKind::biht && spec.scenario.snapshots != 1)
      throw ConfigError(line_of(item), "biht supports a single snapshot only (L = 1)");
    alg.bsbl = bsbl;
    alg.biht = biht;
    spec.algorithms.push_back(std::move(alg));
  }
  return spec;
}

}  // namespace onebit
