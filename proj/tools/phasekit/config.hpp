#pragma once

// Run configuration: defaults < JSON config file < command-line flags.
// Everything is validated against the model before any output is written.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "phasekit/error.hpp"
#include "phasekit/models.hpp"
#include "phasekit/version.hpp"

namespace phasekit::cli {

using json = nlohmann::json;

struct InputSpec {
  std::string kind = "sine";  // sine | square | square-fourier
  double duty = 0.5;
  double steepness = 50.0;
  std::size_t harmonics = 16;
};

struct RunConfig {
  std::string model = "goodwin";
  std::map<std::string, double> parameters;  // overrides only
  std::size_t grid = 256;
  double tol = 1e-12;
  double fd_step = 0.0;  // 0: 1e-4 * max(|lambda|, 1)
  bool fd_check = false;
  InputSpec input;
  double eps = 1e-3;
  double detune = 0.0;
  bool relative = true;
  double threshold = 0.1;
  std::map<std::string, std::string> groups;
  bool validate = false;
  std::size_t forcing_periods = 200;
  std::size_t jobs = 1;
  std::string format = "csv";
};

[[noreturn]] inline void config_error(const std::string& msg) { throw Error(ErrorKind::Config, "cli", msg); }

inline json to_json(const RunConfig& c) {
  json j;
  j["model"] = c.model;
  j["parameters"] = c.parameters;
  j["grid"] = c.grid;
  j["tol"] = c.tol;
  j["fd_step"] = c.fd_step;
  j["fd_check"] = c.fd_check;
  j["input"] = {{"kind", c.input.kind},
                {"duty", c.input.duty},
                {"steepness", c.input.steepness},
                {"harmonics", c.input.harmonics}};
  j["eps"] = c.eps;
  j["detune"] = c.detune;
  j["relative"] = c.relative;
  j["threshold"] = c.threshold;
  j["groups"] = c.groups;
  j["validate"] = c.validate;
  j["forcing_periods"] = c.forcing_periods;
  j["jobs"] = c.jobs;
  j["format"] = c.format;
  return j;
}

namespace detail {

template <class T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    config_error(std::string("config key '") + key + "' has the wrong type");
  }
}

inline void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) config_error("unknown config key '" + where + it.key() + "'");
  }
}

}  // namespace detail

inline void merge_json(RunConfig& c, const json& j) {
  if (!j.is_object()) config_error("config file must hold a JSON object");
  detail::reject_unknown(j,
                         {"model", "parameters", "grid", "tol", "fd_step", "fd_check", "input", "eps", "detune",
                          "relative", "threshold", "groups", "validate", "forcing_periods", "jobs", "format"},
                         "");
  detail::read(j, "model", c.model);
  if (j.contains("parameters")) {
    std::map<std::string, double> p;
    detail::read(j, "parameters", p);
    for (auto& [k, v] : p) c.parameters[k] = v;
  }
  detail::read(j, "grid", c.grid);
  detail::read(j, "tol", c.tol);
  detail::read(j, "fd_step", c.fd_step);
  detail::read(j, "fd_check", c.fd_check);
  if (j.contains("input")) {
    const json& in = j.at("input");
    if (!in.is_object()) config_error("config key 'input' must be an object");
    detail::reject_unknown(in, {"kind", "duty", "steepness", "harmonics"}, "input.");
    detail::read(in, "kind", c.input.kind);
    detail::read(in, "duty", c.input.duty);
    detail::read(in, "steepness", c.input.steepness);
    detail::read(in, "harmonics", c.input.harmonics);
  }
  detail::read(j, "eps", c.eps);
  detail::read(j, "detune", c.detune);
  detail::read(j, "relative", c.relative);
  detail::read(j, "threshold", c.threshold);
  if (j.contains("groups")) detail::read(j, "groups", c.groups);
  detail::read(j, "validate", c.validate);
  detail::read(j, "forcing_periods", c.forcing_periods);
  detail::read(j, "jobs", c.jobs);
  detail::read(j, "format", c.format);
}

inline void merge_file(RunConfig& c, const std::string& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    config_error("config file '" + path + "' is not valid JSON: " + e.what());
  }
  merge_json(c, j);
}

/// "name=value" from --set.
inline void apply_set(RunConfig& c, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0) config_error("--set expects name=value, got '" + kv + "'");
  const std::string name = kv.substr(0, eq), text = kv.substr(eq + 1);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) config_error("--set " + name + ": '" + text + "' is not a number");
  c.parameters[name] = v;
}

/// Resolved parameter vector; throws on unknown names.
inline ParameterVector resolve_parameters(const RunConfig& c, const ModelDefinition& m) {
  ParameterVector p = m.defaults();
  for (const auto& [name, v] : c.parameters) {
    if (!p.contains(name)) config_error("model '" + c.model + "' has no parameter '" + name + "'");
    if (!std::isfinite(v)) config_error("parameter '" + name + "' must be finite");
    p.set(name, v);
  }
  return p;
}

inline void validate(const RunConfig& c) {
  const auto m = models::find(c.model);
  resolve_parameters(c, m);
  for (const auto& [name, g] : c.groups)
    if (!m.defaults().contains(name)) config_error("group tag for unknown parameter '" + name + "'");
  if (c.grid < 16 || c.grid > (1u << 16)) config_error("grid must lie in [16, 65536]");
  if (!(c.tol >= 1e-13 && c.tol <= 1e-3)) config_error("tol must lie in [1e-13, 1e-3]");
  if (!(c.fd_step >= 0.0) || !std::isfinite(c.fd_step)) config_error("fd_step must be >= 0");
  if (c.input.kind != "sine" && c.input.kind != "square" && c.input.kind != "square-fourier")
    config_error("input kind must be sine, square or square-fourier");
  if (!(c.input.duty > 0.0 && c.input.duty < 1.0)) config_error("input duty must lie in (0, 1)");
  if (!(c.input.steepness > 0.0) || !std::isfinite(c.input.steepness)) config_error("input steepness must be positive");
  if (c.input.harmonics < 1) config_error("input harmonics must be >= 1");
  if (!(c.eps > 0.0) || !std::isfinite(c.eps)) config_error("eps must be positive");
  if (!std::isfinite(c.detune)) config_error("detune must be finite");
  if (!(c.threshold >= 0.0) || !std::isfinite(c.threshold)) config_error("threshold must be >= 0");
  if (c.forcing_periods < 50) config_error("forcing_periods must be >= 50");
  if (c.jobs < 1) config_error("jobs must be >= 1");
  if (c.format != "csv" && c.format != "json") config_error("format must be csv or json");
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string config_hash(const RunConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(to_json(c).dump())));
  return buf;
}

}  // namespace phasekit::cli
