// phasekit command-line driver.
//
//   phasekit <orbit|prc|sens|entrain|robust|pipeline> [options]
//
// Each run writes its tables and a run.json (resolved config, version stamp,
// config hash) into one output directory. Failures write error.json and exit
// nonzero; invalid configurations are rejected before anything is written.

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "config.hpp"
#include "pipeline.hpp"

namespace fs = std::filesystem;
using namespace phasekit;
using namespace phasekit::cli;

namespace {

struct Flags {
  std::string model, config_file, out, format, input;
  std::vector<std::string> sets;
  std::size_t grid = 0, jobs = 0, forcing_periods = 0;
  double tol = 0.0, eps = 0.0, detune = 0.0, threshold = 0.0, fd_step = 0.0;
  bool validate = false, fd_check = false, absolute = false;
  CLI::App* sub = nullptr;
};

void add_common(CLI::App* s, Flags& f) {
  s->add_option("--model", f.model, "Model: radial, vdp, goodwin");
  s->add_option("--config", f.config_file, "JSON config file")->check(CLI::ExistingFile);
  s->add_option("--set", f.sets, "Parameter override name=value (repeatable)");
  s->add_option("--grid", f.grid, "Phase grid size N");
  s->add_option("--tol", f.tol, "Integration / Newton tolerance");
  s->add_option("--jobs", f.jobs, "Worker threads for the per-parameter loop");
  s->add_option("--format", f.format, "Table format")->check(CLI::IsMember({"csv", "json"}));
  s->add_option("--out", f.out, "Output directory (default: $PHASEKIT_OUT/<run>)");
}

void add_sens(CLI::App* s, Flags& f) {
  s->add_option("--fd-step", f.fd_step, "Finite-difference step (0: automatic)");
  s->add_flag("--fd-check", f.fd_check, "Compare against central finite differences");
  s->add_flag("--absolute", f.absolute, "Absolute instead of relative (log-parameter) sensitivities");
}

void add_entrain(CLI::App* s, Flags& f) {
  s->add_option("--input", f.input, "Input waveform")->check(CLI::IsMember({"sine", "square", "square-fourier"}));
  s->add_option("--eps", f.eps, "Input amplitude eps");
  s->add_option("--detune", f.detune, "Detuning omega - omega_u");
  s->add_flag("--validate", f.validate, "Check locking by forced simulation");
  s->add_option("--periods", f.forcing_periods, "Forced-simulation horizon in input periods");
}

RunConfig resolve(const Flags& f) {
  RunConfig c;
  if (!f.config_file.empty()) merge_file(c, f.config_file);
  auto given = [&](const char* name) { return f.sub->count(name) > 0; };
  if (given("--model")) c.model = f.model;
  for (const auto& kv : f.sets) apply_set(c, kv);
  if (given("--grid")) c.grid = f.grid;
  if (given("--tol")) c.tol = f.tol;
  if (given("--jobs")) c.jobs = f.jobs;
  if (given("--format")) c.format = f.format;
  auto maybe = [&](const char* name, auto& dst, const auto& src) {
    if (f.sub->get_option_no_throw(name) && given(name)) dst = src;
  };
  maybe("--fd-step", c.fd_step, f.fd_step);
  maybe("--fd-check", c.fd_check, f.fd_check);
  if (f.sub->get_option_no_throw("--absolute") && given("--absolute")) c.relative = false;
  maybe("--input", c.input.kind, f.input);
  maybe("--eps", c.eps, f.eps);
  maybe("--detune", c.detune, f.detune);
  maybe("--validate", c.validate, f.validate);
  maybe("--periods", c.forcing_periods, f.forcing_periods);
  maybe("--threshold", c.threshold, f.threshold);
  validate(c);
  return c;
}

nlohmann::ordered_json error_record(const std::string& command, const std::string& kind, const std::string& module,
                                    const std::string& message) {
  nlohmann::ordered_json j;
  j["version"] = kVersionStamp;
  j["command"] = command;
  j["error"] = {{"kind", kind}, {"module", module}, {"message", message}};
  return j;
}

class Emitter {
 public:
  Emitter(fs::path dir, std::string format) : dir_(std::move(dir)), format_(std::move(format)) {}

  void table(const std::string& stem, const Table& t) {
    const std::string name = stem + "." + format_;
    write_file((dir_ / name).string(), format_ == "csv" ? to_csv(t) : cli::to_json(t).dump(2) + "\n");
    files_.push_back(name);
  }

  const std::vector<std::string>& files() const { return files_; }

 private:
  fs::path dir_;
  std::string format_;
  std::vector<std::string> files_;
};

int run(const std::string& command, const RunConfig& cfg, const fs::path& dir) {
  Pipeline p(cfg);
  Emitter out(dir, cfg.format);
  nlohmann::ordered_json results;

  const bool all = command == "pipeline";
  if (command != "robust") {
    out.table("orbit", p.orbit_table());
    results["orbit"] = p.orbit_summary();
    std::cout << "orbit: T = " << format_double(p.orbit().period) << ", omega = " << format_double(p.orbit().omega)
              << "\n";
  }
  if (command == "prc" || command == "sens" || command == "entrain" || all) {
    out.table("prc", p.prc_table());
    results["prc"] = p.prc_summary();
  }
  if (command == "sens" || all) {
    out.table("sens_summary", p.sens_summary_table());
    out.table("sens_curves", p.sens_curves_table());
  }
  if (command == "entrain" || all) {
    out.table("gamma", p.gamma_table());
    out.table("locking", p.locking_table());
    out.table("locking_sens", p.locking_sens_table());
    if (cfg.validate) out.table("entrainment", p.entrainment_table());
    results["locking"] = p.locking_summary();
    const auto& lr = p.locking();
    if (lr.locked())
      std::cout << "locking: chi* = " << format_double(lr.chi_star().chi) << "\n";
    else
      std::cout << "locking: none (phase drift)\n";
  }
  if (command == "robust" || all) {
    out.table("robustness", p.robustness_table());
    out.table("scatter", p.scatter_table());
    out.table("bars", p.bars_table());
    const auto& rk = p.ranking();
    results["ranking"] = {{"threshold", rk.threshold}, {"above_threshold", rk.above.size()}};
    std::cout << "robustness: " << rk.above.size() << " of " << rk.ordered.size() << " parameters above "
              << format_double(rk.threshold) << "\n";
  }

  nlohmann::ordered_json run;
  run["version"] = kVersionStamp;
  run["command"] = command;
  run["config_hash"] = config_hash(cfg);
  run["config"] = cli::to_json(cfg);
  nlohmann::ordered_json params;
  for (std::size_t k = 0; k < p.params().size(); ++k) params[p.params().name(k)] = p.params()[k];
  run["parameters"] = params;
  run["sensitivity_scaling"] = cfg.relative ? "relative" : "absolute";
  run["results"] = results;
  run["files"] = out.files();
  write_file((dir / "run.json").string(), run.dump(2) + "\n");
  std::cout << "wrote " << dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"phasekit: periodic orbits, phase response, sensitivity and entrainment"};
  app.set_version_flag("--version", kVersionStamp);
  app.require_subcommand(1);
  Flags f;
  std::vector<std::pair<std::string, CLI::App*>> subs;
  auto make = [&](const char* name, const char* help) {
    auto* s = app.add_subcommand(name, help);
    add_common(s, f);
    subs.emplace_back(name, s);
    return s;
  };
  make("orbit", "Periodic orbit and Floquet multipliers");
  make("prc", "Infinitesimal phase response curve");
  add_sens(make("sens", "Orbit and iPRC parameter sensitivities"), f);
  auto* ent = make("entrain", "Coupling function, locking phases and their sensitivities");
  add_sens(ent, f);
  add_entrain(ent, f);
  for (const char* name : {"robust", "pipeline"}) {
    auto* s = make(name, name == std::string("robust") ? "Robustness measures and ranking" : "Full analysis chain");
    add_sens(s, f);
    add_entrain(s, f);
    s->add_option("--threshold", f.threshold, "Ranking threshold on the normalized entrainment measure");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  std::string command;
  for (auto& [name, s] : subs)
    if (s->parsed()) {
      command = name;
      f.sub = s;
    }

  RunConfig cfg;
  fs::path dir;
  try {
    cfg = resolve(f);
    if (!f.out.empty()) {
      dir = f.out;
    } else {
      const char* root = std::getenv("PHASEKIT_OUT");
      dir = fs::path(root && *root ? root : "phasekit-runs") / (command + "-" + cfg.model + "-" + config_hash(cfg).substr(0, 8));
    }
  } catch (const Error& e) {
    std::cerr << error_record(command, to_string(e.kind()), e.module(), e.what()).dump() << "\n";
    return 2;
  }

  try {
    fs::create_directories(dir);
  } catch (const fs::filesystem_error& e) {
    std::cerr << error_record(command, "io", "cli", e.what()).dump() << "\n";
    return 2;
  }
  try {
    return run(command, cfg, dir);
  } catch (const Error& e) {
    auto rec = error_record(command, to_string(e.kind()), e.module(), e.what());
    std::cerr << rec.dump() << "\n";
    try {
      write_file((dir / "error.json").string(), rec.dump(2) + "\n");
    } catch (...) {
    }
    return e.kind() == ErrorKind::Config ? 2 : 1;
  } catch (const std::exception& e) {
    auto rec = error_record(command, "internal", "cli", e.what());
    std::cerr << rec.dump() << "\n";
    return 1;
  }
}
