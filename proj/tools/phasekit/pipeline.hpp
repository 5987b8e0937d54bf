#pragma once

// Orchestration of orbit -> iPRC -> sensitivities -> locking -> robustness.
// Stages are computed lazily and cached; every table is built from the
// cached results so different subcommands emit identical rows.

#include <atomic>
#include <exception>
#include <optional>
#include <thread>

#include "config.hpp"
#include "phasekit.hpp"
#include "table.hpp"

namespace phasekit::cli {

/// Runs fn(k) for k in [0, count) on up to `jobs` threads. Results land in
/// slot k, so the merge order never depends on scheduling. The first failure
/// in index order is rethrown.
template <class T, class Fn>
std::vector<T> parallel_map(std::size_t count, std::size_t jobs, Fn fn) {
  std::vector<std::optional<T>> slots(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < count;) {
      try {
        slots[k].emplace(fn(k));
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(jobs, count));
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  std::vector<T> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    if (errors[k]) std::rethrow_exception(errors[k]);
    out.push_back(std::move(*slots[k]));
  }
  return out;
}

struct FdCheck {
  double S_omega = 0.0;
  double err_S_omega = 0.0;
  double err_Z_x = 0.0;
  double err_Z_q = 0.0;
};

inline double relative_sup_error(const Matrix& a, const Matrix& ref) {
  const double scale = ref.cwiseAbs().maxCoeff();
  const double diff = (a - ref).cwiseAbs().maxCoeff();
  return scale > 0.0 ? diff / scale : diff;
}

class Pipeline {
 public:
  explicit Pipeline(RunConfig cfg)
      : cfg_(std::move(cfg)), model_(models::find(cfg_.model)), params_(resolve_parameters(cfg_, model_)) {}

  const RunConfig& config() const { return cfg_; }
  const ModelDefinition& model() const { return model_; }
  const ParameterVector& params() const { return params_; }

  const PeriodicOrbit& orbit() {
    if (!orbit_) {
      OrbitOptions o;
      o.grid = cfg_.grid;
      o.tol = cfg_.tol;
      orbit_ = find_periodic_orbit(model_, params_, o);
    }
    return *orbit_;
  }

  const PhaseResponse& prc() {
    if (!prc_) {
      PrcOptions o;
      o.tol = cfg_.tol;
      prc_ = compute_iprc(orbit(), model_, o);
    }
    return *prc_;
  }

  /// Absolute or relative bundles depending on the config, in parameter order.
  const std::vector<SensitivityBundle>& bundles() {
    if (!bundles_) {
      const auto& o = orbit();
      const auto& r = prc();
      SensitivityOptions so;
      so.tol = cfg_.tol;
      const bool want_fd = cfg_.fd_check;
      struct Item {
        SensitivityBundle b;
        std::optional<FdCheck> fd;
      };
      auto items = parallel_map<Item>(params_.size(), cfg_.jobs, [&](std::size_t k) {
        Item it{sensitivity_bundle(o, r, model_, k, so), std::nullopt};
        if (want_fd) {
          auto fd = finite_difference_oracle(model_, o, k, cfg_.fd_step);
          FdCheck c;
          c.S_omega = fd.S_omega;
          c.err_S_omega = std::abs(it.b.S_omega - fd.S_omega) / std::max(std::abs(fd.S_omega), 1e-300);
          c.err_Z_x = relative_sup_error(it.b.Z_x, fd.Z_x);
          c.err_Z_q = relative_sup_error(it.b.Z_q, fd.Z_q);
          it.fd = c;
        }
        if (cfg_.relative) it.b = relative_sensitivities(it.b, params_);
        return it;
      });
      bundles_.emplace();
      for (auto& it : items) {
        bundles_->push_back(std::move(it.b));
        fd_.push_back(it.fd);
      }
    }
    return *bundles_;
  }

  InputWaveform input() {
    const double wu = orbit().omega - cfg_.detune;
    if (!(wu > 0.0))
      throw Error(ErrorKind::Config, "cli", "detune must be smaller than the oscillator frequency " +
                                                format_double(orbit().omega));
    if (cfg_.input.kind == "sine") return InputWaveform::sine(wu);
    if (cfg_.input.kind == "square") return InputWaveform::smoothed_square(wu, cfg_.input.duty, cfg_.input.steepness);
    return InputWaveform::square_fourier(wu, cfg_.input.duty, cfg_.input.harmonics);
  }

  const CouplingFunction& gamma() {
    if (!gamma_) gamma_ = coupling_function(prc(), input());
    return *gamma_;
  }

  const LockingReport& locking() {
    if (!locking_) {
      LockingReport rep = locking_points(gamma(), cfg_.detune, cfg_.eps);
      if (cfg_.validate) {
        EntrainmentOptions eo;
        eo.tol = std::max(cfg_.tol, 1e-10);
        eo.forcing_periods = cfg_.forcing_periods;
        simulation_ = simulate_entrainment(model_, orbit(), input(), cfg_.eps, orbit().initial_state(), eo);
        if (simulation_->locked) select_root(rep, simulation_->chi_final);
      }
      if (rep.locked()) {
        const auto in = input();
        for (const auto& b : bundles()) rep.sensitivities.push_back(locking_sensitivity(rep, b, in));
      }
      locking_ = std::move(rep);
    }
    return *locking_;
  }

  const RobustnessReport& robustness() {
    if (!robust_) {
      const auto& lr = locking();
      if (!lr.locked())
        throw Error(ErrorKind::Precondition, "entrainment",
                    "no stable 1:1 locking at this detuning and eps; entrainment sensitivities are undefined");
      std::vector<std::string> groups;
      for (const auto& b : bundles()) {
        auto it = cfg_.groups.find(b.name);
        groups.push_back(it == cfg_.groups.end() ? std::string{} : it->second);
      }
      robust_ = normalize(measure(bundles(), &lr, groups));
      ranking_ = rank_and_partition(*robust_, cfg_.threshold);
    }
    return *robust_;
  }

  const Ranking& ranking() {
    robustness();
    return *ranking_;
  }

  const std::optional<EntrainmentResult>& simulation() {
    locking();
    return simulation_;
  }

  // ---- tables ------------------------------------------------------------

  Table orbit_table() {
    const auto& o = orbit();
    const auto& info = model_.info();
    Table t;
    t.columns = {"theta", "t"};
    for (const auto& s : info.state_names) t.columns.push_back(s);
    for (std::size_t j = 0; j < o.grid_size(); ++j) {
      std::vector<Cell> row{o.phases[j], o.phases[j] / o.omega};
      for (std::size_t i = 0; i < o.dim(); ++i) row.emplace_back(o.states(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
      t.add(std::move(row));
    }
    return t;
  }

  Table prc_table() {
    const auto& r = prc();
    Table t;
    t.columns = {"theta", "q"};
    for (const auto& s : model_.info().state_names) t.columns.push_back("q_" + s);
    for (std::size_t j = 0; j < r.grid_size(); ++j) {
      std::vector<Cell> row{r.phases[j], r.input_prc[static_cast<Eigen::Index>(j)]};
      for (Eigen::Index i = 0; i < r.state_prc.rows(); ++i) row.emplace_back(r.state_prc(i, static_cast<Eigen::Index>(j)));
      t.add(std::move(row));
    }
    return t;
  }

  Table sens_summary_table() {
    const auto& bs = bundles();
    Table t;
    t.columns = {"param", "value", "S_omega", "S_T", "norm_Z_q", "max_abs_Z_x", "max_abs_Z_qx"};
    if (cfg_.fd_check)
      for (const char* c : {"fd_S_omega", "fd_relerr_S_omega", "fd_relerr_Z_x", "fd_relerr_Z_q"}) t.columns.push_back(c);
    for (std::size_t k = 0; k < bs.size(); ++k) {
      const auto& b = bs[k];
      std::vector<Cell> row{b.name, params_[k], b.S_omega, b.S_T(), std::sqrt(l2_squared(b.Z_q)),
                            b.Z_x.cwiseAbs().maxCoeff(), b.Z_qx.cwiseAbs().maxCoeff()};
      if (cfg_.fd_check) {
        const auto& f = *fd_[k];
        const double scale = cfg_.relative ? params_[k] : 1.0;
        row.insert(row.end(), {f.S_omega * scale, f.err_S_omega, f.err_Z_x, f.err_Z_q});
      }
      t.add(std::move(row));
    }
    return t;
  }

  Table sens_curves_table() {
    const auto& bs = bundles();
    const auto& names = model_.info().state_names;
    Table t;
    t.columns = {"param", "theta", "Z_q"};
    for (const auto& s : names) t.columns.push_back("Z_x_" + s);
    for (const auto& s : names) t.columns.push_back("Z_qx_" + s);
    for (const auto& b : bs) {
      for (std::size_t j = 0; j < b.phases.size(); ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        std::vector<Cell> row{b.name, b.phases[j], b.Z_q[jj]};
        for (Eigen::Index i = 0; i < b.Z_x.rows(); ++i) row.emplace_back(b.Z_x(i, jj));
        for (Eigen::Index i = 0; i < b.Z_qx.rows(); ++i) row.emplace_back(b.Z_qx(i, jj));
        t.add(std::move(row));
      }
    }
    return t;
  }

  Table gamma_table() {
    const auto& g = gamma();
    Table t;
    t.columns = {"chi", "gamma", "dgamma", "V"};
    for (std::size_t j = 0; j < g.grid_size(); ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      t.add({g.chi[j], g.values[jj], g.derivative[jj], cfg_.detune + cfg_.eps * g.values[jj]});
    }
    return t;
  }

  Table locking_table() {
    const auto& lr = locking();
    Table t;
    t.columns = {"chi", "V", "dV", "stable", "selected"};
    for (std::size_t i = 0; i < lr.roots.size(); ++i) {
      const auto& r = lr.roots[i];
      t.add({r.chi, r.V, r.V_prime, r.stable, lr.selected && *lr.selected == i});
    }
    return t;
  }

  Table locking_sens_table() {
    const auto& lr = locking();
    Table t;
    t.columns = {"param", "S_chi", "S_chi_omega", "S_chi_gamma"};
    for (const auto& s : lr.sensitivities) t.add({s.name, s.S_chi, s.S_chi_omega, s.S_chi_gamma});
    return t;
  }

  Table entrainment_table() {
    const auto& sim = simulation();
    Table t;
    t.columns = {"t", "chi", "chi_unwrapped"};
    if (sim)
      for (std::size_t k = 0; k < sim->times.size(); ++k) t.add({sim->times[k], sim->chi[k], sim->chi_unwrapped[k]});
    return t;
  }

  Table robustness_table() {
    const auto& rk = ranking();
    Table t;
    t.columns = {"rank", "param", "group", "R_omega", "R_T", "R_q", "R_chi", "Rn_omega", "Rn_T", "Rn_q", "Rn_chi",
                 "period_dominant", "above_threshold"};
    for (std::size_t i = 0; i < rk.ordered.size(); ++i) {
      const auto& r = rk.ordered[i];
      t.add({static_cast<std::int64_t>(i + 1), r.name, r.group, r.R_omega, r.R_T, r.R_q, r.R_chi, r.Rn_omega, r.Rn_T,
             r.Rn_q, r.Rn_chi, r.period_dominant(), r.Rn_chi > rk.threshold || rk.threshold <= 0.0});
    }
    return t;
  }

  Table scatter_table() {
    Table t;
    t.columns = {"param", "group", "Rn_q", "Rn_omega", "period_dominant"};
    for (const auto& r : ranking().ordered) t.add({r.name, r.group, r.Rn_q, r.Rn_omega, r.period_dominant()});
    return t;
  }

  Table bars_table() {
    Table t;
    t.columns = {"param", "group", "S_chi", "S_chi_omega", "S_chi_gamma"};
    for (const auto& r : ranking().ordered) t.add({r.name, r.group, r.bar_chi, r.bar_omega, r.bar_gamma});
    return t;
  }

  // ---- run.json summaries --------------------------------------------------

  nlohmann::ordered_json orbit_summary() {
    const auto& o = orbit();
    nlohmann::ordered_json j;
    j["period"] = o.period;
    j["omega"] = o.omega;
    j["hyperbolic"] = o.hyperbolic;
    j["periodicity_residual"] = o.periodicity_residual;
    auto mods = nlohmann::ordered_json::array();
    for (const auto& m : o.multipliers) mods.push_back(std::abs(m));
    j["nontrivial_multiplier_moduli"] = mods;
    j["trivial_multiplier_error"] = std::abs(o.trivial_multiplier - 1.0);
    return j;
  }

  nlohmann::ordered_json prc_summary() {
    const auto& r = prc();
    nlohmann::ordered_json j;
    j["max_normalization_drift"] = r.normalization_residual.maxCoeff();
    j["periodicity_error"] = r.periodicity_error;
    return j;
  }

  nlohmann::ordered_json locking_summary() {
    const auto& lr = locking();
    nlohmann::ordered_json j;
    j["omega_u"] = input().omega_u();
    j["detune"] = lr.detuning;
    j["eps"] = lr.epsilon;
    j["locked"] = lr.locked();
    if (lr.locked()) j["chi_star"] = lr.chi_star().chi;
    if (simulation_) {
      j["simulation"] = {{"locked", simulation_->locked},
                         {"chi_final", simulation_->chi_final},
                         {"slips", simulation_->slips}};
    }
    return j;
  }

 private:
  RunConfig cfg_;
  ModelDefinition model_;
  ParameterVector params_;
  std::optional<PeriodicOrbit> orbit_;
  std::optional<PhaseResponse> prc_;
  std::optional<std::vector<SensitivityBundle>> bundles_;
  std::vector<std::optional<FdCheck>> fd_;
  std::optional<CouplingFunction> gamma_;
  std::optional<LockingReport> locking_;
  std::optional<EntrainmentResult> simulation_;
  std::optional<RobustnessReport> robust_;
  std::optional<Ranking> ranking_;
};

}  // namespace phasekit::cli
