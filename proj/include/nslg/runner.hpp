#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "nslg/coefficients.hpp"
#include "nslg/io.hpp"
#include "nslg/mms.hpp"
#include "nslg/varcheck.hpp"

namespace nslg {

struct CheckRow {
  std::string name;
  double value = 0.0;
  double tol = 0.0;
  bool pass = false;
};

// value <= tol
inline CheckRow check_le(std::string name, double value, double tol) { return {std::move(name), value, tol, value <= tol}; }
// value > tol
inline CheckRow check_gt(std::string name, double value, double tol) { return {std::move(name), value, tol, value > tol}; }

inline void print_rows(std::ostream& out, const std::vector<CheckRow>& rows) {
  std::size_t w = 4;
  for (const auto& r : rows) w = std::max(w, r.name.size());
  out << std::left << std::setw(static_cast<int>(w)) << "check" << "  " << std::setw(24) << "value" << std::setw(24) << "tol"
      << "status\n";
  for (const auto& r : rows)
    out << std::left << std::setw(static_cast<int>(w)) << r.name << "  " << std::setw(24) << format_real(r.value) << std::setw(24)
        << format_real(r.tol) << (r.pass ? "PASS" : "FAIL") << '\n';
}

// one line per failure: FAIL <name> value=<v> tol=<t>
inline int report_failures(std::ostream& err, const std::vector<CheckRow>& rows) {
  int n = 0;
  for (const auto& r : rows)
    if (!r.pass) {
      err << "FAIL " << r.name << " value=" << format_real(r.value) << " tol=" << format_real(r.tol) << '\n';
      ++n;
    }
  return n == 0 ? 0 : 1;
}

struct RunOptions {
  int threads = 1;
  bool deterministic = false;
  std::optional<std::string> out;
  std::optional<double> dt;
  std::optional<double> t_end;
  std::optional<std::uint64_t> seed;
};

inline RunConfig default_config() {
  RunConfig c;
  c.T_end = 0.1;
  c.step.dt = 1e-3;
  return c;
}

inline RunConfig apply_overrides(RunConfig c, const RunOptions& o) {
  if (o.out) c.output = *o.out;
  if (o.dt) c.step.dt = *o.dt;
  if (o.t_end) c.T_end = *o.t_end;
  if (o.seed) c.initial.seed = *o.seed;
  if (o.deterministic) c.deterministic = true;
  validate_config(c);
  return c;
}

// runs jobs on up to `threads` workers; each job owns its grids
inline void parallel_jobs(std::vector<std::function<void()>>& jobs, int threads) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex m;
  auto worker = [&] {
    for (std::size_t k = next++; k < jobs.size(); k = next++) {
      try {
        jobs[k]();
      } catch (...) {
        std::lock_guard<std::mutex> lock(m);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  int n = std::max(1, std::min<int>(threads, static_cast<int>(jobs.size())));
  std::vector<std::thread> pool;
  for (int i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

inline Grid make_grid(const RunConfig& c) { return Grid(c.dim, c.n); }

inline void require_grid(const Grid& a, const Grid& b, const std::string& what) {
  if (!(a.dim() == b.dim() && a.shape() == b.shape())) throw ConfigError(0, what, "grid does not match grid.dim/grid.n");
}

using AnyState = std::variant<FullState, PerturbState>;

inline AnyState make_initial(const RunConfig& c, const Grid& g) {
  const auto& in = c.initial;
  PerturbState ps;
  FullState fs;
  bool have_full = false;
  switch (in.kind) {
    case InitialKind::equilibrium:
      ps = zero_perturbation(g, in.M_e);
      break;
    case InitialKind::random:
      ps = random_perturbation(g, in.M_e, in.amplitude, in.seed, {.max_mode = in.max_mode, .compatible = in.compatible});
      break;
    case InitialKind::manufactured: {
      if (in.name != "wave") throw ConfigError(0, "initial.name", "unknown manufactured solution '" + in.name + "' (known: wave)");
      WaveSpec w;
      if (c.model == ModelKind::full) {
        fs = manufactured_full(g, 0.0, w);
        have_full = true;
      } else {
        ps = manufactured_perturb(g, 0.0, w);
      }
      break;
    }
    case InitialKind::snapshot: {
      Snapshot snap = read_snapshot(in.path);
      require_grid(grid_of(snap), g, "initial.path");
      if (snap.model == ModelTag::full) {
        fs = full_from_snapshot(snap, g);
        have_full = true;
      } else {
        ps = perturb_from_snapshot(snap, g);
      }
      break;
    }
  }
  if (c.model == ModelKind::full) return have_full ? fs : recompose(ps, c.tol.det_floor);
  return have_full ? decompose(fs, in.M_e) : ps;
}

inline ExternalField make_field(const RunConfig& c, const Grid& g) {
  switch (c.field.kind) {
    case FieldKind::zero: return ExternalField::zero(g);
    case FieldKind::constant: return ExternalField::constant(g, c.field.value);
    case FieldKind::file: {
      Snapshot snap = read_snapshot(c.field.path);
      require_grid(grid_of(snap), g, "field.path");
      return ExternalField(field_from_snapshot(snap, g));
    }
  }
  return ExternalField::zero(g);
}

inline FullSystem make_full_system(const RunConfig& c, const Grid& g) {
  FullSystem s;
  s.p = c.params;
  s.H = make_field(c, g);
  s.opt.det_floor = c.tol.det_floor;
  s.M_e = c.initial.M_e;
  s.order = c.sobolev_order;
  s.coeff = c.coeff;
  return s;
}

inline PerturbSystem make_perturb_system(const RunConfig& c) {
  PerturbSystem s;
  s.p = c.params;
  s.order = c.sobolev_order;
  s.coeff = c.coeff;
  return s;
}

// ---------------------------------------------------------------- simulate

template <class State>
void write_summary(const std::string& path, const RunConfig& c, const RunRecord<State>& rec, double seconds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "model = " << (c.model == ModelKind::full ? "full" : "perturb") << '\n';
  out << "termination = " << to_string(rec.termination) << '\n';
  if (!rec.message.empty()) out << "message = " << rec.message << '\n';
  out << "steps = " << rec.steps << '\n';
  out << "t_final = " << format_real(rec.t_final) << '\n';
  out << "samples = " << rec.samples.size() << '\n';
  out << "max_renorm_drift = " << format_real(rec.max_renorm_drift) << '\n';
  out << "cfl_violations = " << rec.cfl_violations << '\n';
  if (!rec.picard_iterations.empty())
    out << "picard_max_iterations = " << *std::max_element(rec.picard_iterations.begin(), rec.picard_iterations.end()) << '\n';
  out << "deterministic = " << (c.deterministic ? "true" : "false") << '\n';
  if (!c.deterministic) out << "wall_seconds = " << format_real(seconds) << '\n';
}

inline int cmd_simulate(const RunConfig& c, std::ostream& out, std::ostream& err) {
  namespace fs = std::filesystem;
  fs::create_directories(c.output);
  const Grid g = make_grid(c);
  AnyState init = make_initial(c, g);
  auto t0 = std::chrono::steady_clock::now();
  auto finish = [&](const auto& rec) {
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_series((fs::path(c.output) / "series.csv").string(), rec.samples);
    if (rec.final_state) write_snapshot((fs::path(c.output) / "snapshot_final.nslg").string(), *rec.final_state);
    write_summary((fs::path(c.output) / "summary.txt").string(), c, rec, secs);
    out << "termination: " << to_string(rec.termination) << "  steps: " << rec.steps << "  t: " << format_real(rec.t_final)
        << "  samples: " << rec.samples.size() << '\n';
    out << "wrote " << c.output << "/{series.csv,snapshot_initial.nslg,snapshot_final.nslg,summary.txt}\n";
    if (rec.termination != Termination::completed) {
      err << "FAIL termination value=" << to_string(rec.termination) << " message=" << rec.message << '\n';
      return 1;
    }
    return 0;
  };
  if (c.model == ModelKind::full) {
    const auto& s0 = std::get<FullState>(init);
    write_snapshot((fs::path(c.output) / "snapshot_initial.nslg").string(), s0);
    return finish(advance(make_full_system(c, g), s0, c.T_end, c.step, c.sample_every));
  }
  const auto& s0 = std::get<PerturbState>(init);
  write_snapshot((fs::path(c.output) / "snapshot_initial.nslg").string(), s0);
  return finish(advance(make_perturb_system(c), s0, c.T_end, c.step, c.sample_every));
}

// ---------------------------------------------------------------- check-invariants

inline std::vector<CheckRow> invariant_rows(const RunConfig& c) {
  const Grid g = make_grid(c);
  AnyState init = make_initial(c, g);
  FullState fs;
  std::optional<PerturbState> ps;
  std::vector<CheckRow> rows;
  if (auto* f = std::get_if<FullState>(&init)) {
    fs = *f;
    try {
      ps = decompose(fs, c.initial.M_e, c.tol);
    } catch (const ModelError& e) {
      rows.push_back({std::string("decompose (") + e.what() + ")", 1.0, 0.0, false});
    }
  } else {
    ps = std::get<PerturbState>(init);
    fs = recompose(*ps, c.tol.det_floor);
  }
  const Params& p = c.params;
  VectorField H = make_field(c, g).at(0.0, g);

  rows.push_back(check_le("sphere |M|-1", sphere_residual(fs.M), c.tol.sphere_tol));
  VectorField dM = llg_rhs(fs.M, fs.v, H, p, LlgForm::cross);
  double tang = 0.0;
  for (std::size_t q = 0; q < g.size(); ++q) tang = std::max(tang, std::abs(dot(fs.M.at(q), dM.at(q))));
  rows.push_back(check_le("tangency M.d_M", tang, 1e-11 * std::max(max_abs(dM), 1.0)));
  VectorField dMm = llg_rhs(fs.M, fs.v, H, p, LlgForm::multiplier);
  rows.push_back(check_le("llg cross vs multiplier", max_abs_diff(dM, dMm), 1e-9));
  rows.push_back(check_le("rho det F - 1", det_constraint_residual(fs.rho, fs.F), c.tol.det_consistency_tol));
  MatrixField U = inverse_fluctuation(fs.F, c.tol.det_floor);
  rows.push_back(check_le("curl U", curl_residual(U), c.tol.curl_tol));
  auto e = total_energy_dissipation(fs, H, p);
  rows.push_back(check_le("-D (dissipation sign)", -e.D + 0.0, 0.0));
  rows.push_back(check_le("angular momentum balance", angular_momentum_balance_residual(fs.M, fs.v, H, p),
                          1e-10 * std::max(1.0, max_abs(effective_field(fs.M, H, p)))));
  rows.push_back(check_le("dissipation forms", dissipation_equivalence_residual(fs.M, H, p), 1e-10));

  if (ps) {
    MatrixField Up = gradient_matrix(ps->psi);
    try {
      VectorField psi2 = recover_psi(Up, c.tol.mean_tol);
      rows.push_back(check_le("psi recovery roundtrip", max_abs_diff(psi2, subtract_mean(ps->psi)), 1e-10));
    } catch (const ModelError& ex) {
      rows.push_back({std::string("psi recovery (") + ex.what() + ")", 1.0, 0.0, false});
    }
    rows.push_back(check_le("compatibility theta vs det(I+U)", compatibility_residual(ps->theta, Up), c.tol.det_consistency_tol));
    rows.push_back(check_le("sphere |M_e+d|-1", sphere_constraint_residual(*ps), c.tol.sphere_tol));
    try {
      VectorField direct = stress_divergence_elastic(fs.rho, fs.F);
      VectorField exact = reformulated_elastic_div_exact(ps->theta, ps->psi, Up, p, c.tol.det_consistency_tol);
      VectorField printed = reformulated_elastic_div(ps->theta, ps->psi, Up, p, c.tol.det_consistency_tol);
      rows.push_back(check_le("elastic divergence completed identity", max_abs_diff(direct, exact), 1e-8));
      rows.push_back(check_le("elastic divergence reformulation", max_abs_diff(direct, printed), 1e-8));
    } catch (const ModelError& ex) {
      rows.push_back({std::string("elastic divergence (") + ex.what() + ")", 1.0, 0.0, false});
    }
    if (c.field.kind == FieldKind::zero) {
      PerturbRhs r = perturb_rhs(*ps, p);
      double scale = std::max({1.0, max_abs(laplacian(r.d_psi)), max_abs(laplacian(ps->psi))});
      rows.push_back(check_le("psi wave form", psi_wave_residual(*ps, r, p), 1e-10 * scale));
      auto db = dbar_rhs(*ps, p);
      auto md = spatial_mean(r.d_d);
      double gap = 0.0;
      for (int i = 0; i < 3; ++i) gap = std::max(gap, std::abs(db[i] - md[i]));
      rows.push_back(check_le("mean split dbar", gap, 1e-10));
    }
  }
  return rows;
}

inline int cmd_check_invariants(const RunConfig& c, std::ostream& out, std::ostream& err) {
  auto rows = invariant_rows(c);
  print_rows(out, rows);
  return report_failures(err, rows);
}

// ---------------------------------------------------------------- varcheck

inline int cmd_varcheck(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const Grid g = make_grid(c);
  AnyState init = make_initial(c, g);
  FullState fs = std::holds_alternative<FullState>(init) ? std::get<FullState>(init)
                                                          : recompose(std::get<PerturbState>(init), c.tol.det_floor);
  FullSystem sys = make_full_system(c, g);
  const Params& p = c.params;
  VectorField H = sys.H.at(0.0, g);
  std::vector<CheckRow> rows;

  auto show = [&](const char* name, const VariationReport& r) {
    out << name << ": probes " << r.probe_count << "  max_abs_mismatch " << format_real(r.max_abs_mismatch) << "  relative_mismatch "
        << format_real(r.relative_mismatch) << '\n';
  };
  auto full_var = free_energy_variation_check(fs.M, H, p, 10, 1e-5, {.seed = c.initial.seed});
  auto tan_var = free_energy_variation_check(fs.M, H, p, 10, 1e-5, {.tangent = true, .seed = c.initial.seed});
  show("free energy variation", full_var);
  show("free energy variation (tangent probes)", tan_var);
  rows.push_back(check_le("free energy variation", full_var.relative_mismatch, 1e-6));
  rows.push_back(check_le("free energy variation tangent", tan_var.relative_mismatch, 1e-6));
  rows.push_back(check_le("angular momentum balance", angular_momentum_balance_residual(fs.M, fs.v, H, p),
                          1e-10 * std::max(1.0, max_abs(effective_field(fs.M, H, p)))));
  auto df = dissipation_equivalence(fs.M, H, p);
  out << "dissipation forms: rate " << format_real(df.rate_form) << "  field " << format_real(df.field_form) << '\n';
  rows.push_back(check_le("dissipation forms", df.relative, 1e-10));

  if (!sys.H.time_dependent()) {
    const double T = std::min(c.T_end, 0.05);
    StepConfig sc = c.step;
    sc.scheme = Scheme::rk4;
    auto rr = energy_rate_check(sys, fs, T, {c.step.dt, 0.5 * c.step.dt}, sc);
    for (const auto& r : rr)
      out << "energy rate: dt " << format_real(r.dt) << "  E0 " << format_real(r.E0) << "  E1 " << format_real(r.E1) << "  int D "
          << format_real(r.dissipated) << "  residual " << format_real(r.residual) << "  order " << format_real(r.order) << '\n';
    rows.push_back(check_le("energy balance", rr.back().residual, 1e-6 * std::max(rr.back().E0, 1e-300)));

    FullSystem quiet = sys;
    quiet.full_diagnostics = false;
    sc.store_flow = true;
    auto rec = advance(quiet, fs, T, sc, std::numeric_limits<int>::max());
    if (rec.termination == Termination::completed)
      rows.push_back(check_le("trajectory density", trajectory_density_check(rec, 20, c.initial.seed), 1e-4));
    else
      rows.push_back({"trajectory density (" + rec.message + ")", 1.0, 1e-4, false});
  }
  print_rows(out, rows);
  return report_failures(err, rows);
}

// ---------------------------------------------------------------- coeffs

inline int cmd_coeffs(const RunConfig& c, std::ostream& out, std::ostream& err) {
  auto r = coeff_search(c.params);
  const auto& m = r.minors;
  out << (r.found ? "found" : "no admissible choice; nearest miss") << ": delta " << format_real(r.choice.delta) << "  eta "
      << format_real(r.choice.eta) << "  epsilon " << format_real(r.choice.epsilon) << "  (evaluated " << r.evaluated << ")\n";
  out << "minor  direct                  closed form             re-derived\n";
  out << "M1     " << std::left << std::setw(24) << format_real(m.M1) << '\n';
  out << "M2     " << std::setw(24) << format_real(m.M2) << '\n';
  out << "M3     " << std::setw(24) << format_real(m.M3) << std::setw(24) << format_real(m.M3_closed) << format_real(m.M3_corrected) << '\n';
  out << "M4     " << std::setw(24) << format_real(m.M4) << std::setw(24) << format_real(m.M4_closed) << format_real(m.M4_corrected) << '\n';
  out << "Xi0 " << format_real(m.Xi0) << "  Xi1 " << format_real(m.Xi1) << "  Xi2 " << format_real(m.Xi2) << "  c# " << format_real(m.c_sharp)
      << '\n';
  std::vector<CheckRow> rows{check_gt("M1", m.M1, 0.0), check_gt("M2", m.M2, 0.0), check_gt("M3", m.M3, 0.0),
                             check_gt("M4", m.M4, 0.0), check_gt("Xi0", m.Xi0, 0.0), check_gt("c_sharp", m.c_sharp, 0.0)};
  rows.push_back({"search", r.found ? 1.0 : 0.0, 1.0, r.found});
  print_rows(out, rows);
  return report_failures(err, rows);
}

// ---------------------------------------------------------------- mms

struct MmsTables {
  std::vector<MmsRow> spatial;
  std::vector<MmsRow> temporal;
};

template <class State>
MmsTables mms_study(const RunConfig& c, int threads) {
  const int dim = c.dim;
  const std::vector<int> ns{8, 12, 16, 24};
  const int n_fine = 48, n_time = 16;
  const double T_space = 0.1, T_time = 0.2;
  const int steps_space = 100;
  const std::vector<int> steps_time{50, 100, 200, 400};
  WaveSpec w;
  MmsTables t;
  t.spatial.resize(ns.size());
  std::vector<State> tsol(steps_time.size());
  std::vector<std::function<void()>> jobs;
  for (std::size_t k = 0; k < ns.size(); ++k)
    jobs.push_back([&, k] {
      Grid g = Grid::cube(dim, ns[k]), fine = Grid::cube(dim, n_fine);
      State s = mms_run<State>(g, fine, c.params, w, T_space, steps_space);
      t.spatial[k] = {ns[k], T_space / steps_space, state_distance(s, manufactured_state<State>(g, T_space, w))};
    });
  for (std::size_t k = 0; k < steps_time.size(); ++k)
    jobs.push_back([&, k] {
      Grid g = Grid::cube(dim, n_time), fine = Grid::cube(dim, n_fine);
      tsol[k] = mms_run<State>(g, fine, c.params, w, T_time, steps_time[k]);
    });
  parallel_jobs(jobs, threads);
  for (std::size_t k = 1; k < ns.size(); ++k)
    t.spatial[k].order = std::log(t.spatial[k - 1].error / t.spatial[k].error) / std::log(double(ns[k]) / ns[k - 1]);
  // successive differences: row k compares dt_k with dt_{k+1}
  for (std::size_t k = 0; k + 1 < steps_time.size(); ++k) {
    MmsRow r{n_time, T_time / steps_time[k], state_distance(tsol[k], tsol[k + 1])};
    if (!t.temporal.empty()) r.order = std::log2(t.temporal.back().error / r.error);
    t.temporal.push_back(r);
  }
  return t;
}

inline std::vector<CheckRow> mms_rows(const MmsTables& t) {
  std::vector<CheckRow> rows;
  const double floor = 1e-10;
  for (std::size_t k = 1; k < t.spatial.size(); ++k)
    rows.push_back(check_le("spatial error n=" + std::to_string(t.spatial[k].n) + " below n=" + std::to_string(t.spatial[k - 1].n),
                            t.spatial[k].error, t.spatial[k - 1].error));
  const auto& last = t.spatial.back();
  if (last.error > floor) rows.push_back(check_gt("spatial order (spectral, last pair)", last.order, 6.0));
  double ord = t.temporal.back().order;
  rows.push_back(check_le("temporal order |p-4|", std::abs(ord - 4.0), 0.5));
  return rows;
}

inline int cmd_mms(const RunConfig& c, ModelKind model, int threads, std::ostream& out, std::ostream& err) {
  MmsTables t = model == ModelKind::full ? mms_study<FullState>(c, threads) : mms_study<PerturbState>(c, threads);
  out << "spatial (dt " << format_real(t.spatial.front().dt) << ", T 0.1, fine grid 48)\n  n   error                    order\n";
  for (const auto& r : t.spatial)
    out << "  " << std::left << std::setw(4) << r.n << std::setw(25) << format_real(r.error) << format_real(r.order) << '\n';
  out << "temporal (n " << t.temporal.front().n << ", T 0.2, self-differences)\n  dt        |q(dt)-q(dt/2)|          order\n";
  for (const auto& r : t.temporal)
    out << "  " << std::left << std::setw(10) << format_real(r.dt) << std::setw(25) << format_real(r.error) << format_real(r.order)
        << '\n';
  auto rows = mms_rows(t);
  print_rows(out, rows);
  return report_failures(err, rows);
}

// ---------------------------------------------------------------- oracle-macrospin

struct MacrospinResult {
  double Mz = 0.0, Mz_exact = 0.0;
  double phi = 0.0, phi_exact = 0.0;
};

inline double wrap_angle(double a) {
  a = std::remainder(a, kTwoPi);
  return a;
}

inline MacrospinResult macrospin_run(double dt, double T = 1.0) {
  Grid g = Grid::cube(2, 8);
  FullSystem sys;
  sys.p.lambda_d = 0.1;
  sys.p.gamma_g = 1.0;
  sys.p.mu0 = 1.0;
  sys.H = ExternalField::constant(g, {0, 0, 1});
  sys.full_diagnostics = false;
  StepConfig cfg;
  cfg.dt = dt;
  auto rec = advance(sys, equilibrium_state(g, {1, 0, 0}), T, cfg, std::numeric_limits<int>::max());
  if (rec.termination != Termination::completed) throw std::runtime_error("macrospin run stopped: " + rec.message);
  Vec3 m = rec.final_state->M.at(0);
  MacrospinResult r;
  r.Mz = m[2];
  r.Mz_exact = std::tanh(sys.p.lambda_d * sys.p.mu0 * T);
  r.phi = std::atan2(m[1], m[0]);
  r.phi_exact = sys.p.gamma_g * T;
  return r;
}

inline int cmd_oracle_macrospin(const RunConfig& c, std::ostream& out, std::ostream& err) {
  auto r = macrospin_run(c.step.dt);
  out << "M_z " << format_real(r.Mz) << "  closed form tanh(lambda mu0 H t) " << format_real(r.Mz_exact) << '\n';
  out << "azimuth " << format_real(r.phi) << "  closed form gamma_g t " << format_real(r.phi_exact) << '\n';
  std::vector<CheckRow> rows{check_le("M_z error", std::abs(r.Mz - r.Mz_exact), 1e-8),
                             check_le("azimuth error", std::abs(wrap_angle(r.phi - r.phi_exact)), 1e-8)};
  print_rows(out, rows);
  return report_failures(err, rows);
}

}  // namespace nslg
