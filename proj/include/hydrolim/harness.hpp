#pragma once

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "hydrolim/assumptions.hpp"
#include "hydrolim/diagnostics.hpp"
#include "hydrolim/errors.hpp"
#include "hydrolim/kinetic.hpp"
#include "hydrolim/potentials.hpp"
#include "hydrolim/smoluchowski.hpp"

namespace hydrolim {

// Fraction of the horizon discarded before taking sup-in-time statistics for
// slope fits: the kinetic flux needs O(eps^2 log(1/eps)) to relax onto the
// limit flux, and below eps ~ 0.4 that transient is not resolved at t ~ 0.
inline constexpr double kBurnFraction = 0.5;

struct RunConfig {
  std::string potential_kind = "harmonic";  // harmonic | double_well
  double potential_k = 1.0;
  double potential_alpha = 1.0;
  double potential_beta = 1.0;
  double gamma = 1.0;  // scalar friction; mobility is 1/gamma
  int dimension = 1;
  double Lx = 6.0, Lv = 6.0;
  int Nx = 128, Nv = 128;
  int ensemble_M = 100000;
  std::vector<double> epsilons = {0.4, 0.2, 0.1, 0.05};
  double T = 1.0;
  double cfl = 0.6;
  double dt_smol = 2e-4;
  double ensemble_c = 0.02;  // ensemble step = c * eps
  std::uint64_t seed = 12345;
  int snapshots = 33;
  std::string init_kind = "gaussian";  // gaussian | gibbs
  double sigma0sq = 2.0;
  std::string solver = "grid";  // grid | ensemble
};

namespace detail_harness {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigInvalid("bad numeric value for " + key + ": '" + v + "'");
  }
}

inline long parse_long(const std::string& key, const std::string& v) {
  const double d = parse_double(key, v);
  if (d != std::floor(d)) throw ConfigInvalid(key + " must be an integer");
  return static_cast<long>(d);
}

}  // namespace detail_harness

// Flat key = value lines, '#' comments, dotted section names.
inline RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail_harness::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigInvalid("line " + std::to_string(lineno) +
                          ": expected key = value");
    const std::string key = detail_harness::trim(line.substr(0, eq));
    const std::string val = detail_harness::trim(line.substr(eq + 1));
    using detail_harness::parse_double;
    using detail_harness::parse_long;

    if (key == "potential.kind") {
      if (val != "harmonic" && val != "double_well")
        throw ConfigInvalid("unknown potential.kind '" + val + "'");
      cfg.potential_kind = val;
    } else if (key == "potential.k") {
      cfg.potential_k = parse_double(key, val);
    } else if (key == "potential.alpha") {
      cfg.potential_alpha = parse_double(key, val);
    } else if (key == "potential.beta") {
      cfg.potential_beta = parse_double(key, val);
    } else if (key == "mobility.gamma") {
      cfg.gamma = parse_double(key, val);
    } else if (key == "dimension") {
      cfg.dimension = static_cast<int>(parse_long(key, val));
    } else if (key == "grid.Lx") {
      cfg.Lx = parse_double(key, val);
    } else if (key == "grid.Lv") {
      cfg.Lv = parse_double(key, val);
    } else if (key == "grid.Nx") {
      cfg.Nx = static_cast<int>(parse_long(key, val));
    } else if (key == "grid.Nv") {
      cfg.Nv = static_cast<int>(parse_long(key, val));
    } else if (key == "ensemble.M") {
      cfg.ensemble_M = static_cast<int>(parse_long(key, val));
    } else if (key == "ensemble.c") {
      cfg.ensemble_c = parse_double(key, val);
    } else if (key == "epsilons") {
      cfg.epsilons.clear();
      std::istringstream es(val);
      std::string tok;
      while (std::getline(es, tok, ',')) {
        tok = detail_harness::trim(tok);
        if (!tok.empty()) cfg.epsilons.push_back(parse_double(key, tok));
      }
    } else if (key == "T") {
      cfg.T = parse_double(key, val);
    } else if (key == "dt.cfl") {
      cfg.cfl = parse_double(key, val);
    } else if (key == "dt.smoluchowski") {
      cfg.dt_smol = parse_double(key, val);
    } else if (key == "seed") {
      cfg.seed = static_cast<std::uint64_t>(parse_long(key, val));
    } else if (key == "snapshots") {
      cfg.snapshots = static_cast<int>(parse_long(key, val));
    } else if (key == "init.kind") {
      if (val != "gaussian" && val != "gibbs")
        throw ConfigInvalid("unknown init.kind '" + val + "'");
      cfg.init_kind = val;
    } else if (key == "init.sigma0sq") {
      cfg.sigma0sq = parse_double(key, val);
    } else if (key == "solver") {
      if (val != "grid" && val != "ensemble")
        throw ConfigInvalid("unknown solver '" + val + "'");
      cfg.solver = val;
    } else {
      throw ConfigInvalid("unknown config key '" + key + "'");
    }
  }
  return cfg;
}

inline void validate_config(const RunConfig& cfg) {
  if (cfg.dimension != 1)
    throw ConfigInvalid("grid pipeline supports dimension = 1");
  if (cfg.Nx < 16 || cfg.Nv < 16)
    throw ConfigInvalid("grids need at least 16 cells per axis");
  if (!(cfg.Lx > 0.0) || !(cfg.Lv > 0.0))
    throw ConfigInvalid("box half-widths must be positive");
  if (cfg.ensemble_M < 100) throw ConfigInvalid("ensemble needs M >= 100");
  if (!(cfg.T > 0.0)) throw ConfigInvalid("horizon must be positive");
  if (!(cfg.cfl > 0.0 && cfg.cfl <= 1.0))
    throw ConfigInvalid("dt.cfl must lie in (0, 1]");
  if (!(cfg.dt_smol > 0.0)) throw ConfigInvalid("dt.smoluchowski must be > 0");
  if (!(cfg.ensemble_c > 0.0)) throw ConfigInvalid("ensemble.c must be > 0");
  if (!(cfg.gamma > 0.0)) throw ConfigInvalid("mobility.gamma must be > 0");
  if (!(cfg.sigma0sq > 0.0)) throw ConfigInvalid("init.sigma0sq must be > 0");
  if (cfg.snapshots < 3) throw ConfigInvalid("need at least 3 snapshots");
  if (cfg.epsilons.empty()) throw ConfigInvalid("epsilon list is empty");
  for (std::size_t i = 0; i < cfg.epsilons.size(); ++i) {
    if (!(cfg.epsilons[i] > 0.0))
      throw ConfigInvalid("epsilons must be positive");
    if (i > 0 && !(cfg.epsilons[i] < cfg.epsilons[i - 1]))
      throw ConfigInvalid("epsilon list must be strictly decreasing");
  }
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigInvalid("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  RunConfig cfg = parse_config(ss.str());
  validate_config(cfg);
  return cfg;
}

inline Potential make_potential(const RunConfig& cfg) {
  if (cfg.potential_kind == "harmonic")
    return harmonic_potential(cfg.dimension, cfg.potential_k);
  return double_well_potential(cfg.potential_alpha, cfg.potential_beta);
}

// Initial spatial density, normalized on the grid.
inline Eigen::ArrayXd init_density(const RunConfig& cfg, const Axis& axis,
                                   const Potential& potential) {
  if (cfg.init_kind == "gibbs") return gibbs_state(potential, axis).density;
  Eigen::ArrayXd rho(axis.cells);
  for (int i = 0; i < axis.cells; ++i) {
    const double xc = axis.center(i);
    rho[i] = std::exp(-0.5 * xc * xc / cfg.sigma0sq);
  }
  rho /= rho.sum() * axis.dx;
  return rho;
}

// ---------------------------------------------------------------------------
// Deterministic text output. %.17g round-trips doubles exactly, so identical
// runs produce identical bytes.

inline std::string fmt_g17(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline constexpr const char* kDiagnosticsHeader =
    "t,epsilon,mass,free_energy,dissipation,weighted_l2,H_f_rhoM,H_rho_rho,"
    "L1_f_rhoM,L1_rho_rho,flux_residual,pressure_dev,r1,r2";

inline void write_diagnostics_csv(const std::string& path,
                                  const std::vector<DiagnosticsRecord>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << kDiagnosticsHeader << "\n";
  for (const auto& r : rows) {
    out << fmt_g17(r.t) << ',' << fmt_g17(r.epsilon) << ',' << fmt_g17(r.mass)
        << ',' << fmt_g17(r.free_energy) << ',' << fmt_g17(r.dissipation)
        << ',' << fmt_g17(r.weighted_l2) << ',' << fmt_g17(r.H_f_rhoM) << ','
        << fmt_g17(r.H_rho_rho) << ',' << fmt_g17(r.L1_f_rhoM) << ','
        << fmt_g17(r.L1_rho_rho) << ',' << fmt_g17(r.flux_residual) << ','
        << fmt_g17(r.pressure_dev) << ',' << fmt_g17(r.r1) << ','
        << fmt_g17(r.r2) << "\n";
  }
}

inline void write_density_csv(const std::string& path, const Axis& axis,
                              const Eigen::ArrayXd& rho,
                              const Eigen::ArrayXd& gibbs_weights) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << "x,rho,h0\n";
  for (int i = 0; i < axis.cells; ++i)
    out << fmt_g17(axis.center(i)) << ',' << fmt_g17(rho[i]) << ','
        << fmt_g17(rho[i] / gibbs_weights[i]) << "\n";
}

// Canonical dump: every key in a fixed order. Feeds both the run id hash and
// the config copy placed next to the outputs.
inline std::string canonical_dump(const RunConfig& cfg) {
  std::ostringstream os;
  os << "potential.kind = " << cfg.potential_kind << "\n";
  os << "potential.k = " << fmt_g17(cfg.potential_k) << "\n";
  os << "potential.alpha = " << fmt_g17(cfg.potential_alpha) << "\n";
  os << "potential.beta = " << fmt_g17(cfg.potential_beta) << "\n";
  os << "mobility.gamma = " << fmt_g17(cfg.gamma) << "\n";
  os << "dimension = " << cfg.dimension << "\n";
  os << "grid.Lx = " << fmt_g17(cfg.Lx) << "\n";
  os << "grid.Lv = " << fmt_g17(cfg.Lv) << "\n";
  os << "grid.Nx = " << cfg.Nx << "\n";
  os << "grid.Nv = " << cfg.Nv << "\n";
  os << "ensemble.M = " << cfg.ensemble_M << "\n";
  os << "ensemble.c = " << fmt_g17(cfg.ensemble_c) << "\n";
  os << "epsilons = ";
  for (std::size_t i = 0; i < cfg.epsilons.size(); ++i)
    os << (i ? ", " : "") << fmt_g17(cfg.epsilons[i]);
  os << "\n";
  os << "T = " << fmt_g17(cfg.T) << "\n";
  os << "dt.cfl = " << fmt_g17(cfg.cfl) << "\n";
  os << "dt.smoluchowski = " << fmt_g17(cfg.dt_smol) << "\n";
  os << "seed = " << cfg.seed << "\n";
  os << "snapshots = " << cfg.snapshots << "\n";
  os << "init.kind = " << cfg.init_kind << "\n";
  os << "init.sigma0sq = " << fmt_g17(cfg.sigma0sq) << "\n";
  os << "solver = " << cfg.solver << "\n";
  return os.str();
}

inline std::string run_id(const RunConfig& cfg) {
  const std::string dump = canonical_dump(cfg);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

// ---------------------------------------------------------------------------

inline void parallel_for(std::size_t n, int threads,
                         const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex m;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(m);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const int k = std::min<std::size_t>(threads, n);
  for (int t = 0; t < k; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// Least-squares slope of log(value) against log(eps), with the RMS residual
// of the fit in log space.
inline std::pair<double, double> fit_order(const std::vector<double>& eps,
                                           const std::vector<double>& values) {
  if (eps.size() != values.size() || eps.size() < 3)
    throw ConfigInvalid("slope fit needs at least 3 points");
  const std::size_t n = eps.size();
  std::vector<double> u(n), w(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(eps[i] > 0.0) || !(values[i] > 0.0))
      throw NonPositiveValue("slope fit needs positive data");
    u[i] = std::log(eps[i]);
    w[i] = std::log(values[i]);
  }
  double um = 0.0, wm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    um += u[i];
    wm += w[i];
  }
  um /= n;
  wm /= n;
  double suw = 0.0, suu = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    suw += (u[i] - um) * (w[i] - wm);
    suu += (u[i] - um) * (u[i] - um);
  }
  const double slope = suw / suu;
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = w[i] - (wm + slope * (u[i] - um));
    rss += r * r;
  }
  return {slope, std::sqrt(rss / n)};
}

// ---------------------------------------------------------------------------

struct SlopeFit {
  double slope = 0.0;
  double residual = 0.0;
  bool fitted = false;
  bool pass = false;
};

struct SweepReport {
  std::vector<double> epsilons;
  std::vector<std::vector<DiagnosticsRecord>> series;  // one per eps
  std::vector<std::string> quantities;
  std::map<std::string, std::vector<double>> values;  // quantity -> per-eps
  std::map<std::string, SlopeFit> slopes;
  bool h_monotone = false;
  bool assumptions_ok = false;
  std::string out_dir;
};

namespace detail_harness {

struct SweepContext {
  Potential potential;
  Axis x, v;
  Eigen::ArrayXd maxw;
  Eigen::ArrayXd rho0;
  std::function<double(double)> friction;
  std::function<double(double)> mobility;
  std::vector<double> snapshot_times;
};

inline SweepContext make_context(const RunConfig& cfg) {
  SweepContext ctx{make_potential(cfg),
                   Axis(cfg.Lx, cfg.Nx),
                   Axis(cfg.Lv, cfg.Nv),
                   {},
                   {},
                   {},
                   {},
                   {}};
  ctx.maxw = discrete_maxwellian(ctx.v);
  ctx.rho0 = init_density(cfg, ctx.x, ctx.potential);
  const double gamma = cfg.gamma;
  ctx.friction = [gamma](double) { return gamma; };
  ctx.mobility = [gamma](double) { return 1.0 / gamma; };
  ctx.snapshot_times.resize(cfg.snapshots);
  for (int k = 0; k < cfg.snapshots; ++k)
    ctx.snapshot_times[k] = cfg.T * k / (cfg.snapshots - 1);
  return ctx;
}

}  // namespace detail_harness

// Assumption certification for the scalar-friction pipeline configs.
inline AssumptionReport certify(const RunConfig& cfg, int n_samples = 256) {
  const auto ctx = detail_harness::make_context(cfg);
  SampleBox box;
  box.lo = Eigen::VectorXd::Constant(1, -cfg.Lx);
  box.hi = Eigen::VectorXd::Constant(1, cfg.Lx);

  AssumptionReport rep;
  rep.sample_points = n_samples;
  rep.ellipticity = check_ellipticity(isotropic_mobility(1, 1.0 / cfg.gamma), ctx.potential, box,
                    n_samples, cfg.seed);
  rep.ellipticity_ok = rep.ellipticity.pass;

  DensityState rho0{ctx.x, ctx.rho0, 0.0};
  auto hook = [&](const Eigen::ArrayXd& r0, double T) {
    SmoluchowskiScheme scheme(ctx.x, ctx.potential, ctx.mobility);
    std::vector<double> times = {0.0, 0.25 * T, 0.5 * T, 0.75 * T, T};
    return run_smoluchowski(scheme, r0, T, cfg.dt_smol, times);
  };
  rep.initial_data = check_initial_data(rho0, ctx.potential, cfg.T, hook);
  rep.sandwich_ok = rep.initial_data.sandwich_pass;
  rep.boundary_ok = rep.initial_data.boundary_pass;

  rep.growth = check_growth(isotropic_friction(1, cfg.gamma), ctx.potential, box,
                       n_samples, cfg.seed);
  rep.growth_ok = rep.growth.pass;
  rep.integrability = check_integrability(isotropic_mobility(1, 1.0 / cfg.gamma),
                          ctx.potential, box, 2048, cfg.seed);
  rep.integrability_ok = rep.integrability.pass;
  return rep;
}

// One kinetic run at a fixed eps with the full diagnostics row per snapshot.
inline std::vector<DiagnosticsRecord> diagnose_run(
    const RunConfig& cfg, const detail_harness::SweepContext& ctx, double eps,
    const std::vector<DensitySnapshot>& limit) {
  KineticGridScheme scheme(ctx.x, ctx.v, ctx.potential, ctx.friction, eps, 0.0,
                           cfg.cfl);
  const Eigen::MatrixXd feq = scheme.equilibrium();
  const Eigen::MatrixXd f0 = local_equilibrium(ctx.rho0, ctx.maxw);
  const auto snaps = run_kinetic(scheme, f0, cfg.T, ctx.snapshot_times);
  if (snaps.size() != limit.size())
    throw IncompatibleGrids("snapshot counts diverged");

  const double vol = ctx.x.dx * ctx.v.dx;
  std::vector<DiagnosticsRecord> rows(snaps.size());
  for (std::size_t k = 0; k < snaps.size(); ++k) {
    const Eigen::MatrixXd& f = snaps[k].f;
    const double fmax = f.maxCoeff();
    if (f.minCoeff() < -1e-13 * fmax)
      throw NegativeCell("kinetic state has a structurally negative cell");
    DiagnosticsRecord& r = rows[k];
    r.t = snaps[k].t;
    r.epsilon = eps;
    r.mass = mass(f, ctx.x, ctx.v);
    r.free_energy = free_energy(f, ctx.x, ctx.v, ctx.potential);
    r.dissipation =
        dissipation_rate(f, ctx.x, ctx.v, ctx.maxw, ctx.friction, eps);
    r.weighted_l2 = weighted_l2(f, feq, vol);
    const GridMoments m = moments_grid(f, ctx.x, ctx.v);
    const Eigen::MatrixXd frm = local_equilibrium(m.rho, ctx.maxw);
    r.H_f_rhoM = relative_entropy(f, frm, vol);
    r.L1_f_rhoM = l1_distance(f, frm, vol);
    r.H_rho_rho = relative_entropy(m.rho, limit[k].rho, ctx.x.dx);
    r.L1_rho_rho = l1_distance(m.rho, limit[k].rho, ctx.x.dx);
    r.flux_residual =
        flux_residual(f, ctx.x, ctx.v, eps, ctx.mobility, ctx.potential).norm;
    r.pressure_dev = pressure_deviation(f, ctx.x, ctx.v, ctx.maxw).norm;
  }
  const RemainderSeries rem = remainder_terms(
      snaps, limit, ctx.x, ctx.v, ctx.maxw, ctx.mobility, ctx.potential, eps);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    rows[k].r1 = rem.r1[k];
    rows[k].r2 = rem.r2[k];
  }
  return rows;
}

inline SweepReport run_sweep(const RunConfig& cfg, const std::string& out_root,
                             int threads = 1, bool force = false) {
  validate_config(cfg);
  const auto ctx = detail_harness::make_context(cfg);

  SweepReport rep;
  rep.epsilons = cfg.epsilons;
  const AssumptionReport assume = certify(cfg);
  rep.assumptions_ok = assume.all_ok();
  if (!rep.assumptions_ok && !force)
    throw AssumptionsNotMet("assumption certification failed; rerun with "
                            "--force to proceed anyway");

  namespace fs = std::filesystem;
  const fs::path dir = fs::path(out_root) / run_id(cfg);
  fs::create_directories(dir);
  {
    std::ofstream cp(dir / "config.txt", std::ios::binary);
    cp << canonical_dump(cfg);
    std::ofstream ar(dir / "assumptions.txt", std::ios::binary);
    ar << format_report(assume);
  }
  rep.out_dir = dir.string();

  // Limit trajectory once, shared read-only across eps points.
  SmoluchowskiScheme smol(ctx.x, ctx.potential, ctx.mobility);
  const auto limit =
      run_smoluchowski(smol, ctx.rho0, cfg.T, cfg.dt_smol, ctx.snapshot_times);

  rep.series.resize(cfg.epsilons.size());
  parallel_for(cfg.epsilons.size(), threads, [&](std::size_t i) {
    rep.series[i] = diagnose_run(cfg, ctx, cfg.epsilons[i], limit);
    char name[48];
    std::snprintf(name, sizeof name, "eps=%g", cfg.epsilons[i]);
    const fs::path edir = dir / name;
    fs::create_directories(edir);
    write_diagnostics_csv((edir / "diagnostics.csv").string(), rep.series[i]);
  });

  // Sup over the measured window, remainders integrated over the whole run.
  const double t_burn = kBurnFraction * cfg.T;
  rep.quantities = {"sup_L1_f_rhoM", "sup_flux_residual", "sup_pressure_dev",
                    "remainder_sum", "sup_H_f_rhoM"};
  for (const auto& q : rep.quantities)
    rep.values[q] = std::vector<double>(cfg.epsilons.size(), 0.0);
  for (std::size_t i = 0; i < cfg.epsilons.size(); ++i) {
    double s_l1 = 0.0, s_flux = 0.0, s_dev = 0.0, s_h = 0.0;
    for (const auto& r : rep.series[i]) {
      if (r.t < t_burn) continue;
      s_l1 = std::max(s_l1, r.L1_f_rhoM);
      s_flux = std::max(s_flux, r.flux_residual);
      s_dev = std::max(s_dev, r.pressure_dev);
      s_h = std::max(s_h, r.H_f_rhoM);
    }
    std::vector<double> t, r1, r2;
    for (const auto& r : rep.series[i]) {
      t.push_back(r.t);
      r1.push_back(r.r1);
      r2.push_back(r.r2);
    }
    const double i1 = detail_diag::trapezoid(t, r1);
    const double i2 = detail_diag::trapezoid(t, r2);
    rep.values["sup_L1_f_rhoM"][i] = s_l1;
    rep.values["sup_flux_residual"][i] = s_flux;
    rep.values["sup_pressure_dev"][i] = s_dev;
    rep.values["remainder_sum"][i] = std::abs(i1) + std::abs(i2);
    rep.values["sup_H_f_rhoM"][i] = s_h;
  }

  rep.h_monotone = true;
  const auto& hs = rep.values["sup_H_f_rhoM"];
  for (std::size_t i = 1; i < hs.size(); ++i)
    rep.h_monotone = rep.h_monotone && hs[i] < hs[i - 1];

  for (const auto& q : rep.quantities) {
    SlopeFit fit;
    if (cfg.epsilons.size() >= 3) {
      const auto [slope, resid] = fit_order(cfg.epsilons, rep.values[q]);
      fit.slope = slope;
      fit.residual = resid;
      fit.fitted = true;
      fit.pass = (q == "sup_H_f_rhoM") ? rep.h_monotone
                                       : (slope >= 0.8 && resid <= 0.15);
    }
    rep.slopes[q] = fit;
  }

  {
    std::ofstream sm(dir / "summary.csv", std::ios::binary);
    sm << "quantity,slope,fit_residual,pass\n";
    for (const auto& q : rep.quantities) {
      const SlopeFit& f = rep.slopes[q];
      sm << q << ',' << (f.fitted ? fmt_g17(f.slope) : "nan") << ','
         << (f.fitted ? fmt_g17(f.residual) : "nan") << ','
         << (f.pass ? 1 : 0) << "\n";
    }
    std::ofstream vs(dir / "values.csv", std::ios::binary);
    vs << "quantity,epsilon,value\n";
    for (const auto& q : rep.quantities)
      for (std::size_t i = 0; i < cfg.epsilons.size(); ++i)
        vs << q << ',' << fmt_g17(cfg.epsilons[i]) << ','
           << fmt_g17(rep.values[q][i]) << "\n";
  }
  return rep;
}

// Eigenvalue summaries for a two-sphere distance scan.
inline void write_mobility_info_csv(std::ostream& out, const std::string& kind,
                                    double radius, double viscosity,
                                    const std::vector<double>& distances) {
  out << "config_id,d,lambda_min,lambda_max\n";
  for (std::size_t i = 0; i < distances.size(); ++i) {
    const double d = distances[i];
    const SphereConfiguration cfg(
        {Eigen::Vector3d::Zero(), Eigen::Vector3d(d, 0.0, 0.0)}, radius,
        viscosity);
    Eigen::MatrixXd mob;
    if (kind == "oseen") {
      mob = build_oseen(cfg).mobility;
    } else if (kind == "rpy") {
      mob = build_rpy(cfg);
    } else {
      throw ConfigInvalid("unknown mobility kind '" + kind + "'");
    }
    const auto es = spectrum(symmetrized(mob));
    out << i << ',' << fmt_g17(d) << ','
        << fmt_g17(es.eigenvalues().minCoeff()) << ','
        << fmt_g17(es.eigenvalues().maxCoeff()) << "\n";
  }
}

}  // namespace hydrolim
