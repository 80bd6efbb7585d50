// Acceptance suite for the release benchmark: quadratic confinement on
// [-6,6]^2 with unit friction. Each criterion prints one pass/fail line with
// its measured numbers and wall time; the process exits nonzero if any fails.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hydrolim/hydrolim.hpp"

using namespace hydrolim;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

std::string strf(const char* fmt, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, ap);
  va_end(ap);
  return buf;
}

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ =
      std::chrono::steady_clock::now();
};

void line(int id, const char* label, bool ok, double secs,
          const std::string& detail) {
  std::printf("[%s] criterion %d: %-28s (%6.1f s)  %s\n", ok ? "PASS" : "FAIL",
              id, label, secs, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

struct Bench {
  Axis x{6.0, 128};
  Axis v{6.0, 128};
  Potential pot = harmonic_potential(1, 1.0);
  std::function<double(double)> friction = [](double) { return 1.0; };
  std::function<double(double)> mobility = [](double) { return 1.0; };
  Eigen::ArrayXd maxw, rho_gauss, gibbs;

  Bench() {
    maxw = discrete_maxwellian(v);
    rho_gauss.resize(x.cells);
    for (int i = 0; i < x.cells; ++i) {
      const double xc = x.center(i);
      rho_gauss[i] = std::exp(-0.25 * xc * xc);  // sigma0^2 = 2
    }
    rho_gauss /= rho_gauss.sum() * x.dx;
    gibbs = gibbs_state(pot, x).density;
  }
};

double grid_variance(const Eigen::ArrayXd& rho, const Axis& ax) {
  double m0 = 0.0, m1 = 0.0, m2 = 0.0;
  for (int i = 0; i < ax.cells; ++i) {
    const double xc = ax.center(i);
    m0 += rho[i];
    m1 += rho[i] * xc;
    m2 += rho[i] * xc * xc;
  }
  m1 /= m0;
  m2 /= m0;
  return m2 - m1 * m1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// --------------------------------------------------------------------------

void criterion1_equilibrium(const Bench& b) {
  Timer t;
  KineticGridScheme ks(b.x, b.v, b.pot, b.friction, 1.0);
  const Eigen::MatrixXd feq = ks.equilibrium();
  const auto snaps = run_kinetic(ks, feq, 1.0, {0.0, 1.0});
  const double vol = b.x.dx * b.v.dx;
  const double drift = l1_distance(snaps.back().f, feq, vol);

  SmoluchowskiScheme ss(b.x, b.pot, b.mobility);
  Eigen::ArrayXd rho = ss.equilibrium();
  double resid = 0.0;
  for (int s = 0; s < 5000; ++s) {
    const Eigen::ArrayXd prev = rho;
    ss.step(rho, 2e-4);
    resid = std::max(resid, (rho - prev).abs().maxCoeff());
  }
  const double secs = t.seconds();
  const bool ok = drift <= 1e-3 && resid <= 1e-12 && secs < 60.0;
  line(1, "equilibrium preservation", ok, secs,
       strf("kinetic L1 drift %.2e (tol 1e-3), per-step limit residual %.2e "
            "(tol 1e-12)",
            drift, resid));
}

void criterion2_invariants(const Bench& b) {
  Timer t;
  bool ok = true;
  std::string fail_note;
  const double vol = b.x.dx * b.v.dx;

  // Kinetic run at eps = 0.4 from the local-equilibrium start, audited at
  // every accepted step.
  {
    KineticGridScheme ks(b.x, b.v, b.pot, b.friction, 0.4);
    const Eigen::MatrixXd feq = ks.equilibrium();
    Eigen::MatrixXd f = local_equilibrium(b.rho_gauss, b.maxw);
    const long n = std::lround(std::ceil(1.0 / ks.dt()));
    const double dt = 1.0 / static_cast<double>(n);
    double e_prev = free_energy(f, b.x, b.v, b.pot);
    double w_prev = weighted_l2(f, feq, vol);
    for (long s = 0; s < n && ok; ++s) {
      scheme_step(ks, f, dt);
      const double m = mass(f, b.x, b.v);
      if (std::abs(m - 1.0) > 1e-10) {
        ok = false;
        fail_note = strf("kinetic mass drift %.2e at step %ld", m - 1.0, s);
      }
      if (f.minCoeff() < -1e-13 * f.maxCoeff()) {
        ok = false;
        fail_note = strf("kinetic negativity %.2e at step %ld", f.minCoeff(),
                         s);
      }
      const double e = free_energy(f, b.x, b.v, b.pot);
      if (e > e_prev + 5e-11 * (1.0 + std::abs(e_prev))) {
        ok = false;
        fail_note = strf("free energy rose by %.2e at step %ld", e - e_prev,
                         s);
      }
      const double w = weighted_l2(f, feq, vol);
      if (w > w_prev + 5e-11 * (1.0 + w_prev)) {
        ok = false;
        fail_note = strf("weighted L2 rose by %.2e at step %ld", w - w_prev,
                         s);
      }
      const double d = dissipation_rate(f, b.x, b.v, b.maxw, b.friction, 0.4);
      if (!(d >= 0.0)) {
        ok = false;
        fail_note = strf("negative dissipation %.2e at step %ld", d, s);
      }
      if (s % 50 == 0) {
        const GridMoments m1 = moments_grid(f, b.x, b.v);
        const Eigen::MatrixXd frm = local_equilibrium(m1.rho, b.maxw);
        const double h = relative_entropy(f, frm, vol);
        const double l1 = l1_distance(f, frm, vol);
        if (!ckp_check(h, l1)) {
          ok = false;
          fail_note = strf("L1/entropy inequality failed at step %ld", s);
        }
      }
      e_prev = e;
      w_prev = w;
    }
  }

  // Limit run from the same density, audited every step: mass, positivity,
  // entropy decay toward the Gibbs state, weight-ratio extrema.
  if (ok) {
    SmoluchowskiScheme ss(b.x, b.pot, b.mobility);
    Eigen::ArrayXd rho = b.rho_gauss;
    Extrema ex = h0_extrema(rho, ss.gibbs_weights());
    double h_prev = relative_entropy(rho, b.gibbs, b.x.dx);
    for (int s = 0; s < 5000 && ok; ++s) {
      ss.step(rho, 2e-4);
      const double m = rho.sum() * b.x.dx;
      if (std::abs(m - 1.0) > 1e-10) {
        ok = false;
        fail_note = strf("limit mass drift %.2e at step %d", m - 1.0, s);
      }
      if (rho.minCoeff() < 0.0) {
        ok = false;
        fail_note = strf("limit negativity %.2e at step %d", rho.minCoeff(),
                         s);
      }
      const Extrema now = h0_extrema(rho, ss.gibbs_weights());
      if (now.hi > ex.hi + 1e-8 || now.lo < ex.lo - 1e-8) {
        ok = false;
        fail_note = strf("weight-ratio extrema expanded at step %d", s);
      }
      const double h = relative_entropy(rho, b.gibbs, b.x.dx);
      if (h > h_prev + 5e-11 * (1.0 + std::abs(h_prev))) {
        ok = false;
        fail_note = strf("limit entropy rose by %.2e at step %d", h - h_prev,
                         s);
      }
      if (s % 100 == 0 && !ckp_check(h, l1_distance(rho, b.gibbs, b.x.dx))) {
        ok = false;
        fail_note = strf("limit L1/entropy inequality failed at step %d", s);
      }
      ex = now;
      h_prev = h;
    }
  }

  line(2, "per-step invariants", ok, t.seconds(),
       ok ? "mass 1e-10, positivity, monotone energies, L1/entropy bound on "
            "audited runs"
          : fail_note);
}

void criterion3_variance(const Bench& b) {
  Timer t;
  auto run_var = [&](int cells, double dt, double& realized_err,
                     double& literal_err) {
    const Axis ax(6.0, cells);
    Eigen::ArrayXd rho(cells);
    for (int i = 0; i < cells; ++i) {
      const double xc = ax.center(i);
      rho[i] = std::exp(-0.25 * xc * xc);
    }
    rho /= rho.sum() * ax.dx;
    const double s0 = grid_variance(rho, ax);
    SmoluchowskiScheme ss(ax, b.pot, b.mobility);
    const long n = std::lround(1.0 / dt);
    for (long s = 0; s < n; ++s) ss.step(rho, dt);
    const double var = grid_variance(rho, ax);
    realized_err = std::abs(var - analytic_ou_variance(s0, 1.0, 1.0, 1.0));
    literal_err = std::abs(var - analytic_ou_variance(2.0, 1.0, 1.0, 1.0));
  };
  double r128, l128, r256, l256;
  run_var(128, 2e-4, r128, l128);
  run_var(256, 5e-5, r256, l256);
  const double ratio = r128 / r256;
  const double secs = t.seconds();
  const bool ok = l128 <= 1e-3 && ratio >= 3.5 && secs < 60.0;
  line(3, "dispersion relaxation rate", ok, secs,
       strf("error %.2e (tol 1e-3); refinement ratio %.2f vs discrete-start "
            "reference (need 3.5)",
            l128, ratio));
}

void criterion4_sweep(const fs::path& root) {
  Timer t;
  RunConfig cfg;  // defaults are the release benchmark sweep
  // The implicit collision substep is first order in time, so its error
  // carries the stiff 1/eps^2 factor: the flux-residual excess over the
  // converged value is about 0.1*dt/eps^2 (measured across three grids).
  // The smallest-epsilon signal is ~1e-3, so the default cfl buries it.
  // cfl = 8e-3 puts the time error near a tenth of that signal while the
  // sweep stays on the benchmark grid; dt only sets accuracy here.
  cfg.cfl = 8e-3;
  SweepReport rep;
  std::string detail;
  bool ok = true;
  try {
    rep = run_sweep(cfg, (root / "sweep").string(), 1);
  } catch (const Error& e) {
    line(4, "limit convergence orders", false, t.seconds(),
         strf("sweep aborted: %s", e.what()));
    return;
  }
  std::ostringstream os;
  for (const char* q : {"sup_L1_f_rhoM", "sup_flux_residual",
                        "sup_pressure_dev", "remainder_sum"}) {
    const SlopeFit& f = rep.slopes.at(q);
    ok = ok && f.fitted && f.slope >= 0.8 && f.residual <= 0.15;
    os << q << " " << strf("%.2f/%.3f ", f.slope, f.residual);
  }
  ok = ok && rep.h_monotone;
  os << (rep.h_monotone ? "entropy sup monotone in eps"
                        : "entropy sup NOT monotone");

  // Snapshot-level invariant audit over every series the sweep produced.
  for (const auto& series : rep.series) {
    for (std::size_t k = 0; k < series.size(); ++k) {
      const DiagnosticsRecord& r = series[k];
      ok = ok && std::abs(r.mass - 1.0) <= 1e-10;
      ok = ok && r.dissipation >= 0.0;
      ok = ok && r.H_f_rhoM >= -1e-10 && r.H_rho_rho >= -1e-10;
      ok = ok && ckp_check(r.H_f_rhoM, r.L1_f_rhoM);
      ok = ok && ckp_check(r.H_rho_rho, r.L1_rho_rho);
      if (k > 0) {
        const DiagnosticsRecord& p = series[k - 1];
        ok = ok && r.free_energy <=
                       p.free_energy + 5e-11 * (1.0 + std::abs(p.free_energy));
        ok = ok && r.weighted_l2 <= p.weighted_l2 + 5e-11 * (1.0 + p.weighted_l2);
      }
    }
  }
  const double secs = t.seconds();
  ok = ok && secs < 900.0;
  line(4, "limit convergence orders", ok, secs, os.str());
}

void criterion5_mobility() {
  Timer t;
  bool ok = true;
  std::string note;

  // Branch continuity at center distance 2a.
  {
    const double dlo = 2.0 * (1.0 - 2.5e-14), dhi = 2.0 * (1.0 + 2.5e-14);
    const Eigen::Matrix3d lo =
        rpy_pair_block(Eigen::Vector3d(dlo, 0.0, 0.0), 1.0, 1.0);
    const Eigen::Matrix3d hi =
        rpy_pair_block(Eigen::Vector3d(dhi, 0.0, 0.0), 1.0, 1.0);
    const double jump = (lo - hi).cwiseAbs().maxCoeff();
    if (jump > 1e-12) {
      ok = false;
      note = strf("branch jump %.2e", jump);
    }
  }

  // PSD over random packings, up to five spheres.
  double worst = 0.0;
  {
    rng::NormalStream g(2718, 0, 0);
    for (int trial = 0; trial < 1000; ++trial) {
      const int n = 2 + trial % 4;
      std::vector<Eigen::Vector3d> centers(n);
      for (auto& c : centers)
        c = Eigen::Vector3d(3.0 * g.normal(), 3.0 * g.normal(),
                            3.0 * g.normal());
      const double lam =
          min_eigenvalue(symmetrized(build_rpy({centers, 0.45, 1.0})));
      worst = std::min(worst, lam);
    }
    if (worst < -1e-10) {
      ok = false;
      note = strf("PSD violation %.2e", worst);
    }
  }

  // Two-sphere spectral scaling in the gap distance.
  std::vector<double> dist(9), lam_min(9), lam_max(9);
  for (int i = 0; i < 9; ++i) {
    dist[i] = 1e-3 * std::pow(100.0, i / 8.0);
    const SphereConfiguration cfg(
        {Eigen::Vector3d::Zero(), Eigen::Vector3d(dist[i], 0.0, 0.0)}, 1.0,
        1.0);
    const Eigen::MatrixXd mob = build_rpy(cfg);
    lam_min[i] = min_eigenvalue(symmetrized(mob));
    lam_max[i] = max_eigenvalue(symmetrized(friction_from_mobility(mob)));
  }
  const auto [s_min, r_min] = fit_order(dist, lam_min);
  const auto [s_max, r_max] = fit_order(dist, lam_max);
  if (!(s_min >= 0.8 && s_min <= 1.2)) {
    ok = false;
    note = strf("softest-mode slope %.2f", s_min);
  }
  if (!(s_max >= -1.2 && s_max <= -0.8)) {
    ok = false;
    note = strf("stiffest-friction slope %.2f", s_max);
  }

  const double secs = t.seconds();
  ok = ok && secs < 60.0;
  line(5, "mobility spectra", ok, secs,
       ok ? strf("branch continuous, min eig >= %.1e over 1000 packings, "
                 "slopes %.2f / %.2f",
                 worst, s_min, s_max)
          : note);
}

void criterion6_extrema(const Bench& b) {
  Timer t;
  bool ok = true;
  std::string note;

  auto audited = [&](const Axis& ax, const Potential& pot,
                     Eigen::ArrayXd rho, double T, double dt,
                     const char* tag) {
    SmoluchowskiScheme ss(ax, pot, b.mobility);
    Extrema ex = h0_extrema(rho, ss.gibbs_weights());
    const long n = std::lround(T / dt);
    for (long s = 0; s < n; ++s) {
      ss.step(rho, dt);
      const Extrema now = h0_extrema(rho, ss.gibbs_weights());
      if (now.hi > ex.hi + 1e-8 || now.lo < ex.lo - 1e-8) {
        ok = false;
        note = strf("%s extrema expanded at step %ld", tag, s);
        return;
      }
      ex = now;
    }
  };

  audited(b.x, b.pot, b.rho_gauss, 1.0, 2e-4, "confining");

  // Double-well data, first certified against the sandwich condition.
  const Axis ax(3.0, 96);
  const Potential dw = double_well_potential(1.0, 1.0);
  const auto gs = gibbs_state(dw, ax);
  Eigen::ArrayXd rho = gs.density;
  for (int i = 0; i < ax.cells; ++i)
    rho[i] *= 1.0 + 0.5 * std::sin(2.0 * kPi * ax.center(i) / 3.0);
  rho /= rho.sum() * ax.dx;
  auto hook = [&](const Eigen::ArrayXd& r0, double T) {
    SmoluchowskiScheme ss(ax, dw, b.mobility);
    return run_smoluchowski(ss, r0, T, 1e-3,
                            {0.0, 0.25 * T, 0.5 * T, 0.75 * T, T});
  };
  const auto initial_data = check_initial_data({ax, rho, 0.0}, dw, 0.5, hook);
  if (!initial_data.sandwich_pass) {
    ok = false;
    note = "double-well data failed the sandwich precondition";
  } else {
    audited(ax, dw, rho, 0.5, 2.5e-4, "double-well");
  }

  line(6, "weight-ratio maximum principle", ok, t.seconds(),
       ok ? "extrema non-expanding (1e-8) on confining and double-well runs"
          : note);
}

void criterion7_ensemble(const Bench& b) {
  Timer t;
  const double eps = 0.5;

  KineticGridScheme ks(b.x, b.v, b.pot, b.friction, eps);
  const Eigen::MatrixXd f0 = local_equilibrium(b.rho_gauss, b.maxw);
  const auto snaps = run_kinetic(ks, f0, 1.0, {1.0});
  const GridMoments gm = moments_grid(snaps.back().f, b.x, b.v);

  const Axis bins(6.0, 32);
  const Eigen::ArrayXd rho_ref = bin_average(gm.rho, b.x, bins);
  const Eigen::ArrayXd J_ref = bin_average(gm.J, b.x, bins);

  EnsembleState st = init_ensemble_gaussian(100000, 1, 2.0, 12345);
  const FrictionModel fr = isotropic_friction(1, 1.0);
  const double dt = 0.01;
  for (int s = 0; s < 100; ++s) sde_step(st, b.pot, fr, eps, dt, 1);
  const EnsembleMoments em = moments_ensemble(st, bins);

  int used = 0, rho_bad = 0, j_bad = 0;
  double worst_sigma = 0.0;
  for (int bn = 0; bn < bins.cells; ++bn) {
    if (em.masked[bn]) continue;
    ++used;
    const double zr = std::abs(em.rho[bn] - rho_ref[bn]) / em.rho_se[bn];
    const double zj = std::abs(em.J[bn] - J_ref[bn]) / em.J_se[bn];
    worst_sigma = std::max({worst_sigma, zr, zj});
    if (zr > 5.0) ++rho_bad;
    if (zj > 5.0) ++j_bad;
  }
  const double secs = t.seconds();
  const bool ok =
      used >= 20 && rho_bad == 0 && j_bad == 0 && secs < 300.0;
  line(7, "particle/grid agreement", ok, secs,
       strf("%d bins compared, worst deviation %.2f standard errors (cap 5)",
            used, worst_sigma));
}

void criterion8_determinism(const fs::path& root) {
  Timer t;
  RunConfig cfg;
  cfg.Nx = 64;
  cfg.Nv = 64;
  cfg.epsilons = {0.4, 0.2, 0.1};
  cfg.T = 0.25;
  cfg.snapshots = 9;
  cfg.dt_smol = 1e-3;
  cfg.seed = 2026;

  bool ok = true;
  std::string note;
  try {
    const SweepReport r1 = run_sweep(cfg, (root / "det1").string(), 1);
    const SweepReport r8 = run_sweep(cfg, (root / "det8").string(), 8);
    for (const char* leaf : {"eps=0.4", "eps=0.2", "eps=0.1"}) {
      const std::string a =
          slurp(fs::path(r1.out_dir) / leaf / "diagnostics.csv");
      const std::string bbytes =
          slurp(fs::path(r8.out_dir) / leaf / "diagnostics.csv");
      if (a.empty() || a != bbytes) {
        ok = false;
        note = strf("%s/diagnostics.csv differs between 1 and 8 threads",
                    leaf);
      }
    }
    if (slurp(fs::path(r1.out_dir) / "summary.csv") !=
        slurp(fs::path(r8.out_dir) / "summary.csv")) {
      ok = false;
      note = "summary.csv differs between 1 and 8 threads";
    }
  } catch (const Error& e) {
    ok = false;
    note = strf("sweep aborted: %s", e.what());
  }

  // Particle pusher: same seed, different thread counts, bitwise state.
  if (ok) {
    const Potential pot = harmonic_potential(1, 1.0);
    const FrictionModel fr = isotropic_friction(1, 1.0);
    EnsembleState s1 = init_ensemble_gaussian(20000, 1, 2.0, 99);
    EnsembleState s8 = init_ensemble_gaussian(20000, 1, 2.0, 99);
    for (int s = 0; s < 30; ++s) {
      sde_step(s1, pot, fr, 0.5, 0.01, 1);
      sde_step(s8, pot, fr, 0.5, 0.01, 8);
    }
    if (!(s1.x.array() == s8.x.array()).all() ||
        !(s1.v.array() == s8.v.array()).all()) {
      ok = false;
      note = "particle states diverge across thread counts";
    }
  }

  line(8, "run determinism", ok, t.seconds(),
       ok ? "sweep CSVs and particle states byte-identical at 1 and 8 threads"
          : note);
}

}  // namespace

int main() {
  const Bench bench;
  const fs::path root = fs::temp_directory_path() / "hydrolim_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);

  criterion1_equilibrium(bench);
  criterion2_invariants(bench);
  criterion3_variance(bench);
  criterion4_sweep(root);
  criterion5_mobility();
  criterion6_extrema(bench);
  criterion7_ensemble(bench);
  criterion8_determinism(root);

  std::printf("acceptance: %d/8 criteria passed\n", 8 - g_failures);
  return g_failures == 0 ? 0 : 1;
}
