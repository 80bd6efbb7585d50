#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "hydrolim/diagnostics.hpp"
#include "hydrolim/kinetic.hpp"
#include "hydrolim/potentials.hpp"
#include "hydrolim/rng.hpp"
#include "hydrolim/smoluchowski.hpp"

using namespace hydrolim;
using Catch::Approx;

namespace {

double unit_mobility(double) { return 1.0; }

Eigen::ArrayXd grid_gaussian(const Axis& axis, double center, double sigma_sq) {
  Eigen::ArrayXd rho(axis.cells);
  for (int i = 0; i < axis.cells; ++i) {
    const double d = axis.center(i) - center;
    rho[i] = std::exp(-0.5 * d * d / sigma_sq);
  }
  rho /= rho.sum() * axis.dx;
  return rho;
}

// Local state with the velocity profile displaced to mean u.
Eigen::MatrixXd shifted_state(const Eigen::ArrayXd& rho, const Axis& v,
                              double u) {
  Eigen::ArrayXd mv(v.cells);
  for (int j = 0; j < v.cells; ++j) {
    const double d = v.center(j) - u;
    mv[j] = std::exp(-0.5 * d * d);
  }
  mv /= mv.sum() * v.dx;
  return local_equilibrium(rho, mv);
}

}  // namespace

TEST_CASE("moments of local Gibbs and displaced data") {
  const Axis x(6.0, 128), v(6.0, 128);
  const Eigen::ArrayXd rho = grid_gaussian(x, 0.0, 2.0);
  const Eigen::MatrixXd f0 = local_equilibrium(rho, discrete_maxwellian(v));
  const GridMoments m0 = moments_grid(f0, x, v);
  REQUIRE((m0.rho - rho).abs().maxCoeff() < 1e-13);
  REQUIRE(m0.J.abs().maxCoeff() < 1e-14);
  REQUIRE((m0.P - rho).abs().maxCoeff() < 1e-6);
  REQUIRE(std::abs(m0.rho.sum() * x.dx - mass(f0, x, v)) < 1e-12);

  const double u = 0.5;
  const GridMoments ms = moments_grid(shifted_state(rho, v, u), x, v);
  REQUIRE((ms.J - u * rho).abs().maxCoeff() < 1e-5);
  REQUIRE((ms.P - (1.0 + u * u) * rho).abs().maxCoeff() < 1e-4);
  REQUIRE(velocity_second_moment(shifted_state(rho, v, u), x, v) ==
          Approx(1.0 + u * u).margin(1e-4));

  REQUIRE_THROWS_AS(moments_grid(f0, x, Axis(6.0, 64)), IncompatibleGrids);
}

TEST_CASE("pressure deviation vanishes on local Gibbs states") {
  const Axis x(6.0, 128), v(6.0, 128);
  const Eigen::ArrayXd maxw = discrete_maxwellian(v);
  const Eigen::ArrayXd rho = grid_gaussian(x, 0.5, 1.5);
  const PressureDeviation dev =
      pressure_deviation(local_equilibrium(rho, maxw), x, v, maxw);
  REQUIRE(dev.norm < 1e-12);
}

TEST_CASE("both pressure routes agree on displaced data") {
  const Axis x(6.0, 128), v(6.0, 128);
  const Eigen::ArrayXd maxw = discrete_maxwellian(v);
  const Eigen::MatrixXd f = shifted_state(grid_gaussian(x, 0.0, 2.0), v, 0.5);
  const PressureRoutes pr = pressure_two_routes(f, x, v, maxw);
  REQUIRE((pr.direct - pr.identity).abs().maxCoeff() < 1e-5);
  // The deviation itself is genuinely nonzero here (P = (1+u^2) rho).
  REQUIRE((pr.direct - moments_grid(f, x, v).rho).abs().maxCoeff() > 1e-2);
}

TEST_CASE("flux residual: equilibrium small, manufactured cancellation exact") {
  const Axis x(6.0, 128), v(6.0, 128);
  const Potential pot = harmonic_potential(1, 1.0);
  const GibbsState gibbs = gibbs_state(pot, x);
  const Eigen::ArrayXd maxw = discrete_maxwellian(v);
  const Eigen::MatrixXd feq = local_equilibrium(gibbs.density, maxw);
  REQUIRE(flux_residual(feq, x, v, 0.3, unit_mobility, pot).norm < 2e-4);

  // Add an odd-in-v component sized so J cancels the bracket identically.
  const Eigen::ArrayXd rho = grid_gaussian(x, 0.0, 2.0);
  const Eigen::ArrayXd drho = detail_diag::diff4(rho, x.dx);
  double m2 = 0.0;
  for (int j = 0; j < v.cells; ++j)
    m2 += v.center(j) * v.center(j) * maxw[j] * v.dx;
  const double eps = 0.3;
  Eigen::MatrixXd f = local_equilibrium(rho, maxw);
  for (int i = 0; i < x.cells; ++i) {
    const double xc = x.center(i);
    const double target = -eps * (drho[i] + pot.gradient1(xc) * rho[i]);
    for (int j = 0; j < v.cells; ++j)
      f(j, i) += (target / m2) * v.center(j) * maxw[j];
  }
  REQUIRE(flux_residual(f, x, v, eps, unit_mobility, pot).norm < 1e-12);
}

TEST_CASE("relative entropy closed form and random-pair properties") {
  const Axis x(6.0, 256);
  const Eigen::ArrayXd f = grid_gaussian(x, 0.0, 2.0);
  const Eigen::ArrayXd g = grid_gaussian(x, 0.0, 1.0);
  // KL(N(0,2) | N(0,1)) = (sigma^2 - 1 - log sigma^2)/2.
  REQUIRE(relative_entropy(f, g, x.dx) ==
          Approx(0.5 * (2.0 - 1.0 - std::log(2.0))).margin(5e-4));
  REQUIRE(relative_entropy(f, f, x.dx) == Approx(0.0).margin(1e-14));

  rng::NormalStream u(2718, 0, 0);
  const Axis xa(1.0, 64);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::ArrayXd a(xa.cells), b(xa.cells);
    for (int i = 0; i < xa.cells; ++i) {
      a[i] = 0.1 + u.uniform();
      b[i] = 0.1 + u.uniform();
    }
    a /= a.sum() * xa.dx;
    b /= b.sum() * xa.dx;
    const double h = relative_entropy(a, b, xa.dx);
    REQUIRE(h >= -1e-10);
    REQUIRE(ckp_check(h, l1_distance(a, b, xa.dx)));
  }
}

TEST_CASE("support sentinel and negative-cell policing") {
  const Axis x(1.0, 16);
  Eigen::ArrayXd f = Eigen::ArrayXd::Constant(16, 0.5);
  Eigen::ArrayXd g = f;
  g[7] = 0.0;
  REQUIRE(std::isinf(relative_entropy(f, g, x.dx)));
  REQUIRE(ckp_check(relative_entropy(f, g, x.dx), 12.0));

  Eigen::ArrayXd noisy = f;
  noisy[3] = -1e-16;  // rounding-level negative: clamped
  REQUIRE(std::isfinite(relative_entropy(noisy, f, x.dx)));
  noisy[3] = -1e-6;  // structural negative: refused
  REQUIRE_THROWS_AS(relative_entropy(noisy, f, x.dx), NegativeDensity);
}

TEST_CASE("free energy of the global equilibrium is minus log Z") {
  const Axis x(6.0, 128), v(6.0, 128);
  const Potential pot = harmonic_potential(1, 1.0);
  Eigen::ArrayXd ax(x.cells), bv(v.cells);
  for (int i = 0; i < x.cells; ++i)
    ax[i] = std::exp(-pot.value1(x.center(i)));
  for (int j = 0; j < v.cells; ++j)
    bv[j] = std::exp(-0.5 * v.center(j) * v.center(j));
  const double z = ax.sum() * x.dx * bv.sum() * v.dx;
  Eigen::MatrixXd feq(v.cells, x.cells);
  for (int i = 0; i < x.cells; ++i)
    for (int j = 0; j < v.cells; ++j) feq(j, i) = ax[i] * bv[j] / z;
  REQUIRE(free_energy(feq, x, v, pot) == Approx(-std::log(z)).margin(1e-12));
  // Any other mass-1 state scores higher.
  const Eigen::MatrixXd f =
      local_equilibrium(grid_gaussian(x, 1.0, 1.0), discrete_maxwellian(v));
  REQUIRE(free_energy(f, x, v, pot) > free_energy(feq, x, v, pot));
}

TEST_CASE("weighted norm scores the equilibrium and its multiples exactly") {
  const Axis x(6.0, 64), v(6.0, 64);
  KineticGridScheme scheme(x, v, harmonic_potential(1, 1.0), unit_mobility,
                           1.0);
  const Eigen::MatrixXd feq = scheme.equilibrium();
  const double vol = x.dx * v.dx;
  REQUIRE(weighted_l2(feq, feq, vol) == Approx(1.0).epsilon(1e-12));
  REQUIRE(weighted_l2(2.0 * feq, feq, vol) == Approx(4.0).epsilon(1e-12));
}

TEST_CASE("dissipation is zero exactly on local Gibbs, positive off it") {
  const Axis x(6.0, 128), v(6.0, 128);
  const Eigen::ArrayXd maxw = discrete_maxwellian(v);
  const Eigen::ArrayXd rho = grid_gaussian(x, 0.0, 2.0);
  const double d0 = dissipation_rate(local_equilibrium(rho, maxw), x, v, maxw,
                                     unit_mobility, 0.5);
  REQUIRE(d0 >= 0.0);
  REQUIRE(d0 < 1e-20);
  const double d1 =
      dissipation_rate(shifted_state(rho, v, 0.5), x, v, maxw, unit_mobility,
                       0.5);
  REQUIRE(d1 > 1e-3);
}

TEST_CASE("free-energy drop equals integrated dissipation within 2 percent") {
  const Axis x(6.0, 256), v(6.0, 256);
  const Potential pot = harmonic_potential(1, 1.0);
  KineticGridScheme scheme(x, v, pot, unit_mobility, 1.0);
  const Eigen::ArrayXd maxw = discrete_maxwellian(v);
  Eigen::MatrixXd f = local_equilibrium(grid_gaussian(x, 0.0, 2.0), maxw);
  const double e0 = free_energy(f, x, v, pot);
  const long n = std::lround(std::ceil(0.5 / scheme.dt()));
  double integral = 0.0;
  double d_prev = dissipation_rate(f, x, v, maxw, unit_mobility, 1.0);
  for (long s = 0; s < n; ++s) {
    scheme.step(f);
    const double d = dissipation_rate(f, x, v, maxw, unit_mobility, 1.0);
    integral += 0.5 * (d_prev + d) * scheme.dt();
    d_prev = d;
  }
  const double drop = e0 - free_energy(f, x, v, pot);
  REQUIRE(drop > 0.01);
  REQUIRE(std::abs(integral - drop) < 0.02 * drop);
}

TEST_CASE("remainder terms vanish when everything is stationary") {
  const Axis x(6.0, 64), v(6.0, 64);
  const Potential pot = harmonic_potential(1, 1.0);
  const GibbsState gibbs = gibbs_state(pot, x);
  const Eigen::ArrayXd maxw = discrete_maxwellian(v);
  const Eigen::MatrixXd feq = local_equilibrium(gibbs.density, maxw);
  std::vector<KineticSnapshot> kin = {{0.0, feq}, {0.5, feq}, {1.0, feq}};
  std::vector<DensitySnapshot> lim = {
      {0.0, gibbs.density}, {0.5, gibbs.density}, {1.0, gibbs.density}};
  const RemainderSeries r =
      remainder_terms(kin, lim, x, v, maxw, unit_mobility, pot, 0.5);
  REQUIRE(std::abs(r.r1_integral) < 1e-10);
  REQUIRE(std::abs(r.r2_integral) < 1e-10);
  REQUIRE_THROWS_AS(
      remainder_terms({{0.0, feq}, {0.5, feq}}, {{0.0, gibbs.density}},
                      x, v, maxw, unit_mobility, pot, 0.5),
      ConfigInvalid);
}

TEST_CASE("second remainder obeys its Cauchy-Schwarz budget") {
  const Axis x(6.0, 64), v(6.0, 64);
  const Potential pot = harmonic_potential(1, 1.0);
  const double eps = 0.4, T = 0.5;
  KineticGridScheme scheme(x, v, pot, unit_mobility, eps);
  const Eigen::ArrayXd maxw = discrete_maxwellian(v);
  const Eigen::ArrayXd rho0 = grid_gaussian(x, 0.0, 2.0);
  std::vector<double> times;
  for (int q = 0; q <= 8; ++q) times.push_back(T * q / 8.0);
  const auto kin =
      run_kinetic(scheme, local_equilibrium(rho0, maxw), T, times);
  SmoluchowskiScheme smol(x, pot, unit_mobility);
  const auto lim = run_smoluchowski(smol, rho0, T, 2e-4, times);
  REQUIRE(kin.size() == times.size());
  REQUIRE(lim.size() == times.size());

  const RemainderSeries r =
      remainder_terms(kin, lim, x, v, maxw, unit_mobility, pot, eps);
  // |r2(t)| <= eps * D_sup * sqrt(dissipation) * sqrt(second moment) for
  // unit mobility; allow factor 2 for the discrete derivatives.
  std::vector<double> budget(times.size());
  for (std::size_t k = 0; k < kin.size(); ++k) {
    const Eigen::ArrayXd dlog =
        detail_smol::center_diff(lim[k].rho.log(), x.dx);
    Eigen::ArrayXd e(x.cells);
    for (int i = 0; i < x.cells; ++i)
      e[i] = dlog[i] + pot.gradient1(x.center(i));
    const double d_sup =
        detail_smol::center_diff(e, x.dx).abs().maxCoeff();
    const double diss =
        dissipation_rate(kin[k].f, x, v, maxw, unit_mobility, eps);
    const double p2 = velocity_second_moment(kin[k].f, x, v);
    budget[k] = eps * d_sup * std::sqrt(diss) * std::sqrt(p2);
    REQUIRE(std::abs(r.r2[k]) <= 2.0 * budget[k] + 1e-12);
  }
  REQUIRE(std::abs(r.r2_integral) <=
          2.0 * detail_diag::trapezoid(r.t, budget) + 1e-12);
}

TEST_CASE("ensemble moments: bin estimates, errors, masking") {
  const int M = 50000;
  EnsembleState st = init_ensemble_gaussian(M, 1, 2.0, 4242);
  const Axis bins(6.0, 32);
  const EnsembleMoments em = moments_ensemble(st, bins);
  int checked = 0;
  for (int b = 0; b < bins.cells; ++b) {
    if (em.masked[b]) {
      REQUIRE(std::isnan(em.rho[b]));
      continue;
    }
    // Binned truth for the sampling density N(0,2); cell-averaged.
    const double z1 = bins.interface(b) / std::sqrt(2.0);
    const double z2 = bins.interface(b + 1) / std::sqrt(2.0);
    const double p =
        0.5 * (std::erf(z2 / std::sqrt(2.0)) - std::erf(z1 / std::sqrt(2.0)));
    REQUIRE(std::abs(em.rho[b] - p / bins.dx) <= 5.0 * em.rho_se[b]);
    REQUIRE(std::abs(em.J[b]) <= 5.0 * em.J_se[b]);
    ++checked;
  }
  REQUIRE(checked >= 20);
  REQUIRE(em.count.sum() <= M);

  const EnsembleMoments all_masked = moments_ensemble(st, bins, M + 1);
  for (int b = 0; b < bins.cells; ++b) REQUIRE(all_masked.masked[b]);

  EnsembleState flat = init_ensemble_gaussian(100, 2, 1.0, 1);
  REQUIRE_THROWS_AS(moments_ensemble(flat, bins), GridOnly);
}

TEST_CASE("bin averaging requires aligned interfaces") {
  const Axis fine(6.0, 128), coarse(6.0, 32);
  Eigen::ArrayXd field(fine.cells);
  for (int i = 0; i < fine.cells; ++i) field[i] = fine.center(i);
  const Eigen::ArrayXd avg = bin_average(field, fine, coarse);
  for (int b = 0; b < coarse.cells; ++b)
    REQUIRE(avg[b] == Approx(coarse.center(b)).margin(1e-12));
  REQUIRE_THROWS_AS(bin_average(field, fine, Axis(6.0, 48)), IncompatibleGrids);
  REQUIRE_THROWS_AS(bin_average(field, fine, Axis(5.0, 32)), IncompatibleGrids);
}

TEST_CASE("ensemble entropy estimate is small at equilibrium and flagged") {
  EnsembleState st = init_ensemble_gaussian(50000, 1, 1.0, 5150);
  const EntropyEstimate h = entropy_estimate_ensemble(st);
  REQUIRE(h.is_estimate);
  REQUIRE(std::abs(h.value) < 0.05);
  EnsembleState wide = init_ensemble_gaussian(200, 2, 1.0, 1);
  REQUIRE_THROWS_AS(entropy_estimate_ensemble(wide), GridOnly);
  EnsembleState tiny = init_ensemble_gaussian(50, 1, 1.0, 1);
  REQUIRE_THROWS_AS(entropy_estimate_ensemble(tiny), ConfigInvalid);
}

TEST_CASE("derivative stencil accuracy and guards") {
  const Axis x(2.0, 64);
  Eigen::ArrayXd u(x.cells);
  for (int i = 0; i < x.cells; ++i) {
    const double xc = x.center(i);
    u[i] = xc * xc * xc;
  }
  const Eigen::ArrayXd d = detail_diag::diff4(u, x.dx);
  for (int i = 2; i + 2 < x.cells; ++i) {
    const double xc = x.center(i);
    REQUIRE(d[i] == Approx(3.0 * xc * xc).margin(1e-10));
  }
  REQUIRE_THROWS_AS(detail_diag::diff4(Eigen::ArrayXd::Zero(4), 0.1),
                    ConfigInvalid);
}
