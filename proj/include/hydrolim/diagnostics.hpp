#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "hydrolim/errors.hpp"
#include "hydrolim/grid.hpp"
#include "hydrolim/kinetic.hpp"
#include "hydrolim/potentials.hpp"
#include "hydrolim/smoluchowski.hpp"

namespace hydrolim {

namespace detail_diag {

// Negative cells below this (relative) size are treated as rounding noise.
inline constexpr double kNegativeTol = 1e-12;

inline double clamped(double value, double scale) {
  if (value >= 0.0) return value;
  if (value < -kNegativeTol * scale)
    throw NegativeDensity("density has a structurally negative cell");
  return 0.0;
}

// Fourth-order central first derivative, second-order one-sided at the ends.
inline Eigen::ArrayXd diff4(const Eigen::ArrayXd& u, double h) {
  const int n = static_cast<int>(u.size());
  Eigen::ArrayXd d(n);
  if (n < 5) throw ConfigInvalid("derivative stencil needs >= 5 cells");
  for (int i = 2; i + 2 < n; ++i)
    d[i] = (u[i - 2] - 8.0 * u[i - 1] + 8.0 * u[i + 1] - u[i + 2]) / (12.0 * h);
  d[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h);
  d[1] = (u[2] - u[0]) / (2.0 * h);
  d[n - 2] = (u[n - 1] - u[n - 3]) / (2.0 * h);
  d[n - 1] = (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * h);
  return d;
}

}  // namespace detail_diag

// ---------------------------------------------------------------------------
// Grid-side functionals. f(j, i) as in PhaseGridState; all quadrature is the
// cell-average midpoint rule matching the solver.

struct GridMoments {
  Eigen::ArrayXd rho;  // integral of f dv
  Eigen::ArrayXd J;    // integral of v f dv
  Eigen::ArrayXd P;    // integral of v^2 f dv
};

inline GridMoments moments_grid(const Eigen::MatrixXd& f, const Axis& x,
                                const Axis& v) {
  if (f.rows() != v.cells || f.cols() != x.cells)
    throw IncompatibleGrids("state shape does not match axes");
  GridMoments m;
  m.rho.resize(x.cells);
  m.J.resize(x.cells);
  m.P.resize(x.cells);
  for (int i = 0; i < x.cells; ++i) {
    double r = 0.0, j1 = 0.0, p2 = 0.0;
    for (int j = 0; j < v.cells; ++j) {
      const double vc = v.center(j);
      const double fv = f(j, i);
      r += fv;
      j1 += vc * fv;
      p2 += vc * vc * fv;
    }
    m.rho[i] = r * v.dx;
    m.J[i] = j1 * v.dx;
    m.P[i] = p2 * v.dx;
  }
  return m;
}

inline double mass(const Eigen::MatrixXd& f, const Axis& x, const Axis& v) {
  return f.sum() * x.dx * v.dx;
}

inline double velocity_second_moment(const Eigen::MatrixXd& f, const Axis& x,
                                     const Axis& v) {
  double s = 0.0;
  for (int j = 0; j < v.cells; ++j) {
    const double v2 = v.center(j) * v.center(j);
    s += v2 * f.row(j).sum();
  }
  return s * x.dx * v.dx;
}

// Pressure deviation P - rho computed through the integral identity
//   P - rho = integral of M v d/dv(f/M) dv,
// so it vanishes identically whenever f/M is v-independent.
struct PressureDeviation {
  Eigen::ArrayXd field;  // per space cell
  double norm = 0.0;     // spatial L1
};

inline PressureDeviation pressure_deviation(const Eigen::MatrixXd& f,
                                            const Axis& x, const Axis& v,
                                            const Eigen::ArrayXd& maxw) {
  if (f.rows() != v.cells || f.cols() != x.cells || maxw.size() != v.cells)
    throw IncompatibleGrids("state shape does not match axes");
  PressureDeviation out;
  out.field.resize(x.cells);
  Eigen::ArrayXd g(v.cells);
  for (int i = 0; i < x.cells; ++i) {
    for (int j = 0; j < v.cells; ++j) g[j] = f(j, i) / maxw[j];
    const Eigen::ArrayXd dg = detail_diag::diff4(g, v.dx);
    double acc = 0.0;
    for (int j = 0; j < v.cells; ++j) acc += maxw[j] * v.center(j) * dg[j];
    out.field[i] = acc * v.dx;
  }
  out.norm = out.field.abs().sum() * x.dx;
  return out;
}

// Both quadrature routes to the second moment; their gap is the discretization
// error of the integral identity above.
struct PressureRoutes {
  Eigen::ArrayXd direct;    // integral of v^2 f dv
  Eigen::ArrayXd identity;  // rho + deviation
};

inline PressureRoutes pressure_two_routes(const Eigen::MatrixXd& f,
                                          const Axis& x, const Axis& v,
                                          const Eigen::ArrayXd& maxw) {
  const GridMoments m = moments_grid(f, x, v);
  const PressureDeviation dev = pressure_deviation(f, x, v, maxw);
  return {m.P, m.rho + dev.field};
}

// L1-in-x norm of J/eps + mu (d_x rho + V' rho): the bracket the flux
// expansion says is the leading term of -J/eps.
struct FluxResidual {
  Eigen::ArrayXd field;
  double norm = 0.0;
};

inline FluxResidual flux_residual(const Eigen::MatrixXd& f, const Axis& x,
                                  const Axis& v, double eps,
                                  const std::function<double(double)>& mobility,
                                  const Potential& potential) {
  const GridMoments m = moments_grid(f, x, v);
  const Eigen::ArrayXd drho = detail_diag::diff4(m.rho, x.dx);
  FluxResidual out;
  out.field.resize(x.cells);
  for (int i = 0; i < x.cells; ++i) {
    const double xc = x.center(i);
    out.field[i] = m.J[i] / eps +
                   mobility(xc) * (drho[i] + potential.gradient1(xc) * m.rho[i]);
  }
  out.norm = out.field.abs().sum() * x.dx;
  return out;
}

// ---------------------------------------------------------------------------
// Entropy family. All take plain arrays plus the cell volume so the same code
// serves phase-space matrices and spatial densities.

inline double relative_entropy_cells(const double* f, const double* g,
                                     std::ptrdiff_t n, double cell_volume) {
  double fmax = 0.0;
  for (std::ptrdiff_t i = 0; i < n; ++i) fmax = std::max(fmax, std::abs(f[i]));
  double h = 0.0;
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const double fi = detail_diag::clamped(f[i], fmax);
    if (fi == 0.0) continue;
    if (!(g[i] > 0.0)) return std::numeric_limits<double>::infinity();
    h += fi * std::log(fi / g[i]);
  }
  return h * cell_volume;
}

inline double relative_entropy(const Eigen::MatrixXd& f,
                               const Eigen::MatrixXd& g, double cell_volume) {
  if (f.rows() != g.rows() || f.cols() != g.cols())
    throw IncompatibleGrids("entropy arguments differ in shape");
  return relative_entropy_cells(f.data(), g.data(), f.size(), cell_volume);
}

inline double relative_entropy(const Eigen::ArrayXd& f, const Eigen::ArrayXd& g,
                               double cell_volume) {
  if (f.size() != g.size())
    throw IncompatibleGrids("entropy arguments differ in shape");
  return relative_entropy_cells(f.data(), g.data(), f.size(), cell_volume);
}

inline double l1_distance_cells(const double* f, const double* g,
                                std::ptrdiff_t n, double cell_volume) {
  double s = 0.0;
  for (std::ptrdiff_t i = 0; i < n; ++i) s += std::abs(f[i] - g[i]);
  return s * cell_volume;
}

inline double l1_distance(const Eigen::MatrixXd& f, const Eigen::MatrixXd& g,
                          double cell_volume) {
  if (f.rows() != g.rows() || f.cols() != g.cols())
    throw IncompatibleGrids("distance arguments differ in shape");
  return l1_distance_cells(f.data(), g.data(), f.size(), cell_volume);
}

inline double l1_distance(const Eigen::ArrayXd& f, const Eigen::ArrayXd& g,
                          double cell_volume) {
  if (f.size() != g.size())
    throw IncompatibleGrids("distance arguments differ in shape");
  return l1_distance_cells(f.data(), g.data(), f.size(), cell_volume);
}

// Csiszar-Kullback-Pinsker: L1 <= sqrt(2 H) for equal-mass pairs.
inline bool ckp_check(double h_value, double l1_value) {
  if (std::isinf(h_value)) return true;
  return l1_value <= std::sqrt(2.0 * std::max(0.0, h_value)) + 1e-8;
}

inline double free_energy(const Eigen::MatrixXd& f, const Axis& x,
                          const Axis& v, const Potential& potential) {
  if (f.rows() != v.cells || f.cols() != x.cells)
    throw IncompatibleGrids("state shape does not match axes");
  const double fmax = f.cwiseAbs().maxCoeff();
  double e = 0.0;
  for (int i = 0; i < x.cells; ++i) {
    const double vx = potential.value1(x.center(i));
    for (int j = 0; j < v.cells; ++j) {
      const double fi = detail_diag::clamped(f(j, i), fmax);
      if (fi == 0.0) continue;
      const double vc = v.center(j);
      e += fi * (std::log(fi) + 0.5 * vc * vc + vx);
    }
  }
  return e * x.dx * v.dx;
}

// Squared equilibrium-weighted L2 norm: integral of (f/f_eq)^2 f_eq.
// The equilibrium itself scores 1.
inline double weighted_l2(const Eigen::MatrixXd& f, const Eigen::MatrixXd& feq,
                          double cell_volume) {
  if (f.rows() != feq.rows() || f.cols() != feq.cols())
    throw IncompatibleGrids("state shape does not match equilibrium");
  double s = 0.0;
  for (std::ptrdiff_t i = 0; i < f.size(); ++i) {
    const double w = feq.data()[i];
    if (!(w > 0.0)) throw DegenerateDensity("equilibrium weight vanished");
    const double fi = f.data()[i];
    s += fi * fi / w;
  }
  return s * cell_volume;
}

// (1/eps^2) integral of |d|^2 with d = G^{1/2}(v sqrt f + 2 d/dv sqrt f).
// Uses the identity d = 2 G^{1/2} sqrt M d/dv sqrt(f/M): exactly zero for any
// local Gibbs state f = rho(x) M(v).
inline double dissipation_rate(const Eigen::MatrixXd& f, const Axis& x,
                               const Axis& v, const Eigen::ArrayXd& maxw,
                               const std::function<double(double)>& friction,
                               double eps) {
  if (f.rows() != v.cells || f.cols() != x.cells || maxw.size() != v.cells)
    throw IncompatibleGrids("state shape does not match axes");
  const double fmax = f.cwiseAbs().maxCoeff();
  Eigen::ArrayXd s(v.cells);
  double total = 0.0;
  for (int i = 0; i < x.cells; ++i) {
    for (int j = 0; j < v.cells; ++j)
      s[j] = std::sqrt(detail_diag::clamped(f(j, i), fmax) / maxw[j]);
    const Eigen::ArrayXd ds = detail_diag::diff4(s, v.dx);
    double acc = 0.0;
    for (int j = 0; j < v.cells; ++j) acc += maxw[j] * ds[j] * ds[j];
    total += friction(x.center(i)) * 4.0 * acc;
  }
  return total * x.dx * v.dx / (eps * eps);
}

// ---------------------------------------------------------------------------
// Remainder terms of the entropy evolution: r1 pairs the flux acceleration
// with E, r2 pairs the pressure deviation with D, both fields taken from the
// limit density.

struct RemainderSeries {
  std::vector<double> t;
  std::vector<double> r1;
  std::vector<double> r2;
  double r1_integral = 0.0;
  double r2_integral = 0.0;
};

namespace detail_diag {

inline double trapezoid(const std::vector<double>& t,
                        const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t k = 0; k + 1 < t.size(); ++k)
    s += 0.5 * (y[k] + y[k + 1]) * (t[k + 1] - t[k]);
  return s;
}

}  // namespace detail_diag

inline RemainderSeries remainder_terms(
    const std::vector<KineticSnapshot>& kinetic,
    const std::vector<DensitySnapshot>& limit, const Axis& x, const Axis& v,
    const Eigen::ArrayXd& maxw, const std::function<double(double)>& mobility,
    const Potential& potential, double eps) {
  const std::size_t n = kinetic.size();
  if (n < 3) throw ConfigInvalid("remainder terms need >= 3 snapshots");
  if (limit.size() != n)
    throw IncompatibleGrids("kinetic/limit snapshot counts differ");

  std::vector<Eigen::ArrayXd> J(n);
  RemainderSeries out;
  out.t.resize(n);
  out.r1.resize(n);
  out.r2.resize(n);

  std::vector<Eigen::ArrayXd> E(n), D(n);
  for (std::size_t k = 0; k < n; ++k) {
    out.t[k] = kinetic[k].t;
    J[k] = moments_grid(kinetic[k].f, x, v).J;
    const Eigen::ArrayXd& rho = limit[k].rho;
    if ((rho < kDensityFloor).any())
      throw DegenerateDensity("limit density below evaluation floor");
    const Eigen::ArrayXd dlog = detail_smol::center_diff(rho.log(), x.dx);
    Eigen::ArrayXd e(x.cells);
    for (int i = 0; i < x.cells; ++i)
      e[i] = mobility(x.center(i)) *
             (dlog[i] + potential.gradient1(x.center(i)));
    E[k] = e;
    D[k] = detail_smol::center_diff(e, x.dx);
  }

  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t ka = (k == 0) ? 0 : k - 1;
    const std::size_t kb = (k + 1 == n) ? n - 1 : k + 1;
    const double dtk = out.t[kb] - out.t[ka];
    if (!(dtk > 0.0)) throw ConfigInvalid("snapshot times must increase");
    const Eigen::ArrayXd dJ = (J[kb] - J[ka]) / dtk;
    out.r1[k] = -eps * (dJ * E[k]).sum() * x.dx;
    const PressureDeviation dev = pressure_deviation(kinetic[k].f, x, v, maxw);
    out.r2[k] = (dev.field * D[k]).sum() * x.dx;
  }
  out.r1_integral = detail_diag::trapezoid(out.t, out.r1);
  out.r2_integral = detail_diag::trapezoid(out.t, out.r2);
  return out;
}

// ---------------------------------------------------------------------------
// Ensemble-side estimators.

struct EnsembleMoments {
  Eigen::ArrayXd rho, J, P;        // masked bins carry NaN
  Eigen::ArrayXd rho_se, J_se;     // per-bin Monte Carlo standard errors
  Eigen::ArrayXi count;
  Eigen::Array<bool, Eigen::Dynamic, 1> masked;
};

inline EnsembleMoments moments_ensemble(const EnsembleState& st,
                                        const Axis& bins, int min_count = 20) {
  if (st.x.rows() != 1) throw GridOnly("binned moments are one dimensional");
  const int M = static_cast<int>(st.x.cols());
  const int nb = bins.cells;
  EnsembleMoments out;
  out.rho = Eigen::ArrayXd::Zero(nb);
  out.J = Eigen::ArrayXd::Zero(nb);
  out.P = Eigen::ArrayXd::Zero(nb);
  out.rho_se.resize(nb);
  out.J_se.resize(nb);
  out.count = Eigen::ArrayXi::Zero(nb);
  out.masked.resize(nb);

  Eigen::ArrayXd sum_v = Eigen::ArrayXd::Zero(nb),
                 sum_v2 = Eigen::ArrayXd::Zero(nb);
  for (int p = 0; p < M; ++p) {
    const double xp = st.x(0, p);
    const int b = static_cast<int>(std::floor((xp + bins.extent) / bins.dx));
    if (b < 0 || b >= nb) continue;  // walkers outside the box are dropped
    out.count[b] += 1;
    const double vp = st.v(0, p);
    sum_v[b] += vp;
    sum_v2[b] += vp * vp;
  }
  const double norm = 1.0 / (static_cast<double>(M) * bins.dx);
  for (int b = 0; b < nb; ++b) {
    out.masked[b] = out.count[b] < min_count;
    if (out.masked[b]) {
      out.rho[b] = out.J[b] = out.P[b] = out.rho_se[b] = out.J_se[b] =
          std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    const double nbins = static_cast<double>(out.count[b]);
    out.rho[b] = nbins * norm;
    out.J[b] = sum_v[b] * norm;
    out.P[b] = sum_v2[b] * norm;
    const double p_hat = nbins / static_cast<double>(M);
    out.rho_se[b] =
        std::sqrt(p_hat * (1.0 - p_hat) / static_cast<double>(M)) / bins.dx;
    // Var of the per-particle summand v 1_bin over the whole sample.
    const double m1 = sum_v[b] / static_cast<double>(M);
    const double m2 = sum_v2[b] / static_cast<double>(M);
    out.J_se[b] = std::sqrt(std::max(0.0, m2 - m1 * m1) /
                            static_cast<double>(M)) /
                  bins.dx;
  }
  return out;
}

// Bin-average a grid field onto a coarser axis with aligned interfaces.
inline Eigen::ArrayXd bin_average(const Eigen::ArrayXd& field, const Axis& fine,
                                  const Axis& coarse) {
  if (fine.cells % coarse.cells != 0 ||
      std::abs(fine.extent - coarse.extent) > 1e-12)
    throw IncompatibleGrids("bin interfaces must align with grid interfaces");
  const int ratio = fine.cells / coarse.cells;
  Eigen::ArrayXd out(coarse.cells);
  for (int b = 0; b < coarse.cells; ++b)
    out[b] = field.segment(b * ratio, ratio).mean();
  return out;
}

// Histogram KL estimate for ensembles: H(f | rho x M). Bandwidth per Scott,
// scaled for two dimensions. Biased for finite M; callers must surface the
// estimate flag.
struct EntropyEstimate {
  double value = 0.0;
  bool is_estimate = true;
};

inline EntropyEstimate entropy_estimate_ensemble(const EnsembleState& st) {
  if (st.x.rows() != 1) throw GridOnly("estimate implemented in 1D");
  const int M = static_cast<int>(st.x.cols());
  if (M < 100) throw ConfigInvalid("estimate needs a reasonable sample");
  const auto sd = [&](const Eigen::MatrixXd& m) {
    const double mean = m.row(0).mean();
    return std::sqrt((m.row(0).array() - mean).square().mean());
  };
  const double hx = 3.5 * sd(st.x) * std::pow(M, -0.25);
  const double hv = 3.5 * sd(st.v) * std::pow(M, -0.25);
  const double x0 = st.x.row(0).minCoeff(), x1 = st.x.row(0).maxCoeff();
  const double v0 = st.v.row(0).minCoeff(), v1 = st.v.row(0).maxCoeff();
  const int nx = std::max(4, static_cast<int>(std::ceil((x1 - x0) / hx)));
  const int nv = std::max(4, static_cast<int>(std::ceil((v1 - v0) / hv)));
  const double dx = (x1 - x0) / nx * (1.0 + 1e-12), dv = (v1 - v0) / nv * (1.0 + 1e-12);

  Eigen::MatrixXd hist = Eigen::MatrixXd::Zero(nv, nx);
  Eigen::ArrayXd margin = Eigen::ArrayXd::Zero(nx);
  for (int p = 0; p < M; ++p) {
    const int bx = std::min(nx - 1, static_cast<int>((st.x(0, p) - x0) / dx));
    const int bv = std::min(nv - 1, static_cast<int>((st.v(0, p) - v0) / dv));
    hist(bv, bx) += 1.0;
    margin[bx] += 1.0;
  }
  double h = 0.0;
  for (int bx = 0; bx < nx; ++bx) {
    if (margin[bx] == 0.0) continue;
    const double rho_bx = margin[bx] / (M * dx);
    for (int bv = 0; bv < nv; ++bv) {
      const double c = hist(bv, bx);
      if (c == 0.0) continue;
      const double fd = c / (M * dx * dv);
      const double vc = v0 + (bv + 0.5) * dv;
      h += fd * std::log(fd / (rho_bx * maxwellian1(vc))) * dx * dv;
    }
  }
  return {h, true};
}

// ---------------------------------------------------------------------------
// One row of the sweep output. Scalars only; field data stays in snapshots.

struct DiagnosticsRecord {
  double t = 0.0;
  double epsilon = 0.0;
  double mass = 0.0;
  double free_energy = 0.0;
  double dissipation = 0.0;
  double weighted_l2 = 0.0;
  double H_f_rhoM = 0.0;   // f against its own density times the Maxwellian
  double H_rho_rho = 0.0;  // kinetic density against the limit density
  double L1_f_rhoM = 0.0;
  double L1_rho_rho = 0.0;
  double flux_residual = 0.0;
  double pressure_dev = 0.0;
  double r1 = std::numeric_limits<double>::quiet_NaN();
  double r2 = std::numeric_limits<double>::quiet_NaN();
};

}  // namespace hydrolim
