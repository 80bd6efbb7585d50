#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <vector>

#include "hydrolim/errors.hpp"
#include "hydrolim/grid.hpp"
#include "hydrolim/kinetic.hpp"
#include "hydrolim/potentials.hpp"

namespace hydrolim {

struct DensityState {
  Axis axis;
  Eigen::ArrayXd rho;
  double time = 0.0;
};

inline constexpr double kDensityFloor = 1e-14;

// Implicit solver for the limiting drift-diffusion equation
//   d rho/dt = d/dx ( mu(x) (d rho/dx + V'(x) rho) ),    mu = 1/G,
// zero-flux walls. Fluxes use exponential fitting on the cell-center values
// of V, so rho proportional to e^{-V(x_i)} is stationary to rounding and the
// update matrix is an M-matrix: positivity, mass, and the comparison
// principle for rho / e^{-V} hold step by step.
class SmoluchowskiScheme {
 public:
  SmoluchowskiScheme(const Axis& axis, const Potential& potential,
                     std::function<double(double)> mobility)
      : axis_(axis) {
    if (potential.dim != 1)
      throw ConfigInvalid("limit solver is one dimensional");
    const int n = axis_.cells;
    aw_.resize(n);
    for (int i = 0; i < n; ++i)
      aw_[i] = std::exp(-potential.value1(axis_.center(i)));
    if (!aw_.allFinite() || (aw_ <= 0.0).any())
      throw NotIntegrable("Gibbs weight not representable on this grid");
    mu_.resize(n - 1);
    bp_.resize(n - 1);
    bm_.resize(n - 1);
    for (int k = 0; k + 1 < n; ++k) {
      mu_[k] = mobility(axis_.interface(k + 1));
      if (!(mu_[k] > 0.0))
        throw NonPositiveGamma("mobility must be positive on the grid");
      const double dv = potential.value1(axis_.center(k + 1)) -
                        potential.value1(axis_.center(k));
      bp_[k] = detail_kin::bernoulli_weight(dv);
      bm_[k] = detail_kin::bernoulli_weight(-dv);
    }
    tri_a_.resize(n);
    tri_b_.resize(n);
    tri_c_.resize(n);
    tri_r_.resize(n);
  }

  const Axis& axis() const { return axis_; }
  const Eigen::ArrayXd& gibbs_weights() const { return aw_; }

  Eigen::ArrayXd equilibrium() const {
    return aw_ / (aw_.sum() * axis_.dx);
  }

  // One implicit Euler step. dt is unrestricted (the solve is an M-matrix).
  void step(Eigen::ArrayXd& rho, double dt) {
    const int n = axis_.cells;
    if (rho.size() != n) throw IncompatibleGrids("state/axis mismatch");
    const double r = dt / (axis_.dx * axis_.dx);
    for (int i = 0; i < n; ++i) {
      double diag = 1.0;
      if (i + 1 < n) diag += r * mu_[i] * bp_[i];
      if (i >= 1) diag += r * mu_[i - 1] * bm_[i - 1];
      tri_b_[i] = diag;
      tri_a_[i] = (i >= 1) ? -r * mu_[i - 1] * bp_[i - 1] : 0.0;
      tri_c_[i] = (i + 1 < n) ? -r * mu_[i] * bm_[i] : 0.0;
      tri_r_[i] = rho[i];
    }
    for (int i = 1; i < n; ++i) {
      const double w = tri_a_[i] / tri_b_[i - 1];
      tri_b_[i] -= w * tri_c_[i - 1];
      tri_r_[i] -= w * tri_r_[i - 1];
    }
    rho[n - 1] = tri_r_[n - 1] / tri_b_[n - 1];
    for (int i = n - 2; i >= 0; --i)
      rho[i] = (tri_r_[i] - tri_c_[i] * rho[i + 1]) / tri_b_[i];
    if (!rho.allFinite()) throw NonFiniteState("limit state lost finiteness");
  }

 private:
  Axis axis_;
  Eigen::ArrayXd aw_, mu_, bp_, bm_;
  Eigen::ArrayXd tri_a_, tri_b_, tri_c_, tri_r_;
};

struct DensitySnapshot {
  double t = 0.0;
  Eigen::ArrayXd rho;
};

inline std::vector<DensitySnapshot> run_smoluchowski(
    SmoluchowskiScheme& scheme, const Eigen::ArrayXd& rho0, double T,
    double dt, const std::vector<double>& snapshot_times,
    const std::function<void(const Eigen::ArrayXd&, double, long)>& per_step =
        {}) {
  if (!(T > 0.0) || !(dt > 0.0)) throw ConfigInvalid("need T, dt > 0");
  const long n_steps = std::max<long>(1, std::lround(std::ceil(T / dt)));
  const double dtu = T / static_cast<double>(n_steps);
  std::vector<long> snap_steps;
  for (double t : snapshot_times)
    snap_steps.push_back(std::clamp<long>(std::lround(t / dtu), 0, n_steps));
  Eigen::ArrayXd rho = rho0;
  std::vector<DensitySnapshot> out;
  auto emit = [&](long s) {
    for (std::size_t q = 0; q < snap_steps.size(); ++q)
      if (snap_steps[q] == s) out.push_back({s * dtu, rho});
  };
  emit(0);
  for (long s = 1; s <= n_steps; ++s) {
    scheme.step(rho, dtu);
    if (per_step) per_step(rho, s * dtu, s);
    emit(s);
  }
  return out;
}

// Ornstein-Uhlenbeck variance for V = k x^2 / 2 with scalar mobility g:
// sigma^2(t) = 1/k + (sigma0^2 - 1/k) e^{-2 g k t}.
inline double analytic_ou_variance(double sigma0sq, double k, double g,
                                   double t) {
  return 1.0 / k + (sigma0sq - 1.0 / k) * std::exp(-2.0 * g * k * t);
}

// Extrema of h0 = rho / e^{-V}; non-expanding in time for the M-matrix step.
struct Extrema {
  double lo = 0.0;
  double hi = 0.0;
};

inline Extrema h0_extrema(const Eigen::ArrayXd& rho,
                          const Eigen::ArrayXd& gibbs_weights) {
  if (rho.size() != gibbs_weights.size())
    throw IncompatibleGrids("state/weight mismatch");
  const Eigen::ArrayXd h = rho / gibbs_weights;
  return {h.minCoeff(), h.maxCoeff()};
}

// Fields entering the remainder estimates:
//   E = mu (d_x log rho + V'),  D = d_x E,  F = mu d_x (d_t log rho),
// with d_t log rho from the pair of states across one solver step.
// Centered differences; one-sided at the walls. Throws if rho dips below the
// evaluation floor (log would be meaningless there).
struct StabilityFields {
  Eigen::ArrayXd E, D, F;
  double E_sup = 0.0, D_sup = 0.0, F_sup = 0.0;
};

namespace detail_smol {

inline Eigen::ArrayXd center_diff(const Eigen::ArrayXd& u, double dx) {
  const int n = static_cast<int>(u.size());
  Eigen::ArrayXd d(n);
  for (int i = 1; i + 1 < n; ++i) d[i] = (u[i + 1] - u[i - 1]) / (2.0 * dx);
  d[0] = (u[1] - u[0]) / dx;
  d[n - 1] = (u[n - 1] - u[n - 2]) / dx;
  return d;
}

}  // namespace detail_smol

inline StabilityFields stability_fields(const DensityState& now,
                                        const DensityState& next,
                                        const Potential& potential,
                                        std::function<double(double)> mobility) {
  require_same_axis(now.axis, next.axis, "stability fields");
  const int n = now.axis.cells;
  if ((now.rho < kDensityFloor).any() || (next.rho < kDensityFloor).any())
    throw DegenerateDensity("density below evaluation floor");
  const double dtau = next.time - now.time;
  if (!(dtau > 0.0)) throw ConfigInvalid("states must be one step apart");

  Eigen::ArrayXd logr = now.rho.log();
  Eigen::ArrayXd dlog = detail_smol::center_diff(logr, now.axis.dx);
  StabilityFields out;
  out.E.resize(n);
  for (int i = 0; i < n; ++i)
    out.E[i] = mobility(now.axis.center(i)) *
               (dlog[i] + potential.gradient1(now.axis.center(i)));
  out.D = detail_smol::center_diff(out.E, now.axis.dx);

  Eigen::ArrayXd dtlog = (next.rho.log() - logr) / dtau;
  Eigen::ArrayXd ddt = detail_smol::center_diff(dtlog, now.axis.dx);
  out.F.resize(n);
  for (int i = 0; i < n; ++i)
    out.F[i] = mobility(now.axis.center(i)) * ddt[i];

  out.E_sup = out.E.abs().maxCoeff();
  out.D_sup = out.D.abs().maxCoeff();
  out.F_sup = out.F.abs().maxCoeff();
  return out;
}

}  // namespace hydrolim
