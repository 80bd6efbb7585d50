#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

#include "hydrolim/errors.hpp"
#include "hydrolim/grid.hpp"
#include "hydrolim/mobility.hpp"
#include "hydrolim/potentials.hpp"
#include "hydrolim/rng.hpp"

namespace hydrolim {

// Phase-space density on a tensor grid. f(j, i) is the cell average at
// velocity cell j, space cell i; columns are contiguous velocity profiles.
struct PhaseGridState {
  Axis x;
  Axis v;
  Eigen::MatrixXd f;
  double time = 0.0;
};

namespace detail_kin {

// z / (e^z - 1), the exponential-fitting weight. Even series near zero.
inline double bernoulli_weight(double z) {
  if (std::abs(z) < 1e-5) return 1.0 - 0.5 * z + z * z / 12.0;
  return z / std::expm1(z);
}

inline double minmod(double a, double b) {
  if (a > 0.0 && b > 0.0) return std::min(a, b);
  if (a < 0.0 && b < 0.0) return std::max(a, b);
  return 0.0;
}

}  // namespace detail_kin

// Grid solver for the scaled kinetic equation
//   df/dt + (v/eps) df/dx - (V'(x)/eps) df/dv = (1/eps^2) d/dv(G (df/dv + vf))
// on [-Lx,Lx] x [-Lv,Lv] with zero-flux walls.
//
// Strang composition: half transport, full collision, half transport.
// Transport advects h = f / (e^{-V(x)} e^{-v^2/2}) with limited upwind fluxes
// whose interface weights telescope against the drift term, so the discrete
// Gibbs profile is stationary up to the Gibbs tail at the no-flux walls
// (about 1e-8 of the peak on the default boxes) and every substep is a
// conservative positive update. Free energy and the equilibrium-weighted L2
// norm are non-increasing step by step, not just in the continuum limit.
// The collision step is an implicit exponential-fitted flux (tridiagonal per
// space cell), stationary on e^{-v^2/2} exactly.
class KineticGridScheme {
 public:
  KineticGridScheme(const Axis& x, const Axis& v, const Potential& potential,
                    std::function<double(double)> friction, double epsilon,
                    double dt = 0.0, double cfl = 0.6)
      : x_(x), v_(v), eps_(epsilon) {
    if (!(epsilon > 0.0)) throw ConfigInvalid("epsilon must be positive");
    if (potential.dim != 1)
      throw ConfigInvalid("grid solver is one dimensional");
    const int nx = x_.cells, nv = v_.cells;

    vp_.resize(nx);
    ax_.resize(nx);
    double vmin = 0.0, vmax = 0.0;
    for (int i = 0; i < nx; ++i) {
      const double val = potential.value1(x_.center(i));
      vmin = std::min(vmin, val);
      vmax = std::max(vmax, val);
    }
    if (vmax - vmin > 600.0)
      throw ConfigInvalid("potential range too wide for weighted transport; "
                          "shrink the box");
    for (int i = 0; i < nx; ++i)
      ax_[i] = std::exp(-potential.value1(x_.center(i)));
    bv_.resize(nv);
    for (int j = 0; j < nv; ++j)
      bv_[j] = std::exp(-0.5 * v_.center(j) * v_.center(j));
    inv_ax_ = ax_.cwiseInverse();
    inv_bv_ = bv_.cwiseInverse();

    // Interface weights are the Gibbs factors evaluated at the interfaces.
    // The transport speeds are back-derived from the discrete product rule
    //   ta[i] - ta[i+1] = dx vp[i] ax[i],   tb[j] - tb[j+1] = dv uv[j] bv[j],
    // so the flux divergence of a constant-h state cancels between the x and
    // v directions; vp[i] and uv[j] match grad V(x_i) and v_j to second
    // order.  The walls carry no flux, which leaves a constant-h imbalance
    // confined to the wall cells of the size of the Gibbs tail e^{-V(L)},
    // so the discrete Gibbs state is stationary up to that tail (about
    // 1e-8 of the peak on the default boxes), not to rounding.  Balancing
    // the walls exactly instead forces wall drift speeds of order 1/dx and
    // with them dt of order dx*dv; this trade was measured and rejected.
    ta_.resize(nx + 1);
    for (int k = 0; k <= nx; ++k)
      ta_[k] = std::exp(-potential.value1(x_.interface(k)));
    tb_.resize(nv + 1);
    for (int k = 0; k <= nv; ++k) {
      const double vi = v_.interface(k);
      tb_[k] = std::exp(-0.5 * vi * vi);
    }
    for (int k = 0; k <= nx; ++k)
      if (!(ta_[k] > 0.0))
        throw ConfigInvalid("transport interface weight lost positivity in x");
    for (int k = 0; k <= nv; ++k)
      if (!(tb_[k] > 0.0))
        throw ConfigInvalid("transport interface weight lost positivity in v");
    for (int i = 0; i < nx; ++i)
      vp_[i] = (ta_[i] - ta_[i + 1]) / (x_.dx * ax_[i]);
    uv_.resize(nv);
    for (int j = 0; j < nv; ++j)
      uv_[j] = (tb_[j] - tb_[j + 1]) / (v_.dx * bv_[j]);

    gx_.resize(nx);
    for (int i = 0; i < nx; ++i) {
      gx_[i] = friction(x_.center(i));
      if (!(gx_[i] > 0.0))
        throw NonPositiveGamma("friction must be positive on the grid");
    }

    // Collision interface weights: Bp f_j - Bm f_{j+1} vanishes when f is
    // proportional to e^{-v^2/2} at cell centers.
    bp_.resize(nv - 1);
    bm_.resize(nv - 1);
    for (int j = 0; j + 1 < nv; ++j) {
      const double du =
          0.5 * (v_.center(j + 1) * v_.center(j + 1) - v_.center(j) * v_.center(j));
      bp_[j] = detail_kin::bernoulli_weight(du);
      bm_[j] = detail_kin::bernoulli_weight(-du);
    }

    // Interface/center weight ratios enter the positivity bound.
    double rx = 0.0;
    for (int k = 1; k < nx; ++k)
      rx = std::max(rx, ta_[k] / std::min(ax_[k - 1], ax_[k]));
    double rv = 0.0;
    for (int k = 1; k < nv; ++k)
      rv = std::max(rv, tb_[k] / std::min(bv_[k - 1], bv_[k]));
    const double vmax_speed = uv_.cwiseAbs().maxCoeff();
    const double vpmax = vp_.cwiseAbs().maxCoeff();
    speed_density_ = vmax_speed * rx / x_.dx + vpmax * rv / v_.dx;

    dt_ = (dt > 0.0) ? dt : cfl * eps_ / speed_density_;
    if (dt_ * vmax_speed / (eps_ * x_.dx) > 0.9 + 1e-12)
      throw CFLViolation("transport step too long for the x grid");
    if (dt_ * speed_density_ / eps_ > 1.2)
      throw CFLViolation("transport step violates the positivity bound");

    fx_.resize(nv, nx + 1);
    fv_.resize(nv + 1, nx);
    h_.resize(nv, nx);
    tri_a_.resize(nv);
    tri_b_.resize(nv);
    tri_c_.resize(nv);
    tri_r_.resize(nv);
  }

  const Axis& x_axis() const { return x_; }
  const Axis& v_axis() const { return v_; }
  double dt() const { return dt_; }
  double epsilon() const { return eps_; }
  const Eigen::ArrayXd& space_weights() const { return ax_; }
  const Eigen::ArrayXd& friction_values() const { return gx_; }

  // Normalized discrete Gibbs state, the exact fixed point of step().
  Eigen::MatrixXd equilibrium() const {
    Eigen::MatrixXd feq(v_.cells, x_.cells);
    for (int i = 0; i < x_.cells; ++i)
      for (int j = 0; j < v_.cells; ++j) feq(j, i) = ax_[i] * bv_[j];
    feq /= feq.sum() * x_.dx * v_.dx;
    return feq;
  }

  void step(Eigen::MatrixXd& f) {
    transport_substep(f, 0.5 * dt_);
    collide(f, dt_);
    transport_substep(f, 0.5 * dt_);
  }

  void transport_substep(Eigen::MatrixXd& f, double dts) {
    const int nx = x_.cells, nv = v_.cells;
    for (int i = 0; i < nx; ++i)
      for (int j = 0; j < nv; ++j) h_(j, i) = f(j, i) * inv_ax_[i] * inv_bv_[j];

    fx_.col(0).setZero();
    fx_.col(nx).setZero();
    for (int j = 0; j < nv; ++j) {
      const double u = uv_[j] / eps_;
      const double cx = std::abs(u) * dts / x_.dx;
      for (int k = 1; k < nx; ++k) {
        double face;
        if (u > 0.0) {
          const double d0 = (k >= 2) ? h_(j, k - 1) - h_(j, k - 2) : 0.0;
          const double d1 = h_(j, k) - h_(j, k - 1);
          face = h_(j, k - 1) +
                 0.5 * (1.0 - cx) * detail_kin::minmod(d0, d1);
        } else {
          const double d0 = h_(j, k) - h_(j, k - 1);
          const double d1 = (k + 1 < nx) ? h_(j, k + 1) - h_(j, k) : 0.0;
          face = h_(j, k) - 0.5 * (1.0 - cx) * detail_kin::minmod(d0, d1);
        }
        fx_(j, k) = u * ta_[k] * bv_[j] * face;
      }
    }

    fv_.row(0).setZero();
    fv_.row(nv).setZero();
    for (int i = 0; i < nx; ++i) {
      const double s = -vp_[i] / eps_;
      const double cv = std::abs(s) * dts / v_.dx;
      for (int k = 1; k < nv; ++k) {
        double face;
        if (s > 0.0) {
          const double d0 = (k >= 2) ? h_(k - 1, i) - h_(k - 2, i) : 0.0;
          const double d1 = h_(k, i) - h_(k - 1, i);
          face = h_(k - 1, i) +
                 0.5 * (1.0 - cv) * detail_kin::minmod(d0, d1);
        } else {
          const double d0 = h_(k, i) - h_(k - 1, i);
          const double d1 = (k + 1 < nv) ? h_(k + 1, i) - h_(k, i) : 0.0;
          face = h_(k, i) - 0.5 * (1.0 - cv) * detail_kin::minmod(d0, d1);
        }
        fv_(k, i) = s * ax_[i] * tb_[k] * face;
      }
    }

    for (int i = 0; i < nx; ++i)
      for (int j = 0; j < nv; ++j)
        f(j, i) -= dts * ((fx_(j, i + 1) - fx_(j, i)) / x_.dx +
                          (fv_(j + 1, i) - fv_(j, i)) / v_.dx);
  }

  // Implicit exponential-fitted collision update, one tridiagonal solve per
  // space cell. Unconditionally stable, conservative, positivity preserving.
  void collide(Eigen::MatrixXd& f, double dts) {
    const int nx = x_.cells, nv = v_.cells;
    for (int i = 0; i < nx; ++i) {
      const double sig = gx_[i] * dts / (eps_ * eps_ * v_.dx * v_.dx);
      for (int j = 0; j < nv; ++j) {
        double diag = 1.0;
        if (j + 1 < nv) diag += sig * bp_[j];
        if (j >= 1) diag += sig * bm_[j - 1];
        tri_b_[j] = diag;
        tri_a_[j] = (j >= 1) ? -sig * bp_[j - 1] : 0.0;
        tri_c_[j] = (j + 1 < nv) ? -sig * bm_[j] : 0.0;
        tri_r_[j] = f(j, i);
      }
      // Thomas sweep.
      for (int j = 1; j < nv; ++j) {
        const double w = tri_a_[j] / tri_b_[j - 1];
        tri_b_[j] -= w * tri_c_[j - 1];
        tri_r_[j] -= w * tri_r_[j - 1];
      }
      f(nv - 1, i) = tri_r_[nv - 1] / tri_b_[nv - 1];
      for (int j = nv - 2; j >= 0; --j)
        f(j, i) = (tri_r_[j] - tri_c_[j] * f(j + 1, i)) / tri_b_[j];
    }
  }

 private:
  Axis x_, v_;
  double eps_ = 1.0;
  double dt_ = 0.0;
  double speed_density_ = 0.0;
  Eigen::ArrayXd vp_, uv_, gx_;
  Eigen::ArrayXd ax_, bv_, inv_ax_, inv_bv_;
  Eigen::ArrayXd ta_, tb_;
  Eigen::ArrayXd bp_, bm_;
  Eigen::MatrixXd fx_, fv_, h_;
  Eigen::ArrayXd tri_a_, tri_b_, tri_c_, tri_r_;
};

// f0 = rho0(x) * discrete Maxwellian(v). With rho0 equal to the normalized
// Gibbs density this reproduces the scheme fixed point to rounding.
inline Eigen::MatrixXd local_equilibrium(const Eigen::ArrayXd& rho,
                                         const Eigen::ArrayXd& maxw) {
  Eigen::MatrixXd f(maxw.size(), rho.size());
  for (int i = 0; i < rho.size(); ++i)
    for (int j = 0; j < maxw.size(); ++j) f(j, i) = rho[i] * maxw[j];
  return f;
}

struct KineticSnapshot {
  double t = 0.0;
  Eigen::MatrixXd f;
};

inline void scheme_step(KineticGridScheme& scheme, Eigen::MatrixXd& f,
                        double dt) {
  scheme.transport_substep(f, 0.5 * dt);
  scheme.collide(f, dt);
  scheme.transport_substep(f, 0.5 * dt);
}

// Advance to T with snapshots at the step boundaries nearest the requested
// times. T is split into uniform steps no longer than the scheme step.
// per_step (optional) runs after every accepted step.
inline std::vector<KineticSnapshot> run_kinetic(
    KineticGridScheme& scheme, const Eigen::MatrixXd& f0, double T,
    const std::vector<double>& snapshot_times,
    const std::function<void(const Eigen::MatrixXd&, double, long)>& per_step =
        {}) {
  if (!(T > 0.0)) throw ConfigInvalid("horizon must be positive");
  const long n_steps = std::max<long>(1, std::lround(std::ceil(T / scheme.dt())));
  const double dt = T / static_cast<double>(n_steps);

  std::vector<long> snap_steps;
  snap_steps.reserve(snapshot_times.size());
  for (double t : snapshot_times) {
    long s = std::lround(t / dt);
    snap_steps.push_back(std::clamp<long>(s, 0, n_steps));
  }

  Eigen::MatrixXd f = f0;
  std::vector<KineticSnapshot> out;
  auto emit = [&](long step) {
    for (std::size_t q = 0; q < snap_steps.size(); ++q)
      if (snap_steps[q] == step) out.push_back({step * dt, f});
  };
  emit(0);
  for (long s = 1; s <= n_steps; ++s) {
    scheme_step(scheme, f, dt);
    if (per_step) per_step(f, s * dt, s);
    emit(s);
  }
  if (!f.allFinite()) throw NonFiniteState("kinetic state lost finiteness");
  return out;
}

// ---------------------------------------------------------------------------
// Particle ensemble for the same scaled dynamics in any dimension:
//   dx = v/eps dt,   dv = (-grad V/eps - G v/eps^2) dt + (sqrt2/eps) G^{1/2} dW
// Velocity update uses the exact Ornstein-Uhlenbeck flow with G frozen at the
// current position, between two half kicks and the position drift.

struct EnsembleState {
  Eigen::MatrixXd x;  // (dim, M)
  Eigen::MatrixXd v;
  double time = 0.0;
  std::uint64_t seed = 0;
  std::uint32_t step = 0;
};

inline constexpr std::uint32_t kEnsembleInitStep = 0xFFFFFFFFu;

inline FrictionModel zero_friction(int dim) {
  FrictionModel m;
  m.dim = dim;
  m.constant = true;
  m.eval = [dim](const Eigen::VectorXd&) {
    return Eigen::MatrixXd::Zero(dim, dim).eval();
  };
  return m;
}

inline EnsembleState init_ensemble_gaussian(int M, int dim, double sigma0sq,
                                            std::uint64_t seed) {
  if (M < 1 || dim < 1) throw ConfigInvalid("ensemble needs M, dim >= 1");
  if (!(sigma0sq > 0.0)) throw ConfigInvalid("sigma0sq must be positive");
  EnsembleState st;
  st.x.resize(dim, M);
  st.v.resize(dim, M);
  st.seed = seed;
  const double s0 = std::sqrt(sigma0sq);
  for (int p = 0; p < M; ++p) {
    rng::NormalStream g(seed, static_cast<std::uint64_t>(p), kEnsembleInitStep);
    for (int d = 0; d < dim; ++d) st.x(d, p) = s0 * g.normal();
    for (int d = 0; d < dim; ++d) st.v(d, p) = g.normal();
  }
  return st;
}

// Sample x from a tabulated 1D density by inverting the piecewise-linear CDF.
inline EnsembleState init_ensemble_from_density(int M, const Axis& axis,
                                                const Eigen::ArrayXd& rho,
                                                std::uint64_t seed) {
  if (rho.size() != axis.cells) throw IncompatibleGrids("density/axis mismatch");
  if ((rho < 0.0).any()) throw NegativeDensity("cannot sample a signed density");
  Eigen::ArrayXd cdf(axis.cells + 1);
  cdf[0] = 0.0;
  for (int i = 0; i < axis.cells; ++i) cdf[i + 1] = cdf[i] + rho[i] * axis.dx;
  const double total = cdf[axis.cells];
  if (!(total > 0.0)) throw DegenerateDensity("density integrates to zero");
  cdf /= total;
  EnsembleState st;
  st.x.resize(1, M);
  st.v.resize(1, M);
  st.seed = seed;
  for (int p = 0; p < M; ++p) {
    rng::NormalStream g(seed, static_cast<std::uint64_t>(p), kEnsembleInitStep);
    const double u = g.uniform();
    const auto it = std::upper_bound(cdf.data(), cdf.data() + axis.cells + 1, u);
    int cell = std::clamp<int>(static_cast<int>(it - cdf.data()) - 1, 0,
                               axis.cells - 1);
    const double frac = (u - cdf[cell]) / std::max(cdf[cell + 1] - cdf[cell],
                                                   1e-300);
    st.x(0, p) = axis.interface(cell) + frac * axis.dx;
    st.v(0, p) = g.normal();
  }
  return st;
}

inline void sde_step(EnsembleState& st, const Potential& potential,
                     const FrictionModel& friction, double eps, double dt,
                     int threads = 1) {
  const int M = static_cast<int>(st.x.cols());
  const int dim = static_cast<int>(st.x.rows());
  if (friction.dim != dim) throw IncompatibleGrids("friction dim mismatch");
  const double tau = dt / (eps * eps);

  // Constant G: one spectral factorization for everyone.
  bool scalar_fast = false;
  double e_sc = 0.0, s_sc = 0.0;
  Eigen::MatrixXd e_mat, s_mat;
  if (friction.constant) {
    const Eigen::MatrixXd g = friction.eval(Eigen::VectorXd::Zero(dim));
    const double g00 = g(0, 0);
    if ((g - g00 * Eigen::MatrixXd::Identity(dim, dim)).norm() <=
        1e-14 * std::max(1.0, g.norm())) {
      scalar_fast = true;
      e_sc = std::exp(-g00 * tau);
      s_sc = std::sqrt(std::max(0.0, 1.0 - e_sc * e_sc));
    } else {
      const auto es = spectrum(g);
      Eigen::VectorXd lam = es.eigenvalues();
      Eigen::VectorXd ed(lam.size()), sd(lam.size());
      for (int k = 0; k < lam.size(); ++k) {
        ed[k] = std::exp(-lam[k] * tau);
        sd[k] = std::sqrt(std::max(0.0, 1.0 - ed[k] * ed[k]));
      }
      e_mat = es.eigenvectors() * ed.asDiagonal() * es.eigenvectors().transpose();
      s_mat = es.eigenvectors() * sd.asDiagonal() * es.eigenvectors().transpose();
    }
  }

  auto work = [&](int p0, int p1) {
    Eigen::VectorXd xi(dim);
    for (int p = p0; p < p1; ++p) {
      rng::NormalStream g(st.seed, static_cast<std::uint64_t>(p), st.step);
      auto x = st.x.col(p);
      auto v = st.v.col(p);
      v -= (0.5 * dt / eps) * potential.gradient(x);
      for (int d = 0; d < dim; ++d) xi[d] = g.normal();
      if (scalar_fast) {
        v = e_sc * v + s_sc * xi;
      } else if (friction.constant) {
        v = e_mat * v + s_mat * xi;
      } else {
        const auto es = spectrum(friction.eval(x));
        const Eigen::VectorXd lam = es.eigenvalues();
        const Eigen::MatrixXd& u = es.eigenvectors();
        Eigen::VectorXd vw = u.transpose() * v;
        Eigen::VectorXd xw = u.transpose() * xi;
        for (int k = 0; k < dim; ++k) {
          const double e = std::exp(-lam[k] * tau);
          vw[k] = e * vw[k] + std::sqrt(std::max(0.0, 1.0 - e * e)) * xw[k];
        }
        v = u * vw;
      }
      x += (dt / eps) * v;
      v -= (0.5 * dt / eps) * potential.gradient(x);
    }
  };

  if (threads <= 1) {
    work(0, M);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (M + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const int p0 = t * chunk, p1 = std::min(M, p0 + chunk);
      if (p0 < p1) pool.emplace_back(work, p0, p1);
    }
    for (auto& t : pool) t.join();
  }
  if (st.step >= kEnsembleInitStep - 1)
    throw NonFiniteState("step counter exhausted");
  ++st.step;
  st.time += dt;
}

}  // namespace hydrolim
