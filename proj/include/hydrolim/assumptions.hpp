#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "hydrolim/errors.hpp"
#include "hydrolim/grid.hpp"
#include "hydrolim/mobility.hpp"
#include "hydrolim/potentials.hpp"
#include "hydrolim/rng.hpp"
#include "hydrolim/smoluchowski.hpp"

namespace hydrolim {

// The hypotheses are analytic statements over the whole space; what a desk run
// can certify is a sampled sufficient check on a box. Reports say which box
// and which samples, and failures carry their witness point.

inline constexpr double kLambdaFloor = 1e-6;
inline constexpr double kDerivativeCap = 1e6;
inline constexpr double kGrowthCap = 1e6;

struct SampleBox {
  Eigen::VectorXd lo, hi;
};

struct MobilityField {
  int dim = 0;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> eval;
};

inline MobilityField isotropic_mobility(int dim, double mu) {
  if (!(mu > 0.0)) throw NonPositiveGamma("mobility must be positive");
  MobilityField f;
  f.dim = dim;
  f.eval = [dim, mu](const Eigen::VectorXd&) {
    return (mu * Eigen::MatrixXd::Identity(dim, dim)).eval();
  };
  return f;
}

inline MobilityField mobility_from_friction(const FrictionModel& g) {
  MobilityField f;
  f.dim = g.dim;
  f.eval = [g](const Eigen::VectorXd& x) {
    return friction_from_mobility(g.eval(x));  // spectral inverse both ways
  };
  return f;
}

// Mobility of n spheres as a function of their stacked centers.
inline MobilityField rpy_mobility_field(int n_spheres, double radius,
                                        double viscosity) {
  MobilityField f;
  f.dim = 3 * n_spheres;
  f.eval = [n_spheres, radius, viscosity](const Eigen::VectorXd& x) {
    std::vector<Eigen::Vector3d> centers(n_spheres);
    for (int s = 0; s < n_spheres; ++s) centers[s] = x.segment<3>(3 * s);
    return build_rpy({centers, radius, viscosity});
  };
  return f;
}

struct ConditionCheck {
  std::string name;
  double value = 0.0;
  double cap = 0.0;
  bool ok = true;
  Eigen::VectorXd witness;
};

namespace detail_assume {

inline Eigen::VectorXd sample_point(const SampleBox& box,
                                    rng::NormalStream& g) {
  Eigen::VectorXd p(box.lo.size());
  for (int d = 0; d < p.size(); ++d)
    p[d] = box.lo[d] + g.uniform() * (box.hi[d] - box.lo[d]);
  return p;
}

// Max |entry| of the order-k directional finite difference along every axis.
template <class F>
double max_fd(const F& field, const Eigen::VectorXd& p, const SampleBox& box,
              int order) {
  double worst = 0.0;
  for (int d = 0; d < p.size(); ++d) {
    const double h = 1e-3 * (box.hi[d] - box.lo[d]);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(p.size());
    e[d] = h;
    Eigen::MatrixXd fd;
    if (order == 1) {
      fd = (field(p + e) - field(p - e)) / (2.0 * h);
    } else if (order == 2) {
      fd = (field(p + e) - 2.0 * field(p) + field(p - e)) / (h * h);
    } else {
      fd = (field(p + 2.0 * e) - 2.0 * field(p + e) + 2.0 * field(p - e) -
            field(p - 2.0 * e)) /
           (2.0 * h * h * h);
    }
    worst = std::max(worst, fd.cwiseAbs().maxCoeff());
  }
  return worst;
}

inline void track(ConditionCheck& c, double value, const Eigen::VectorXd& p) {
  if (value > c.value || c.witness.size() == 0) {
    c.value = value;
    c.witness = p;
  }
}

inline void finalize_cap(ConditionCheck& c) {
  c.ok = std::isfinite(c.value) && c.value <= c.cap;
}

inline Eigen::ArrayXd grid_diff(const Eigen::ArrayXd& u, double dx) {
  return detail_smol::center_diff(u, dx);
}

}  // namespace detail_assume

// ---------------------------------------------------------------------------
// Ellipticity of the mobility plus derivative sup bounds, sampled on the box.

struct EllipticityReport {
  double lambda_min = 0.0;
  Eigen::VectorXd lambda_witness;
  std::vector<ConditionCheck> checks;
  int samples = 0;
  bool pass = false;
  // True when a derivative sup on the full box exceeds twice its value on the
  // concentric half-width box: the estimate is still growing with the box.
  bool box_dependent = false;
};

inline EllipticityReport check_ellipticity(const MobilityField& mobility,
                         const Potential& potential, const SampleBox& box,
                         int n_samples, std::uint64_t seed = 1) {
  if (n_samples < 1) throw ConfigInvalid("need at least one sample");
  if (mobility.dim != box.lo.size() || mobility.dim != box.hi.size())
    throw IncompatibleGrids("box dimension does not match the field");
  EllipticityReport rep;
  rep.samples = n_samples;
  rep.lambda_min = std::numeric_limits<double>::infinity();

  auto mob = [&](const Eigen::VectorXd& p) { return mobility.eval(p); };
  auto drift = [&](const Eigen::VectorXd& p) {
    return (mobility.eval(p) * potential.gradient(p)).eval();
  };

  ConditionCheck d_mob[3], d_drift[4];
  for (int k = 0; k < 3; ++k) {
    d_mob[k].name = "sup |d^" + std::to_string(k + 1) + " mobility|";
    d_mob[k].cap = kDerivativeCap;
  }
  d_drift[0].name = "sup |mobility grad V|";
  d_drift[0].cap = kDerivativeCap;
  for (int k = 1; k < 4; ++k) {
    d_drift[k].name = "sup |d^" + std::to_string(k) + " (mobility grad V)|";
    d_drift[k].cap = kDerivativeCap;
  }

  rng::NormalStream g(seed, 0, 0);
  for (int s = 0; s < n_samples; ++s) {
    const Eigen::VectorXd p = detail_assume::sample_point(box, g);
    const double lam = min_eigenvalue(symmetrized(mobility.eval(p)));
    if (lam < rep.lambda_min) {
      rep.lambda_min = lam;
      rep.lambda_witness = p;
    }
    for (int k = 0; k < 3; ++k)
      detail_assume::track(d_mob[k], detail_assume::max_fd(mob, p, box, k + 1),
                           p);
    detail_assume::track(d_drift[0], drift(p).cwiseAbs().maxCoeff(), p);
    for (int k = 1; k < 4; ++k)
      detail_assume::track(d_drift[k],
                           detail_assume::max_fd(drift, p, box, k), p);
  }
  // Same sups on the concentric half-width box, with the same FD steps.
  SampleBox half;
  const Eigen::VectorXd mid = 0.5 * (box.lo + box.hi);
  half.lo = mid + 0.5 * (box.lo - mid);
  half.hi = mid + 0.5 * (box.hi - mid);
  double half_mob[3] = {0.0, 0.0, 0.0}, half_drift[4] = {0.0, 0.0, 0.0, 0.0};
  rng::NormalStream gh(seed, 1, 0);
  const int n_half = std::max(8, n_samples / 2);
  for (int s = 0; s < n_half; ++s) {
    const Eigen::VectorXd p = detail_assume::sample_point(half, gh);
    for (int k = 0; k < 3; ++k)
      half_mob[k] =
          std::max(half_mob[k], detail_assume::max_fd(mob, p, box, k + 1));
    for (int k = 1; k < 4; ++k)
      half_drift[k] =
          std::max(half_drift[k], detail_assume::max_fd(drift, p, box, k));
  }
  for (int k = 0; k < 3; ++k)
    if (d_mob[k].value > 2.0 * half_mob[k] + 1e-8) rep.box_dependent = true;
  for (int k = 1; k < 4; ++k)
    if (d_drift[k].value > 2.0 * half_drift[k] + 1e-8)
      rep.box_dependent = true;

  for (auto& c : d_mob) {
    detail_assume::finalize_cap(c);
    rep.checks.push_back(c);
  }
  for (auto& c : d_drift) {
    detail_assume::finalize_cap(c);
    rep.checks.push_back(c);
  }
  ConditionCheck lam;
  lam.name = "min eigenvalue of mobility";
  lam.cap = kLambdaFloor;  // lower bound in this one case
  lam.value = rep.lambda_min;
  lam.witness = rep.lambda_witness;
  lam.ok = rep.lambda_min >= kLambdaFloor;
  rep.checks.push_back(lam);

  rep.pass = true;
  for (const auto& c : rep.checks) rep.pass = rep.pass && c.ok;
  return rep;
}

// ---------------------------------------------------------------------------
// Initial-data sandwich for h0 = rho0 e^{V} plus a boundary-zone proxy for
// the conditions at infinity, tracked along a limit-solver run.

struct InitialDataReport {
  double a = 0.0;  // min h0 at t=0
  double A = 0.0;  // max h0 at t=0
  bool box_dependent = false;
  std::vector<ConditionCheck> checks;  // C_k boundary-zone sups, k = 0..3
  bool sandwich_pass = false;
  bool boundary_pass = false;
};

inline InitialDataReport check_initial_data(
    const DensityState& rho0, const Potential& potential, double T,
    const std::function<std::vector<DensitySnapshot>(const Eigen::ArrayXd&,
                                                     double)>& solver_hook) {
  const Axis& ax = rho0.axis;
  const int n = ax.cells;
  const double mass0 = rho0.rho.sum() * ax.dx;
  if (std::abs(mass0 - 1.0) > 1e-8)
    throw ConfigInvalid("initial density must have unit mass");

  Eigen::ArrayXd weights(n);
  for (int i = 0; i < n; ++i)
    weights[i] = std::exp(-potential.value1(ax.center(i)));

  InitialDataReport rep;
  const int zone = std::max(1, static_cast<int>(std::ceil(0.05 * n)));

  auto h0_of = [&](const Eigen::ArrayXd& rho) {
    return (rho / weights).eval();
  };
  auto derivative_sups = [&](const Eigen::ArrayXd& h0) {
    std::vector<Eigen::ArrayXd> ds;
    ds.push_back(h0);
    Eigen::ArrayXd cur = h0;
    for (int k = 1; k <= 3; ++k) {
      cur = detail_assume::grid_diff(cur, ax.dx);
      ds.push_back(cur);
    }
    return ds;
  };
  auto zone_sup = [&](const Eigen::ArrayXd& u) {
    double s = 0.0;
    for (int i = 0; i < zone; ++i)
      s = std::max({s, std::abs(u[i]), std::abs(u[n - 1 - i])});
    return s;
  };
  auto interior_sup = [&](const Eigen::ArrayXd& u) {
    double s = 0.0;
    for (int i = zone; i < n - zone; ++i) s = std::max(s, std::abs(u[i]));
    return s;
  };

  const Eigen::ArrayXd h0 = h0_of(rho0.rho);
  rep.a = h0.minCoeff();
  rep.A = h0.maxCoeff();

  const auto ds0 = derivative_sups(h0);
  bool deriv_ok = true;
  for (int k = 0; k <= 3; ++k) {
    const double sup = ds0[k].abs().maxCoeff();
    deriv_ok = deriv_ok && std::isfinite(sup) && sup <= kDerivativeCap;
    if (zone_sup(ds0[k]) >
        interior_sup(ds0[k]) * (1.0 + 1e-6) + 1e-9 * std::abs(rep.A))
      rep.box_dependent = true;
  }
  rep.sandwich_pass = rep.a > 0.0 && std::isfinite(rep.A) && deriv_ok;

  // Conditions at infinity have no content on a box; record the boundary-zone
  // sups along the run instead and cap them.
  ConditionCheck ck[4];
  for (int k = 0; k <= 3; ++k) {
    ck[k].name = "boundary-zone sup |d^" + std::to_string(k) + " h0| over run";
    ck[k].cap = kDerivativeCap;
  }
  const auto snaps = solver_hook(rho0.rho, T);
  for (const auto& s : snaps) {
    const auto ds = derivative_sups(h0_of(s.rho));
    for (int k = 0; k <= 3; ++k) {
      if (ds[k].hasNaN()) {
        ck[k].value = std::numeric_limits<double>::infinity();
        continue;
      }
      const double zs = zone_sup(ds[k]);
      if (zs > ck[k].value) ck[k].value = zs;
    }
  }
  rep.boundary_pass = true;
  for (auto& c : ck) {
    detail_assume::finalize_cap(c);
    rep.boundary_pass = rep.boundary_pass && c.ok;
    rep.checks.push_back(c);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Well-posedness conditions: local regularity, trace bound, linear growth of
// the drift, and sublinear growth of the noise amplitude.

struct GrowthReport {
  std::vector<ConditionCheck> checks;
  int samples = 0;
  bool pass = false;
};

inline GrowthReport check_growth(const FrictionModel& friction,
                               const Potential& potential,
                               const SampleBox& box, int n_samples,
                               std::uint64_t seed = 1) {
  if (n_samples < 1) throw ConfigInvalid("need at least one sample");
  GrowthReport rep;
  rep.samples = n_samples;
  const int dim = friction.dim;

  ConditionCheck c_reg, c_tr, c_growth, c_dreg, c_noise;
  c_reg = {"sup |d friction| (local regularity)", 0, kDerivativeCap, true, {}};
  c_tr = {"sup tr friction", 0, kGrowthCap, true, {}};
  c_growth = {"sup |friction v + grad V| / (1+|x|+|v|)", 0, kGrowthCap, true, {}};
  c_dreg = {"sup |d (friction v + grad V)|", 0, kDerivativeCap, true, {}};
  c_noise = {"sup |sqrt friction| / (1+|x|)", 0, kGrowthCap, true, {}};

  auto fric = [&](const Eigen::VectorXd& x) { return friction.eval(x); };
  const double vscale = 10.0;

  rng::NormalStream g(seed, 0, 1);
  for (int s = 0; s < n_samples; ++s) {
    const Eigen::VectorXd x = detail_assume::sample_point(box, g);
    Eigen::VectorXd v(dim);
    for (int d = 0; d < dim; ++d) v[d] = vscale * (2.0 * g.uniform() - 1.0);

    const Eigen::MatrixXd G = friction.eval(x);
    detail_assume::track(c_reg, detail_assume::max_fd(fric, x, box, 1), x);
    detail_assume::track(c_tr, G.trace(), x);
    const Eigen::VectorXd drift = G * v + potential.gradient(x);
    const double denom = 1.0 + x.norm() + v.norm();
    detail_assume::track(c_growth, drift.norm() / denom, x);
    auto driftx = [&](const Eigen::VectorXd& xx) {
      return ((friction.eval(xx) * v + potential.gradient(xx))).eval();
    };
    detail_assume::track(c_dreg, detail_assume::max_fd(driftx, x, box, 1), x);
    const double noise =
        std::sqrt(std::max(0.0, max_eigenvalue(symmetrized(G))));
    detail_assume::track(c_noise, noise / (1.0 + x.norm()), x);
  }
  for (auto* c : {&c_reg, &c_tr, &c_growth, &c_dreg, &c_noise}) {
    detail_assume::finalize_cap(*c);
    rep.checks.push_back(*c);
  }
  rep.pass = true;
  for (const auto& c : rep.checks) rep.pass = rep.pass && c.ok;
  return rep;
}

// ---------------------------------------------------------------------------
// Integrability of the coefficients and of the Gibbs weight, by Monte Carlo
// quadrature on the box plus a face-versus-interior test for e^{-V}.

struct IntegrabilityReport {
  std::vector<ConditionCheck> checks;
  int samples = 0;
  bool pass = false;
};

inline IntegrabilityReport check_integrability(const MobilityField& mobility,
                                     const Potential& potential,
                                     const SampleBox& box,
                                     int n_samples = 4096,
                                     std::uint64_t seed = 1) {
  IntegrabilityReport rep;
  rep.samples = n_samples;
  const int dim = mobility.dim;
  double vol = 1.0;
  for (int d = 0; d < dim; ++d) vol *= box.hi[d] - box.lo[d];

  double mean_g = 0.0, mean_ginv = 0.0, mean_gradv2 = 0.0, mean_wgrad2 = 0.0,
         mean_weight = 0.0;
  rng::NormalStream g(seed, 0, 2);
  for (int s = 0; s < n_samples; ++s) {
    const Eigen::VectorXd x = detail_assume::sample_point(box, g);
    const Eigen::MatrixXd mu = symmetrized(mobility.eval(x));
    const Eigen::MatrixXd G = friction_from_mobility(mu);
    const Eigen::VectorXd gv = potential.gradient(x);
    mean_g += G.norm();
    mean_ginv += mu.norm();
    mean_gradv2 += gv.squaredNorm();
    mean_wgrad2 += gv.dot(mu * gv);  // |G^{-1/2} grad V|^2
    mean_weight += std::exp(-potential.value(x));
  }
  const double inv_n = 1.0 / n_samples;
  auto put = [&](const std::string& name, double value) {
    ConditionCheck c;
    c.name = name;
    c.cap = kGrowthCap;
    c.value = value;
    detail_assume::finalize_cap(c);
    rep.checks.push_back(c);
  };
  put("integral of |friction| (MC)", mean_g * inv_n * vol);
  put("integral of |mobility| (MC)", mean_ginv * inv_n * vol);
  put("integral of |grad V|^2 (MC)", mean_gradv2 * inv_n * vol);
  put("integral of |mobility^(1/2) grad V|^2 (MC)", mean_wgrad2 * inv_n * vol);

  // e^{-V} integrable: its mass must not sit on the box faces.
  double face_weight = 0.0;
  const int n_face = std::max(64, n_samples / 8);
  int face_count = 0;
  for (int s = 0; s < n_face; ++s) {
    Eigen::VectorXd x = detail_assume::sample_point(box, g);
    const int d = s % dim;
    x[d] = (s / dim) % 2 == 0 ? box.lo[d] : box.hi[d];
    face_weight += std::exp(-potential.value(x));
    ++face_count;
  }
  ConditionCheck tail;
  tail.name = "face/interior ratio of e^{-V}";
  tail.cap = kTailTol * 10.0;
  const double interior_mean = mean_weight * inv_n;
  tail.value = (interior_mean > 0.0)
                   ? (face_weight / face_count) / interior_mean
                   : std::numeric_limits<double>::infinity();
  detail_assume::finalize_cap(tail);
  rep.checks.push_back(tail);

  rep.pass = true;
  for (const auto& c : rep.checks) rep.pass = rep.pass && c.ok;
  return rep;
}

// ---------------------------------------------------------------------------

struct AssumptionReport {
  bool integrability_ok = false;
  bool ellipticity_ok = false;
  bool sandwich_ok = false;
  bool boundary_ok = false;
  bool growth_ok = false;
  EllipticityReport ellipticity;
  InitialDataReport initial_data;
  GrowthReport growth;
  IntegrabilityReport integrability;
  int sample_points = 0;

  bool all_ok() const {
    return integrability_ok && ellipticity_ok && sandwich_ok && boundary_ok && growth_ok;
  }
};

inline std::string format_report(const AssumptionReport& rep) {
  std::ostringstream os;
  os.precision(6);
  auto line = [&](const ConditionCheck& c) {
    os << "  " << (c.ok ? "ok  " : "FAIL") << "  " << c.name << " = "
       << c.value;
    if (!c.ok && c.witness.size() > 0) {
      os << "  at (";
      for (int d = 0; d < c.witness.size(); ++d)
        os << (d ? ", " : "") << c.witness[d];
      os << ")";
    }
    os << "\n";
  };
  os << "[ellipticity and derivative bounds] "
     << (rep.ellipticity_ok ? "pass" : "fail")
     << (rep.ellipticity.box_dependent ? "  (box-dependent)" : "") << "\n";
  for (const auto& c : rep.ellipticity.checks) line(c);
  os << "[initial data sandwich] " << (rep.sandwich_ok ? "pass" : "fail")
     << "  a=" << rep.initial_data.a << " A=" << rep.initial_data.A
     << (rep.initial_data.box_dependent ? "  (box-dependent)" : "") << "\n";
  os << "[boundary-zone admissibility] " << (rep.boundary_ok ? "pass" : "fail")
     << "\n";
  for (const auto& c : rep.initial_data.checks) line(c);
  os << "[well-posedness growth conditions] "
     << (rep.growth_ok ? "pass" : "fail") << "\n";
  for (const auto& c : rep.growth.checks) line(c);
  os << "[coefficient integrability] " << (rep.integrability_ok ? "pass" : "fail")
     << "\n";
  for (const auto& c : rep.integrability.checks) line(c);
  os << "overall: " << (rep.all_ok() ? "pass" : "fail") << "\n";
  return os.str();
}

}  // namespace hydrolim
