#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "hydrolim/errors.hpp"
#include "hydrolim/grid.hpp"

namespace hydrolim {

inline constexpr double kTailTol = 1e-8;

struct Potential {
  int dim = 1;
  std::string kind;
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;

  double value1(double x) const {
    Eigen::VectorXd p(1);
    p[0] = x;
    return value(p);
  }
  double gradient1(double x) const {
    Eigen::VectorXd p(1);
    p[0] = x;
    return gradient(p)[0];
  }
};

inline Potential harmonic_potential(int dim, double k) {
  Potential p;
  p.dim = dim;
  p.kind = "harmonic";
  p.value = [k](const Eigen::VectorXd& x) { return 0.5 * k * x.squaredNorm(); };
  p.gradient = [k](const Eigen::VectorXd& x) { return (k * x).eval(); };
  return p;
}

// V(x) = alpha (x^2 - beta^2)^2, one dimensional.
inline Potential double_well_potential(double alpha, double beta) {
  if (!(alpha > 0.0)) throw ConfigInvalid("double well needs alpha > 0");
  Potential p;
  p.dim = 1;
  p.kind = "double_well";
  p.value = [alpha, beta](const Eigen::VectorXd& x) {
    const double s = x[0] * x[0] - beta * beta;
    return alpha * s * s;
  };
  p.gradient = [alpha, beta](const Eigen::VectorXd& x) {
    Eigen::VectorXd g(1);
    g[0] = 4.0 * alpha * x[0] * (x[0] * x[0] - beta * beta);
    return g;
  };
  return p;
}

// Values sampled at cell centers of `axis`; linear interpolation inside the
// table, linear extension with the edge slope outside. One dimensional.
inline Potential tabulated_potential(const Axis& axis,
                                     std::vector<double> values) {
  if (static_cast<int>(values.size()) != axis.cells)
    throw ConfigInvalid("tabulated potential size does not match axis");
  Potential p;
  p.dim = 1;
  p.kind = "tabulated";
  auto interp = [axis, values = std::move(values)](double x) {
    const int n = axis.cells;
    const double t = (x - axis.center(0)) / axis.dx;
    int i = static_cast<int>(std::floor(t));
    i = std::max(0, std::min(n - 2, i));
    const double frac = t - i;
    const double val = values[i] + frac * (values[i + 1] - values[i]);
    const double slope = (values[i + 1] - values[i]) / axis.dx;
    return std::pair<double, double>(val, slope);
  };
  p.value = [interp](const Eigen::VectorXd& x) { return interp(x[0]).first; };
  p.gradient = [interp](const Eigen::VectorXd& x) {
    Eigen::VectorXd g(1);
    g[0] = interp(x[0]).second;
    return g;
  };
  return p;
}

namespace detail_pot {
inline constexpr double two_pi() { return 2.0 * 3.14159265358979323846; }
}  // namespace detail_pot

inline double maxwellian(const Eigen::VectorXd& v) {
  const int n = static_cast<int>(v.size());
  return std::exp(-0.5 * v.squaredNorm()) /
         std::pow(detail_pot::two_pi(), 0.5 * n);
}

inline double maxwellian1(double v) {
  return std::exp(-0.5 * v * v) / std::sqrt(detail_pot::two_pi());
}

// Velocity weights e^{-v^2/2} at cell centers, normalized so that
// sum * dv == 1 exactly. The discrete equilibrium profile of the collision
// step, and the reference for local-equilibrium comparisons.
inline Eigen::ArrayXd discrete_maxwellian(const Axis& v_axis) {
  Eigen::ArrayXd m(v_axis.cells);
  for (int j = 0; j < v_axis.cells; ++j) {
    const double v = v_axis.center(j);
    m[j] = std::exp(-0.5 * v * v);
  }
  m /= m.sum() * v_axis.dx;
  return m;
}

// Spatial equilibrium weights on a 1D grid plus the full-phase-space
// partition value Z = (2 pi)^{n/2} * sum e^{-V} dx.
struct GibbsState {
  Axis axis;
  Eigen::ArrayXd weights;      // e^{-V(x_i)}, unnormalized
  Eigen::ArrayXd density;      // weights / (sum * dx), integrates to 1
  double partition = 0.0;      // Z including the velocity Gaussian factor
  double log_partition = 0.0;
};

inline GibbsState gibbs_state(const Potential& potential, const Axis& axis) {
  if (potential.dim != 1)
    throw ConfigInvalid("grid equilibrium weights are one dimensional");
  GibbsState g;
  g.axis = axis;
  g.weights.resize(axis.cells);
  for (int i = 0; i < axis.cells; ++i)
    g.weights[i] = std::exp(-potential.value1(axis.center(i)));
  if (!g.weights.isFinite().all())
    throw NotIntegrable("equilibrium weight overflow: potential unbounded below");
  const double total = g.weights.sum() * axis.dx;
  if (!(total > 0.0)) throw NotIntegrable("equilibrium weights vanish");
  // Outermost-layer mass as the escaping-tail estimate.
  const double edge =
      (g.weights[0] + g.weights[axis.cells - 1]) * axis.dx / total;
  if (edge > kTailTol)
    throw NotIntegrable("equilibrium tail mass above tolerance: enlarge box "
                        "or check confinement");
  g.density = g.weights / total;
  g.partition = std::sqrt(detail_pot::two_pi()) * total;
  g.log_partition = std::log(g.partition);
  return g;
}

}  // namespace hydrolim
