#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <sstream>
#include <vector>

#include "hydrolim/errors.hpp"

namespace hydrolim {

inline constexpr double kPi = 3.14159265358979323846;

// Relative spectral tolerances, scaled by the Frobenius norm of the matrix
// under test.
inline constexpr double kPsdTolRel = 1e-10;
inline constexpr double kInvertTolRel = 1e-12;

struct SphereConfiguration {
  std::vector<Eigen::Vector3d> centers;
  double radius = 1.0;
  double viscosity = 1.0;

  SphereConfiguration(std::vector<Eigen::Vector3d> centers_, double radius_,
                      double viscosity_)
      : centers(std::move(centers_)), radius(radius_), viscosity(viscosity_) {
    if (centers.empty()) throw ConfigInvalid("sphere configuration is empty");
    if (!(radius > 0.0)) throw ConfigInvalid("sphere radius must be positive");
    if (!(viscosity > 0.0)) throw ConfigInvalid("viscosity must be positive");
    for (const auto& c : centers)
      if (!c.allFinite()) throw ConfigInvalid("sphere center is not finite");
  }

  int count() const { return static_cast<int>(centers.size()); }
};

inline Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& a) {
  return 0.5 * (a + a.transpose());
}

inline Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> spectrum(
    const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrized(a));
  if (es.info() != Eigen::Success)
    throw LinearSolveFailure("eigendecomposition did not converge");
  return es;
}

inline double min_eigenvalue(const Eigen::MatrixXd& a) {
  return spectrum(a).eigenvalues().minCoeff();
}

inline double max_eigenvalue(const Eigen::MatrixXd& a) {
  return spectrum(a).eigenvalues().maxCoeff();
}

// Symmetric PSD square root. Eigenvalues in [-tol, 0) are clamped to zero;
// anything below -tol is a genuine violation.
inline Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& a) {
  const auto es = spectrum(a);
  const double tol = kPsdTolRel * std::max(1e-300, a.norm());
  Eigen::VectorXd lam = es.eigenvalues();
  for (int i = 0; i < lam.size(); ++i) {
    if (lam[i] < -tol) {
      std::ostringstream msg;
      msg << "matrix is not PSD: eigenvalue " << lam[i] << " < -" << tol;
      throw NotPSD(msg.str());
    }
    lam[i] = std::sqrt(std::max(0.0, lam[i]));
  }
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

// Friction is the spectral inverse of a strictly positive mobility.
inline Eigen::MatrixXd friction_from_mobility(const Eigen::MatrixXd& mobility) {
  const auto es = spectrum(mobility);
  const double tol = kInvertTolRel * std::max(1e-300, mobility.norm());
  const double lam_min = es.eigenvalues().minCoeff();
  if (lam_min <= tol) {
    std::ostringstream msg;
    msg << "mobility is numerically singular: min eigenvalue " << lam_min;
    throw SingularMobility(msg.str());
  }
  Eigen::VectorXd inv = es.eigenvalues().cwiseInverse();
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

namespace detail {

inline Eigen::Matrix3d outer_unit(const Eigen::Vector3d& rhat) {
  return rhat * rhat.transpose();
}

}  // namespace detail

struct OseenResult {
  Eigen::MatrixXd mobility;
  double min_eigenvalue = 0.0;
  bool degeneracy_warning = false;  // min eigenvalue < 0: tensor not PSD here
};

// Point-force (Stokeslet) pair mobility. Not PSD for close centers; the
// caller gets a warning flag, not an error.
inline OseenResult build_oseen(const SphereConfiguration& cfg) {
  const int n = cfg.count();
  const double a = cfg.radius, eta = cfg.viscosity;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3 * n, 3 * n);
  const Eigen::Matrix3d self =
      Eigen::Matrix3d::Identity() / (6.0 * kPi * eta * a);
  for (int i = 0; i < n; ++i) m.block<3, 3>(3 * i, 3 * i) = self;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const Eigen::Vector3d r = cfg.centers[i] - cfg.centers[j];
      const double dist = r.norm();
      if (dist == 0.0)
        throw CoincidentCenters("point-force tensor undefined at distance 0");
      const Eigen::Vector3d rhat = r / dist;
      const Eigen::Matrix3d block =
          (Eigen::Matrix3d::Identity() + detail::outer_unit(rhat)) /
          (8.0 * kPi * eta * dist);
      m.block<3, 3>(3 * i, 3 * j) = block;
      m.block<3, 3>(3 * j, 3 * i) = block;
    }
  }
  OseenResult out;
  out.mobility = std::move(m);
  out.min_eigenvalue = min_eigenvalue(out.mobility);
  out.degeneracy_warning = out.min_eigenvalue < 0.0;
  return out;
}

// Finite-size pair mobility with overlap correction; PSD for every
// configuration, overlapping and coincident centers included.
inline Eigen::Matrix3d rpy_pair_block(const Eigen::Vector3d& r, double a,
                                      double eta) {
  const double dist = r.norm();
  if (dist == 0.0) return Eigen::Matrix3d::Identity() / (6.0 * kPi * eta * a);
  const Eigen::Vector3d rhat = r / dist;
  const Eigen::Matrix3d rr = detail::outer_unit(rhat);
  if (dist > 2.0 * a) {
    const double aa = a * a / (dist * dist);
    return ((1.0 + (2.0 / 3.0) * aa) * Eigen::Matrix3d::Identity() +
            (1.0 - 2.0 * aa) * rr) /
           (8.0 * kPi * eta * dist);
  }
  const double s = dist / a;
  return ((1.0 - 9.0 * s / 32.0) * Eigen::Matrix3d::Identity() +
          (3.0 * s / 32.0) * rr) /
         (6.0 * kPi * eta * a);
}

inline Eigen::MatrixXd build_rpy(const SphereConfiguration& cfg) {
  const int n = cfg.count();
  const double a = cfg.radius, eta = cfg.viscosity;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3 * n, 3 * n);
  const Eigen::Matrix3d self =
      Eigen::Matrix3d::Identity() / (6.0 * kPi * eta * a);
  for (int i = 0; i < n; ++i) m.block<3, 3>(3 * i, 3 * i) = self;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const Eigen::Matrix3d block =
          rpy_pair_block(cfg.centers[i] - cfg.centers[j], a, eta);
      m.block<3, 3>(3 * i, 3 * j) = block;
      m.block<3, 3>(3 * j, 3 * i) = block;
    }
  }
  const double lam_min = min_eigenvalue(m);
  const double tol = kPsdTolRel * m.norm();
  if (lam_min < -tol) {
    std::ostringstream msg;
    msg << "pair mobility lost positivity: min eigenvalue " << lam_min;
    throw NumericalPSDViolation(msg.str());
  }
  return m;
}

// Smallest mobility eigenvalue of a two-sphere configuration at each center
// distance d. Near contact of centers this closes the gap linearly in d.
inline std::vector<double> min_eigenvalue_scaling(
    double a, double eta, const std::vector<double>& distances) {
  std::vector<double> out;
  out.reserve(distances.size());
  for (double d : distances) {
    if (!(d > 0.0)) throw ConfigInvalid("center distance must be positive");
    SphereConfiguration cfg({{0.0, 0.0, 0.0}, {d, 0.0, 0.0}}, a, eta);
    out.push_back(min_eigenvalue(build_rpy(cfg)));
  }
  return out;
}

// Friction field for the particle dynamics: x in R^dim -> SPD matrix G(x).
struct FrictionModel {
  int dim = 0;
  bool constant = false;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> eval;

  Eigen::MatrixXd operator()(const Eigen::VectorXd& x) const {
    return eval(x);
  }
};

inline FrictionModel isotropic_friction(int dim, double gamma) {
  if (!(gamma > 0.0))
    throw NonPositiveGamma("isotropic friction needs gamma > 0");
  FrictionModel m;
  m.dim = dim;
  m.constant = true;
  m.eval = [dim, gamma](const Eigen::VectorXd&) {
    return (gamma * Eigen::MatrixXd::Identity(dim, dim)).eval();
  };
  return m;
}

// Positions interpreted as stacked sphere centers in R^{3N}.
inline FrictionModel rpy_friction(int spheres, double a, double eta) {
  if (spheres < 1) throw ConfigInvalid("need at least one sphere");
  FrictionModel m;
  m.dim = 3 * spheres;
  m.constant = false;
  m.eval = [spheres, a, eta](const Eigen::VectorXd& x) {
    std::vector<Eigen::Vector3d> centers(spheres);
    for (int i = 0; i < spheres; ++i) centers[i] = x.segment<3>(3 * i);
    return friction_from_mobility(build_rpy({centers, a, eta}));
  };
  return m;
}

}  // namespace hydrolim
