#pragma once

#include <cmath>
#include <random>
#include <span>
#include <string>

#include "geoflow/antisym.hpp"
#include "geoflow/errors.hpp"
#include "geoflow/vec.hpp"

namespace geoflow {

// Default tolerances; every entry point that uses one takes it as a parameter
// so the CLI can override.
inline constexpr double kTolConstraint = 1e-9;
inline constexpr double kTolIdentity = 1e-10;
inline constexpr double kEpsB = 1e-14;

/// Ellipsoid sum_j x_j^2 / a_j = 1 in R^n. a_j are the squared semi-axes.
struct Ellipsoid {
  Vec a;
  bool distinct = true;  // all a_j pairwise distinct; gates every 1/(a_j - a_k) path

  std::size_t dim() const { return a.size(); }
};

/// Ambient position and velocity in physical time.
struct PhaseState {
  Vec x;
  Vec y;
};

/// The scalar forms entering the constrained equations of motion.
struct ScalarForms {
  double q0;        // sum x_j^2 / a_j
  double A;         // sum x_j^2 / a_j^2
  double B;         // sum y_j^2 / a_j
  double nu;        // B / A
  double tangency;  // sum x_j y_j / a_j
};

/// Clebsch variables: velocity y and angular momentum tensor l, plus the
/// carried local time tau and reconstructed physical time t.
struct ClebschState {
  Vec y;
  AntisymMatrix l;
  double tau = 0.0;
  double t = 0.0;
};

inline Ellipsoid validate_ellipsoid(Vec a) {
  if (a.size() < 2) fail(ErrorCode::InvalidDimension, "dimension must be >= 2, got " + std::to_string(a.size()));
  for (std::size_t j = 0; j < a.size(); ++j)
    if (!(a[j] > 0.0))
      fail(ErrorCode::NonPositiveAxis, "a[" + std::to_string(j) + "] = " + std::to_string(a[j]));
  bool distinct = true;
  for (std::size_t j = 0; j + 1 < a.size() && distinct; ++j)
    for (std::size_t k = j + 1; k < a.size(); ++k)
      if (a[j] == a[k]) {
        distinct = false;
        break;
      }
  return Ellipsoid{std::move(a), distinct};
}

inline void require_distinct(const Ellipsoid& e, const char* where) {
  if (!e.distinct) fail(ErrorCode::DuplicateAxis, std::string(where) + " requires pairwise distinct axes");
}

inline double q0_of(const Ellipsoid& e, std::span<const double> x) {
  double s = 0.0;
  for (std::size_t j = 0; j < e.dim(); ++j) s += x[j] * x[j] / e.a[j];
  return s;
}

inline double a_form(const Ellipsoid& e, std::span<const double> x) {
  double s = 0.0;
  for (std::size_t j = 0; j < e.dim(); ++j) s += x[j] * x[j] / (e.a[j] * e.a[j]);
  return s;
}

inline double b_form(const Ellipsoid& e, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t j = 0; j < e.dim(); ++j) s += y[j] * y[j] / e.a[j];
  return s;
}

inline double tangency_form(const Ellipsoid& e, std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t j = 0; j < e.dim(); ++j) s += x[j] * y[j] / e.a[j];
  return s;
}

inline ScalarForms forms(const Ellipsoid& e, const PhaseState& s) {
  ScalarForms f{};
  f.q0 = q0_of(e, s.x);
  f.A = a_form(e, s.x);
  f.B = b_form(e, s.y);
  f.tangency = tangency_form(e, s.x, s.y);
  if (f.A == 0.0) fail(ErrorCode::DegenerateForm, "A(x) = 0 (x = 0)");
  f.nu = f.B / f.A;
  return f;
}

/// Rescales x onto the constraint surface and removes the tangency component
/// of y. ||y|| is left alone; energy is monitored, not enforced.
inline PhaseState project_constraints(const Ellipsoid& e, const PhaseState& s) {
  const double q0 = q0_of(e, s.x);
  if (q0 == 0.0) fail(ErrorCode::DegenerateForm, "Q_0(x) = 0, cannot project");
  PhaseState out = s;
  const double r = 1.0 / std::sqrt(q0);
  for (double& xj : out.x) xj *= r;
  const double A = a_form(e, out.x);
  const double tang = tangency_form(e, out.x, out.y);
  const double c = tang / A;
  for (std::size_t j = 0; j < e.dim(); ++j) out.y[j] -= c * out.x[j] / e.a[j];
  return out;
}

/// Draws a random on-manifold tangent state: x_j = sqrt(a_j) g_j / ||g|| for a
/// standard Gaussian g (so Q_0(x) = 1 exactly), y Gaussian then
/// tangency-projected and rescaled to the requested speed.
inline PhaseState sample_state(const Ellipsoid& e, std::mt19937_64& rng, double speed = 1.0) {
  const std::size_t n = e.dim();
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int attempt = 0; attempt < 16; ++attempt) {
    Vec g(n);
    for (double& v : g) v = gauss(rng);
    const double gn = norm2(g);
    if (gn < 1e-12) continue;
    PhaseState s;
    s.x.resize(n);
    for (std::size_t j = 0; j < n; ++j) s.x[j] = std::sqrt(e.a[j]) * g[j] / gn;
    s.y.resize(n);
    for (double& v : s.y) v = gauss(rng);
    s = project_constraints(e, s);
    const double yn = norm2(s.y);
    if (yn < 1e-12) continue;
    scale(s.y, speed / yn);
    return s;
  }
  fail(ErrorCode::ResamplingFailure, "no usable tangent velocity after 16 attempts");
}

inline void require_on_manifold(const Ellipsoid& e, const PhaseState& s, double tol, const char* where) {
  const double q0_res = std::abs(q0_of(e, s.x) - 1.0);
  const double tan_res = std::abs(tangency_form(e, s.x, s.y));
  if (q0_res > tol || tan_res > tol)
    fail(ErrorCode::ConstraintViolation, std::string(where) + ": |Q_0 - 1| = " + std::to_string(q0_res) +
                                             ", |tangency| = " + std::to_string(tan_res));
}

/// l_jk = x_j y_k - x_k y_j, tau = t = 0.
inline ClebschState to_clebsch(const Ellipsoid& e, const PhaseState& s, double tol_constraint = kTolConstraint) {
  require_on_manifold(e, s, tol_constraint, "to_clebsch");
  return ClebschState{s.y, AntisymMatrix::wedge(s.x, s.y), 0.0, 0.0};
}

/// x_j = (1/B(y)) sum_k l_jk y_k / a_k. Valid on the rank-2 locus descending
/// from an on-manifold state.
inline Vec reconstruct_x(const Ellipsoid& e, std::span<const double> y, const AntisymMatrix& l,
                         double eps_b = kEpsB) {
  const std::size_t n = e.dim();
  const double B = b_form(e, y);
  if (B <= eps_b) fail(ErrorCode::ZeroVelocity, "B(y) <= eps_B, reconstruction undefined");
  Vec x(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += l(j, k) * y[k] / e.a[k];
    x[j] = s / B;
  }
  return x;
}

inline Vec reconstruct_x(const Ellipsoid& e, const ClebschState& c, double eps_b = kEpsB) {
  return reconstruct_x(e, c.y, c.l, eps_b);
}

/// Joachimsthal integral I(x,y) = A(x) B(y), conserved along geodesics.
inline double joachimsthal(const Ellipsoid& e, const PhaseState& s) {
  return a_form(e, s.x) * b_form(e, s.y);
}

}  // namespace geoflow
