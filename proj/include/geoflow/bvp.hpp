#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "geoflow/direct_flow.hpp"
#include "geoflow/ellipsoid.hpp"
#include "geoflow/errors.hpp"
#include "geoflow/ode.hpp"
#include "geoflow/vec.hpp"

namespace geoflow {

/// Two-point geodesic problem: connect p to q by shooting over the direct
/// flow. Unknowns are the unit tangent direction at p and the arc length T
/// (shots are unit speed).
struct ShootingProblem {
  Ellipsoid e;
  Vec p;
  Vec q;
  double tol_endpoint = 1e-8;
  std::size_t max_iter = 100;
  StepControl ctl = tight_control();
  std::size_t project_every = 1;
  double tol_constraint = kTolConstraint;

  static StepControl tight_control() {
    StepControl c;
    c.rtol = 1e-12;
    c.atol = 1e-14;
    return c;
  }
};

inline ShootingProblem make_shooting_problem(Ellipsoid e, Vec p, Vec q, double tol_endpoint = 1e-8,
                                             std::size_t max_iter = 100) {
  ShootingProblem prob;
  prob.e = std::move(e);
  prob.p = std::move(p);
  prob.q = std::move(q);
  prob.tol_endpoint = tol_endpoint;
  prob.max_iter = max_iter;
  if (prob.p.size() != prob.e.dim() || prob.q.size() != prob.e.dim())
    fail(ErrorCode::InvalidConfig, "p and q must have the ellipsoid dimension");
  for (const Vec* pt : {&prob.p, &prob.q}) {
    const double res = std::abs(q0_of(prob.e, *pt) - 1.0);
    if (res > prob.tol_constraint)
      fail(ErrorCode::ConstraintViolation, "endpoint off-manifold, |Q_0 - 1| = " + std::to_string(res));
  }
  Vec d = prob.q;
  for (std::size_t j = 0; j < d.size(); ++j) d[j] -= prob.p[j];
  if (norm2(d) < 1e-14) fail(ErrorCode::InvalidConfig, "p and q must differ");
  return prob;
}

namespace detail {

inline Vec tangent_project(const Ellipsoid& e, const Vec& p, const Vec& w) {
  const double A = a_form(e, p);
  const double c = tangency_form(e, p, w) / A;
  Vec out = w;
  for (std::size_t j = 0; j < out.size(); ++j) out[j] -= c * p[j] / e.a[j];
  return out;
}

/// Solve M x = b in place by Gaussian elimination with partial pivoting
/// (M is dim x dim row-major, clobbered).
inline Vec solve_dense(std::vector<double> M, Vec b) {
  const std::size_t dim = b.size();
  for (std::size_t col = 0; col < dim; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < dim; ++r)
      if (std::abs(M[r * dim + col]) > std::abs(M[piv * dim + col])) piv = r;
    if (piv != col) {
      for (std::size_t c = 0; c < dim; ++c) std::swap(M[col * dim + c], M[piv * dim + c]);
      std::swap(b[col], b[piv]);
    }
    const double d = M[col * dim + col];
    if (d == 0.0) fail(ErrorCode::NoConvergence, "singular normal equations");
    for (std::size_t r = col + 1; r < dim; ++r) {
      const double f = M[r * dim + col] / d;
      if (f == 0.0) continue;
      for (std::size_t c = col; c < dim; ++c) M[r * dim + c] -= f * M[col * dim + c];
      b[r] -= f * b[col];
    }
  }
  Vec x(dim);
  for (std::size_t r = dim; r-- > 0;) {
    double s = b[r];
    for (std::size_t c = r + 1; c < dim; ++c) s -= M[r * dim + c] * x[c];
    x[r] = s / M[r * dim + r];
  }
  return x;
}

}  // namespace detail

/// Componentwise endpoint miss q - x(T) for a unit-speed shot along v. The
/// direction is tangent-projected and normalized before integrating, so
/// finite-difference probes of nearby v are well-defined.
inline Vec shoot(const ShootingProblem& prob, const Vec& v, double T) {
  if (T < 0.0) fail(ErrorCode::InvalidConfig, "shot length must be nonnegative");
  Vec u = detail::tangent_project(prob.e, prob.p, v);
  const double nu = norm2(u);
  if (nu < 1e-12) fail(ErrorCode::ConstraintViolation, "shot direction degenerates after projection");
  scale(u, 1.0 / nu);

  Vec miss = prob.q;
  if (T == 0.0) {
    for (std::size_t j = 0; j < miss.size(); ++j) miss[j] -= prob.p[j];
    return miss;
  }
  const PhaseState end =
      integrate_direct_endpoint(prob.e, PhaseState{prob.p, u}, T, prob.ctl, prob.project_every,
                                prob.tol_constraint);
  for (std::size_t j = 0; j < miss.size(); ++j) miss[j] -= end.x[j];
  return miss;
}

struct BvpSolution {
  Vec v;
  double T = 0.0;
  std::size_t iterations = 0;
  double miss_norm = 0.0;
  std::vector<TrajectorySample> trajectory;
};

/// Damped Gauss-Newton (Levenberg-Marquardt) over (v, T). Returns the locally
/// shortest representative found; no global-minimality claim.
inline BvpSolution solve_geodesic_bvp(const ShootingProblem& prob, double trajectory_stride = 0.0) {
  const std::size_t n = prob.e.dim();
  const Ellipsoid& e = prob.e;

  // initial guess: tangent projection of the chord, chord length for T
  Vec chord = prob.q;
  for (std::size_t j = 0; j < n; ++j) chord[j] -= prob.p[j];
  const double chord_len = norm2(chord);
  Vec v = detail::tangent_project(e, prob.p, chord);
  if (norm2(v) < 1e-10 * chord_len) {
    if (n > 2)
      fail(ErrorCode::DegenerateChord, "chord is normal to the surface at p (antipodal-like pair)");
    // n = 2: the unit tangent at p is unique up to sign, no direction ambiguity
    const Vec g{prob.p[0] / e.a[0], prob.p[1] / e.a[1]};
    v = Vec{-g[1], g[0]};
  }
  scale(v, 1.0 / norm2(v));
  double T = chord_len;
  const double T_floor = 1e-9;

  Vec miss = shoot(prob, v, T);
  double best = norm2(miss);
  double lambda = 1e-3;
  const double fd_step = 1e-7;
  std::size_t iter = 0;

  for (; iter < prob.max_iter; ++iter) {
    if (best < prob.tol_endpoint) break;

    // forward-difference Jacobian of the miss over (v_0..v_{n-1}, T)
    const std::size_t cols = n + 1;
    std::vector<double> J(n * cols);
    for (std::size_t c = 0; c < n; ++c) {
      Vec vp = v;
      vp[c] += fd_step;
      const Vec mp = shoot(prob, vp, T);
      for (std::size_t r = 0; r < n; ++r) J[r * cols + c] = (mp[r] - miss[r]) / fd_step;
    }
    {
      const Vec mp = shoot(prob, v, T + fd_step);
      for (std::size_t r = 0; r < n; ++r) J[r * cols + n] = (mp[r] - miss[r]) / fd_step;
    }

    std::vector<double> JtJ(cols * cols, 0.0);
    Vec Jtm(cols, 0.0);
    for (std::size_t a = 0; a < cols; ++a) {
      for (std::size_t b = 0; b < cols; ++b) {
        double s = 0.0;
        for (std::size_t r = 0; r < n; ++r) s += J[r * cols + a] * J[r * cols + b];
        JtJ[a * cols + b] = s;
      }
      double s = 0.0;
      for (std::size_t r = 0; r < n; ++r) s += J[r * cols + a] * miss[r];
      Jtm[a] = s;
    }

    bool improved = false;
    for (int damp = 0; damp < 24 && !improved; ++damp) {
      std::vector<double> Mj = JtJ;
      for (std::size_t a = 0; a < cols; ++a)
        Mj[a * cols + a] += lambda * std::max(JtJ[a * cols + a], 1e-12);
      Vec delta;
      try {
        delta = detail::solve_dense(std::move(Mj), Jtm);
      } catch (const Error&) {
        lambda *= 10.0;
        continue;
      }

      Vec v_try = v;
      for (std::size_t j = 0; j < n; ++j) v_try[j] -= delta[j];
      v_try = detail::tangent_project(e, prob.p, v_try);
      const double nv = norm2(v_try);
      if (nv < 1e-12) {
        lambda *= 10.0;
        continue;
      }
      scale(v_try, 1.0 / nv);
      const double T_try = std::max(T - delta[n], T_floor);

      const Vec m_try = shoot(prob, v_try, T_try);
      const double cost = norm2(m_try);
      if (cost < best) {
        v = std::move(v_try);
        T = T_try;
        miss = m_try;
        best = cost;
        lambda = std::max(lambda / 3.0, 1e-12);
        improved = true;
      } else {
        lambda *= 10.0;
      }
    }
    if (!improved && best >= prob.tol_endpoint)
      fail(ErrorCode::NoConvergence,
           "stalled at miss " + std::to_string(best) + " after " + std::to_string(iter + 1) + " iterations");
  }
  if (best >= prob.tol_endpoint)
    fail(ErrorCode::NoConvergence, "miss " + std::to_string(best) + " after " +
                                       std::to_string(prob.max_iter) + " iterations");

  BvpSolution sol;
  sol.v = detail::tangent_project(e, prob.p, v);
  scale(sol.v, 1.0 / norm2(sol.v));
  sol.T = T;
  sol.iterations = iter;
  sol.miss_norm = best;
  const double stride = trajectory_stride > 0.0 ? trajectory_stride : T / 200.0;
  sol.trajectory =
      integrate_direct(e, PhaseState{prob.p, sol.v}, T, prob.ctl, prob.project_every, stride,
                       prob.tol_constraint);
  return sol;
}

}  // namespace geoflow
