#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "geoflow/conserved.hpp"
#include "geoflow/ellipsoid.hpp"
#include "geoflow/errors.hpp"
#include "geoflow/ode.hpp"
#include "geoflow/vec.hpp"

namespace geoflow {

struct PhaseDerivative {
  Vec dx;
  Vec dy;
};

/// dx_j/dt = y_j, dy_j/dt = -nu(x,y) x_j/a_j.
inline PhaseDerivative direct_rhs(const Ellipsoid& e, const PhaseState& s) {
  const ScalarForms f = forms(e, s);  // DegenerateForm if A = 0
  PhaseDerivative d;
  d.dx = s.y;
  d.dy.resize(e.dim());
  for (std::size_t j = 0; j < e.dim(); ++j) d.dy[j] = -f.nu * s.x[j] / e.a[j];
  return d;
}

/// The same field over the flat layout [x (n), y (n)].
inline OdeProblem direct_problem(const Ellipsoid& e) {
  const std::size_t n = e.dim();
  OdeProblem p;
  p.dimension = 2 * n;
  p.rhs = [&e, n](double, std::span<const double> s, std::span<double> d) {
    double A = 0.0, B = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      A += s[j] * s[j] / (e.a[j] * e.a[j]);
      B += s[n + j] * s[n + j] / e.a[j];
    }
    if (A == 0.0) fail(ErrorCode::DegenerateForm, "A(x) = 0 along direct flow");
    const double nu = B / A;
    for (std::size_t j = 0; j < n; ++j) {
      d[j] = s[n + j];
      d[n + j] = -nu * s[j] / e.a[j];
    }
  };
  return p;
}

namespace detail {

/// Drives the direct flow with periodic constraint projection; on_step sees
/// every accepted step (before the projection touches the endpoint state).
template <typename Stepper, typename OnStep>
PhaseState run_direct(const Ellipsoid& e, const PhaseState& s0, double t_end, const StepControl& ctl,
                      std::size_t project_every, OnStep&& on_step, double tol_constraint) {
  const std::size_t n = e.dim();
  const OdeProblem p = direct_problem(e);
  Vec flat(2 * n);
  std::copy(s0.x.begin(), s0.x.end(), flat.begin());
  std::copy(s0.y.begin(), s0.y.end(), flat.begin() + n);

  Stepper stepper(p, ctl, 0.0, flat);
  std::size_t accepted = 0;
  PhaseState cur;
  while (stepper.time() < t_end) {
    const StepRecord r = stepper.advance(t_end);
    on_step(r);
    if (project_every > 0 && ++accepted % project_every == 0) {
      auto st = stepper.state();
      cur.x.assign(st.begin(), st.begin() + n);
      cur.y.assign(st.begin() + n, st.end());
      cur = project_constraints(e, cur);
      const double res =
          std::max(std::abs(q0_of(e, cur.x) - 1.0), std::abs(tangency_form(e, cur.x, cur.y)));
      if (res > 1e3 * tol_constraint)
        fail(ErrorCode::ConstraintViolation, "post-projection residual " + std::to_string(res));
      std::copy(cur.x.begin(), cur.x.end(), flat.begin());
      std::copy(cur.y.begin(), cur.y.end(), flat.begin() + n);
      stepper.overwrite_state(flat);
    }
  }
  auto st = stepper.state();
  return PhaseState{Vec(st.begin(), st.begin() + n), Vec(st.begin() + n, st.end())};
}

}  // namespace detail

/// Integrates the physical-time geodesic equations, re-projecting the
/// constraints every project_every accepted steps, and emits dense-output
/// samples (with invariant snapshots) every stride time units.
inline std::vector<TrajectorySample> integrate_direct(const Ellipsoid& e, const PhaseState& s0,
                                                      double t_end, const StepControl& ctl,
                                                      std::size_t project_every, double stride,
                                                      double tol_constraint = kTolConstraint) {
  if (!(t_end > 0.0)) fail(ErrorCode::InvalidConfig, "t_end must be positive");
  if (!(stride > 0.0)) fail(ErrorCode::InvalidConfig, "stride must be positive");
  require_on_manifold(e, s0, tol_constraint, "integrate_direct");
  const std::size_t n = e.dim();

  std::vector<TrajectorySample> out;
  auto emit = [&](double t, std::span<const double> flat) {
    TrajectorySample ts;
    ts.t = t;
    ts.x.assign(flat.begin(), flat.begin() + n);
    ts.y.assign(flat.begin() + n, flat.end());
    ts.inv = make_snapshot(e, ts.x, ts.y, AntisymMatrix::wedge(ts.x, ts.y));
    out.push_back(std::move(ts));
  };

  Vec flat0(2 * n);
  std::copy(s0.x.begin(), s0.x.end(), flat0.begin());
  std::copy(s0.y.begin(), s0.y.end(), flat0.begin() + n);
  emit(0.0, flat0);

  double next = stride;
  const double span_eps = 1e-12 * (t_end + stride);
  Vec buf(2 * n);
  auto on_step = [&](const StepRecord& r) {
    while (next < r.t1 - span_eps) {
      hermite_eval(r, next, buf);
      emit(next, buf);
      next += stride;
    }
  };

  PhaseState final_state =
      ctl.mode == StepMode::adaptive
          ? detail::run_direct<AdaptiveStepper>(e, s0, t_end, ctl, project_every, on_step, tol_constraint)
          : detail::run_direct<FixedStepper>(e, s0, t_end, ctl, project_every, on_step, tol_constraint);

  Vec flat1(2 * n);
  std::copy(final_state.x.begin(), final_state.x.end(), flat1.begin());
  std::copy(final_state.y.begin(), final_state.y.end(), flat1.begin() + n);
  emit(t_end, flat1);
  return out;
}

/// Direct trajectory evaluated at prescribed physical times (dense output
/// inside accepted steps). Times must be increasing, within [0, t_end].
inline std::vector<PhaseState> direct_states_at_times(const Ellipsoid& e, const PhaseState& s0,
                                                      const std::vector<double>& times,
                                                      const StepControl& ctl,
                                                      std::size_t project_every = 1,
                                                      double tol_constraint = kTolConstraint) {
  for (std::size_t i = 0; i + 1 < times.size(); ++i)
    if (!(times[i] < times[i + 1])) fail(ErrorCode::InvalidConfig, "times must be strictly increasing");
  if (!times.empty() && times.front() < 0.0) fail(ErrorCode::InvalidConfig, "times must be >= 0");
  require_on_manifold(e, s0, tol_constraint, "direct_states_at_times");
  const std::size_t n = e.dim();

  std::vector<PhaseState> out;
  std::size_t next = 0;
  while (next < times.size() && times[next] <= 0.0) {
    out.push_back(s0);
    ++next;
  }
  if (next == times.size()) return out;

  const double t_end = times.back();
  Vec buf(2 * n);
  auto on_step = [&](const StepRecord& r) {
    while (next < times.size() && times[next] <= r.t1) {
      hermite_eval(r, times[next], buf);
      out.push_back(PhaseState{Vec(buf.begin(), buf.begin() + n), Vec(buf.begin() + n, buf.end())});
      ++next;
    }
  };
  ctl.mode == StepMode::adaptive
      ? detail::run_direct<AdaptiveStepper>(e, s0, t_end, ctl, project_every, on_step, tol_constraint)
      : detail::run_direct<FixedStepper>(e, s0, t_end, ctl, project_every, on_step, tol_constraint);
  if (next < times.size()) fail(ErrorCode::NonFiniteState, "integration ended before the last requested time");
  return out;
}

/// Endpoint-only variant (used by the shooting solver).
inline PhaseState integrate_direct_endpoint(const Ellipsoid& e, const PhaseState& s0, double t_end,
                                            const StepControl& ctl, std::size_t project_every = 1,
                                            double tol_constraint = kTolConstraint) {
  if (!(t_end > 0.0)) fail(ErrorCode::InvalidConfig, "t_end must be positive");
  require_on_manifold(e, s0, tol_constraint, "integrate_direct_endpoint");
  auto noop = [](const StepRecord&) {};
  return ctl.mode == StepMode::adaptive
             ? detail::run_direct<AdaptiveStepper>(e, s0, t_end, ctl, project_every, noop, tol_constraint)
             : detail::run_direct<FixedStepper>(e, s0, t_end, ctl, project_every, noop, tol_constraint);
}

}  // namespace geoflow
