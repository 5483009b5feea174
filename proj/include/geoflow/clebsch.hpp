#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "geoflow/conserved.hpp"
#include "geoflow/ellipsoid.hpp"
#include "geoflow/errors.hpp"
#include "geoflow/ode.hpp"
#include "geoflow/vec.hpp"

namespace geoflow {

/// omega_jk = l_jk / (a_j a_k). Well-defined for any axes, but every caller
/// sits on the distinct-axis path, so refuse early.
inline AntisymMatrix omega_from_l(const Ellipsoid& e, const AntisymMatrix& l) {
  require_distinct(e, "omega_from_l");
  const std::size_t n = e.dim();
  AntisymMatrix w(n);
  for (std::size_t j = 0; j + 1 < n; ++j)
    for (std::size_t k = j + 1; k < n; ++k) w.set(j, k, l(j, k) / (e.a[j] * e.a[k]));
  return w;
}

namespace detail {

/// dy_j = -sum_k omega_jk y_k; dl_jk = [l, omega]_jk - (1/a_j - 1/a_k) y_j y_k.
inline void clebsch_derivative(const Ellipsoid& e, std::span<const double> y, const AntisymMatrix& l,
                               std::span<double> dy, AntisymMatrix& dl) {
  const std::size_t n = e.dim();
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += l(j, k) / (e.a[j] * e.a[k]) * y[k];
    dy[j] = -s;
  }
  for (std::size_t j = 0; j + 1 < n; ++j)
    for (std::size_t k = j + 1; k < n; ++k) {
      double comm = 0.0;
      for (std::size_t m = 0; m < n; ++m)
        comm += l(j, m) * l(m, k) / (e.a[m] * e.a[k]) - l(j, m) / (e.a[j] * e.a[m]) * l(m, k);
      dl.set(j, k, comm - (1.0 / e.a[j] - 1.0 / e.a[k]) * y[j] * y[k]);
    }
}

}  // namespace detail

struct ClebschDerivative {
  Vec dy;
  AntisymMatrix dl;
};

inline ClebschDerivative clebsch_rhs(const Ellipsoid& e, const ClebschState& c) {
  require_distinct(e, "clebsch_rhs");
  ClebschDerivative d{Vec(e.dim()), AntisymMatrix(e.dim())};
  detail::clebsch_derivative(e, c.y, c.l, d.dy, d.dl);
  return d;
}

/// Clebsch variables plus the conserved Joachimsthal constant c^2 fixed at
/// initialization; dt/dtau = A(x) = I0 / B(y).
struct AugmentedClebschState {
  ClebschState c;
  double I0 = 0.0;
};

inline AugmentedClebschState augment(const Ellipsoid& e, const PhaseState& s0,
                                     double tol_constraint = kTolConstraint) {
  AugmentedClebschState a{to_clebsch(e, s0, tol_constraint), joachimsthal(e, s0)};
  if (!(a.I0 > 0.0)) fail(ErrorCode::ZeroVelocity, "Joachimsthal constant must be positive");
  return a;
}

/// Flat layout [y (n), packed l (n(n-1)/2), t (1)] in local time tau.
/// The returned problem references the ellipsoid.
inline OdeProblem clebsch_problem(const Ellipsoid& e, double I0, double eps_b = kEpsB) {
  const std::size_t n = e.dim();
  const std::size_t m = AntisymMatrix::pair_count(n);
  OdeProblem p;
  p.dimension = n + m + 1;
  p.rhs = [&e, n, m, I0, eps_b](double, std::span<const double> s, std::span<double> d) {
    thread_local AntisymMatrix l, dl;
    if (l.dim() != n) {
      l = AntisymMatrix(n);
      dl = AntisymMatrix(n);
    }
    std::copy(s.begin() + n, s.begin() + n + m, l.packed().begin());
    detail::clebsch_derivative(e, s.first(n), l, d.first(n), dl);
    std::copy(dl.packed().begin(), dl.packed().end(), d.begin() + n);
    const double B = b_form(e, s.first(n));
    if (B <= eps_b)
      fail(ErrorCode::ZeroVelocity, "B(y) collapsed to " + std::to_string(B) + " mid-flight");
    d[n + m] = I0 / B;
  };
  return p;
}

namespace detail {

inline Vec flat_clebsch(const AugmentedClebschState& a) {
  const std::size_t n = a.c.y.size();
  Vec s(n + a.c.l.size() + 1);
  std::copy(a.c.y.begin(), a.c.y.end(), s.begin());
  auto p = a.c.l.packed();
  std::copy(p.begin(), p.end(), s.begin() + n);
  s.back() = a.c.t;
  return s;
}

inline TrajectorySample clebsch_sample(const Ellipsoid& e, double tau, std::span<const double> flat,
                                       double eps_b) {
  const std::size_t n = e.dim();
  const std::size_t m = AntisymMatrix::pair_count(n);
  TrajectorySample ts;
  ts.tau = tau;
  ts.t = flat[n + m];
  ts.y.assign(flat.begin(), flat.begin() + n);
  AntisymMatrix l(n);
  std::copy(flat.begin() + n, flat.begin() + n + m, l.packed().begin());
  ts.x = reconstruct_x(e, ts.y, l, eps_b);
  ts.inv = make_snapshot(e, ts.x, ts.y, l);
  return ts;
}

}  // namespace detail

/// Integrates the Clebsch system in local time together with the quadrature
/// for physical time, and reconstructs x at every emitted sample.
inline std::vector<TrajectorySample> integrate_clebsch(const Ellipsoid& e, const PhaseState& s0,
                                                       double tau_end, const StepControl& ctl,
                                                       double stride,
                                                       double tol_constraint = kTolConstraint,
                                                       double eps_b = kEpsB) {
  require_distinct(e, "integrate_clebsch");
  if (!(tau_end > 0.0)) fail(ErrorCode::InvalidConfig, "tau_end must be positive");
  if (!(stride > 0.0)) fail(ErrorCode::InvalidConfig, "stride must be positive");
  const AugmentedClebschState a0 = augment(e, s0, tol_constraint);
  if (b_form(e, a0.c.y) <= eps_b) fail(ErrorCode::ZeroVelocity, "B(y0) <= eps_B");

  const OdeProblem p = clebsch_problem(e, a0.I0, eps_b);
  const Vec flat0 = detail::flat_clebsch(a0);

  std::vector<TrajectorySample> out;
  out.push_back(detail::clebsch_sample(e, 0.0, flat0, eps_b));

  double next = stride;
  const double span_eps = 1e-12 * (tau_end + stride);
  Vec buf(p.dimension);
  AdaptiveStepper stepper(p, ctl, 0.0, flat0);
  while (stepper.time() < tau_end) {
    const StepRecord r = stepper.advance(tau_end);
    while (next < r.t1 - span_eps) {
      hermite_eval(r, next, buf);
      out.push_back(detail::clebsch_sample(e, next, buf, eps_b));
      next += stride;
    }
  }
  out.push_back(detail::clebsch_sample(e, tau_end, stepper.state(), eps_b));
  return out;
}

struct MatchedState {
  double t = 0.0;
  double tau = 0.0;
  Vec x;
  Vec y;
};

/// Clebsch trajectory evaluated at prescribed physical times: within each
/// accepted step the monotone t-component is inverted by bisection on its
/// Hermite interpolant. Times must be increasing and start at or after 0.
inline std::vector<MatchedState> clebsch_states_at_times(const Ellipsoid& e, const PhaseState& s0,
                                                         const std::vector<double>& times,
                                                         const StepControl& ctl,
                                                         double tol_constraint = kTolConstraint,
                                                         double eps_b = kEpsB) {
  require_distinct(e, "clebsch_states_at_times");
  for (std::size_t i = 0; i + 1 < times.size(); ++i)
    if (!(times[i] < times[i + 1])) fail(ErrorCode::InvalidConfig, "times must be strictly increasing");
  if (!times.empty() && times.front() < 0.0) fail(ErrorCode::InvalidConfig, "times must be >= 0");

  const AugmentedClebschState a0 = augment(e, s0, tol_constraint);
  const OdeProblem p = clebsch_problem(e, a0.I0, eps_b);
  const Vec flat0 = detail::flat_clebsch(a0);
  const std::size_t n = e.dim();
  const std::size_t m = AntisymMatrix::pair_count(n);
  const std::size_t it = n + m;  // index of the t component

  std::vector<MatchedState> out;
  std::size_t next = 0;
  auto record = [&](double tau, std::span<const double> flat) {
    TrajectorySample s = detail::clebsch_sample(e, tau, flat, eps_b);
    out.push_back(MatchedState{s.t, tau, std::move(s.x), std::move(s.y)});
  };
  while (next < times.size() && times[next] <= 0.0) {
    record(0.0, flat0);
    ++next;
  }
  if (next == times.size()) return out;

  // dt/dtau = A >= 1/max_a, so tau = max_a * t always suffices
  const double max_a = *std::max_element(e.a.begin(), e.a.end());
  const double tau_cap = max_a * times.back() * (1.0 + 1e-9) + 1e-9;

  AdaptiveStepper stepper(p, ctl, 0.0, flat0);
  Vec buf(p.dimension);
  while (stepper.time() < tau_cap && next < times.size()) {
    const StepRecord r = stepper.advance(tau_cap);
    while (next < times.size() && times[next] <= r.y1[it]) {
      const double target = times[next];
      // bisect the scalar cubic Hermite of the t component on [t0, t1]
      double lo = r.t0, hi = r.t1;
      const double h = r.t1 - r.t0;
      auto t_at = [&](double tau) {
        const double s = (tau - r.t0) / h, s2 = s * s, s3 = s2 * s;
        return (2 * s3 - 3 * s2 + 1) * r.y0[it] + (s3 - 2 * s2 + s) * h * r.f0[it] +
               (-2 * s3 + 3 * s2) * r.y1[it] + (s3 - s2) * h * r.f1[it];
      };
      for (int iter = 0; iter < 80; ++iter) {
        const double mid = 0.5 * (lo + hi);
        (t_at(mid) < target ? lo : hi) = mid;
      }
      const double tau_star = 0.5 * (lo + hi);
      hermite_eval(r, tau_star, buf);
      buf[it] = target;  // pin the time component to the requested value
      record(tau_star, buf);
      ++next;
    }
  }
  if (next < times.size())
    fail(ErrorCode::NonMonotoneTime, "physical time never reached t = " + std::to_string(times[next]));
  return out;
}

/// Monotone cubic map between local and physical time built from trajectory
/// samples; slopes are the sampled A(x) = dt/dtau values, clamped into the
/// monotone region.
class TimeMap {
 public:
  TimeMap(const Ellipsoid& e, const std::vector<TrajectorySample>& samples) {
    if (samples.size() < 2) fail(ErrorCode::InvalidConfig, "time_map needs at least two samples");
    tau_.reserve(samples.size());
    t_.reserve(samples.size());
    slope_.reserve(samples.size());
    for (const TrajectorySample& s : samples) {
      if (!s.tau) fail(ErrorCode::InvalidConfig, "time_map requires local-time samples");
      tau_.push_back(*s.tau);
      t_.push_back(s.t);
      slope_.push_back(a_form(e, s.x));
    }
    for (std::size_t k = 0; k + 1 < t_.size(); ++k)
      if (!(t_[k + 1] > t_[k]))
        fail(ErrorCode::NonMonotoneTime, "t[" + std::to_string(k + 1) + "] <= t[" + std::to_string(k) + "]");
    // clamp exact slopes into the sufficient monotonicity box (<= 3x secant)
    for (std::size_t k = 0; k < slope_.size(); ++k) {
      double cap = std::numeric_limits<double>::infinity();
      if (k > 0) cap = std::min(cap, 3.0 * secant(k - 1));
      if (k + 1 < slope_.size()) cap = std::min(cap, 3.0 * secant(k));
      slope_[k] = std::clamp(slope_[k], 0.0, cap);
    }
  }

  double tau_min() const { return tau_.front(); }
  double tau_max() const { return tau_.back(); }
  double t_min() const { return t_.front(); }
  double t_max() const { return t_.back(); }

  double tau_to_t(double tau) const {
    const std::size_t k = locate(tau_, tau);
    return eval(k, tau);
  }

  double t_to_tau(double t) const {
    const std::size_t k = locate(t_, t);
    // safeguarded Newton on the forward interpolant
    double lo = tau_[k], hi = tau_[k + 1];
    double tau = lo + (hi - lo) * (t - t_[k]) / (t_[k + 1] - t_[k]);
    for (int iter = 0; iter < 100; ++iter) {
      const double f = eval(k, tau) - t;
      (f < 0.0 ? lo : hi) = tau;
      const double df = eval_derivative(k, tau);
      double step = df > 0.0 ? tau - f / df : lo - 1.0;
      tau = (step > lo && step < hi) ? step : 0.5 * (lo + hi);
      if (hi - lo < 1e-15 * (1.0 + std::abs(hi))) break;
    }
    return tau;
  }

 private:
  double secant(std::size_t k) const { return (t_[k + 1] - t_[k]) / (tau_[k + 1] - tau_[k]); }

  static std::size_t locate(const std::vector<double>& knots, double v) {
    const double eps = 1e-9 * (std::abs(knots.front()) + std::abs(knots.back()) + 1.0);
    if (v < knots.front() - eps || v > knots.back() + eps)
      fail(ErrorCode::InvalidConfig, "query outside the sampled time range");
    const auto it = std::upper_bound(knots.begin(), knots.end(), v);
    std::size_t k = static_cast<std::size_t>(it - knots.begin());
    if (k > 0) --k;
    return std::min(k, knots.size() - 2);
  }

  double eval(std::size_t k, double tau) const {
    const double h = tau_[k + 1] - tau_[k];
    const double s = (tau - tau_[k]) / h, s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * t_[k] + (s3 - 2 * s2 + s) * h * slope_[k] +
           (-2 * s3 + 3 * s2) * t_[k + 1] + (s3 - s2) * h * slope_[k + 1];
  }

  double eval_derivative(std::size_t k, double tau) const {
    const double h = tau_[k + 1] - tau_[k];
    const double s = (tau - tau_[k]) / h, s2 = s * s;
    return ((6 * s2 - 6 * s) * t_[k] + (3 * s2 - 4 * s + 1) * h * slope_[k] +
            (-6 * s2 + 6 * s) * t_[k + 1] + (3 * s2 - 2 * s) * h * slope_[k + 1]) /
           h;
  }

  std::vector<double> tau_, t_, slope_;
};

inline TimeMap time_map(const Ellipsoid& e, const std::vector<TrajectorySample>& samples) {
  return TimeMap(e, samples);
}

}  // namespace geoflow
