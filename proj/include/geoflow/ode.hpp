#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "geoflow/errors.hpp"
#include "geoflow/vec.hpp"

namespace geoflow {

/// Autonomous-or-not first-order system over a flat real state vector.
struct OdeProblem {
  std::size_t dimension = 0;
  // rhs(t, state, deriv); deterministic and side-effect-free
  std::function<void(double, std::span<const double>, std::span<double>)> rhs;
};

enum class StepMode { fixed, adaptive };

struct StepControl {
  StepMode mode = StepMode::adaptive;
  double h = 1e-3;  // fixed-mode step size
  double rtol = 1e-10;
  double atol = 1e-12;
  double h_min = 1e-13;
  // Dense output is cubic Hermite (error ~ h^4), one order below the accept
  // test; the cap keeps sampled values at the same accuracy as the endpoints
  // for desk-scale dynamics.
  double h_max = 0.01;
  std::size_t max_steps = 10000000;
};

/// Hermite data of one accepted step: states and derivatives at both ends.
struct StepRecord {
  double t0 = 0.0;
  double t1 = 0.0;
  std::span<const double> y0, y1, f0, f1;
};

/// Cubic Hermite evaluation inside an accepted step.
inline void hermite_eval(const StepRecord& r, double t, std::span<double> out) {
  const double h = r.t1 - r.t0;
  const double s = (t - r.t0) / h;
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1;
  const double h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2;
  const double h11 = s3 - s2;
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = h00 * r.y0[i] + h10 * h * r.f0[i] + h01 * r.y1[i] + h11 * h * r.f1[i];
}

/// One classical fourth-order Runge-Kutta step.
inline Vec rk4_step(const OdeProblem& p, double t, std::span<const double> state, double h) {
  const std::size_t n = p.dimension;
  Vec k1(n), k2(n), k3(n), k4(n), tmp(n), out(state.begin(), state.end());
  p.rhs(t, state, k1);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = state[i] + 0.5 * h * k1[i];
  p.rhs(t + 0.5 * h, tmp, k2);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = state[i] + 0.5 * h * k2[i];
  p.rhs(t + 0.5 * h, tmp, k3);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = state[i] + h * k3[i];
  p.rhs(t + h, tmp, k4);
  for (std::size_t i = 0; i < n; ++i) out[i] += h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
  if (!all_finite(out)) fail(ErrorCode::NonFiniteState, "rk4_step produced a non-finite component");
  return out;
}

namespace dopri5 {
// Dormand-Prince 5(4) tableau. The b row equals a7*, so k7 = f(t+h, y1) and
// the pair is FSAL.
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
inline constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                        a75 = -2187.0 / 6784, a76 = 11.0 / 84;
// y1 - yhat1, the embedded 4th-order error weights
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                        e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
inline constexpr double safety = 0.9, fac_min = 0.2, fac_max = 5.0;
}  // namespace dopri5

/// Embedded Dormand-Prince 5(4) stepper with proportional step control.
/// Exposes one accepted step at a time together with its Hermite data so
/// callers can project, observe, or densely sample between steps.
class AdaptiveStepper {
 public:
  AdaptiveStepper(const OdeProblem& p, const StepControl& ctl, double t0, std::span<const double> y0)
      : p_(p), ctl_(ctl), t_(t0), y_(y0.begin(), y0.end()) {
    const std::size_t n = p_.dimension;
    for (auto* k : {&k1_, &k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &ynew_, &yerr_, &yprev_, &fprev_}) k->resize(n);
    p_.rhs(t_, y_, k1_);
    if (!all_finite(k1_)) fail(ErrorCode::NonFiniteState, "rhs non-finite at initial state");
    h_ = initial_step();
  }

  double time() const { return t_; }
  std::span<const double> state() const { return y_; }

  /// Replace the current state (e.g. after constraint projection). The cached
  /// FSAL derivative is recomputed.
  void overwrite_state(std::span<const double> y) {
    y_.assign(y.begin(), y.end());
    p_.rhs(t_, y_, k1_);
  }

  /// Advance exactly one accepted step, clipped so t never passes t_end.
  /// Returns Hermite data for the step just taken.
  StepRecord advance(double t_end) {
    using namespace dopri5;
    const std::size_t n = p_.dimension;
    while (true) {
      if (++attempts_ > ctl_.max_steps)
        fail(ErrorCode::MaxStepsExceeded, "more than " + std::to_string(ctl_.max_steps) + " step attempts");
      const double remaining = t_end - t_;
      const bool clipped = h_ >= remaining;
      const double h = clipped ? remaining : h_;

      bool finite = stages(h);
      if (finite && all_finite(ynew_)) {
        // scaled RMS error norm
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double sc = ctl_.atol + ctl_.rtol * std::max(std::abs(y_[i]), std::abs(ynew_[i]));
          const double r = yerr_[i] / sc;
          sum += r * r;
        }
        const double err = std::sqrt(sum / static_cast<double>(n));
        if (err <= 1.0) {
          double fac = err == 0.0 ? fac_max : safety * std::pow(err, -0.2);
          fac = std::clamp(fac, fac_min, fac_max);
          if (rejected_last_) fac = std::min(fac, 1.0);
          rejected_last_ = false;
          yprev_.swap(y_);
          fprev_.swap(k1_);
          y_ = ynew_;
          k1_ = k7_;  // FSAL
          const double t0 = t_;
          t_ = clipped ? t_end : t_ + h;
          if (!clipped) h_ = std::min(h * fac, ctl_.h_max);
          return StepRecord{t0, t_, yprev_, y_, fprev_, k1_};
        }
        double fac = std::clamp(safety * std::pow(err, -0.2), fac_min, 1.0);
        shrink(h * fac, clipped);
      } else {
        shrink(h * 0.3, clipped);
      }
    }
  }

 private:
  bool stages(double h) {
    using namespace dopri5;
    const std::size_t n = p_.dimension;
    Vec& w = ynew_;  // stage workspace, overwritten by the final combination
    for (std::size_t i = 0; i < n; ++i) w[i] = y_[i] + h * a21 * k1_[i];
    p_.rhs(t_ + c2 * h, w, k2_);
    for (std::size_t i = 0; i < n; ++i) w[i] = y_[i] + h * (a31 * k1_[i] + a32 * k2_[i]);
    p_.rhs(t_ + c3 * h, w, k3_);
    for (std::size_t i = 0; i < n; ++i) w[i] = y_[i] + h * (a41 * k1_[i] + a42 * k2_[i] + a43 * k3_[i]);
    p_.rhs(t_ + c4 * h, w, k4_);
    for (std::size_t i = 0; i < n; ++i)
      w[i] = y_[i] + h * (a51 * k1_[i] + a52 * k2_[i] + a53 * k3_[i] + a54 * k4_[i]);
    p_.rhs(t_ + c5 * h, w, k5_);
    for (std::size_t i = 0; i < n; ++i)
      w[i] = y_[i] + h * (a61 * k1_[i] + a62 * k2_[i] + a63 * k3_[i] + a64 * k4_[i] + a65 * k5_[i]);
    p_.rhs(t_ + h, w, k6_);
    for (std::size_t i = 0; i < n; ++i)
      w[i] = y_[i] + h * (a71 * k1_[i] + a73 * k3_[i] + a74 * k4_[i] + a75 * k5_[i] + a76 * k6_[i]);
    if (!all_finite(w)) return false;
    p_.rhs(t_ + h, w, k7_);
    if (!all_finite(k7_)) return false;
    for (std::size_t i = 0; i < p_.dimension; ++i)
      yerr_[i] = h * (e1 * k1_[i] + e3 * k3_[i] + e4 * k4_[i] + e5 * k5_[i] + e6 * k6_[i] + e7 * k7_[i]);
    return true;
  }

  void shrink(double h_new, bool was_clipped) {
    rejected_last_ = true;
    // a clipped step that fails may legitimately shrink below h_min once,
    // since the clip itself was not error-driven
    if (h_new < ctl_.h_min && !was_clipped)
      fail(ErrorCode::StepUnderflow, "step size " + std::to_string(h_new) + " below h_min");
    h_ = std::max(h_new, ctl_.h_min * 1e-3);
    if (h_ <= 0.0 || !std::isfinite(h_)) fail(ErrorCode::StepUnderflow, "step size collapsed to zero");
  }

  // standard starting-step heuristic from the scale of y and f
  double initial_step() const {
    const std::size_t n = p_.dimension;
    double d0 = 0.0, d1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double sc = ctl_.atol + ctl_.rtol * std::abs(y_[i]);
      d0 += (y_[i] / sc) * (y_[i] / sc);
      d1 += (k1_[i] / sc) * (k1_[i] / sc);
    }
    d0 = std::sqrt(d0 / n);
    d1 = std::sqrt(d1 / n);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    return std::clamp(h0, ctl_.h_min, ctl_.h_max);
  }

  const OdeProblem& p_;
  StepControl ctl_;
  double t_;
  double h_ = 0.0;
  bool rejected_last_ = false;
  std::size_t attempts_ = 0;
  Vec y_, k1_, k2_, k3_, k4_, k5_, k6_, k7_, ynew_, yerr_, yprev_, fprev_;
};

/// Fixed-step RK4 with the same stepping interface as AdaptiveStepper, so
/// flow drivers can be written once against either.
class FixedStepper {
 public:
  FixedStepper(const OdeProblem& p, const StepControl& ctl, double t0, std::span<const double> y0)
      : p_(p), ctl_(ctl), t_(t0), y_(y0.begin(), y0.end()), f0_(p.dimension), fprev_(p.dimension),
        yprev_(p.dimension) {
    if (!(ctl_.h > 0.0)) fail(ErrorCode::InvalidConfig, "fixed mode requires h > 0");
    p_.rhs(t_, y_, f0_);
  }

  double time() const { return t_; }
  std::span<const double> state() const { return y_; }

  void overwrite_state(std::span<const double> y) {
    y_.assign(y.begin(), y.end());
    p_.rhs(t_, y_, f0_);
  }

  StepRecord advance(double t_end) {
    if (++steps_ > ctl_.max_steps) fail(ErrorCode::MaxStepsExceeded, "fixed-step cap exceeded");
    const double t0 = t_;
    const double h = std::min(ctl_.h, t_end - t_);
    yprev_.swap(y_);
    fprev_.swap(f0_);
    y_ = rk4_step(p_, t0, yprev_, h);
    t_ = (t0 + ctl_.h >= t_end) ? t_end : t0 + h;
    p_.rhs(t_, y_, f0_);
    return StepRecord{t0, t_, yprev_, y_, fprev_, f0_};
  }

 private:
  const OdeProblem& p_;
  StepControl ctl_;
  double t_;
  std::size_t steps_ = 0;
  Vec y_, f0_, fprev_, yprev_;
};

using StepObserver = std::function<void(double, std::span<const double>)>;

/// Integrates [t0, t1] with the embedded 5(4) pair; the observer sees every
/// accepted step and the final time equals t1 exactly.
inline Vec adaptive_integrate(const OdeProblem& p, double t0, std::span<const double> state0, double t1,
                              const StepControl& ctl, const StepObserver& observer = nullptr) {
  if (!(t1 > t0)) fail(ErrorCode::InvalidConfig, "adaptive_integrate requires t1 > t0");
  AdaptiveStepper stepper(p, ctl, t0, state0);
  while (stepper.time() < t1) {
    const StepRecord r = stepper.advance(t1);
    if (observer) observer(r.t1, r.y1);
  }
  return Vec(stepper.state().begin(), stepper.state().end());
}

/// Fixed-step RK4 over [t0, t1] with final-step truncation.
inline Vec fixed_integrate(const OdeProblem& p, double t0, std::span<const double> state0, double t1,
                           const StepControl& ctl, const StepObserver& observer = nullptr) {
  if (!(t1 > t0)) fail(ErrorCode::InvalidConfig, "fixed_integrate requires t1 > t0");
  if (!(ctl.h > 0.0)) fail(ErrorCode::InvalidConfig, "fixed mode requires h > 0");
  Vec y(state0.begin(), state0.end());
  double t = t0;
  std::size_t steps = 0;
  while (t < t1) {
    if (++steps > ctl.max_steps) fail(ErrorCode::MaxStepsExceeded, "fixed-step cap exceeded");
    const double h = std::min(ctl.h, t1 - t);
    y = rk4_step(p, t, y, h);
    t = (t + ctl.h >= t1) ? t1 : t + h;
    if (observer) observer(t, y);
  }
  return y;
}

struct TimedState {
  double t;
  Vec state;
};

/// Dense-output samples at t0 + k*stride (cubic Hermite between accepted
/// steps); both endpoints are always included.
inline std::vector<TimedState> sample_trajectory(const OdeProblem& p, double t0,
                                                 std::span<const double> state0, double t1,
                                                 const StepControl& ctl, double stride) {
  if (!(stride > 0.0)) fail(ErrorCode::InvalidConfig, "stride must be positive");
  if (!(t1 > t0)) fail(ErrorCode::InvalidConfig, "sample_trajectory requires t1 > t0");
  std::vector<TimedState> out;
  out.push_back({t0, Vec(state0.begin(), state0.end())});
  const double span_eps = 1e-12 * (std::abs(t0) + std::abs(t1) + stride);
  double next = t0 + stride;
  Vec buf(p.dimension);

  if (ctl.mode == StepMode::adaptive) {
    AdaptiveStepper stepper(p, ctl, t0, state0);
    while (stepper.time() < t1) {
      const StepRecord r = stepper.advance(t1);
      while (next < r.t1 - span_eps) {
        hermite_eval(r, next, buf);
        out.push_back({next, buf});
        next += stride;
      }
    }
    out.push_back({t1, Vec(stepper.state().begin(), stepper.state().end())});
  } else {
    // fixed mode: RK4 macro-steps with Hermite between them
    Vec y(state0.begin(), state0.end());
    Vec f0(p.dimension), f1(p.dimension);
    double t = t0;
    std::size_t steps = 0;
    p.rhs(t, y, f0);
    while (t < t1) {
      if (++steps > ctl.max_steps) fail(ErrorCode::MaxStepsExceeded, "fixed-step cap exceeded");
      const double h = std::min(ctl.h, t1 - t);
      Vec ynew = rk4_step(p, t, y, h);
      const double tnew = (t + ctl.h >= t1) ? t1 : t + h;
      p.rhs(tnew, ynew, f1);
      StepRecord r{t, tnew, y, ynew, f0, f1};
      while (next < tnew - span_eps) {
        hermite_eval(r, next, buf);
        out.push_back({next, buf});
        next += stride;
      }
      y.swap(ynew);
      f0.swap(f1);
      t = tnew;
    }
    out.push_back({t1, std::move(y)});
  }
  return out;
}

/// Dispatch on StepControl::mode.
inline Vec integrate(const OdeProblem& p, double t0, std::span<const double> state0, double t1,
                     const StepControl& ctl, const StepObserver& observer = nullptr) {
  return ctl.mode == StepMode::adaptive ? adaptive_integrate(p, t0, state0, t1, ctl, observer)
                                        : fixed_integrate(p, t0, state0, t1, ctl, observer);
}

}  // namespace geoflow
