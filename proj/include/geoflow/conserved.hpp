#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "geoflow/antisym.hpp"
#include "geoflow/ellipsoid.hpp"
#include "geoflow/errors.hpp"
#include "geoflow/vec.hpp"

namespace geoflow {

/// F_j = y_j^2 + sum_{k != j} l_jk^2 / (a_j - a_k). The antisymmetric pair
/// terms telescope, so sum_j F_j = sum_j y_j^2.
inline Vec uhlenbeck_integrals(const Ellipsoid& e, std::span<const double> y, const AntisymMatrix& l) {
  require_distinct(e, "uhlenbeck_integrals");
  const std::size_t n = e.dim();
  Vec F(n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = y[j] * y[j];
    for (std::size_t k = 0; k < n; ++k) {
      if (k == j) continue;
      const double ljk = l(j, k);
      s += ljk * ljk / (e.a[j] - e.a[k]);
    }
    F[j] = s;
  }
  return F;
}

/// G_lambda = sum_j y_j^2/(a_j - lambda) - sum_{j<k} l_jk^2/((a_j-lambda)(a_k-lambda)).
/// Equal to sum_j F_j/(a_j - lambda) by partial fractions.
inline double generating_function(const Ellipsoid& e, std::span<const double> y, const AntisymMatrix& l,
                                  double lambda) {
  const std::size_t n = e.dim();
  for (std::size_t j = 0; j < n; ++j)
    if (std::abs(e.a[j] - lambda) < 1e-12)
      fail(ErrorCode::PoleAtAxis, "lambda = " + std::to_string(lambda) + " hits axis " + std::to_string(j));
  double g = 0.0;
  for (std::size_t j = 0; j < n; ++j) g += y[j] * y[j] / (e.a[j] - lambda);
  for (std::size_t j = 0; j + 1 < n; ++j)
    for (std::size_t k = j + 1; k < n; ++k) {
      const double ljk = l(j, k);
      g -= ljk * ljk / ((e.a[j] - lambda) * (e.a[k] - lambda));
    }
  return g;
}

/// H_C = (1/2)(sum_j y_j^2/a_j - sum_{j<k} l_jk^2/(a_j a_k)); the pairwise sum
/// is the convention under which the bracket flow of H_C is the Clebsch flow.
inline double clebsch_hamiltonian(const Ellipsoid& e, std::span<const double> y, const AntisymMatrix& l) {
  require_distinct(e, "clebsch_hamiltonian");
  const std::size_t n = e.dim();
  double h = 0.0;
  for (std::size_t j = 0; j < n; ++j) h += y[j] * y[j] / e.a[j];
  for (std::size_t j = 0; j + 1 < n; ++j)
    for (std::size_t k = j + 1; k < n; ++k) {
      const double ljk = l(j, k);
      h -= ljk * ljk / (e.a[j] * e.a[k]);
    }
  return 0.5 * h;
}

struct IdentityResiduals {
  double id1;  // max_j |B x_j/a_j - sum_k omega_jk y_k|
  double id2;  // |B - sum_{j<k} l_jk^2/(a_j a_k)|
  double id3;  // max_{j<k} |(1/a_j - 1/a_k) B x_j x_k - commutator + (1/a_j - 1/a_k) y_j y_k|
};

/// Residuals of the three identities tying the direct variables to the
/// Clebsch ones. Exact on the constraint manifold; pass enforce_constraints =
/// false to probe how they fail off it.
inline IdentityResiduals identity_residuals(const Ellipsoid& e, const PhaseState& s,
                                            bool enforce_constraints = true,
                                            double tol_constraint = kTolConstraint) {
  if (enforce_constraints) require_on_manifold(e, s, tol_constraint, "identity_residuals");
  const std::size_t n = e.dim();
  const AntisymMatrix l = AntisymMatrix::wedge(s.x, s.y);
  const double B = b_form(e, s.y);

  IdentityResiduals r{0.0, 0.0, 0.0};
  for (std::size_t j = 0; j < n; ++j) {
    double s1 = 0.0;
    for (std::size_t k = 0; k < n; ++k) s1 += l(j, k) / (e.a[j] * e.a[k]) * s.y[k];
    r.id1 = std::max(r.id1, std::abs(B * s.x[j] / e.a[j] - s1));
  }

  double lsum = 0.0;
  for (std::size_t j = 0; j + 1 < n; ++j)
    for (std::size_t k = j + 1; k < n; ++k) lsum += l(j, k) * l(j, k) / (e.a[j] * e.a[k]);
  r.id2 = std::abs(B - lsum);

  for (std::size_t j = 0; j + 1 < n; ++j)
    for (std::size_t k = j + 1; k < n; ++k) {
      double comm = 0.0;
      for (std::size_t m = 0; m < n; ++m)
        comm += l(j, m) * l(m, k) / (e.a[m] * e.a[k]) - l(j, m) / (e.a[j] * e.a[m]) * l(m, k);
      const double d = 1.0 / e.a[j] - 1.0 / e.a[k];
      r.id3 = std::max(r.id3, std::abs(d * B * s.x[j] * s.x[k] - (comm - d * s.y[j] * s.y[k])));
    }
  return r;
}

/// Max Plücker residual |l_ij l_km - l_ik l_jm + l_im l_jk| over index
/// quadruples; the rank-2 certificate. Vacuously 0 for n <= 3.
inline double plucker_residual(const AntisymMatrix& l) {
  const std::size_t n = l.dim();
  if (n < 4) return 0.0;
  double worst = 0.0;
  for (std::size_t i = 0; i + 3 < n; ++i)
    for (std::size_t j = i + 1; j + 2 < n; ++j)
      for (std::size_t k = j + 1; k + 1 < n; ++k)
        for (std::size_t m = k + 1; m < n; ++m)
          worst = std::max(worst, std::abs(l(i, j) * l(k, m) - l(i, k) * l(j, m) + l(i, m) * l(j, k)));
  return worst;
}

/// Per-sample record of every monitored quantity.
struct InvariantSnapshot {
  double H_free = 0.0;  // (1/2) sum y_j^2
  Vec F;                // Uhlenbeck integrals; empty when axes are not distinct
  double I = 0.0;       // Joachimsthal product A(x) B(y)
  double q0_residual = 0.0;
  double tangency_residual = 0.0;
  double plucker_max_residual = 0.0;
};

inline InvariantSnapshot make_snapshot(const Ellipsoid& e, std::span<const double> x,
                                       std::span<const double> y, const AntisymMatrix& l) {
  InvariantSnapshot s;
  double h = 0.0;
  for (double v : y) h += v * v;
  s.H_free = 0.5 * h;
  if (e.distinct) s.F = uhlenbeck_integrals(e, y, l);
  s.I = a_form(e, x) * b_form(e, y);
  s.q0_residual = std::abs(q0_of(e, x) - 1.0);
  s.tangency_residual = std::abs(tangency_form(e, x, y));
  s.plucker_max_residual = plucker_residual(l);
  return s;
}

/// One exported trajectory point; tau is empty for physical-time runs.
struct TrajectorySample {
  double t = 0.0;
  std::optional<double> tau;
  Vec x;
  Vec y;
  InvariantSnapshot inv;
};

struct DriftReport {
  // (name, max |v - v0| / max(|v0|, 1e-12)) per invariant, headed by H and I
  std::vector<std::pair<std::string, double>> rel_drift;
  double max_q0_residual = 0.0;
  double max_tangency_residual = 0.0;
  double max_plucker_residual = 0.0;

  double worst_drift() const {
    double w = 0.0;
    for (const auto& [name, d] : rel_drift) w = std::max(w, d);
    return w;
  }
};

inline DriftReport drift_report(const std::vector<TrajectorySample>& samples) {
  if (samples.empty()) fail(ErrorCode::InvalidConfig, "drift_report requires at least one sample");
  const InvariantSnapshot& first = samples.front().inv;
  const std::size_t nf = first.F.size();

  auto rel = [](double v, double v0) { return std::abs(v - v0) / std::max(std::abs(v0), 1e-12); };

  DriftReport rep;
  rep.rel_drift.emplace_back("H", 0.0);
  rep.rel_drift.emplace_back("I", 0.0);
  for (std::size_t j = 0; j < nf; ++j) rep.rel_drift.emplace_back("F_" + std::to_string(j + 1), 0.0);

  for (const TrajectorySample& s : samples) {
    rep.rel_drift[0].second = std::max(rep.rel_drift[0].second, rel(s.inv.H_free, first.H_free));
    rep.rel_drift[1].second = std::max(rep.rel_drift[1].second, rel(s.inv.I, first.I));
    for (std::size_t j = 0; j < nf; ++j)
      rep.rel_drift[2 + j].second = std::max(rep.rel_drift[2 + j].second, rel(s.inv.F[j], first.F[j]));
    rep.max_q0_residual = std::max(rep.max_q0_residual, s.inv.q0_residual);
    rep.max_tangency_residual = std::max(rep.max_tangency_residual, s.inv.tangency_residual);
    rep.max_plucker_residual = std::max(rep.max_plucker_residual, s.inv.plucker_max_residual);
  }
  return rep;
}

}  // namespace geoflow
