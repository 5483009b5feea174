#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "geoflow/antisym.hpp"
#include "geoflow/clebsch.hpp"
#include "geoflow/conserved.hpp"
#include "geoflow/ellipsoid.hpp"
#include "geoflow/errors.hpp"
#include "geoflow/vec.hpp"

namespace geoflow {

/// A smooth function of (y, l) with analytically supplied gradients, the unit
/// of Poisson-bracket computation.
struct Observable {
  std::function<double(const Vec&, const AntisymMatrix&)> eval;
  std::function<Vec(const Vec&, const AntisymMatrix&)> grad_y;
  std::function<AntisymMatrix(const Vec&, const AntisymMatrix&)> grad_l;
};

/// Dense antisymmetric Poisson tensor over the packed coordinates
/// xi = (y_1..y_n, l_jk for j<k), row-major (n+m) x (n+m).
///
/// Blocks of the e(n) structure used throughout:
///   {y_j, y_k}     = 0
///   {l_ij, y_k}    = d_jk y_i - d_ik y_j
///   {l_ij, l_km}   = d_im l_jk + d_jk l_im - d_ik l_jm - d_jm l_ik
/// Under f_dot = {f, H_C} this tensor generates exactly the Clebsch equations;
/// it is the unique consistent sign assignment that does (the {l,l} block also
/// satisfies the Jacobi identity only with this relative sign).
inline std::vector<double> poisson_tensor(const Vec& y, const AntisymMatrix& l) {
  const std::size_t n = y.size();
  const std::size_t m = AntisymMatrix::pair_count(n);
  const std::size_t dim = n + m;
  std::vector<double> P(dim * dim, 0.0);
  auto at = [&](std::size_t r, std::size_t c) -> double& { return P[r * dim + c]; };

  std::size_t row = n;
  for (std::size_t i = 0; i + 1 < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j, ++row) {
      // {l_ij, y_k}
      at(row, j) += y[i];
      at(j, row) -= y[i];
      at(row, i) -= y[j];
      at(i, row) += y[j];
      // {l_ij, l_km}
      std::size_t col = n;
      for (std::size_t k = 0; k + 1 < n; ++k)
        for (std::size_t mm = k + 1; mm < n; ++mm, ++col) {
          double v = 0.0;
          if (i == mm) v += l(j, k);
          if (j == k) v += l(i, mm);
          if (i == k) v -= l(j, mm);
          if (j == mm) v -= l(i, k);
          at(row, col) = v;
        }
    }
  return P;
}

/// {f, g} at (y, l): gradient contraction against the Poisson tensor.
inline double poisson_bracket(const Observable& f, const Observable& g, const Vec& y,
                              const AntisymMatrix& l) {
  const std::size_t n = y.size();
  const std::size_t m = AntisymMatrix::pair_count(n);
  const std::size_t dim = n + m;

  Vec gf(dim), gg(dim);
  {
    Vec fy = f.grad_y(y, l);
    std::copy(fy.begin(), fy.end(), gf.begin());
    AntisymMatrix fl = f.grad_l(y, l);
    auto p = fl.packed();
    std::copy(p.begin(), p.end(), gf.begin() + n);
    Vec gy = g.grad_y(y, l);
    std::copy(gy.begin(), gy.end(), gg.begin());
    AntisymMatrix gl = g.grad_l(y, l);
    auto q = gl.packed();
    std::copy(q.begin(), q.end(), gg.begin() + n);
  }

  const std::vector<double> P = poisson_tensor(y, l);
  double s = 0.0;
  for (std::size_t r = 0; r < dim; ++r) {
    if (gf[r] == 0.0) continue;
    double row = 0.0;
    for (std::size_t c = 0; c < dim; ++c) row += P[r * dim + c] * gg[c];
    s += gf[r] * row;
  }
  return s;
}

inline Observable uhlenbeck_observable(const Ellipsoid& e, std::size_t j) {
  require_distinct(e, "uhlenbeck_observable");
  const std::size_t n = e.dim();
  Observable o;
  o.eval = [&e, j](const Vec& y, const AntisymMatrix& l) { return uhlenbeck_integrals(e, y, l)[j]; };
  o.grad_y = [n, j](const Vec& y, const AntisymMatrix&) {
    Vec g(n, 0.0);
    g[j] = 2.0 * y[j];
    return g;
  };
  o.grad_l = [&e, n, j](const Vec&, const AntisymMatrix& l) {
    AntisymMatrix g(n);
    for (std::size_t k = 0; k < n; ++k) {
      if (k == j) continue;
      g.set(j, k, 2.0 * l(j, k) / (e.a[j] - e.a[k]));
    }
    return g;
  };
  return o;
}

inline Observable generating_observable(const Ellipsoid& e, double lambda) {
  const std::size_t n = e.dim();
  Observable o;
  o.eval = [&e, lambda](const Vec& y, const AntisymMatrix& l) {
    return generating_function(e, y, l, lambda);
  };
  o.grad_y = [&e, n, lambda](const Vec& y, const AntisymMatrix&) {
    Vec g(n);
    for (std::size_t j = 0; j < n; ++j) g[j] = 2.0 * y[j] / (e.a[j] - lambda);
    return g;
  };
  o.grad_l = [&e, n, lambda](const Vec&, const AntisymMatrix& l) {
    AntisymMatrix g(n);
    for (std::size_t j = 0; j + 1 < n; ++j)
      for (std::size_t k = j + 1; k < n; ++k)
        g.set(j, k, -2.0 * l(j, k) / ((e.a[j] - lambda) * (e.a[k] - lambda)));
    return g;
  };
  return o;
}

inline Observable clebsch_hamiltonian_observable(const Ellipsoid& e) {
  require_distinct(e, "clebsch_hamiltonian_observable");
  const std::size_t n = e.dim();
  Observable o;
  o.eval = [&e](const Vec& y, const AntisymMatrix& l) { return clebsch_hamiltonian(e, y, l); };
  o.grad_y = [&e, n](const Vec& y, const AntisymMatrix&) {
    Vec g(n);
    for (std::size_t j = 0; j < n; ++j) g[j] = y[j] / e.a[j];
    return g;
  };
  o.grad_l = [&e, n](const Vec&, const AntisymMatrix& l) {
    AntisymMatrix g(n);
    for (std::size_t j = 0; j + 1 < n; ++j)
      for (std::size_t k = j + 1; k < n; ++k) g.set(j, k, -l(j, k) / (e.a[j] * e.a[k]));
    return g;
  };
  return o;
}

namespace detail {

inline void box_sample(std::mt19937_64& rng, Vec& y, AntisymMatrix& l) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double& v : y) v = u(rng);
  for (double& v : l.packed()) v = u(rng);
}

}  // namespace detail

/// max |{F_j, F_k}| over all pairs at box-sampled ambient points (the
/// involution is a Lie-algebraic identity, tested off the rank-2 locus).
inline double involution_check(const Ellipsoid& e, std::size_t points, std::mt19937_64& rng) {
  require_distinct(e, "involution_check");
  const std::size_t n = e.dim();
  std::vector<Observable> F;
  F.reserve(n);
  for (std::size_t j = 0; j < n; ++j) F.push_back(uhlenbeck_observable(e, j));
  Vec y(n);
  AntisymMatrix l(n);
  double worst = 0.0;
  for (std::size_t s = 0; s < points; ++s) {
    detail::box_sample(rng, y, l);
    for (std::size_t j = 0; j + 1 < n; ++j)
      for (std::size_t k = j + 1; k < n; ++k)
        worst = std::max(worst, std::abs(poisson_bracket(F[j], F[k], y, l)));
  }
  return worst;
}

/// max |{G_lambda, G_mu}| over random parameter pairs away from the axis
/// poles, at box-sampled points.
inline double generating_involution_check(const Ellipsoid& e, std::size_t lambda_pairs,
                                          std::size_t points, std::mt19937_64& rng) {
  const std::size_t n = e.dim();
  const double lo = *std::min_element(e.a.begin(), e.a.end()) - 2.0;
  const double hi = *std::max_element(e.a.begin(), e.a.end()) + 2.0;
  std::uniform_real_distribution<double> u(lo, hi);
  auto draw_lambda = [&]() {
    while (true) {
      const double v = u(rng);
      bool clear = true;
      for (double aj : e.a)
        if (std::abs(aj - v) < 0.1) clear = false;
      if (clear) return v;
    }
  };
  Vec y(n);
  AntisymMatrix l(n);
  double worst = 0.0;
  for (std::size_t p = 0; p < lambda_pairs; ++p) {
    const Observable ga = generating_observable(e, draw_lambda());
    const Observable gb = generating_observable(e, draw_lambda());
    for (std::size_t s = 0; s < points; ++s) {
      detail::box_sample(rng, y, l);
      worst = std::max(worst, std::abs(poisson_bracket(ga, gb, y, l)));
    }
  }
  return worst;
}

/// Compares the bracket-generated field xi_dot = {xi, H_C} against the
/// Clebsch right-hand side, componentwise in y and l; max absolute residual.
inline double hamiltonian_flow_check(const Ellipsoid& e, std::size_t points, std::mt19937_64& rng) {
  require_distinct(e, "hamiltonian_flow_check");
  const std::size_t n = e.dim();
  const std::size_t m = AntisymMatrix::pair_count(n);
  const std::size_t dim = n + m;
  const Observable H = clebsch_hamiltonian_observable(e);

  Vec y(n), dy(n);
  AntisymMatrix l(n), dl(n);
  double worst = 0.0;
  for (std::size_t s = 0; s < points; ++s) {
    detail::box_sample(rng, y, l);

    Vec gh(dim);
    {
      Vec hy = H.grad_y(y, l);
      std::copy(hy.begin(), hy.end(), gh.begin());
      AntisymMatrix hl = H.grad_l(y, l);
      auto p = hl.packed();
      std::copy(p.begin(), p.end(), gh.begin() + n);
    }
    const std::vector<double> P = poisson_tensor(y, l);

    detail::clebsch_derivative(e, y, l, dy, dl);
    for (std::size_t r = 0; r < dim; ++r) {
      double flow = 0.0;
      for (std::size_t c = 0; c < dim; ++c) flow += P[r * dim + c] * gh[c];
      const double rhs = r < n ? dy[r] : dl.packed()[r - n];
      worst = std::max(worst, std::abs(flow - rhs));
    }
  }
  return worst;
}

/// Antisymmetry probe: max |{f,g} + {g,f}| and |{f,f}| over the F_j family.
inline double antisymmetry_check(const Ellipsoid& e, std::size_t points, std::mt19937_64& rng) {
  require_distinct(e, "antisymmetry_check");
  const std::size_t n = e.dim();
  std::vector<Observable> F;
  for (std::size_t j = 0; j < n; ++j) F.push_back(uhlenbeck_observable(e, j));
  Vec y(n);
  AntisymMatrix l(n);
  double worst = 0.0;
  for (std::size_t s = 0; s < points; ++s) {
    detail::box_sample(rng, y, l);
    for (std::size_t j = 0; j < n; ++j) {
      worst = std::max(worst, std::abs(poisson_bracket(F[j], F[j], y, l)));
      for (std::size_t k = j + 1; k < n; ++k)
        worst = std::max(worst, std::abs(poisson_bracket(F[j], F[k], y, l) +
                                         poisson_bracket(F[k], F[j], y, l)));
    }
  }
  return worst;
}

/// Jacobi identity on generator triples. The tensor is linear in xi, so the
/// structure constants are extracted exactly and the cyclic sum is evaluated
/// as an exact linear function at random points.
inline double jacobi_check(std::size_t n, std::size_t points, std::mt19937_64& rng) {
  const std::size_t m = AntisymMatrix::pair_count(n);
  const std::size_t dim = n + m;

  // c[g][a][b] with {xi_a, xi_b} = sum_g c[g][a][b] xi_g
  std::vector<std::vector<double>> c(dim, std::vector<double>(dim * dim, 0.0));
  for (std::size_t g = 0; g < dim; ++g) {
    Vec y(n, 0.0);
    AntisymMatrix l(n);
    if (g < n)
      y[g] = 1.0;
    else
      l.packed()[g - n] = 1.0;
    const std::vector<double> P = poisson_tensor(y, l);
    c[g] = P;
  }

  auto bracket_coeff = [&](const Vec& f, const Vec& g) {
    Vec out(dim, 0.0);
    for (std::size_t gg = 0; gg < dim; ++gg) {
      double s = 0.0;
      for (std::size_t a = 0; a < dim; ++a) {
        if (f[a] == 0.0) continue;
        for (std::size_t b = 0; b < dim; ++b) s += f[a] * c[gg][a * dim + b] * g[b];
      }
      out[gg] = s;
    }
    return out;
  };

  std::vector<Vec> basis(dim, Vec(dim, 0.0));
  for (std::size_t a = 0; a < dim; ++a) basis[a][a] = 1.0;

  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vec> pts(points, Vec(dim));
  for (auto& p : pts)
    for (double& v : p) v = u(rng);

  double worst = 0.0;
  for (std::size_t a = 0; a < dim; ++a)
    for (std::size_t b = a + 1; b < dim; ++b)
      for (std::size_t g = b + 1; g < dim; ++g) {
        Vec w = bracket_coeff(basis[a], bracket_coeff(basis[b], basis[g]));
        const Vec w2 = bracket_coeff(basis[b], bracket_coeff(basis[g], basis[a]));
        const Vec w3 = bracket_coeff(basis[g], bracket_coeff(basis[a], basis[b]));
        for (std::size_t i = 0; i < dim; ++i) w[i] += w2[i] + w3[i];
        for (const Vec& p : pts) worst = std::max(worst, std::abs(dot(w, p)));
      }
  return worst;
}

/// Analytic gradients of F_j, G_lambda, H_C against centered finite
/// differences (step 1e-6); max scaled mismatch.
inline double gradient_check(const Ellipsoid& e, std::size_t points, std::mt19937_64& rng) {
  require_distinct(e, "gradient_check");
  const std::size_t n = e.dim();
  const double step = 1e-6;

  std::vector<Observable> obs;
  for (std::size_t j = 0; j < n; ++j) obs.push_back(uhlenbeck_observable(e, j));
  obs.push_back(generating_observable(e, -0.731));
  obs.push_back(generating_observable(e, *std::max_element(e.a.begin(), e.a.end()) + 1.37));
  obs.push_back(clebsch_hamiltonian_observable(e));

  Vec y(n);
  AntisymMatrix l(n);
  double worst = 0.0;
  auto scaled = [](double analytic, double fd) {
    return std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1.0});
  };
  for (std::size_t s = 0; s < points; ++s) {
    detail::box_sample(rng, y, l);
    for (const Observable& o : obs) {
      const Vec gy = o.grad_y(y, l);
      for (std::size_t j = 0; j < n; ++j) {
        Vec yp = y, ym = y;
        yp[j] += step;
        ym[j] -= step;
        const double fd = (o.eval(yp, l) - o.eval(ym, l)) / (2.0 * step);
        worst = std::max(worst, scaled(gy[j], fd));
      }
      const AntisymMatrix gl = o.grad_l(y, l);
      for (std::size_t idx = 0; idx < l.size(); ++idx) {
        AntisymMatrix lp = l, lm = l;
        lp.packed()[idx] += step;
        lm.packed()[idx] -= step;
        const double fd = (o.eval(y, lp) - o.eval(y, lm)) / (2.0 * step);
        worst = std::max(worst, scaled(gl.packed()[idx], fd));
      }
    }
  }
  return worst;
}

}  // namespace geoflow
