#pragma once

// Compilation of Poisson-Hamiltonian data into executable stochastic
// dynamics: Stratonovich vector fields, Ito drift with the nested-bracket
// correction, a closed-form fast path for linear structures, and builders
// for the expanded phase-space systems.

#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "liepoisson/algebroid.hpp"
#include "liepoisson/connection.hpp"
#include "liepoisson/geometry.hpp"
#include "liepoisson/poisson.hpp"
#include "liepoisson/polynomial.hpp"

namespace liepoisson {

// Whether the Ito drift carries the standard 1/2 conversion factor on the
// nested-bracket correction. The unhalved variant exists only for auditing
// expansions that print the correction without it.
enum class ItoConvention { standard, unhalved };

inline double ito_factor(ItoConvention c) {
  return c == ItoConvention::standard ? 0.5 : 1.0;
}

// Hamiltonian data for dz = X_h dt + sum_s X_{f_s} o dB^s on (M, Lambda).
struct StochasticHamiltonianSystem {
  PoissonStructure P;
  ScalarField h;
  std::vector<ScalarField> noise;

  int dim() const { return P.m; }
  int n_noise() const { return static_cast<int>(noise.size()); }
};

inline void validate_system(const StochasticHamiltonianSystem& sys) {
  if (!sys.h.eval) {
    throw field_error(sys.P.name + ": drift Hamiltonian is empty");
  }
  if (sys.h.dim != sys.P.m) {
    throw field_error(sys.P.name + ": drift Hamiltonian has dim " +
                      std::to_string(sys.h.dim) + ", structure needs " +
                      std::to_string(sys.P.m));
  }
  for (std::size_t s = 0; s < sys.noise.size(); ++s) {
    if (!sys.noise[s].eval || sys.noise[s].dim != sys.P.m) {
      throw field_error(sys.P.name + ": noise Hamiltonian " +
                        std::to_string(s) + " has dim " +
                        std::to_string(sys.noise[s].dim) +
                        ", structure needs " + std::to_string(sys.P.m));
    }
  }
}

namespace detail {

// Fixed step for differencing an already-differenced inner bracket: the
// inner values carry O(h^2) fd noise, so sqrt(eps) spacing beats the usual
// cbrt(eps) choice.
inline double outer_step(const Vec& z) {
  static const double h0 = std::sqrt(std::numeric_limits<double>::epsilon());
  const double scale = z.size() > 0 ? z.cwiseAbs().maxCoeff() : 0.0;
  return h0 * std::max(1.0, scale);
}

// Pre-built nested brackets {z^I, f_s}; eval sums factor * {{z^I,f_s},f_s}.
// Coordinate functions enter as polynomials so the analytic chain engages
// whenever the structure has dLambda and the noise carries derivatives.
struct CorrectionEvaluator {
  std::shared_ptr<const PoissonStructure> P;
  std::vector<ScalarField> noise;
  std::vector<std::vector<ScalarField>> inner;  // [s][I] = {z^I, f_s}
  double factor = 0.5;

  Vec eval(const Vec& z) const {
    const int m = P->m;
    Vec out = Vec::Zero(m);
    if (noise.empty()) return out;
    const Mat L = P->lambda(z);
    for (std::size_t s = 0; s < noise.size(); ++s) {
      const Vec Lgf = L * fd_gradient(noise[s], z);
      for (int I = 0; I < m; ++I) {
        const ScalarField& w = inner[s][I];
        const Vec gw = w.has_grad()
                           ? w.grad(z)
                           : fd_gradient_numeric(w, z, outer_step(z));
        out[I] += factor * gw.dot(Lgf);
      }
    }
    return out;
  }
};

inline CorrectionEvaluator make_correction_evaluator(
    const StochasticHamiltonianSystem& sys, ItoConvention convention) {
  CorrectionEvaluator ev;
  ev.P = std::make_shared<const PoissonStructure>(sys.P);
  ev.noise = sys.noise;
  ev.factor = ito_factor(convention);
  const int m = sys.P.m;
  ev.inner.resize(sys.noise.size());
  for (std::size_t s = 0; s < sys.noise.size(); ++s) {
    ev.inner[s].reserve(m);
    for (int I = 0; I < m; ++I) {
      ev.inner[s].push_back(bracket_field(
          *ev.P, Polynomial::variable(m, I).field(), sys.noise[s]));
    }
  }
  return ev;
}

}  // namespace detail

// Component I of the Stratonovich-to-Ito drift correction,
//   factor * sum_s {{z^I, f_s}, f_s}(z).
inline Vec ito_correction(const StochasticHamiltonianSystem& sys, const Vec& z,
                          ItoConvention convention = ItoConvention::standard) {
  validate_system(sys);
  if (z.size() != sys.P.m) {
    throw field_error(sys.P.name + ": correction point has dim " +
                      std::to_string(z.size()) + ", structure needs " +
                      std::to_string(sys.P.m));
  }
  return detail::make_correction_evaluator(sys, convention).eval(z);
}

// Executable form of a system: Stratonovich drift X_h, diffusion columns
// X_{f_s}, and Ito drift X_h + correction. All members are pure closures
// over immutable state; concurrent evaluation is safe.
struct CompiledDynamics {
  int m = 0;
  int r = 0;
  std::function<Vec(const Vec&)> stratonovich_drift;
  std::function<Mat(const Vec&)> diffusion;
  std::function<Vec(const Vec&)> ito_drift;
};

inline CompiledDynamics compile(
    const StochasticHamiltonianSystem& sys,
    ItoConvention convention = ItoConvention::standard) {
  validate_system(sys);
  auto S = std::make_shared<const StochasticHamiltonianSystem>(sys);
  auto corr = std::make_shared<const detail::CorrectionEvaluator>(
      detail::make_correction_evaluator(sys, convention));
  CompiledDynamics dyn;
  dyn.m = sys.P.m;
  dyn.r = sys.n_noise();
  const int m = dyn.m, r = dyn.r;
  dyn.stratonovich_drift = [S](const Vec& z) {
    return hamiltonian_field(S->P, S->h, z);
  };
  dyn.diffusion = [S, m, r](const Vec& z) {
    Mat D(m, r);
    for (int s = 0; s < r; ++s) {
      D.col(s) = hamiltonian_field(S->P, S->noise[s], z);
    }
    return D;
  };
  dyn.ito_drift = [S, corr](const Vec& z) {
    return Vec(hamiltonian_field(S->P, S->h, z) + corr->eval(z));
  };
  return dyn;
}

// Closed-form dynamics for a linear structure {x^i, x^j} = L^{ij}_k x^k with
// fiber-linear noise h_a = alpha_{aj} x^j. Diffusion column a is T_a x with
// T_a(i, l) = alpha_{aj} L(i, j, l), and the correction is
// factor * sum_a T_a T_a x, the nested bracket contracted in closed form.
inline CompiledDynamics linear_fast_path(
    const Tensor3& constants, const ScalarField& h, const Mat& alphas,
    ItoConvention convention = ItoConvention::standard) {
  if (constants.d0 != constants.d1 || constants.d0 != constants.d2) {
    throw field_error("linear_fast_path: coefficient tensor must be cubic");
  }
  const int n = constants.d0;
  const int r = static_cast<int>(alphas.rows());
  if (r > 0 && alphas.cols() != n) {
    throw field_error("linear_fast_path: alphas must be r x " +
                      std::to_string(n) + ", got " + std::to_string(r) +
                      " x " + std::to_string(alphas.cols()));
  }
  if (h.dim != n || !h.eval) {
    throw field_error("linear_fast_path: drift Hamiltonian must have dim " +
                      std::to_string(n));
  }
  auto Pp = std::make_shared<const PoissonStructure>(
      linear_lie_poisson(constants));
  std::vector<Mat> T(static_cast<std::size_t>(r), Mat(Mat::Zero(n, n)));
  for (int a = 0; a < r; ++a) {
    for (int j = 0; j < n; ++j) {
      const double alpha = alphas(a, j);
      if (alpha == 0.0) continue;
      for (int i = 0; i < n; ++i) {
        for (int l = 0; l < n; ++l) T[a](i, l) += alpha * constants(i, j, l);
      }
    }
  }
  Mat M = Mat::Zero(n, n);
  for (int a = 0; a < r; ++a) M += T[a] * T[a];
  M *= ito_factor(convention);

  CompiledDynamics dyn;
  dyn.m = n;
  dyn.r = r;
  ScalarField hh = h;
  dyn.stratonovich_drift = [Pp, hh](const Vec& z) {
    return hamiltonian_field(*Pp, hh, z);
  };
  dyn.diffusion = [T, n, r](const Vec& z) {
    if (z.size() != n) {
      throw field_error("linear_fast_path: point has dim " +
                        std::to_string(z.size()) + ", expected " +
                        std::to_string(n));
    }
    ensure_finite(z, "linear_fast_path point");
    Mat D(n, r);
    for (int a = 0; a < r; ++a) D.col(a) = T[static_cast<std::size_t>(a)] * z;
    return D;
  };
  dyn.ito_drift = [Pp, hh, M](const Vec& z) {
    return Vec(hamiltonian_field(*Pp, hh, z) + M * z);
  };
  return dyn;
}

namespace detail {

// Lift a polynomial over the leading block of coordinates into dimension m.
inline Polynomial lift_poly(const Polynomial& p, int m) {
  std::vector<int> map(static_cast<std::size_t>(p.dim()));
  for (int i = 0; i < p.dim(); ++i) map[static_cast<std::size_t>(i)] = i;
  return p.embed(m, map);
}

inline void require_poly_dim(const Polynomial& p, int dim,
                             const std::string& what) {
  if (p.dim() != dim) {
    throw field_error(what + ": coefficient polynomial has dim " +
                      std::to_string(p.dim()) + ", expected " +
                      std::to_string(dim));
  }
}

inline void require_table_shape(const PolyMat& T, int rows, int cols, int dim,
                                const std::string& what) {
  if (T.rows != rows || T.cols != cols) {
    throw field_error(what + ": table must be " + std::to_string(rows) +
                      " x " + std::to_string(cols) + ", got " +
                      std::to_string(T.rows) + " x " + std::to_string(T.cols));
  }
  for (const auto& e : T.data) require_poly_dim(e, dim, what);
}

inline void require_symmetric_table(const PolyMat& T, const std::string& what) {
  for (int i = 0; i < T.rows; ++i) {
    for (int j = i + 1; j < T.cols; ++j) {
      if (!(T(i, j) - T(j, i)).is_zero()) {
        throw field_error(what + ": table must be symmetric");
      }
    }
  }
}

}  // namespace detail

// Inputs for the dual-of-an-algebroid system on (x, xi): a drift Hamiltonian
// over the dual and one section per noise channel, entering fiber-linearly
// as f_s = a_s^alpha(x) xi_alpha.
struct AlgebroidDualInputs {
  LieAlgebroid algebroid;
  ScalarField h;
  std::vector<Section> noise;
};

inline StochasticHamiltonianSystem algebroid_dual_system(
    const AlgebroidDualInputs& in) {
  StochasticHamiltonianSystem sys;
  sys.P = from_algebroid(in.algebroid);
  if (!in.h.eval || in.h.dim != sys.P.m) {
    throw field_error("algebroid_dual: h must have dim " +
                      std::to_string(sys.P.m));
  }
  sys.h = in.h;
  for (const auto& a : in.noise) {
    if (a.rank() != in.algebroid.r || a.base_dim() != in.algebroid.n) {
      throw field_error("algebroid_dual: noise section must have rank " +
                        std::to_string(in.algebroid.r) + " over base dim " +
                        std::to_string(in.algebroid.n));
    }
    sys.noise.push_back(fiber_linear_function(a));
  }
  return sys;
}

// Inputs for the cotangent-plus-dual system on (x, p, xi). The drift
// Hamiltonian is the quadratic form
//   h = 1/2 kpp(i,j) p_i p_j + kpxi(i,a) p_i xi_a + 1/2 kxixi(a,b) xi_a xi_b
// with x-dependent polynomial tables (kpp, kxixi symmetric), and noise
// channel s is g_s = a(s,alpha) xi_alpha + d(s,i) p_i.
struct WhitneySumInputs {
  LieAlgebroid algebroid;
  PolyMat kpp;    // n x n over x
  PolyMat kpxi;   // n x r over x
  PolyMat kxixi;  // r x r over x
  PolyMat a;      // n_noise x r over x
  PolyMat d;      // n_noise x n over x
};

inline StochasticHamiltonianSystem whitney_sum_system(
    const WhitneySumInputs& in) {
  const int n = in.algebroid.n, r = in.algebroid.r;
  const int m = 2 * n + r;
  const int p_off = n, xi_off = 2 * n;
  detail::require_table_shape(in.kpp, n, n, n, "whitney_sum kpp");
  detail::require_table_shape(in.kpxi, n, r, n, "whitney_sum kpxi");
  detail::require_table_shape(in.kxixi, r, r, n, "whitney_sum kxixi");
  detail::require_symmetric_table(in.kpp, "whitney_sum kpp");
  detail::require_symmetric_table(in.kxixi, "whitney_sum kxixi");
  if (in.a.rows != in.d.rows) {
    throw field_error("whitney_sum: noise tables disagree on channel count");
  }
  const int n_noise = in.a.rows;
  if (n_noise > 0) {
    detail::require_table_shape(in.a, n_noise, r, n, "whitney_sum a");
    detail::require_table_shape(in.d, n_noise, n, n, "whitney_sum d");
  }

  // The x-xi corner of the structure is the anchor; that pairing is what
  // couples base and fiber blocks in the resulting equations.
  auto Ap = std::make_shared<const LieAlgebroid>(in.algebroid);
  WhitneyExtras extras;
  extras.xxi = [Ap, n](const Vec& z) { return Ap->anchor(z.head(n)); };
  if (Ap->danchor) {
    extras.dxxi = [Ap, n](const Vec& z, int L) {
      if (L < n) return Ap->danchor(z.head(n), L);
      return Mat(Mat::Zero(n, Ap->r));
    };
  }

  StochasticHamiltonianSystem sys;
  sys.P = whitney_sum_structure(in.algebroid, extras);
  Polynomial hp = Polynomial::constant(m, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (in.kpp(i, j).is_zero()) continue;
      hp = hp + detail::lift_poly(in.kpp(i, j), m) *
                    Polynomial::variable(m, p_off + i) *
                    Polynomial::variable(m, p_off + j) * 0.5;
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int al = 0; al < r; ++al) {
      if (in.kpxi(i, al).is_zero()) continue;
      hp = hp + detail::lift_poly(in.kpxi(i, al), m) *
                    Polynomial::variable(m, p_off + i) *
                    Polynomial::variable(m, xi_off + al);
    }
  }
  for (int al = 0; al < r; ++al) {
    for (int be = 0; be < r; ++be) {
      if (in.kxixi(al, be).is_zero()) continue;
      hp = hp + detail::lift_poly(in.kxixi(al, be), m) *
                    Polynomial::variable(m, xi_off + al) *
                    Polynomial::variable(m, xi_off + be) * 0.5;
    }
  }
  sys.h = hp.field();
  for (int s = 0; s < n_noise; ++s) {
    Polynomial g = Polynomial::constant(m, 0.0);
    for (int al = 0; al < r; ++al) {
      if (in.a(s, al).is_zero()) continue;
      g = g + detail::lift_poly(in.a(s, al), m) *
                  Polynomial::variable(m, xi_off + al);
    }
    for (int i = 0; i < n; ++i) {
      if (in.d(s, i).is_zero()) continue;
      g = g + detail::lift_poly(in.d(s, i), m) *
                  Polynomial::variable(m, p_off + i);
    }
    sys.noise.push_back(g.field());
  }
  return sys;
}

// One noise channel f = a^j(x) p_j + d^c(x) mu_c on the connection-coupled
// phase space (x, p, mu).
struct AdjointBundleNoise {
  std::vector<Polynomial> a;  // n entries over x
  std::vector<Polynomial> d;  // algebra-rank entries over x
};

struct AdjointBundleInputs {
  PrincipalConnection conn;
  ScalarField h;
  std::vector<AdjointBundleNoise> noise;
  AdjointOrientation orientation = AdjointOrientation::consistent;
};

inline StochasticHamiltonianSystem adjoint_bundle_system(
    const AdjointBundleInputs& in) {
  const int n = in.conn.n, p = in.conn.algebra.p;
  const int m = 2 * n + p;
  StochasticHamiltonianSystem sys;
  sys.P = adjoint_bundle_structure(in.conn, in.orientation);
  if (!in.h.eval || in.h.dim != m) {
    throw field_error("adjoint_bundle: h must have dim " + std::to_string(m));
  }
  sys.h = in.h;
  for (const auto& ch : in.noise) {
    if (static_cast<int>(ch.a.size()) != n ||
        static_cast<int>(ch.d.size()) != p) {
      throw field_error("adjoint_bundle: noise channel needs " +
                        std::to_string(n) + " base and " + std::to_string(p) +
                        " fiber coefficients");
    }
    Polynomial f = Polynomial::constant(m, 0.0);
    for (int j = 0; j < n; ++j) {
      detail::require_poly_dim(ch.a[j], n, "adjoint_bundle a");
      if (ch.a[j].is_zero()) continue;
      f = f + detail::lift_poly(ch.a[j], m) * Polynomial::variable(m, n + j);
    }
    for (int c = 0; c < p; ++c) {
      detail::require_poly_dim(ch.d[c], n, "adjoint_bundle d");
      if (ch.d[c].is_zero()) continue;
      f = f + detail::lift_poly(ch.d[c], m) *
                  Polynomial::variable(m, 2 * n + c);
    }
    sys.noise.push_back(f.field());
  }
  return sys;
}

// One noise channel f = a^j(x) p_j + d(k,l) mu_k^l + g^l(x) mu_l; the d
// entry at (k, l) multiplies the matrix momentum mu_k^l (lower k, upper l).
struct AffineRefinementNoise {
  std::vector<Polynomial> a;  // n entries over x
  PolyMat d;                  // n x n over x
  std::vector<Polynomial> g;  // n entries over x
};

struct AffineRefinementInputs {
  AffineConnectionPackage package;
  ScalarField h;
  std::vector<AffineRefinementNoise> noise;
};

inline StochasticHamiltonianSystem affine_refinement_system(
    const AffineRefinementInputs& in) {
  const int n = in.package.n;
  const int m = 2 * n + n * n + n;
  const int mu_off = 2 * n, tr_off = 2 * n + n * n;
  StochasticHamiltonianSystem sys;
  sys.P = affine_refinement_structure(in.package);
  if (!in.h.eval || in.h.dim != m) {
    throw field_error("affine_refinement: h must have dim " +
                      std::to_string(m));
  }
  sys.h = in.h;
  for (const auto& ch : in.noise) {
    if (static_cast<int>(ch.a.size()) != n ||
        static_cast<int>(ch.g.size()) != n) {
      throw field_error("affine_refinement: noise channel needs " +
                        std::to_string(n) + " base and translation "
                        "coefficients");
    }
    detail::require_table_shape(ch.d, n, n, n, "affine_refinement d");
    Polynomial f = Polynomial::constant(m, 0.0);
    for (int j = 0; j < n; ++j) {
      detail::require_poly_dim(ch.a[j], n, "affine_refinement a");
      if (ch.a[j].is_zero()) continue;
      f = f + detail::lift_poly(ch.a[j], m) * Polynomial::variable(m, n + j);
    }
    for (int k = 0; k < n; ++k) {
      for (int l = 0; l < n; ++l) {
        if (ch.d(k, l).is_zero()) continue;
        f = f + detail::lift_poly(ch.d(k, l), m) *
                    Polynomial::variable(m, mu_off +
                                                refinement_mu_slot(n, k, l));
      }
    }
    for (int l = 0; l < n; ++l) {
      detail::require_poly_dim(ch.g[l], n, "affine_refinement g");
      if (ch.g[l].is_zero()) continue;
      f = f + detail::lift_poly(ch.g[l], m) *
                  Polynomial::variable(m, tr_off + l);
    }
    sys.noise.push_back(f.field());
  }
  return sys;
}

// One noise channel f = a^j(x,q) p_j + d^j(x,q) lambda_j + g(j,k) mu_j^k;
// coefficients are polynomials over the 2n base coordinates (x, q), and the
// g entry at (j, k) multiplies mu_j^k (lower j, upper k).
struct GlRefinementNoise {
  std::vector<Polynomial> a;  // n entries over (x, q)
  std::vector<Polynomial> d;  // n entries over (x, q)
  PolyMat g;                  // n x n over (x, q)
};

struct GlRefinementInputs {
  GlRefinementData data;
  ScalarField h;
  std::vector<GlRefinementNoise> noise;
  bool corrected = false;
};

inline StochasticHamiltonianSystem gl_refinement_system(
    const GlRefinementInputs& in) {
  const int n = in.data.n;
  const int m = 4 * n + n * n;
  const int p_off = 2 * n, lam_off = 3 * n, mu_off = 4 * n;
  StochasticHamiltonianSystem sys;
  sys.P = gl_refinement_structure(in.data, in.corrected);
  if (!in.h.eval || in.h.dim != m) {
    throw field_error("gl_refinement: h must have dim " + std::to_string(m));
  }
  sys.h = in.h;
  for (const auto& ch : in.noise) {
    if (static_cast<int>(ch.a.size()) != n ||
        static_cast<int>(ch.d.size()) != n) {
      throw field_error("gl_refinement: noise channel needs " +
                        std::to_string(n) + " horizontal and vertical "
                        "coefficients");
    }
    detail::require_table_shape(ch.g, n, n, 2 * n, "gl_refinement g");
    Polynomial f = Polynomial::constant(m, 0.0);
    for (int j = 0; j < n; ++j) {
      detail::require_poly_dim(ch.a[j], 2 * n, "gl_refinement a");
      if (!ch.a[j].is_zero()) {
        f = f + detail::lift_poly(ch.a[j], m) *
                    Polynomial::variable(m, p_off + j);
      }
      detail::require_poly_dim(ch.d[j], 2 * n, "gl_refinement d");
      if (!ch.d[j].is_zero()) {
        f = f + detail::lift_poly(ch.d[j], m) *
                    Polynomial::variable(m, lam_off + j);
      }
    }
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        if (ch.g(j, k).is_zero()) continue;
        f = f + detail::lift_poly(ch.g(j, k), m) *
                    Polynomial::variable(m, mu_off +
                                                refinement_mu_slot(n, j, k));
      }
    }
    sys.noise.push_back(f.field());
  }
  return sys;
}

using ExpandedInputs =
    std::variant<AlgebroidDualInputs, WhitneySumInputs, AdjointBundleInputs,
                 AffineRefinementInputs, GlRefinementInputs>;

// The construction route shared by every expanded kind: build the matching
// structure, assemble the fiber-linear noise Hamiltonians, and hand back the
// system for compilation or auditing.
inline StochasticHamiltonianSystem expanded_hamiltonian_system(
    const ExpandedInputs& inputs) {
  struct Builder {
    StochasticHamiltonianSystem operator()(
        const AlgebroidDualInputs& in) const {
      return algebroid_dual_system(in);
    }
    StochasticHamiltonianSystem operator()(const WhitneySumInputs& in) const {
      return whitney_sum_system(in);
    }
    StochasticHamiltonianSystem operator()(
        const AdjointBundleInputs& in) const {
      return adjoint_bundle_system(in);
    }
    StochasticHamiltonianSystem operator()(
        const AffineRefinementInputs& in) const {
      return affine_refinement_system(in);
    }
    StochasticHamiltonianSystem operator()(
        const GlRefinementInputs& in) const {
      return gl_refinement_system(in);
    }
  };
  return std::visit(Builder{}, inputs);
}

inline CompiledDynamics expanded_system(
    const ExpandedInputs& inputs,
    ItoConvention convention = ItoConvention::standard) {
  return compile(expanded_hamiltonian_system(inputs), convention);
}

}  // namespace liepoisson
