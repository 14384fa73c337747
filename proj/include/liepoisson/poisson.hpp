#pragma once

// The bracket engine. A PoissonStructure is an antisymmetric matrix field
// Lambda(z) with entries {z^I, z^J}; brackets of functions are the
// contraction grad(f) . Lambda . grad(g). Constructors cover the dual of a
// Lie algebroid, the cotangent-plus-dual Whitney sum, the adjoint bundle
// of a principal connection, and the two frame-bundle refinement
// structures. Some shipped block tables are intentionally kept exactly as
// their source formulas state them even where the Jacobi identity then
// fails; check_jacobi reports the residual instead of the constructor
// silently repairing signs, and the audit tooling depends on that.

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "liepoisson/algebroid.hpp"
#include "liepoisson/connection.hpp"
#include "liepoisson/geometry.hpp"
#include "liepoisson/polynomial.hpp"

namespace liepoisson {

struct PoissonStructure {
  int m = 0;
  std::string name;
  std::vector<std::string> labels;  // coordinate names for reporting
  std::function<Mat(const Vec&)> lambda;
  // Optional analytic derivative: dlambda(z, L) = d(lambda)/dz^L.
  std::function<Mat(const Vec&, int)> dlambda;

  bool has_analytic_derivative() const { return static_cast<bool>(dlambda); }
};

// Wraps a raw matrix field with shape, finiteness, and antisymmetry
// checks; every constructor funnels through here so the antisymmetry
// contract holds at every evaluated point.
inline PoissonStructure make_poisson_structure(
    int m, std::string name, std::vector<std::string> labels,
    std::function<Mat(const Vec&)> lambda,
    std::function<Mat(const Vec&, int)> dlambda = {}) {
  PoissonStructure P;
  P.m = m;
  P.name = name;
  P.labels = std::move(labels);
  P.lambda = [m, name, fn = std::move(lambda)](const Vec& z) {
    if (z.size() != m) {
      throw field_error(name + ": point dim " + std::to_string(z.size()) +
                        " != structure dim " + std::to_string(m));
    }
    Mat L = fn(z);
    if (L.rows() != m || L.cols() != m) {
      throw field_error(name + ": bracket matrix has wrong shape");
    }
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j <= i; ++j) {
        ensure_finite(L(i, j), "bracket matrix entry");
        if (std::abs(L(i, j) + L(j, i)) > 1e-12) {
          throw field_error(name + ": bracket matrix not antisymmetric");
        }
      }
    }
    return L;
  };
  P.dlambda = std::move(dlambda);
  return P;
}

namespace detail {

inline Mat lambda_derivative(const PoissonStructure& P, const Vec& z, int L) {
  if (P.dlambda) return P.dlambda(z, L);
  const double h = central_step(z[L], std::nullopt);
  Vec zp = z, zm = z;
  zp[L] += h;
  zm[L] -= h;
  return Mat(((P.lambda(zp) - P.lambda(zm)) / (2.0 * h)));
}

}  // namespace detail

// {f, g}(z) = grad(f) . Lambda(z) . grad(g).
inline double bracket(const PoissonStructure& P, const ScalarField& f,
                      const ScalarField& g, const Vec& z) {
  if (f.dim != P.m || g.dim != P.m) {
    throw field_error(P.name + ": bracket operands must have dim " +
                      std::to_string(P.m));
  }
  const Vec gf = fd_gradient(f, z);
  const Vec gg = fd_gradient(g, z);
  const double v = gf.dot(P.lambda(z) * gg);
  ensure_finite(v, "bracket value");
  return v;
}

// The bracket as a field, so brackets can be nested. When the structure
// carries an analytic derivative and both operands carry gradient and
// Hessian, the result carries the analytic gradient
//   d_L {f, g} = Hf_L . Lambda . grad(g) + grad(f) . d_L(Lambda) . grad(g)
//              + grad(f) . Lambda . Hg_L,
// which is what lets nested Ito corrections reach tight tolerances;
// otherwise the result is differentiated numerically when nested.
inline ScalarField bracket_field(const PoissonStructure& P,
                                 const ScalarField& f, const ScalarField& g) {
  if (f.dim != P.m || g.dim != P.m) {
    throw field_error(P.name + ": bracket operands must have dim " +
                      std::to_string(P.m));
  }
  auto Pp = std::make_shared<PoissonStructure>(P);
  auto fp = std::make_shared<ScalarField>(f);
  auto gp = std::make_shared<ScalarField>(g);
  ScalarField out;
  out.dim = P.m;
  out.eval = [Pp, fp, gp](const Vec& z) { return bracket(*Pp, *fp, *gp, z); };
  if (P.has_analytic_derivative() && f.has_grad() && f.has_hess() &&
      g.has_grad() && g.has_hess()) {
    out.grad = [Pp, fp, gp](const Vec& z) {
      const Mat L = Pp->lambda(z);
      const Vec gf = fp->grad(z);
      const Vec gg = gp->grad(z);
      const Mat Hf = fp->hess(z);
      const Mat Hg = gp->hess(z);
      const int m = Pp->m;
      Vec out_g(m);
      const Vec Lgg = L * gg;
      const Vec Ltgf = L.transpose() * gf;
      for (int l = 0; l < m; ++l) {
        double v = Hf.row(l).dot(Lgg);
        v += gf.dot(Pp->dlambda(z, l) * gg);
        v += Ltgf.dot(Hg.col(l));
        out_g[l] = v;
      }
      return out_g;
    };
  }
  return out;
}

// Hamiltonian vector field: component I = Lambda^{IJ}(z) d_J h.
inline Vec hamiltonian_field(const PoissonStructure& P, const ScalarField& h,
                             const Vec& z) {
  if (h.dim != P.m) {
    throw field_error(P.name + ": hamiltonian must have dim " +
                      std::to_string(P.m));
  }
  return P.lambda(z) * fd_gradient(h, z);
}

struct JacobiReport {
  double max_residual = 0.0;
  int worst_I = -1, worst_J = -1, worst_K = -1;
  int n_samples = 0;
  bool used_analytic = false;
};

// Residual of the Jacobi identity in coordinates: for each triple (I,J,K),
//   sum_L Lambda^{LI} d_L Lambda^{JK} + cyclic.
inline JacobiReport check_jacobi(const PoissonStructure& P,
                                 const std::vector<Vec>& samples) {
  JacobiReport rep;
  rep.n_samples = static_cast<int>(samples.size());
  rep.used_analytic = P.has_analytic_derivative();
  const int m = P.m;
  for (const Vec& z : samples) {
    const Mat L = P.lambda(z);
    std::vector<Mat> dL;
    dL.reserve(m);
    for (int l = 0; l < m; ++l) dL.push_back(detail::lambda_derivative(P, z, l));
    for (int I = 0; I < m; ++I) {
      for (int J = I + 1; J < m; ++J) {
        for (int K = J + 1; K < m; ++K) {
          double res = 0.0;
          for (int l = 0; l < m; ++l) {
            res += L(l, I) * dL[l](J, K) + L(l, J) * dL[l](K, I) +
                   L(l, K) * dL[l](I, J);
          }
          if (std::abs(res) > rep.max_residual) {
            rep.max_residual = std::abs(res);
            rep.worst_I = I;
            rep.worst_J = J;
            rep.worst_K = K;
          }
        }
      }
    }
  }
  return rep;
}

// Max |Lambda + Lambda^T| over the samples. The evaluation wrapper already
// rejects asymmetry beyond 1e-12, so this reports the sub-tolerance level.
inline double check_antisymmetry(const PoissonStructure& P,
                                 const std::vector<Vec>& samples) {
  double worst = 0.0;
  for (const Vec& z : samples) {
    const Mat L = P.lambda(z);
    worst = std::max(worst, (L + L.transpose()).cwiseAbs().maxCoeff());
  }
  return worst;
}

namespace detail {

inline std::vector<std::string> indexed_labels(const std::string& stem, int n,
                                               std::vector<std::string> acc = {}) {
  for (int i = 1; i <= n; ++i) acc.push_back(stem + std::to_string(i));
  return acc;
}

}  // namespace detail

// Linear structure {x^i, x^j} = L^{ij}_k x^k from a constant coefficient
// tensor stored at (i, j, k). The coefficients must be antisymmetric in
// (i, j); the Jacobi identity is the caller's claim, checkable afterwards.
inline PoissonStructure linear_lie_poisson(const Tensor3& L) {
  if (L.d0 != L.d1 || L.d0 != L.d2) {
    throw field_error("linear_lie_poisson: coefficient tensor must be cubic");
  }
  const int n = L.d0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        if (std::abs(L(i, j, k) + L(j, i, k)) > 1e-12) {
          throw field_error(
              "linear_lie_poisson: coefficients not antisymmetric in (i, j)");
        }
      }
    }
  }
  auto T = std::make_shared<Tensor3>(L);
  return make_poisson_structure(
      n, "linear_lie_poisson", detail::indexed_labels("x", n),
      [T, n](const Vec& x) {
        Mat out = Mat::Zero(n, n);
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < n; ++j) {
            double v = 0.0;
            for (int k = 0; k < n; ++k) v += (*T)(i, j, k) * x[k];
            out(i, j) = v;
          }
        }
        return out;
      },
      [T, n](const Vec&, int k) {
        Mat out(n, n);
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < n; ++j) out(i, j) = (*T)(i, j, k);
        }
        return out;
      });
}

// The structure on the dual bundle of a Lie algebroid, coordinates
// (x, xi), as the block matrix
//   [ 0    b(x)          ]
//   [ -b^T C(x)^g_ab xi_g ].
// Analytic derivatives are wired whenever the algebroid carries them.
inline PoissonStructure from_algebroid(const LieAlgebroid& A) {
  const int n = A.n, r = A.r, m = n + r;
  auto Ap = std::make_shared<LieAlgebroid>(A);
  auto lambda = [Ap, n, r, m](const Vec& z) {
    const Vec x = z.head(n);
    const Vec xi = z.tail(r);
    const Mat b = Ap->anchor(x);
    const Tensor3 C = Ap->structure(x);
    Mat out = Mat::Zero(m, m);
    out.topRightCorner(n, r) = b;
    out.bottomLeftCorner(r, n) = -b.transpose();
    for (int al = 0; al < r; ++al) {
      for (int be = 0; be < r; ++be) {
        double v = 0.0;
        for (int g = 0; g < r; ++g) v += C(g, al, be) * xi[g];
        out(n + al, n + be) = v;
      }
    }
    return out;
  };
  std::function<Mat(const Vec&, int)> dlambda;
  if (A.has_analytic_derivatives()) {
    dlambda = [Ap, n, r, m](const Vec& z, int L) {
      Mat out = Mat::Zero(m, m);
      const Vec x = z.head(n);
      if (L < n) {
        const Mat db = Ap->danchor(x, L);
        const Tensor3 dC = Ap->dstructure(x, L);
        const Vec xi = z.tail(r);
        out.topRightCorner(n, r) = db;
        out.bottomLeftCorner(r, n) = -db.transpose();
        for (int al = 0; al < r; ++al) {
          for (int be = 0; be < r; ++be) {
            double v = 0.0;
            for (int g = 0; g < r; ++g) v += dC(g, al, be) * xi[g];
            out(n + al, n + be) = v;
          }
        }
      } else {
        const int g = L - n;
        const Tensor3 C = Ap->structure(x);
        for (int al = 0; al < r; ++al) {
          for (int be = 0; be < r; ++be) out(n + al, n + be) = C(g, al, be);
        }
      }
      return out;
    };
  }
  return make_poisson_structure(
      m, "algebroid_dual",
      detail::indexed_labels("xi", r, detail::indexed_labels("x", n)),
      std::move(lambda), std::move(dlambda));
}

// The blocks of the Whitney-sum structure that its defining table leaves
// symbolic. Each is a function of the full point (x, p, xi) of dim
// 2n + r; absent entries mean identically zero. pp must itself be
// antisymmetric; xxi and pxi are n x r and enter with their negated
// transpose automatically. d* entries are analytic derivatives in
// direction L of the full point; supply them to keep the assembled
// structure analytically differentiable.
struct WhitneyExtras {
  std::function<Mat(const Vec&)> pp;
  std::function<Mat(const Vec&)> xxi;
  std::function<Mat(const Vec&)> pxi;
  std::function<Mat(const Vec&, int)> dpp;
  std::function<Mat(const Vec&, int)> dxxi;
  std::function<Mat(const Vec&, int)> dpxi;
};

// Structure on the Whitney sum of the cotangent bundle and the dual
// bundle, coordinates (x, p, xi):
//   {x^i, p_j} = delta^i_j, {xi_a, xi_b} = C^g_ab xi_g,
// with the {p,p}, {x,xi}, {p,xi} blocks caller-supplied (defaults 0).
inline PoissonStructure whitney_sum_structure(const LieAlgebroid& A,
                                              const WhitneyExtras& extras = {}) {
  const int n = A.n, r = A.r, m = 2 * n + r;
  auto Ap = std::make_shared<LieAlgebroid>(A);
  auto Ep = std::make_shared<WhitneyExtras>(extras);
  auto block = [n, r](const std::function<Mat(const Vec&)>& fn, const Vec& z,
                      int rows, int cols, const char* which) {
    if (!fn) return Mat(Mat::Zero(rows, cols));
    Mat B = fn(z);
    if (B.rows() != rows || B.cols() != cols) {
      throw field_error(std::string("whitney_sum: ") + which +
                        " block has wrong shape");
    }
    return B;
  };
  auto lambda = [Ap, Ep, n, r, m, block](const Vec& z) {
    const Vec x = z.head(n);
    const Vec xi = z.tail(r);
    Mat out = Mat::Zero(m, m);
    out.block(0, n, n, n) = Mat::Identity(n, n);
    out.block(n, 0, n, n) = -Mat::Identity(n, n);
    const Mat pp = block(Ep->pp, z, n, n, "pp");
    out.block(n, n, n, n) = pp;
    const Mat xxi = block(Ep->xxi, z, n, r, "x-xi");
    out.block(0, 2 * n, n, r) = xxi;
    out.block(2 * n, 0, r, n) = -xxi.transpose();
    const Mat pxi = block(Ep->pxi, z, n, r, "p-xi");
    out.block(n, 2 * n, n, r) = pxi;
    out.block(2 * n, n, r, n) = -pxi.transpose();
    const Tensor3 C = Ap->structure(x);
    for (int al = 0; al < r; ++al) {
      for (int be = 0; be < r; ++be) {
        double v = 0.0;
        for (int g = 0; g < r; ++g) v += C(g, al, be) * xi[g];
        out(2 * n + al, 2 * n + be) = v;
      }
    }
    return out;
  };
  const bool extras_differentiable =
      (!extras.pp || extras.dpp) && (!extras.xxi || extras.dxxi) &&
      (!extras.pxi || extras.dpxi);
  std::function<Mat(const Vec&, int)> dlambda;
  if (A.has_analytic_derivatives() && extras_differentiable) {
    dlambda = [Ap, Ep, n, r, m, block](const Vec& z, int L) {
      Mat out = Mat::Zero(m, m);
      const Vec x = z.head(n);
      if (Ep->dpp) out.block(n, n, n, n) = block(
          [&](const Vec& w) { return Ep->dpp(w, L); }, z, n, n, "dpp");
      if (Ep->dxxi) {
        const Mat d = block([&](const Vec& w) { return Ep->dxxi(w, L); }, z, n,
                            r, "dx-xi");
        out.block(0, 2 * n, n, r) = d;
        out.block(2 * n, 0, r, n) = -d.transpose();
      }
      if (Ep->dpxi) {
        const Mat d = block([&](const Vec& w) { return Ep->dpxi(w, L); }, z, n,
                            r, "dp-xi");
        out.block(n, 2 * n, n, r) = d;
        out.block(2 * n, n, r, n) = -d.transpose();
      }
      if (L < n) {
        const Tensor3 dC = Ap->dstructure(x, L);
        const Vec xi = z.tail(r);
        for (int al = 0; al < r; ++al) {
          for (int be = 0; be < r; ++be) {
            double v = 0.0;
            for (int g = 0; g < r; ++g) v += dC(g, al, be) * xi[g];
            out(2 * n + al, 2 * n + be) += v;
          }
        }
      } else if (L >= 2 * n) {
        const int g = L - 2 * n;
        const Tensor3 C = Ap->structure(x);
        for (int al = 0; al < r; ++al) {
          for (int be = 0; be < r; ++be) out(2 * n + al, 2 * n + be) += C(g, al, be);
        }
      }
      return out;
    };
  }
  auto labels = detail::indexed_labels(
      "xi", r, detail::indexed_labels("p", n, detail::indexed_labels("x", n)));
  auto P = make_poisson_structure(m, "whitney_sum", std::move(labels),
                                  std::move(lambda), std::move(dlambda));
  // Supplied blocks that break antisymmetry must fail at construction, not
  // first use.
  P.lambda(Vec::Zero(m));
  return P;
}

// Sign orientation of the adjoint-bundle structure. The source table
// pairs {p_i, p_j} = -B^c_{ij} mu_c and {p_i, mu_a} = +C^c_{ab} A^b_i mu_c
// with {mu_a, mu_b} = +C^c_{ab} mu_c; the Jacobi identity for a curved
// nonabelian connection forces the mu-mu sign to match the curvature sign
// (both blocks derive from the same trivialization), so the consistent
// orientation flips it to -C^c_{ab} mu_c. as_printed keeps the table
// verbatim; check_jacobi exposes the difference.
enum class AdjointOrientation { consistent, as_printed };

// Structure on the dual adjoint bundle over the cotangent bundle,
// coordinates (x, p, mu), dim 2n + p:
//   {x^i, p_j} = delta^i_j,        {x^i, mu_a} = 0,
//   {p_i, p_j} = -B^c_{ij} mu_c,   {p_i, mu_a} = C^c_{ab} A^b_i mu_c,
//   {mu_a, mu_b} = smu C^c_{ab} mu_c   (smu per orientation).
inline PoissonStructure adjoint_bundle_structure(
    const PrincipalConnection& conn,
    AdjointOrientation orientation = AdjointOrientation::consistent) {
  const int n = conn.n, p = conn.algebra.p, m = 2 * n + p;
  const double smu =
      orientation == AdjointOrientation::consistent ? -1.0 : 1.0;
  auto cp = std::make_shared<PrincipalConnection>(conn);
  auto lambda = [cp, n, p, m, smu](const Vec& z) {
    const Vec x = z.head(n);
    const Vec mu = z.tail(p);
    const Mat A = cp->coeff(x);
    const Tensor3 B = curvature(*cp, x);
    const Tensor3& C = cp->algebra.constants;
    Mat out = Mat::Zero(m, m);
    out.block(0, n, n, n) = Mat::Identity(n, n);
    out.block(n, 0, n, n) = -Mat::Identity(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        double v = 0.0;
        for (int c = 0; c < p; ++c) v -= B(c, i, j) * mu[c];
        out(n + i, n + j) = v;
      }
    }
    for (int i = 0; i < n; ++i) {
      for (int a = 0; a < p; ++a) {
        double v = 0.0;
        for (int c = 0; c < p; ++c) {
          for (int b = 0; b < p; ++b) v += C(c, a, b) * A(b, i) * mu[c];
        }
        out(n + i, 2 * n + a) = v;
        out(2 * n + a, n + i) = -v;
      }
    }
    for (int a = 0; a < p; ++a) {
      for (int b = 0; b < p; ++b) {
        double v = 0.0;
        for (int c = 0; c < p; ++c) v += smu * C(c, a, b) * mu[c];
        out(2 * n + a, 2 * n + b) = v;
      }
    }
    return out;
  };
  std::function<Mat(const Vec&, int)> dlambda;
  if (conn.poly) {
    struct Backing {
      PolyTensor3 B;                 // curvature, symbolic
      std::vector<PolyTensor3> dB;   // per base direction
    };
    auto bk = std::make_shared<Backing>();
    bk->B = polynomial_curvature(conn.algebra, *conn.poly, n);
    for (int j = 0; j < n; ++j) {
      PolyTensor3 d(p, n, n, n);
      for (int c = 0; c < p; ++c) {
        for (int i1 = 0; i1 < n; ++i1) {
          for (int i2 = 0; i2 < n; ++i2) d(c, i1, i2) = bk->B(c, i1, i2).derivative(j);
        }
      }
      bk->dB.push_back(std::move(d));
    }
    dlambda = [cp, bk, n, p, m, smu](const Vec& z, int L) {
      Mat out = Mat::Zero(m, m);
      const Vec x = z.head(n);
      const Tensor3& C = cp->algebra.constants;
      if (L < n) {
        const Vec mu = z.tail(p);
        const Mat dA = cp->dcoeff(x, L);
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < n; ++j) {
            double v = 0.0;
            for (int c = 0; c < p; ++c) v -= bk->dB[L](c, i, j).eval(x) * mu[c];
            out(n + i, n + j) = v;
          }
        }
        for (int i = 0; i < n; ++i) {
          for (int a = 0; a < p; ++a) {
            double v = 0.0;
            for (int c = 0; c < p; ++c) {
              for (int b = 0; b < p; ++b) v += C(c, a, b) * dA(b, i) * mu[c];
            }
            out(n + i, 2 * n + a) = v;
            out(2 * n + a, n + i) = -v;
          }
        }
      } else if (L >= 2 * n) {
        const int c = L - 2 * n;
        const Mat A = cp->coeff(x);
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < n; ++j) out(n + i, n + j) = -bk->B(c, i, j).eval(x);
        }
        for (int i = 0; i < n; ++i) {
          for (int a = 0; a < p; ++a) {
            double v = 0.0;
            for (int b = 0; b < p; ++b) v += C(c, a, b) * A(b, i);
            out(n + i, 2 * n + a) = v;
            out(2 * n + a, n + i) = -v;
          }
        }
        for (int a = 0; a < p; ++a) {
          for (int b = 0; b < p; ++b) out(2 * n + a, 2 * n + b) = smu * C(c, a, b);
        }
      }
      return out;
    };
  }
  auto labels = detail::indexed_labels(
      "mu", p, detail::indexed_labels("p", n, detail::indexed_labels("x", n)));
  return make_poisson_structure(m, "adjoint_bundle", std::move(labels),
                                std::move(lambda), std::move(dlambda));
}

// Coordinate layout shared by the refinement structures: the matrix
// coordinate mu_k^l (lower k, upper l) pairs with the basis slot
// gl_flat(l, k), and the split curvature entry B^l_{kij} sits at basis
// slot gl_flat(k, l). Unit tests pin both.
inline int refinement_mu_slot(int n, int k_low, int l_up) {
  return gl_flat(n, l_up, k_low);
}

// Structure for the affine refinement, coordinates
// (x^i, p_i, mu_k^l, mu_l), dim 2n + n^2 + n, assembled verbatim from its
// source table:
//   {x^i, p_j} = delta^i_j, all other x-brackets 0,
//   {p_i, p_j} = -B^l_{kij} mu_l^k... contracted against the matrix and
//                translation momenta,
//   {p_i, mu_k^l} = (A^p_{ki} d^l_q - A^l_{qi} d^p_k) mu_p^q - A^l_i mu_k,
//   {p_i, mu_k} = A^p_{ki} mu_p,
//   {mu_j^i, mu_k^l} = d^i_k mu_j^l - d^l_j mu_k^i,
//   {mu_k^i, mu_j} = d^i_k mu_j   (as the table states it),
//   {mu_i, mu_j} = 0.
// The table's matrix-translation coupling disagrees with the bracket of
// the underlying algebra; check_jacobi reports the resulting residual.
inline PoissonStructure affine_refinement_structure(
    const AffineConnectionPackage& pkg) {
  const int n = pkg.n;
  const int m = 2 * n + n * n + n;
  const int mu_off = 2 * n;
  const int tr_off = 2 * n + n * n;
  struct Backing {
    int n;
    PolyTensor3 Agl;               // (h, k, r) = A^h_{kr}
    PolyMat Atr;                   // (h, k) = A^h_k
    PolyTensor3 B;                 // assembled ga curvature by slot
    std::vector<PolyTensor3> dAgl;
    std::vector<PolyMat> dAtr;
    std::vector<PolyTensor3> dB;
  };
  auto bk = std::make_shared<Backing>();
  bk->n = n;
  bk->Agl = *pkg.gl_table;
  bk->Atr = *pkg.translation_table;
  bk->B = polynomial_curvature(pkg.ga, *pkg.conn.poly, n);
  const int pga = pkg.ga.p;
  for (int d = 0; d < n; ++d) {
    PolyTensor3 dA(n, n, n, n);
    PolyMat dT(n, n, n);
    PolyTensor3 dB(pga, n, n, n);
    for (int h = 0; h < n; ++h) {
      for (int k = 0; k < n; ++k) {
        for (int r = 0; r < n; ++r) dA(h, k, r) = bk->Agl(h, k, r).derivative(d);
        dT(h, k) = bk->Atr(h, k).derivative(d);
      }
    }
    for (int a = 0; a < pga; ++a) {
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) dB(a, i, j) = bk->B(a, i, j).derivative(d);
      }
    }
    bk->dAgl.push_back(std::move(dA));
    bk->dAtr.push_back(std::move(dT));
    bk->dB.push_back(std::move(dB));
  }
  // Fills the momentum-sector blocks given evaluated coefficient tables;
  // shared between lambda and its derivative (which passes derivative
  // tables or masked momenta).
  auto fill = [n, m, mu_off, tr_off](const Tensor3& Agl, const Mat& Atr,
                                     const Tensor3& Bga, const Vec& z,
                                     bool with_mu_blocks) {
    Mat out = Mat::Zero(m, m);
    auto mu_gl = [&](int k, int l) { return z[mu_off + refinement_mu_slot(n, k, l)]; };
    auto mu_tr = [&](int k) { return z[tr_off + k]; };
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        double v = 0.0;
        for (int k = 0; k < n; ++k) {
          for (int l = 0; l < n; ++l) v -= Bga(gl_flat(n, k, l), i, j) * mu_gl(k, l);
        }
        for (int l = 0; l < n; ++l) v -= Bga(n * n + l, i, j) * mu_tr(l);
        out(n + i, n + j) = v;
      }
    }
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < n; ++k) {
        for (int l = 0; l < n; ++l) {
          double v = 0.0;
          for (int pp = 0; pp < n; ++pp) v += Agl(pp, k, i) * mu_gl(pp, l);
          for (int q = 0; q < n; ++q) v -= Agl(l, q, i) * mu_gl(k, q);
          v -= Atr(l, i) * mu_tr(k);
          const int col = mu_off + refinement_mu_slot(n, k, l);
          out(n + i, col) = v;
          out(col, n + i) = -v;
        }
        double w = 0.0;
        for (int pp = 0; pp < n; ++pp) w += Agl(pp, k, i) * mu_tr(pp);
        out(n + i, tr_off + k) = w;
        out(tr_off + k, n + i) = -w;
      }
    }
    if (with_mu_blocks) {
      for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
          for (int k = 0; k < n; ++k) {
            for (int l = 0; l < n; ++l) {
              // {mu_j^i, mu_k^l} = d^i_k mu_j^l - d^l_j mu_k^i
              double v = 0.0;
              if (i == k) v += mu_gl(j, l);
              if (l == j) v -= mu_gl(k, i);
              out(mu_off + refinement_mu_slot(n, j, i),
                  mu_off + refinement_mu_slot(n, k, l)) = v;
            }
          }
        }
      }
      for (int k = 0; k < n; ++k) {
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < n; ++j) {
            // {mu_k^i, mu_j} = d^i_k mu_j
            const double v = (i == k) ? mu_tr(j) : 0.0;
            out(mu_off + refinement_mu_slot(n, k, i), tr_off + j) = v;
            out(tr_off + j, mu_off + refinement_mu_slot(n, k, i)) = -v;
          }
        }
      }
    }
    return out;
  };
  auto eval_tables = [](const Backing& b, const Vec& x, Tensor3& Agl, Mat& Atr,
                        Tensor3& Bga) {
    const int n = b.n;
    Agl = Tensor3(n, n, n);
    for (int h = 0; h < n; ++h) {
      for (int k = 0; k < n; ++k) {
        for (int r = 0; r < n; ++r) Agl(h, k, r) = b.Agl(h, k, r).eval(x);
      }
    }
    Atr = b.Atr.eval(x);
    const int p = b.B.d0;
    Bga = Tensor3(p, n, n);
    for (int a = 0; a < p; ++a) {
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) Bga(a, i, j) = b.B(a, i, j).eval(x);
      }
    }
  };
  auto lambda = [bk, n, m, fill, eval_tables](const Vec& z) {
    const Vec x = z.head(n);
    Tensor3 Agl, Bga;
    Mat Atr;
    eval_tables(*bk, x, Agl, Atr, Bga);
    Mat out = fill(Agl, Atr, Bga, z, true);
    out.block(0, n, n, n) = Mat::Identity(n, n);
    out.block(n, 0, n, n) -= Mat::Identity(n, n);
    return out;
  };
  auto dlambda = [bk, n, m, fill, eval_tables](const Vec& z, int L) {
    if (L < n) {
      // Derivative tables, same momenta.
      Tensor3 dAgl(n, n, n), dBga(bk->B.d0, n, n);
      Mat dAtr(n, n);
      const Vec x = z.head(n);
      for (int h = 0; h < n; ++h) {
        for (int k = 0; k < n; ++k) {
          for (int r = 0; r < n; ++r) dAgl(h, k, r) = bk->dAgl[L](h, k, r).eval(x);
          dAtr(h, k) = bk->dAtr[L](h, k).eval(x);
        }
      }
      for (int a = 0; a < bk->B.d0; ++a) {
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < n; ++j) dBga(a, i, j) = bk->dB[L](a, i, j).eval(x);
        }
      }
      // The mu-mu blocks have constant coefficients, so they drop out of
      // base-direction derivatives.
      return fill(dAgl, dAtr, dBga, z, false);
    }
    if (L < 2 * n) return Mat(Mat::Zero(m, m));
    // Momentum direction: same tables, unit momentum vector.
    const Vec x = z.head(n);
    Tensor3 Agl, Bga;
    Mat Atr;
    eval_tables(*bk, x, Agl, Atr, Bga);
    Vec e = Vec::Zero(m);
    e[L] = 1.0;
    return fill(Agl, Atr, Bga, e, true);
  };
  std::vector<std::string> labels =
      detail::indexed_labels("p", n, detail::indexed_labels("x", n));
  labels.resize(m);
  for (int k = 0; k < n; ++k) {
    for (int l = 0; l < n; ++l) {
      labels[mu_off + refinement_mu_slot(n, k, l)] =
          "mu_" + std::to_string(k + 1) + "^" + std::to_string(l + 1);
    }
  }
  for (int l = 0; l < n; ++l) labels[tr_off + l] = "mu_" + std::to_string(l + 1);
  return make_poisson_structure(m, "affine_refinement", std::move(labels),
                                std::move(lambda), std::move(dlambda));
}

// Connection and curvature data for the frame-bundle refinement over a
// doubled base (x, q). A and Bq are the x- and q-direction connection
// tables, entry (h, k, r) = coefficient with upper h, lower k, direction
// r; all polynomials in the 2n variables (x, q). The three curvature
// flavors are caller-supplied tensors with entry (k, l, i, j) = B^l_{kij}
// for the dx^i dx^j, dq^i dq^j, and dx^i dq^j parts respectively; the
// source reuses one symbol for all three.
struct GlRefinementData {
  int n = 0;
  PolyTensor3 A;
  PolyTensor3 Bq;
  PolyTensor4 Bxx;
  PolyTensor4 Bqq;
  PolyTensor4 Bxq;
};

inline GlRefinementData zero_gl_refinement_data(int n) {
  GlRefinementData d;
  d.n = n;
  d.A = PolyTensor3(n, n, n, 2 * n);
  d.Bq = PolyTensor3(n, n, n, 2 * n);
  d.Bxx = PolyTensor4(n, n, n, n, 2 * n);
  d.Bqq = PolyTensor4(n, n, n, n, 2 * n);
  d.Bxq = PolyTensor4(n, n, n, n, 2 * n);
  return d;
}

// Structure for the frame-bundle refinement, coordinates
// (x^i, q^i, p_i, lambda_i, mu_k^l), dim 4n + n^2, assembled verbatim:
//   {x^i, p_j} = delta^i_j, {x^i, lambda_j} = delta^i_j (as the table
//   states; `corrected` replaces it with {q^i, lambda_j} = delta^i_j),
//   {p_i, p_j} = -(1/2) Bxx^l_{kij} mu_l^k,
//   {p_i, lambda_j} = -(1/2) Bxq^l_{kij} mu_l^k,
//   {lambda_i, lambda_j} = -(1/2) Bqq^l_{kij} mu_l^k,
//   {p_i, mu_k^l} = (A^p_{ki} d^l_q - A^l_{qi} d^p_k) mu_p^q,
//   {lambda_i, mu_k^l} = same with the q-direction table,
//   {mu_j^i, mu_k^l} = d^i_k mu_j^l - d^l_j mu_k^i,
// everything else zero.
inline PoissonStructure gl_refinement_structure(const GlRefinementData& data,
                                                bool corrected = false) {
  const int n = data.n;
  const int m = 4 * n + n * n;
  const int mu_off = 4 * n;
  auto dp = std::make_shared<GlRefinementData>(data);
  auto lambda = [dp, n, m, mu_off, corrected](const Vec& z) {
    const Vec xq = z.head(2 * n);
    auto mu = [&](int k, int l) { return z[mu_off + refinement_mu_slot(n, k, l)]; };
    Mat out = Mat::Zero(m, m);
    for (int i = 0; i < n; ++i) {
      out(i, 2 * n + i) = 1.0;      // {x^i, p_i}
      out(2 * n + i, i) = -1.0;
      if (corrected) {
        out(n + i, 3 * n + i) = 1.0;  // {q^i, lambda_i}
        out(3 * n + i, n + i) = -1.0;
      } else {
        out(i, 3 * n + i) = 1.0;      // {x^i, lambda_i} as printed
        out(3 * n + i, i) = -1.0;
      }
    }
    auto curv = [&](const PolyTensor4& B, int i, int j) {
      double v = 0.0;
      for (int k = 0; k < n; ++k) {
        for (int l = 0; l < n; ++l) {
          v -= 0.5 * B(k, l, i, j).eval(xq) * mu(l, k);
        }
      }
      return v;
    };
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        out(2 * n + i, 2 * n + j) = curv(dp->Bxx, i, j);
        out(3 * n + i, 3 * n + j) = curv(dp->Bqq, i, j);
        const double v = curv(dp->Bxq, i, j);
        out(2 * n + i, 3 * n + j) = v;
        out(3 * n + j, 2 * n + i) = -v;
      }
    }
    auto conn_block = [&](const PolyTensor3& T, int row0) {
      for (int i = 0; i < n; ++i) {
        for (int k = 0; k < n; ++k) {
          for (int l = 0; l < n; ++l) {
            double v = 0.0;
            for (int pp = 0; pp < n; ++pp) v += T(pp, k, i).eval(xq) * mu(pp, l);
            for (int q = 0; q < n; ++q) v -= T(l, q, i).eval(xq) * mu(k, q);
            const int col = mu_off + refinement_mu_slot(n, k, l);
            out(row0 + i, col) = v;
            out(col, row0 + i) = -v;
          }
        }
      }
    };
    conn_block(dp->A, 2 * n);
    conn_block(dp->Bq, 3 * n);
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        for (int k = 0; k < n; ++k) {
          for (int l = 0; l < n; ++l) {
            double v = 0.0;
            if (i == k) v += mu(j, l);
            if (l == j) v -= mu(k, i);
            out(mu_off + refinement_mu_slot(n, j, i),
                mu_off + refinement_mu_slot(n, k, l)) = v;
          }
        }
      }
    }
    return out;
  };
  // Analytic derivative: base directions differentiate the tables; the
  // momentum sector is linear in mu and independent of (p, lambda).
  auto dlambda = [dp, n, m, mu_off](const Vec& z, int L) {
    Mat out = Mat::Zero(m, m);
    const Vec xq = z.head(2 * n);
    if (L < 2 * n) {
      auto mu = [&](int k, int l) { return z[mu_off + refinement_mu_slot(n, k, l)]; };
      auto curv = [&](const PolyTensor4& B, int i, int j) {
        double v = 0.0;
        for (int k = 0; k < n; ++k) {
          for (int l = 0; l < n; ++l) {
            v -= 0.5 * B(k, l, i, j).derivative(L).eval(xq) * mu(l, k);
          }
        }
        return v;
      };
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          out(2 * n + i, 2 * n + j) = curv(dp->Bxx, i, j);
          out(3 * n + i, 3 * n + j) = curv(dp->Bqq, i, j);
          const double v = curv(dp->Bxq, i, j);
          out(2 * n + i, 3 * n + j) = v;
          out(3 * n + j, 2 * n + i) = -v;
        }
      }
      auto conn_block = [&](const PolyTensor3& T, int row0) {
        for (int i = 0; i < n; ++i) {
          for (int k = 0; k < n; ++k) {
            for (int l = 0; l < n; ++l) {
              double v = 0.0;
              for (int pp = 0; pp < n; ++pp)
                v += T(pp, k, i).derivative(L).eval(xq) * mu(pp, l);
              for (int q = 0; q < n; ++q)
                v -= T(l, q, i).derivative(L).eval(xq) * mu(k, q);
              const int col = mu_off + refinement_mu_slot(n, k, l);
              out(row0 + i, col) = v;
              out(col, row0 + i) = -v;
            }
          }
        }
      };
      conn_block(dp->A, 2 * n);
      conn_block(dp->Bq, 3 * n);
      return out;
    }
    if (L < mu_off) return out;
    // mu direction: differentiate the mu-linear blocks.
    auto dmu = [&](int k, int l) {
      return L == mu_off + refinement_mu_slot(n, k, l) ? 1.0 : 0.0;
    };
    auto curv = [&](const PolyTensor4& B, int i, int j) {
      double v = 0.0;
      for (int k = 0; k < n; ++k) {
        for (int l = 0; l < n; ++l) v -= 0.5 * B(k, l, i, j).eval(xq) * dmu(l, k);
      }
      return v;
    };
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        out(2 * n + i, 2 * n + j) = curv(dp->Bxx, i, j);
        out(3 * n + i, 3 * n + j) = curv(dp->Bqq, i, j);
        const double v = curv(dp->Bxq, i, j);
        out(2 * n + i, 3 * n + j) = v;
        out(3 * n + j, 2 * n + i) = -v;
      }
    }
    auto conn_block = [&](const PolyTensor3& T, int row0) {
      for (int i = 0; i < n; ++i) {
        for (int k = 0; k < n; ++k) {
          for (int l = 0; l < n; ++l) {
            double v = 0.0;
            for (int pp = 0; pp < n; ++pp) v += T(pp, k, i).eval(xq) * dmu(pp, l);
            for (int q = 0; q < n; ++q) v -= T(l, q, i).eval(xq) * dmu(k, q);
            const int col = mu_off + refinement_mu_slot(n, k, l);
            out(row0 + i, col) = v;
            out(col, row0 + i) = -v;
          }
        }
      }
    };
    conn_block(dp->A, 2 * n);
    conn_block(dp->Bq, 3 * n);
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        for (int k = 0; k < n; ++k) {
          for (int l = 0; l < n; ++l) {
            double v = 0.0;
            if (i == k) v += dmu(j, l);
            if (l == j) v -= dmu(k, i);
            out(mu_off + refinement_mu_slot(n, j, i),
                mu_off + refinement_mu_slot(n, k, l)) = v;
          }
        }
      }
    }
    return out;
  };
  std::vector<std::string> labels = detail::indexed_labels(
      "lam", n,
      detail::indexed_labels(
          "p", n, detail::indexed_labels("q", n, detail::indexed_labels("x", n))));
  labels.resize(m);
  for (int k = 0; k < n; ++k) {
    for (int l = 0; l < n; ++l) {
      labels[mu_off + refinement_mu_slot(n, k, l)] =
          "mu_" + std::to_string(k + 1) + "^" + std::to_string(l + 1);
    }
  }
  return make_poisson_structure(
      m, corrected ? "gl_refinement_corrected" : "gl_refinement",
      std::move(labels), std::move(lambda), std::move(dlambda));
}

}  // namespace liepoisson
