#pragma once

// Principal-connection data over a chart: a finite-dimensional Lie algebra
// given by structure constants C^a_{bc}, connection coefficients A^a_i(x),
// the curvature tensor B^a_{ij}, and the bracket on sections of TM + g.
// The general-linear and general-affine algebras are generated
// programmatically; their basis flattening is pinned by unit tests and
// shared verbatim with the refinement Poisson structures.

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "liepoisson/geometry.hpp"
#include "liepoisson/polynomial.hpp"

namespace liepoisson {

// A Lie algebra presented by structure constants: [eps_b, eps_c] =
// C^a_{bc} eps_a, stored at constants(a, b, c). Construction validates
// antisymmetry and the Jacobi identity to 1e-12.
struct LieAlgebraSpec {
  int p = 0;
  Tensor3 constants;
  std::string label;

  double c(int a, int b, int cc) const { return constants(a, b, cc); }
};

inline LieAlgebraSpec make_lie_algebra(const Tensor3& C, std::string label) {
  if (C.d0 != C.d1 || C.d1 != C.d2) {
    throw field_error("structure constants must be a cube");
  }
  const int p = C.d0;
  for (int a = 0; a < p; ++a) {
    for (int b = 0; b < p; ++b) {
      for (int cc = 0; cc < p; ++cc) {
        if (std::abs(C(a, b, cc) + C(a, cc, b)) > 1e-12) {
          throw field_error("structure constants not antisymmetric: " + label);
        }
      }
    }
  }
  // Jacobi identity: cyclic sum of C^d_{ae} C^e_{bc} vanishes.
  for (int aa = 0; aa < p; ++aa) {
    for (int b = 0; b < p; ++b) {
      for (int cc = 0; cc < p; ++cc) {
        for (int d = 0; d < p; ++d) {
          double res = 0.0;
          const int idx[3][3] = {{aa, b, cc}, {b, cc, aa}, {cc, aa, b}};
          for (const auto& q : idx) {
            for (int e = 0; e < p; ++e) {
              res += C(d, q[0], e) * C(e, q[1], q[2]);
            }
          }
          if (std::abs(res) > 1e-12) {
            throw field_error("structure constants fail the Jacobi identity: " +
                              label);
          }
        }
      }
    }
  }
  LieAlgebraSpec g;
  g.p = p;
  g.constants = C;
  g.label = std::move(label);
  return g;
}

inline LieAlgebraSpec abelian_algebra(int p) {
  return make_lie_algebra(Tensor3(p, p, p), "abelian(" + std::to_string(p) + ")");
}

// so(3): [eps_a, eps_b] = eps_{abc} eps_c.
inline LieAlgebraSpec so3_algebra() {
  Tensor3 C(3, 3, 3);
  auto eps = [](int i, int j, int k) -> double {
    if (i == j || j == k || i == k) return 0.0;
    if ((i == 0 && j == 1) || (i == 1 && j == 2) || (i == 2 && j == 0))
      return 1.0;
    return -1.0;
  };
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      for (int cc = 0; cc < 3; ++cc) C(a, b, cc) = eps(a, b, cc);
    }
  }
  return make_lie_algebra(C, "so3");
}

// Flattening of the matrix basis e^u_l (upper index u, lower index l) of
// the general linear algebra: slot u*n + l. The general affine algebra
// appends the translations e_w at slot n*n + w. Every refinement structure
// uses exactly this layout.
inline int gl_flat(int n, int up, int low) { return up * n + low; }

// gl(n): [e^{u1}_{l1}, e^{u2}_{l2}] = d^{u1}_{l2} e^{u2}_{l1}
//                                   - d^{u2}_{l1} e^{u1}_{l2}.
inline LieAlgebraSpec gl_algebra(int n) {
  const int p = n * n;
  Tensor3 C(p, p, p);
  for (int u1 = 0; u1 < n; ++u1) {
    for (int l1 = 0; l1 < n; ++l1) {
      for (int u2 = 0; u2 < n; ++u2) {
        for (int l2 = 0; l2 < n; ++l2) {
          const int b = gl_flat(n, u1, l1);
          const int cc = gl_flat(n, u2, l2);
          if (u1 == l2) C(gl_flat(n, u2, l1), b, cc) += 1.0;
          if (u2 == l1) C(gl_flat(n, u1, l2), b, cc) -= 1.0;
        }
      }
    }
  }
  return make_lie_algebra(C, "gl(" + std::to_string(n) + ")");
}

// ga(n) = gl(n) acting on translations: the gl block as above plus
// [e^u_l, e_k] = d^u_k e_l and [e_i, e_j] = 0.
inline LieAlgebraSpec ga_algebra(int n) {
  const int p = n * n + n;
  const LieAlgebraSpec gl = gl_algebra(n);
  Tensor3 C(p, p, p);
  for (int a = 0; a < n * n; ++a) {
    for (int b = 0; b < n * n; ++b) {
      for (int cc = 0; cc < n * n; ++cc) C(a, b, cc) = gl.constants(a, b, cc);
    }
  }
  for (int u = 0; u < n; ++u) {
    for (int l = 0; l < n; ++l) {
      for (int k = 0; k < n; ++k) {
        if (u == k) {
          C(n * n + l, gl_flat(n, u, l), n * n + k) += 1.0;
          C(n * n + l, n * n + k, gl_flat(n, u, l)) -= 1.0;
        }
      }
    }
  }
  return make_lie_algebra(C, "ga(" + std::to_string(n) + ")");
}

// Connection coefficients A^a_i(x) on an n-dimensional chart, stored as a
// p x n matrix with entry (a, i). dcoeff(x, j), when present, is the
// analytic derivative in base direction j.
struct PrincipalConnection {
  LieAlgebraSpec algebra;
  int n = 0;
  std::function<Mat(const Vec&)> coeff;
  std::function<Mat(const Vec&, int)> dcoeff;
  // Set by polynomial_connection; lets downstream code derive curvature
  // and its derivatives symbolically.
  std::shared_ptr<const PolyMat> poly;

  bool has_analytic_derivative() const { return static_cast<bool>(dcoeff); }
};

inline PrincipalConnection make_connection(
    LieAlgebraSpec algebra, int n, std::function<Mat(const Vec&)> coeff,
    std::function<Mat(const Vec&, int)> dcoeff = {}) {
  PrincipalConnection conn;
  const int p = algebra.p;
  conn.algebra = std::move(algebra);
  conn.n = n;
  conn.coeff = [p, n, fn = std::move(coeff)](const Vec& x) {
    Mat A = fn(x);
    if (A.rows() != p || A.cols() != n) {
      throw field_error("connection coefficient matrix has wrong shape");
    }
    for (int a = 0; a < p; ++a) {
      for (int i = 0; i < n; ++i) ensure_finite(A(a, i), "connection coefficient");
    }
    return A;
  };
  conn.dcoeff = std::move(dcoeff);
  return conn;
}

inline PrincipalConnection zero_connection(LieAlgebraSpec algebra, int n) {
  const int p = algebra.p;
  return make_connection(
      std::move(algebra), n,
      [p, n](const Vec&) { return Mat(Mat::Zero(p, n)); },
      [p, n](const Vec&, int) { return Mat(Mat::Zero(p, n)); });
}

// Polynomial coefficient table; derivatives are wired symbolically.
inline PrincipalConnection polynomial_connection(LieAlgebraSpec algebra, int n,
                                                 const PolyMat& A) {
  if (A.rows != algebra.p || A.cols != n) {
    throw field_error("connection coefficient table has wrong shape");
  }
  struct Backing {
    PolyMat A;
    std::vector<PolyMat> dA;
  };
  auto bk = std::make_shared<Backing>();
  bk->A = A;
  for (int j = 0; j < n; ++j) {
    PolyMat d(A.rows, A.cols, n);
    for (int a = 0; a < A.rows; ++a) {
      for (int i = 0; i < A.cols; ++i) d(a, i) = A(a, i).derivative(j);
    }
    bk->dA.push_back(std::move(d));
  }
  auto conn = make_connection(
      std::move(algebra), n, [bk](const Vec& x) { return bk->A.eval(x); },
      [bk](const Vec& x, int j) { return bk->dA[j].eval(x); });
  conn.poly = std::shared_ptr<const PolyMat>(bk, &bk->A);
  return conn;
}

namespace detail {

inline Mat connection_derivative(const PrincipalConnection& conn, const Vec& x,
                                 int j) {
  if (conn.dcoeff) return conn.dcoeff(x, j);
  const double h = central_step(x[j], std::nullopt);
  Vec xp = x, xm = x;
  xp[j] += h;
  xm[j] -= h;
  return Mat(((conn.coeff(xp) - conn.coeff(xm)) / (2.0 * h)));
}

}  // namespace detail

// Covariant derivative of a section xi of the associated algebra bundle
// along the vector field X, evaluated at x:
//   component a = X^i (d_i xi^a + C^a_{bc} A^b_i xi^c).
inline Vec covariant_derivative(const PrincipalConnection& conn,
                                const std::vector<ScalarField>& X,
                                const std::vector<ScalarField>& xi,
                                const Vec& x) {
  const int n = conn.n, p = conn.algebra.p;
  if (static_cast<int>(X.size()) != n || static_cast<int>(xi.size()) != p ||
      x.size() != n) {
    throw field_error("covariant_derivative: dimension mismatch");
  }
  const Mat A = conn.coeff(x);
  Vec Xv(n);
  for (int i = 0; i < n; ++i) Xv[i] = evaluate(X[i], x);
  Vec xiv(p);
  Mat dxi(p, n);  // (a, i) = d_i xi^a
  for (int a = 0; a < p; ++a) {
    xiv[a] = evaluate(xi[a], x);
    dxi.row(a) = fd_gradient(xi[a], x).transpose();
  }
  Vec out = Vec::Zero(p);
  for (int a = 0; a < p; ++a) {
    for (int i = 0; i < n; ++i) {
      double term = dxi(a, i);
      for (int b = 0; b < p; ++b) {
        for (int cc = 0; cc < p; ++cc) {
          term += conn.algebra.c(a, b, cc) * A(b, i) * xiv[cc];
        }
      }
      out[a] += Xv[i] * term;
    }
  }
  return out;
}

// Curvature tensor at x, entry (a, i, j) = B^a_{ij}:
//   B^a_{ij} = d_i A^a_j - d_j A^a_i + C^a_{bc} A^b_i A^c_j.
inline Tensor3 curvature(const PrincipalConnection& conn, const Vec& x) {
  const int n = conn.n, p = conn.algebra.p;
  if (x.size() != n) throw field_error("curvature: point has wrong dim");
  const Mat A = conn.coeff(x);
  std::vector<Mat> dA;
  for (int j = 0; j < n; ++j) dA.push_back(detail::connection_derivative(conn, x, j));
  Tensor3 B(p, n, n);
  for (int a = 0; a < p; ++a) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < i; ++j) {
        double v = dA[i](a, j) - dA[j](a, i);
        for (int b = 0; b < p; ++b) {
          for (int cc = 0; cc < p; ++cc) {
            v += conn.algebra.c(a, b, cc) * A(b, i) * A(cc, j);
          }
        }
        B(a, i, j) = v;
        B(a, j, i) = -v;  // antisymmetry exact by construction
      }
    }
  }
  return B;
}

// Symbolic curvature from a polynomial coefficient table; exact
// derivatives for downstream Poisson matrices.
inline PolyTensor3 polynomial_curvature(const LieAlgebraSpec& g,
                                        const PolyMat& A, int n) {
  if (A.rows != g.p || A.cols != n) {
    throw field_error("polynomial_curvature: coefficient table shape");
  }
  PolyTensor3 B(g.p, n, n, n);
  for (int a = 0; a < g.p; ++a) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        Polynomial v = A(a, j).derivative(i) - A(a, i).derivative(j);
        for (int b = 0; b < g.p; ++b) {
          for (int cc = 0; cc < g.p; ++cc) {
            const double c = g.c(a, b, cc);
            if (c != 0.0) v = v + c * (A(b, i) * A(cc, j));
          }
        }
        B(a, i, j) = v;
      }
    }
  }
  return B;
}

struct SectionBracketResult {
  Vec base;     // n components
  Vec algebra;  // p components
};

// Bracket of two sections X + xi of TM + g at x:
//   base    = [X1, X2]
//   algebra = nabla_{X1} xi2 - nabla_{X2} xi1 - B(X1, X2) + [xi1, xi2].
inline SectionBracketResult section_bracket(const PrincipalConnection& conn,
                                            const std::vector<ScalarField>& X1,
                                            const std::vector<ScalarField>& xi1,
                                            const std::vector<ScalarField>& X2,
                                            const std::vector<ScalarField>& xi2,
                                            const Vec& x) {
  const int n = conn.n, p = conn.algebra.p;
  if (static_cast<int>(X1.size()) != n || static_cast<int>(X2.size()) != n ||
      static_cast<int>(xi1.size()) != p || static_cast<int>(xi2.size()) != p) {
    throw field_error("section_bracket: dimension mismatch");
  }
  Vec X1v(n), X2v(n);
  for (int i = 0; i < n; ++i) {
    X1v[i] = evaluate(X1[i], x);
    X2v[i] = evaluate(X2[i], x);
  }
  const Mat J1 = fd_jacobian(X1, x);  // (i, j) = d_j X1^i
  const Mat J2 = fd_jacobian(X2, x);
  SectionBracketResult out;
  out.base = J2 * X1v - J1 * X2v;
  out.algebra = covariant_derivative(conn, X1, xi2, x) -
                covariant_derivative(conn, X2, xi1, x);
  const Tensor3 B = curvature(conn, x);
  Vec xi1v(p), xi2v(p);
  for (int a = 0; a < p; ++a) {
    xi1v[a] = evaluate(xi1[a], x);
    xi2v[a] = evaluate(xi2[a], x);
  }
  for (int a = 0; a < p; ++a) {
    double v = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) v -= B(a, i, j) * X1v[i] * X2v[j];
    }
    for (int b = 0; b < p; ++b) {
      for (int cc = 0; cc < p; ++cc) {
        v += conn.algebra.c(a, b, cc) * xi1v[b] * xi2v[cc];
      }
    }
    out.algebra[a] += v;
  }
  return out;
}

// Covariant-derivative and curvature data of an affine connection on the
// frame-and-translation bundle: a gl-part table Agl with entry
// (h, k, r) = A^h_{kr} and a translation table Atr with entry (h, k) =
// A^h_k, both polynomial in x. The package assembles the induced ga(n)
// principal connection, with slot u*n + l of the coefficient vector in
// base direction i holding A^l_{ui} and slot n*n + w holding A^w_i.
struct AffineConnectionPackage {
  int n = 0;
  LieAlgebraSpec ga;
  PrincipalConnection conn;
  std::shared_ptr<const PolyTensor3> gl_table;
  std::shared_ptr<const PolyMat> translation_table;

  // Coefficient of eps_p^q in nabla_{d/dx^i} eps_k^l, at entry (k, l, p, q):
  //   A^p_{ki} d^l_q - A^l_{qi} d^p_k.
  Tensor4 nabla_gl(const Vec& x, int i) const {
    Tensor4 out(n, n, n, n);
    for (int k = 0; k < n; ++k) {
      for (int l = 0; l < n; ++l) {
        for (int pp = 0; pp < n; ++pp) {
          for (int q = 0; q < n; ++q) {
            double v = 0.0;
            if (l == q) v += (*gl_table)(pp, k, i).eval(x);
            if (pp == k) v -= (*gl_table)(l, q, i).eval(x);
            out(k, l, pp, q) = v;
          }
        }
      }
    }
    return out;
  }

  // Translation tail of nabla_{d/dx^i} eps_k^l: the coefficient of eps_k,
  // which is -A^l_i independent of k; entry l of the returned vector.
  Vec nabla_gl_translation(const Vec& x, int i) const {
    Vec out(n);
    for (int l = 0; l < n; ++l) out[l] = -(*translation_table)(l, i).eval(x);
    return out;
  }

  // nabla_{d/dx^r} eps_k = A^i_{kr} eps_i, entry (i, k).
  Mat nabla_translation(const Vec& x, int r) const {
    Mat out(n, n);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < n; ++k) out(i, k) = (*gl_table)(i, k, r).eval(x);
    }
    return out;
  }

  // Split curvature: gl block at (k, l, i, j) = B^l_{kij} and translation
  // block at (l, i, j) = B^l_{ij}, obtained by evaluating the curvature of
  // the assembled ga(n) connection and reading off the basis slots.
  Tensor4 curvature_gl(const Vec& x) const {
    const Tensor3 B = liepoisson::curvature(conn, x);
    Tensor4 out(n, n, n, n);
    for (int k = 0; k < n; ++k) {
      for (int l = 0; l < n; ++l) {
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < n; ++j) {
            out(k, l, i, j) = B(gl_flat(n, k, l), i, j);
          }
        }
      }
    }
    return out;
  }

  Tensor3 curvature_translation(const Vec& x) const {
    const Tensor3 B = liepoisson::curvature(conn, x);
    Tensor3 out(n, n, n);
    for (int l = 0; l < n; ++l) {
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) out(l, i, j) = B(n * n + l, i, j);
      }
    }
    return out;
  }
};

inline AffineConnectionPackage affine_connection_package(int n,
                                                         const PolyTensor3& Agl,
                                                         const PolyMat& Atr) {
  if (Agl.d0 != n || Agl.d1 != n || Agl.d2 != n || Atr.rows != n ||
      Atr.cols != n) {
    throw field_error("affine_connection_package: table shapes must be n^3 "
                      "and n^2");
  }
  AffineConnectionPackage pkg;
  pkg.n = n;
  pkg.ga = ga_algebra(n);
  PolyMat A(n * n + n, n, n);
  for (int u = 0; u < n; ++u) {
    for (int l = 0; l < n; ++l) {
      for (int i = 0; i < n; ++i) A(gl_flat(n, u, l), i) = Agl(l, u, i);
    }
  }
  for (int w = 0; w < n; ++w) {
    for (int i = 0; i < n; ++i) A(n * n + w, i) = Atr(w, i);
  }
  pkg.conn = polynomial_connection(pkg.ga, n, A);
  auto gl_copy = std::make_shared<PolyTensor3>(Agl);
  auto tr_copy = std::make_shared<PolyMat>(Atr);
  pkg.gl_table = gl_copy;
  pkg.translation_table = tr_copy;
  return pkg;
}

}  // namespace liepoisson
