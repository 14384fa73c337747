#pragma once

// Lie algebroids in a chart: an anchor matrix field b_alpha^i(x) and
// structure functions C^gamma_{alpha beta}(x), with the convention
//
//   [e_alpha, e_beta] = C^gamma_{alpha beta} e_gamma,
//   anchor(e_alpha)   = b_alpha^i d/dx^i.
//
// Every module downstream cites exactly this index convention. Sections
// induce fiber-linear functions f_a(x, xi) = a^alpha(x) xi_alpha on the
// dual bundle, whose Hamiltonian fields drive the stochastic dynamics.

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "liepoisson/geometry.hpp"
#include "liepoisson/polynomial.hpp"

namespace liepoisson {

struct LieAlgebroid {
  int n = 0;  // base dimension
  int r = 0;  // rank
  // anchor(x) is n x r with entry (i, alpha) = b_alpha^i.
  std::function<Mat(const Vec&)> anchor;
  // structure(x) holds C^gamma_{alpha beta} at (gamma, alpha, beta);
  // antisymmetric in (alpha, beta), validated at every evaluation.
  std::function<Tensor3(const Vec&)> structure;
  // Optional analytic x-derivatives: danchor(x, j) = d(anchor)/dx^j, and
  // dstructure(x, j) likewise. Finite differences are used when absent.
  std::function<Mat(const Vec&, int)> danchor;
  std::function<Tensor3(const Vec&, int)> dstructure;

  bool has_analytic_derivatives() const {
    return static_cast<bool>(danchor) && static_cast<bool>(dstructure);
  }
};

namespace detail {

inline void validate_structure_antisymmetry(const Tensor3& C) {
  for (int g = 0; g < C.d0; ++g) {
    for (int a = 0; a < C.d1; ++a) {
      for (int b = 0; b < C.d2; ++b) {
        if (std::abs(C(g, a, b) + C(g, b, a)) > 1e-12) {
          throw field_error("structure functions not antisymmetric in the "
                            "lower indices");
        }
      }
    }
  }
}

}  // namespace detail

// Wraps raw anchor/structure functions with dimension and antisymmetry
// validation.
inline LieAlgebroid make_algebroid(
    int n, int r, std::function<Mat(const Vec&)> anchor,
    std::function<Tensor3(const Vec&)> structure,
    std::function<Mat(const Vec&, int)> danchor = {},
    std::function<Tensor3(const Vec&, int)> dstructure = {}) {
  LieAlgebroid A;
  A.n = n;
  A.r = r;
  A.anchor = [n, r, fn = std::move(anchor)](const Vec& x) {
    Mat b = fn(x);
    if (b.rows() != n || b.cols() != r) {
      throw field_error("anchor matrix has wrong shape");
    }
    return b;
  };
  A.structure = [r, fn = std::move(structure)](const Vec& x) {
    Tensor3 C = fn(x);
    if (C.d0 != r || C.d1 != r || C.d2 != r) {
      throw field_error("structure tensor has wrong shape");
    }
    detail::validate_structure_antisymmetry(C);
    return C;
  };
  A.danchor = std::move(danchor);
  A.dstructure = std::move(dstructure);
  return A;
}

// Constant anchor and structure over an n-dimensional base.
inline LieAlgebroid constant_algebroid(int n, const Mat& b, const Tensor3& C) {
  const int r = static_cast<int>(b.cols());
  auto zero_mat = [n, r](const Vec&, int) { return Mat(Mat::Zero(n, r)); };
  auto zero_ten = [r](const Vec&, int) { return Tensor3(r, r, r); };
  return make_algebroid(
      n, r, [b](const Vec&) { return b; }, [C](const Vec&) { return C; },
      zero_mat, zero_ten);
}

// Tangent-bundle algebroid: rank n, identity anchor, vanishing structure.
inline LieAlgebroid tangent_algebroid(int n) {
  return constant_algebroid(n, Mat::Identity(n, n), Tensor3(n, n, n));
}

// A Lie algebra viewed as an algebroid over a point (n = 0).
inline LieAlgebroid algebroid_over_point(const Tensor3& C) {
  return constant_algebroid(0, Mat(0, C.d0), C);
}

// Polynomial anchor/structure; analytic derivatives are wired from the
// coefficient tables.
inline LieAlgebroid polynomial_algebroid(int n, int r, const PolyMat& b,
                                         const PolyTensor3& C) {
  struct Backing {
    PolyMat b;
    PolyTensor3 C;
    std::vector<PolyMat> db;        // per base direction
    std::vector<PolyTensor3> dC;
  };
  auto bk = std::make_shared<Backing>();
  bk->b = b;
  bk->C = C;
  for (int j = 0; j < n; ++j) {
    PolyMat db(n, r, n);
    for (int i = 0; i < n; ++i) {
      for (int a = 0; a < r; ++a) db(i, a) = b(i, a).derivative(j);
    }
    bk->db.push_back(std::move(db));
    PolyTensor3 dC(r, r, r, n);
    for (int g = 0; g < r; ++g) {
      for (int a = 0; a < r; ++a) {
        for (int be = 0; be < r; ++be) dC(g, a, be) = C(g, a, be).derivative(j);
      }
    }
    bk->dC.push_back(std::move(dC));
  }
  auto eval_tensor = [r](const PolyTensor3& t, const Vec& x) {
    Tensor3 out(r, r, r);
    for (int g = 0; g < r; ++g) {
      for (int a = 0; a < r; ++a) {
        for (int be = 0; be < r; ++be) out(g, a, be) = t(g, a, be).eval(x);
      }
    }
    return out;
  };
  return make_algebroid(
      n, r, [bk](const Vec& x) { return bk->b.eval(x); },
      [bk, eval_tensor](const Vec& x) { return eval_tensor(bk->C, x); },
      [bk](const Vec& x, int j) { return bk->db[j].eval(x); },
      [bk, eval_tensor](const Vec& x, int j) {
        return eval_tensor(bk->dC[j], x);
      });
}

// A section a = a^alpha e_alpha given by r coefficient fields on the base.
struct Section {
  std::vector<ScalarField> components;

  int rank() const { return static_cast<int>(components.size()); }
  int base_dim() const { return components.empty() ? 0 : components.front().dim; }
};

inline Section constant_section(int n, const Vec& a) {
  Section s;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    s.components.push_back(constant_field(n, a[i]));
  }
  return s;
}

inline Section polynomial_section(const std::vector<Polynomial>& comps) {
  Section s;
  for (const auto& p : comps) s.components.push_back(p.field());
  return s;
}

// The fiber-linear function f_a(x, xi) = a^alpha(x) xi_alpha on the dual
// bundle. Analytic gradient (and Hessian) are assembled from the component
// derivatives when every component carries them.
inline ScalarField fiber_linear_function(const Section& a) {
  const int n = a.base_dim();
  const int r = a.rank();
  const int m = n + r;
  auto comps = std::make_shared<std::vector<ScalarField>>(a.components);
  ScalarField f;
  f.dim = m;
  f.eval = [comps, n, r](const Vec& z) {
    const Vec x = z.head(n);
    double acc = 0.0;
    for (int al = 0; al < r; ++al) {
      acc += (*comps)[al].eval(x) * z[n + al];
    }
    return acc;
  };
  bool all_grad = true, all_hess = true;
  for (const auto& c : a.components) {
    all_grad = all_grad && c.has_grad();
    all_hess = all_hess && c.has_hess();
  }
  if (all_grad) {
    f.grad = [comps, n, r, m](const Vec& z) {
      const Vec x = z.head(n);
      Vec g = Vec::Zero(m);
      for (int al = 0; al < r; ++al) {
        const Vec ga = (*comps)[al].grad(x);
        g.head(n) += z[n + al] * ga;
        g[n + al] = (*comps)[al].eval(x);
      }
      return g;
    };
  }
  if (all_grad && all_hess) {
    f.hess = [comps, n, r, m](const Vec& z) {
      const Vec x = z.head(n);
      Mat h = Mat::Zero(m, m);
      for (int al = 0; al < r; ++al) {
        h.topLeftCorner(n, n) += z[n + al] * (*comps)[al].hess(x);
        const Vec ga = (*comps)[al].grad(x);
        h.block(0, n + al, n, 1) = ga;
        h.block(n + al, 0, 1, n) = ga.transpose();
      }
      return h;
    };
  }
  return f;
}

// Residuals of the two compatibility conditions the structure functions of
// a Lie algebroid must satisfy.
struct CompatibilityReport {
  double max_anchor_residual = 0.0;  // anchor is a bracket homomorphism
  double max_jacobi_residual = 0.0;  // cyclic structure-function identity
  int n_samples = 0;

  bool pass(double tol) const {
    return max_anchor_residual < tol && max_jacobi_residual < tol;
  }
};

namespace detail {

inline Mat anchor_derivative(const LieAlgebroid& A, const Vec& x, int j) {
  if (A.danchor) return A.danchor(x, j);
  const double h = central_step(x[j], std::nullopt);
  Vec xp = x, xm = x;
  xp[j] += h;
  xm[j] -= h;
  return Mat(((A.anchor(xp) - A.anchor(xm)) / (2.0 * h)));
}

inline Tensor3 structure_derivative(const LieAlgebroid& A, const Vec& x, int j) {
  if (A.dstructure) return A.dstructure(x, j);
  const double h = central_step(x[j], std::nullopt);
  Vec xp = x, xm = x;
  xp[j] += h;
  xm[j] -= h;
  const Tensor3 Cp = A.structure(xp);
  const Tensor3 Cm = A.structure(xm);
  Tensor3 d(A.r, A.r, A.r);
  for (std::size_t i = 0; i < d.data.size(); ++i) {
    d.data[i] = (Cp.data[i] - Cm.data[i]) / (2.0 * h);
  }
  return d;
}

}  // namespace detail

// Evaluates, at each sample base point, the residuals of
//   (i)  b_alpha^j d_j b_beta^i - b_beta^j d_j b_alpha^i - C^gamma_{alpha beta} b_gamma^i
//   (ii) cyclic sum over (alpha, beta, gamma) of
//        b_alpha^i d_i C^delta_{beta gamma} + C^delta_{alpha eps} C^eps_{beta gamma}
// and reports the maxima.
inline CompatibilityReport check_compatibility(const LieAlgebroid& A,
                                               const std::vector<Vec>& samples) {
  CompatibilityReport rep;
  rep.n_samples = static_cast<int>(samples.size());
  const int n = A.n, r = A.r;
  for (const Vec& x : samples) {
    if (x.size() != n) throw field_error("compatibility sample has wrong dim");
    const Mat b = A.anchor(x);
    const Tensor3 C = A.structure(x);
    std::vector<Mat> db;
    std::vector<Tensor3> dC;
    for (int j = 0; j < n; ++j) {
      db.push_back(detail::anchor_derivative(A, x, j));
      dC.push_back(detail::structure_derivative(A, x, j));
    }
    // (i) anchor homomorphism
    for (int al = 0; al < r; ++al) {
      for (int be = 0; be < r; ++be) {
        for (int i = 0; i < n; ++i) {
          double res = 0.0;
          for (int j = 0; j < n; ++j) {
            res += b(j, al) * db[j](i, be) - b(j, be) * db[j](i, al);
          }
          for (int g = 0; g < r; ++g) res -= C(g, al, be) * b(i, g);
          rep.max_anchor_residual = std::max(rep.max_anchor_residual,
                                             std::abs(res));
        }
      }
    }
    // (ii) structure-function Jacobi identity
    for (int al = 0; al < r; ++al) {
      for (int be = 0; be < r; ++be) {
        for (int g = 0; g < r; ++g) {
          for (int de = 0; de < r; ++de) {
            double res = 0.0;
            const int idx[3][3] = {{al, be, g}, {be, g, al}, {g, al, be}};
            for (const auto& p : idx) {
              for (int i = 0; i < n; ++i) {
                res += b(i, p[0]) * dC[i](de, p[1], p[2]);
              }
              for (int ep = 0; ep < r; ++ep) {
                res += C(de, p[0], ep) * C(ep, p[1], p[2]);
              }
            }
            rep.max_jacobi_residual = std::max(rep.max_jacobi_residual,
                                               std::abs(res));
          }
        }
      }
    }
  }
  return rep;
}

// Hamiltonian vector field of f_a on the dual bundle at z = (x, xi):
//   base component i   : b_alpha^i a^alpha
//   fiber component beta: (a^gamma C^lambda_{beta gamma}
//                          - b_beta^j d_j a^lambda) xi_lambda
inline Vec hamiltonian_field_of_section(const LieAlgebroid& A, const Section& a,
                                        const Vec& z) {
  const int n = A.n, r = A.r;
  if (a.rank() != r || z.size() != n + r) {
    throw field_error("hamiltonian_field_of_section: dimension mismatch");
  }
  const Vec x = z.head(n);
  const Vec xi = z.tail(r);
  const Mat b = A.anchor(x);
  const Tensor3 C = A.structure(x);
  Vec aval(r);
  Mat da(n, r);  // (j, alpha) = d_j a^alpha
  for (int al = 0; al < r; ++al) {
    aval[al] = evaluate(a.components[al], x);
    da.col(al) = fd_gradient(a.components[al], x);
  }
  Vec out = Vec::Zero(n + r);
  out.head(n) = b * aval;
  for (int be = 0; be < r; ++be) {
    double acc = 0.0;
    for (int lam = 0; lam < r; ++lam) {
      double coeff = 0.0;
      for (int g = 0; g < r; ++g) coeff += aval[g] * C(lam, be, g);
      for (int j = 0; j < n; ++j) coeff -= b(j, be) * da(j, lam);
      acc += coeff * xi[lam];
    }
    out[n + be] = acc;
  }
  return out;
}

}  // namespace liepoisson
