#pragma once

// Chart-coordinate numerics: points, scalar fields, and central-difference
// differentiation. Everything downstream (brackets, compiled dynamics,
// integrators) evaluates user functions through the helpers here, so this
// is also where non-finite values are rejected eagerly.

#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace liepoisson {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Raised when a field evaluation produces NaN/Inf or dimensions disagree.
class field_error : public std::runtime_error {
 public:
  explicit field_error(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline void ensure_finite(double v, const char* context) {
  if (!std::isfinite(v)) {
    throw field_error(std::string(context) + ": non-finite value " +
                      detail::fmt_double(v));
  }
}

inline void ensure_finite(const Vec& z, const char* context) {
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (!std::isfinite(z[i])) {
      throw field_error(std::string(context) + ": non-finite coordinate " +
                        std::to_string(i));
    }
  }
}

// Dense numeric tensors; index meanings are documented at each use site.
struct Tensor3 {
  int d0 = 0, d1 = 0, d2 = 0;
  std::vector<double> data;

  Tensor3() = default;
  Tensor3(int a, int b, int c)
      : d0(a), d1(b), d2(c), data(static_cast<std::size_t>(a) * b * c, 0.0) {}

  double& operator()(int a, int b, int c) {
    return data[(static_cast<std::size_t>(a) * d1 + b) * d2 + c];
  }
  double operator()(int a, int b, int c) const {
    return data[(static_cast<std::size_t>(a) * d1 + b) * d2 + c];
  }
};

struct Tensor4 {
  int d0 = 0, d1 = 0, d2 = 0, d3 = 0;
  std::vector<double> data;

  Tensor4() = default;
  Tensor4(int a, int b, int c, int d)
      : d0(a), d1(b), d2(c), d3(d),
        data(static_cast<std::size_t>(a) * b * c * d, 0.0) {}

  double& operator()(int a, int b, int c, int d) {
    return data[((static_cast<std::size_t>(a) * d1 + b) * d2 + c) * d3 + d];
  }
  double operator()(int a, int b, int c, int d) const {
    return data[((static_cast<std::size_t>(a) * d1 + b) * d2 + c) * d3 + d];
  }
};

// A real-valued function on a chart. `eval` is required; `grad` and `hess`
// are optional analytic derivatives. When `grad` is present it must match
// central finite differences of `eval` (relative tolerance 1e-5); `hess`
// additionally lets bracket fields expose analytic gradients, which the
// nested-bracket machinery uses to reach tight tolerances.
struct ScalarField {
  int dim = 0;
  std::function<double(const Vec&)> eval;
  std::function<Vec(const Vec&)> grad;
  std::function<Mat(const Vec&)> hess;

  bool has_grad() const { return static_cast<bool>(grad); }
  bool has_hess() const { return static_cast<bool>(hess); }
};

// Checked evaluation. Rejects wrong-dimension points and non-finite results
// so a bad value surfaces at its source instead of poisoning an ensemble.
inline double evaluate(const ScalarField& f, const Vec& z) {
  if (!f.eval) throw field_error("scalar field has no eval");
  if (z.size() != f.dim) {
    throw field_error("scalar field of dim " + std::to_string(f.dim) +
                      " evaluated at point of dim " + std::to_string(z.size()));
  }
  const double v = f.eval(z);
  ensure_finite(v, "field evaluation");
  return v;
}

namespace detail {

// Step size balancing truncation vs rounding for second-order differences.
inline double central_step(double zi, std::optional<double> step) {
  if (step) return *step;
  static const double h0 = std::cbrt(std::numeric_limits<double>::epsilon());
  return h0 * std::max(1.0, std::abs(zi));
}

}  // namespace detail

// Central-difference gradient, ignoring any analytic gradient. Probe
// failures name the coordinate being varied.
inline Vec fd_gradient_numeric(const ScalarField& f, const Vec& z,
                               std::optional<double> step = std::nullopt) {
  if (z.size() != f.dim) {
    throw field_error("fd_gradient: point dim " + std::to_string(z.size()) +
                      " != field dim " + std::to_string(f.dim));
  }
  ensure_finite(z, "fd_gradient point");
  Vec g(f.dim);
  Vec zp = z;
  for (int i = 0; i < f.dim; ++i) {
    const double h = detail::central_step(z[i], step);
    zp[i] = z[i] + h;
    const double fp = f.eval(zp);
    zp[i] = z[i] - h;
    const double fm = f.eval(zp);
    zp[i] = z[i];
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw field_error("fd_gradient: non-finite evaluation while varying "
                        "coordinate " + std::to_string(i));
    }
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// Gradient of f at z. Returns the analytic gradient when the field carries
// one, otherwise central differences with per-coordinate step
// cbrt(eps) * max(1, |z_i|) (or the caller's fixed step).
inline Vec fd_gradient(const ScalarField& f, const Vec& z,
                       std::optional<double> step = std::nullopt) {
  if (f.has_grad()) {
    if (z.size() != f.dim) {
      throw field_error("fd_gradient: point dim " + std::to_string(z.size()) +
                        " != field dim " + std::to_string(f.dim));
    }
    Vec g = f.grad(z);
    ensure_finite(g, "analytic gradient");
    return g;
  }
  return fd_gradient_numeric(f, z, step);
}

// Jacobian of a component list: row i is fd_gradient of F[i].
inline Mat fd_jacobian(const std::vector<ScalarField>& F, const Vec& z,
                       std::optional<double> step = std::nullopt) {
  if (F.empty()) return Mat(0, z.size());
  const int dim = F.front().dim;
  for (const auto& f : F) {
    if (f.dim != dim) throw field_error("fd_jacobian: mixed component dims");
  }
  Mat J(static_cast<int>(F.size()), dim);
  for (std::size_t i = 0; i < F.size(); ++i) {
    J.row(static_cast<int>(i)) = fd_gradient(F[i], z, step).transpose();
  }
  return J;
}

// Jacobian of a raw vector-valued map with out_dim components; used where
// the components are not worth wrapping as ScalarFields (e.g. diffusion
// columns inside verification code).
inline Mat fd_jacobian(int out_dim, const std::function<Vec(const Vec&)>& F,
                       const Vec& z,
                       std::optional<double> step = std::nullopt) {
  ensure_finite(z, "fd_jacobian point");
  Mat J(out_dim, static_cast<int>(z.size()));
  Vec zp = z;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double h = detail::central_step(z[i], step);
    zp[i] = z[i] + h;
    const Vec fp = F(zp);
    zp[i] = z[i] - h;
    const Vec fm = F(zp);
    zp[i] = z[i];
    if (fp.size() != out_dim || fm.size() != out_dim) {
      throw field_error("fd_jacobian: component count mismatch");
    }
    for (int r = 0; r < out_dim; ++r) {
      if (!std::isfinite(fp[r]) || !std::isfinite(fm[r])) {
        throw field_error("fd_jacobian: non-finite evaluation while varying "
                          "coordinate " + std::to_string(i));
      }
      J(r, i) = (fp[r] - fm[r]) / (2.0 * h);
    }
  }
  return J;
}

// Convenience constructors used throughout the tests and models.

inline ScalarField constant_field(int dim, double c) {
  ScalarField f;
  f.dim = dim;
  f.eval = [c](const Vec&) { return c; };
  f.grad = [dim](const Vec&) { return Vec(Vec::Zero(dim)); };
  f.hess = [dim](const Vec&) { return Mat(Mat::Zero(dim, dim)); };
  return f;
}

inline ScalarField zero_field(int dim) { return constant_field(dim, 0.0); }

// The coordinate function z -> z[index].
inline ScalarField coordinate_field(int dim, int index) {
  ScalarField f;
  f.dim = dim;
  f.eval = [index](const Vec& z) { return z[index]; };
  f.grad = [dim, index](const Vec&) {
    Vec g = Vec::Zero(dim);
    g[index] = 1.0;
    return g;
  };
  f.hess = [dim](const Vec&) { return Mat(Mat::Zero(dim, dim)); };
  return f;
}

// Linear field z -> w . z + c.
inline ScalarField linear_field(const Vec& w, double c = 0.0) {
  ScalarField f;
  f.dim = static_cast<int>(w.size());
  f.eval = [w, c](const Vec& z) { return w.dot(z) + c; };
  f.grad = [w](const Vec&) { return w; };
  const int n = f.dim;
  f.hess = [n](const Vec&) { return Mat(Mat::Zero(n, n)); };
  return f;
}

// f + g and a * f, propagating analytic derivatives when both sides have
// them.
inline ScalarField field_sum(const ScalarField& f, const ScalarField& g) {
  if (f.dim != g.dim) throw field_error("field_sum: dim mismatch");
  ScalarField s;
  s.dim = f.dim;
  auto fe = f.eval, ge = g.eval;
  s.eval = [fe, ge](const Vec& z) { return fe(z) + ge(z); };
  if (f.has_grad() && g.has_grad()) {
    auto fg = f.grad, gg = g.grad;
    s.grad = [fg, gg](const Vec& z) { return Vec(fg(z) + gg(z)); };
  }
  if (f.has_hess() && g.has_hess()) {
    auto fh = f.hess, gh = g.hess;
    s.hess = [fh, gh](const Vec& z) { return Mat(fh(z) + gh(z)); };
  }
  return s;
}

inline ScalarField field_scale(const ScalarField& f, double a) {
  ScalarField s;
  s.dim = f.dim;
  auto fe = f.eval;
  s.eval = [fe, a](const Vec& z) { return a * fe(z); };
  if (f.has_grad()) {
    auto fg = f.grad;
    s.grad = [fg, a](const Vec& z) { return Vec(a * fg(z)); };
  }
  if (f.has_hess()) {
    auto fh = f.hess;
    s.hess = [fh, a](const Vec& z) { return Mat(a * fh(z)); };
  }
  return s;
}

}  // namespace liepoisson
