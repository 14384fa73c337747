#pragma once

// Exact multivariate polynomials with analytic derivatives. Connection
// coefficients, structure-matrix entries, Hamiltonians, and noise
// coefficients are all polynomial in the shipped models, which lets the
// bracket machinery differentiate them exactly instead of by finite
// differences. Coefficient tables double as the config wire format.

#include <map>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "liepoisson/geometry.hpp"

namespace liepoisson {

class Polynomial {
 public:
  // Exponent tuple -> coefficient. Tuples always have length dim.
  using Terms = std::map<std::vector<int>, double>;

  Polynomial() = default;
  explicit Polynomial(int dim) : dim_(dim) {}

  static Polynomial constant(int dim, double c) {
    Polynomial p(dim);
    if (c != 0.0) p.terms_[std::vector<int>(dim, 0)] = c;
    return p;
  }

  static Polynomial variable(int dim, int i) {
    Polynomial p(dim);
    std::vector<int> e(dim, 0);
    e[i] = 1;
    p.terms_[e] = 1.0;
    return p;
  }

  int dim() const { return dim_; }
  const Terms& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  void add_term(const std::vector<int>& exponents, double coeff) {
    if (static_cast<int>(exponents.size()) != dim_) {
      throw std::invalid_argument("polynomial term arity mismatch");
    }
    for (int e : exponents) {
      if (e < 0) throw std::invalid_argument("negative exponent");
    }
    double& c = terms_[exponents];
    c += coeff;
    if (c == 0.0) terms_.erase(exponents);
  }

  double eval(const Vec& z) const {
    double acc = 0.0;
    for (const auto& [e, c] : terms_) {
      double t = c;
      for (int i = 0; i < dim_; ++i) {
        for (int k = 0; k < e[i]; ++k) t *= z[i];
      }
      acc += t;
    }
    return acc;
  }

  Polynomial derivative(int i) const {
    Polynomial d(dim_);
    for (const auto& [e, c] : terms_) {
      if (e[i] == 0) continue;
      std::vector<int> de = e;
      de[i] -= 1;
      d.add_term(de, c * e[i]);
    }
    return d;
  }

  Polynomial operator+(const Polynomial& o) const {
    check_same_dim(o);
    Polynomial r = *this;
    for (const auto& [e, c] : o.terms_) r.add_term(e, c);
    return r;
  }

  Polynomial operator-(const Polynomial& o) const {
    check_same_dim(o);
    Polynomial r = *this;
    for (const auto& [e, c] : o.terms_) r.add_term(e, -c);
    return r;
  }

  Polynomial operator*(const Polynomial& o) const {
    check_same_dim(o);
    Polynomial r(dim_);
    for (const auto& [ea, ca] : terms_) {
      for (const auto& [eb, cb] : o.terms_) {
        std::vector<int> e(dim_);
        for (int i = 0; i < dim_; ++i) e[i] = ea[i] + eb[i];
        r.add_term(e, ca * cb);
      }
    }
    return r;
  }

  Polynomial operator*(double a) const {
    Polynomial r(dim_);
    if (a == 0.0) return r;
    for (const auto& [e, c] : terms_) r.terms_[e] = c * a;
    return r;
  }

  Polynomial operator-() const { return (*this) * -1.0; }

  // Reinterpret over a larger chart: variable i becomes variable map[i].
  Polynomial embed(int new_dim, const std::vector<int>& map) const {
    if (static_cast<int>(map.size()) != dim_) {
      throw std::invalid_argument("embed map arity mismatch");
    }
    Polynomial r(new_dim);
    for (const auto& [e, c] : terms_) {
      std::vector<int> ne(new_dim, 0);
      for (int i = 0; i < dim_; ++i) ne[map[i]] += e[i];
      r.add_term(ne, c);
    }
    return r;
  }

  // ScalarField view with exact gradient and Hessian. Derivative tables are
  // computed once and shared by the returned closures.
  ScalarField field() const {
    struct Backing {
      Polynomial p;
      std::vector<Polynomial> grad;
      std::vector<Polynomial> hess;  // row-major upper storage, full matrix
    };
    auto b = std::make_shared<Backing>();
    b->p = *this;
    b->grad.reserve(dim_);
    for (int i = 0; i < dim_; ++i) b->grad.push_back(derivative(i));
    b->hess.reserve(static_cast<std::size_t>(dim_) * dim_);
    for (int i = 0; i < dim_; ++i) {
      for (int j = 0; j < dim_; ++j) b->hess.push_back(b->grad[i].derivative(j));
    }
    ScalarField f;
    f.dim = dim_;
    f.eval = [b](const Vec& z) { return b->p.eval(z); };
    const int n = dim_;
    f.grad = [b, n](const Vec& z) {
      Vec g(n);
      for (int i = 0; i < n; ++i) g[i] = b->grad[i].eval(z);
      return g;
    };
    f.hess = [b, n](const Vec& z) {
      Mat h(n, n);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) h(i, j) = b->hess[i * n + j].eval(z);
      }
      return h;
    };
    return f;
  }

 private:
  void check_same_dim(const Polynomial& o) const {
    if (dim_ != o.dim_) throw std::invalid_argument("polynomial dim mismatch");
  }

  int dim_ = 0;
  Terms terms_;
};

inline Polynomial operator*(double a, const Polynomial& p) { return p * a; }

// Dense containers of polynomials; shapes mirror the tensors they feed.
using PolyVec = std::vector<Polynomial>;

struct PolyMat {
  int rows = 0, cols = 0;
  std::vector<Polynomial> data;

  PolyMat() = default;
  PolyMat(int r, int c, int dim)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, Polynomial(dim)) {}

  Polynomial& operator()(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
  const Polynomial& operator()(int i, int j) const {
    return data[static_cast<std::size_t>(i) * cols + j];
  }

  Mat eval(const Vec& z) const {
    Mat m(rows, cols);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) m(i, j) = (*this)(i, j).eval(z);
    }
    return m;
  }
};

struct PolyTensor3 {
  int d0 = 0, d1 = 0, d2 = 0;
  std::vector<Polynomial> data;

  PolyTensor3() = default;
  PolyTensor3(int a, int b, int c, int dim)
      : d0(a), d1(b), d2(c),
        data(static_cast<std::size_t>(a) * b * c, Polynomial(dim)) {}

  Polynomial& operator()(int a, int b, int c) {
    return data[(static_cast<std::size_t>(a) * d1 + b) * d2 + c];
  }
  const Polynomial& operator()(int a, int b, int c) const {
    return data[(static_cast<std::size_t>(a) * d1 + b) * d2 + c];
  }
};

struct PolyTensor4 {
  int d0 = 0, d1 = 0, d2 = 0, d3 = 0;
  std::vector<Polynomial> data;

  PolyTensor4() = default;
  PolyTensor4(int a, int b, int c, int d, int dim)
      : d0(a), d1(b), d2(c), d3(d),
        data(static_cast<std::size_t>(a) * b * c * d, Polynomial(dim)) {}

  Polynomial& operator()(int a, int b, int c, int d) {
    return data[((static_cast<std::size_t>(a) * d1 + b) * d2 + c) * d3 + d];
  }
  const Polynomial& operator()(int a, int b, int c, int d) const {
    return data[((static_cast<std::size_t>(a) * d1 + b) * d2 + c) * d3 + d];
  }
};

}  // namespace liepoisson
