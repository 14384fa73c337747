#pragma once

// Named model registry: the built-in systems, each a factory from a small
// parameter bag to a ready-to-run bundle of structure, drift Hamiltonian,
// noise channels, and known Casimirs. Expanded-geometry models also hand
// back the structured inputs the audit machinery consumes. The registry is
// read-only after startup; factories validate every parameter by name so
// config errors surface with the offending field.

#include <algorithm>
#include <initializer_list>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "liepoisson/algebroid.hpp"
#include "liepoisson/connection.hpp"
#include "liepoisson/geometry.hpp"
#include "liepoisson/poisson.hpp"
#include "liepoisson/polynomial.hpp"
#include "liepoisson/sde.hpp"

namespace liepoisson {

// A shaped table of polynomials, the exchange format for every matrix or
// tensor parameter: shape gives the index bounds, dim the variable count,
// and entries list (index tuple, polynomial) pairs sparsely. Cells not
// listed are zero.
struct PolyTable {
  std::vector<int> shape;
  int dim = 0;
  std::vector<std::pair<std::vector<int>, Polynomial>> entries;
};

// Parameters are carried in typed maps keyed by name. Factories reject
// unknown names and names bound to the wrong kind, so a misplaced config
// key fails loudly instead of silently falling back to a default.
struct ModelParams {
  std::map<std::string, int> ints;
  std::map<std::string, double> reals;
  std::map<std::string, std::string> strings;
  std::map<std::string, std::vector<double>> vectors;
  std::map<std::string, PolyTable> tables;
};

// One row of a model's published parameter schema; kind is one of
// int, real, string, vector, table.
struct ParamSpec {
  std::string name;
  std::string kind;
  std::string description;
};

// Factory output: the system carries the structure plus the default drift
// Hamiltonian and noise; expanded is set for the five expanded-geometry
// models and feeds the audit. Casimirs are the invariants known to hold
// for the produced structure at any parameter values.
struct ModelInstance {
  std::string model;
  StochasticHamiltonianSystem system;
  std::vector<std::string> casimir_names;
  std::vector<ScalarField> casimirs;
  std::optional<ExpandedInputs> expanded;
  std::string note;
};

struct ModelDescriptor {
  std::string name;
  std::string dimensions;
  std::vector<ParamSpec> schema;
  std::function<ModelInstance(const ModelParams&)> factory;
};

namespace detail {

inline int param_int(const ModelParams& p, const std::string& key,
                     int fallback) {
  auto it = p.ints.find(key);
  return it == p.ints.end() ? fallback : it->second;
}

inline double param_real(const ModelParams& p, const std::string& key,
                         double fallback) {
  auto it = p.reals.find(key);
  return it == p.reals.end() ? fallback : it->second;
}

inline std::string param_string(const ModelParams& p, const std::string& key,
                                const std::string& fallback) {
  auto it = p.strings.find(key);
  return it == p.strings.end() ? fallback : it->second;
}

inline const PolyTable* param_table(const ModelParams& p,
                                    const std::string& key) {
  auto it = p.tables.find(key);
  return it == p.tables.end() ? nullptr : &it->second;
}

// Every provided key must appear in the schema with the kind it was given
// under, so "anchor given as a vector" is an error, not a silent default.
inline void check_parameters(const ModelParams& p, const std::string& model,
                             const std::vector<ParamSpec>& schema) {
  auto verify = [&](const std::string& key, const char* kind) {
    for (const auto& s : schema) {
      if (s.name != key) continue;
      if (s.kind != kind) {
        throw field_error(model + ": parameter '" + key +
                          "' must be given as " + s.kind);
      }
      return;
    }
    throw field_error(model + ": unknown parameter '" + key + "'");
  };
  for (const auto& [k, v] : p.ints) verify(k, "int");
  for (const auto& [k, v] : p.reals) verify(k, "real");
  for (const auto& [k, v] : p.strings) verify(k, "string");
  for (const auto& [k, v] : p.vectors) verify(k, "vector");
  for (const auto& [k, v] : p.tables) verify(k, "table");
}

inline std::string shape_text(const std::vector<int>& shape) {
  std::string out = "[";
  for (std::size_t k = 0; k < shape.size(); ++k) {
    if (k) out += ", ";
    out += std::to_string(shape[k]);
  }
  return out + "]";
}

// Validates and densifies a sparse table: shape and variable count must
// match, indices must be in range, and no cell may be listed twice.
inline std::vector<Polynomial> table_cells(const PolyTable& t,
                                           const std::vector<int>& shape,
                                           int dim,
                                           const std::string& field) {
  if (t.shape != shape) {
    throw field_error(field + ": table shape must be " + shape_text(shape) +
                      ", got " + shape_text(t.shape));
  }
  if (t.dim != dim) {
    throw field_error(field + ": table entries must be polynomials in " +
                      std::to_string(dim) + " variables");
  }
  std::size_t total = 1;
  for (int s : shape) total *= static_cast<std::size_t>(s);
  std::vector<Polynomial> cells(total, Polynomial(dim));
  std::vector<char> seen(total, 0);
  for (const auto& [idx, poly] : t.entries) {
    if (idx.size() != shape.size()) {
      throw field_error(field + ": entry index needs " +
                        std::to_string(shape.size()) + " components");
    }
    std::size_t flat = 0;
    for (std::size_t k = 0; k < shape.size(); ++k) {
      if (idx[k] < 0 || idx[k] >= shape[k]) {
        throw field_error(field + ": entry index out of range for shape " +
                          shape_text(shape));
      }
      flat = flat * static_cast<std::size_t>(shape[k]) +
             static_cast<std::size_t>(idx[k]);
    }
    if (seen[flat]) {
      throw field_error(field + ": duplicate entry for one cell");
    }
    seen[flat] = 1;
    if (poly.dim() != dim) {
      throw field_error(field + ": entry polynomial has " +
                        std::to_string(poly.dim()) + " variables, table has " +
                        std::to_string(dim));
    }
    cells[flat] = poly;
  }
  return cells;
}

inline PolyMat table_to_mat(const PolyTable& t, int rows, int cols, int dim,
                            const std::string& field) {
  auto cells = table_cells(t, {rows, cols}, dim, field);
  PolyMat out(rows, cols, dim);
  out.data = std::move(cells);
  return out;
}

inline PolyTensor3 table_to_tensor3(const PolyTable& t, int d0, int d1,
                                    int d2, int dim,
                                    const std::string& field) {
  auto cells = table_cells(t, {d0, d1, d2}, dim, field);
  PolyTensor3 out(d0, d1, d2, dim);
  out.data = std::move(cells);
  return out;
}

inline PolyTensor4 table_to_tensor4(const PolyTable& t, int d0, int d1,
                                    int d2, int d3, int dim,
                                    const std::string& field) {
  auto cells = table_cells(t, {d0, d1, d2, d3}, dim, field);
  PolyTensor4 out(d0, d1, d2, d3, dim);
  out.data = std::move(cells);
  return out;
}

inline int poly_degree(const Polynomial& p) {
  int deg = 0;
  for (const auto& [e, c] : p.terms()) {
    int s = 0;
    for (int k : e) s += k;
    deg = std::max(deg, s);
  }
  return deg;
}

// Connection-type tables are capped at quadratic entries: the cap keeps
// curvature and its derivatives exactly representable downstream.
inline void require_degree_cap(const PolyTable& t, int cap,
                               const std::string& field) {
  for (const auto& [idx, poly] : t.entries) {
    if (poly_degree(poly) > cap) {
      throw field_error(field + ": polynomial degree above " +
                        std::to_string(cap));
    }
  }
}

// Channel count shared by a family of noise tables: the first present
// table fixes it, the rest must agree, and fallback applies when none are
// given. Noise table shapes always lead with the channel index.
inline int noise_channels(std::initializer_list<const PolyTable*> tables,
                          int fallback, const std::string& model) {
  int channels = -1;
  for (const PolyTable* t : tables) {
    if (!t) continue;
    if (t->shape.empty()) {
      throw field_error(model + ": noise table needs a channel dimension");
    }
    if (t->shape[0] < 0) {
      throw field_error(model + ": noise channel count must be nonnegative");
    }
    if (channels == -1) {
      channels = t->shape[0];
    } else if (channels != t->shape[0]) {
      throw field_error(model + ": noise tables disagree on channel count");
    }
  }
  return channels == -1 ? fallback : channels;
}

// Quadratic form (1/2) sum_j z_j^2 / w_j over the coordinates [lo, hi).
inline Polynomial diagonal_quadratic(int m, int lo, int hi,
                                     const std::vector<double>& w) {
  Polynomial h(m);
  for (int j = lo; j < hi; ++j) {
    const double wj = w.empty() ? 1.0 : w[static_cast<std::size_t>(j - lo)];
    h = h + Polynomial::variable(m, j) * Polynomial::variable(m, j) *
                (0.5 / wj);
  }
  return h;
}

// Structure-constant presets for the linear Lie-Poisson model. The signs
// are chosen so that the compiled drift reproduces the classical Euler
// rigid-body equations xdot = x cross grad(h): {x_i, x_j} = -eps_ijk x_k.
inline Tensor3 rotation_constants() {
  Tensor3 L(3, 3, 3);
  auto set = [&L](int i, int j, int k, double v) {
    L(i, j, k) = v;
    L(j, i, k) = -v;
  };
  set(0, 1, 2, -1.0);
  set(1, 2, 0, -1.0);
  set(2, 0, 1, -1.0);
  return L;
}

// so(2,1): {x_1, x_2} = -x_3 with the rotation pairs sign-flipped so that
// x_1^2 + x_2^2 - x_3^2 commutes with everything.
inline Tensor3 lorentz_constants() {
  Tensor3 L(3, 3, 3);
  auto set = [&L](int i, int j, int k, double v) {
    L(i, j, k) = v;
    L(j, i, k) = -v;
  };
  set(0, 1, 2, -1.0);
  set(1, 2, 0, 1.0);
  set(2, 0, 1, 1.0);
  return L;
}

// se(3) on (pi, gamma): rotation brackets on pi, pi rotates gamma, and
// gamma commutes with itself; the classical heavy-top phase space.
inline Tensor3 euclidean_constants() {
  Tensor3 L(6, 6, 6);
  auto eps = [](int i, int j, int k) -> double {
    if (i == j || j == k || i == k) return 0.0;
    return ((j - i + 3) % 3 == 1) ? 1.0 : -1.0;
  };
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      for (int k = 0; k < 3; ++k) {
        const double e = -eps(i, j, k);
        if (e == 0.0) continue;
        L(i, j, k) = e;          // {pi_i, pi_j} = -eps pi_k
        L(i, 3 + j, 3 + k) = e;  // {pi_i, gamma_j} = -eps gamma_k
        L(3 + j, i, 3 + k) = -e;
      }
    }
  }
  return L;
}

inline ModelInstance make_so3_lie_poisson(const ModelParams& params,
                                          const std::vector<ParamSpec>& schema) {
  const std::string model = "so3_lie_poisson";
  check_parameters(params, model, schema);
  const std::string algebra = param_string(params, "algebra", "so3");

  Tensor3 constants;
  int m = 3;
  if (algebra == "so3") {
    constants = rotation_constants();
  } else if (algebra == "so21") {
    constants = lorentz_constants();
  } else if (algebra == "se3") {
    constants = euclidean_constants();
    m = 6;
  } else {
    throw field_error(model + ": algebra must be so3, so21, or se3, got '" +
                      algebra + "'");
  }

  std::vector<double> inertia;
  if (auto it = params.vectors.find("inertia"); it != params.vectors.end()) {
    inertia = it->second;
  } else {
    inertia = {1.0, 2.0, 3.0};
    while (static_cast<int>(inertia.size()) < m) inertia.push_back(1.0);
  }
  if (static_cast<int>(inertia.size()) != m) {
    throw field_error(model + ": inertia needs " + std::to_string(m) +
                      " entries for algebra " + algebra);
  }
  for (double w : inertia) {
    if (!(w > 0.0)) {
      throw field_error(model + ": inertia entries must be positive");
    }
  }

  const double amplitude = param_real(params, "noise_amplitude", 0.1);

  ModelInstance inst;
  inst.model = model;
  inst.system.P = linear_lie_poisson(constants);
  inst.system.P.name = model;
  inst.system.h = diagonal_quadratic(m, 0, m, inertia).field();
  inst.system.noise = {(Polynomial::variable(m, 0) * amplitude).field()};

  if (algebra == "se3") {
    Polynomial gnorm(m);
    Polynomial mixed(m);
    for (int i = 0; i < 3; ++i) {
      gnorm = gnorm +
              Polynomial::variable(m, 3 + i) * Polynomial::variable(m, 3 + i);
      mixed = mixed +
              Polynomial::variable(m, i) * Polynomial::variable(m, 3 + i);
    }
    inst.casimir_names = {"gamma_norm_sq", "pi_dot_gamma"};
    inst.casimirs = {gnorm.field(), mixed.field()};
  } else {
    Polynomial c(m);
    const double s3 = algebra == "so21" ? -1.0 : 1.0;
    c = Polynomial::variable(m, 0) * Polynomial::variable(m, 0) +
        Polynomial::variable(m, 1) * Polynomial::variable(m, 1) +
        Polynomial::variable(m, 2) * Polynomial::variable(m, 2) * s3;
    inst.casimir_names = {algebra == "so21" ? "lorentz_form" : "x_norm_sq"};
    inst.casimirs = {c.field()};
  }
  return inst;
}

// Shared by algebroid_dual and whitney_sum: anchor and structure tables
// with the tangent algebroid as the default shape.
inline LieAlgebroid algebroid_from_params(const ModelParams& params,
                                          const std::string& model, int n,
                                          int r) {
  PolyMat b(n, r, n);
  if (const PolyTable* t = param_table(params, "anchor")) {
    b = table_to_mat(*t, n, r, n, model + ": anchor");
  } else if (r == n) {
    for (int i = 0; i < n; ++i) b(i, i) = Polynomial::constant(n, 1.0);
  } else {
    throw field_error(model + ": anchor table required when r != n");
  }
  PolyTensor3 C(r, r, r, n);
  if (const PolyTable* t = param_table(params, "structure")) {
    C = table_to_tensor3(*t, r, r, r, n, model + ": structure");
  }
  return polynomial_algebroid(n, r, b, C);
}

inline ModelInstance make_algebroid_dual(const ModelParams& params,
                                         const std::vector<ParamSpec>& schema) {
  const std::string model = "algebroid_dual";
  check_parameters(params, model, schema);
  const int n = param_int(params, "n", 2);
  const int r = param_int(params, "r", n);
  if (n <= 0 || r <= 0) {
    throw field_error(model + ": n and r must be positive");
  }
  const int m = n + r;

  AlgebroidDualInputs in;
  in.algebroid = algebroid_from_params(params, model, n, r);
  in.h = diagonal_quadratic(m, n, m, {}).field();

  const PolyTable* sections = param_table(params, "noise_sections");
  const int channels = noise_channels({sections}, 1, model);
  if (sections) {
    auto cells = table_cells(*sections, {channels, r}, n,
                             model + ": noise_sections");
    for (int s = 0; s < channels; ++s) {
      std::vector<Polynomial> comps(
          cells.begin() + static_cast<std::ptrdiff_t>(s) * r,
          cells.begin() + static_cast<std::ptrdiff_t>(s + 1) * r);
      in.noise.push_back(polynomial_section(comps));
    }
  } else {
    std::vector<Polynomial> comps(r, Polynomial(n));
    comps[0] = Polynomial::constant(n, 0.1);
    in.noise.push_back(polynomial_section(comps));
  }

  ModelInstance inst;
  inst.model = model;
  inst.system = algebroid_dual_system(in);
  inst.system.P.name = model;
  inst.expanded = ExpandedInputs(std::move(in));
  return inst;
}

inline ModelInstance make_whitney_sum(const ModelParams& params,
                                      const std::vector<ParamSpec>& schema) {
  const std::string model = "whitney_sum";
  check_parameters(params, model, schema);
  const int n = param_int(params, "n", 2);
  const int r = param_int(params, "r", n);
  if (n <= 0 || r <= 0) {
    throw field_error(model + ": n and r must be positive");
  }

  WhitneySumInputs in;
  in.algebroid = algebroid_from_params(params, model, n, r);

  if (const PolyTable* t = param_table(params, "kpp")) {
    in.kpp = table_to_mat(*t, n, n, n, model + ": kpp");
  } else {
    in.kpp = PolyMat(n, n, n);
    for (int i = 0; i < n; ++i) in.kpp(i, i) = Polynomial::constant(n, 1.0);
  }
  if (const PolyTable* t = param_table(params, "kpxi")) {
    in.kpxi = table_to_mat(*t, n, r, n, model + ": kpxi");
  } else {
    in.kpxi = PolyMat(n, r, n);
  }
  if (const PolyTable* t = param_table(params, "kxixi")) {
    in.kxixi = table_to_mat(*t, r, r, n, model + ": kxixi");
  } else {
    in.kxixi = PolyMat(r, r, n);
  }

  const PolyTable* ta = param_table(params, "noise_a");
  const PolyTable* td = param_table(params, "noise_d");
  const int channels = noise_channels({ta, td}, 1, model);
  in.a = ta ? table_to_mat(*ta, channels, r, n, model + ": noise_a")
            : PolyMat(channels, r, n);
  in.d = td ? table_to_mat(*td, channels, n, n, model + ": noise_d")
            : PolyMat(channels, n, n);
  if (!ta && !td && channels == 1) {
    in.a(0, 0) = Polynomial::constant(n, 0.1);
  }

  ModelInstance inst;
  inst.model = model;
  inst.system = whitney_sum_system(in);
  inst.system.P.name = model;
  inst.expanded = ExpandedInputs(std::move(in));
  return inst;
}

inline ModelInstance make_adjoint_bundle(const ModelParams& params,
                                         const std::vector<ParamSpec>& schema) {
  const std::string model = "adjoint_bundle";
  check_parameters(params, model, schema);
  const int n = param_int(params, "n", 2);
  if (n <= 0) throw field_error(model + ": n must be positive");

  const std::string algebra = param_string(params, "algebra", "so3");
  LieAlgebraSpec spec;
  if (algebra == "so3") {
    spec = so3_algebra();
  } else if (algebra == "abelian") {
    const int p = param_int(params, "fiber_dim", 1);
    if (p <= 0) throw field_error(model + ": fiber_dim must be positive");
    spec = abelian_algebra(p);
  } else {
    throw field_error(model + ": algebra must be so3 or abelian, got '" +
                      algebra + "'");
  }
  const int p = spec.p;
  const int m = 2 * n + p;

  const std::string orientation =
      param_string(params, "orientation", "consistent");
  if (orientation != "consistent" && orientation != "as_printed") {
    throw field_error(model +
                      ": orientation must be consistent or as_printed");
  }

  PrincipalConnection conn;
  if (const PolyTable* t = param_table(params, "connection")) {
    require_degree_cap(*t, 2, model + ": connection");
    conn = polynomial_connection(spec, n,
                                 table_to_mat(*t, p, n, n,
                                              model + ": connection"));
  } else {
    conn = zero_connection(spec, n);
  }

  AdjointBundleInputs in;
  in.conn = std::move(conn);
  in.h = diagonal_quadratic(m, n, m, {}).field();
  in.orientation = orientation == "consistent"
                       ? AdjointOrientation::consistent
                       : AdjointOrientation::as_printed;

  const PolyTable* ta = param_table(params, "noise_a");
  const PolyTable* td = param_table(params, "noise_d");
  const int channels = noise_channels({ta, td}, 1, model);
  std::vector<Polynomial> acells(static_cast<std::size_t>(channels) * n,
                                 Polynomial(n));
  std::vector<Polynomial> dcells(static_cast<std::size_t>(channels) * p,
                                 Polynomial(n));
  if (ta) acells = table_cells(*ta, {channels, n}, n, model + ": noise_a");
  if (td) dcells = table_cells(*td, {channels, p}, n, model + ": noise_d");
  if (!ta && !td && channels == 1) {
    dcells[0] = Polynomial::constant(n, 0.1);
  }
  for (int s = 0; s < channels; ++s) {
    AdjointBundleNoise ch;
    ch.a.assign(acells.begin() + static_cast<std::ptrdiff_t>(s) * n,
                acells.begin() + static_cast<std::ptrdiff_t>(s + 1) * n);
    ch.d.assign(dcells.begin() + static_cast<std::ptrdiff_t>(s) * p,
                dcells.begin() + static_cast<std::ptrdiff_t>(s + 1) * p);
    in.noise.push_back(std::move(ch));
  }

  Polynomial munorm(m);
  for (int a = 0; a < p; ++a) {
    munorm = munorm + Polynomial::variable(m, 2 * n + a) *
                          Polynomial::variable(m, 2 * n + a);
  }

  ModelInstance inst;
  inst.model = model;
  inst.system = adjoint_bundle_system(in);
  inst.system.P.name = model;
  inst.casimir_names = {"mu_norm_sq"};
  inst.casimirs = {munorm.field()};
  inst.expanded = ExpandedInputs(std::move(in));
  return inst;
}

inline ModelInstance make_affine_refinement(
    const ModelParams& params, const std::vector<ParamSpec>& schema) {
  const std::string model = "affine_refinement";
  check_parameters(params, model, schema);
  const int n = param_int(params, "n", 2);
  if (n <= 0) throw field_error(model + ": n must be positive");
  const int m = 2 * n + n * n + n;

  PolyTensor3 Agl(n, n, n, n);
  if (const PolyTable* t = param_table(params, "gl_connection")) {
    require_degree_cap(*t, 2, model + ": gl_connection");
    Agl = table_to_tensor3(*t, n, n, n, n, model + ": gl_connection");
  }
  PolyMat Atr(n, n, n);
  if (const PolyTable* t = param_table(params, "translation_connection")) {
    require_degree_cap(*t, 2, model + ": translation_connection");
    Atr = table_to_mat(*t, n, n, n, model + ": translation_connection");
  }

  AffineRefinementInputs in;
  in.package = affine_connection_package(n, Agl, Atr);
  in.h = diagonal_quadratic(m, n, m, {}).field();

  const PolyTable* ta = param_table(params, "noise_a");
  const PolyTable* td = param_table(params, "noise_d");
  const PolyTable* tg = param_table(params, "noise_g");
  const int channels = noise_channels({ta, td, tg}, 1, model);
  std::vector<Polynomial> acells(static_cast<std::size_t>(channels) * n,
                                 Polynomial(n));
  std::vector<Polynomial> dcells(
      static_cast<std::size_t>(channels) * n * n, Polynomial(n));
  std::vector<Polynomial> gcells(static_cast<std::size_t>(channels) * n,
                                 Polynomial(n));
  if (ta) acells = table_cells(*ta, {channels, n}, n, model + ": noise_a");
  if (td) dcells = table_cells(*td, {channels, n, n}, n, model + ": noise_d");
  if (tg) gcells = table_cells(*tg, {channels, n}, n, model + ": noise_g");
  if (!ta && !td && !tg && channels == 1) {
    for (int k = 0; k < n; ++k) {
      dcells[static_cast<std::size_t>(k) * n + k] =
          Polynomial::constant(n, 0.1);
    }
  }
  for (int s = 0; s < channels; ++s) {
    AffineRefinementNoise ch;
    ch.a.assign(acells.begin() + static_cast<std::ptrdiff_t>(s) * n,
                acells.begin() + static_cast<std::ptrdiff_t>(s + 1) * n);
    ch.d = PolyMat(n, n, n);
    for (int k = 0; k < n; ++k) {
      for (int l = 0; l < n; ++l) {
        ch.d(k, l) = dcells[(static_cast<std::size_t>(s) * n + k) * n + l];
      }
    }
    ch.g.assign(gcells.begin() + static_cast<std::ptrdiff_t>(s) * n,
                gcells.begin() + static_cast<std::ptrdiff_t>(s + 1) * n);
    in.noise.push_back(std::move(ch));
  }

  ModelInstance inst;
  inst.model = model;
  inst.system = affine_refinement_system(in);
  inst.system.P.name = model;
  inst.note =
      "verbatim tables; the matrix-translation momentum coupling does not "
      "close under the underlying bracket, so check mode reports a Jacobi "
      "residual once the connection is nonzero";
  inst.expanded = ExpandedInputs(std::move(in));
  return inst;
}

inline ModelInstance make_gl_refinement(const ModelParams& params,
                                        const std::vector<ParamSpec>& schema) {
  const std::string model = "gl_refinement";
  check_parameters(params, model, schema);
  const int n = param_int(params, "n", 2);
  if (n <= 0) throw field_error(model + ": n must be positive");
  const int m = 4 * n + n * n;
  const int base = 2 * n;

  const std::string variant = param_string(params, "variant", "as_printed");
  if (variant != "as_printed" && variant != "corrected") {
    throw field_error(model + ": variant must be as_printed or corrected");
  }

  GlRefinementData data = zero_gl_refinement_data(n);
  if (const PolyTable* t = param_table(params, "gl_x")) {
    require_degree_cap(*t, 2, model + ": gl_x");
    data.A = table_to_tensor3(*t, n, n, n, base, model + ": gl_x");
  }
  if (const PolyTable* t = param_table(params, "gl_q")) {
    require_degree_cap(*t, 2, model + ": gl_q");
    data.Bq = table_to_tensor3(*t, n, n, n, base, model + ": gl_q");
  }
  if (const PolyTable* t = param_table(params, "curvature_xx")) {
    require_degree_cap(*t, 2, model + ": curvature_xx");
    data.Bxx = table_to_tensor4(*t, n, n, n, n, base, model + ": curvature_xx");
  }
  if (const PolyTable* t = param_table(params, "curvature_qq")) {
    require_degree_cap(*t, 2, model + ": curvature_qq");
    data.Bqq = table_to_tensor4(*t, n, n, n, n, base, model + ": curvature_qq");
  }
  if (const PolyTable* t = param_table(params, "curvature_xq")) {
    require_degree_cap(*t, 2, model + ": curvature_xq");
    data.Bxq = table_to_tensor4(*t, n, n, n, n, base, model + ": curvature_xq");
  }

  GlRefinementInputs in;
  in.data = std::move(data);
  in.h = diagonal_quadratic(m, base, m, {}).field();
  in.corrected = variant == "corrected";

  const PolyTable* ta = param_table(params, "noise_a");
  const PolyTable* td = param_table(params, "noise_d");
  const PolyTable* tg = param_table(params, "noise_g");
  const int channels = noise_channels({ta, td, tg}, 1, model);
  std::vector<Polynomial> acells(static_cast<std::size_t>(channels) * n,
                                 Polynomial(base));
  std::vector<Polynomial> dcells(static_cast<std::size_t>(channels) * n,
                                 Polynomial(base));
  std::vector<Polynomial> gcells(
      static_cast<std::size_t>(channels) * n * n, Polynomial(base));
  if (ta) acells = table_cells(*ta, {channels, n}, base, model + ": noise_a");
  if (td) dcells = table_cells(*td, {channels, n}, base, model + ": noise_d");
  if (tg) {
    gcells = table_cells(*tg, {channels, n, n}, base, model + ": noise_g");
  }
  if (!ta && !td && !tg && channels == 1) {
    dcells[0] = Polynomial::constant(base, 0.1);
  }
  for (int s = 0; s < channels; ++s) {
    GlRefinementNoise ch;
    ch.a.assign(acells.begin() + static_cast<std::ptrdiff_t>(s) * n,
                acells.begin() + static_cast<std::ptrdiff_t>(s + 1) * n);
    ch.d.assign(dcells.begin() + static_cast<std::ptrdiff_t>(s) * n,
                dcells.begin() + static_cast<std::ptrdiff_t>(s + 1) * n);
    ch.g = PolyMat(n, n, base);
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        ch.g(j, k) = gcells[(static_cast<std::size_t>(s) * n + j) * n + k];
      }
    }
    in.noise.push_back(std::move(ch));
  }

  Polynomial trace(m);
  for (int k = 0; k < n; ++k) {
    trace = trace +
            Polynomial::variable(m, 4 * n + refinement_mu_slot(n, k, k));
  }

  ModelInstance inst;
  inst.model = model;
  inst.system = gl_refinement_system(in);
  inst.system.P.name = model;
  inst.casimir_names = {"mu_trace"};
  inst.casimirs = {trace.field()};
  if (variant == "as_printed") {
    inst.note =
        "as-printed base pairing couples x to lambda; the audit enumerates "
        "the couplings that deviate from the corrected pairing";
  }
  inst.expanded = ExpandedInputs(std::move(in));
  return inst;
}

}  // namespace detail

// The six built-in models, in registry order. Factories validate every
// parameter against the published schema and throw field_error naming the
// offending field.
inline const std::vector<ModelDescriptor>& registry() {
  static const std::vector<ModelDescriptor> models = [] {
    std::vector<ModelDescriptor> out;

    {
      ModelDescriptor d;
      d.name = "so3_lie_poisson";
      d.dimensions = "m = 3 (so3, so21) or m = 6 (se3)";
      d.schema = {
          {"algebra", "string",
           "structure preset: so3 (default), so21, or se3"},
          {"inertia", "vector",
           "diagonal kinetic coefficients, length m; default (1, 2, 3) "
           "padded with 1s"},
          {"noise_amplitude", "real",
           "coefficient of the single x1-linear noise channel, default 0.1"},
      };
      d.factory = [schema = d.schema](const ModelParams& p) {
        return detail::make_so3_lie_poisson(p, schema);
      };
      out.push_back(std::move(d));
    }

    {
      ModelDescriptor d;
      d.name = "algebroid_dual";
      d.dimensions = "m = n + r";
      d.schema = {
          {"n", "int", "base dimension, default 2"},
          {"r", "int", "fiber rank, default n"},
          {"anchor", "table",
           "[n, r] over x: anchor coefficients at (i, alpha); default "
           "identity, required when r != n"},
          {"structure", "table",
           "[r, r, r] over x: structure functions at (gamma, alpha, beta); "
           "default 0"},
          {"noise_sections", "table",
           "[channels, r] over x: one fiber-linear section per channel; "
           "default one channel (0.1, 0, ...)"},
      };
      d.factory = [schema = d.schema](const ModelParams& p) {
        return detail::make_algebroid_dual(p, schema);
      };
      out.push_back(std::move(d));
    }

    {
      ModelDescriptor d;
      d.name = "whitney_sum";
      d.dimensions = "m = 2n + r";
      d.schema = {
          {"n", "int", "base dimension, default 2"},
          {"r", "int", "fiber rank, default n"},
          {"anchor", "table", "[n, r] over x, as in algebroid_dual"},
          {"structure", "table", "[r, r, r] over x, as in algebroid_dual"},
          {"kpp", "table",
           "[n, n] over x, symmetric: momentum quadratic form; default "
           "identity"},
          {"kpxi", "table", "[n, r] over x: momentum-fiber cross term; "
           "default 0"},
          {"kxixi", "table",
           "[r, r] over x, symmetric: fiber quadratic form; default 0"},
          {"noise_a", "table",
           "[channels, r] over x: fiber couplings; default one channel "
           "(0.1, 0, ...)"},
          {"noise_d", "table",
           "[channels, n] over x: momentum couplings; default 0"},
      };
      d.factory = [schema = d.schema](const ModelParams& p) {
        return detail::make_whitney_sum(p, schema);
      };
      out.push_back(std::move(d));
    }

    {
      ModelDescriptor d;
      d.name = "adjoint_bundle";
      d.dimensions = "m = 2n + p (p = fiber algebra dimension)";
      d.schema = {
          {"n", "int", "base dimension, default 2"},
          {"algebra", "string",
           "fiber algebra: so3 (default, p = 3) or abelian"},
          {"fiber_dim", "int", "abelian fiber dimension, default 1"},
          {"connection", "table",
           "[p, n] over x, degree <= 2: connection coefficients; default 0"},
          {"orientation", "string",
           "mu-mu block sign: consistent (default) or as_printed"},
          {"noise_a", "table",
           "[channels, n] over x: momentum couplings; default 0"},
          {"noise_d", "table",
           "[channels, p] over x: mu couplings; default one channel "
           "(0.1, 0, ...)"},
      };
      d.factory = [schema = d.schema](const ModelParams& p) {
        return detail::make_adjoint_bundle(p, schema);
      };
      out.push_back(std::move(d));
    }

    {
      ModelDescriptor d;
      d.name = "affine_refinement";
      d.dimensions = "m = 2n + n^2 + n";
      d.schema = {
          {"n", "int", "base dimension, default 2"},
          {"gl_connection", "table",
           "[n, n, n] over x, degree <= 2: matrix coefficients at "
           "(h, k, i); default 0"},
          {"translation_connection", "table",
           "[n, n] over x, degree <= 2: translation coefficients at "
           "(h, i); default 0"},
          {"noise_a", "table",
           "[channels, n] over x: momentum couplings; default 0"},
          {"noise_d", "table",
           "[channels, n, n] over x: matrix-momentum couplings; default "
           "one channel 0.1 * identity"},
          {"noise_g", "table",
           "[channels, n] over x: translation-momentum couplings; "
           "default 0"},
      };
      d.factory = [schema = d.schema](const ModelParams& p) {
        return detail::make_affine_refinement(p, schema);
      };
      out.push_back(std::move(d));
    }

    {
      ModelDescriptor d;
      d.name = "gl_refinement";
      d.dimensions = "m = 4n + n^2";
      d.schema = {
          {"n", "int", "base dimension, default 2"},
          {"variant", "string",
           "base pairing: as_printed (default, x pairs with lambda) or "
           "corrected (q pairs with lambda)"},
          {"gl_x", "table",
           "[n, n, n] over (x, q), degree <= 2: horizontal matrix table; "
           "default 0"},
          {"gl_q", "table",
           "[n, n, n] over (x, q), degree <= 2: q-direction matrix table; "
           "default 0"},
          {"curvature_xx", "table",
           "[n, n, n, n] over (x, q), degree <= 2; default 0"},
          {"curvature_qq", "table",
           "[n, n, n, n] over (x, q), degree <= 2; default 0"},
          {"curvature_xq", "table",
           "[n, n, n, n] over (x, q), degree <= 2; default 0"},
          {"noise_a", "table",
           "[channels, n] over (x, q): p couplings; default 0"},
          {"noise_d", "table",
           "[channels, n] over (x, q): lambda couplings; default one "
           "channel (0.1, 0, ...)"},
          {"noise_g", "table",
           "[channels, n, n] over (x, q): mu couplings; default 0"},
      };
      d.factory = [schema = d.schema](const ModelParams& p) {
        return detail::make_gl_refinement(p, schema);
      };
      out.push_back(std::move(d));
    }

    return out;
  }();
  return models;
}

inline const ModelDescriptor& find_model(const std::string& name) {
  for (const ModelDescriptor& d : registry()) {
    if (d.name == name) return d;
  }
  std::string known;
  for (const ModelDescriptor& d : registry()) {
    if (!known.empty()) known += ", ";
    known += d.name;
  }
  throw field_error("unknown model '" + name + "'; available: " + known);
}

}  // namespace liepoisson
