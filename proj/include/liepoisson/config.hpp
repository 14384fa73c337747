#pragma once

// Run configuration: one YAML document selecting a model, optional
// Hamiltonian and noise overrides, the integrator grid, invariant
// monitors, check tolerances, and output paths. Parsing validates key
// names, kinds, and scalar ranges up front with errors naming the field
// by dotted path; dimension checks against the built model happen in the
// driver, still before any stepping. Serialization is canonical: fixed
// key order, two-space indents, shortest round-trip floats, so identical
// configs are identical bytes.

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "liepoisson/integrate.hpp"
#include "liepoisson/models.hpp"

namespace liepoisson {

enum class RunMode { simulate, check, audit };

inline std::string run_mode_name(RunMode m) {
  switch (m) {
    case RunMode::simulate: return "simulate";
    case RunMode::check: return "check";
    case RunMode::audit: return "audit";
  }
  return "simulate";
}

// A conserved quantity to track during simulation: either the model's own
// Casimir list or an explicit named polynomial.
struct MonitorSpec {
  bool from_model = false;
  std::string name;
  Polynomial poly;
};

struct CheckSettings {
  double antisymmetry_tol = 1e-12;
  double jacobi_tol = 1e-7;
  int n_points = 100;
};

struct OutputPaths {
  std::string paths = "paths.csv";
  std::string stats = "stats.txt";
  std::string audit = "audit.txt";
  std::string check = "check.txt";
};

struct RunConfig {
  RunMode mode = RunMode::simulate;
  std::string model;
  ModelParams params;
  bool hamiltonian_from_model = true;
  Polynomial hamiltonian;
  bool noise_from_model = true;
  std::vector<Polynomial> noise;
  Vec initial;
  IntegratorConfig integrator;
  int n_paths = 1;
  double max_failed_fraction = 0.0;
  std::vector<MonitorSpec> monitors;
  CheckSettings checks;
  OutputPaths outputs;
};

namespace detail {

// Shortest decimal form that parses back to the same double; keeps the
// canonical file readable and byte-stable.
inline std::string fmt_compact(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string key_path(const std::string& prefix, const std::string& k) {
  return prefix.empty() ? k : prefix + "." + k;
}

inline void require_known_keys(const YAML::Node& map,
                               const std::string& prefix,
                               std::initializer_list<const char*> known) {
  for (const auto& kv : map) {
    const std::string k = kv.first.as<std::string>();
    bool ok = false;
    for (const char* x : known) {
      if (k == x) {
        ok = true;
        break;
      }
    }
    if (!ok) throw field_error(key_path(prefix, k) + ": unknown key");
  }
}

inline int node_int(const YAML::Node& n, const std::string& path) {
  try {
    return n.as<int>();
  } catch (const YAML::Exception&) {
    throw field_error(path + ": expected an integer");
  }
}

inline std::uint64_t node_uint64(const YAML::Node& n,
                                 const std::string& path) {
  try {
    return n.as<std::uint64_t>();
  } catch (const YAML::Exception&) {
    throw field_error(path + ": expected a nonnegative integer");
  }
}

inline double node_real(const YAML::Node& n, const std::string& path) {
  try {
    return n.as<double>();
  } catch (const YAML::Exception&) {
    throw field_error(path + ": expected a number");
  }
}

inline std::string node_string(const YAML::Node& n, const std::string& path) {
  if (!n.IsScalar()) throw field_error(path + ": expected a string");
  return n.as<std::string>();
}

inline std::vector<int> node_int_list(const YAML::Node& n,
                                      const std::string& path) {
  if (!n.IsSequence()) throw field_error(path + ": expected a list");
  std::vector<int> out;
  for (std::size_t i = 0; i < n.size(); ++i) {
    out.push_back(node_int(n[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

inline std::vector<double> node_real_list(const YAML::Node& n,
                                          const std::string& path) {
  if (!n.IsSequence()) throw field_error(path + ": expected a list");
  std::vector<double> out;
  for (std::size_t i = 0; i < n.size(); ++i) {
    out.push_back(node_real(n[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

// A polynomial is a list of {exponents, coefficient} monomials. dim < 0
// infers the variable count from the first term; duplicate exponent
// tuples accumulate.
inline Polynomial node_polynomial(const YAML::Node& n, int dim,
                                  const std::string& path) {
  if (!n.IsSequence() || n.size() == 0) {
    throw field_error(path +
                      ": expected a nonempty list of "
                      "{exponents, coefficient} terms");
  }
  std::vector<std::pair<std::vector<int>, double>> terms;
  for (std::size_t i = 0; i < n.size(); ++i) {
    const std::string tpath = path + "[" + std::to_string(i) + "]";
    const YAML::Node term = n[i];
    if (!term.IsMap()) {
      throw field_error(tpath + ": expected {exponents, coefficient}");
    }
    require_known_keys(term, tpath, {"exponents", "coefficient"});
    if (!term["exponents"] || !term["coefficient"]) {
      throw field_error(tpath + ": needs exponents and coefficient");
    }
    auto e = node_int_list(term["exponents"], tpath + ".exponents");
    for (int x : e) {
      if (x < 0) {
        throw field_error(tpath + ".exponents: must be nonnegative");
      }
    }
    terms.emplace_back(std::move(e),
                       node_real(term["coefficient"], tpath + ".coefficient"));
  }
  const int d = dim >= 0 ? dim : static_cast<int>(terms[0].first.size());
  Polynomial p(d);
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (static_cast<int>(terms[i].first.size()) != d) {
      throw field_error(path + "[" + std::to_string(i) +
                        "].exponents: needs " + std::to_string(d) +
                        " entries");
    }
    p.add_term(terms[i].first, terms[i].second);
  }
  return p;
}

inline PolyTable node_table(const YAML::Node& n, const std::string& path) {
  if (!n.IsMap()) {
    throw field_error(path + ": expected a map with shape, dim, entries");
  }
  require_known_keys(n, path, {"shape", "dim", "entries"});
  if (!n["shape"] || !n["dim"]) {
    throw field_error(path + ": needs shape and dim");
  }
  PolyTable t;
  t.shape = node_int_list(n["shape"], path + ".shape");
  t.dim = node_int(n["dim"], path + ".dim");
  if (t.dim < 1) throw field_error(path + ".dim: must be positive");
  if (const YAML::Node entries = n["entries"]) {
    if (!entries.IsSequence()) {
      throw field_error(path + ".entries: expected a list");
    }
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const std::string epath =
          path + ".entries[" + std::to_string(i) + "]";
      const YAML::Node entry = entries[i];
      if (!entry.IsMap()) {
        throw field_error(epath + ": expected {index, terms}");
      }
      require_known_keys(entry, epath, {"index", "terms"});
      if (!entry["index"] || !entry["terms"]) {
        throw field_error(epath + ": needs index and terms");
      }
      t.entries.emplace_back(
          node_int_list(entry["index"], epath + ".index"),
          node_polynomial(entry["terms"], t.dim, epath + ".terms"));
    }
  }
  return t;
}

inline void parse_model_section(const YAML::Node& n, RunConfig& cfg) {
  if (!n || !n.IsMap()) {
    throw field_error("model: expected a map with at least a name");
  }
  if (!n["name"]) throw field_error("model.name: required");
  cfg.model = node_string(n["name"], "model.name");
  const ModelDescriptor* desc = nullptr;
  try {
    desc = &find_model(cfg.model);
  } catch (const field_error& e) {
    throw field_error(std::string("model.name: ") + e.what());
  }
  for (const auto& kv : n) {
    const std::string key = kv.first.as<std::string>();
    if (key == "name") continue;
    const std::string path = "model." + key;
    const ParamSpec* spec = nullptr;
    for (const ParamSpec& s : desc->schema) {
      if (s.name == key) {
        spec = &s;
        break;
      }
    }
    if (!spec) {
      throw field_error(path + ": not a parameter of " + cfg.model);
    }
    if (spec->kind == "int") {
      cfg.params.ints[key] = node_int(kv.second, path);
    } else if (spec->kind == "real") {
      cfg.params.reals[key] = node_real(kv.second, path);
    } else if (spec->kind == "string") {
      cfg.params.strings[key] = node_string(kv.second, path);
    } else if (spec->kind == "vector") {
      cfg.params.vectors[key] = node_real_list(kv.second, path);
    } else {
      cfg.params.tables[key] = node_table(kv.second, path);
    }
  }
}

}  // namespace detail

inline RunConfig parse_run_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw field_error(std::string("config: ") + e.what());
  }
  if (!root.IsMap()) {
    throw field_error("config: top level must be a mapping");
  }
  detail::require_known_keys(
      root, "",
      {"mode", "model", "hamiltonian", "noise", "initial", "integrator",
       "n_paths", "max_failed_fraction", "monitors", "checks", "outputs"});

  RunConfig cfg;
  if (root["mode"]) {
    const std::string s = detail::node_string(root["mode"], "mode");
    if (s == "simulate") {
      cfg.mode = RunMode::simulate;
    } else if (s == "check") {
      cfg.mode = RunMode::check;
    } else if (s == "audit") {
      cfg.mode = RunMode::audit;
    } else {
      throw field_error("mode: must be simulate, check, or audit, got '" +
                        s + "'");
    }
  }

  detail::parse_model_section(root["model"], cfg);

  if (const YAML::Node h = root["hamiltonian"]) {
    if (h.IsScalar() && h.as<std::string>() == "model") {
      cfg.hamiltonian_from_model = true;
    } else if (h.IsMap()) {
      detail::require_known_keys(h, "hamiltonian", {"terms"});
      if (!h["terms"]) throw field_error("hamiltonian.terms: required");
      cfg.hamiltonian_from_model = false;
      cfg.hamiltonian =
          detail::node_polynomial(h["terms"], -1, "hamiltonian.terms");
    } else {
      throw field_error(
          "hamiltonian: must be the string 'model' or a map with terms");
    }
  }

  if (const YAML::Node nn = root["noise"]) {
    if (nn.IsScalar() && nn.as<std::string>() == "model") {
      cfg.noise_from_model = true;
    } else if (nn.IsSequence()) {
      cfg.noise_from_model = false;
      for (std::size_t s = 0; s < nn.size(); ++s) {
        const std::string path = "noise[" + std::to_string(s) + "]";
        const YAML::Node ch = nn[s];
        if (!ch.IsMap() || !ch["terms"]) {
          throw field_error(path + ": expected a map with terms");
        }
        detail::require_known_keys(ch, path, {"terms"});
        cfg.noise.push_back(
            detail::node_polynomial(ch["terms"], -1, path + ".terms"));
      }
    } else {
      throw field_error(
          "noise: must be the string 'model' or a list of {terms} channels");
    }
  }

  if (root["initial"]) {
    const auto vals = detail::node_real_list(root["initial"], "initial");
    cfg.initial = Vec(static_cast<int>(vals.size()));
    for (std::size_t j = 0; j < vals.size(); ++j) {
      cfg.initial[static_cast<int>(j)] = vals[j];
    }
  }

  if (const YAML::Node in = root["integrator"]) {
    if (!in.IsMap()) throw field_error("integrator: expected a map");
    detail::require_known_keys(in, "integrator",
                               {"scheme", "dt", "steps", "seed"});
    if (in["scheme"]) {
      const std::string s = detail::node_string(in["scheme"],
                                                "integrator.scheme");
      if (s == "euler_maruyama") {
        cfg.integrator.scheme = Scheme::euler_maruyama;
      } else if (s == "stratonovich_heun") {
        cfg.integrator.scheme = Scheme::stratonovich_heun;
      } else {
        throw field_error(
            "integrator.scheme: must be euler_maruyama or "
            "stratonovich_heun, got '" + s + "'");
      }
    }
    if (in["dt"]) cfg.integrator.dt = detail::node_real(in["dt"],
                                                        "integrator.dt");
    if (in["steps"]) {
      cfg.integrator.steps = detail::node_int(in["steps"],
                                              "integrator.steps");
    }
    if (in["seed"]) {
      cfg.integrator.seed = detail::node_uint64(in["seed"],
                                                "integrator.seed");
    }
  }
  if (!(cfg.integrator.dt > 0.0) || !std::isfinite(cfg.integrator.dt)) {
    throw field_error("integrator.dt: must be positive and finite");
  }
  if (cfg.integrator.steps <= 0) {
    throw field_error("integrator.steps: must be positive");
  }

  if (root["n_paths"]) {
    cfg.n_paths = detail::node_int(root["n_paths"], "n_paths");
  }
  if (cfg.n_paths <= 0) throw field_error("n_paths: must be positive");

  if (root["max_failed_fraction"]) {
    cfg.max_failed_fraction =
        detail::node_real(root["max_failed_fraction"], "max_failed_fraction");
  }
  if (!(cfg.max_failed_fraction >= 0.0 && cfg.max_failed_fraction <= 1.0)) {
    throw field_error("max_failed_fraction: must be in [0, 1]");
  }

  if (const YAML::Node mons = root["monitors"]) {
    if (!mons.IsSequence()) {
      throw field_error("monitors: expected a list");
    }
    for (std::size_t i = 0; i < mons.size(); ++i) {
      const std::string path = "monitors[" + std::to_string(i) + "]";
      const YAML::Node item = mons[i];
      MonitorSpec spec;
      if (item.IsScalar() && item.as<std::string>() == "model") {
        spec.from_model = true;
      } else if (item.IsMap()) {
        detail::require_known_keys(item, path, {"name", "terms"});
        if (!item["name"] || !item["terms"]) {
          throw field_error(path + ": needs name and terms");
        }
        spec.name = detail::node_string(item["name"], path + ".name");
        if (spec.name.empty()) {
          throw field_error(path + ".name: must be nonempty");
        }
        spec.poly = detail::node_polynomial(item["terms"], -1,
                                            path + ".terms");
      } else {
        throw field_error(path +
                          ": must be the string 'model' or {name, terms}");
      }
      cfg.monitors.push_back(std::move(spec));
    }
  }

  if (const YAML::Node ch = root["checks"]) {
    if (!ch.IsMap()) throw field_error("checks: expected a map");
    detail::require_known_keys(ch, "checks",
                               {"antisymmetry_tol", "jacobi_tol", "n_points"});
    if (ch["antisymmetry_tol"]) {
      cfg.checks.antisymmetry_tol =
          detail::node_real(ch["antisymmetry_tol"], "checks.antisymmetry_tol");
    }
    if (ch["jacobi_tol"]) {
      cfg.checks.jacobi_tol = detail::node_real(ch["jacobi_tol"],
                                                "checks.jacobi_tol");
    }
    if (ch["n_points"]) {
      cfg.checks.n_points = detail::node_int(ch["n_points"],
                                             "checks.n_points");
    }
    if (!(cfg.checks.antisymmetry_tol > 0.0)) {
      throw field_error("checks.antisymmetry_tol: must be positive");
    }
    if (!(cfg.checks.jacobi_tol > 0.0)) {
      throw field_error("checks.jacobi_tol: must be positive");
    }
    if (cfg.checks.n_points <= 0) {
      throw field_error("checks.n_points: must be positive");
    }
  }

  if (const YAML::Node out = root["outputs"]) {
    if (!out.IsMap()) throw field_error("outputs: expected a map");
    detail::require_known_keys(out, "outputs",
                               {"paths", "stats", "audit", "check"});
    if (out["paths"]) {
      cfg.outputs.paths = detail::node_string(out["paths"], "outputs.paths");
    }
    if (out["stats"]) {
      cfg.outputs.stats = detail::node_string(out["stats"], "outputs.stats");
    }
    if (out["audit"]) {
      cfg.outputs.audit = detail::node_string(out["audit"], "outputs.audit");
    }
    if (out["check"]) {
      cfg.outputs.check = detail::node_string(out["check"], "outputs.check");
    }
  }
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw field_error("config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

namespace detail {

struct YamlWriter {
  std::string text;
  void line(int indent, const std::string& s) {
    text.append(static_cast<std::size_t>(indent) * 2, ' ');
    text += s;
    text += '\n';
  }
};

inline std::string flow_int_list(const std::vector<int>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(v[i]);
  }
  return s + "]";
}

inline std::string flow_real_list(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += fmt_compact(v[i]);
  }
  return s + "]";
}

inline std::string term_text(const std::vector<int>& e, double c) {
  return "{exponents: " + flow_int_list(e) +
         ", coefficient: " + fmt_compact(c) + "}";
}

// A zero polynomial is written as one zero-coefficient constant term so
// the terms list is never empty.
inline void emit_poly_items(YamlWriter& w, int indent, const std::string& pad,
                            const Polynomial& p) {
  if (p.terms().empty()) {
    w.line(indent, pad + "- " +
                       term_text(std::vector<int>(p.dim(), 0), 0.0));
    return;
  }
  for (const auto& [e, c] : p.terms()) {
    w.line(indent, pad + "- " + term_text(e, c));
  }
}

}  // namespace detail

inline std::string serialize_run_config(const RunConfig& cfg) {
  detail::YamlWriter w;
  w.line(0, "mode: " + run_mode_name(cfg.mode));
  w.line(0, "model:");
  w.line(1, "name: " + cfg.model);
  for (const auto& [k, v] : cfg.params.ints) {
    w.line(1, k + ": " + std::to_string(v));
  }
  for (const auto& [k, v] : cfg.params.reals) {
    w.line(1, k + ": " + detail::fmt_compact(v));
  }
  for (const auto& [k, v] : cfg.params.strings) w.line(1, k + ": " + v);
  for (const auto& [k, v] : cfg.params.vectors) {
    w.line(1, k + ": " + detail::flow_real_list(v));
  }
  for (const auto& [k, t] : cfg.params.tables) {
    w.line(1, k + ":");
    w.line(2, "shape: " + detail::flow_int_list(t.shape));
    w.line(2, "dim: " + std::to_string(t.dim));
    if (!t.entries.empty()) {
      w.line(2, "entries:");
      for (const auto& [idx, poly] : t.entries) {
        w.line(3, "- index: " + detail::flow_int_list(idx));
        w.line(3, "  terms:");
        detail::emit_poly_items(w, 4, "  ", poly);
      }
    }
  }

  if (cfg.hamiltonian_from_model) {
    w.line(0, "hamiltonian: model");
  } else {
    w.line(0, "hamiltonian:");
    w.line(1, "terms:");
    detail::emit_poly_items(w, 2, "", cfg.hamiltonian);
  }

  if (cfg.noise_from_model) {
    w.line(0, "noise: model");
  } else if (cfg.noise.empty()) {
    w.line(0, "noise: []");
  } else {
    w.line(0, "noise:");
    for (const Polynomial& ch : cfg.noise) {
      w.line(1, "- terms:");
      detail::emit_poly_items(w, 2, "  ", ch);
    }
  }

  {
    std::vector<double> init(cfg.initial.data(),
                             cfg.initial.data() + cfg.initial.size());
    w.line(0, "initial: " + detail::flow_real_list(init));
  }

  w.line(0, "integrator:");
  w.line(1, std::string("scheme: ") +
                (cfg.integrator.scheme == Scheme::euler_maruyama
                     ? "euler_maruyama"
                     : "stratonovich_heun"));
  w.line(1, "dt: " + detail::fmt_compact(cfg.integrator.dt));
  w.line(1, "steps: " + std::to_string(cfg.integrator.steps));
  w.line(1, "seed: " + std::to_string(cfg.integrator.seed));
  w.line(0, "n_paths: " + std::to_string(cfg.n_paths));
  w.line(0, "max_failed_fraction: " +
                detail::fmt_compact(cfg.max_failed_fraction));

  if (cfg.monitors.empty()) {
    w.line(0, "monitors: []");
  } else {
    w.line(0, "monitors:");
    for (const MonitorSpec& m : cfg.monitors) {
      if (m.from_model) {
        w.line(1, "- model");
      } else {
        w.line(1, "- name: " + m.name);
        w.line(1, "  terms:");
        detail::emit_poly_items(w, 2, "  ", m.poly);
      }
    }
  }

  w.line(0, "checks:");
  w.line(1, "antisymmetry_tol: " +
                detail::fmt_compact(cfg.checks.antisymmetry_tol));
  w.line(1, "jacobi_tol: " + detail::fmt_compact(cfg.checks.jacobi_tol));
  w.line(1, "n_points: " + std::to_string(cfg.checks.n_points));
  w.line(0, "outputs:");
  w.line(1, "paths: " + cfg.outputs.paths);
  w.line(1, "stats: " + cfg.outputs.stats);
  w.line(1, "audit: " + cfg.outputs.audit);
  w.line(1, "check: " + cfg.outputs.check);
  return w.text;
}

}  // namespace liepoisson
