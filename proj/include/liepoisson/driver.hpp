#pragma once

// Executes a RunConfig end to end: build the model instance, apply
// Hamiltonian and noise overrides, validate every dimension against the
// built model, then dispatch on mode. simulate writes a replayable
// first-path CSV plus ensemble statistics; check writes a pass/fail
// structure-identity report; audit writes the expanded-equation
// comparison. Outputs are deterministic bytes for a fixed config. Config
// problems throw field_error naming the field (the CLI maps them to exit
// 1); exit code 2 means the failed-path fraction exceeded the bound.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "liepoisson/audit.hpp"
#include "liepoisson/config.hpp"
#include "liepoisson/integrate.hpp"
#include "liepoisson/models.hpp"

namespace liepoisson {

struct RunResult {
  int exit_code = 0;
  std::vector<std::string> files;  // written, in write order
  std::string summary;             // one console line
};

// Registry reference: one block per model, schema rows indented under it.
inline std::string list_models_text() {
  std::string out;
  for (const ModelDescriptor& d : registry()) {
    out += d.name + "  (" + d.dimensions + ")\n";
    for (const ParamSpec& s : d.schema) {
      out += "  " + s.name + " (" + s.kind + "): " + s.description + "\n";
    }
  }
  return out;
}

// --out-dir: relative output paths land under dir; absolute paths win.
inline void prefix_outputs(RunConfig& cfg, const std::string& dir) {
  if (dir.empty()) return;
  const std::filesystem::path base(dir);
  auto join = [&base](std::string& p) {
    p = (base / std::filesystem::path(p)).string();
  };
  join(cfg.outputs.paths);
  join(cfg.outputs.stats);
  join(cfg.outputs.audit);
  join(cfg.outputs.check);
}

namespace detail {

constexpr std::uint64_t kCheckPointSeed = 0xC4EC;
constexpr std::uint64_t kBasePointSeed = 0xBA5E;

inline void write_file(const std::string& path, const std::string& text,
                       const char* field) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
  }
  std::ofstream out(p, std::ios::binary);
  out << text;
  out.flush();
  if (!out) {
    throw field_error(std::string(field) + ": cannot write '" + path + "'");
  }
}

inline std::vector<Vec> sample_points(std::uint64_t seed, int count, int dim,
                                      double scale) {
  std::vector<Vec> pts;
  pts.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    Vec z(dim);
    for (int j = 0; j < dim; ++j) {
      const std::uint64_t at = static_cast<std::uint64_t>(k) * dim + j;
      z[j] = scale * (2.0 * rng::uniform_at(seed, at) - 1.0);
    }
    pts.push_back(std::move(z));
  }
  return pts;
}

inline std::string coord_label(const PoissonStructure& P, int i) {
  if (static_cast<int>(P.labels.size()) == P.m) return P.labels[i];
  return "z" + std::to_string(i + 1);
}

struct ResolvedMonitor {
  std::string name;
  ScalarField field;
  std::string warning;
};

struct MonitorSet {
  std::vector<ResolvedMonitor> monitors;
  std::vector<std::string> notes;
};

inline ModelInstance build_instance(const RunConfig& cfg) {
  const ModelDescriptor* desc = nullptr;
  try {
    desc = &find_model(cfg.model);
  } catch (const field_error& e) {
    throw field_error(std::string("model.name: ") + e.what());
  }
  return desc->factory(cfg.params);
}

inline void apply_overrides(const RunConfig& cfg,
                            StochasticHamiltonianSystem& sys) {
  const int m = sys.P.m;
  if (!cfg.hamiltonian_from_model) {
    if (cfg.hamiltonian.dim() != m) {
      throw field_error("hamiltonian.terms: polynomial has " +
                        std::to_string(cfg.hamiltonian.dim()) +
                        " variables, model state has dim " +
                        std::to_string(m));
    }
    sys.h = cfg.hamiltonian.field();
  }
  if (!cfg.noise_from_model) {
    std::vector<ScalarField> noise;
    for (std::size_t s = 0; s < cfg.noise.size(); ++s) {
      if (cfg.noise[s].dim() != m) {
        throw field_error("noise[" + std::to_string(s) +
                          "].terms: polynomial has " +
                          std::to_string(cfg.noise[s].dim()) +
                          " variables, model state has dim " +
                          std::to_string(m));
      }
      noise.push_back(cfg.noise[s].field());
    }
    sys.noise = std::move(noise);
  }
}

// From-model entries expand to the instance's conserved fields; explicit
// polynomials are screened so drift caused by a non-Casimir monitor is
// labeled in the stats instead of blamed on the integrator.
inline MonitorSet resolve_monitors(const RunConfig& cfg,
                                   const ModelInstance& inst) {
  MonitorSet set;
  const int m = inst.system.P.m;
  for (std::size_t i = 0; i < cfg.monitors.size(); ++i) {
    const MonitorSpec& spec = cfg.monitors[i];
    if (spec.from_model) {
      if (inst.casimirs.empty()) {
        set.notes.push_back("monitors: model provides no conserved fields");
        continue;
      }
      for (std::size_t j = 0; j < inst.casimirs.size(); ++j) {
        set.monitors.push_back({inst.casimir_names[j], inst.casimirs[j], ""});
      }
    } else {
      if (spec.poly.dim() != m) {
        throw field_error("monitors[" + std::to_string(i) +
                          "].terms: polynomial has " +
                          std::to_string(spec.poly.dim()) +
                          " variables, model state has dim " +
                          std::to_string(m));
      }
      const CasimirMonitor cm =
          casimir_monitor(inst.system.P, spec.poly.field());
      set.monitors.push_back({spec.name, cm.field, cm.warning});
    }
  }
  return set;
}

inline Vec resolve_initial(const RunConfig& cfg, int m, bool required) {
  if (cfg.initial.size() == 0) {
    if (required) {
      throw field_error("initial: required for simulate (" +
                        std::to_string(m) + " values)");
    }
    return Vec();
  }
  if (static_cast<int>(cfg.initial.size()) != m) {
    throw field_error("initial: has " + std::to_string(cfg.initial.size()) +
                      " entries, model state has dim " + std::to_string(m));
  }
  if (!cfg.initial.allFinite()) {
    throw field_error("initial: entries must be finite");
  }
  return cfg.initial;
}

inline RunResult run_simulate(const RunConfig& cfg,
                              const StochasticHamiltonianSystem& sys,
                              const MonitorSet& set, const Vec& z0) {
  const CompiledDynamics dyn = compile(sys);
  std::vector<ScalarField> fields;
  fields.reserve(set.monitors.size());
  for (const ResolvedMonitor& mon : set.monitors) fields.push_back(mon.field);
  const EnsembleStats stats =
      run_ensemble(dyn, z0, cfg.integrator, cfg.n_paths, fields);

  std::string text;
  text += "model: " + cfg.model + "\n";
  text += std::string("scheme: ") +
          (cfg.integrator.scheme == Scheme::euler_maruyama
               ? "euler_maruyama"
               : "stratonovich_heun") +
          "\n";
  text += "dt: " + fmt_compact(cfg.integrator.dt) + "\n";
  text += "steps: " + std::to_string(cfg.integrator.steps) + "\n";
  text += "seed: " + std::to_string(cfg.integrator.seed) + "\n";
  {
    std::vector<double> init(z0.data(), z0.data() + z0.size());
    text += "initial: " + flow_real_list(init) + "\n";
  }
  for (std::size_t q = 0; q < set.monitors.size(); ++q) {
    text += "monitor[" + std::to_string(q) + "]: " + set.monitors[q].name +
            "\n";
    if (!set.monitors[q].warning.empty()) {
      text += "monitor[" + std::to_string(q) +
              "] warning: " + set.monitors[q].warning + "\n";
    }
  }
  for (const std::string& note : set.notes) text += "note: " + note + "\n";
  text += ensemble_to_text(stats);

  RunResult res;
  bool first_path_ok = true;
  for (int p : stats.failed_paths) {
    if (p == 0) {
      first_path_ok = false;
      break;
    }
  }
  if (first_path_ok) {
    // The CSV records path 0 exactly as the ensemble ran it: same stream
    // seed, so the file can be reproduced from the config alone.
    IntegratorConfig pc = cfg.integrator;
    pc.seed = rng::path_seed(cfg.integrator.seed, 0);
    const SamplePath p0 = integrate(dyn, z0, pc);
    write_file(cfg.outputs.paths, path_to_csv(p0), "outputs.paths");
    res.files.push_back(cfg.outputs.paths);
  }
  write_file(cfg.outputs.stats, text, "outputs.stats");
  res.files.push_back(cfg.outputs.stats);

  const double failed_fraction =
      static_cast<double>(stats.n_failed) / static_cast<double>(stats.n_paths);
  res.exit_code = failed_fraction > cfg.max_failed_fraction ? 2 : 0;
  res.summary = "simulate: " + std::to_string(stats.n_failed) + " of " +
                std::to_string(stats.n_paths) + " paths failed";
  if (!first_path_ok) {
    res.summary += "; first path blew up, paths file not written";
  }
  return res;
}

inline RunResult run_check(const RunConfig& cfg, const ModelInstance& inst,
                           const StochasticHamiltonianSystem& sys) {
  const PoissonStructure& P = sys.P;
  const std::vector<Vec> pts =
      sample_points(kCheckPointSeed, cfg.checks.n_points, P.m, 1.2);
  const double anti = check_antisymmetry(P, pts);
  const JacobiReport jac = check_jacobi(P, pts);
  const bool anti_ok = anti <= cfg.checks.antisymmetry_tol;
  const bool jac_ok = jac.max_residual < cfg.checks.jacobi_tol;

  std::string text;
  text += "model: " + cfg.model + "\n";
  text += "points: " + std::to_string(cfg.checks.n_points) + "\n";
  text += std::string("antisymmetry: ") + (anti_ok ? "PASS" : "FAIL") +
          "  max residual " + fmt_double(anti) + " (tol " +
          fmt_compact(cfg.checks.antisymmetry_tol) + ")\n";
  text += std::string("jacobi: ") + (jac_ok ? "PASS" : "FAIL") +
          "  max residual " + fmt_double(jac.max_residual) + " (tol " +
          fmt_compact(cfg.checks.jacobi_tol) + ")";
  if (jac.worst_I >= 0) {
    text += "  worst triple (" + coord_label(P, jac.worst_I) + ", " +
            coord_label(P, jac.worst_J) + ", " + coord_label(P, jac.worst_K) +
            ")";
  }
  text += "\n";

  bool compat_ok = true;
  const LieAlgebroid* A = nullptr;
  if (inst.expanded) {
    if (const auto* dual = std::get_if<AlgebroidDualInputs>(&*inst.expanded)) {
      A = &dual->algebroid;
    } else if (const auto* sum =
                   std::get_if<WhitneySumInputs>(&*inst.expanded)) {
      A = &sum->algebroid;
    }
  }
  if (A) {
    const std::vector<Vec> base =
        sample_points(kBasePointSeed, cfg.checks.n_points, A->n, 1.2);
    const CompatibilityReport rep = check_compatibility(*A, base);
    compat_ok = rep.pass(cfg.checks.jacobi_tol);
    text += std::string("compatibility: ") + (compat_ok ? "PASS" : "FAIL") +
            "  anchor residual " + fmt_double(rep.max_anchor_residual) +
            "  structure residual " + fmt_double(rep.max_jacobi_residual) +
            " (tol " + fmt_compact(cfg.checks.jacobi_tol) + ")\n";
  } else {
    text += "compatibility: skipped (model carries no algebroid data)\n";
  }

  RunResult res;
  write_file(cfg.outputs.check, text, "outputs.check");
  res.files.push_back(cfg.outputs.check);
  res.summary = std::string("check: ") + (anti_ok && jac_ok && compat_ok
                                              ? "all checks passed"
                                              : "some checks FAILED");
  return res;
}

inline RunResult run_audit(const RunConfig& cfg, const ModelInstance& inst) {
  if (!inst.expanded) {
    throw field_error(
        "model.name: " + cfg.model +
        " has no expanded form to audit; audit applies to algebroid_dual, "
        "whitney_sum, adjoint_bundle, affine_refinement, gl_refinement");
  }
  const AuditReport rep = audit_expanded(*inst.expanded);
  std::string text = "model: " + cfg.model + "\n" + rep.to_text();
  if (!inst.note.empty()) text += "model note: " + inst.note + "\n";

  RunResult res;
  write_file(cfg.outputs.audit, text, "outputs.audit");
  res.files.push_back(cfg.outputs.audit);
  res.summary = "audit: " + std::to_string(rep.flagged_count()) + " of " +
                std::to_string(rep.records.size()) + " term groups flagged";
  return res;
}

}  // namespace detail

inline RunResult run(const RunConfig& cfg) {
  const ModelInstance inst = detail::build_instance(cfg);
  StochasticHamiltonianSystem sys = inst.system;
  detail::apply_overrides(cfg, sys);
  const detail::MonitorSet monitors = detail::resolve_monitors(cfg, inst);
  const Vec z0 =
      detail::resolve_initial(cfg, sys.P.m, cfg.mode == RunMode::simulate);
  switch (cfg.mode) {
    case RunMode::check:
      return detail::run_check(cfg, inst, sys);
    case RunMode::audit:
      return detail::run_audit(cfg, inst);
    case RunMode::simulate:
      break;
  }
  return detail::run_simulate(cfg, sys, monitors, z0);
}

}  // namespace liepoisson
