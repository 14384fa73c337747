#pragma once

// Fixed-step integration of compiled stochastic dynamics: Euler-Maruyama
// for the Ito form, a Heun predictor-corrector for the Stratonovich form,
// seed-split ensembles with per-path blow-up accounting, Casimir drift
// monitors, and plain-text serialization of paths and ensemble summaries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "liepoisson/geometry.hpp"
#include "liepoisson/poisson.hpp"
#include "liepoisson/polynomial.hpp"
#include "liepoisson/rng.hpp"
#include "liepoisson/sde.hpp"

namespace liepoisson {

enum class Scheme { euler_maruyama, stratonovich_heun };

// dt and steps fix the grid; seed fixes the Brownian draws. Single-path
// integrators consume cfg.seed directly; run_ensemble gives path i the
// stream seed rng::path_seed(cfg.seed, i), so any ensemble member can be
// replayed on its own.
struct IntegratorConfig {
  Scheme scheme = Scheme::euler_maruyama;
  double dt = 1e-3;
  int steps = 1000;
  std::uint64_t seed = 0;
};

// Raised when a path stops being representable: either the stepped state
// has a non-finite entry or the dynamics could not be evaluated there.
// step is the index of the step that failed.
struct blowup_error : std::runtime_error {
  int step;
  explicit blowup_error(int s)
      : std::runtime_error("state became non-finite at step " +
                           std::to_string(s)),
        step(s) {}
};

// times has steps + 1 entries increasing by dt from 0. states row k is the
// state at times[k], row 0 the initial condition. increments row k is the
// Brownian increment driving the step from k to k + 1.
struct SamplePath {
  Vec times;
  Mat states;
  Mat increments;
};

namespace detail {

inline void validate_integrator_config(const IntegratorConfig& cfg) {
  if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt)) {
    throw field_error("integrator dt must be positive and finite");
  }
  if (cfg.steps <= 0) {
    throw field_error("integrator step count must be positive");
  }
  if (!std::isfinite(cfg.dt * static_cast<double>(cfg.steps))) {
    throw field_error("integration horizon dt * steps is not finite");
  }
}

inline void require_initial_state(const CompiledDynamics& dyn, const Vec& z0) {
  if (static_cast<int>(z0.size()) != dyn.m) {
    throw field_error("initial state has dim " + std::to_string(z0.size()) +
                      ", dynamics have dim " + std::to_string(dyn.m));
  }
  ensure_finite(z0, "initial state");
}

inline SamplePath allocate_path(const CompiledDynamics& dyn,
                                const IntegratorConfig& cfg, const Vec& z0) {
  SamplePath path;
  path.times = Vec::Zero(cfg.steps + 1);
  path.states = Mat::Zero(cfg.steps + 1, dyn.m);
  path.increments = Mat::Zero(cfg.steps, dyn.r);
  path.states.row(0) = z0.transpose();
  return path;
}

}  // namespace detail

// Ito scheme z' = z + a(z) dt + sigma(z) dB, dB ~ N(0, dt I_r), driven by
// the Ito drift. Inputs are validated before stepping, so an evaluation
// failure mid-path means the state left the domain where the dynamics are
// finite; it is reported as a blow-up at that step, like a non-finite
// stepped state.
inline SamplePath euler_maruyama(const CompiledDynamics& dyn, const Vec& z0,
                                 const IntegratorConfig& cfg) {
  if (cfg.scheme != Scheme::euler_maruyama) {
    throw field_error("euler_maruyama: config selects a different scheme");
  }
  detail::validate_integrator_config(cfg);
  detail::require_initial_state(dyn, z0);
  if (!dyn.ito_drift) throw field_error("dynamics carry no Ito drift");
  if (dyn.r > 0 && !dyn.diffusion) {
    throw field_error("dynamics carry noise but no diffusion");
  }
  SamplePath path = detail::allocate_path(dyn, cfg, z0);

  rng::NormalStream stream(cfg.seed);
  const double root_dt = std::sqrt(cfg.dt);
  Vec z = z0;
  Vec db(dyn.r);
  for (int k = 0; k < cfg.steps; ++k) {
    for (int j = 0; j < dyn.r; ++j) db[j] = root_dt * stream.next();
    Vec next;
    try {
      next = z + cfg.dt * dyn.ito_drift(z);
      if (dyn.r > 0) next += dyn.diffusion(z) * db;
    } catch (const field_error&) {
      throw blowup_error(k);
    }
    if (!next.allFinite()) throw blowup_error(k);
    z = next;
    path.states.row(k + 1) = z.transpose();
    path.increments.row(k) = db.transpose();
    path.times[k + 1] = (k + 1) * cfg.dt;
  }
  return path;
}

// Stratonovich predictor-corrector: predictor steps with drift and
// diffusion frozen at z, corrector averages them between z and the
// predicted state against the same dt and dB. Consumes the Stratonovich
// drift. Evaluation failures and non-finite states are reported as
// blow-ups at the offending step.
inline SamplePath stratonovich_heun(const CompiledDynamics& dyn,
                                    const Vec& z0,
                                    const IntegratorConfig& cfg) {
  if (cfg.scheme != Scheme::stratonovich_heun) {
    throw field_error("stratonovich_heun: config selects a different scheme");
  }
  detail::validate_integrator_config(cfg);
  detail::require_initial_state(dyn, z0);
  if (!dyn.stratonovich_drift) {
    throw field_error("dynamics carry no Stratonovich drift");
  }
  if (dyn.r > 0 && !dyn.diffusion) {
    throw field_error("dynamics carry noise but no diffusion");
  }
  SamplePath path = detail::allocate_path(dyn, cfg, z0);

  rng::NormalStream stream(cfg.seed);
  const double root_dt = std::sqrt(cfg.dt);
  Vec z = z0;
  Vec db(dyn.r);
  for (int k = 0; k < cfg.steps; ++k) {
    for (int j = 0; j < dyn.r; ++j) db[j] = root_dt * stream.next();
    Vec next;
    try {
      const Vec a0 = dyn.stratonovich_drift(z);
      Mat s0;
      Vec push = cfg.dt * a0;
      if (dyn.r > 0) {
        s0 = dyn.diffusion(z);
        push += s0 * db;
      }
      const Vec zb = z + push;
      if (!zb.allFinite()) throw blowup_error(k);
      next = z + 0.5 * cfg.dt * (a0 + dyn.stratonovich_drift(zb));
      if (dyn.r > 0) next += 0.5 * ((s0 + dyn.diffusion(zb)) * db);
    } catch (const field_error&) {
      throw blowup_error(k);
    }
    if (!next.allFinite()) throw blowup_error(k);
    z = next;
    path.states.row(k + 1) = z.transpose();
    path.increments.row(k) = db.transpose();
    path.times[k + 1] = (k + 1) * cfg.dt;
  }
  return path;
}

// Dispatch on cfg.scheme. Each scheme consumes the matching drift form, so
// the convention the dynamics were compiled under must agree with the
// scheme asked for.
inline SamplePath integrate(const CompiledDynamics& dyn, const Vec& z0,
                            const IntegratorConfig& cfg) {
  return cfg.scheme == Scheme::euler_maruyama
             ? euler_maruyama(dyn, z0, cfg)
             : stratonovich_heun(dyn, z0, cfg);
}

// Ensemble summary at the report times: initial, midpoint, and final grid
// point (deduplicated when steps < 2). Statistics run over surviving paths
// only; failed paths are listed alongside the step at which they blew up.
// monitor_drifts[q] is the max over surviving paths and grid points of
// |c_q(z_k) - c_q(z_0)| / (1 + |c_q(z_0)|).
struct EnsembleStats {
  int n_paths = 0;
  int n_failed = 0;
  std::vector<int> failed_paths;
  std::vector<int> failed_steps;
  Vec times;
  std::vector<Vec> means;
  std::vector<Vec> second_moments;
  std::vector<Vec> std_errors;
  std::vector<double> monitor_drifts;
};

// Runs paths in index order with seeds split from cfg.seed, so the result
// is independent of scheduling and any member path can be replayed alone.
// A blown-up path is recorded and skipped, never fatal.
inline EnsembleStats run_ensemble(const CompiledDynamics& dyn, const Vec& z0,
                                  const IntegratorConfig& cfg, int n_paths,
                                  const std::vector<ScalarField>& monitors = {}) {
  detail::validate_integrator_config(cfg);
  detail::require_initial_state(dyn, z0);
  if (n_paths <= 0) throw field_error("ensemble needs a positive path count");
  for (const ScalarField& c : monitors) {
    if (c.dim != dyn.m) {
      throw field_error("monitor has dim " + std::to_string(c.dim) +
                        ", dynamics have dim " + std::to_string(dyn.m));
    }
  }

  std::vector<int> report{0};
  if (cfg.steps / 2 > 0 && cfg.steps / 2 < cfg.steps) {
    report.push_back(cfg.steps / 2);
  }
  report.push_back(cfg.steps);
  const int n_report = static_cast<int>(report.size());

  EnsembleStats stats;
  stats.n_paths = n_paths;
  stats.times = Vec::Zero(n_report);
  for (int t = 0; t < n_report; ++t) stats.times[t] = report[t] * cfg.dt;
  stats.monitor_drifts.assign(monitors.size(), 0.0);

  std::vector<Vec> sum(n_report, Vec::Zero(dyn.m));
  std::vector<Vec> sumsq(n_report, Vec::Zero(dyn.m));
  std::vector<double> c0(monitors.size());
  for (std::size_t q = 0; q < monitors.size(); ++q) {
    c0[q] = evaluate(monitors[q], z0);
  }

  for (int i = 0; i < n_paths; ++i) {
    IntegratorConfig pc = cfg;
    pc.seed = rng::path_seed(cfg.seed, i);
    SamplePath path;
    try {
      path = integrate(dyn, z0, pc);
    } catch (const blowup_error& e) {
      stats.failed_paths.push_back(i);
      stats.failed_steps.push_back(e.step);
      continue;
    }
    for (int t = 0; t < n_report; ++t) {
      const Vec row = path.states.row(report[t]).transpose();
      sum[t] += row;
      sumsq[t] += row.cwiseProduct(row);
    }
    for (std::size_t q = 0; q < monitors.size(); ++q) {
      const double scale = 1.0 + std::abs(c0[q]);
      double worst = stats.monitor_drifts[q];
      for (int k = 0; k <= cfg.steps; ++k) {
        const Vec zk = path.states.row(k).transpose();
        worst = std::max(worst, std::abs(evaluate(monitors[q], zk) - c0[q]) / scale);
      }
      stats.monitor_drifts[q] = worst;
    }
  }

  stats.n_failed = static_cast<int>(stats.failed_paths.size());
  const int used = stats.n_paths - stats.n_failed;
  stats.means.assign(n_report, Vec::Zero(dyn.m));
  stats.second_moments.assign(n_report, Vec::Zero(dyn.m));
  stats.std_errors.assign(n_report, Vec::Zero(dyn.m));
  if (used > 0) {
    for (int t = 0; t < n_report; ++t) {
      stats.means[t] = sum[t] / used;
      stats.second_moments[t] = sumsq[t] / used;
      if (used > 1) {
        for (int j = 0; j < dyn.m; ++j) {
          const double mean = stats.means[t][j];
          const double var =
              std::max(0.0, (sumsq[t][j] - used * mean * mean) / (used - 1));
          stats.std_errors[t][j] = std::sqrt(var / used);
        }
      }
    }
  }
  return stats;
}

// A drift monitor built from a candidate Casimir. The candidate is
// screened by evaluating {c, probe} at seeded random linear probes and
// points; a residual above tolerance means the field will drift for
// dynamical reasons, not numerical ones, so the monitor carries a warning
// instead of silently attributing that drift to the integrator.
struct CasimirMonitor {
  ScalarField field;
  bool is_casimir = false;
  double max_probe_bracket = 0.0;
  std::string warning;
};

inline CasimirMonitor casimir_monitor(const PoissonStructure& P,
                                      const ScalarField& c) {
  if (c.dim != P.m) {
    throw field_error("casimir candidate has dim " + std::to_string(c.dim) +
                      ", structure has dim " + std::to_string(P.m));
  }
  CasimirMonitor monitor;
  monitor.field = c;
  constexpr std::uint64_t kProbeSeed = 0xCA51;
  const int m = P.m;
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    Polynomial probe(m);
    Vec z(m);
    for (int j = 0; j < m; ++j) {
      const double coeff =
          2.0 * rng::uniform_at(kProbeSeed, 2 * m * k + j) - 1.0;
      probe = probe + Polynomial::variable(m, j) * coeff;
      z[j] = 1.3 * (2.0 * rng::uniform_at(kProbeSeed, 2 * m * k + m + j) - 1.0);
    }
    worst = std::max(worst, std::abs(bracket(P, c, probe.field(), z)));
  }
  monitor.max_probe_bracket = worst;
  monitor.is_casimir = worst < 1e-8;
  if (!monitor.is_casimir) {
    monitor.warning =
        "not a Casimir: max probe bracket " + detail::fmt_double(worst);
  }
  return monitor;
}

// CSV with header "t, z1, ..., zm" and one row per grid point, written at
// full precision so a saved path reproduces the states bitwise.
inline std::string path_to_csv(const SamplePath& path) {
  const int m = static_cast<int>(path.states.cols());
  const int rows = static_cast<int>(path.times.size());
  std::string out = "t";
  for (int j = 0; j < m; ++j) out += ", z" + std::to_string(j + 1);
  out += "\n";
  for (int k = 0; k < rows; ++k) {
    out += detail::fmt_double(path.times[k]);
    for (int j = 0; j < m; ++j) {
      out += ", " + detail::fmt_double(path.states(k, j));
    }
    out += "\n";
  }
  return out;
}

// Structured text summary: path counts, then per report time the mean,
// second moment, and standard error by coordinate, then monitor drifts and
// any failed paths.
inline std::string ensemble_to_text(const EnsembleStats& stats) {
  std::string out;
  out += "n_paths: " + std::to_string(stats.n_paths) + "\n";
  out += "failed: " + std::to_string(stats.n_failed) + "\n";
  const int n_report = static_cast<int>(stats.times.size());
  for (int t = 0; t < n_report; ++t) {
    out += "time " + detail::fmt_double(stats.times[t]) + ":\n";
    out += "  mean:";
    for (int j = 0; j < stats.means[t].size(); ++j) {
      out += " " + detail::fmt_double(stats.means[t][j]);
    }
    out += "\n  second_moment:";
    for (int j = 0; j < stats.second_moments[t].size(); ++j) {
      out += " " + detail::fmt_double(stats.second_moments[t][j]);
    }
    out += "\n  std_error:";
    for (int j = 0; j < stats.std_errors[t].size(); ++j) {
      out += " " + detail::fmt_double(stats.std_errors[t][j]);
    }
    out += "\n";
  }
  for (std::size_t q = 0; q < stats.monitor_drifts.size(); ++q) {
    out += "monitor[" + std::to_string(q) + "] max relative drift: " +
           detail::fmt_double(stats.monitor_drifts[q]) + "\n";
  }
  for (std::size_t i = 0; i < stats.failed_paths.size(); ++i) {
    out += "path " + std::to_string(stats.failed_paths[i]) +
           " blew up at step " + std::to_string(stats.failed_steps[i]) + "\n";
  }
  return out;
}

}  // namespace liepoisson
