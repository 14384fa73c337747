#include "liepoisson/integrate.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "liepoisson/geometry.hpp"
#include "liepoisson/poisson.hpp"
#include "liepoisson/polynomial.hpp"
#include "liepoisson/rng.hpp"
#include "liepoisson/sde.hpp"

namespace lp = liepoisson;

namespace {

// Rotation-algebra coefficients: {x^1, x^2} = x^3 and cyclic.
lp::Tensor3 rotation_tensor() {
  lp::Tensor3 L(3, 3, 3);
  L(0, 1, 2) = 1.0;
  L(1, 0, 2) = -1.0;
  L(1, 2, 0) = 1.0;
  L(2, 1, 0) = -1.0;
  L(2, 0, 1) = 1.0;
  L(0, 2, 1) = -1.0;
  return L;
}

lp::ScalarField coord(int m, int i) {
  return lp::Polynomial::variable(m, i).field();
}

lp::ScalarField zero_hamiltonian(int m) {
  return lp::Polynomial::constant(m, 0.0).field();
}

// Squared radius, a conserved quantity of every rotation-algebra flow.
lp::ScalarField squared_radius() {
  lp::Polynomial c =
      lp::Polynomial::variable(3, 0) * lp::Polynomial::variable(3, 0) +
      lp::Polynomial::variable(3, 1) * lp::Polynomial::variable(3, 1) +
      lp::Polynomial::variable(3, 2) * lp::Polynomial::variable(3, 2);
  return c.field();
}

// Constant symplectic structure on (x, p).
lp::PoissonStructure canonical_2d() {
  lp::Mat J(2, 2);
  J << 0.0, 1.0, -1.0, 0.0;
  return lp::make_poisson_structure(
      2, "canonical", {"x", "p"}, [J](const lp::Vec&) { return J; },
      [](const lp::Vec&, int) { return lp::Mat::Zero(2, 2); });
}

lp::ScalarField oscillator_hamiltonian() {
  lp::Polynomial h =
      (lp::Polynomial::variable(2, 0) * lp::Polynomial::variable(2, 0) +
       lp::Polynomial::variable(2, 1) * lp::Polynomial::variable(2, 1)) *
      0.5;
  return h.field();
}

lp::CompiledDynamics oscillator_dynamics() {
  lp::StochasticHamiltonianSystem sys;
  sys.P = canonical_2d();
  sys.h = oscillator_hamiltonian();
  return lp::compile(sys);
}

lp::CompiledDynamics rotation_noise_dynamics() {
  lp::StochasticHamiltonianSystem sys;
  sys.P = lp::linear_lie_poisson(rotation_tensor());
  sys.h = zero_hamiltonian(3);
  sys.noise = {coord(3, 0)};
  return lp::compile(sys);
}

lp::Vec vec2(double a, double b) {
  lp::Vec z(2);
  z << a, b;
  return z;
}

lp::Vec vec3(double a, double b, double c) {
  lp::Vec z(3);
  z << a, b, c;
  return z;
}

TEST(EulerMaruyamaTest, TracksHarmonicOscillatorWithEulerGrowth) {
  lp::CompiledDynamics dyn = oscillator_dynamics();
  lp::IntegratorConfig cfg;
  cfg.scheme = lp::Scheme::euler_maruyama;
  cfg.dt = 1e-3;
  cfg.steps = 1000;
  const lp::Vec z0 = vec2(1.0, 0.0);

  lp::SamplePath path = lp::euler_maruyama(dyn, z0, cfg);

  ASSERT_EQ(path.times.size(), 1001);
  ASSERT_EQ(path.states.rows(), 1001);
  ASSERT_EQ(path.states.cols(), 2);
  ASSERT_EQ(path.increments.rows(), 1000);
  ASSERT_EQ(path.increments.cols(), 0);
  EXPECT_EQ(path.states(0, 0), 1.0);
  EXPECT_EQ(path.states(0, 1), 0.0);
  EXPECT_EQ(path.times[0], 0.0);
  EXPECT_DOUBLE_EQ(path.times[1], 1e-3);
  EXPECT_DOUBLE_EQ(path.times[1000], 1.0);

  // Flow is (cos t, -sin t); explicit Euler inflates the radius by
  // sqrt(1 + dt^2) per step, about 5e-4 over the whole run.
  EXPECT_NEAR(path.states(1000, 0), std::cos(1.0), 2e-3);
  EXPECT_NEAR(path.states(1000, 1), -std::sin(1.0), 2e-3);
  const double growth = path.states.row(1000).norm() - 1.0;
  EXPECT_GT(growth, 0.0);
  EXPECT_LT(growth, 2e-3);
}

TEST(EulerMaruyamaTest, ZeroDynamicsHoldsStateBitwise) {
  lp::StochasticHamiltonianSystem sys;
  sys.P = lp::linear_lie_poisson(rotation_tensor());
  sys.h = zero_hamiltonian(3);
  lp::CompiledDynamics dyn = lp::compile(sys);
  lp::IntegratorConfig cfg;
  cfg.dt = 0.1;
  cfg.steps = 100;
  const lp::Vec z0 = vec3(0.5, -1.25, 2.0);

  lp::SamplePath path = lp::euler_maruyama(dyn, z0, cfg);

  for (int k = 0; k <= cfg.steps; ++k) {
    for (int i = 0; i < 3; ++i) {
      ASSERT_EQ(path.states(k, i), z0[i]) << "row " << k;
    }
  }
}

TEST(EulerMaruyamaTest, SameSeedReproducesPathBitwise) {
  lp::CompiledDynamics dyn = rotation_noise_dynamics();
  lp::IntegratorConfig cfg;
  cfg.dt = 1e-3;
  cfg.steps = 50;
  cfg.seed = 7;
  const lp::Vec z0 = vec3(1.0, 0.2, -0.4);

  lp::SamplePath a = lp::euler_maruyama(dyn, z0, cfg);
  lp::SamplePath b = lp::euler_maruyama(dyn, z0, cfg);
  for (int k = 0; k <= cfg.steps; ++k) {
    for (int i = 0; i < 3; ++i) EXPECT_EQ(a.states(k, i), b.states(k, i));
  }
  for (int k = 0; k < cfg.steps; ++k) {
    EXPECT_EQ(a.increments(k, 0), b.increments(k, 0));
  }

  cfg.seed = 8;
  lp::SamplePath c = lp::euler_maruyama(dyn, z0, cfg);
  EXPECT_NE(a.states(cfg.steps, 1), c.states(cfg.steps, 1));
}

TEST(EulerMaruyamaTest, BlowupReportsFailingStep) {
  lp::CompiledDynamics dyn;
  dyn.m = 1;
  dyn.r = 0;
  auto cubic = [](const lp::Vec& z) {
    lp::Vec v(1);
    v[0] = z[0] * z[0] * z[0];
    return v;
  };
  dyn.ito_drift = cubic;
  dyn.stratonovich_drift = cubic;
  lp::IntegratorConfig cfg;
  cfg.dt = 1.0;
  cfg.steps = 10;
  lp::Vec z0(1);
  z0 << 10.0;

  // The step at which z <- z + z^3 overflows, replayed directly.
  double z = 10.0;
  int expect_step = -1;
  for (int k = 0; k < cfg.steps; ++k) {
    z = z + z * z * z;
    if (!std::isfinite(z)) {
      expect_step = k;
      break;
    }
  }
  ASSERT_GE(expect_step, 0);

  try {
    lp::euler_maruyama(dyn, z0, cfg);
    FAIL() << "expected a blow-up";
  } catch (const lp::blowup_error& e) {
    EXPECT_EQ(e.step, expect_step);
    EXPECT_NE(std::string(e.what()).find("step"), std::string::npos);
  }
}

TEST(StratonovichHeunTest, MatchesEulerForConstantDiffusionBitwise) {
  lp::StochasticHamiltonianSystem sys;
  sys.P = canonical_2d();
  sys.h = zero_hamiltonian(2);
  sys.noise = {coord(2, 0)};
  lp::CompiledDynamics dyn = lp::compile(sys);

  lp::IntegratorConfig em;
  em.scheme = lp::Scheme::euler_maruyama;
  em.dt = 1e-2;
  em.steps = 200;
  em.seed = 21;
  lp::IntegratorConfig heun = em;
  heun.scheme = lp::Scheme::stratonovich_heun;
  const lp::Vec z0 = vec2(1.0, 0.0);

  // Constant diffusion and zero drift make the predictor exact and the
  // corrector average a no-op, so the two schemes agree to the bit.
  lp::SamplePath a = lp::euler_maruyama(dyn, z0, em);
  lp::SamplePath b = lp::stratonovich_heun(dyn, z0, heun);
  for (int k = 0; k <= em.steps; ++k) {
    for (int i = 0; i < 2; ++i) EXPECT_EQ(a.states(k, i), b.states(k, i));
  }
}

TEST(StratonovichHeunTest, PreservesRotationNorm) {
  lp::CompiledDynamics dyn = rotation_noise_dynamics();
  lp::IntegratorConfig cfg;
  cfg.scheme = lp::Scheme::stratonovich_heun;
  cfg.dt = 1e-3;
  cfg.steps = 10000;
  cfg.seed = 3;
  const lp::Vec z0 = vec3(1.0, 0.005, 0.005);

  lp::SamplePath path = lp::stratonovich_heun(dyn, z0, cfg);

  const double r0 = z0.norm();
  double worst = 0.0;
  for (int k = 0; k <= cfg.steps; ++k) {
    worst = std::max(worst, std::abs(path.states.row(k).norm() - r0));
  }
  EXPECT_LT(worst, 1e-6);
  // The flow must actually move the transverse components.
  EXPECT_NE(path.states(cfg.steps, 1), z0[1]);
}

TEST(StratonovichHeunTest, DeterministicLimitMatchesOdeHeun) {
  lp::CompiledDynamics dyn = oscillator_dynamics();
  lp::IntegratorConfig cfg;
  cfg.scheme = lp::Scheme::stratonovich_heun;
  cfg.dt = 1e-3;
  cfg.steps = 1000;
  const lp::Vec z0 = vec2(1.0, 0.0);

  lp::SamplePath path = lp::stratonovich_heun(dyn, z0, cfg);

  auto f = [](const lp::Vec& z) { return vec2(z[1], -z[0]); };
  lp::Vec z = z0;
  for (int k = 0; k < cfg.steps; ++k) {
    const lp::Vec a0 = f(z);
    const lp::Vec zb = z + cfg.dt * a0;
    z = z + 0.5 * cfg.dt * (a0 + f(zb));
  }
  EXPECT_NEAR(path.states(cfg.steps, 0), z[0], 1e-14);
  EXPECT_NEAR(path.states(cfg.steps, 1), z[1], 1e-14);
}

TEST(IntegratorConfigTest, RejectsSchemeMismatch) {
  lp::CompiledDynamics dyn = oscillator_dynamics();
  const lp::Vec z0 = vec2(1.0, 0.0);
  lp::IntegratorConfig cfg;
  cfg.scheme = lp::Scheme::stratonovich_heun;
  EXPECT_THROW(lp::euler_maruyama(dyn, z0, cfg), lp::field_error);
  cfg.scheme = lp::Scheme::euler_maruyama;
  EXPECT_THROW(lp::stratonovich_heun(dyn, z0, cfg), lp::field_error);
}

TEST(IntegratorConfigTest, RejectsBadGridAndState) {
  lp::CompiledDynamics dyn = oscillator_dynamics();
  const lp::Vec z0 = vec2(1.0, 0.0);
  lp::IntegratorConfig cfg;

  cfg.dt = 0.0;
  EXPECT_THROW(lp::euler_maruyama(dyn, z0, cfg), lp::field_error);
  cfg.dt = -1e-3;
  EXPECT_THROW(lp::euler_maruyama(dyn, z0, cfg), lp::field_error);
  cfg.dt = 1e-3;
  cfg.steps = 0;
  EXPECT_THROW(lp::euler_maruyama(dyn, z0, cfg), lp::field_error);
  cfg.steps = -5;
  EXPECT_THROW(lp::euler_maruyama(dyn, z0, cfg), lp::field_error);

  cfg.steps = 10;
  lp::Vec bad(3);
  bad << 1.0, 0.0, 0.0;
  EXPECT_THROW(lp::euler_maruyama(dyn, bad, cfg), lp::field_error);
  EXPECT_THROW(lp::run_ensemble(dyn, z0, cfg, 0), lp::field_error);
  EXPECT_THROW(
      lp::run_ensemble(dyn, z0, cfg, 4, {squared_radius()}), lp::field_error);
}

TEST(EnsembleTest, ZeroDynamicsYieldsExactMomentsAndZeroError) {
  lp::StochasticHamiltonianSystem sys;
  sys.P = canonical_2d();
  sys.h = zero_hamiltonian(2);
  lp::CompiledDynamics dyn = lp::compile(sys);
  lp::IntegratorConfig cfg;
  cfg.dt = 0.25;
  cfg.steps = 4;
  const lp::Vec z0 = vec2(0.5, -1.25);

  lp::EnsembleStats stats = lp::run_ensemble(dyn, z0, cfg, 8);

  EXPECT_EQ(stats.n_paths, 8);
  EXPECT_EQ(stats.n_failed, 0);
  ASSERT_EQ(stats.times.size(), 3);
  EXPECT_DOUBLE_EQ(stats.times[0], 0.0);
  EXPECT_DOUBLE_EQ(stats.times[1], 0.5);
  EXPECT_DOUBLE_EQ(stats.times[2], 1.0);
  // Binary-exact initial data and identical constant paths make every
  // reduction exact, so equality is to the bit, not a tolerance.
  for (int t = 0; t < 3; ++t) {
    EXPECT_EQ(stats.means[t][0], 0.5);
    EXPECT_EQ(stats.means[t][1], -1.25);
    EXPECT_EQ(stats.second_moments[t][0], 0.25);
    EXPECT_EQ(stats.second_moments[t][1], 1.5625);
    EXPECT_EQ(stats.std_errors[t][0], 0.0);
    EXPECT_EQ(stats.std_errors[t][1], 0.0);
  }
}

TEST(EnsembleTest, SinglePathEnsembleMatchesReplayedSeed) {
  lp::CompiledDynamics dyn = rotation_noise_dynamics();
  lp::IntegratorConfig cfg;
  cfg.dt = 1e-3;
  cfg.steps = 100;
  cfg.seed = 11;
  const lp::Vec z0 = vec3(1.0, 0.05, 0.05);

  lp::EnsembleStats stats = lp::run_ensemble(dyn, z0, cfg, 1);

  lp::IntegratorConfig pc = cfg;
  pc.seed = lp::rng::path_seed(cfg.seed, 0);
  lp::SamplePath path = lp::integrate(dyn, z0, pc);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(stats.means[2][i], path.states(cfg.steps, i));
    EXPECT_EQ(stats.std_errors[2][i], 0.0);
  }
}

TEST(EnsembleTest, RepeatedRunsAreIdentical) {
  lp::CompiledDynamics dyn = rotation_noise_dynamics();
  lp::IntegratorConfig cfg;
  cfg.dt = 1e-3;
  cfg.steps = 200;
  cfg.seed = 5;
  const lp::Vec z0 = vec3(1.0, 0.05, 0.05);
  const std::vector<lp::ScalarField> monitors = {squared_radius()};

  lp::EnsembleStats a = lp::run_ensemble(dyn, z0, cfg, 6, monitors);
  lp::EnsembleStats b = lp::run_ensemble(dyn, z0, cfg, 6, monitors);

  EXPECT_EQ(a.n_failed, b.n_failed);
  ASSERT_EQ(a.times.size(), b.times.size());
  for (int t = 0; t < a.times.size(); ++t) {
    for (int i = 0; i < 3; ++i) {
      EXPECT_EQ(a.means[t][i], b.means[t][i]);
      EXPECT_EQ(a.second_moments[t][i], b.second_moments[t][i]);
      EXPECT_EQ(a.std_errors[t][i], b.std_errors[t][i]);
    }
  }
  ASSERT_EQ(a.monitor_drifts.size(), b.monitor_drifts.size());
  EXPECT_EQ(a.monitor_drifts[0], b.monitor_drifts[0]);
}

TEST(EnsembleTest, BlowupsAreRecordedNotFatal) {
  // Pure random walk that poisons the drift once |z| leaves [-4, 4]; some
  // paths cross, some do not, and the ensemble must absorb the failures.
  lp::CompiledDynamics dyn;
  dyn.m = 1;
  dyn.r = 1;
  auto drift = [](const lp::Vec& z) {
    lp::Vec v(1);
    v[0] = std::abs(z[0]) > 4.0 ? std::numeric_limits<double>::infinity()
                                : 0.0;
    return v;
  };
  dyn.ito_drift = drift;
  dyn.stratonovich_drift = drift;
  dyn.diffusion = [](const lp::Vec&) {
    lp::Mat s(1, 1);
    s(0, 0) = 1.0;
    return s;
  };
  lp::IntegratorConfig cfg;
  cfg.dt = 0.2;
  cfg.steps = 50;
  cfg.seed = 17;
  lp::Vec z0(1);
  z0 << 1.0;

  lp::EnsembleStats stats = lp::run_ensemble(dyn, z0, cfg, 40);

  EXPECT_GT(stats.n_failed, 0);
  EXPECT_LT(stats.n_failed, 40);
  ASSERT_EQ(static_cast<int>(stats.failed_paths.size()), stats.n_failed);
  ASSERT_EQ(static_cast<int>(stats.failed_steps.size()), stats.n_failed);
  for (int step : stats.failed_steps) {
    EXPECT_GE(step, 0);
    EXPECT_LT(step, cfg.steps);
  }
  for (int t = 0; t < stats.times.size(); ++t) {
    EXPECT_TRUE(std::isfinite(stats.means[t][0]));
    EXPECT_TRUE(std::isfinite(stats.std_errors[t][0]));
  }
}

TEST(CasimirMonitorTest, ScreensCandidates) {
  lp::PoissonStructure P = lp::linear_lie_poisson(rotation_tensor());

  lp::CasimirMonitor good = lp::casimir_monitor(P, squared_radius());
  EXPECT_TRUE(good.is_casimir);
  EXPECT_LT(good.max_probe_bracket, 1e-8);
  EXPECT_TRUE(good.warning.empty());

  lp::CasimirMonitor bad = lp::casimir_monitor(P, coord(3, 0));
  EXPECT_FALSE(bad.is_casimir);
  EXPECT_GT(bad.max_probe_bracket, 0.01);
  EXPECT_NE(bad.warning.find("not a Casimir"), std::string::npos);

  EXPECT_THROW(lp::casimir_monitor(P, coord(2, 0)), lp::field_error);
}

TEST(CasimirMonitorTest, HeunEnsembleKeepsRadiusDriftSmall) {
  lp::CompiledDynamics dyn = rotation_noise_dynamics();
  lp::IntegratorConfig cfg;
  cfg.scheme = lp::Scheme::stratonovich_heun;
  cfg.dt = 1e-3;
  cfg.steps = 1000;
  cfg.seed = 29;
  const lp::Vec z0 = vec3(1.0, 0.05, 0.05);

  lp::PoissonStructure P = lp::linear_lie_poisson(rotation_tensor());
  lp::CasimirMonitor monitor = lp::casimir_monitor(P, squared_radius());
  ASSERT_TRUE(monitor.is_casimir);

  lp::EnsembleStats stats =
      lp::run_ensemble(dyn, z0, cfg, 5, {monitor.field});

  ASSERT_EQ(stats.monitor_drifts.size(), 1u);
  EXPECT_GT(stats.monitor_drifts[0], 0.0);
  EXPECT_LT(stats.monitor_drifts[0], 1e-5);
}

TEST(ConvergenceTest, StrongErrorHalvesWithStepForAdditiveNoise) {
  // Linear decay with additive noise: dz = -z dt + 0.5 dB. The recorded
  // fine increments are the shared Brownian path; coarse grids consume
  // their block sums, so strong errors at dt and dt/2 are comparable.
  lp::CompiledDynamics dyn;
  dyn.m = 1;
  dyn.r = 1;
  auto decay = [](const lp::Vec& z) {
    lp::Vec v(1);
    v[0] = -z[0];
    return v;
  };
  dyn.ito_drift = decay;
  dyn.stratonovich_drift = decay;
  dyn.diffusion = [](const lp::Vec&) {
    lp::Mat s(1, 1);
    s(0, 0) = 0.5;
    return s;
  };

  const double dt = 0.05;
  const int coarse_steps = 16;  // T = 0.8
  const int refine = 128;
  const double h = dt / refine;
  lp::Vec z0(1);
  z0 << 1.0;

  lp::IntegratorConfig fine_cfg;
  fine_cfg.dt = h;
  fine_cfg.steps = coarse_steps * refine;

  const int n_paths = 1000;
  double err_dt = 0.0;
  double err_half = 0.0;
  for (int p = 0; p < n_paths; ++p) {
    fine_cfg.seed = lp::rng::path_seed(123, p);
    lp::SamplePath fine = lp::euler_maruyama(dyn, z0, fine_cfg);
    const double ref = fine.states(fine_cfg.steps, 0);

    if (p == 0) {
      // The recorded increments must replay the fine path exactly.
      double zr = z0[0];
      for (int k = 0; k < fine_cfg.steps; ++k) {
        zr = zr + h * (-zr) + 0.5 * fine.increments(k, 0);
      }
      ASSERT_EQ(zr, ref);
    }

    double zc = z0[0];
    for (int k = 0; k < coarse_steps; ++k) {
      double db = 0.0;
      for (int j = 0; j < refine; ++j) db += fine.increments(k * refine + j, 0);
      zc = zc + dt * (-zc) + 0.5 * db;
    }
    err_dt += std::abs(zc - ref);

    double zh = z0[0];
    for (int k = 0; k < 2 * coarse_steps; ++k) {
      double db = 0.0;
      for (int j = 0; j < refine / 2; ++j) {
        db += fine.increments(k * (refine / 2) + j, 0);
      }
      zh = zh + 0.5 * dt * (-zh) + 0.5 * db;
    }
    err_half += std::abs(zh - ref);
  }

  const double ratio = err_dt / err_half;
  EXPECT_GT(ratio, 1.4);
  EXPECT_LT(ratio, 2.6);
}

TEST(ConvergenceTest, SchemesAgreeOnWeakMeans) {
  lp::CompiledDynamics dyn = rotation_noise_dynamics();
  const lp::Vec z0 = vec3(1.0, 0.05, 0.05);
  const int n_paths = 2000;

  lp::IntegratorConfig em;
  em.scheme = lp::Scheme::euler_maruyama;
  em.dt = 1e-3;
  em.steps = 1000;
  em.seed = 101;
  lp::IntegratorConfig heun = em;
  heun.scheme = lp::Scheme::stratonovich_heun;
  heun.seed = 202;

  lp::EnsembleStats a = lp::run_ensemble(dyn, z0, em, n_paths);
  lp::EnsembleStats b = lp::run_ensemble(dyn, z0, heun, n_paths);

  // The Ito drift carries the correction that makes both schemes target
  // the same law, so the final means differ only by sampling noise.
  const int last = static_cast<int>(a.times.size()) - 1;
  for (int i = 0; i < 3; ++i) {
    const double se = std::sqrt(a.std_errors[last][i] * a.std_errors[last][i] +
                                b.std_errors[last][i] * b.std_errors[last][i]);
    EXPECT_NEAR(a.means[last][i], b.means[last][i], 3.0 * se + 1e-12)
        << "component " << i;
  }
}

TEST(SerializationTest, WritesCsvHeaderAndRows) {
  lp::CompiledDynamics dyn = oscillator_dynamics();
  lp::IntegratorConfig cfg;
  cfg.dt = 0.5;
  cfg.steps = 2;
  const lp::Vec z0 = vec2(1.0, 0.0);

  lp::SamplePath path = lp::euler_maruyama(dyn, z0, cfg);
  const std::string csv = lp::path_to_csv(path);

  EXPECT_EQ(csv.rfind("t, z1, z2\n", 0), 0u);
  EXPECT_NE(csv.find("\n0, 1, 0\n"), std::string::npos);
  int lines = 0;
  for (char ch : csv) lines += ch == '\n' ? 1 : 0;
  EXPECT_EQ(lines, 4);
}

TEST(SerializationTest, SummarizesEnsembleAsText) {
  lp::StochasticHamiltonianSystem sys;
  sys.P = lp::linear_lie_poisson(rotation_tensor());
  sys.h = zero_hamiltonian(3);
  lp::CompiledDynamics dyn = lp::compile(sys);
  lp::IntegratorConfig cfg;
  cfg.dt = 0.1;
  cfg.steps = 10;
  const lp::Vec z0 = vec3(1.0, 0.0, 0.0);

  lp::EnsembleStats stats =
      lp::run_ensemble(dyn, z0, cfg, 2, {squared_radius()});
  const std::string text = lp::ensemble_to_text(stats);

  EXPECT_NE(text.find("n_paths: 2"), std::string::npos);
  EXPECT_NE(text.find("failed: 0"), std::string::npos);
  EXPECT_NE(text.find("time 0"), std::string::npos);
  EXPECT_NE(text.find("mean:"), std::string::npos);
  EXPECT_NE(text.find("second_moment:"), std::string::npos);
  EXPECT_NE(text.find("std_error:"), std::string::npos);
  EXPECT_NE(text.find("monitor[0] max relative drift: 0\n"),
            std::string::npos);
}

}  // namespace
