#include "liepoisson/config.hpp"

#include <gtest/gtest.h>

#include <string>
#include <vector>

namespace liepoisson {
namespace {

void expect_same_poly(const Polynomial& a, const Polynomial& b) {
  EXPECT_EQ(a.dim(), b.dim());
  ASSERT_EQ(a.terms().size(), b.terms().size());
  for (const auto& [e, c] : a.terms()) {
    auto it = b.terms().find(e);
    ASSERT_NE(it, b.terms().end());
    EXPECT_EQ(it->second, c);
  }
}

void expect_same_params(const ModelParams& a, const ModelParams& b) {
  EXPECT_EQ(a.ints, b.ints);
  EXPECT_EQ(a.reals, b.reals);
  EXPECT_EQ(a.strings, b.strings);
  EXPECT_EQ(a.vectors, b.vectors);
  ASSERT_EQ(a.tables.size(), b.tables.size());
  for (const auto& [k, t] : a.tables) {
    auto it = b.tables.find(k);
    ASSERT_NE(it, b.tables.end()) << k;
    EXPECT_EQ(t.shape, it->second.shape) << k;
    EXPECT_EQ(t.dim, it->second.dim) << k;
    ASSERT_EQ(t.entries.size(), it->second.entries.size()) << k;
    for (std::size_t i = 0; i < t.entries.size(); ++i) {
      EXPECT_EQ(t.entries[i].first, it->second.entries[i].first) << k;
      expect_same_poly(t.entries[i].second, it->second.entries[i].second);
    }
  }
}

PolyTable one_entry_table(std::vector<int> shape, int dim,
                          std::vector<int> index, const Polynomial& p) {
  PolyTable t;
  t.shape = std::move(shape);
  t.dim = dim;
  t.entries.push_back({std::move(index), p});
  return t;
}

void expect_parse_error(const std::string& text, const std::string& needle) {
  try {
    parse_run_config(text);
    FAIL() << "expected field_error mentioning " << needle;
  } catch (const field_error& e) {
    EXPECT_NE(std::string(e.what()).find(needle), std::string::npos)
        << e.what();
  }
}

TEST(ConfigParseTest, MinimalDocumentGetsDefaults) {
  const RunConfig cfg =
      parse_run_config("model:\n  name: so3_lie_poisson\n");
  EXPECT_EQ(cfg.mode, RunMode::simulate);
  EXPECT_EQ(cfg.model, "so3_lie_poisson");
  EXPECT_TRUE(cfg.hamiltonian_from_model);
  EXPECT_TRUE(cfg.noise_from_model);
  EXPECT_EQ(cfg.initial.size(), 0);
  EXPECT_EQ(cfg.integrator.scheme, Scheme::euler_maruyama);
  EXPECT_EQ(cfg.integrator.dt, 1e-3);
  EXPECT_EQ(cfg.integrator.steps, 1000);
  EXPECT_EQ(cfg.integrator.seed, 0u);
  EXPECT_EQ(cfg.n_paths, 1);
  EXPECT_EQ(cfg.max_failed_fraction, 0.0);
  EXPECT_TRUE(cfg.monitors.empty());
  EXPECT_EQ(cfg.checks.antisymmetry_tol, 1e-12);
  EXPECT_EQ(cfg.checks.jacobi_tol, 1e-7);
  EXPECT_EQ(cfg.checks.n_points, 100);
  EXPECT_EQ(cfg.outputs.paths, "paths.csv");
  EXPECT_EQ(cfg.outputs.stats, "stats.txt");
}

TEST(ConfigParseTest, HandWrittenDocumentWithCommentsParses) {
  const std::string text = R"(# rigid body with a slow fiber
mode: simulate
n_paths: 4            # small ensemble
integrator: {dt: 0.01, steps: 10, seed: 7, scheme: stratonovich_heun}
initial: [1.0, 0.05, 0.05]
model:
  name: so3_lie_poisson
  inertia: [1, 2, 3]
  algebra: so3
monitors:
  - model
  - name: first_coordinate
    terms:
      - {exponents: [1, 0, 0], coefficient: 1.0}
)";
  const RunConfig cfg = parse_run_config(text);
  EXPECT_EQ(cfg.integrator.scheme, Scheme::stratonovich_heun);
  EXPECT_EQ(cfg.integrator.dt, 0.01);
  EXPECT_EQ(cfg.integrator.seed, 7u);
  EXPECT_EQ(cfg.n_paths, 4);
  ASSERT_EQ(cfg.initial.size(), 3);
  EXPECT_EQ(cfg.initial[0], 1.0);
  ASSERT_EQ(cfg.monitors.size(), 2u);
  EXPECT_TRUE(cfg.monitors[0].from_model);
  EXPECT_FALSE(cfg.monitors[1].from_model);
  EXPECT_EQ(cfg.monitors[1].name, "first_coordinate");
  EXPECT_EQ(cfg.monitors[1].poly.dim(), 3);
  EXPECT_EQ(cfg.params.vectors.at("inertia"),
            (std::vector<double>{1.0, 2.0, 3.0}));
}

TEST(ConfigRoundTripTest, CanonicalFormIsAFixedPoint) {
  RunConfig cfg;
  cfg.mode = RunMode::check;
  cfg.model = "algebroid_dual";
  cfg.params.ints["n"] = 2;
  cfg.params.ints["r"] = 3;
  cfg.params.tables["anchor"] = one_entry_table(
      {2, 3}, 2, {0, 1}, Polynomial::variable(2, 1) * 0.5);
  cfg.hamiltonian_from_model = false;
  {
    Polynomial h(5);
    h.add_term({0, 0, 0, 2, 0}, 0.5);
    h.add_term({1, 0, 0, 0, 1}, -0.25);
    cfg.hamiltonian = h;
  }
  cfg.noise_from_model = false;
  {
    Polynomial g(5);
    g.add_term({0, 0, 1, 0, 0}, 0.1);
    cfg.noise.push_back(g);
    Polynomial g2(5);
    g2.add_term({0, 0, 0, 0, 1}, 1e-3);
    cfg.noise.push_back(g2);
  }
  cfg.initial = Vec(5);
  cfg.initial << 1.0, -0.5, 0.25, 1.0 / 3.0, 0.0;
  cfg.integrator.scheme = Scheme::stratonovich_heun;
  cfg.integrator.dt = 5e-4;
  cfg.integrator.steps = 2000;
  cfg.integrator.seed = 12297829382473034410ull;
  cfg.n_paths = 16;
  cfg.max_failed_fraction = 0.125;
  {
    MonitorSpec m0;
    m0.from_model = true;
    cfg.monitors.push_back(m0);
    MonitorSpec m1;
    m1.name = "fiber_norm";
    Polynomial p(5);
    p.add_term({0, 0, 0, 2, 0}, 1.0);
    p.add_term({0, 0, 0, 0, 2}, 1.0);
    m1.poly = p;
    cfg.monitors.push_back(m1);
  }
  cfg.checks.jacobi_tol = 1e-6;
  cfg.checks.n_points = 25;
  cfg.outputs.paths = "out/dual_paths.csv";

  const std::string text = serialize_run_config(cfg);
  const RunConfig back = parse_run_config(text);
  EXPECT_EQ(serialize_run_config(back), text);

  EXPECT_EQ(back.mode, RunMode::check);
  EXPECT_EQ(back.integrator.seed, cfg.integrator.seed);
  EXPECT_EQ(back.integrator.dt, cfg.integrator.dt);
  EXPECT_EQ(back.max_failed_fraction, 0.125);
  ASSERT_EQ(back.initial.size(), 5);
  EXPECT_EQ(back.initial[3], 1.0 / 3.0);
  EXPECT_FALSE(back.hamiltonian_from_model);
  expect_same_poly(back.hamiltonian, cfg.hamiltonian);
  ASSERT_EQ(back.noise.size(), 2u);
  expect_same_poly(back.noise[1], cfg.noise[1]);
  ASSERT_EQ(back.monitors.size(), 2u);
  EXPECT_TRUE(back.monitors[0].from_model);
  expect_same_poly(back.monitors[1].poly, cfg.monitors[1].poly);
  expect_same_params(back.params, cfg.params);
}

// Every registered model's parameters survive serialize -> parse with the
// factory producing the same structure.
TEST(ConfigRoundTripTest, EveryModelRoundTripsFactoryParameters) {
  std::vector<ModelParams> cases(6);

  cases[0].strings["algebra"] = "so21";
  cases[0].vectors["inertia"] = {2.0, 1.0, 0.5};
  cases[0].reals["noise_amplitude"] = 0.25;

  cases[1].ints["n"] = 2;
  cases[1].ints["r"] = 3;
  cases[1].tables["anchor"] =
      one_entry_table({2, 3}, 2, {0, 1}, Polynomial::variable(2, 1));
  cases[1].tables["structure"] =
      one_entry_table({3, 3, 3}, 2, {0, 1, 2}, Polynomial::constant(2, -1.0));
  cases[1].tables["structure"].entries.push_back(
      {{0, 2, 1}, Polynomial::constant(2, 1.0)});

  cases[2].ints["n"] = 2;
  cases[2].tables["kpxi"] =
      one_entry_table({2, 2}, 2, {0, 0}, Polynomial::constant(2, 1.0));
  cases[2].tables["noise_a"] =
      one_entry_table({1, 2}, 2, {0, 1}, Polynomial::constant(2, 0.2));

  cases[3].strings["algebra"] = "abelian";
  cases[3].ints["fiber_dim"] = 2;
  cases[3].strings["orientation"] = "as_printed";
  cases[3].tables["connection"] = one_entry_table(
      {2, 2}, 2, {1, 0}, Polynomial::variable(2, 0) * Polynomial::variable(2, 0));

  cases[4].ints["n"] = 2;
  cases[4].tables["gl_connection"] =
      one_entry_table({2, 2, 2}, 2, {0, 0, 0}, Polynomial::variable(2, 1));
  cases[4].tables["translation_connection"] =
      one_entry_table({2, 2}, 2, {0, 0}, Polynomial::variable(2, 0));

  cases[5].ints["n"] = 2;
  cases[5].strings["variant"] = "corrected";
  cases[5].tables["gl_x"] =
      one_entry_table({2, 2, 2}, 4, {0, 1, 0}, Polynomial::variable(4, 2));

  const auto& models = registry();
  ASSERT_EQ(models.size(), cases.size());
  for (std::size_t i = 0; i < models.size(); ++i) {
    RunConfig cfg;
    cfg.model = models[i].name;
    cfg.params = cases[i];

    const std::string text = serialize_run_config(cfg);
    const RunConfig back = parse_run_config(text);
    EXPECT_EQ(back.model, models[i].name);
    expect_same_params(back.params, cases[i]);
    EXPECT_EQ(serialize_run_config(back), text) << models[i].name;

    ModelInstance a = models[i].factory(cases[i]);
    ModelInstance b = models[i].factory(back.params);
    ASSERT_EQ(a.system.P.m, b.system.P.m) << models[i].name;
    Vec z(a.system.P.m);
    for (int j = 0; j < z.size(); ++j) z[j] = 0.3 + 0.01 * j;
    EXPECT_EQ((a.system.P.lambda(z) - b.system.P.lambda(z)).norm(), 0.0)
        << models[i].name;
    EXPECT_EQ(a.system.h.eval(z), b.system.h.eval(z)) << models[i].name;
  }
}

TEST(ConfigRoundTripTest, ZeroPolynomialOverrideSurvives) {
  RunConfig cfg;
  cfg.model = "so3_lie_poisson";
  cfg.hamiltonian_from_model = false;
  cfg.hamiltonian = Polynomial(3);

  const std::string text = serialize_run_config(cfg);
  const RunConfig back = parse_run_config(text);
  EXPECT_FALSE(back.hamiltonian_from_model);
  EXPECT_EQ(back.hamiltonian.dim(), 3);
  EXPECT_TRUE(back.hamiltonian.is_zero());
  EXPECT_EQ(serialize_run_config(back), text);
}

TEST(ConfigErrorTest, MessagesNameTheField) {
  expect_parse_error("model: [unclosed\n", "config");
  expect_parse_error("mode: explode\nmodel:\n  name: so3_lie_poisson\n",
                     "mode");
  expect_parse_error("model: {}\n", "model.name");
  expect_parse_error("model:\n  name: not_a_model\n", "model.name");
  expect_parse_error(
      "model:\n  name: so3_lie_poisson\n  bogus: 1\n", "model.bogus");
  expect_parse_error(
      "model:\n  name: so3_lie_poisson\n  inertia: 3\n", "model.inertia");
  expect_parse_error(
      "model:\n  name: so3_lie_poisson\nintegrator:\n  dt: 0\n",
      "integrator.dt");
  expect_parse_error(
      "model:\n  name: so3_lie_poisson\nintegrator:\n  steps: -5\n",
      "integrator.steps");
  expect_parse_error(
      "model:\n  name: so3_lie_poisson\nintegrator:\n  warp: 9\n",
      "integrator.warp");
  expect_parse_error("model:\n  name: so3_lie_poisson\nn_paths: 0\n",
                     "n_paths");
  expect_parse_error(
      "model:\n  name: so3_lie_poisson\nmax_failed_fraction: 1.5\n",
      "max_failed_fraction");
  expect_parse_error("model:\n  name: so3_lie_poisson\nturbo: true\n",
                     "turbo");
  expect_parse_error(
      "model:\n  name: so3_lie_poisson\nhamiltonian: preset\n",
      "hamiltonian");
  expect_parse_error(
      "model:\n  name: so3_lie_poisson\nchecks:\n  jacobi_tol: -1\n",
      "checks.jacobi_tol");
  expect_parse_error(
      "model:\n  name: so3_lie_poisson\nmonitors:\n  - name: x\n",
      "monitors[0]");
  expect_parse_error(
      "model:\n  name: so3_lie_poisson\nnoise:\n  - {}\n", "noise[0]");
  expect_parse_error(
      "model:\n  name: so3_lie_poisson\n"
      "hamiltonian:\n  terms:\n    - {exponents: [-1, 0, 0], "
      "coefficient: 1}\n",
      "exponents");
  expect_parse_error(
      "model:\n  name: algebroid_dual\n  anchor:\n    shape: [2, 2]\n",
      "anchor");
  expect_parse_error(
      "model:\n  name: algebroid_dual\n  anchor:\n    shape: [2, 2]\n"
      "    dim: 2\n    entries:\n      - index: [0, 0]\n        terms:\n"
      "          - {exponents: [1], coefficient: 1}\n",
      "anchor.entries[0].terms[0].exponents");
}

TEST(ConfigErrorTest, LoadReportsMissingFile) {
  try {
    load_run_config("/no/such/config.yaml");
    FAIL() << "expected field_error";
  } catch (const field_error& e) {
    EXPECT_NE(std::string(e.what()).find("cannot open"), std::string::npos);
  }
}

}  // namespace
}  // namespace liepoisson
