#include "liepoisson/sde.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "liepoisson/algebroid.hpp"
#include "liepoisson/connection.hpp"
#include "liepoisson/geometry.hpp"
#include "liepoisson/poisson.hpp"
#include "liepoisson/polynomial.hpp"
#include "liepoisson/rng.hpp"

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

lp::Vec sample_point(std::uint64_t seed, int k, int dim, double scale = 1.5) {
  lp::Vec z(dim);
  for (int i = 0; i < dim; ++i) {
    z[i] = scale * (2.0 * lp::rng::uniform_at(
                              seed, static_cast<std::uint64_t>(k) * dim + i) -
                    1.0);
  }
  return z;
}

lp::ScalarField coord(int m, int i) {
  return lp::Polynomial::variable(m, i).field();
}

lp::ScalarField zero_hamiltonian(int m) {
  return lp::Polynomial::constant(m, 0.0).field();
}

// Kinetic energy with inertia (1, 2, 3).
lp::ScalarField inertia_hamiltonian() {
  lp::Polynomial h =
      lp::Polynomial::variable(3, 0) * lp::Polynomial::variable(3, 0) * 0.5 +
      lp::Polynomial::variable(3, 1) * lp::Polynomial::variable(3, 1) * 0.25 +
      lp::Polynomial::variable(3, 2) * lp::Polynomial::variable(3, 2) *
          (1.0 / 6.0);
  return h.field();
}

lp::StochasticHamiltonianSystem rotation_system(
    std::vector<lp::ScalarField> noise) {
  lp::StochasticHamiltonianSystem sys;
  sys.P = lp::linear_lie_poisson(rotation_tensor());
  sys.h = inertia_hamiltonian();
  sys.noise = std::move(noise);
  return sys;
}

void expect_vec_near(const lp::Vec& got, const lp::Vec& want, double tol) {
  ASSERT_EQ(got.size(), want.size());
  for (int i = 0; i < got.size(); ++i) {
    EXPECT_NEAR(got[i], want[i], tol) << "component " << i;
  }
}

void expect_vec_rel(const lp::Vec& got, const lp::Vec& want, double rel) {
  ASSERT_EQ(got.size(), want.size());
  for (int i = 0; i < got.size(); ++i) {
    EXPECT_NEAR(got[i], want[i], rel * (1.0 + std::abs(want[i])))
        << "component " << i;
  }
}

// Independent correction oracle: (1/2) sum_s (d sigma_s) sigma_s with the
// diffusion Jacobian taken by finite differences of the compiled columns.
lp::Vec jacobian_contraction(const lp::CompiledDynamics& dyn, const lp::Vec& z) {
  lp::Vec acc = lp::Vec::Zero(dyn.m);
  for (int s = 0; s < dyn.r; ++s) {
    auto column = [&dyn, s](const lp::Vec& w) {
      return lp::Vec(dyn.diffusion(w).col(s));
    };
    const lp::Mat J = lp::fd_jacobian(dyn.m, column, z);
    acc += 0.5 * J * dyn.diffusion(z).col(s);
  }
  return acc;
}

TEST(Compile, ZeroNoiseIsDeterministic) {
  auto dyn = lp::compile(rotation_system({}));
  EXPECT_EQ(dyn.m, 3);
  EXPECT_EQ(dyn.r, 0);
  for (int k = 0; k < 5; ++k) {
    const lp::Vec z = sample_point(3, k, 3);
    EXPECT_EQ(dyn.diffusion(z).cols(), 0);
    expect_vec_near(dyn.ito_drift(z), dyn.stratonovich_drift(z), 0.0);
  }
}

TEST(Compile, RotationDiffusionColumnPinned) {
  lp::StochasticHamiltonianSystem sys;
  sys.P = lp::linear_lie_poisson(rotation_tensor());
  sys.h = zero_hamiltonian(3);
  sys.noise = {coord(3, 0)};
  auto dyn = lp::compile(sys);
  const lp::Vec z = (lp::Vec(3) << 1.0, 2.0, 3.0).finished();
  expect_vec_near(dyn.diffusion(z).col(0),
                  (lp::Vec(3) << 0.0, -3.0, 2.0).finished(), 1e-12);
  for (int k = 0; k < 5; ++k) {
    const lp::Vec w = sample_point(5, k, 3);
    expect_vec_near(dyn.diffusion(w).col(0),
                    (lp::Vec(3) << 0.0, -w[2], w[1]).finished(), 1e-12);
  }
  expect_vec_near(dyn.stratonovich_drift(z), lp::Vec::Zero(3), 1e-12);
}

TEST(Compile, CanonicalConstantDiffusionHasZeroCorrection) {
  lp::StochasticHamiltonianSystem sys;
  sys.P = lp::from_algebroid(lp::tangent_algebroid(1));
  sys.h = (lp::Polynomial::variable(2, 1) * lp::Polynomial::variable(2, 1) *
           0.5).field();
  sys.noise = {coord(2, 0)};
  auto dyn = lp::compile(sys);
  for (int k = 0; k < 5; ++k) {
    const lp::Vec z = sample_point(7, k, 2);
    expect_vec_near(dyn.diffusion(z).col(0),
                    (lp::Vec(2) << 0.0, -1.0).finished(), 1e-14);
    expect_vec_near(dyn.ito_drift(z), dyn.stratonovich_drift(z), 1e-14);
  }
}

TEST(Compile, ItoDriftSplitsIntoStratPlusCorrection) {
  auto sys = rotation_system(
      {(lp::Polynomial::variable(3, 0) * 0.1).field(),
       (lp::Polynomial::variable(3, 1) * lp::Polynomial::variable(3, 2))
           .field()});
  auto dyn = lp::compile(sys);
  for (int k = 0; k < 5; ++k) {
    const lp::Vec z = sample_point(11, k, 3);
    const lp::Vec split =
        dyn.stratonovich_drift(z) + lp::ito_correction(sys, z);
    expect_vec_near(dyn.ito_drift(z), split, 1e-13);
  }
}

TEST(Compile, RejectsDimensionMismatch) {
  lp::StochasticHamiltonianSystem sys;
  sys.P = lp::linear_lie_poisson(rotation_tensor());
  sys.h = zero_hamiltonian(2);
  EXPECT_THROW(lp::compile(sys), lp::field_error);
  sys.h = zero_hamiltonian(3);
  sys.noise = {coord(4, 0)};
  EXPECT_THROW(lp::compile(sys), lp::field_error);
}

TEST(ItoCorrection, RotationSingleNoisePinned) {
  auto sys = rotation_system({coord(3, 0)});
  const lp::Vec z = (lp::Vec(3) << 1.0, 2.0, 3.0).finished();
  expect_vec_near(lp::ito_correction(sys, z),
                  (lp::Vec(3) << 0.0, -1.0, -1.5).finished(), 1e-12);
}

TEST(ItoCorrection, UnhalvedConventionDoubles) {
  auto sys = rotation_system({coord(3, 0), coord(3, 2)});
  for (int k = 0; k < 4; ++k) {
    const lp::Vec z = sample_point(13, k, 3);
    expect_vec_near(lp::ito_correction(sys, z, lp::ItoConvention::unhalved),
                    2.0 * lp::ito_correction(sys, z), 1e-12);
  }
}

TEST(ItoCorrection, ConstantStructureLinearNoiseIsZero) {
  lp::StochasticHamiltonianSystem sys;
  sys.P = lp::from_algebroid(lp::tangent_algebroid(2));
  sys.h = zero_hamiltonian(4);
  sys.noise = {(lp::Polynomial::variable(4, 0) +
                lp::Polynomial::variable(4, 3) * 2.0).field()};
  const lp::Vec z = sample_point(17, 0, 4);
  expect_vec_near(lp::ito_correction(sys, z), lp::Vec::Zero(4), 1e-14);
}

TEST(ItoCorrection, VanishesWithoutNoise) {
  auto empty = rotation_system({});
  auto zero = rotation_system({zero_hamiltonian(3)});
  const lp::Vec z = (lp::Vec(3) << 1.0, 2.0, 3.0).finished();
  expect_vec_near(lp::ito_correction(empty, z), lp::Vec::Zero(3), 0.0);
  expect_vec_near(lp::ito_correction(zero, z), lp::Vec::Zero(3), 1e-14);
}

TEST(ItoCorrection, NumericFallbackMatchesAnalyticPath) {
  // Strip the analytic derivative and the noise gradients; the nested fd
  // path with the widened outer step must land on the same value.
  auto analytic = rotation_system({coord(3, 0)});
  lp::StochasticHamiltonianSystem numeric;
  numeric.P = lp::make_poisson_structure(3, "rotation_numeric",
                                         analytic.P.labels, analytic.P.lambda);
  numeric.h = analytic.h;
  lp::ScalarField f;
  f.dim = 3;
  f.eval = [](const lp::Vec& z) { return z[0]; };
  numeric.noise = {f};
  const lp::Vec z = (lp::Vec(3) << 1.0, 2.0, 3.0).finished();
  expect_vec_near(lp::ito_correction(numeric, z),
                  (lp::Vec(3) << 0.0, -1.0, -1.5).finished(), 1e-5);
}

TEST(ItoCorrection, MatchesJacobianContractionOracle) {
  auto sys = rotation_system(
      {coord(3, 0),
       (lp::Polynomial::variable(3, 1) * 0.5 +
        lp::Polynomial::variable(3, 2) * lp::Polynomial::variable(3, 0))
           .field()});
  auto dyn = lp::compile(sys);
  for (int k = 0; k < 5; ++k) {
    const lp::Vec z = sample_point(19, k, 3);
    const lp::Vec corr = dyn.ito_drift(z) - dyn.stratonovich_drift(z);
    expect_vec_rel(corr, jacobian_contraction(dyn, z), 1e-5);
  }
}

TEST(LinearFastPath, MatchesGenericCompileOnRotation) {
  lp::Mat alphas(1, 3);
  alphas << 1.0, 0.0, 0.0;
  auto fast = lp::linear_fast_path(rotation_tensor(), inertia_hamiltonian(),
                                   alphas);
  auto generic = lp::compile(rotation_system({coord(3, 0)}));
  const lp::Vec pin = (lp::Vec(3) << 1.0, 2.0, 3.0).finished();
  expect_vec_rel(fast.ito_drift(pin), generic.ito_drift(pin), 1e-8);
  for (int k = 0; k < 5; ++k) {
    const lp::Vec z = sample_point(23, k, 3);
    expect_vec_rel(fast.stratonovich_drift(z), generic.stratonovich_drift(z),
                   1e-8);
    expect_vec_rel(fast.diffusion(z).col(0), generic.diffusion(z).col(0),
                   1e-8);
    expect_vec_rel(fast.ito_drift(z), generic.ito_drift(z), 1e-8);
  }
}

TEST(LinearFastPath, CorrectionPinned) {
  lp::Mat alphas(1, 3);
  alphas << 1.0, 0.0, 0.0;
  auto fast = lp::linear_fast_path(rotation_tensor(), inertia_hamiltonian(),
                                   alphas);
  const lp::Vec z = (lp::Vec(3) << 1.0, 2.0, 3.0).finished();
  expect_vec_near(fast.ito_drift(z) - fast.stratonovich_drift(z),
                  (lp::Vec(3) << 0.0, -1.0, -1.5).finished(), 1e-12);
}

TEST(LinearFastPath, ZeroAlphasIsDeterministic) {
  auto fast = lp::linear_fast_path(rotation_tensor(), inertia_hamiltonian(),
                                   lp::Mat::Zero(1, 3));
  const lp::Vec z = sample_point(29, 0, 3);
  expect_vec_near(fast.diffusion(z).col(0), lp::Vec::Zero(3), 0.0);
  expect_vec_near(fast.ito_drift(z), fast.stratonovich_drift(z), 0.0);
}

TEST(LinearFastPath, ZeroHamiltonianHasZeroStratDrift) {
  lp::Mat alphas(2, 3);
  alphas << 0.3, -1.0, 0.0, 0.0, 0.5, 2.0;
  auto fast = lp::linear_fast_path(rotation_tensor(), zero_hamiltonian(3),
                                   alphas);
  for (int k = 0; k < 4; ++k) {
    const lp::Vec z = sample_point(31, k, 3);
    expect_vec_near(fast.stratonovich_drift(z), lp::Vec::Zero(3), 1e-14);
  }
}

TEST(LinearFastPath, MultiChannelMatchesGeneric) {
  lp::Mat alphas(2, 3);
  alphas << 1.0, 0.0, 0.0, 0.0, 1.0, -1.0;
  auto fast = lp::linear_fast_path(rotation_tensor(), inertia_hamiltonian(),
                                   alphas);
  auto generic = lp::compile(rotation_system(
      {coord(3, 0),
       (lp::Polynomial::variable(3, 1) - lp::Polynomial::variable(3, 2))
           .field()}));
  for (int k = 0; k < 5; ++k) {
    const lp::Vec z = sample_point(37, k, 3);
    expect_vec_rel(fast.diffusion(z).col(0), generic.diffusion(z).col(0),
                   1e-10);
    expect_vec_rel(fast.diffusion(z).col(1), generic.diffusion(z).col(1),
                   1e-10);
    expect_vec_rel(fast.ito_drift(z), generic.ito_drift(z), 1e-10);
  }
}

TEST(LinearFastPath, RejectsShapeMismatch) {
  EXPECT_THROW(lp::linear_fast_path(rotation_tensor(), inertia_hamiltonian(),
                                    lp::Mat::Zero(1, 2)),
               lp::field_error);
  EXPECT_THROW(lp::linear_fast_path(lp::Tensor3(3, 3, 2), inertia_hamiltonian(),
                                    lp::Mat::Zero(1, 3)),
               lp::field_error);
  EXPECT_THROW(lp::linear_fast_path(rotation_tensor(), zero_hamiltonian(2),
                                    lp::Mat::Zero(1, 3)),
               lp::field_error);
}

TEST(AlgebroidDual, TangentConstantSectionMatchesLiteralExpansion) {
  // On the flat tangent case the expanded equations collapse: base drift is
  // the fiber variable, fiber drift vanishes, the diffusion pushes the
  // section onto the base block, and the correction is zero.
  lp::AlgebroidDualInputs in;
  in.algebroid = lp::tangent_algebroid(2);
  in.h = ((lp::Polynomial::variable(4, 2) * lp::Polynomial::variable(4, 2) +
           lp::Polynomial::variable(4, 3) * lp::Polynomial::variable(4, 3)) *
          0.5).field();
  lp::Section a;
  a.components = {lp::Polynomial::constant(2, 0.7).field(),
                  lp::Polynomial::constant(2, -0.3).field()};
  in.noise = {a};
  auto dyn = lp::expanded_system(in);
  EXPECT_EQ(dyn.m, 4);
  for (int k = 0; k < 50; ++k) {
    const lp::Vec z = sample_point(41, k, 4);
    const lp::Vec drift =
        (lp::Vec(4) << z[2], z[3], 0.0, 0.0).finished();
    const lp::Vec column = (lp::Vec(4) << 0.7, -0.3, 0.0, 0.0).finished();
    expect_vec_rel(dyn.stratonovich_drift(z), drift, 1e-6);
    expect_vec_rel(dyn.diffusion(z).col(0), column, 1e-6);
    expect_vec_rel(dyn.ito_drift(z), drift, 1e-6);
  }
}

TEST(AlgebroidDual, PolynomialSectionBuildsFiberLinearNoise) {
  lp::AlgebroidDualInputs in;
  in.algebroid = lp::tangent_algebroid(2);
  in.h = zero_hamiltonian(4);
  lp::Section a;
  a.components = {(lp::Polynomial::variable(2, 0) *
                   lp::Polynomial::variable(2, 0)).field(),
                  (lp::Polynomial::constant(2, 1.0) +
                   lp::Polynomial::variable(2, 1)).field()};
  in.noise = {a};
  auto sys = lp::algebroid_dual_system(in);
  ASSERT_EQ(sys.noise.size(), 1u);
  const lp::Vec z = (lp::Vec(4) << 2.0, 3.0, 0.5, -1.0).finished();
  EXPECT_NEAR(sys.noise[0].eval(z), 4.0 * 0.5 + 4.0 * (-1.0), 1e-12);
}

TEST(AlgebroidDual, RejectsWrongSectionShape) {
  lp::AlgebroidDualInputs in;
  in.algebroid = lp::tangent_algebroid(2);
  in.h = zero_hamiltonian(4);
  lp::Section bad;
  bad.components = {lp::Polynomial::constant(2, 1.0).field()};
  in.noise = {bad};
  EXPECT_THROW(lp::algebroid_dual_system(in), lp::field_error);
}

TEST(WhitneySum, QuadraticHamiltonianAssembled) {
  lp::WhitneySumInputs in;
  in.algebroid = lp::tangent_algebroid(1);
  in.kpp = lp::PolyMat(1, 1, 1);
  in.kpp(0, 0) = lp::Polynomial::constant(1, 2.0);
  in.kpxi = lp::PolyMat(1, 1, 1);
  in.kpxi(0, 0) = lp::Polynomial::constant(1, 3.0);
  in.kxixi = lp::PolyMat(1, 1, 1);
  in.kxixi(0, 0) = lp::Polynomial::constant(1, 4.0);
  in.a = lp::PolyMat(1, 1, 1);
  in.a(0, 0) = lp::Polynomial::variable(1, 0);
  in.d = lp::PolyMat(1, 1, 1);
  in.d(0, 0) = lp::Polynomial::constant(1, 2.0);
  auto sys = lp::whitney_sum_system(in);
  const lp::Vec z = (lp::Vec(3) << 0.5, 2.0, 1.0).finished();
  EXPECT_NEAR(sys.h.eval(z), 12.0, 1e-12);
  ASSERT_EQ(sys.noise.size(), 1u);
  EXPECT_NEAR(sys.noise[0].eval(z), 0.5 * 1.0 + 2.0 * 2.0, 1e-12);
}

TEST(WhitneySum, AnchorCouplesBaseDrift) {
  lp::WhitneySumInputs in;
  in.algebroid = lp::tangent_algebroid(1);
  in.kpp = lp::PolyMat(1, 1, 1);
  in.kpp(0, 0) = lp::Polynomial::constant(1, 1.0);
  in.kpxi = lp::PolyMat(1, 1, 1);
  in.kxixi = lp::PolyMat(1, 1, 1);
  in.kxixi(0, 0) = lp::Polynomial::constant(1, 1.0);
  in.a = lp::PolyMat(0, 0, 1);
  in.d = lp::PolyMat(0, 0, 1);
  auto dyn = lp::expanded_system(in);
  const lp::Vec z = (lp::Vec(3) << 0.2, 0.7, -0.4).finished();
  expect_vec_near(dyn.stratonovich_drift(z),
                  (lp::Vec(3) << 0.3, 0.0, 0.0).finished(), 1e-12);
}

TEST(WhitneySum, RejectsAsymmetricTable) {
  lp::WhitneySumInputs in;
  in.algebroid = lp::tangent_algebroid(2);
  in.kpp = lp::PolyMat(2, 2, 2);
  in.kpp(0, 1) = lp::Polynomial::constant(2, 1.0);
  in.kpxi = lp::PolyMat(2, 2, 2);
  in.kxixi = lp::PolyMat(2, 2, 2);
  in.a = lp::PolyMat(0, 0, 2);
  in.d = lp::PolyMat(0, 0, 2);
  EXPECT_THROW(lp::whitney_sum_system(in), lp::field_error);
}

TEST(WhitneySum, RejectsMismatchedNoiseChannelCounts) {
  lp::WhitneySumInputs in;
  in.algebroid = lp::tangent_algebroid(1);
  in.kpp = lp::PolyMat(1, 1, 1);
  in.kpxi = lp::PolyMat(1, 1, 1);
  in.kxixi = lp::PolyMat(1, 1, 1);
  in.a = lp::PolyMat(1, 1, 1);
  in.d = lp::PolyMat(2, 1, 1);
  EXPECT_THROW(lp::whitney_sum_system(in), lp::field_error);
}

TEST(AdjointBundle, FlatAbelianConstantNoiseLeavesFiberAlone) {
  lp::AdjointBundleInputs in;
  in.conn = lp::zero_connection(lp::abelian_algebra(1), 1);
  in.h = zero_hamiltonian(3);
  lp::AdjointBundleNoise ch;
  ch.a = {lp::Polynomial::constant(1, 0.8)};
  ch.d = {lp::Polynomial::constant(1, 0.0)};
  in.noise = {ch};
  auto dyn = lp::expanded_system(in);
  for (int k = 0; k < 5; ++k) {
    const lp::Vec z = sample_point(43, k, 3);
    expect_vec_near(dyn.diffusion(z).col(0),
                    (lp::Vec(3) << 0.8, 0.0, 0.0).finished(), 1e-12);
  }
}

TEST(AdjointBundle, DiffusionMatchesStructureContraction) {
  lp::PolyMat A(3, 2, 2);
  A(0, 0) = lp::Polynomial::variable(2, 1);
  A(1, 1) = lp::Polynomial::variable(2, 0);
  A(2, 1) = lp::Polynomial::variable(2, 0) * lp::Polynomial::variable(2, 1);
  lp::AdjointBundleInputs in;
  in.conn = lp::polynomial_connection(lp::so3_algebra(), 2, A);
  in.h = zero_hamiltonian(7);
  lp::AdjointBundleNoise ch;
  ch.a = {lp::Polynomial::constant(2, 1.0), lp::Polynomial::variable(2, 0)};
  ch.d = {lp::Polynomial::constant(2, 0.5), lp::Polynomial::constant(2, 0.0),
          lp::Polynomial::variable(2, 1)};
  in.noise = {ch};
  auto sys = lp::adjoint_bundle_system(in);
  auto dyn = lp::compile(sys);
  for (int k = 0; k < 5; ++k) {
    const lp::Vec z = sample_point(47, k, 7);
    const lp::Vec expected =
        sys.P.lambda(z) * lp::fd_gradient(sys.noise[0], z);
    expect_vec_near(dyn.diffusion(z).col(0), expected, 1e-10);
  }
}

TEST(AdjointBundle, OrientationFlagFlipsFiberNoise) {
  lp::AdjointBundleInputs in;
  in.conn = lp::zero_connection(lp::so3_algebra(), 1);
  in.h = zero_hamiltonian(5);
  lp::AdjointBundleNoise ch;
  ch.a = {lp::Polynomial::constant(1, 0.0)};
  ch.d = {lp::Polynomial::constant(1, 1.0), lp::Polynomial::constant(1, 0.0),
          lp::Polynomial::constant(1, 0.0)};
  in.noise = {ch};
  auto consistent = lp::expanded_system(in);
  in.orientation = lp::AdjointOrientation::as_printed;
  auto printed = lp::expanded_system(in);
  const lp::Vec z = (lp::Vec(5) << 0.3, -0.2, 0.5, -1.0, 2.0).finished();
  const lp::Vec dc = consistent.diffusion(z).col(0);
  const lp::Vec dp = printed.diffusion(z).col(0);
  EXPECT_GT(dc.tail(3).norm(), 0.1);
  expect_vec_near(dc.tail(3), -dp.tail(3), 1e-12);
  expect_vec_near(dc.head(2), dp.head(2), 1e-12);
}

TEST(AffineRefinement, NoiseHamiltonianSlotsPinned) {
  const int n = 2;
  auto pkg = lp::affine_connection_package(n, lp::PolyTensor3(n, n, n, n),
                                           lp::PolyMat(n, n, n));
  lp::AffineRefinementInputs in;
  in.package = pkg;
  in.h = zero_hamiltonian(10);
  lp::AffineRefinementNoise ch;
  ch.a = {lp::Polynomial::constant(n, 2.0), lp::Polynomial::constant(n, 0.0)};
  ch.d = lp::PolyMat(n, n, n);
  ch.d(0, 1) = lp::Polynomial::constant(n, 1.0);
  ch.g = {lp::Polynomial::constant(n, 0.0),
          lp::Polynomial::constant(n, 3.0)};
  in.noise = {ch};
  auto sys = lp::affine_refinement_system(in);
  lp::Vec z = lp::Vec::Zero(10);
  z[2] = 5.0;                                         // p_1
  z[4 + lp::refinement_mu_slot(n, 0, 1)] = 7.0;       // mu_0^1
  z[8 + 1] = 11.0;                                    // mu_1 (translation)
  EXPECT_NEAR(sys.noise[0].eval(z), 2.0 * 5.0 + 7.0 + 3.0 * 11.0, 1e-12);
}

TEST(AffineRefinement, ZeroTablesTranslationNoiseRotatesMatrixBlock) {
  const int n = 2;
  auto pkg = lp::affine_connection_package(n, lp::PolyTensor3(n, n, n, n),
                                           lp::PolyMat(n, n, n));
  lp::AffineRefinementInputs in;
  in.package = pkg;
  in.h = zero_hamiltonian(10);
  lp::AffineRefinementNoise ch;
  ch.a = {lp::Polynomial::constant(n, 0.0), lp::Polynomial::constant(n, 0.0)};
  ch.d = lp::PolyMat(n, n, n);
  ch.g = {lp::Polynomial::constant(n, 1.0),
          lp::Polynomial::constant(n, 0.0)};
  in.noise = {ch};
  auto dyn = lp::expanded_system(in);
  const lp::Vec z = sample_point(53, 0, 10);
  const lp::Vec D = dyn.diffusion(z).col(0);
  // {mu_k^l, mu_0} = delta^l_k mu_0; base, momentum, and translation rows
  // stay put with zero connection tables.
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(D[i], 0.0, 1e-12);
  for (int k = 0; k < n; ++k) {
    for (int l = 0; l < n; ++l) {
      const double want = (k == l) ? z[8] : 0.0;
      EXPECT_NEAR(D[4 + lp::refinement_mu_slot(n, k, l)], want, 1e-12)
          << "mu_" << k << "^" << l;
    }
  }
  EXPECT_NEAR(D[8], 0.0, 1e-12);
  EXPECT_NEAR(D[9], 0.0, 1e-12);
}

TEST(GlRefinement, ZeroTablesGivePureMatrixNoiseRotation) {
  const int n = 2;
  lp::GlRefinementInputs in;
  in.data = lp::zero_gl_refinement_data(n);
  in.h = zero_hamiltonian(12);
  lp::GlRefinementNoise ch;
  ch.a = {lp::Polynomial::constant(2 * n, 0.0),
          lp::Polynomial::constant(2 * n, 0.0)};
  ch.d = {lp::Polynomial::constant(2 * n, 0.0),
          lp::Polynomial::constant(2 * n, 0.0)};
  ch.g = lp::PolyMat(n, n, 2 * n);
  ch.g(0, 0) = lp::Polynomial::constant(2 * n, 1.0);
  in.noise = {ch};
  auto dyn = lp::expanded_system(in);
  EXPECT_EQ(dyn.m, 12);
  const lp::Vec z = sample_point(59, 0, 12);
  const lp::Vec D = dyn.diffusion(z).col(0);
  auto mu = [&](int j, int k) {
    return z[8 + lp::refinement_mu_slot(n, j, k)];
  };
  for (int i = 0; i < 8; ++i) EXPECT_NEAR(D[i], 0.0, 1e-12);
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) {
      // {mu_j^k, mu_0^0} = delta^k_0 mu_j^0 - delta^0_j mu_0^k.
      const double want =
          (k == 0 ? mu(j, 0) : 0.0) - (j == 0 ? mu(0, k) : 0.0);
      EXPECT_NEAR(D[8 + lp::refinement_mu_slot(n, j, k)], want, 1e-12)
          << "mu_" << j << "^" << k;
    }
  }
}

TEST(GlRefinement, CorrectedPairingRewiresVerticalNoise) {
  const int n = 2;
  lp::GlRefinementInputs in;
  in.data = lp::zero_gl_refinement_data(n);
  in.h = zero_hamiltonian(12);
  lp::GlRefinementNoise ch;
  ch.a = {lp::Polynomial::constant(2 * n, 0.0),
          lp::Polynomial::constant(2 * n, 0.0)};
  ch.d = {lp::Polynomial::constant(2 * n, 1.0),
          lp::Polynomial::constant(2 * n, 0.0)};
  ch.g = lp::PolyMat(n, n, 2 * n);
  in.noise = {ch};
  auto printed = lp::expanded_system(in);
  in.corrected = true;
  auto corrected = lp::expanded_system(in);
  const lp::Vec z = sample_point(61, 0, 12);
  const lp::Vec Dp = printed.diffusion(z).col(0);
  const lp::Vec Dc = corrected.diffusion(z).col(0);
  EXPECT_NEAR(Dp[0], 1.0, 1e-12);
  EXPECT_NEAR(Dp[2], 0.0, 1e-12);
  EXPECT_NEAR(Dc[0], 0.0, 1e-12);
  EXPECT_NEAR(Dc[2], 1.0, 1e-12);
}

TEST(ExpandedSystems, VariantDispatchCoversEveryKind) {
  lp::AlgebroidDualInputs dual;
  dual.algebroid = lp::tangent_algebroid(2);
  dual.h = zero_hamiltonian(4);
  EXPECT_EQ(lp::expanded_system(lp::ExpandedInputs(dual)).m, 4);

  lp::WhitneySumInputs whitney;
  whitney.algebroid = lp::tangent_algebroid(2);
  whitney.kpp = lp::PolyMat(2, 2, 2);
  whitney.kpxi = lp::PolyMat(2, 2, 2);
  whitney.kxixi = lp::PolyMat(2, 2, 2);
  whitney.a = lp::PolyMat(0, 0, 2);
  whitney.d = lp::PolyMat(0, 0, 2);
  EXPECT_EQ(lp::expanded_system(lp::ExpandedInputs(whitney)).m, 6);

  lp::AdjointBundleInputs adjoint;
  adjoint.conn = lp::zero_connection(lp::so3_algebra(), 2);
  adjoint.h = zero_hamiltonian(7);
  EXPECT_EQ(lp::expanded_system(lp::ExpandedInputs(adjoint)).m, 7);

  lp::AffineRefinementInputs affine;
  affine.package = lp::affine_connection_package(
      2, lp::PolyTensor3(2, 2, 2, 2), lp::PolyMat(2, 2, 2));
  affine.h = zero_hamiltonian(10);
  EXPECT_EQ(lp::expanded_system(lp::ExpandedInputs(affine)).m, 10);

  lp::GlRefinementInputs gl;
  gl.data = lp::zero_gl_refinement_data(2);
  gl.h = zero_hamiltonian(12);
  EXPECT_EQ(lp::expanded_system(lp::ExpandedInputs(gl)).m, 12);
}

TEST(CasimirOrthogonality, DriftAndDiffusionStayOnSpheres) {
  auto sys = rotation_system(
      {coord(3, 0),
       (lp::Polynomial::variable(3, 1) * lp::Polynomial::variable(3, 2))
           .field()});
  auto dyn = lp::compile(sys);
  lp::Polynomial c2 =
      lp::Polynomial::variable(3, 0) * lp::Polynomial::variable(3, 0) +
      lp::Polynomial::variable(3, 1) * lp::Polynomial::variable(3, 1) +
      lp::Polynomial::variable(3, 2) * lp::Polynomial::variable(3, 2);
  auto casimir = c2.field();
  for (int k = 0; k < 10; ++k) {
    const lp::Vec z = sample_point(67, k, 3);
    const lp::Vec grad = casimir.grad(z);
    EXPECT_LT(std::abs(grad.dot(dyn.stratonovich_drift(z))), 1e-7);
    const lp::Mat D = dyn.diffusion(z);
    for (int s = 0; s < dyn.r; ++s) {
      EXPECT_LT(std::abs(grad.dot(D.col(s))), 1e-7);
    }
  }
}

TEST(CasimirOrthogonality, CorrectionBalancesCasimirHessian) {
  // Pathwise conservation of c = |x|^2 forces the Ito correction to cancel
  // the quadratic variation exactly: <grad c, correction> = -sum_s |sigma_s|^2.
  auto sys = rotation_system({coord(3, 0)});
  auto dyn = lp::compile(sys);
  const lp::Vec pin = (lp::Vec(3) << 1.0, 2.0, 3.0).finished();
  const lp::Vec corr = dyn.ito_drift(pin) - dyn.stratonovich_drift(pin);
  EXPECT_NEAR(2.0 * pin.dot(corr), -13.0, 1e-10);
  for (int k = 0; k < 5; ++k) {
    const lp::Vec z = sample_point(71, k, 3);
    const lp::Vec c = dyn.ito_drift(z) - dyn.stratonovich_drift(z);
    const double sq = dyn.diffusion(z).col(0).squaredNorm();
    EXPECT_NEAR(2.0 * z.dot(c), -sq, 1e-9 * (1.0 + sq));
  }
}

}  // namespace
