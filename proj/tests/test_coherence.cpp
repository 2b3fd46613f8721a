#include <gtest/gtest.h>

#include "svdbf/arraysim.hpp"
#include "svdbf/coherence.hpp"
#include "test_support.hpp"

using namespace svdbf;

TEST(AngularCoherence, UnnormalizedIsGram) {
  test::Generator gen(31);
  const MatrixXcd r = gen.complex_matrix(20, 5);
  const CoherenceMatrix c = angular_coherence(r, false);
  EXPECT_LT((c.values - r.adjoint() * r).norm(), 1e-12);
  EXPECT_FALSE(c.normalized);
}

TEST(AngularCoherence, NormalizedProperties) {
  test::Generator gen(32);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = gen.index(2, 12);
    const MatrixXcd r = gen.complex_matrix(gen.index(1, 50), n);
    const CoherenceMatrix c = angular_coherence(r, true);
    EXPECT_LT((c.values - c.values.adjoint()).norm(), 1e-13);
    for (Index i = 0; i < n; ++i) {
      EXPECT_EQ(c.values(i, i), cplx(1.0));
      for (Index j = 0; j < n; ++j) EXPECT_LE(std::abs(c.values(i, j)), 1.0 + 1e-12);
    }
  }
}

TEST(AngularCoherence, RankOneIsFullyCoherent) {
  test::Generator gen(33);
  const MatrixXcd r = gen.complex_vector(30) * gen.complex_vector(6).transpose();
  const VectorXd curve = coherence_factor_curve(angular_coherence(r, true));
  EXPECT_LT((curve - VectorXd::Ones(6)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(AngularCoherence, IndependentColumnsDecorrelate) {
  test::Generator gen(34);
  const MatrixXcd r = gen.complex_matrix(20000, 4);
  const VectorXd curve = coherence_factor_curve(angular_coherence(r, true));
  EXPECT_DOUBLE_EQ(curve[0], 1.0);
  for (Index k = 1; k < 4; ++k) EXPECT_LT(curve[k], 0.03);
}

TEST(AngularCoherence, MasksSilentColumns) {
  test::Generator gen(35);
  MatrixXcd r = gen.complex_vector(10) * VectorXcd::Ones(4).transpose();
  r.col(1).setZero();
  const CoherenceMatrix c = angular_coherence(r, true, steering_angles(4, 0.1));
  EXPECT_TRUE(c.masked[1]);
  EXPECT_EQ(c.values(1, 1), cplx(0.0));
  const VectorXd curve = coherence_factor_curve(c);
  EXPECT_NEAR(curve[1], 1.0, 1e-12);  // only the (2, 3) pair is left at lag 1
  EXPECT_NEAR(curve[2], 1.0, 1e-12);
}

TEST(AngularCoherence, Errors) {
  test::Generator gen(36);
  const MatrixXcd r = gen.complex_matrix(5, 3);
  EXPECT_THROW(angular_coherence(r, true, steering_angles(4, 0.1)), ShapeError);
  MatrixXcd bad = r;
  bad(0, 0) = cplx(std::numeric_limits<double>::infinity(), 0.0);
  EXPECT_THROW(angular_coherence(bad, true), DegenerateError);
  EXPECT_THROW(coherence_factor_curve(angular_coherence(r, false)), ConfigError);
}

TEST(CoherenceCurve, ToeplitzMeanOfDiagonals) {
  // hand-built coherence with known diagonal magnitudes
  CoherenceMatrix c;
  c.normalized = true;
  c.values = MatrixXcd::Identity(4, 4);
  c.values(0, 1) = 0.5;
  c.values(1, 2) = cplx(0.0, 0.7);
  c.values(2, 3) = -0.3;
  c.values(0, 3) = 0.2;
  c.masked.assign(4, false);
  const VectorXd curve = coherence_factor_curve(c);
  EXPECT_NEAR(curve[1], 0.5, 1e-15);
  EXPECT_NEAR(curve[2], 0.0, 1e-15);
  EXPECT_NEAR(curve[3], 0.2, 1e-15);
}

TEST(TriangleFit, ExactLine) {
  VectorXd curve(16);
  for (Index k = 0; k < 16; ++k) curve[k] = std::max(0.0, 0.9 - 0.08 * static_cast<double>(k));
  curve[0] = 1.0;
  const TriangleFit fit = triangle_fit(curve);
  EXPECT_NEAR(fit.slope, -0.08, 1e-12);
  EXPECT_NEAR(fit.zero_lag_extrapolation, 0.9, 1e-12);
  EXPECT_NEAR(fit.r2, 1.0, 1e-12);
  // 0.9 - 0.08 k drops below 0.1 at k = 11, beyond n / 2
  EXPECT_EQ(fit.last_lag, 8);
}

TEST(TriangleFit, StopsAtFirstLagBelowThreshold) {
  VectorXd curve(20);
  for (Index k = 0; k < 20; ++k) curve[k] = std::max(0.0, 1.0 - 0.2 * static_cast<double>(k));
  EXPECT_EQ(triangle_fit(curve).last_lag, 5);
}

TEST(TriangleFit, Errors) {
  EXPECT_THROW(triangle_fit(VectorXd::Ones(3)), FitError);
  VectorXd curve = VectorXd::Zero(8);
  curve[0] = 1.0;
  EXPECT_THROW(triangle_fit(curve), FitError);
}
