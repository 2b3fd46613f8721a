#include <gtest/gtest.h>

#include "svdbf/metrics.hpp"
#include "test_support.hpp"

using namespace svdbf;

namespace {

ComplexImage constant_image(const ImagingGrid& g, cplx v) { return {g, VectorXcd::Constant(g.size(), v)}; }

// Gaussian intensity profile exp(-x^2 / (2 s^2)) along every row.
ComplexImage gaussian_image(const ImagingGrid& g, double center, double s) {
  ComplexImage img{g, VectorXcd(g.size())};
  for (Index ix = 0; ix < g.nx; ++ix)
    for (Index iz = 0; iz < g.nz; ++iz) {
      const double d = g.x(ix) - center;
      img.pixels[g.index(ix, iz)] = std::exp(-d * d / (4.0 * s * s));
    }
  return img;
}

}  // namespace

TEST(Masks, DiskAndAnnulusAreDisjointWithDefaults) {
  const ImagingGrid g = ImagingGrid::centered(61, 61, 5e-3, 0.1e-3, 0.1e-3);
  const Cyst cyst{0.0, 8e-3, 1.5e-3, 0.0};
  const auto [in, out] = cyst_masks(g, cyst);
  EXPECT_FALSE(in.pixels.empty());
  EXPECT_FALSE(out.pixels.empty());
  for (Index p : in.pixels)
    EXPECT_EQ(std::find(out.pixels.begin(), out.pixels.end(), p), out.pixels.end());
  for (Index p : out.pixels) EXPECT_LE(std::abs(g.z(p % g.nz) - 8e-3), 1.5e-3 + 1e-12);
  EXPECT_EQ(in.role, MaskRole::inside);
  EXPECT_EQ(out.role, MaskRole::outside);
  EXPECT_THROW(cyst_masks(g, cyst, 1.3, 1.2, 1.8), ConfigError);
}

TEST(Masks, DiskAreaApproachesPiR2) {
  const ImagingGrid g = ImagingGrid::centered(201, 201, 0.0, 0.05e-3, 0.05e-3);
  const RegionMask m = disk_mask(g, 0.0, 5e-3, 3e-3);
  const double area = static_cast<double>(m.pixels.size()) * 0.05e-3 * 0.05e-3;
  EXPECT_NEAR(area / (kPi * 9e-6), 1.0, 0.01);
}

TEST(Contrast, KnownRatio) {
  const ImagingGrid g = ImagingGrid::centered(10, 10, 1e-3, 1e-4, 1e-4);
  ComplexImage img = constant_image(g, 1.0);
  RegionMask in{{3, 4}, MaskRole::inside};
  RegionMask out{{50, 51, 52}, MaskRole::outside};
  img.pixels[3] = 0.1;
  img.pixels[4] = cplx(0.0, 0.1);
  EXPECT_NEAR(contrast_db(img, in, out), -20.0, 1e-12);
}

TEST(Contrast, SameRegionIsZeroDb) {
  const ImagingGrid g = ImagingGrid::centered(10, 10, 1e-3, 1e-4, 1e-4);
  test::Generator gen(41);
  const ComplexImage img{g, gen.complex_vector(g.size())};
  const RegionMask m = disk_mask(g, 0.0, g.z(5), 3e-4);
  EXPECT_NEAR(contrast_db(img, m, m), 0.0, 1e-12);
}

TEST(Contrast, FloorAndErrors) {
  const ImagingGrid g = ImagingGrid::centered(10, 10, 1e-3, 1e-4, 1e-4);
  ComplexImage img = constant_image(g, 1.0);
  img.pixels[0] = 0.0;
  const RegionMask in{{0}, MaskRole::inside};
  const RegionMask out{{1}, MaskRole::outside};
  EXPECT_EQ(contrast_db(img, in, out), kContrastFloorDb);
  EXPECT_THROW(contrast_db(img, out, in), DegenerateError);
  EXPECT_THROW(contrast_db(img, RegionMask{}, out), ShapeError);
  EXPECT_THROW(contrast_db(img, RegionMask{{1000}, MaskRole::inside}, out), ShapeError);
}

TEST(Contrast, ScaleInvariant) {
  test::Generator gen(42);
  const ImagingGrid g = ImagingGrid::centered(20, 20, 1e-3, 1e-4, 1e-4);
  ComplexImage img{g, gen.complex_vector(g.size())};
  const auto [in, out] = cyst_masks(g, Cyst{0.0, g.z(10), 5e-4, 0.0});
  const double c0 = contrast_db(img, in, out);
  img.pixels *= cplx(3.0, -2.0);
  EXPECT_NEAR(contrast_db(img, in, out), c0, 1e-12);
}

// An intensity Gaussian of width s has FWHM 2 sqrt(2 ln 2) s.
TEST(Fwhm, GaussianProfile) {
  const ImagingGrid g = ImagingGrid::centered(81, 3, 1e-3, 0.05e-3, 0.1e-3);
  for (double s : {0.15e-3, 0.3e-3}) {
    for (double c : {0.0, 0.013e-3, -0.021e-3}) {
      const ComplexImage img = gaussian_image(g, c, s);
      const ProfileFwhm p = lateral_profile_fwhm(img, g.nearest_ix(c), 1);
      const double expect = 2.0 * std::sqrt(2.0 * std::log(2.0)) * s;
      EXPECT_NEAR(p.fwhm, expect, 0.02 * expect);
      EXPECT_NEAR(p.peak_x, c, 0.2 * g.dx);
      EXPECT_NEAR(p.left_halfwidth + p.right_halfwidth, p.fwhm, 1e-15);
    }
  }
}

TEST(Fwhm, BoundaryErrors) {
  const ImagingGrid g = ImagingGrid::centered(21, 3, 1e-3, 0.05e-3, 0.1e-3);
  EXPECT_THROW(lateral_profile_fwhm(gaussian_image(g, 0.0, 1e-3), 10, 1), BoundaryError);
  EXPECT_THROW(lateral_profile_fwhm(gaussian_image(g, 0.0, 0.1e-3), 0, 1), BoundaryError);
}

TEST(Fwhm, LateralResolutionFindsPeak) {
  const ImagingGrid g = ImagingGrid::centered(81, 21, 1e-3, 0.05e-3, 0.05e-3);
  const ComplexImage img = gaussian_image(g, 0.2e-3, 0.2e-3);
  const double expect = 2.0 * std::sqrt(2.0 * std::log(2.0)) * 0.2e-3;
  EXPECT_NEAR(lateral_resolution(img, 0.0, g.z(10), 0.5e-3), expect, 0.02 * expect);
}

TEST(PhaseR2, AlignmentLevels) {
  const VectorXd angles = steering_angles(11, 0.3);
  const VectorXd ref = angles.array().square() * 10.0;
  EXPECT_NEAR(phase_r2(ref, ref, angles, PhaseAlignment::none).value, 1.0, 1e-15);
  const VectorXd shifted = ref.array() + 0.7;
  EXPECT_LT(phase_r2(shifted, ref, angles, PhaseAlignment::none).value, 0.9);
  EXPECT_NEAR(phase_r2(shifted, ref, angles, PhaseAlignment::offset).value, 1.0, 1e-12);
  const VectorXd tilted = shifted + 2.0 * angles;
  EXPECT_LT(phase_r2(tilted, ref, angles, PhaseAlignment::offset).value, 0.9);
  EXPECT_NEAR(phase_r2(tilted, ref, angles, PhaseAlignment::affine).value, 1.0, 1e-12);
}

TEST(PhaseR2, AlignmentNeverLowersR2) {
  test::Generator gen(43);
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = gen.index(3, 30);
    const VectorXd angles = steering_angles(n, 0.3);
    VectorXd ref(n), est(n);
    for (Index i = 0; i < n; ++i) {
      ref[i] = gen.uniform(-3, 3);
      est[i] = ref[i] + gen.uniform(-1, 1);
    }
    const double r0 = phase_r2(est, ref, angles, PhaseAlignment::none).value;
    const double r1 = phase_r2(est, ref, angles, PhaseAlignment::offset).value;
    const double r2 = phase_r2(est, ref, angles, PhaseAlignment::affine).value;
    EXPECT_GE(r1, r0 - 1e-12);
    EXPECT_GE(r2, r1 - 1e-12);
    EXPECT_LE(r2, 1.0);
  }
}

TEST(PhaseR2, ConstantReferenceUndefined) {
  const VectorXd angles = steering_angles(5, 0.3);
  const R2Result r = phase_r2(VectorXd::Ones(5), VectorXd::Zero(5), angles, PhaseAlignment::offset);
  EXPECT_FALSE(r.defined);
  EXPECT_TRUE(std::isnan(r.value));
}

TEST(PhaseR2, SkipsMaskedAndNan) {
  const VectorXd angles = steering_angles(5, 0.3);
  VectorXd ref(5), est(5);
  ref << 0, 1, 2, 3, 4;
  est << 0, 1, 50, 3, std::numeric_limits<double>::quiet_NaN();
  EXPECT_NEAR(phase_r2(est, ref, angles, PhaseAlignment::none, {false, false, true, false, false}).value,
              1.0, 1e-15);
  EXPECT_THROW(phase_r2(est, ref, steering_angles(4, 0.3), PhaseAlignment::none), ShapeError);
}

TEST(PhaseLawR2, WrappedEstimateAgainstDelays) {
  ExtractedAberration est;
  est.angles = steering_angles(9, 0.3);
  est.center_frequency = 5e6;
  est.gauge_index = 4;
  est.masked.assign(9, false);
  AngularAberration truth = AngularAberration::none(est.angles);
  const VectorXd phase = 2.0 * VectorXd::LinSpaced(9, -4.0, 4.0);
  truth.delays = phase / (kTwoPi * 5e6);
  est.phase = phase.unaryExpr([](double p) { return std::remainder(p, kTwoPi); });
  EXPECT_NEAR(phase_law_r2(est, truth, PhaseAlignment::none).value, 1.0, 1e-12);
  AngularAberration other = truth;
  other.angles = steering_angles(9, 0.2);
  EXPECT_THROW(phase_law_r2(est, other, PhaseAlignment::none), ShapeError);
}
