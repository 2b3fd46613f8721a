#pragma once

#include <utility>
#include <vector>

#include "svdbf/arraysim.hpp"
#include "svdbf/beamform.hpp"
#include "svdbf/svdcore.hpp"
#include "svdbf/types.hpp"

namespace svdbf {

enum class MaskRole { inside, outside };

struct RegionMask {
  std::vector<Index> pixels;
  MaskRole role = MaskRole::inside;
};

RegionMask disk_mask(const ImagingGrid& grid, double cx, double cz, double radius,
                     MaskRole role = MaskRole::inside);

/// Pixels with r_in <= distance <= r_out and |z - cz| <= depth_half_width.
RegionMask annulus_mask(const ImagingGrid& grid, double cx, double cz, double r_in, double r_out,
                        double depth_half_width, MaskRole role = MaskRole::outside);

/// Inside: disk of inner * radius. Outside: annulus [outer_lo, outer_hi] * radius
/// restricted to the cyst's own depth band.
std::pair<RegionMask, RegionMask> cyst_masks(const ImagingGrid& grid, const Cyst& cyst,
                                             double inner = 0.8, double outer_lo = 1.2,
                                             double outer_hi = 1.8);

inline constexpr double kContrastFloorDb = -120.0;

/// 10 log10(mean |p|^2 inside / mean |p|^2 outside). An empty inside region
/// energy returns kContrastFloorDb.
double contrast_db(const ComplexImage& image, const RegionMask& inside, const RegionMask& outside);

struct ProfileFwhm {
  double fwhm = 0.0;
  double left_halfwidth = 0.0;
  double right_halfwidth = 0.0;
  double peak_x = 0.0;
};

/// Intensity FWHM along row iz around the local maximum at column ix.
/// The peak is refined with a parabola through three samples; each half-maximum
/// crossing is linearly interpolated.
ProfileFwhm lateral_profile_fwhm(const ComplexImage& image, Index ix, Index iz);

/// FWHM through the brightest pixel within search_radius of the pin.
double lateral_resolution(const ComplexImage& image, double pin_x, double pin_z,
                          double search_radius = 1.0e-3);

enum class PhaseAlignment { none, offset, affine };

struct R2Result {
  double value = 0.0;
  bool defined = false;  // false for a constant reference law
};

/// Coefficient of determination of `estimated` against `reference` after the
/// chosen alignment. Entries that are NaN in either input or masked are skipped.
R2Result phase_r2(const VectorXd& estimated, const VectorXd& reference, const VectorXd& angles,
                  PhaseAlignment alignment, const std::vector<bool>& masked = {});

/// phase_r2 of an extracted law against 2 pi f0 truth.delays.
R2Result phase_law_r2(const ExtractedAberration& estimated, const AngularAberration& truth,
                      PhaseAlignment alignment);

}  // namespace svdbf
