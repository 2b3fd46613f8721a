#include "svdbf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/QR>

namespace svdbf {

RegionMask disk_mask(const ImagingGrid& grid, double cx, double cz, double radius,
                     MaskRole role) {
  if (!(radius > 0.0)) throw ConfigError("mask radius must be positive");
  RegionMask m{{}, role};
  for (Index ix = 0; ix < grid.nx; ++ix)
    for (Index iz = 0; iz < grid.nz; ++iz) {
      const double dx = grid.x(ix) - cx;
      const double dz = grid.z(iz) - cz;
      if (dx * dx + dz * dz <= radius * radius) m.pixels.push_back(grid.index(ix, iz));
    }
  return m;
}

RegionMask annulus_mask(const ImagingGrid& grid, double cx, double cz, double r_in, double r_out,
                        double depth_half_width, MaskRole role) {
  if (!(r_in >= 0.0 && r_out > r_in)) throw ConfigError("annulus radii must satisfy 0 <= r_in < r_out");
  RegionMask m{{}, role};
  for (Index ix = 0; ix < grid.nx; ++ix)
    for (Index iz = 0; iz < grid.nz; ++iz) {
      const double dx = grid.x(ix) - cx;
      const double dz = grid.z(iz) - cz;
      const double r2 = dx * dx + dz * dz;
      if (r2 >= r_in * r_in && r2 <= r_out * r_out && std::abs(dz) <= depth_half_width)
        m.pixels.push_back(grid.index(ix, iz));
    }
  return m;
}

std::pair<RegionMask, RegionMask> cyst_masks(const ImagingGrid& grid, const Cyst& cyst,
                                             double inner, double outer_lo, double outer_hi) {
  if (!(inner > 0.0 && inner <= outer_lo && outer_lo < outer_hi))
    throw ConfigError("cyst mask factors must satisfy 0 < inner <= outer_lo < outer_hi");
  return {disk_mask(grid, cyst.center_x, cyst.center_z, inner * cyst.radius, MaskRole::inside),
          annulus_mask(grid, cyst.center_x, cyst.center_z, outer_lo * cyst.radius,
                       outer_hi * cyst.radius, cyst.radius, MaskRole::outside)};
}

namespace {

double mean_intensity(const ComplexImage& image, const RegionMask& mask, const char* name) {
  if (mask.pixels.empty()) throw ShapeError(std::string(name) + " mask is empty");
  double sum = 0.0;
  for (Index p : mask.pixels) {
    if (p < 0 || p >= image.pixels.size())
      throw ShapeError(std::string(name) + " mask leaves the image grid");
    sum += std::norm(image.pixels[p]);
  }
  return sum / static_cast<double>(mask.pixels.size());
}

}  // namespace

double contrast_db(const ComplexImage& image, const RegionMask& inside, const RegionMask& outside) {
  const double mu_i = mean_intensity(image, inside, "inside");
  const double mu_o = mean_intensity(image, outside, "outside");
  if (mu_o == 0.0) throw DegenerateError("outside region has zero mean intensity");
  if (mu_i == 0.0) return kContrastFloorDb;
  return std::max(kContrastFloorDb, 10.0 * std::log10(mu_i / mu_o));
}

ProfileFwhm lateral_profile_fwhm(const ComplexImage& image, Index ix, Index iz) {
  const ImagingGrid& g = image.grid;
  if (ix <= 0 || ix >= g.nx - 1 || iz < 0 || iz >= g.nz)
    throw BoundaryError("profile peak must lie in the grid interior");
  VectorXd row(g.nx);
  for (Index k = 0; k < g.nx; ++k) row[k] = std::norm(image.at(k, iz));

  const double left = row[ix - 1];
  const double mid = row[ix];
  const double right = row[ix + 1];
  const double curvature = left - 2.0 * mid + right;
  double shift = 0.0;
  double peak = mid;
  if (curvature < 0.0) {
    shift = std::clamp(0.5 * (left - right) / curvature, -0.5, 0.5);
    peak = mid - 0.25 * (left - right) * shift;
  }
  if (!(peak > 0.0)) throw DegenerateError("profile has no energy");
  const double half = 0.5 * peak;

  const auto crossing = [&](Index step) {
    Index k = ix;
    while (row[k] >= half) {
      k += step;
      if (k < 0 || k >= g.nx) throw BoundaryError("half-maximum crossing lies outside the grid");
    }
    // Between k (below half) and k - step (at or above half).
    const Index inner = k - step;
    const double t = (row[inner] - half) / (row[inner] - row[k]);
    return g.x(inner) + static_cast<double>(step) * t * g.dx;
  };

  ProfileFwhm out;
  out.peak_x = g.x(ix) + shift * g.dx;
  const double x_left = crossing(-1);
  const double x_right = crossing(+1);
  out.left_halfwidth = out.peak_x - x_left;
  out.right_halfwidth = x_right - out.peak_x;
  out.fwhm = x_right - x_left;
  return out;
}

double lateral_resolution(const ComplexImage& image, double pin_x, double pin_z,
                          double search_radius) {
  const RegionMask search = disk_mask(image.grid, pin_x, pin_z, search_radius);
  if (search.pixels.empty()) throw BoundaryError("pin search region lies outside the grid");
  Index best = search.pixels.front();
  for (Index p : search.pixels)
    if (std::norm(image.pixels[p]) > std::norm(image.pixels[best])) best = p;
  return lateral_profile_fwhm(image, best / image.grid.nz, best % image.grid.nz).fwhm;
}

R2Result phase_r2(const VectorXd& estimated, const VectorXd& reference, const VectorXd& angles,
                  PhaseAlignment alignment, const std::vector<bool>& masked) {
  if (estimated.size() != reference.size() || angles.size() != reference.size())
    throw ShapeError("phase laws must share one angle grid");
  std::vector<Index> use;
  for (Index a = 0; a < reference.size(); ++a) {
    const bool m = !masked.empty() && masked[static_cast<std::size_t>(a)];
    if (!m && std::isfinite(estimated[a]) && std::isfinite(reference[a])) use.push_back(a);
  }
  const auto n = static_cast<Index>(use.size());
  if (n < 2) return {std::numeric_limits<double>::quiet_NaN(), false};

  VectorXd est(n), ref(n), th(n);
  for (Index i = 0; i < n; ++i) {
    est[i] = estimated[use[static_cast<std::size_t>(i)]];
    ref[i] = reference[use[static_cast<std::size_t>(i)]];
    th[i] = angles[use[static_cast<std::size_t>(i)]];
  }
  const double ss_tot = (ref.array() - ref.mean()).square().sum();
  if (!(ss_tot > 0.0)) return {std::numeric_limits<double>::quiet_NaN(), false};

  VectorXd residual = est - ref;
  switch (alignment) {
    case PhaseAlignment::none:
      break;
    case PhaseAlignment::offset:
      residual.array() -= residual.mean();
      break;
    case PhaseAlignment::affine: {
      MatrixXd design(n, 2);
      design.col(0).setOnes();
      design.col(1) = th;
      const VectorXd coef = design.colPivHouseholderQr().solve(residual);
      residual -= design * coef;
      break;
    }
  }
  return {1.0 - residual.squaredNorm() / ss_tot, true};
}

R2Result phase_law_r2(const ExtractedAberration& estimated, const AngularAberration& truth,
                      PhaseAlignment alignment) {
  if (truth.angles.size() != estimated.angles.size() || truth.angles.size() == 0 ||
      (truth.angles - estimated.angles).cwiseAbs().maxCoeff() > 1e-12)
    throw ShapeError("estimated and true laws use different angle grids");
  const VectorXd est = unwrap_phase(estimated.phase, estimated.gauge_index, estimated.masked);
  const VectorXd ref = kTwoPi * estimated.center_frequency * truth.delays;
  return phase_r2(est, ref, estimated.angles, alignment, estimated.masked);
}

}  // namespace svdbf
