#pragma once

#include "svdbf/arraysim.hpp"
#include "svdbf/types.hpp"

namespace svdbf {

/// Cartesian pixel grid. Pixel index = ix * nz + iz (z fastest), so a
/// column-major nz x nx matrix maps directly onto the pixel vector.
struct ImagingGrid {
  double x0 = 0.0;
  double z0 = 0.0;
  Index nx = 0;
  Index nz = 0;
  double dx = 0.0;
  double dz = 0.0;

  /// dx = lambda, dz = lambda / 2.
  static ImagingGrid with_default_spacing(const TransducerArray& array, Index nx, Index nz,
                                          double z0);
  /// Grid of nx columns symmetric about x = 0.
  static ImagingGrid centered(Index nx, Index nz, double z0, double dx, double dz);

  void validate() const;
  Index size() const { return nx * nz; }
  double x(Index ix) const { return x0 + static_cast<double>(ix) * dx; }
  double z(Index iz) const { return z0 + static_cast<double>(iz) * dz; }
  Index index(Index ix, Index iz) const { return ix * nz + iz; }
  /// Nearest node, clamped to the grid.
  Index nearest_ix(double xv) const;
  Index nearest_iz(double zv) const;
};

/// Rectangle of pixels [ix0, ix0 + nx) x [iz0, iz0 + nz).
struct PatchRect {
  Index ix0 = 0;
  Index iz0 = 0;
  Index nx = 0;
  Index nz = 0;

  Index size() const { return nx * nz; }
  bool operator==(const PatchRect&) const = default;
};

/// R: one column per transmit, each column the receive-beamformed image of
/// that transmit with its own transmit travel time compensated.
struct UltrafastCompoundMatrix {
  ImagingGrid grid;
  VectorXd angles;
  MatrixXcd data;  // [grid.size() x angles.size()]
  double center_frequency = 0.0;
  double sound_speed = 0.0;
  Index out_of_window = 0;  // interpolation taps that fell outside the traces

  Index n_angles() const { return angles.size(); }
  Index n_pixels() const { return data.rows(); }
  /// Rows of R belonging to `rect`, in the rect's own z-fastest order.
  MatrixXcd patch(const PatchRect& rect) const;
  /// Same matrix restricted to a subset of transmit columns.
  UltrafastCompoundMatrix select_angles(const std::vector<Index>& columns) const;
};

struct ComplexImage {
  ImagingGrid grid;
  VectorXcd pixels;

  /// nz x nx view (rows = depth).
  Eigen::Map<const MatrixXcd> as_matrix() const {
    return Eigen::Map<const MatrixXcd>(pixels.data(), grid.nz, grid.nx);
  }
  cplx at(Index ix, Index iz) const { return pixels[grid.index(ix, iz)]; }
};

UltrafastCompoundMatrix das_beamform(const RFDataSet& rf, const ImagingGrid& grid,
                                     double f_number = 1.0);

/// Coherent compounding: the row sums of R.
ComplexImage compound(const UltrafastCompoundMatrix& r);

enum class LawDirection { forward, conjugate };

/// forward: R * diag(a) with a = amplitude * exp(-i 2 pi f0 delay).
/// conjugate: phase-only inverse, R * diag(exp(+i 2 pi f0 delay)).
UltrafastCompoundMatrix apply_angular_law(const UltrafastCompoundMatrix& r,
                                          const AngularAberration& law, LawDirection direction);

struct PsfMeasurement {
  ComplexImage image;
  double lateral_fwhm = 0.0;  // m, intensity FWHM through the peak row
};

PsfMeasurement measure_psf(const TransducerArray& array, const PulseModel& pulse, double x,
                           double z, const ImagingGrid& grid, const VectorXd& angles,
                           double f_number = 1.0);

/// das_beamform with each transmit sampled law.delays[theta] later. With
/// correct_receive the law is also projected onto per-element delays
/// (see project_law_to_elements) which are compensated on receive.
UltrafastCompoundMatrix rebeamform_corrected(const RFDataSet& rf, const AngularAberration& law,
                                             const ImagingGrid& grid, double f_number,
                                             bool correct_receive);

/// Least-squares element screen whose transmit launch delays, seen from the
/// reference point (x_ref, z_ref), reproduce the angular law. A small
/// second-difference penalty keeps elements that no ray reaches smooth.
VectorXd project_law_to_elements(const TransducerArray& array, const AngularAberration& law,
                                 double x_ref, double z_ref);

}  // namespace svdbf
