#include "svdbf/beamform.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>

#include "svdbf/metrics.hpp"

namespace svdbf {

ImagingGrid ImagingGrid::with_default_spacing(const TransducerArray& array, Index nx, Index nz,
                                              double z0) {
  const double lambda = array.wavelength();
  return centered(nx, nz, z0, lambda, 0.5 * lambda);
}

ImagingGrid ImagingGrid::centered(Index nx, Index nz, double z0, double dx, double dz) {
  ImagingGrid g;
  g.nx = nx;
  g.nz = nz;
  g.dx = dx;
  g.dz = dz;
  g.x0 = -0.5 * static_cast<double>(nx - 1) * dx;
  g.z0 = z0;
  return g;
}

void ImagingGrid::validate() const {
  if (nx < 1 || nz < 1) throw ConfigError("imaging grid must have at least one pixel");
  if (!(dx > 0.0) || !(dz > 0.0)) throw ConfigError("imaging grid spacing must be positive");
}

Index ImagingGrid::nearest_ix(double xv) const {
  const auto i = static_cast<Index>(std::llround((xv - x0) / dx));
  return std::clamp<Index>(i, 0, nx - 1);
}

Index ImagingGrid::nearest_iz(double zv) const {
  const auto i = static_cast<Index>(std::llround((zv - z0) / dz));
  return std::clamp<Index>(i, 0, nz - 1);
}

MatrixXcd UltrafastCompoundMatrix::patch(const PatchRect& rect) const {
  if (rect.ix0 < 0 || rect.iz0 < 0 || rect.nx < 1 || rect.nz < 1 ||
      rect.ix0 + rect.nx > grid.nx || rect.iz0 + rect.nz > grid.nz)
    throw ShapeError("patch rectangle lies outside the imaging grid");
  MatrixXcd out(rect.size(), n_angles());
  for (Index ix = 0; ix < rect.nx; ++ix) {
    // z runs are contiguous rows of R
    out.middleRows(ix * rect.nz, rect.nz) =
        data.middleRows(grid.index(rect.ix0 + ix, rect.iz0), rect.nz);
  }
  return out;
}

UltrafastCompoundMatrix UltrafastCompoundMatrix::select_angles(
    const std::vector<Index>& columns) const {
  UltrafastCompoundMatrix out = *this;
  out.angles.resize(static_cast<Index>(columns.size()));
  out.data.resize(data.rows(), out.angles.size());
  for (std::size_t i = 0; i < columns.size(); ++i) {
    const Index c = columns[i];
    if (c < 0 || c >= n_angles()) throw ShapeError("angle column out of range");
    out.angles[static_cast<Index>(i)] = angles[c];
    out.data.col(static_cast<Index>(i)) = data.col(c);
  }
  return out;
}

namespace {

UltrafastCompoundMatrix beamform_kernel(const RFDataSet& rf, const ImagingGrid& grid,
                                        double f_number, const VectorXd& tx_offset,
                                        const VectorXd& rx_offset) {
  grid.validate();
  if (!(f_number > 0.0)) throw ConfigError("f-number must be positive");
  rf.array.validate();

  const Index n_ang = rf.n_angles();
  const Index n_el = rf.n_elements();
  const Index n_s = rf.n_samples();
  const double c = rf.array.sound_speed;
  const double fs = rf.sampling_frequency;
  const VectorXd ex = rf.array.element_x();
  const VectorXd cos_a = rf.angles.array().cos();
  const VectorXd sin_a = rf.angles.array().sin();

  UltrafastCompoundMatrix r;
  r.grid = grid;
  r.angles = rf.angles;
  r.center_frequency = rf.array.center_frequency;
  r.sound_speed = c;
  r.data = MatrixXcd::Zero(grid.size(), n_ang);

  Index oow = 0;
  const Index n_pix = grid.size();
#pragma omp parallel for schedule(static) reduction(+ : oow)
  for (Index p = 0; p < n_pix; ++p) {
    const double xp = grid.x(p / grid.nz);
    const double zp = grid.z(p % grid.nz);
    const double half_ap = zp / (2.0 * f_number);

    Index j_lo = n_el;
    Index j_hi = -1;
    for (Index j = 0; j < n_el; ++j) {
      if (std::abs(ex[j] - xp) <= half_ap) {
        j_lo = std::min(j_lo, j);
        j_hi = j;
      }
    }
    if (j_hi < j_lo) continue;

    VectorXd rx(j_hi - j_lo + 1);
    for (Index j = j_lo; j <= j_hi; ++j) {
      const double dx = ex[j] - xp;
      rx[j - j_lo] = std::sqrt(dx * dx + zp * zp) / c + rx_offset[j];
    }

    for (Index a = 0; a < n_ang; ++a) {
      const double tx = (zp * cos_a[a] + xp * sin_a[a]) / c + tx_offset[a];
      cplx sum{};
      for (Index j = j_lo; j <= j_hi; ++j) {
        const double s = (tx + rx[j - j_lo] - rf.t0) * fs;
        const double fl = std::floor(s);
        const auto i = static_cast<Index>(fl);
        if (i < 0 || i + 1 >= n_s) {
          ++oow;
          continue;
        }
        const double f = s - fl;
        const cplx* tr = rf.traces.col(a * n_el + j).data();
        sum += (1.0 - f) * tr[i] + f * tr[i + 1];
      }
      r.data(p, a) = sum;
    }
  }
  r.out_of_window = oow;
  return r;
}

}  // namespace

UltrafastCompoundMatrix das_beamform(const RFDataSet& rf, const ImagingGrid& grid,
                                     double f_number) {
  return beamform_kernel(rf, grid, f_number, VectorXd::Zero(rf.n_angles()),
                         VectorXd::Zero(rf.n_elements()));
}

ComplexImage compound(const UltrafastCompoundMatrix& r) {
  return {r.grid, r.data.rowwise().sum()};
}

UltrafastCompoundMatrix apply_angular_law(const UltrafastCompoundMatrix& r,
                                          const AngularAberration& law, LawDirection direction) {
  law.validate();
  if (law.angles.size() != r.n_angles())
    throw ShapeError("angular law length differs from the number of R columns");
  VectorXcd factor(r.n_angles());
  for (Index a = 0; a < factor.size(); ++a) {
    const double phase = kTwoPi * r.center_frequency * law.delays[a];
    factor[a] = direction == LawDirection::forward ? std::polar(law.amplitudes[a], -phase)
                                                   : std::polar(1.0, phase);
  }
  UltrafastCompoundMatrix out = r;
  out.data = r.data * factor.asDiagonal();
  return out;
}

PsfMeasurement measure_psf(const TransducerArray& array, const PulseModel& pulse, double x,
                           double z, const ImagingGrid& grid, const VectorXd& angles,
                           double f_number) {
  grid.validate();
  const double x_end = grid.x(grid.nx - 1);
  const double z_end = grid.z(grid.nz - 1);
  if (x < grid.x0 || x > x_end || z < grid.z0 || z > z_end)
    throw ConfigError("PSF point lies outside the imaging grid");

  ScattererField field;
  field.x = VectorXd::Constant(1, x);
  field.z = VectorXd::Constant(1, z);
  field.reflectivity = VectorXd::Ones(1);
  const RFDataSet rf = simulate_rf(array, pulse, field, angles);
  PsfMeasurement out;
  out.image = compound(das_beamform(rf, grid, f_number));

  Index peak = 0;
  out.image.pixels.cwiseAbs2().maxCoeff(&peak);
  const Index ix = peak / grid.nz;
  const Index iz = peak % grid.nz;
  if (ix == 0 || iz == 0 || ix == grid.nx - 1 || iz == grid.nz - 1)
    throw BoundaryError("PSF peak lies on the grid boundary");
  out.lateral_fwhm = lateral_profile_fwhm(out.image, ix, iz).fwhm;
  return out;
}

VectorXd project_law_to_elements(const TransducerArray& array, const AngularAberration& law,
                                 double x_ref, double z_ref) {
  law.validate();
  const Index n_el = array.n_elements;
  const Index n_ang = law.angles.size();
  const VectorXd ex = array.element_x();

  MatrixXd weights = MatrixXd::Zero(n_ang, n_el);
  for (Index a = 0; a < n_ang; ++a) {
    const double xo = x_ref - z_ref * std::tan(law.angles[a]);
    if (xo <= ex[0]) {
      weights(a, 0) = 1.0;
    } else if (xo >= ex[n_el - 1]) {
      weights(a, n_el - 1) = 1.0;
    } else {
      const double pos = (xo - ex[0]) / array.pitch;
      const Index i = std::min<Index>(static_cast<Index>(pos), n_el - 2);
      const double f = pos - static_cast<double>(i);
      weights(a, i) = 1.0 - f;
      weights(a, i + 1) = f;
    }
  }
  MatrixXd d2 = MatrixXd::Zero(std::max<Index>(n_el - 2, 0), n_el);
  for (Index i = 0; i + 2 < n_el; ++i) {
    d2(i, i) = 1.0;
    d2(i, i + 1) = -2.0;
    d2(i, i + 2) = 1.0;
  }
  const MatrixXd normal = weights.transpose() * weights + 1e-2 * d2.transpose() * d2 +
                          1e-9 * MatrixXd::Identity(n_el, n_el);
  return normal.ldlt().solve(weights.transpose() * law.delays);
}

UltrafastCompoundMatrix rebeamform_corrected(const RFDataSet& rf, const AngularAberration& law,
                                             const ImagingGrid& grid, double f_number,
                                             bool correct_receive) {
  law.validate();
  if (law.angles.size() != rf.n_angles())
    throw ShapeError("angular law length differs from the number of transmits");
  VectorXd rx = VectorXd::Zero(rf.n_elements());
  if (correct_receive) {
    const double xc = grid.x0 + 0.5 * static_cast<double>(grid.nx - 1) * grid.dx;
    const double zc = grid.z0 + 0.5 * static_cast<double>(grid.nz - 1) * grid.dz;
    rx = project_law_to_elements(rf.array, law, xc, zc);
  }
  return beamform_kernel(rf, grid, f_number, law.delays, rx);
}

}  // namespace svdbf
