#include "svdbf/svdcore.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#include <Eigen/QR>

#include "svdbf/metrics.hpp"

namespace svdbf {

Index gauge_angle_index(const VectorXd& angles) {
  if (angles.size() == 0) throw ShapeError("no steering angles");
  Index best = 0;
  angles.cwiseAbs().minCoeff(&best);
  return best;
}

AngularAberration ExtractedAberration::as_law() const {
  AngularAberration law;
  law.angles = angles;
  law.delays = delays();
  law.amplitudes = amplitude;
  for (Index a = 0; a < angles.size(); ++a) {
    if (masked[static_cast<std::size_t>(a)]) {
      law.delays[a] = 0.0;
      law.amplitudes[a] = 0.0;
    }
  }
  return law;
}

VectorXd unwrap_phase(const VectorXd& wrapped, Index anchor, const std::vector<bool>& masked) {
  const Index n = wrapped.size();
  if (n == 0) return wrapped;
  if (anchor < 0 || anchor >= n) throw ShapeError("unwrap anchor out of range");
  const auto is_masked = [&](Index i) {
    return !masked.empty() && masked[static_cast<std::size_t>(i)];
  };
  VectorXd out = wrapped;
  const auto walk = [&](Index step) {
    double prev = out[anchor];
    for (Index i = anchor + step; i >= 0 && i < n; i += step) {
      if (is_masked(i)) continue;
      const double k = std::round((prev - wrapped[i]) / kTwoPi);
      if (k != 0.0) out[i] = wrapped[i] + kTwoPi * k;
      prev = out[i];
    }
  };
  walk(+1);
  walk(-1);
  return out;
}

ExtractedAberration extract_aberration(const PatchSvd<cplx>& svd, const VectorXd& angles, double f0,
                                       const PatchRect& source) {
  const VectorXcd v = svd.angular_vector();
  const Index n = v.size();
  if (angles.size() != n) throw ShapeError("angle count differs from the angular vector length");
  if (!(f0 > 0.0)) throw ConfigError("center frequency must be positive");

  ExtractedAberration out;
  out.angles = angles;
  out.center_frequency = f0;
  out.source_patch = source;
  out.s_ratio = svd.s_ratio();
  out.gauge_index = svd.gauge_index;
  out.masked.assign(static_cast<std::size_t>(n), false);

  VectorXd wrapped(n);
  VectorXd mag = v.cwiseAbs();
  for (Index a = 0; a < n; ++a) {
    if (mag[a] <= 1e-12) {
      out.masked[static_cast<std::size_t>(a)] = true;
      wrapped[a] = 0.0;
    } else {
      wrapped[a] = std::arg(v[a]);
    }
  }
  wrapped[out.gauge_index] = 0.0;
  out.phase = unwrap_phase(wrapped, out.gauge_index, out.masked);
  for (Index a = 0; a < n; ++a)
    if (out.masked[static_cast<std::size_t>(a)]) out.phase[a] = std::numeric_limits<double>::quiet_NaN();
  out.amplitude = mag / mag.mean();
  return out;
}

VectorXcd correct_patch(const MatrixXcd& r_patch, const PatchSvd<cplx>& svd, CorrectionMode mode) {
  const VectorXcd v = svd.angular_vector();
  if (r_patch.cols() != v.size() || r_patch.rows() != svd.spatial_vectors.rows())
    throw ShapeError("patch and decomposition shapes differ");
  if (mode == CorrectionMode::rank1)
    return (svd.singular_values[0] * v.cwiseAbs().sum()) * svd.spatial_vector();
  VectorXcd weights(v.size());
  for (Index a = 0; a < v.size(); ++a) {
    const double m = std::abs(v[a]);
    weights[a] = m <= 1e-12 ? cplx{} : v[a] / m;
  }
  return r_patch * weights;
}

VectorXcd correct_patch(const MatrixXcd& r_patch, Index gauge_index, CorrectionMode mode) {
  return correct_patch(r_patch, patch_svd(r_patch, gauge_index), mode);
}

MatrixXcd rank1_reconstruction(const PatchSvd<cplx>& svd) {
  return svd.singular_values[0] * svd.spatial_vector() * svd.angular_vector().adjoint();
}

namespace {

std::vector<Index> patch_starts(Index n, Index size, double overlap) {
  const Index step =
      std::max<Index>(1, static_cast<Index>(std::llround(static_cast<double>(size) * (1.0 - overlap))));
  std::vector<Index> starts;
  for (Index s = 0; s + size <= n; s += step) starts.push_back(s);
  if (starts.back() + size < n) starts.push_back(n - size);
  return starts;
}

std::vector<std::pair<Index, Index>> even_blocks(Index n, Index count) {
  std::vector<std::pair<Index, Index>> out;
  for (Index b = 0; b < count; ++b) {
    const Index lo = b * n / count;
    const Index hi = (b + 1) * n / count;
    out.emplace_back(lo, hi - lo);
  }
  return out;
}

}  // namespace

PatchGrid PatchGrid::make(const ImagingGrid& grid, Index patch_nx, Index patch_nz,
                          double overlap) {
  grid.validate();
  if (patch_nx < 1 || patch_nz < 1) throw ConfigError("patch dimensions must be positive");
  if (patch_nx > grid.nx || patch_nz > grid.nz)
    throw ConfigError("patch is larger than the imaging grid");
  if (!(overlap >= 0.0 && overlap < 1.0)) throw ConfigError("patch overlap must lie in [0, 1)");
  PatchGrid pg;
  pg.patch_nx = patch_nx;
  pg.patch_nz = patch_nz;
  pg.overlap = overlap;
  for (Index ix : patch_starts(grid.nx, patch_nx, overlap))
    for (Index iz : patch_starts(grid.nz, patch_nz, overlap))
      pg.patches.push_back({ix, iz, patch_nx, patch_nz});
  return pg;
}

PatchGrid PatchGrid::tiling(const ImagingGrid& grid, Index count_x, Index count_z) {
  grid.validate();
  if (count_x < 1 || count_z < 1 || count_x > grid.nx || count_z > grid.nz)
    throw ConfigError("tiling counts must lie in [1, grid size]");
  PatchGrid pg;
  pg.overlap = 0.0;
  pg.patch_nx = grid.nx / count_x;
  pg.patch_nz = grid.nz / count_z;
  for (const auto& [ix, nx] : even_blocks(grid.nx, count_x))
    for (const auto& [iz, nz] : even_blocks(grid.nz, count_z)) pg.patches.push_back({ix, iz, nx, nz});
  return pg;
}

Eigen::VectorXi PatchGrid::coverage(const ImagingGrid& grid) const {
  Eigen::VectorXi count = Eigen::VectorXi::Zero(grid.size());
  for (const PatchRect& p : patches)
    for (Index ix = p.ix0; ix < p.ix0 + p.nx; ++ix)
      count.segment(grid.index(ix, p.iz0), p.nz).array() += 1;
  return count;
}

SvdBeamformResult svd_beamform(const UltrafastCompoundMatrix& r, const PatchGrid& patches,
                               CorrectionMode mode) {
  if (patches.patches.empty()) throw ConfigError("patch grid is empty");
  const Index gauge = gauge_angle_index(r.angles);
  const auto n_patch = static_cast<Index>(patches.patches.size());
  std::vector<VectorXcd> images(patches.patches.size());
  std::vector<ExtractedAberration> laws(patches.patches.size());
  std::vector<std::exception_ptr> errors(patches.patches.size());

#pragma omp parallel for schedule(static)
  for (Index k = 0; k < n_patch; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    try {
      const PatchRect& rect = patches.patches[uk];
      const MatrixXcd block = r.patch(rect);
      const PatchSvd<cplx> svd = patch_svd(block, gauge);
      images[uk] = correct_patch(block, svd, mode);
      laws[uk] = extract_aberration(svd, r.angles, r.center_frequency, rect);
    } catch (const PatchTooSmallError& e) {
      errors[uk] = std::make_exception_ptr(
          PatchTooSmallError("patch " + std::to_string(k) + ": " + e.what(), k));
    } catch (...) {
      errors[uk] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  VectorXcd sum = VectorXcd::Zero(r.grid.size());
  Eigen::VectorXi count = Eigen::VectorXi::Zero(r.grid.size());
  for (std::size_t k = 0; k < patches.patches.size(); ++k) {
    const PatchRect& p = patches.patches[k];
    for (Index ix = 0; ix < p.nx; ++ix) {
      const Index dst = r.grid.index(p.ix0 + ix, p.iz0);
      sum.segment(dst, p.nz) += images[k].segment(ix * p.nz, p.nz);
      count.segment(dst, p.nz).array() += 1;
    }
  }
  SvdBeamformResult out;
  out.image.grid = r.grid;
  out.image.pixels = VectorXcd::Zero(r.grid.size());
  for (Index i = 0; i < sum.size(); ++i)
    if (count[i] > 0) out.image.pixels[i] = sum[i] / static_cast<double>(count[i]);
  out.laws = std::move(laws);
  return out;
}

std::vector<SweepEntry> patch_size_sweep(const UltrafastCompoundMatrix& r, Index center_ix,
                                         Index center_iz,
                                         const std::vector<std::pair<Index, Index>>& sizes) {
  const Index gauge = gauge_angle_index(r.angles);
  std::vector<SweepEntry> out;
  for (const auto& [nx, nz] : sizes) {
    const PatchRect rect{center_ix - nx / 2, center_iz - nz / 2, nx, nz};
    if (rect.ix0 < 0 || rect.iz0 < 0 || rect.ix0 + nx > r.grid.nx || rect.iz0 + nz > r.grid.nz)
      throw ConfigError("sweep patch " + std::to_string(nx) + "x" + std::to_string(nz) +
                        " does not fit inside the grid");
    const PatchSvd<cplx> svd = patch_svd(r.patch(rect), gauge);
    SweepEntry e;
    e.rect = rect;
    e.law = extract_aberration(svd, r.angles, r.center_frequency, rect);
    e.singular_values = svd.singular_values;
    e.s_ratio = svd.s_ratio();
    out.push_back(std::move(e));
  }
  if (out.empty()) return out;

  const Index n_ang = r.n_angles();
  VectorXd median(n_ang);
  std::vector<double> column;
  for (Index a = 0; a < n_ang; ++a) {
    column.clear();
    for (const SweepEntry& e : out)
      if (std::isfinite(e.law.phase[a])) column.push_back(e.law.phase[a]);
    if (column.empty()) {
      median[a] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    std::sort(column.begin(), column.end());
    const std::size_t m = column.size() / 2;
    median[a] = column.size() % 2 ? column[m] : 0.5 * (column[m - 1] + column[m]);
  }
  for (SweepEntry& e : out) {
    const R2Result r2 = phase_r2(e.law.phase, median, r.angles, PhaseAlignment::offset);
    e.r2_vs_median = r2.defined ? r2.value : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

SpeedMismatch detect_speed_mismatch(const ExtractedAberration& law) {
  std::vector<Index> use;
  for (Index a = 0; a < law.angles.size(); ++a)
    if (!law.masked[static_cast<std::size_t>(a)] && std::isfinite(law.phase[a])) use.push_back(a);
  if (use.size() < 5) throw FitError("quadratic phase fit needs at least 5 usable angles");
  MatrixXd design(static_cast<Index>(use.size()), 3);
  VectorXd rhs(design.rows());
  for (std::size_t i = 0; i < use.size(); ++i) {
    const double t = law.angles[use[i]];
    design.row(static_cast<Index>(i)) << 1.0, t, t * t;
    rhs[static_cast<Index>(i)] = law.phase[use[i]];
  }
  Eigen::ColPivHouseholderQR<MatrixXd> qr(design);
  if (qr.rank() < 3) throw FitError("quadratic phase fit is rank-deficient");
  const VectorXd c = qr.solve(rhs);
  SpeedMismatch out;
  out.offset = c[0];
  out.linear = c[1];
  out.quadratic_coeff = c[2];
  out.curvature_sign = (c[2] > 0.0) - (c[2] < 0.0);
  return out;
}

}  // namespace svdbf
