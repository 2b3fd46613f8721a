#pragma once

#include <cmath>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "svdbf/beamform.hpp"
#include "svdbf/errors.hpp"
#include "svdbf/types.hpp"

namespace svdbf {

/// Singular triplets of a [pixels x angles] patch of R.
///
/// Columns of `angular_vectors` are the right singular vectors v_i, the
/// columns of `spatial_vectors` the left ones u_i = R v_i / s_i. Each v_i is
/// gauge-fixed so that its entry at `gauge_index` is real and >= 0; u_i
/// inherits the same phase.
template <typename Scalar>
struct PatchSvd {
  using Real = typename Eigen::NumTraits<Scalar>::Real;

  Vector<Real> singular_values;   // descending
  Matrix<Scalar> spatial_vectors;  // n_pix x n_angles, zero column where s_i = 0
  Matrix<Scalar> angular_vectors;  // n_angles x n_angles
  Index gauge_index = 0;           // reference entry actually used for v_1
  Vector<Real> gauge_phases;       // phase removed from each v_i
  bool degenerate = false;         // s1 - s2 < 1e-9 s1: v_1 is an arbitrary pick

  auto spatial_vector() const { return spatial_vectors.col(0); }
  auto angular_vector() const { return angular_vectors.col(0); }
  Real s_ratio() const {
    if (singular_values.size() < 2 || singular_values[1] == Real(0))
      return std::numeric_limits<Real>::infinity();
    return singular_values[0] / singular_values[1];
  }
};

/// Index of the steering angle closest to broadside (first one on ties).
Index gauge_angle_index(const VectorXd& angles);

/// SVD of a patch through the n_angles x n_angles Gram matrix R^H R.
///
/// Singular values are taken as ||R v_i|| rather than sqrt(eig_i), which keeps
/// the small ones accurate to working precision relative to s_1. On a tie
/// (degenerate = true) the vector reported first is an arbitrary but
/// deterministic member of the tied subspace.
template <typename Derived>
PatchSvd<typename Derived::Scalar> patch_svd(const Eigen::MatrixBase<Derived>& r,
                                             Index gauge_index) {
  using Scalar = typename Derived::Scalar;
  using Real = typename Eigen::NumTraits<Scalar>::Real;
  const Index n_pix = r.rows();
  const Index n_ang = r.cols();
  if (n_pix < n_ang)
    throw PatchTooSmallError("patch has " + std::to_string(n_pix) + " pixels for " +
                             std::to_string(n_ang) + " angles");
  if (n_ang < 1) throw ShapeError("patch has no angle columns");
  if (gauge_index < 0 || gauge_index >= n_ang) throw ShapeError("gauge index out of range");
  const Matrix<Scalar> m = r;
  if (!m.allFinite()) throw DegenerateError("patch contains non-finite entries");

  const Matrix<Scalar> gram = m.adjoint() * m;
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(gram);
  if (es.info() != Eigen::Success) throw DegenerateError("eigendecomposition failed");
  Matrix<Scalar> v = es.eigenvectors().rowwise().reverse();

  PatchSvd<Scalar> out;
  out.gauge_phases.resize(n_ang);
  Vector<Index> ref_index(n_ang);
  for (Index i = 0; i < n_ang; ++i) {
    Index ref = gauge_index;
    if (std::abs(v(ref, i)) <= Real(64) * std::numeric_limits<Real>::epsilon())
      v.col(i).cwiseAbs().maxCoeff(&ref);
    const Real phase = std::arg(v(ref, i));
    v.col(i) *= std::polar(Real(1), -phase);
    v(ref, i) = Scalar(std::real(v(ref, i)));
    out.gauge_phases[i] = phase;
    ref_index[i] = ref;
  }

  const Matrix<Scalar> rv = m * v;
  const Vector<Real> norms = rv.colwise().norm();
  std::vector<Index> order(static_cast<std::size_t>(n_ang));
  std::iota(order.begin(), order.end(), Index(0));
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return norms[a] > norms[b]; });

  out.singular_values.resize(n_ang);
  out.angular_vectors.resize(n_ang, n_ang);
  out.spatial_vectors = Matrix<Scalar>::Zero(n_pix, n_ang);
  Vector<Real> phases(n_ang);
  for (Index k = 0; k < n_ang; ++k) {
    const Index src = order[static_cast<std::size_t>(k)];
    out.singular_values[k] = norms[src];
    out.angular_vectors.col(k) = v.col(src);
    phases[k] = out.gauge_phases[src];
    if (norms[src] > Real(0)) out.spatial_vectors.col(k) = rv.col(src) / norms[src];
  }
  out.gauge_phases = phases;
  out.gauge_index = ref_index[order.front()];

  const Real s1 = out.singular_values[0];
  if (!(s1 > Real(0))) throw DegenerateError("patch has zero energy (s1 = 0)");
  out.degenerate = n_ang > 1 && (s1 - out.singular_values[1]) < Real(1e-9) * s1;
  if (out.degenerate) {
    // Tie-break: lexicographically largest gauged vector (real, then imaginary
    // part, entry by entry) among the tied columns goes first. The values stay
    // sorted; they agree to 1e-9 relative.
    const auto lex_greater = [&](Index a, Index b) {
      for (Index i = 0; i < n_ang; ++i) {
        const Scalar x = out.angular_vectors(i, a);
        const Scalar y = out.angular_vectors(i, b);
        if (std::real(x) != std::real(y)) return std::real(x) > std::real(y);
        if (std::imag(x) != std::imag(y)) return std::imag(x) > std::imag(y);
      }
      return false;
    };
    Index best = 0;
    for (Index k = 1; k < n_ang && (s1 - out.singular_values[k]) < Real(1e-9) * s1; ++k)
      if (lex_greater(k, best)) best = k;
    if (best != 0) {
      out.angular_vectors.col(0).swap(out.angular_vectors.col(best));
      out.spatial_vectors.col(0).swap(out.spatial_vectors.col(best));
      std::swap(out.gauge_phases[0], out.gauge_phases[best]);
      out.gauge_index = ref_index[order[static_cast<std::size_t>(best)]];
    }
  }
  return out;
}

/// Per-angle aberration recovered from the leading angular vector.
///
/// `phase` is the narrowband delay phase 2 pi f0 tau of the aberration, i.e.
/// the aberrator multiplies transmit theta by amplitude * exp(-i phase). It is
/// unwrapped outward from the gauge angle, where it is exactly 0.
struct ExtractedAberration {
  VectorXd angles;
  VectorXd phase;      // rad, NaN where masked
  VectorXd amplitude;  // unit mean
  std::vector<bool> masked;
  PatchRect source_patch;
  double s_ratio = 0.0;
  double center_frequency = 0.0;
  Index gauge_index = 0;

  VectorXd delays() const { return phase / (kTwoPi * center_frequency); }
  /// Equivalent delay/amplitude law; masked angles get zero delay.
  AngularAberration as_law() const;
};

ExtractedAberration extract_aberration(const PatchSvd<cplx>& svd, const VectorXd& angles,
                                       double f0, const PatchRect& source = {});

/// Adds multiples of 2 pi so that consecutive entries differ by at most pi,
/// walking outward from `anchor`, which is left untouched. Masked entries are
/// skipped.
VectorXd unwrap_phase(const VectorXd& wrapped, Index anchor,
                      const std::vector<bool>& masked = {});

enum class CorrectionMode { rank1, phase_conjugate };

/// Corrected patch image (one value per patch pixel).
///  rank1:           s1 * ||v1||_1 * u1, the compound of the rank-1 part of R
///                   after unit-modulus phase correction.
///  phase_conjugate: R * (v1 / |v1|), the per-angle phase correction alone.
VectorXcd correct_patch(const MatrixXcd& r_patch, const PatchSvd<cplx>& svd, CorrectionMode mode);
VectorXcd correct_patch(const MatrixXcd& r_patch, Index gauge_index, CorrectionMode mode);

/// s1 u1 v1^H
MatrixXcd rank1_reconstruction(const PatchSvd<cplx>& svd);

/// Isoplanatic patches covering an imaging grid.
struct PatchGrid {
  Index patch_nx = 0;
  Index patch_nz = 0;
  double overlap = 0.5;
  std::vector<PatchRect> patches;

  /// Regular tiling with step round(size * (1 - overlap)); a final patch is
  /// aligned to the far edge when the steps do not land on it.
  static PatchGrid make(const ImagingGrid& grid, Index patch_nx, Index patch_nz,
                        double overlap = 0.5);
  /// count_x x count_z non-overlapping blocks whose sizes differ by at most one pixel.
  static PatchGrid tiling(const ImagingGrid& grid, Index count_x, Index count_z);
  /// Number of patches covering each pixel.
  Eigen::VectorXi coverage(const ImagingGrid& grid) const;
};

struct SvdBeamformResult {
  ComplexImage image;
  std::vector<ExtractedAberration> laws;  // one per patch, patch order
};

/// Patch-wise correction; pixels covered by several patches take the mean.
SvdBeamformResult svd_beamform(const UltrafastCompoundMatrix& r, const PatchGrid& patches,
                               CorrectionMode mode);

struct SweepEntry {
  PatchRect rect;
  ExtractedAberration law;
  VectorXd singular_values;
  double s_ratio = 0.0;
  double r2_vs_median = 0.0;  // offset-aligned, against the per-angle median law
};

/// Concentric patches of the given (nx, nz) sizes around a centre pixel.
std::vector<SweepEntry> patch_size_sweep(const UltrafastCompoundMatrix& r, Index center_ix,
                                         Index center_iz,
                                         const std::vector<std::pair<Index, Index>>& sizes);

struct SpeedMismatch {
  double offset = 0.0;
  double linear = 0.0;
  double quadratic_coeff = 0.0;  // rad / rad^2
  int curvature_sign = 0;
};

/// Least-squares fit phase(theta) = c0 + c1 theta + c2 theta^2.
///
/// Beamforming with a sound speed above the true one gives c2 > 0, below gives
/// c2 < 0 (checked at 2% mismatch on a patch centred on a bright point). In
/// pure speckle the curvature at that mismatch is below the seed-to-seed noise.
SpeedMismatch detect_speed_mismatch(const ExtractedAberration& law);

}  // namespace svdbf
