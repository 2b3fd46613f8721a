#pragma once

#include <cmath>
#include <vector>

#include "svdbf/errors.hpp"
#include "svdbf/types.hpp"

namespace svdbf {

/// Angular covariance C = R^H R of a patch.
struct CoherenceMatrix {
  MatrixXcd values;
  bool normalized = false;
  VectorXd angles;
  std::vector<bool> masked;  // zero-energy columns (normalized form only)
};

/// Normalised form divides entry (i, j) by sqrt(C_ii C_jj); rows and columns of
/// zero-energy angles are set to zero and flagged in `masked`.
template <typename Derived>
CoherenceMatrix angular_coherence(const Eigen::MatrixBase<Derived>& r, bool normalized,
                                  const VectorXd& angles = {}) {
  const MatrixXcd m = r.template cast<cplx>();
  if (!m.allFinite()) throw DegenerateError("coherence input contains non-finite entries");
  if (angles.size() != 0 && angles.size() != m.cols())
    throw ShapeError("angle count differs from the number of columns");
  CoherenceMatrix c;
  c.values = m.adjoint() * m;
  c.normalized = normalized;
  c.angles = angles;
  const Index n = m.cols();
  c.masked.assign(static_cast<std::size_t>(n), false);
  if (!normalized) return c;

  VectorXd scale(n);
  for (Index i = 0; i < n; ++i) {
    const double e = std::real(c.values(i, i));
    c.masked[static_cast<std::size_t>(i)] = !(e > 0.0);
    scale[i] = e > 0.0 ? 1.0 / std::sqrt(e) : 0.0;
  }
  c.values = scale.asDiagonal() * c.values * scale.asDiagonal();
  for (Index i = 0; i < n; ++i)
    if (!c.masked[static_cast<std::size_t>(i)]) c.values(i, i) = 1.0;
  return c;
}

/// curve[k] = mean |C(i, i + k)| over the k-th superdiagonal, skipping masked angles.
VectorXd coherence_factor_curve(const CoherenceMatrix& c);

struct TriangleFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double zero_lag_extrapolation = 0.0;  // the fitted line at lag 0
  Index last_lag = 0;
};

/// Line fitted over lags [1, L], L = min(first lag below 0.1, n / 2).
TriangleFit triangle_fit(const VectorXd& curve);

}  // namespace svdbf
