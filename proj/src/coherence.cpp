#include "svdbf/coherence.hpp"

namespace svdbf {

VectorXd coherence_factor_curve(const CoherenceMatrix& c) {
  if (!c.normalized) throw ConfigError("coherence curve needs a normalized coherence matrix");
  const Index n = c.values.rows();
  const auto masked = [&](Index i) {
    return !c.masked.empty() && c.masked[static_cast<std::size_t>(i)];
  };
  VectorXd curve = VectorXd::Zero(n);
  for (Index k = 0; k < n; ++k) {
    double sum = 0.0;
    Index count = 0;
    for (Index i = 0; i + k < n; ++i) {
      if (masked(i) || masked(i + k)) continue;
      sum += std::abs(c.values(i, i + k));
      ++count;
    }
    curve[k] = count > 0 ? sum / static_cast<double>(count) : 0.0;
  }
  return curve;
}

TriangleFit triangle_fit(const VectorXd& curve) {
  const Index n = curve.size();
  if (n < 4) throw FitError("coherence curve needs at least 4 lags");
  Index last = n / 2;
  for (Index k = 1; k <= n / 2; ++k) {
    if (curve[k] < 0.1) {
      last = k;
      break;
    }
  }
  if (last < 2) throw FitError("fewer than 2 usable lags for the triangle fit");

  const Index m = last;
  VectorXd lag = VectorXd::LinSpaced(m, 1.0, static_cast<double>(last));
  const VectorXd y = curve.segment(1, m);
  const double lag_mean = lag.mean();
  const double y_mean = y.mean();
  const VectorXd dl = lag.array() - lag_mean;
  const VectorXd dy = y.array() - y_mean;

  TriangleFit fit;
  fit.last_lag = last;
  fit.slope = dl.dot(dy) / dl.squaredNorm();
  fit.intercept = y_mean - fit.slope * lag_mean;
  fit.zero_lag_extrapolation = fit.intercept;
  const double ss_tot = dy.squaredNorm();
  const VectorXd resid = y - (fit.intercept + fit.slope * lag.array()).matrix();
  fit.r2 = ss_tot > 0.0 ? 1.0 - resid.squaredNorm() / ss_tot : (resid.squaredNorm() == 0.0 ? 1.0 : 0.0);
  return fit;
}

}  // namespace svdbf
