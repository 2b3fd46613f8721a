#include "svdbf/arraysim.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/FFT>

namespace svdbf {

void TransducerArray::validate() const {
  if (n_elements < 2) throw ConfigError("array needs at least 2 elements");
  if (!(pitch > 0.0)) throw ConfigError("array pitch must be positive");
  if (!(center_frequency > 0.0)) throw ConfigError("center frequency must be positive");
  if (!(sound_speed > 0.0)) throw ConfigError("sound speed must be positive");
  if (!(sampling_frequency >= 4.0 * center_frequency))
    throw ConfigError("sampling frequency must be at least 4x the center frequency");
}

VectorXd TransducerArray::element_x() const {
  const double mid = 0.5 * static_cast<double>(n_elements - 1);
  return VectorXd::NullaryExpr(n_elements, [&](Index i) {
    return (static_cast<double>(i) - mid) * pitch;
  });
}

cplx PulseModel::operator()(double t) const {
  const double s = sigma();
  return std::exp(-t * t / (2.0 * s * s)) * std::polar(1.0, kTwoPi * center_frequency * t);
}

void PulseModel::validate() const {
  if (!(center_frequency > 0.0)) throw ConfigError("pulse center frequency must be positive");
  if (!(n_cycles > 0.0)) throw ConfigError("pulse n_cycles must be positive");
}

void ScattererField::validate() const {
  if (z.size() != x.size() || reflectivity.size() != x.size())
    throw ShapeError("scatterer positions and reflectivities differ in length");
  for (Index k = 0; k < z.size(); ++k) {
    if (!(z[k] > 0.0)) throw ConfigError("scatterer " + std::to_string(k) + " has z <= 0");
  }
}

ScattererField ScattererField::merged(const ScattererField& other) const {
  ScattererField out;
  out.x.resize(size() + other.size());
  out.z.resize(out.x.size());
  out.reflectivity.resize(out.x.size());
  out.x << x, other.x;
  out.z << z, other.z;
  out.reflectivity << reflectivity, other.reflectivity;
  return out;
}

AngularAberration AngularAberration::none(const VectorXd& angles) {
  return {angles, VectorXd::Zero(angles.size()), VectorXd::Ones(angles.size())};
}

void AngularAberration::validate() const {
  if (delays.size() != angles.size() || amplitudes.size() != angles.size())
    throw ShapeError("angular law fields differ in length");
  if ((amplitudes.array() < 0.0).any()) throw ConfigError("angular law amplitudes must be >= 0");
}

VectorXcd AngularAberration::complex_law(double f0) const {
  validate();
  VectorXcd a(angles.size());
  for (Index i = 0; i < a.size(); ++i) a[i] = std::polar(amplitudes[i], -kTwoPi * f0 * delays[i]);
  return a;
}

ElementScreen ElementScreen::identity(Index n_elements) {
  ElementScreen s;
  s.delays = VectorXd::Zero(n_elements);
  s.amplitudes = VectorXd::Ones(n_elements);
  return s;
}

void ElementScreen::validate(Index n_elements) const {
  if (delays.size() != n_elements || amplitudes.size() != n_elements)
    throw ShapeError("screen length differs from the number of elements");
  if ((amplitudes.array() < 0.0).any()) throw ConfigError("screen amplitudes must be >= 0");
}

double ElementScreen::delay_at(const VectorXd& element_x, double x) const {
  const Index n = element_x.size();
  if (x <= element_x[0]) return delays[0];
  if (x >= element_x[n - 1]) return delays[n - 1];
  const double pitch = element_x[1] - element_x[0];
  const double pos = (x - element_x[0]) / pitch;
  const Index i = std::min<Index>(static_cast<Index>(pos), n - 2);
  const double f = pos - static_cast<double>(i);
  return (1.0 - f) * delays[i] + f * delays[i + 1];
}

VectorXd steering_angles(Index count, double span_rad) {
  if (count < 1) throw ConfigError("need at least one steering angle");
  if (count == 1) return VectorXd::Zero(1);
  return VectorXd::LinSpaced(count, -span_rad, span_rad);
}

ScattererField build_phantom(const PhantomSpec& spec, double wavelength) {
  if (!(spec.x_max > spec.x_min) || !(spec.z_max > spec.z_min))
    throw ConfigError("phantom extent is empty");
  if (!(spec.z_min > 0.0)) throw ConfigError("phantom must lie in front of the array (z > 0)");
  if (spec.speckle_density < 0.0) throw ConfigError("speckle density must be >= 0");
  for (const auto& c : spec.cysts) {
    if (c.radius < 0.0) throw ConfigError("cyst radius must be >= 0");
    if (c.echogenicity < 0.0) throw ConfigError("cyst echogenicity must be >= 0");
  }
  for (const auto& p : spec.pins) {
    if (!(p.z > 0.0)) throw ConfigError("pin must lie in front of the array (z > 0)");
  }

  const double area = (spec.x_max - spec.x_min) * (spec.z_max - spec.z_min);
  const auto n_speckle =
      static_cast<Index>(std::llround(spec.speckle_density * area / (wavelength * wavelength)));
  const Index n_total = n_speckle + static_cast<Index>(spec.pins.size());

  ScattererField field;
  field.x.resize(n_total);
  field.z.resize(n_total);
  field.reflectivity.resize(n_total);

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> ux(spec.x_min, spec.x_max);
  std::uniform_real_distribution<double> uz(spec.z_min, spec.z_max);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index k = 0; k < n_speckle; ++k) {
    field.x[k] = ux(rng);
    field.z[k] = uz(rng);
    field.reflectivity[k] = normal(rng);
    for (const auto& c : spec.cysts) {
      const double dx = field.x[k] - c.center_x;
      const double dz = field.z[k] - c.center_z;
      if (dx * dx + dz * dz <= c.radius * c.radius) field.reflectivity[k] *= c.echogenicity;
    }
  }
  for (std::size_t i = 0; i < spec.pins.size(); ++i) {
    const Index k = n_speckle + static_cast<Index>(i);
    field.x[k] = spec.pins[i].x;
    field.z[k] = spec.pins[i].z;
    field.reflectivity[k] = spec.pins[i].amplitude;
  }
  return field;
}

RFDataSet simulate_rf(const TransducerArray& array, const PulseModel& pulse,
                      const ScattererField& field, const VectorXd& angles,
                      const std::optional<ElementScreen>& screen, const SimulationWindow& window) {
  array.validate();
  pulse.validate();
  field.validate();
  if (angles.size() == 0) throw ConfigError("simulate_rf needs at least one angle");
  const ElementScreen scr = screen ? *screen : ElementScreen::identity(array.n_elements);
  scr.validate(array.n_elements);

  const Index n_el = array.n_elements;
  const Index n_ang = angles.size();
  const Index n_sc = field.size();
  const double c = array.sound_speed;
  const double fs = array.sampling_frequency;
  const double dt = 1.0 / fs;
  const VectorXd ex = array.element_x();

  // Transmit arrival per (scatterer, angle), launch delay included.
  MatrixXd tx(n_sc, n_ang);
  for (Index a = 0; a < n_ang; ++a) {
    const double ca = std::cos(angles[a]);
    const double sa = std::sin(angles[a]);
    const double ta = std::tan(angles[a]);
    for (Index k = 0; k < n_sc; ++k) {
      tx(k, a) = (field.z[k] * ca + field.x[k] * sa) / c +
                 scr.delay_at(ex, field.x[k] - field.z[k] * ta);
    }
  }

  // Earliest and latest arrival of each scatterer over all traces.
  VectorXd t_first(n_sc), t_last(n_sc);
  for (Index k = 0; k < n_sc; ++k) {
    double rx_min = std::numeric_limits<double>::infinity();
    double rx_max = -rx_min;
    for (Index j = 0; j < n_el; ++j) {
      const double dx = field.x[k] - ex[j];
      const double rx = std::sqrt(dx * dx + field.z[k] * field.z[k]) / c + scr.delays[j];
      rx_min = std::min(rx_min, rx);
      rx_max = std::max(rx_max, rx);
    }
    t_first[k] = tx.row(k).minCoeff() + rx_min;
    t_last[k] = tx.row(k).maxCoeff() + rx_max;
  }

  const double support = pulse.support();
  const Index half = static_cast<Index>(std::ceil(support * fs));
  Index n_samples = window.n_samples;
  if (n_samples <= 0) {
    const double t_end = n_sc > 0 ? t_last.maxCoeff() + support : window.t0 + support;
    n_samples = std::max<Index>(2, static_cast<Index>(std::ceil((t_end - window.t0) * fs)) + 2);
  } else {
    const double t_end = window.t0 + static_cast<double>(n_samples - 1) * dt;
    for (Index k = 0; k < n_sc; ++k) {
      if (t_first[k] < window.t0 || t_last[k] > t_end) {
        std::ostringstream os;
        os << "scatterer " << k << " at (" << field.x[k] << ", " << field.z[k]
           << ") m arrives outside the temporal window";
        throw WindowError(k, os.str());
      }
    }
  }

  // g(m dt - delta) = C(delta) * E(delta)^m * table[m]
  const double sigma = pulse.sigma();
  const double omega = kTwoPi * pulse.center_frequency;
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  VectorXcd table(2 * half + 1);
  for (Index m = -half; m <= half; ++m) {
    const double u = static_cast<double>(m) * dt;
    table[m + half] = std::exp(-u * u * inv2s2) * std::polar(1.0, omega * u);
  }

  RFDataSet rf;
  rf.traces = MatrixXcd::Zero(n_samples, n_ang * n_el);
  rf.t0 = window.t0;
  rf.sampling_frequency = fs;
  rf.angles = angles;
  rf.array = array;

  const Index n_traces = n_ang * n_el;
#pragma omp parallel for schedule(static)
  for (Index col = 0; col < n_traces; ++col) {
    const Index a = col / n_el;
    const Index j = col % n_el;
    cplx* out = rf.traces.col(col).data();
    for (Index k = 0; k < n_sc; ++k) {
      const double beta = field.reflectivity[k];
      if (beta == 0.0) continue;
      const double dx = field.x[k] - ex[j];
      const double dist = std::sqrt(dx * dx + field.z[k] * field.z[k]);
      const double tau = tx(k, a) + (dist / c + scr.delays[j]);
      const double amp = (beta * scr.amplitudes[j]) / dist;

      const double pos = (tau - rf.t0) * fs;
      const auto nc = static_cast<Index>(std::llround(pos));
      const double delta = (pos - static_cast<double>(nc)) * dt;
      const cplx scale = amp * std::exp(-delta * delta * inv2s2) * std::polar(1.0, -omega * delta);
      const double step = std::exp(dt * delta / (sigma * sigma));

      double e = 1.0;
      for (Index m = 0; m <= half; ++m) {
        const Index n = nc + m;
        if (n >= n_samples) break;
        if (n >= 0) out[n] += (scale * e) * table[m + half];
        e *= step;
      }
      const double back = 1.0 / step;
      e = back;
      for (Index m = -1; m >= -half; --m) {
        const Index n = nc + m;
        if (n < 0) break;
        if (n < n_samples) out[n] += (scale * e) * table[m + half];
        e *= back;
      }
    }
  }
  return rf;
}

RFDataSet apply_angular_delay(const RFDataSet& rf, const AngularAberration& law) {
  law.validate();
  if (law.angles.size() != rf.n_angles())
    throw ShapeError("angular law has " + std::to_string(law.angles.size()) +
                     " angles, data has " + std::to_string(rf.n_angles()));
  if (rf.n_angles() > 0 && (law.angles - rf.angles).cwiseAbs().maxCoeff() > 1e-12)
    throw ShapeError("angular law angles do not match the data angles");

  RFDataSet out = rf;
  const Index n = rf.n_samples();
  const double fs = rf.sampling_frequency;
  const double max_shift = law.delays.size() ? law.delays.cwiseAbs().maxCoeff() * fs : 0.0;
  Index n_fft = 1;
  while (n_fft < n + static_cast<Index>(std::ceil(max_shift)) + 2) n_fft <<= 1;

  Eigen::FFT<double> fft;
  std::vector<cplx> buf(n_fft), spec(n_fft), back(n_fft);
  for (Index a = 0; a < rf.n_angles(); ++a) {
    const double d = law.delays[a];
    const double amp = law.amplitudes[a];
    if (d == 0.0 && amp == 1.0) continue;

    VectorXcd ramp(n_fft);
    for (Index k = 0; k < n_fft; ++k) {
      const Index kk = k < n_fft / 2 ? k : k - n_fft;
      const double f = static_cast<double>(kk) * fs / static_cast<double>(n_fft);
      ramp[k] = std::polar(amp, -kTwoPi * f * d);
    }
    for (Index j = 0; j < rf.n_elements(); ++j) {
      auto col = out.trace(a, j);
      if (d == 0.0) {
        col *= amp;
        continue;
      }
      std::fill(buf.begin(), buf.end(), cplx{});
      std::copy(col.data(), col.data() + n, buf.begin());
      fft.fwd(spec, buf);
      for (Index k = 0; k < n_fft; ++k) spec[k] *= ramp[k];
      fft.inv(back, spec);
      std::copy(back.begin(), back.begin() + n, col.data());
    }
  }
  return out;
}

namespace detail {

VectorXd sample_gaussian_process(const MatrixXd& cov, std::uint64_t seed) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(cov);
  const VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  VectorXd xi(cov.rows());
  for (Index i = 0; i < xi.size(); ++i) xi[i] = normal(rng);
  return es.eigenvectors() * root.asDiagonal() * xi;
}

}  // namespace detail

ElementScreen sample_correlated_screen(const TransducerArray& array, double rms_delay,
                                       double correlation_length, std::uint64_t seed) {
  array.validate();
  if (!(correlation_length > 0.0)) throw ConfigError("screen correlation length must be > 0");
  if (rms_delay < 0.0) throw ConfigError("screen rms delay must be >= 0");

  ElementScreen s = ElementScreen::identity(array.n_elements);
  s.correlation_length = correlation_length;
  s.rms_delay = rms_delay;
  if (rms_delay == 0.0) return s;

  const VectorXd ex = array.element_x();
  const double inv = 1.0 / (2.0 * correlation_length * correlation_length);
  const MatrixXd cov = MatrixXd::NullaryExpr(ex.size(), ex.size(), [&](Index i, Index j) {
    const double d = ex[i] - ex[j];
    return rms_delay * rms_delay * std::exp(-d * d * inv);
  });
  s.delays = detail::sample_gaussian_process(cov, seed);
  return s;
}

AngularAberration random_smooth_angular_law(const VectorXd& angles, double f0,
                                            double peak_to_peak_phase, double correlation_angle,
                                            std::uint64_t seed) {
  if (!(correlation_angle > 0.0)) throw ConfigError("law correlation angle must be > 0");
  if (peak_to_peak_phase < 0.0) throw ConfigError("law peak-to-peak phase must be >= 0");
  AngularAberration law = AngularAberration::none(angles);
  if (angles.size() < 2 || peak_to_peak_phase == 0.0) return law;

  const double inv = 1.0 / (2.0 * correlation_angle * correlation_angle);
  const MatrixXd cov = MatrixXd::NullaryExpr(angles.size(), angles.size(), [&](Index i, Index j) {
    const double d = angles[i] - angles[j];
    return std::exp(-d * d * inv);
  });
  VectorXd phase = detail::sample_gaussian_process(cov, seed);
  const double span = phase.maxCoeff() - phase.minCoeff();
  if (span == 0.0) return law;
  phase *= peak_to_peak_phase / span;
  phase.array() -= phase.mean();
  law.delays = phase / (kTwoPi * f0);
  return law;
}

}  // namespace svdbf
