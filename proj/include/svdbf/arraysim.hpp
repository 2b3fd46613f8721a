#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "svdbf/errors.hpp"
#include "svdbf/types.hpp"

namespace svdbf {

/// Linear probe centred on x = 0 at z = 0.
struct TransducerArray {
  Index n_elements = 64;
  double pitch = 0.2e-3;              // m
  double center_frequency = 6.25e6;   // Hz
  double sampling_frequency = 25e6;   // Hz
  double sound_speed = 1540.0;        // m/s, beamforming reference

  void validate() const;
  VectorXd element_x() const;
  double wavelength() const { return sound_speed / center_frequency; }
  bool operator==(const TransducerArray&) const = default;
};

/// Gaussian-enveloped complex analytic pulse
/// g(t) = exp(-t^2 / (2 sigma^2)) exp(i 2 pi f0 t), sigma = n_cycles / (2.355 f0).
struct PulseModel {
  double center_frequency = 6.25e6;
  double n_cycles = 2.0;

  double sigma() const { return n_cycles / (2.355 * center_frequency); }
  /// Half-width beyond which |g| < 3e-16; samples outside are not synthesised.
  double support() const { return 8.5 * sigma(); }
  cplx operator()(double t) const;
  void validate() const;
  bool operator==(const PulseModel&) const = default;
};

struct ScattererField {
  VectorXd x;
  VectorXd z;
  VectorXd reflectivity;

  Index size() const { return x.size(); }
  void validate() const;
  /// Concatenation, `other` appended after this field's scatterers.
  ScattererField merged(const ScattererField& other) const;
};

struct Pin {
  double x = 0.0;
  double z = 0.0;
  double amplitude = 1.0;
  bool operator==(const Pin&) const = default;
};

struct Cyst {
  double center_x = 0.0;
  double center_z = 0.0;
  double radius = 0.0;
  double echogenicity = 0.0;  // 0 = anechoic
  bool operator==(const Cyst&) const = default;
};

struct PhantomSpec {
  double x_min = -6.5e-3;
  double x_max = 6.5e-3;
  double z_min = 8.5e-3;
  double z_max = 26.0e-3;
  double speckle_density = 2.0;  // scatterers per squared wavelength
  std::vector<Pin> pins;
  std::vector<Cyst> cysts;
  std::uint64_t seed = 1;
  bool operator==(const PhantomSpec&) const = default;
};

/// Per-transmit delay/amplitude law (the diagonal aberrator in the plane-wave basis).
struct AngularAberration {
  VectorXd angles;      // rad
  VectorXd delays;      // s
  VectorXd amplitudes;  // dimensionless, >= 0

  static AngularAberration none(const VectorXd& angles);
  void validate() const;
  /// Narrowband complex factor amplitude * exp(-i 2 pi f0 delay) per angle.
  VectorXcd complex_law(double f0) const;
};

/// Near-field phase screen on the elements, traversed on transmit and receive.
struct ElementScreen {
  VectorXd delays;      // s per element
  VectorXd amplitudes;  // per element
  double correlation_length = 0.0;  // m, metadata
  double rms_delay = 0.0;           // s, metadata

  static ElementScreen identity(Index n_elements);
  void validate(Index n_elements) const;
  /// Delay at lateral position x, linearly interpolated between elements and
  /// clamped to the end elements.
  double delay_at(const VectorXd& element_x, double x) const;
};

/// Complex analytic channel data. One column per (angle, element) trace,
/// column index = angle * n_elements + element, time down the rows.
struct RFDataSet {
  MatrixXcd traces;
  double t0 = 0.0;
  double sampling_frequency = 0.0;
  VectorXd angles;
  TransducerArray array;

  Index n_angles() const { return angles.size(); }
  Index n_elements() const { return array.n_elements; }
  Index n_samples() const { return traces.rows(); }
  auto trace(Index angle, Index element) { return traces.col(angle * array.n_elements + element); }
  auto trace(Index angle, Index element) const {
    return traces.col(angle * array.n_elements + element);
  }
};

struct SimulationWindow {
  double t0 = 0.0;
  Index n_samples = 0;  // 0: sized to hold every echo plus the pulse support
};

/// Symmetric, uniformly spaced steering angles spanning [-span, +span].
VectorXd steering_angles(Index count, double span_rad);

ScattererField build_phantom(const PhantomSpec& spec, double wavelength);

/// Single-scattering synthesis of every (angle, element) trace. The plane wave
/// launches with zero delay at the array centre; receive amplitude decays as
/// 1/distance. A screen delays each element on receive and delays the
/// transmit ray at its launch point x - z tan(theta).
RFDataSet simulate_rf(const TransducerArray& array, const PulseModel& pulse,
                      const ScattererField& field, const VectorXd& angles,
                      const std::optional<ElementScreen>& screen = std::nullopt,
                      const SimulationWindow& window = {});

/// Exact fractional delay of every trace of angle i by law.delays[i] using a
/// frequency-domain phase ramp, then scaling by law.amplitudes[i].
RFDataSet apply_angular_delay(const RFDataSet& rf, const AngularAberration& law);

ElementScreen sample_correlated_screen(const TransducerArray& array, double rms_delay,
                                       double correlation_length, std::uint64_t seed);

/// Smooth random angular law: a Gaussian process over the steering angle with
/// Gaussian covariance of width `correlation_angle`, rescaled so that the
/// narrowband phase 2 pi f0 delay spans `peak_to_peak_phase`.
AngularAberration random_smooth_angular_law(const VectorXd& angles, double f0,
                                            double peak_to_peak_phase, double correlation_angle,
                                            std::uint64_t seed);

namespace detail {
/// Draws from N(0, cov) by symmetric square-root factorisation of `cov`.
VectorXd sample_gaussian_process(const MatrixXd& cov, std::uint64_t seed);
}  // namespace detail

}  // namespace svdbf
