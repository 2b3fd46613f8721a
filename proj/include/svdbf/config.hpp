#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "svdbf/arraysim.hpp"
#include "svdbf/beamform.hpp"
#include "svdbf/io.hpp"
#include "svdbf/svdcore.hpp"

namespace svdbf {

struct AnglesConfig {
  Index count = 32;
  double span_deg = 18.0;
  bool operator==(const AnglesConfig&) const = default;
};

struct GridConfig {
  Index nx = 96;
  Index nz = 128;
  double z0 = 9.5e-3;
  double dx_wavelengths = 0.5;
  double dz_wavelengths = 0.5;
  bool operator==(const GridConfig&) const = default;
};

struct BeamformConfig {
  double f_number = 1.0;
  double sound_speed = 0.0;  // 0: the array's own sound speed
  bool operator==(const BeamformConfig&) const = default;
};

enum class AberrationKind { none, angular_file, angular_random, screen };

struct AberrationConfig {
  AberrationKind kind = AberrationKind::none;
  std::string law_file;                 // angular_file: CSV angle_deg,delay_s[,amplitude]
  double peak_to_peak_phase = 3.14159;  // angular_random, rad
  double correlation_angle_deg = 6.0;   // angular_random
  double rms_delay = 1.0e-7;            // screen, s
  double correlation_length = 2.0e-3;   // screen, m
  bool operator==(const AberrationConfig&) const = default;
};

struct CorrectionConfig {
  Index patch_nx = 32;
  Index patch_nz = 32;
  double overlap = 0.5;
  CorrectionMode mode = CorrectionMode::phase_conjugate;
  bool operator==(const CorrectionConfig&) const = default;
};

struct RunConfig {
  std::uint64_t seed = 1;  // phantom uses seed, the aberration draw seed + 1
  int threads = 1;
  std::string output_dir = "out";
  ImageFormat format = ImageFormat::pgm;
  double dynamic_range_db = 60.0;
  bool operator==(const RunConfig&) const = default;
};

struct ExperimentConfig {
  TransducerArray array;
  PulseModel pulse;
  PhantomSpec phantom;
  AnglesConfig angles;
  GridConfig grid;
  BeamformConfig beamform;
  AberrationConfig aberration;
  CorrectionConfig correction;
  RunConfig run;

  /// 64 elements, 32 angles over +-18 deg, anechoic cyst between two pins.
  static ExperimentConfig desk();
  /// 192 elements, 100 angles, 50 mm depth, 10 x 70 wavelength patches.
  static ExperimentConfig paper_scale();

  void validate() const;
  void set_seed(std::uint64_t seed);
  std::uint64_t aberration_seed() const { return run.seed + 1; }
  VectorXd steering() const;
  ImagingGrid imaging_grid() const;
  PatchGrid patch_grid() const;
  /// Array description used by the beamformer (sound speed override applied).
  TransducerArray beamforming_array() const;

  bool operator==(const ExperimentConfig&) const = default;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const ExperimentConfig& config);

std::string to_string(AberrationKind kind);
std::string to_string(CorrectionMode mode);
CorrectionMode parse_correction_mode(const std::string& name);

}  // namespace svdbf
