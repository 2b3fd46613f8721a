#include "svdbf/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <thread>

#include <sys/utsname.h>

#include "svdbf/coherence.hpp"
#include "svdbf/metrics.hpp"
#include "svdbf/parallel.hpp"

namespace svdbf {

AngularAberration load_angular_law(const std::filesystem::path& path, const VectorXd& angles) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot open angular law " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.find_first_of("0123456789") == std::string::npos) continue;
    if (std::isalpha(static_cast<unsigned char>(line.front()))) continue;  // header
    std::vector<double> row;
    std::stringstream fields(line);
    std::string field;
    while (std::getline(fields, field, ',')) {
      try {
        row.push_back(std::stod(field));
      } catch (const std::exception&) {
        throw ConfigError("malformed value '" + field + "' in " + path.string());
      }
    }
    if (row.size() < 2 || row.size() > 3)
      throw ConfigError("angular law rows need angle_deg,delay_s[,amplitude]");
    rows.push_back(std::move(row));
  }
  const auto n = static_cast<Index>(rows.size());
  if (n != angles.size())
    throw ConfigError("angular law has " + std::to_string(n) + " rows for " +
                      std::to_string(angles.size()) + " steering angles");
  AngularAberration law = AngularAberration::none(angles);
  for (Index a = 0; a < n; ++a) {
    const auto& row = rows[static_cast<std::size_t>(a)];
    if (std::abs(deg2rad(row[0]) - angles[a]) > 1e-6)
      throw ConfigError("angular law angle " + std::to_string(row[0]) +
                        " deg does not match the steering angles");
    law.delays[a] = row[1];
    if (row.size() == 3) law.amplitudes[a] = row[2];
  }
  law.validate();
  return law;
}

Acquisition acquire(const ExperimentConfig& config) {
  config.validate();
  const VectorXd angles = config.steering();
  Acquisition acq;
  acq.field = build_phantom(config.phantom, config.array.wavelength());
  acq.clean = simulate_rf(config.array, config.pulse, acq.field, angles);
  const AberrationConfig& ab = config.aberration;
  switch (ab.kind) {
    case AberrationKind::none:
      break;
    case AberrationKind::angular_file:
      acq.law = load_angular_law(ab.law_file, angles);
      acq.aberrated = apply_angular_delay(acq.clean, *acq.law);
      break;
    case AberrationKind::angular_random:
      acq.law = random_smooth_angular_law(angles, config.array.center_frequency,
                                          ab.peak_to_peak_phase,
                                          deg2rad(ab.correlation_angle_deg),
                                          config.aberration_seed());
      acq.aberrated = apply_angular_delay(acq.clean, *acq.law);
      break;
    case AberrationKind::screen:
      acq.screen = sample_correlated_screen(config.array, ab.rms_delay, ab.correlation_length,
                                            config.aberration_seed());
      acq.aberrated = simulate_rf(config.array, config.pulse, acq.field, angles, acq.screen);
      break;
  }
  return acq;
}

UltrafastCompoundMatrix beamform_for(const ExperimentConfig& config, const RFDataSet& rf) {
  RFDataSet view = rf;
  view.array = config.beamforming_array();
  view.array.sampling_frequency = rf.sampling_frequency;
  return das_beamform(view, config.imaging_grid(), config.beamform.f_number);
}

namespace {

class StageRunner {
 public:
  explicit StageRunner(std::filesystem::path dir) : dir_(std::move(dir)) {}

  template <typename Fn>
  void operator()(const std::string& name, Fn&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      try {
        write_manifest(dir_, "incomplete: stage " + name + " failed: " + e.what());
      } catch (...) {
      }
      throw;
    }
  }

 private:
  std::filesystem::path dir_;
};

std::string num(double v) { return format_double(v); }

}  // namespace

Report run_pipeline(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
  ensure_directory(out_dir);
  StageRunner stage(out_dir);
  Report report;
  const ImageFormat fmt = config.run.format;
  const double dr = config.run.dynamic_range_db;
  const std::string ext = fmt == ImageFormat::pgm ? ".pgm" : ".csv";

  stage("config", [&] {
    config.validate();
    std::ofstream out(out_dir / "config.ini");
    out << serialize_config(config);
    if (!out) throw IOError("cannot write config.ini");
  });

  Acquisition acq;
  stage("phantom", [&] {
    acq.field = build_phantom(config.phantom, config.array.wavelength());
    write_scatterers_csv(out_dir / "phantom.csv", acq.field);
  });

  stage("simulate", [&] {
    acq = acquire(config);
    write_rf(out_dir / "rf.ufrf", acq.imaged(),
             {{"aberration", to_string(config.aberration.kind)}});
    if (acq.law) {
      ExtractedAberration truth;
      truth.angles = acq.law->angles;
      truth.center_frequency = config.array.center_frequency;
      truth.phase = kTwoPi * truth.center_frequency * acq.law->delays;
      truth.amplitude = acq.law->amplitudes;
      truth.masked.assign(static_cast<std::size_t>(truth.angles.size()), false);
      write_laws_csv(out_dir / "law_injected.csv", {truth});
    }
    if (acq.screen) {
      std::ofstream out(out_dir / "screen.csv");
      out << "element,delay_s,amplitude\n";
      for (Index j = 0; j < acq.screen->delays.size(); ++j)
        out << j << ',' << num(acq.screen->delays[j]) << ',' << num(acq.screen->amplitudes[j]) << '\n';
      if (!out) throw IOError("cannot write screen.csv");
    }
  });

  UltrafastCompoundMatrix r;
  std::optional<UltrafastCompoundMatrix> baseline;
  stage("beamform", [&] {
    r = beamform_for(config, acq.imaged());
    write_ufcm(out_dir / "ucm.ufcm", r);
    export_image(compound(r), out_dir / ("compound" + ext), fmt, dr);
    if (acq.aberrated) {
      baseline = beamform_for(config, acq.clean);
      export_image(compound(*baseline), out_dir / ("baseline" + ext), fmt, dr);
    }
    report.emplace_back("beamform.out_of_window_taps", std::to_string(r.out_of_window));
  });

  SvdBeamformResult corrected;
  const PatchGrid patches = config.patch_grid();
  stage("correct", [&] {
    corrected = svd_beamform(r, patches, config.correction.mode);
    export_image(corrected.image, out_dir / ("corrected" + ext), fmt, dr);
    write_laws_csv(out_dir / "laws.csv", corrected.laws);
    report.emplace_back("correct.mode", to_string(config.correction.mode));
    report.emplace_back("correct.n_patches", std::to_string(patches.patches.size()));
    std::vector<double> ratios;
    for (const auto& law : corrected.laws) ratios.push_back(law.s_ratio);
    std::sort(ratios.begin(), ratios.end());
    report.emplace_back("correct.median_s_ratio", num(ratios[ratios.size() / 2]));
  });

  stage("metrics", [&] {
    const ComplexImage before = compound(r);
    const ImagingGrid grid = r.grid;
    const double rms_before = before.pixels.norm();
    report.emplace_back("metrics.corrected_vs_compound_rel_rms",
                        num((corrected.image.pixels - before.pixels).norm() / rms_before));
    for (std::size_t k = 0; k < config.phantom.cysts.size(); ++k) {
      const auto [inside, outside] = cyst_masks(grid, config.phantom.cysts[k]);
      if (inside.pixels.empty() || outside.pixels.empty()) continue;
      const std::string key = "metrics.cyst" + std::to_string(k);
      const double c_before = contrast_db(before, inside, outside);
      const double c_after = contrast_db(corrected.image, inside, outside);
      report.emplace_back(key + ".contrast_uncorrected_db", num(c_before));
      report.emplace_back(key + ".contrast_corrected_db", num(c_after));
      report.emplace_back(key + ".improvement_db", num(c_before - c_after));
      if (baseline)
        report.emplace_back(key + ".contrast_baseline_db",
                            num(contrast_db(compound(*baseline), inside, outside)));
    }
    for (std::size_t k = 0; k < config.phantom.pins.size(); ++k) {
      const Pin& pin = config.phantom.pins[k];
      const std::string key = "metrics.pin" + std::to_string(k);
      const auto measure = [&](const ComplexImage& img, const std::string& name) {
        try {
          report.emplace_back(key + ".fwhm_" + name + "_m", num(lateral_resolution(img, pin.x, pin.z)));
        } catch (const BoundaryError&) {
          report.emplace_back(key + ".fwhm_" + name + "_m", "nan");
        }
      };
      measure(before, "uncorrected");
      measure(corrected.image, "corrected");
      if (baseline) measure(compound(*baseline), "baseline");
    }
    if (acq.law) {
      std::vector<double> r2_offset, r2_affine, r2_raw;
      for (const auto& law : corrected.laws) {
        r2_raw.push_back(phase_law_r2(law, *acq.law, PhaseAlignment::none).value);
        r2_offset.push_back(phase_law_r2(law, *acq.law, PhaseAlignment::offset).value);
        r2_affine.push_back(phase_law_r2(law, *acq.law, PhaseAlignment::affine).value);
      }
      const auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        const std::size_t m = v.size() / 2;
        return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
      };
      report.emplace_back("metrics.law_r2_raw_median", num(median(r2_raw)));
      report.emplace_back("metrics.law_r2_offset_median", num(median(r2_offset)));
      report.emplace_back("metrics.law_r2_affine_median", num(median(r2_affine)));
    }
  });

  stage("coherence", [&] {
    const PatchRect& center = patches.patches[patches.patches.size() / 2];
    const MatrixXcd block = r.patch(center);
    const CoherenceMatrix c = angular_coherence(block, true, r.angles);
    const PatchSvd<cplx> svd = patch_svd(block, gauge_angle_index(r.angles));
    const CoherenceMatrix c1 = angular_coherence(rank1_reconstruction(svd), true, r.angles);
    const double step = r.n_angles() > 1 ? rad2deg(r.angles[1] - r.angles[0]) : 0.0;
    const VectorXd curve = coherence_factor_curve(c);
    write_coherence_csv(out_dir / "coherence.csv", c);
    write_coherence_pgm(out_dir / "coherence.pgm", c);
    write_coherence_csv(out_dir / "coherence_rank1.csv", c1);
    write_curve_csv(out_dir / "coherence_curve.csv", curve, step);
    write_curve_csv(out_dir / "coherence_curve_rank1.csv", coherence_factor_curve(c1), step);
    try {
      const TriangleFit fit = triangle_fit(curve);
      report.emplace_back("coherence.triangle_r2", num(fit.r2));
      report.emplace_back("coherence.triangle_slope", num(fit.slope));
      report.emplace_back("coherence.zero_lag_extrapolation", num(fit.zero_lag_extrapolation));
    } catch (const FitError& e) {
      report.emplace_back("coherence.triangle_fit", std::string("failed: ") + e.what());
    }
  });

  stage("report", [&] {
    write_report(out_dir / "metrics.txt", report);
    write_manifest(out_dir, "complete");
  });
  return report;
}

std::string machine_descriptor() {
  std::ostringstream out;
  utsname u{};
  if (uname(&u) == 0) out << u.sysname << ' ' << u.release << ' ' << u.machine;
  out << "; hardware threads " << std::thread::hardware_concurrency();
#if defined(__clang__)
  out << "; clang " << __clang_major__ << '.' << __clang_minor__;
#elif defined(__GNUC__)
  out << "; gcc " << __GNUC__ << '.' << __GNUC_MINOR__;
#endif
  return out.str();
}

namespace {

template <typename Fn>
double median_seconds(int repetitions, Fn&& fn) {
  fn();  // warm-up
  std::vector<double> t;
  for (int i = 0; i < repetitions; ++i) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  std::sort(t.begin(), t.end());
  const std::size_t m = t.size() / 2;
  return t.size() % 2 ? t[m] : 0.5 * (t[m - 1] + t[m]);
}

Index tiling_side(Index n_patches) {
  const auto side = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(n_patches))));
  if (side * side != n_patches) throw ConfigError("bench patch counts must be perfect squares");
  return side;
}

}  // namespace

BenchReport run_bench(const BenchOptions& options) {
  if (options.repetitions < 1) throw ConfigError("bench needs at least one repetition");
  BenchReport report;
  report.machine = machine_descriptor();
  report.threads = threads();

  const TransducerArray array;
  const ImagingGrid grid = ImagingGrid::with_default_spacing(array, options.nx, options.nz, 5e-3);
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal;
  const Index max_angles =
      *std::max_element(options.angle_counts.begin(), options.angle_counts.end());
  MatrixXcd r_full(grid.size(), max_angles);
  for (Index j = 0; j < r_full.cols(); ++j)
    for (Index i = 0; i < r_full.rows(); ++i) r_full(i, j) = {normal(rng), normal(rng)};

  for (Index n_ang : options.angle_counts) {
    UltrafastCompoundMatrix r;
    r.grid = grid;
    r.angles = steering_angles(n_ang, deg2rad(18.0));
    r.data = r_full.leftCols(n_ang);
    r.center_frequency = array.center_frequency;
    r.sound_speed = array.sound_speed;

    double das_time = 0.0;
    if (options.time_beamform) {
      RFDataSet rf;
      rf.array = array;
      rf.sampling_frequency = array.sampling_frequency;
      rf.angles = r.angles;
      const double z_end = grid.z(grid.nz - 1);
      const double reach = std::hypot(z_end, grid.x(grid.nx - 1) + array.pitch * array.n_elements);
      const auto n_samples = static_cast<Index>(std::ceil(2.0 * reach / array.sound_speed *
                                                          array.sampling_frequency)) + 8;
      rf.traces.resize(n_samples, n_ang * array.n_elements);
      for (Index j = 0; j < rf.traces.cols(); ++j)
        for (Index i = 0; i < n_samples; ++i) rf.traces(i, j) = {normal(rng), normal(rng)};
      das_time = median_seconds(options.repetitions, [&] { (void)das_beamform(rf, grid, 1.0); });
    }

    for (Index n_patches : options.patch_counts) {
      const Index side = tiling_side(n_patches);
      const PatchGrid patches = PatchGrid::tiling(grid, side, side);
      BenchRow row;
      row.n_patches = n_patches;
      row.patch_nx = patches.patch_nx;
      row.patch_nz = patches.patch_nz;
      row.n_angles = n_ang;
      row.beamform_seconds = das_time;
      row.repetitions = options.repetitions;
      row.svd_seconds = median_seconds(options.repetitions, [&] {
        (void)svd_beamform(r, patches, CorrectionMode::rank1);
      });
      report.rows.push_back(row);
    }
  }
  return report;
}

void write_bench_csv(const std::filesystem::path& path, const BenchReport& report) {
  if (path.has_parent_path()) ensure_directory(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IOError("cannot open " + path.string());
  out << "# machine: " << report.machine << "\n# threads: " << report.threads << '\n';
  out << "n_patches,patch_nx,patch_nz,n_angles,beamform_s,svd_correction_s,repetitions\n";
  for (const BenchRow& r : report.rows)
    out << r.n_patches << ',' << r.patch_nx << ',' << r.patch_nz << ',' << r.n_angles << ','
        << format_double(r.beamform_seconds) << ',' << format_double(r.svd_seconds) << ','
        << r.repetitions << '\n';
  if (!out) throw IOError("write failed for " + path.string());
}

}  // namespace svdbf
