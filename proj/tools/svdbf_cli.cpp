// svdbf command-line front end.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "svdbf/coherence.hpp"
#include "svdbf/config.hpp"
#include "svdbf/io.hpp"
#include "svdbf/metrics.hpp"
#include "svdbf/parallel.hpp"
#include "svdbf/pipeline.hpp"

namespace fs = std::filesystem;
using namespace svdbf;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kNumerical = 3, kIO = 4 };

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::optional<int> threads;
  std::string format;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "Experiment config (INI)");
  cmd->add_option("--seed", o.seed, "Base random seed");
  cmd->add_option("--out", o.out_dir, "Output directory");
  cmd->add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--format", o.format, "Image format")->check(CLI::IsMember({"pgm", "csv"}));
}

ExperimentConfig resolve(const CommonOptions& o) {
  ExperimentConfig c = o.config_path.empty() ? ExperimentConfig::desk() : load_config(o.config_path);
  if (o.seed) c.set_seed(*o.seed);
  if (!o.out_dir.empty()) c.run.output_dir = o.out_dir;
  if (o.threads) c.run.threads = *o.threads;
  if (!o.format.empty()) c.run.format = parse_image_format(o.format);
  c.validate();
  set_threads(c.run.threads);
  ensure_directory(c.run.output_dir);
  return c;
}

std::string image_name(const ExperimentConfig& c, const std::string& stem) {
  return stem + (c.run.format == ImageFormat::pgm ? ".pgm" : ".csv");
}

UltrafastCompoundMatrix load_or_beamform(const ExperimentConfig& c, const std::string& in) {
  if (in.empty()) return beamform_for(c, acquire(c).imaged());
  if (fs::path(in).extension() == ".ufrf") return beamform_for(c, read_rf(in));
  return read_ufcm(in);
}

int report_error(const char* kind, const std::exception& e, int code) {
  std::cerr << "svdbf: " << kind << ": " << e.what() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Plane-wave ultrasound SVD beamformer"};
  app.require_subcommand(1);

  CommonOptions common;
  std::string input;

  auto* phantom = app.add_subcommand("phantom", "Write the scatterer field as CSV");
  auto* simulate = app.add_subcommand("simulate", "Simulate (and aberrate) channel data");
  auto* beamform = app.add_subcommand("beamform", "DAS into the ultrafast compound matrix");
  auto* correct = app.add_subcommand("correct", "Patch-wise SVD correction");
  auto* coherence = app.add_subcommand("coherence", "Angular coherence of one patch");
  auto* metrics = app.add_subcommand("metrics", "Contrast, resolution and law agreement");
  auto* sweep = app.add_subcommand("sweep-patch", "Extracted law versus patch size");
  auto* bench = app.add_subcommand("bench", "Time beamforming and SVD correction");
  auto* pipeline = app.add_subcommand("pipeline", "Run the full workflow");
  for (auto* cmd : {phantom, simulate, beamform, correct, coherence, metrics, sweep, bench, pipeline})
    add_common(cmd, common);
  for (auto* cmd : {beamform, correct, coherence, metrics, sweep})
    cmd->add_option("--in", input, "Input .ufrf channel data or .ufcm matrix (default: simulate)");

  std::vector<Index> patch_rect;
  coherence->add_option("--patch", patch_rect, "ix0 iz0 nx nz (default: centre patch)")
      ->expected(4);
  std::vector<std::string> sizes{"16x8", "32x16", "48x24"};
  std::vector<Index> center;
  sweep->add_option("--sizes", sizes, "Patch sizes as NXxNZ");
  sweep->add_option("--center", center, "Centre pixel ix iz (default: grid centre)")->expected(2);
  int reps = 5;
  bench->add_option("--reps", reps, "Timed repetitions per configuration")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    const ExperimentConfig cfg = resolve(common);
    const fs::path out = cfg.run.output_dir;
    const double dr = cfg.run.dynamic_range_db;

    if (*phantom) {
      write_scatterers_csv(out / "phantom.csv", build_phantom(cfg.phantom, cfg.array.wavelength()));
    } else if (*simulate) {
      const Acquisition acq = acquire(cfg);
      write_rf(out / "rf.ufrf", acq.imaged(), {{"aberration", to_string(cfg.aberration.kind)}});
      if (acq.aberrated) write_rf(out / "rf_clean.ufrf", acq.clean);
    } else if (*beamform) {
      const UltrafastCompoundMatrix r = load_or_beamform(cfg, input);
      write_ufcm(out / "ucm.ufcm", r);
      export_image(compound(r), out / image_name(cfg, "compound"), cfg.run.format, dr);
    } else if (*correct) {
      const UltrafastCompoundMatrix r = load_or_beamform(cfg, input);
      const auto patches = PatchGrid::make(r.grid, cfg.correction.patch_nx, cfg.correction.patch_nz,
                                           cfg.correction.overlap);
      const SvdBeamformResult res = svd_beamform(r, patches, cfg.correction.mode);
      export_image(res.image, out / image_name(cfg, "corrected"), cfg.run.format, dr);
      write_laws_csv(out / "laws.csv", res.laws);
    } else if (*coherence) {
      const UltrafastCompoundMatrix r = load_or_beamform(cfg, input);
      PatchRect rect;
      if (patch_rect.size() == 4) {
        rect = {patch_rect[0], patch_rect[1], patch_rect[2], patch_rect[3]};
      } else {
        const auto patches = PatchGrid::make(r.grid, cfg.correction.patch_nx,
                                             cfg.correction.patch_nz, cfg.correction.overlap);
        rect = patches.patches[patches.patches.size() / 2];
      }
      const CoherenceMatrix c = angular_coherence(r.patch(rect), true, r.angles);
      const VectorXd curve = coherence_factor_curve(c);
      const double step = r.n_angles() > 1 ? rad2deg(r.angles[1] - r.angles[0]) : 0.0;
      write_coherence_csv(out / "coherence.csv", c);
      write_coherence_pgm(out / "coherence.pgm", c);
      write_curve_csv(out / "coherence_curve.csv", curve, step);
      const TriangleFit fit = triangle_fit(curve);
      write_report(out / "coherence.txt",
                   {{"slope_per_lag", format_double(fit.slope)},
                    {"intercept", format_double(fit.intercept)},
                    {"r2", format_double(fit.r2)},
                    {"zero_lag_extrapolation", format_double(fit.zero_lag_extrapolation)},
                    {"last_lag", std::to_string(fit.last_lag)}});
    } else if (*metrics) {
      const UltrafastCompoundMatrix r = load_or_beamform(cfg, input);
      const auto patches = PatchGrid::make(r.grid, cfg.correction.patch_nx, cfg.correction.patch_nz,
                                           cfg.correction.overlap);
      const ComplexImage before = compound(r);
      const ComplexImage after = svd_beamform(r, patches, cfg.correction.mode).image;
      Report rep;
      for (std::size_t k = 0; k < cfg.phantom.cysts.size(); ++k) {
        const auto [inside, outside] = cyst_masks(r.grid, cfg.phantom.cysts[k]);
        const std::string key = "cyst" + std::to_string(k);
        rep.emplace_back(key + ".contrast_uncorrected_db",
                         format_double(contrast_db(before, inside, outside)));
        rep.emplace_back(key + ".contrast_corrected_db",
                         format_double(contrast_db(after, inside, outside)));
      }
      for (std::size_t k = 0; k < cfg.phantom.pins.size(); ++k) {
        const Pin& p = cfg.phantom.pins[k];
        const std::string key = "pin" + std::to_string(k);
        rep.emplace_back(key + ".fwhm_uncorrected_m", format_double(lateral_resolution(before, p.x, p.z)));
        rep.emplace_back(key + ".fwhm_corrected_m", format_double(lateral_resolution(after, p.x, p.z)));
      }
      write_report(out / "metrics.txt", rep);
    } else if (*sweep) {
      const UltrafastCompoundMatrix r = load_or_beamform(cfg, input);
      std::vector<std::pair<Index, Index>> dims;
      for (const std::string& s : sizes) {
        const auto x = s.find('x');
        if (x == std::string::npos) throw ConfigError("patch size '" + s + "' is not NXxNZ");
        try {
          dims.emplace_back(std::stoll(s.substr(0, x)), std::stoll(s.substr(x + 1)));
        } catch (const std::exception&) {
          throw ConfigError("patch size '" + s + "' is not NXxNZ");
        }
      }
      const Index cx = center.size() == 2 ? center[0] : r.grid.nx / 2;
      const Index cz = center.size() == 2 ? center[1] : r.grid.nz / 2;
      const auto entries = patch_size_sweep(r, cx, cz, dims);
      std::vector<ExtractedAberration> laws;
      Report rep;
      for (const SweepEntry& e : entries) {
        laws.push_back(e.law);
        const std::string key = std::to_string(e.rect.nx) + "x" + std::to_string(e.rect.nz);
        rep.emplace_back(key + ".s_ratio", format_double(e.s_ratio));
        rep.emplace_back(key + ".r2_vs_median", format_double(e.r2_vs_median));
      }
      write_laws_csv(out / "sweep_laws.csv", laws);
      write_report(out / "sweep.txt", rep);
    } else if (*bench) {
      BenchOptions opts;
      opts.repetitions = reps;
      opts.seed = cfg.run.seed;
      const BenchReport rep = run_bench(opts);
      write_bench_csv(out / "bench.csv", rep);
      std::cout << "machine: " << rep.machine << "\nthreads: " << rep.threads << '\n';
      for (const BenchRow& row : rep.rows)
        std::printf("patches %3lld (%lldx%lld)  angles %3lld  beamform %.4f s  svd %.4f s\n",
                    static_cast<long long>(row.n_patches), static_cast<long long>(row.patch_nx),
                    static_cast<long long>(row.patch_nz), static_cast<long long>(row.n_angles),
                    row.beamform_seconds, row.svd_seconds);
    } else if (*pipeline) {
      const Report rep = run_pipeline(cfg, out);
      for (const auto& [k, v] : rep) std::cout << k << " = " << v << '\n';
    }
  } catch (const ConfigError& e) {
    return report_error("config error", e, kConfig);
  } catch (const IOError& e) {
    return report_error("I/O error", e, kIO);
  } catch (const Error& e) {
    return report_error("numerical error", e, kNumerical);
  } catch (const std::exception& e) {
    return report_error("error", e, kFailure);
  }
  return kOk;
}
