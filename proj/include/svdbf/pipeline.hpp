#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "svdbf/config.hpp"
#include "svdbf/io.hpp"

namespace svdbf {

/// Channel data for one configured experiment.
struct Acquisition {
  ScattererField field;
  RFDataSet clean;                      // never aberrated
  std::optional<RFDataSet> aberrated;   // present unless aberration = none
  std::optional<AngularAberration> law;  // injected angular law, if any
  std::optional<ElementScreen> screen;

  const RFDataSet& imaged() const { return aberrated ? *aberrated : clean; }
};

/// Reads an angular law CSV (angle_deg, delay_s[, amplitude]; header line
/// optional) and checks it against the configured steering angles.
AngularAberration load_angular_law(const std::filesystem::path& path, const VectorXd& angles);

Acquisition acquire(const ExperimentConfig& config);

/// DAS with the configured f-number and beamforming sound speed.
UltrafastCompoundMatrix beamform_for(const ExperimentConfig& config, const RFDataSet& rf);

/// Full workflow; writes images, laws, coherence, a metrics report and a
/// MANIFEST into out_dir. On failure the MANIFEST records the failed stage
/// and the exception is rethrown.
Report run_pipeline(const ExperimentConfig& config, const std::filesystem::path& out_dir);

struct BenchOptions {
  Index nx = 120;
  Index nz = 100;
  std::vector<Index> patch_counts{1, 9, 25, 100};
  std::vector<Index> angle_counts{5, 10, 100};
  int repetitions = 5;
  std::uint64_t seed = 1;
  bool time_beamform = true;
};

struct BenchRow {
  Index n_patches = 0;
  Index patch_nx = 0;
  Index patch_nz = 0;
  Index n_angles = 0;
  double beamform_seconds = 0.0;  // median, independent of the patching
  double svd_seconds = 0.0;       // median
  int repetitions = 0;
};

struct BenchReport {
  std::string machine;
  int threads = 1;
  std::vector<BenchRow> rows;
};

/// Times DAS and the SVD correction stage on seeded synthetic data: one
/// warm-up run, then the median of `repetitions` timed runs.
BenchReport run_bench(const BenchOptions& options);
void write_bench_csv(const std::filesystem::path& path, const BenchReport& report);
std::string machine_descriptor();

}  // namespace svdbf
