#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "svdbf/arraysim.hpp"
#include "svdbf/beamform.hpp"
#include "svdbf/coherence.hpp"
#include "svdbf/svdcore.hpp"

namespace svdbf {

namespace fs = std::filesystem;

enum class ImageFormat { pgm, csv };

ImageFormat parse_image_format(const std::string& name);
std::string to_string(ImageFormat format);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

/// Ordered key = value report.
using Report = std::vector<std::pair<std::string, std::string>>;

/// Little-endian binary channel data ("UFRF"): header, angles, then float32
/// (re, im) pairs, time fastest, traces in (angle, element) order. A text
/// sidecar `<path>.txt` repeats the metadata as key = value lines.
void write_rf(const fs::path& path, const RFDataSet& rf, const Report& extra = {});
RFDataSet read_rf(const fs::path& path);

/// R on disk ("UFCM"): grid, f0, c, angles, then float32 (re, im) pairs, pixel fastest.
void write_ufcm(const fs::path& path, const UltrafastCompoundMatrix& r);
UltrafastCompoundMatrix read_ufcm(const fs::path& path);

/// 8-bit log-compressed magnitude, clipped to [max - DR, max] dB.
std::vector<std::uint8_t> to_pgm_gray(const VectorXd& magnitude, double dynamic_range_db);
/// P5 image of an nz x nx magnitude field (rows = depth).
void write_pgm(const fs::path& path, const MatrixXd& magnitude, double dynamic_range_db);

/// PGM: log-compressed magnitude. CSV: raw |pixel|, one row per depth.
void export_image(const ComplexImage& image, const fs::path& path, ImageFormat format,
                  double dynamic_range_db = 60.0);
MatrixXd read_image_csv(const fs::path& path);

void write_laws_csv(const fs::path& path, const std::vector<ExtractedAberration>& laws);
void write_coherence_csv(const fs::path& path, const CoherenceMatrix& c);
void write_coherence_pgm(const fs::path& path, const CoherenceMatrix& c);
/// lag_deg, coherence
void write_curve_csv(const fs::path& path, const VectorXd& curve, double lag_step_deg);
void write_scatterers_csv(const fs::path& path, const ScattererField& field);
ScattererField read_scatterers_csv(const fs::path& path);
void write_report(const fs::path& path, const Report& report);
Report read_report(const fs::path& path);

std::string sha256_hex(const fs::path& path);

/// MANIFEST listing every regular file below `dir` (sorted) with its SHA-256.
/// `status` is written as the first line ("complete" or "incomplete: ...").
void write_manifest(const fs::path& dir, const std::string& status);

void ensure_directory(const fs::path& dir);

}  // namespace svdbf
