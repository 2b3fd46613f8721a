#include "svdbf/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

namespace svdbf {

static_assert(std::endian::native == std::endian::little, "binary formats assume little-endian");

ImageFormat parse_image_format(const std::string& name) {
  if (name == "pgm") return ImageFormat::pgm;
  if (name == "csv") return ImageFormat::csv;
  throw ConfigError("unknown image format '" + name + "' (expected pgm or csv)");
}

std::string to_string(ImageFormat format) { return format == ImageFormat::pgm ? "pgm" : "csv"; }

std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IOError("cannot create directory " + dir.string() + ": " + ec.message());
}

namespace {

std::ofstream open_out(const fs::path& path, bool binary = false) {
  if (path.has_parent_path()) ensure_directory(path.parent_path());
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw IOError("cannot open " + path.string() + " for writing");
  return out;
}

std::ifstream open_in(const fs::path& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw IOError("cannot open " + path.string() + " for reading");
  return in;
}

void finish(std::ostream& out, const fs::path& path) {
  out.flush();
  if (!out) throw IOError("write failed for " + path.string());
}

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const fs::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IOError("truncated file " + path.string());
  return v;
}

void put_samples(std::ostream& out, const cplx* data, Index n) {
  std::vector<float> buf(static_cast<std::size_t>(2 * n));
  for (Index i = 0; i < n; ++i) {
    buf[static_cast<std::size_t>(2 * i)] = static_cast<float>(data[i].real());
    buf[static_cast<std::size_t>(2 * i + 1)] = static_cast<float>(data[i].imag());
  }
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

void get_samples(std::istream& in, cplx* data, Index n, const fs::path& path) {
  std::vector<float> buf(static_cast<std::size_t>(2 * n));
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!in) throw IOError("truncated sample block in " + path.string());
  for (Index i = 0; i < n; ++i)
    data[i] = {buf[static_cast<std::size_t>(2 * i)], buf[static_cast<std::size_t>(2 * i + 1)]};
}

void expect_magic(std::istream& in, const char* magic, const fs::path& path) {
  std::array<char, 4> m{};
  in.read(m.data(), 4);
  if (!in || std::memcmp(m.data(), magic, 4) != 0)
    throw IOError(path.string() + " is not a " + std::string(magic, 4) + " file");
  if (get<std::uint32_t>(in, path) != 1u)
    throw IOError(path.string() + " has an unsupported format version");
}

double parse_number(std::string_view text, const fs::path& path) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\r')) text.remove_suffix(1);
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
    throw IOError("malformed number '" + std::string(text) + "' in " + path.string());
  return v;
}

std::vector<std::vector<double>> read_numeric_csv(const fs::path& path, bool skip_header) {
  std::ifstream in = open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first && skip_header) {
      first = false;
      continue;
    }
    first = false;
    if (line.empty()) continue;
    std::vector<double> row;
    std::string_view rest = line;
    while (true) {
      const auto comma = rest.find(',');
      row.push_back(parse_number(rest.substr(0, comma), path));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

void write_report(const fs::path& path, const Report& report) {
  std::ofstream out = open_out(path);
  for (const auto& [k, v] : report) out << k << " = " << v << '\n';
  finish(out, path);
}

Report read_report(const fs::path& path) {
  std::ifstream in = open_in(path);
  Report out;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    out.emplace_back(line.substr(0, eq), line.substr(eq + 3));
  }
  return out;
}

void write_rf(const fs::path& path, const RFDataSet& rf, const Report& extra) {
  {
    std::ofstream out = open_out(path, true);
    out.write("UFRF", 4);
    put<std::uint32_t>(out, 1);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(rf.n_angles()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(rf.n_elements()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(rf.n_samples()));
    put<double>(out, rf.t0);
    put<double>(out, rf.sampling_frequency);
    put<double>(out, rf.array.pitch);
    put<double>(out, rf.array.center_frequency);
    put<double>(out, rf.array.sound_speed);
    for (Index a = 0; a < rf.n_angles(); ++a) put<double>(out, rf.angles[a]);
    put_samples(out, rf.traces.data(), rf.traces.size());
    finish(out, path);
  }
  Report side{{"format", "UFRF"},
              {"version", "1"},
              {"n_angles", std::to_string(rf.n_angles())},
              {"n_elements", std::to_string(rf.n_elements())},
              {"n_samples", std::to_string(rf.n_samples())},
              {"t0_s", format_double(rf.t0)},
              {"sampling_frequency_hz", format_double(rf.sampling_frequency)},
              {"pitch_m", format_double(rf.array.pitch)},
              {"center_frequency_hz", format_double(rf.array.center_frequency)},
              {"sound_speed_m_s", format_double(rf.array.sound_speed)},
              {"sample_type", "complex64 little-endian, time fastest, column = angle * n_elements + element"}};
  side.insert(side.end(), extra.begin(), extra.end());
  write_report(fs::path(path.string() + ".txt"), side);
}

RFDataSet read_rf(const fs::path& path) {
  std::ifstream in = open_in(path, true);
  expect_magic(in, "UFRF", path);
  const auto n_ang = static_cast<Index>(get<std::uint32_t>(in, path));
  const auto n_el = static_cast<Index>(get<std::uint32_t>(in, path));
  const auto n_s = static_cast<Index>(get<std::uint32_t>(in, path));
  RFDataSet rf;
  rf.t0 = get<double>(in, path);
  rf.sampling_frequency = get<double>(in, path);
  rf.array.n_elements = n_el;
  rf.array.pitch = get<double>(in, path);
  rf.array.center_frequency = get<double>(in, path);
  rf.array.sound_speed = get<double>(in, path);
  rf.array.sampling_frequency = rf.sampling_frequency;
  rf.angles.resize(n_ang);
  for (Index a = 0; a < n_ang; ++a) rf.angles[a] = get<double>(in, path);
  rf.traces.resize(n_s, n_ang * n_el);
  get_samples(in, rf.traces.data(), rf.traces.size(), path);
  return rf;
}

void write_ufcm(const fs::path& path, const UltrafastCompoundMatrix& r) {
  std::ofstream out = open_out(path, true);
  out.write("UFCM", 4);
  put<std::uint32_t>(out, 1);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(r.grid.nx));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(r.grid.nz));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(r.n_angles()));
  for (double v : {r.grid.x0, r.grid.z0, r.grid.dx, r.grid.dz, r.center_frequency, r.sound_speed})
    put<double>(out, v);
  for (Index a = 0; a < r.n_angles(); ++a) put<double>(out, r.angles[a]);
  put_samples(out, r.data.data(), r.data.size());
  finish(out, path);
}

UltrafastCompoundMatrix read_ufcm(const fs::path& path) {
  std::ifstream in = open_in(path, true);
  expect_magic(in, "UFCM", path);
  UltrafastCompoundMatrix r;
  r.grid.nx = static_cast<Index>(get<std::uint32_t>(in, path));
  r.grid.nz = static_cast<Index>(get<std::uint32_t>(in, path));
  const auto n_ang = static_cast<Index>(get<std::uint32_t>(in, path));
  r.grid.x0 = get<double>(in, path);
  r.grid.z0 = get<double>(in, path);
  r.grid.dx = get<double>(in, path);
  r.grid.dz = get<double>(in, path);
  r.center_frequency = get<double>(in, path);
  r.sound_speed = get<double>(in, path);
  r.angles.resize(n_ang);
  for (Index a = 0; a < n_ang; ++a) r.angles[a] = get<double>(in, path);
  r.data.resize(r.grid.size(), n_ang);
  get_samples(in, r.data.data(), r.data.size(), path);
  return r;
}

std::vector<std::uint8_t> to_pgm_gray(const VectorXd& magnitude, double dynamic_range_db) {
  if (!(dynamic_range_db > 0.0)) throw ConfigError("dynamic range must be positive");
  std::vector<std::uint8_t> out(static_cast<std::size_t>(magnitude.size()), 0);
  const double peak = magnitude.size() > 0 ? magnitude.maxCoeff() : 0.0;
  if (!(peak > 0.0)) return out;
  for (Index i = 0; i < magnitude.size(); ++i) {
    if (!(magnitude[i] > 0.0)) continue;
    const double db = 20.0 * std::log10(magnitude[i] / peak);
    const double level = std::clamp((db + dynamic_range_db) / dynamic_range_db, 0.0, 1.0);
    out[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(std::lround(255.0 * level));
  }
  return out;
}

void write_pgm(const fs::path& path, const MatrixXd& magnitude, double dynamic_range_db) {
  // Row-major raster: one image row per depth sample.
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = magnitude;
  const VectorXd flat = Eigen::Map<const VectorXd>(rows.data(), rows.size());
  const std::vector<std::uint8_t> gray = to_pgm_gray(flat, dynamic_range_db);
  std::ofstream out = open_out(path, true);
  out << "P5\n" << magnitude.cols() << ' ' << magnitude.rows() << "\n255\n";
  out.write(reinterpret_cast<const char*>(gray.data()), static_cast<std::streamsize>(gray.size()));
  finish(out, path);
}

void export_image(const ComplexImage& image, const fs::path& path, ImageFormat format,
                  double dynamic_range_db) {
  if (!(dynamic_range_db > 0.0)) throw ConfigError("dynamic range must be positive");
  const MatrixXd mag = image.as_matrix().cwiseAbs();
  if (format == ImageFormat::pgm) {
    write_pgm(path, mag, dynamic_range_db);
    return;
  }
  std::ofstream out = open_out(path);
  for (Index iz = 0; iz < mag.rows(); ++iz) {
    for (Index ix = 0; ix < mag.cols(); ++ix) {
      if (ix > 0) out << ',';
      out << format_double(mag(iz, ix));
    }
    out << '\n';
  }
  finish(out, path);
}

MatrixXd read_image_csv(const fs::path& path) {
  const auto rows = read_numeric_csv(path, false);
  if (rows.empty()) return {};
  MatrixXd out(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size())
      throw IOError("ragged rows in " + path.string());
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      out(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  }
  return out;
}

void write_laws_csv(const fs::path& path, const std::vector<ExtractedAberration>& laws) {
  std::ofstream out = open_out(path);
  out << "patch,ix0,iz0,nx,nz,angle_deg,phase_rad,amplitude,delay_s\n";
  for (std::size_t k = 0; k < laws.size(); ++k) {
    const ExtractedAberration& law = laws[k];
    const VectorXd delays = law.delays();
    for (Index a = 0; a < law.angles.size(); ++a) {
      out << k << ',' << law.source_patch.ix0 << ',' << law.source_patch.iz0 << ','
          << law.source_patch.nx << ',' << law.source_patch.nz << ','
          << format_double(rad2deg(law.angles[a])) << ',' << format_double(law.phase[a]) << ','
          << format_double(law.amplitude[a]) << ',' << format_double(delays[a]) << '\n';
    }
  }
  finish(out, path);
}

void write_coherence_csv(const fs::path& path, const CoherenceMatrix& c) {
  std::ofstream out = open_out(path);
  for (Index i = 0; i < c.values.rows(); ++i) {
    for (Index j = 0; j < c.values.cols(); ++j) {
      if (j > 0) out << ',';
      out << format_double(std::abs(c.values(i, j)));
    }
    out << '\n';
  }
  finish(out, path);
}

void write_coherence_pgm(const fs::path& path, const CoherenceMatrix& c) {
  const MatrixXd mag = c.values.cwiseAbs();
  const double peak = mag.size() > 0 ? mag.maxCoeff() : 0.0;
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = mag;
  std::ofstream out = open_out(path, true);
  out << "P5\n" << mag.cols() << ' ' << mag.rows() << "\n255\n";
  for (Index i = 0; i < rows.size(); ++i) {
    const double level = peak > 0.0 ? rows.data()[i] / peak : 0.0;
    out.put(static_cast<char>(static_cast<std::uint8_t>(std::lround(255.0 * level))));
  }
  finish(out, path);
}

void write_curve_csv(const fs::path& path, const VectorXd& curve, double lag_step_deg) {
  std::ofstream out = open_out(path);
  out << "lag_deg,coherence\n";
  for (Index k = 0; k < curve.size(); ++k)
    out << format_double(static_cast<double>(k) * lag_step_deg) << ',' << format_double(curve[k])
        << '\n';
  finish(out, path);
}

void write_scatterers_csv(const fs::path& path, const ScattererField& field) {
  std::ofstream out = open_out(path);
  out << "x_m,z_m,reflectivity\n";
  for (Index k = 0; k < field.size(); ++k)
    out << format_double(field.x[k]) << ',' << format_double(field.z[k]) << ','
        << format_double(field.reflectivity[k]) << '\n';
  finish(out, path);
}

ScattererField read_scatterers_csv(const fs::path& path) {
  const auto rows = read_numeric_csv(path, true);
  ScattererField f;
  const auto n = static_cast<Index>(rows.size());
  f.x.resize(n);
  f.z.resize(n);
  f.reflectivity.resize(n);
  for (Index k = 0; k < n; ++k) {
    const auto& row = rows[static_cast<std::size_t>(k)];
    if (row.size() != 3) throw IOError("scatterer rows need 3 columns in " + path.string());
    f.x[k] = row[0];
    f.z[k] = row[1];
    f.reflectivity[k] = row[2];
  }
  return f;
}

std::string sha256_hex(const fs::path& path) {
  std::ifstream in = open_in(path, true);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr) throw IOError("cannot allocate hash context");
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest.data(), &len);
  EVP_MD_CTX_free(ctx);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

void write_manifest(const fs::path& dir, const std::string& status) {
  std::vector<fs::path> files;
  std::error_code ec;
  for (auto it = fs::recursive_directory_iterator(dir, ec); !ec && it != fs::end(it);
       it.increment(ec)) {
    if (!it->is_regular_file()) continue;
    const fs::path rel = fs::relative(it->path(), dir);
    if (rel == "MANIFEST") continue;
    files.push_back(rel);
  }
  if (ec) throw IOError("cannot list " + dir.string() + ": " + ec.message());
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.generic_string() < b.generic_string(); });
  std::ofstream out = open_out(dir / "MANIFEST");
  out << "status = " << status << '\n';
  for (const fs::path& f : files) out << sha256_hex(dir / f) << "  " << f.generic_string() << '\n';
  finish(out, dir / "MANIFEST");
}

}  // namespace svdbf
