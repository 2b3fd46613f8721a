#include "svdbf/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace svdbf {

namespace pt = boost::property_tree;

std::string to_string(AberrationKind kind) {
  switch (kind) {
    case AberrationKind::none: return "none";
    case AberrationKind::angular_file: return "angular_file";
    case AberrationKind::angular_random: return "angular_random";
    case AberrationKind::screen: return "screen";
  }
  return "none";
}

std::string to_string(CorrectionMode mode) {
  return mode == CorrectionMode::rank1 ? "rank1" : "phase_conjugate";
}

CorrectionMode parse_correction_mode(const std::string& name) {
  if (name == "rank1") return CorrectionMode::rank1;
  if (name == "phase_conjugate") return CorrectionMode::phase_conjugate;
  throw ConfigError("unknown correction mode '" + name + "' (expected rank1 or phase_conjugate)");
}

namespace {

AberrationKind parse_aberration_kind(const std::string& name) {
  for (auto k : {AberrationKind::none, AberrationKind::angular_file, AberrationKind::angular_random,
                 AberrationKind::screen})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown aberration type '" + name + "'");
}

std::string pins_text(const std::vector<Pin>& pins) {
  std::string out;
  for (const Pin& p : pins) {
    if (!out.empty()) out += ';';
    out += format_double(p.x) + ',' + format_double(p.z) + ',' + format_double(p.amplitude);
  }
  return out;
}

std::string cysts_text(const std::vector<Cyst>& cysts) {
  std::string out;
  for (const Cyst& c : cysts) {
    if (!out.empty()) out += ';';
    out += format_double(c.center_x) + ',' + format_double(c.center_z) + ',' +
           format_double(c.radius) + ',' + format_double(c.echogenicity);
  }
  return out;
}

std::vector<std::vector<double>> parse_tuples(const std::string& text, std::size_t arity,
                                              const std::string& key) {
  std::vector<std::vector<double>> out;
  std::stringstream items(text);
  std::string item;
  while (std::getline(items, item, ';')) {
    if (item.find_first_not_of(' ') == std::string::npos) continue;
    std::vector<double> values;
    std::stringstream fields(item);
    std::string field;
    while (std::getline(fields, field, ',')) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(field, &used));
        if (field.find_first_not_of(' ', used) != std::string::npos) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw ConfigError("malformed number in " + key + ": '" + field + "'");
      }
    }
    if (values.size() != arity)
      throw ConfigError(key + " entries need " + std::to_string(arity) + " comma-separated values");
    out.push_back(std::move(values));
  }
  return out;
}

// Typed access to one INI section that rejects keys nobody asked for.
class Section {
 public:
  Section(const pt::ptree& root, const std::string& name) : name_(name) {
    if (auto child = root.get_child_optional(name)) tree_ = *child;
  }

  template <typename T>
  void read(const std::string& key, T& value) {
    seen_.insert(key);
    auto text = tree_.get_optional<std::string>(key);
    if (!text) return;
    std::istringstream in(*text);
    T parsed{};
    in >> parsed;
    if (in.fail() || !(in >> std::ws).eof())
      throw ConfigError("invalid value '" + *text + "' for " + name_ + "." + key);
    value = parsed;
  }

  void read(const std::string& key, std::string& value) {
    seen_.insert(key);
    if (auto text = tree_.get_optional<std::string>(key)) value = *text;
  }

  void finish() const {
    for (const auto& [key, unused] : tree_)
      if (!seen_.count(key)) throw ConfigError("unknown key " + name_ + "." + key);
  }

 private:
  std::string name_;
  pt::ptree tree_;
  std::set<std::string> seen_;
};

}  // namespace

ExperimentConfig ExperimentConfig::desk() {
  ExperimentConfig c;
  // Pins sit on grid nodes a quarter patch in from the patch borders: a bright
  // target cut by a patch edge biases that patch's law.
  const ImagingGrid g = c.imaging_grid();
  c.phantom.pins = {{g.x(40), g.z(24), 20.0}, {g.x(40), g.z(104), 20.0}};
  c.phantom.cysts = {{0.0, 17.5e-3, 2.5e-3, 0.0}};
  return c;
}

ExperimentConfig ExperimentConfig::paper_scale() {
  ExperimentConfig c;
  c.array.n_elements = 192;
  c.angles.count = 100;
  c.phantom.x_min = -19.0e-3;
  c.phantom.x_max = 19.0e-3;
  c.phantom.z_min = 2.0e-3;
  c.phantom.z_max = 52.0e-3;
  c.phantom.pins = {{0.0, 15.0e-3, 20.0}, {0.0, 40.0e-3, 20.0}};
  c.phantom.cysts = {{0.0, 27.5e-3, 4.0e-3, 0.0}};
  c.grid = {156, 406, 3.0e-3, 1.0, 0.5};
  c.correction.patch_nx = 70;
  c.correction.patch_nz = 20;
  return c;
}

void ExperimentConfig::validate() const {
  array.validate();
  pulse.validate();
  if (pulse.center_frequency != array.center_frequency)
    throw ConfigError("pulse and array center frequencies differ");
  if (angles.count < 1) throw ConfigError("angle count must be positive");
  if (!(angles.span_deg >= 0.0 && angles.span_deg < 90.0))
    throw ConfigError("angle span must lie in [0, 90) degrees");
  if (grid.nx < 1 || grid.nz < 1) throw ConfigError("grid needs at least one pixel");
  if (!(grid.dx_wavelengths > 0.0) || !(grid.dz_wavelengths > 0.0))
    throw ConfigError("grid spacing must be positive");
  if (!(grid.z0 > 0.0)) throw ConfigError("grid must start below the array (z0 > 0)");
  if (!(beamform.f_number > 0.0)) throw ConfigError("f-number must be positive");
  if (beamform.sound_speed < 0.0) throw ConfigError("beamforming sound speed must be >= 0");
  if (aberration.kind == AberrationKind::angular_file && aberration.law_file.empty())
    throw ConfigError("angular_file aberration needs law_file");
  if (!(aberration.rms_delay >= 0.0) || !(aberration.correlation_length > 0.0))
    throw ConfigError("screen parameters must be non-negative with positive correlation length");
  if (!(aberration.correlation_angle_deg > 0.0))
    throw ConfigError("correlation angle must be positive");
  if (!(run.dynamic_range_db > 0.0)) throw ConfigError("dynamic range must be positive");
  if (run.threads < 1) throw ConfigError("thread count must be >= 1");
  imaging_grid().validate();
  patch_grid();
}

void ExperimentConfig::set_seed(std::uint64_t seed) {
  run.seed = seed;
  phantom.seed = seed;
}

VectorXd ExperimentConfig::steering() const {
  return steering_angles(angles.count, deg2rad(angles.span_deg));
}

ImagingGrid ExperimentConfig::imaging_grid() const {
  const double lambda = array.wavelength();
  return ImagingGrid::centered(grid.nx, grid.nz, grid.z0, grid.dx_wavelengths * lambda,
                               grid.dz_wavelengths * lambda);
}

PatchGrid ExperimentConfig::patch_grid() const {
  return PatchGrid::make(imaging_grid(), correction.patch_nx, correction.patch_nz,
                         correction.overlap);
}

TransducerArray ExperimentConfig::beamforming_array() const {
  TransducerArray a = array;
  if (beamform.sound_speed > 0.0) a.sound_speed = beamform.sound_speed;
  return a;
}

ExperimentConfig parse_config(const std::string& text) {
  pt::ptree root;
  try {
    std::istringstream in(text);
    pt::ini_parser::read_ini(in, root);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax error: ") + e.what());
  }
  static const std::set<std::string> known{"array", "pulse", "phantom", "angles", "grid",
                                           "beamform", "aberration", "correction", "run"};
  for (const auto& [name, unused] : root)
    if (!known.count(name)) throw ConfigError("unknown config section [" + name + "]");

  ExperimentConfig c = ExperimentConfig::desk();
  {
    Section s(root, "array");
    s.read("n_elements", c.array.n_elements);
    s.read("pitch", c.array.pitch);
    s.read("center_frequency", c.array.center_frequency);
    s.read("sampling_frequency", c.array.sampling_frequency);
    s.read("sound_speed", c.array.sound_speed);
    s.finish();
  }
  c.pulse.center_frequency = c.array.center_frequency;
  {
    Section s(root, "pulse");
    s.read("n_cycles", c.pulse.n_cycles);
    s.finish();
  }
  {
    Section s(root, "phantom");
    s.read("x_min", c.phantom.x_min);
    s.read("x_max", c.phantom.x_max);
    s.read("z_min", c.phantom.z_min);
    s.read("z_max", c.phantom.z_max);
    s.read("speckle_density", c.phantom.speckle_density);
    std::string pins = pins_text(c.phantom.pins);
    std::string cysts = cysts_text(c.phantom.cysts);
    s.read("pins", pins);
    s.read("cysts", cysts);
    s.finish();
    c.phantom.pins.clear();
    for (const auto& v : parse_tuples(pins, 3, "phantom.pins")) c.phantom.pins.push_back({v[0], v[1], v[2]});
    c.phantom.cysts.clear();
    for (const auto& v : parse_tuples(cysts, 4, "phantom.cysts"))
      c.phantom.cysts.push_back({v[0], v[1], v[2], v[3]});
  }
  {
    Section s(root, "angles");
    s.read("count", c.angles.count);
    s.read("span_deg", c.angles.span_deg);
    s.finish();
  }
  {
    Section s(root, "grid");
    s.read("nx", c.grid.nx);
    s.read("nz", c.grid.nz);
    s.read("z0", c.grid.z0);
    s.read("dx_wavelengths", c.grid.dx_wavelengths);
    s.read("dz_wavelengths", c.grid.dz_wavelengths);
    s.finish();
  }
  {
    Section s(root, "beamform");
    s.read("f_number", c.beamform.f_number);
    s.read("sound_speed", c.beamform.sound_speed);
    s.finish();
  }
  {
    Section s(root, "aberration");
    std::string kind = to_string(c.aberration.kind);
    s.read("type", kind);
    c.aberration.kind = parse_aberration_kind(kind);
    s.read("law_file", c.aberration.law_file);
    s.read("peak_to_peak_phase", c.aberration.peak_to_peak_phase);
    s.read("correlation_angle_deg", c.aberration.correlation_angle_deg);
    s.read("rms_delay", c.aberration.rms_delay);
    s.read("correlation_length", c.aberration.correlation_length);
    s.finish();
  }
  {
    Section s(root, "correction");
    s.read("patch_nx", c.correction.patch_nx);
    s.read("patch_nz", c.correction.patch_nz);
    s.read("overlap", c.correction.overlap);
    std::string mode = to_string(c.correction.mode);
    s.read("mode", mode);
    c.correction.mode = parse_correction_mode(mode);
    s.finish();
  }
  {
    Section s(root, "run");
    std::uint64_t seed = c.run.seed;
    s.read("seed", seed);
    c.set_seed(seed);
    s.read("threads", c.run.threads);
    s.read("output_dir", c.run.output_dir);
    std::string format = to_string(c.run.format);
    s.read("format", format);
    c.run.format = parse_image_format(format);
    s.read("dynamic_range_db", c.run.dynamic_range_db);
    s.finish();
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot open config " + path.string());
  std::stringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream out;
  const auto num = [](double v) { return format_double(v); };
  out << "[array]\n"
      << "n_elements = " << c.array.n_elements << '\n'
      << "pitch = " << num(c.array.pitch) << '\n'
      << "center_frequency = " << num(c.array.center_frequency) << '\n'
      << "sampling_frequency = " << num(c.array.sampling_frequency) << '\n'
      << "sound_speed = " << num(c.array.sound_speed) << "\n\n"
      << "[pulse]\n"
      << "n_cycles = " << num(c.pulse.n_cycles) << "\n\n"
      << "[phantom]\n"
      << "x_min = " << num(c.phantom.x_min) << '\n'
      << "x_max = " << num(c.phantom.x_max) << '\n'
      << "z_min = " << num(c.phantom.z_min) << '\n'
      << "z_max = " << num(c.phantom.z_max) << '\n'
      << "speckle_density = " << num(c.phantom.speckle_density) << '\n'
      << "pins = " << pins_text(c.phantom.pins) << '\n'
      << "cysts = " << cysts_text(c.phantom.cysts) << "\n\n"
      << "[angles]\n"
      << "count = " << c.angles.count << '\n'
      << "span_deg = " << num(c.angles.span_deg) << "\n\n"
      << "[grid]\n"
      << "nx = " << c.grid.nx << '\n'
      << "nz = " << c.grid.nz << '\n'
      << "z0 = " << num(c.grid.z0) << '\n'
      << "dx_wavelengths = " << num(c.grid.dx_wavelengths) << '\n'
      << "dz_wavelengths = " << num(c.grid.dz_wavelengths) << "\n\n"
      << "[beamform]\n"
      << "f_number = " << num(c.beamform.f_number) << '\n'
      << "sound_speed = " << num(c.beamform.sound_speed) << "\n\n"
      << "[aberration]\n"
      << "type = " << to_string(c.aberration.kind) << '\n'
      << "law_file = " << c.aberration.law_file << '\n'
      << "peak_to_peak_phase = " << num(c.aberration.peak_to_peak_phase) << '\n'
      << "correlation_angle_deg = " << num(c.aberration.correlation_angle_deg) << '\n'
      << "rms_delay = " << num(c.aberration.rms_delay) << '\n'
      << "correlation_length = " << num(c.aberration.correlation_length) << "\n\n"
      << "[correction]\n"
      << "patch_nx = " << c.correction.patch_nx << '\n'
      << "patch_nz = " << c.correction.patch_nz << '\n'
      << "overlap = " << num(c.correction.overlap) << '\n'
      << "mode = " << to_string(c.correction.mode) << "\n\n"
      << "[run]\n"
      << "seed = " << c.run.seed << '\n'
      << "threads = " << c.run.threads << '\n'
      << "output_dir = " << c.run.output_dir << '\n'
      << "format = " << to_string(c.run.format) << '\n'
      << "dynamic_range_db = " << num(c.run.dynamic_range_db) << '\n';
  return out.str();
}

}  // namespace svdbf
