#include "optopulse_cli/config.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

namespace optopulse::cli {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string join(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

std::string indexed(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

void check_format(Fields& f, std::string_view expected) {
  const std::string tag = f.text("format");
  if (tag != expected) {
    throw ConfigError(f.path_of("format"), "expected \"" + std::string(expected) + "\", got \"" + tag + "\"");
  }
}

double positive(Fields& f, std::string_view key) {
  const double v = f.number(key);
  if (!(v > 0.0)) throw ConfigError(f.path_of(key), "must be positive");
  return v;
}

double non_negative(Fields& f, std::string_view key, double fallback) {
  const double v = f.number_or(key, fallback);
  if (!(v >= 0.0)) throw ConfigError(f.path_of(key), "must be >= 0");
  return v;
}

protocol::InitialState parse_state(Fields f) {
  protocol::InitialState s;
  const std::string kind = f.text("kind");
  if (kind == "vacuum") {
    s = protocol::InitialState::thermal(0.0);
  } else if (kind == "thermal") {
    s = protocol::InitialState::thermal(non_negative(f, "nbar", 0.0));
    if (!f.has("nbar")) throw ConfigError(f.path_of("nbar"), "missing field");
  } else if (kind == "coherent") {
    const nlohmann::json& a = f.array("alpha");
    if (a.size() != 2 || !a[0].is_number() || !a[1].is_number()) {
      throw ConfigError(f.path_of("alpha"), "expected [re, im]");
    }
    s.kind = protocol::InitialState::Kind::Coherent;
    s.alpha = {a[0].get<double>(), a[1].get<double>()};
  } else if (kind == "cat") {
    s.kind = protocol::InitialState::Kind::Cat;
    s.delta = f.number("delta");
    const std::string axis = f.text_or("axis", "+i");
    if (axis == "+i") {
      s.axis = hilbert::CatAxis::PlusI;
    } else if (axis == "-i") {
      s.axis = hilbert::CatAxis::MinusI;
    } else if (axis == "real") {
      s.axis = hilbert::CatAxis::Real;
    } else {
      throw ConfigError(f.path_of("axis"), "expected \"+i\", \"-i\" or \"real\"");
    }
  } else {
    throw ConfigError(f.path_of("kind"), "expected vacuum, thermal, coherent or cat");
  }
  s.n_max = static_cast<int>(f.count_or("n_max", 0));
  f.finish();
  return s;
}

measurement::MeasurementSpec parse_measurement(Fields& f) {
  measurement::MeasurementSpec m;
  m.chi = non_negative(f, "chi", 0.0);
  if (!f.has("chi")) throw ConfigError(f.path_of("chi"), "missing field");
  m.omega_kick = f.number_or("omega", 0.0);
  m.var_pl_in = f.number_or("phase_variance", 0.5);
  if (!(m.var_pl_in > 0.0)) throw ConfigError(f.path_of("phase_variance"), "must be positive");
  m.extra_noise_var = non_negative(f, "extra_noise", 0.0);
  const std::string mode = f.text_or("noise_mode", "record_only");
  if (mode == "record_only") {
    m.noise_mode = measurement::NoiseMode::RecordOnly;
  } else if (mode == "subsumed") {
    m.noise_mode = measurement::NoiseMode::Subsumed;
  } else {
    throw ConfigError(f.path_of("noise_mode"), "expected record_only or subsumed");
  }
  return m;
}

gaussian::BathSpec parse_bath(Fields f, std::optional<double> omega_m, const std::string& omega_path) {
  if (!omega_m) throw ConfigError(omega_path, "missing field (required by " + f.path_of("") + ")");
  const double q = positive(f, "quality_factor");
  const std::string model_name = f.text_or("occupation_model", "bose_einstein");
  gaussian::OccupationModel model = gaussian::OccupationModel::BoseEinstein;
  if (model_name == "high_temperature") {
    model = gaussian::OccupationModel::HighTemperature;
  } else if (model_name != "bose_einstein") {
    throw ConfigError(f.path_of("occupation_model"), "expected bose_einstein or high_temperature");
  }
  gaussian::BathSpec bath;
  if (f.has("temperature") == f.has("nbar")) {
    throw ConfigError(f.path_of("temperature"), "exactly one of temperature or nbar is required");
  }
  if (f.has("temperature")) {
    bath = gaussian::BathSpec::from_temperature(q, non_negative(f, "temperature", 0.0), *omega_m, model);
  } else {
    bath = gaussian::BathSpec::from_quality(q, non_negative(f, "nbar", 0.0), *omega_m);
  }
  f.finish();
  return bath;
}

protocol::Step parse_step(const nlohmann::json& j, const std::string& path, std::optional<double> omega_m,
                          const std::string& omega_path) {
  if (!j.is_object() || j.size() != 1) {
    throw ConfigError(path, "each step is an object with exactly one of pulse, evolve, thermalize");
  }
  const std::string kind = j.begin().key();
  Fields f(j.begin().value(), join(path, kind));
  if (kind == "pulse") {
    protocol::PulseStep s{parse_measurement(f), std::nullopt};
    if (f.has("outcome")) s.forced_outcome = f.number("outcome");
    f.finish();
    return s;
  }
  if (kind == "evolve") {
    if (f.has("theta") == f.has("duration")) {
      throw ConfigError(f.path_of("theta"), "exactly one of theta or duration is required");
    }
    protocol::EvolveStep s;
    if (f.has("theta")) {
      s.theta = f.number("theta");
    } else {
      if (!omega_m) throw ConfigError(omega_path, "missing field (required by " + f.path_of("duration") + ")");
      s.theta = *omega_m * non_negative(f, "duration", 0.0);
    }
    f.finish();
    return s;
  }
  if (kind == "thermalize") {
    protocol::ThermalizeStep s;
    s.duration = non_negative(f, "duration", 0.0);
    if (!f.has("duration")) throw ConfigError(f.path_of("duration"), "missing field");
    s.bath = parse_bath(f.object("bath"), omega_m, omega_path);
    f.finish();
    return s;
  }
  throw ConfigError(path, "unknown step kind \"" + kind + "\"");
}

}  // namespace

ConfigError::ConfigError(std::string path, const std::string& message)
    : std::runtime_error(path.empty() ? message : path + ": " + message), path_(std::move(path)) {}

Fields::Fields(const nlohmann::json& j, std::string path) : j_(&j), path_(std::move(path)) {
  if (!j.is_object()) throw ConfigError(path_, "expected an object");
}

bool Fields::has(std::string_view key) const { return j_->contains(key); }

std::string Fields::path_of(std::string_view key) const { return key.empty() ? path_ : join(path_, key); }

const nlohmann::json& Fields::require(std::string_view key) {
  const auto it = j_->find(key);
  if (it == j_->end()) throw ConfigError(path_of(key), "missing field");
  used_.emplace(key);
  return *it;
}

double Fields::number(std::string_view key) {
  const nlohmann::json& v = require(key);
  if (!v.is_number()) throw ConfigError(path_of(key), "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(path_of(key), "must be finite");
  return d;
}

double Fields::number_or(std::string_view key, double fallback) { return has(key) ? number(key) : fallback; }

std::uint64_t Fields::count(std::string_view key) {
  const nlohmann::json& v = require(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw ConfigError(path_of(key), "expected a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

std::uint64_t Fields::count_or(std::string_view key, std::uint64_t fallback) {
  return has(key) ? count(key) : fallback;
}

std::string Fields::text(std::string_view key) {
  const nlohmann::json& v = require(key);
  if (!v.is_string()) throw ConfigError(path_of(key), "expected a string");
  return v.get<std::string>();
}

std::string Fields::text_or(std::string_view key, std::string fallback) {
  return has(key) ? text(key) : std::move(fallback);
}

Fields Fields::object(std::string_view key) { return Fields(require(key), path_of(key)); }

const nlohmann::json& Fields::array(std::string_view key) {
  const nlohmann::json& v = require(key);
  if (!v.is_array()) throw ConfigError(path_of(key), "expected an array");
  return v;
}

void Fields::finish() const {
  for (const auto& [key, value] : j_->items()) {
    if (!used_.contains(key)) throw ConfigError(path_of(key), "unknown key");
  }
}

nlohmann::json load_json(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("", "cannot open config file " + file.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("", "invalid JSON in " + file.string() + ": " + e.what());
  }
}

PulseConfig parse_pulse_config(const nlohmann::json& j, const std::filesystem::path& base) {
  Fields f(j, "");
  check_format(f, "pulse-config v1");
  PulseConfig c;
  {
    Fields p = f.object("physical");
    c.physical.wavelength = positive(p, "wavelength");
    c.physical.cavity_length = positive(p, "cavity_length");
    c.physical.mass = positive(p, "mass");
    c.physical.omega_m = kTwoPi * positive(p, "mechanical_frequency");
    c.physical.finesse = positive(p, "finesse");
    p.finish();
  }
  c.n_photons = positive(f, "n_photons");
  c.eta = f.number_or("detection_efficiency", 1.0);
  if (!(c.eta > 0.0 && c.eta <= 1.0)) throw ConfigError(f.path_of("detection_efficiency"), "must lie in (0, 1]");
  {
    Fields d = f.object("drive");
    c.drive = d.text("shape");
    if (c.drive == "gaussian" || c.drive == "square" || c.drive == "exponential") {
      c.drive_width = positive(d, "width");
    } else if (c.drive == "file") {
      c.drive_file = base / d.text("path");
    } else if (c.drive != "optimal") {
      throw ConfigError(d.path_of("shape"), "expected optimal, gaussian, square, exponential or file");
    }
    d.finish();
  }
  if (f.has("time_grid")) {
    Fields g = f.object("time_grid");
    c.grid_points = g.count_or("points", c.grid_points);
    c.grid_span = g.number_or("span", c.grid_span);
    if (c.grid_points < 16) throw ConfigError(g.path_of("points"), "must be >= 16");
    if (!(c.grid_span > 0.0)) throw ConfigError(g.path_of("span"), "must be positive");
    g.finish();
  }
  c.seed = f.count_or("seed", 0);
  f.finish();
  return c;
}

TomographyConfig parse_tomography_config(const nlohmann::json& j) {
  Fields f(j, "");
  check_format(f, "tomography-config v1");
  TomographyConfig c;
  c.state = parse_state(f.object("state"));
  {
    Fields m = f.object("measurement");
    c.spec = parse_measurement(m);
    m.finish();
  }
  c.angles = f.count_or("angles", c.angles);
  if (c.angles < 12) throw ConfigError(f.path_of("angles"), "at least 12 angles are required");
  const std::string mode = f.text_or("mode", "exact");
  if (mode == "exact") {
    c.mode = TomographyConfig::Mode::Exact;
  } else if (mode == "sampled") {
    c.mode = TomographyConfig::Mode::Sampled;
    c.shots = f.count("shots");
    if (c.shots < 100) throw ConfigError(f.path_of("shots"), "must be >= 100");
    c.bins = f.count_or("bins", c.bins);
    if (c.bins < 8) throw ConfigError(f.path_of("bins"), "must be >= 8");
    c.regularization = 1e-2;
  } else {
    throw ConfigError(f.path_of("mode"), "expected exact or sampled");
  }
  if (f.has("kernel")) {
    Fields k = f.object("kernel");
    const std::string source = k.text("source");
    if (source == "exact") {
      c.kernel = TomographyConfig::KernelSource::Exact;
    } else if (source == "calibrated") {
      c.kernel = TomographyConfig::KernelSource::Calibrated;
      c.kernel_shots = k.count_or("shots", c.kernel_shots);
    } else {
      throw ConfigError(k.path_of("source"), "expected exact or calibrated");
    }
    k.finish();
  }
  c.regularization = non_negative(f, "regularization", c.regularization);
  if (f.has("reconstruction")) {
    Fields r = f.object("reconstruction");
    c.reconstruction.half_width = r.number_or("half_width", c.reconstruction.half_width);
    c.reconstruction.grid_points = r.count_or("grid_points", c.reconstruction.grid_points);
    c.reconstruction.apodization = non_negative(r, "apodization", c.reconstruction.apodization);
    if (!(c.reconstruction.half_width > 0.0)) throw ConfigError(r.path_of("half_width"), "must be positive");
    if (c.reconstruction.grid_points < 3) throw ConfigError(r.path_of("grid_points"), "must be >= 3");
    r.finish();
  }
  c.seed = f.count_or("seed", 0);
  f.finish();
  return c;
}

ProtocolConfig parse_protocol_config(const nlohmann::json& j) {
  Fields f(j, "");
  check_format(f, "protocol-config v1");
  ProtocolConfig c;
  std::optional<double> omega_m;
  if (f.has("mechanical_frequency")) omega_m = kTwoPi * positive(f, "mechanical_frequency");
  const std::string omega_path = f.path_of("mechanical_frequency");
  c.sequence.master_seed = f.count_or("seed", 0);

  if (f.has("purify") == f.has("sequence")) {
    throw ConfigError(f.path_of("sequence"), "exactly one of purify or sequence is required");
  }
  if (f.has("purify")) {
    Fields p = f.object("purify");
    c.mode = ProtocolConfig::Mode::Purify;
    c.nbar = non_negative(p, "nbar", 0.0);
    if (!p.has("nbar")) throw ConfigError(p.path_of("nbar"), "missing field");
    c.chi = positive(p, "chi");
    c.omega = p.number_or("omega", 0.0);
    if (p.has("bath")) c.bath = parse_bath(p.object("bath"), omega_m, omega_path);
    p.finish();
  } else {
    Fields s = f.object("sequence");
    c.mode = ProtocolConfig::Mode::Sequence;
    c.sequence.initial = parse_state(s.object("initial"));
    const std::string rep = s.text_or("representation", "gaussian");
    if (rep == "gaussian") {
      c.sequence.representation = protocol::Representation::Gaussian;
    } else if (rep == "fock") {
      c.sequence.representation = protocol::Representation::Fock;
    } else {
      throw ConfigError(s.path_of("representation"), "expected gaussian or fock");
    }
    if (rep == "gaussian" && c.sequence.initial.kind == protocol::InitialState::Kind::Cat) {
      throw ConfigError(s.path_of("representation"), "gaussian representation cannot hold a cat state");
    }
    const nlohmann::json& steps = s.array("steps");
    for (std::size_t i = 0; i < steps.size(); ++i) {
      protocol::Step step = parse_step(steps[i], indexed(s.path_of("steps"), i), omega_m, omega_path);
      if (std::holds_alternative<protocol::ThermalizeStep>(step) &&
          c.sequence.representation == protocol::Representation::Fock) {
        throw ConfigError(indexed(s.path_of("steps"), i), "thermalize requires the gaussian representation");
      }
      c.sequence.steps.push_back(std::move(step));
    }
    s.finish();
  }
  f.finish();
  return c;
}

}  // namespace optopulse::cli
