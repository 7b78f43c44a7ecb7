#include "eitmem/atomic_model.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "eitmem/errors.hpp"
#include "eitmem/units.hpp"

namespace eitmem {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw DomainError(what);
}

bool finite_nonneg(double x) { return std::isfinite(x) && x >= 0.0; }

}  // namespace

std::string_view to_string(ModelVariant v) {
  return v == ModelVariant::three_level ? "three-level" : "four-level";
}

ModelVariant model_variant_from_string(std::string_view s) {
  if (s == "three-level") return ModelVariant::three_level;
  if (s == "four-level") return ModelVariant::four_level;
  throw InputError("unknown model variant '" + std::string(s) +
                   "' (expected three-level or four-level)");
}

std::string_view to_string(CellKind k) {
  switch (k) {
    case CellKind::coated_paraffin: return "coated-paraffin";
    case CellKind::coated_alkene: return "coated-alkene";
    case CellKind::buffer_gas: return "buffer-gas";
    case CellKind::reference: return "reference";
  }
  return "reference";
}

CellKind cell_kind_from_string(std::string_view s) {
  if (s == "coated-paraffin") return CellKind::coated_paraffin;
  if (s == "coated-alkene") return CellKind::coated_alkene;
  if (s == "buffer-gas") return CellKind::buffer_gas;
  if (s == "reference") return CellKind::reference;
  throw InputError("unknown cell kind '" + std::string(s) + "'");
}

// --- AtomSpec --------------------------------------------------------------

void AtomSpec::validate() const {
  require(std::isfinite(ground_splitting) && ground_splitting > 0.0,
          "atom: ground splitting must be > 0");
  require(std::isfinite(excited_splitting) && excited_splitting > 0.0,
          "atom: excited splitting must be > 0");
  require(decay[0] == 0.0 && decay[1] == 0.0,
          "atom: ground levels must not decay (Γ1 = Γ2 = 0)");
  require(std::isfinite(decay[2]) && decay[2] > 0.0 && std::isfinite(decay[3]) &&
              decay[3] > 0.0,
          "atom: excited decay rates must be > 0");
  require(finite_nonneg(dipole.mu13) && finite_nonneg(dipole.mu14) &&
              finite_nonneg(dipole.mu23) && finite_nonneg(dipole.mu24),
          "atom: dipole moments must be >= 0");
  require(std::isfinite(mass) && mass > 0.0, "atom: mass must be > 0");
  require(std::isfinite(wavelength) && wavelength > 0.0,
          "atom: wavelength must be > 0");
}

AtomSpec AtomSpec::three_level() const {
  AtomSpec a = *this;
  a.dipole.mu13 = 0.0;
  a.dipole.mu23 = 0.0;
  return a;
}

double AtomSpec::wavevector() const { return constants::two_pi / wavelength; }

AtomSpec apply_variant(const AtomSpec& atom, ModelVariant variant) {
  return variant == ModelVariant::three_level ? atom.three_level() : atom;
}

// --- CellSpec --------------------------------------------------------------

double CellSpec::gamma12_coll() const {
  return angular_from_hz(intercept_b_hz / 2.0);
}

double CellSpec::gamma34_coll() const {
  return gamma34_override.value_or(gamma12_coll());
}

void CellSpec::validate() const {
  require(finite_nonneg(gamma_opt_doppler) && finite_nonneg(gamma_opt_pressure),
          "cell '" + name + "': optical dephasing must be >= 0");
  require(finite_nonneg(intercept_b_hz), "cell '" + name + "': intercept b must be >= 0");
  require(!gamma34_override || finite_nonneg(*gamma34_override),
          "cell '" + name + "': gamma34 must be >= 0");
  require(finite_nonneg(buffer_pressure_torr) && finite_nonneg(diffusion) &&
              finite_nonneg(beam_radius) && finite_nonneg(cell_radius) &&
              finite_nonneg(cell_length) && finite_nonneg(temperature),
          "cell '" + name + "': geometry and thermodynamic fields must be >= 0");
  if (kind == CellKind::buffer_gas) {
    require(diffusion > 0.0, "cell '" + name + "': buffer-gas cell needs D > 0");
  }
}

// --- FieldSpec -------------------------------------------------------------

void FieldSpec::validate() const {
  require(finite_nonneg(amplitude), "field amplitude must be >= 0");
  require(std::isfinite(detuning), "field detuning must be finite");
  require(std::isfinite(angle), "field angle must be finite");
}

FieldSpec make_probe(double amplitude, double detuning) {
  return FieldSpec{FieldRole::probe, amplitude, detuning, 0.0};
}

FieldSpec make_coupling(double amplitude, double detuning) {
  return FieldSpec{FieldRole::coupling, amplitude, detuning, 0.0};
}

// --- conventions -----------------------------------------------------------

// The printed relation I = ½cnε0E² does not reproduce the quoted
// (23 V/m, 2.9 W/m²) and (64 V/m, 21.8 W/m²) pairs; with E the half-amplitude
// of ℰ = E e^{-iωt} + c.c. the peak field is 2E and I = 2cnε0E² does.
double intensity_of_field(double amplitude, double refractive_index) {
  require(std::isfinite(amplitude) && amplitude >= 0.0,
          "field amplitude must be >= 0");
  require(std::isfinite(refractive_index) && refractive_index > 0.0,
          "refractive index must be > 0");
  return 2.0 * constants::speed_of_light * refractive_index * constants::epsilon0 *
         amplitude * amplitude;
}

double field_of_intensity(double intensity, double refractive_index) {
  require(std::isfinite(intensity) && intensity >= 0.0, "intensity must be >= 0");
  require(std::isfinite(refractive_index) && refractive_index > 0.0,
          "refractive index must be > 0");
  return std::sqrt(intensity / (2.0 * constants::speed_of_light * refractive_index *
                                constants::epsilon0));
}

double rabi_frequency(double dipole, double amplitude) {
  return 2.0 * dipole * amplitude / constants::hbar;
}

double calibrate_dipole(double intensity_ref, double rabi_ref) {
  require(std::isfinite(intensity_ref) && intensity_ref > 0.0,
          "calibration intensity must be > 0");
  require(std::isfinite(rabi_ref) && rabi_ref >= 0.0,
          "calibration Rabi frequency must be >= 0");
  return constants::hbar * rabi_ref / (2.0 * field_of_intensity(intensity_ref));
}

// --- presets ---------------------------------------------------------------

AtomSpec default_rb85_d1() {
  const double mu = calibrate_dipole(kProbeCalibrationIntensity,
                                     angular_from_hz(kProbeCalibrationRabiHz));
  AtomSpec a;
  a.name = "rb85-d1";
  a.ground_splitting = angular_from_hz(3.0357324e9);
  a.excited_splitting = angular_from_hz(362.0e6);
  a.decay = {0.0, 0.0, angular_from_hz(5.75e6), angular_from_hz(5.75e6)};
  a.dipole = {mu, mu, mu, mu};
  a.mass = 84.911789738 * constants::atomic_mass_unit;
  a.wavelength = 794.979e-9;
  return a;
}

namespace {

CellSpec coated_cell(std::string name, CellKind kind, double b_hz) {
  CellSpec c;
  c.name = std::move(name);
  c.kind = kind;
  c.gamma_opt_doppler = angular_from_hz(500.0e6);
  c.intercept_b_hz = b_hz;
  c.beam_radius = 2.8e-3;
  c.cell_radius = 12.5e-3;
  c.cell_length = 75.0e-3;
  c.temperature = 295.0;
  return c;
}

}  // namespace

std::vector<std::string> cell_preset_names() {
  return {"ne-5torr", "alkene", "paraffin", "reference"};
}

CellSpec cell_preset(std::string_view name) {
  if (name == "ne-5torr") {
    CellSpec c = coated_cell("ne-5torr", CellKind::buffer_gas, 1.5e3);
    c.gamma_opt_pressure = angular_from_hz(25.0e6);
    c.buffer_pressure_torr = 5.0;
    c.diffusion = 30.0e-4;
    return c;
  }
  if (name == "alkene") return coated_cell("alkene", CellKind::coated_alkene, 16.0e3);
  if (name == "paraffin")
    return coated_cell("paraffin", CellKind::coated_paraffin, 33.3e3);
  if (name == "reference") {
    // No coating, no buffer gas: the zero-intensity width is the transit cusp,
    // FWHM = 2 ln2 / t_TT with t_TT = 7.2 µs.
    return coated_cell("reference", CellKind::reference,
                       2.0 * std::numbers::ln2 / 7.2e-6);
  }
  throw InputError("unknown cell preset '" + std::string(name) + "'");
}

namespace {

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("not a preset name and cannot open file '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("invalid JSON in '" + path + "': " + e.what());
  }
}

}  // namespace

CellSpec load_cell(const std::string& preset_or_path) {
  for (const auto& n : cell_preset_names())
    if (n == preset_or_path) return cell_preset(n);
  return cell_from_json(read_json_file(preset_or_path));
}

AtomSpec load_atom(const std::string& preset_or_path) {
  if (preset_or_path == "rb85-d1") return default_rb85_d1();
  return atom_from_json(read_json_file(preset_or_path));
}

// --- rate tables -----------------------------------------------------------

RateTable coherence_dephasing(const AtomSpec& atom, const CellSpec& cell) {
  RateTable g{};
  for (int n = 0; n < kLevels; ++n) {
    for (int m = 0; m < kLevels; ++m) {
      if (n == m) continue;
      const int lo = std::min(n, m);
      const int hi = std::max(n, m);
      double coll = cell.gamma_opt_coll();  // optical pairs 1–3, 1–4, 2–3, 2–4
      if (lo == 0 && hi == 1) coll = cell.gamma12_coll();
      if (lo == 2 && hi == 3) coll = cell.gamma34_coll();
      g[n][m] = 0.5 * (atom.decay[n] + atom.decay[m]) + coll;
    }
  }
  return g;
}

RateTable branching_rates(const AtomSpec& atom) {
  RateTable rates{};
  const std::array<std::array<double, 2>, 2> mu = {
      {{atom.dipole.mu13, atom.dipole.mu23}, {atom.dipole.mu14, atom.dipole.mu24}}};
  for (int e = 0; e < 2; ++e) {
    const int n = 2 + e;
    const double w1 = mu[e][0] * mu[e][0];
    const double w2 = mu[e][1] * mu[e][1];
    const double total = w1 + w2;
    const double f1 = total > 0.0 ? w1 / total : 0.5;
    rates[0][n] = atom.decay[n] * f1;
    rates[1][n] = atom.decay[n] - rates[0][n];
  }
  return rates;
}

// --- JSON ------------------------------------------------------------------

nlohmann::json to_json(const AtomSpec& a) {
  return {
      {"name", a.name},
      {"ground_splitting_hz", hz_from_angular(a.ground_splitting)},
      {"excited_splitting_hz", hz_from_angular(a.excited_splitting)},
      {"decay_hz",
       {hz_from_angular(a.decay[0]), hz_from_angular(a.decay[1]),
        hz_from_angular(a.decay[2]), hz_from_angular(a.decay[3])}},
      {"dipole_moments_cm",
       {{"mu13", a.dipole.mu13},
        {"mu14", a.dipole.mu14},
        {"mu23", a.dipole.mu23},
        {"mu24", a.dipole.mu24}}},
      {"mass_kg", a.mass},
      {"wavelength_m", a.wavelength},
  };
}

nlohmann::json to_json(const CellSpec& c) {
  nlohmann::json j = {
      {"name", c.name},
      {"kind", std::string(to_string(c.kind))},
      {"gamma_opt_doppler_hz", hz_from_angular(c.gamma_opt_doppler)},
      {"gamma_opt_pressure_hz", hz_from_angular(c.gamma_opt_pressure)},
      {"intercept_b_hz", c.intercept_b_hz},
      {"buffer_pressure_torr", c.buffer_pressure_torr},
      {"diffusion_m2_s", c.diffusion},
      {"beam_radius_m", c.beam_radius},
      {"cell_radius_m", c.cell_radius},
      {"cell_length_m", c.cell_length},
      {"temperature_k", c.temperature},
  };
  if (c.gamma34_override) j["gamma34_coll_hz"] = hz_from_angular(*c.gamma34_override);
  return j;
}

nlohmann::json to_json(const FieldSpec& f) {
  return {
      {"role", f.role == FieldRole::probe ? "probe" : "coupling"},
      {"amplitude_v_m", f.amplitude},
      {"detuning_hz", hz_from_angular(f.detuning)},
      {"angle_rad", f.angle},
  };
}

AtomSpec atom_from_json(const nlohmann::json& j) {
  try {
    AtomSpec a;
    a.name = j.value("name", std::string("custom"));
    a.ground_splitting = angular_from_hz(j.at("ground_splitting_hz").get<double>());
    a.excited_splitting = angular_from_hz(j.at("excited_splitting_hz").get<double>());
    const auto& d = j.at("decay_hz");
    if (!d.is_array() || d.size() != 4) throw InputError("atom: decay_hz needs 4 entries");
    for (int i = 0; i < kLevels; ++i) a.decay[i] = angular_from_hz(d.at(i).get<double>());
    const auto& mu = j.at("dipole_moments_cm");
    a.dipole = {mu.at("mu13").get<double>(), mu.at("mu14").get<double>(),
                mu.at("mu23").get<double>(), mu.at("mu24").get<double>()};
    a.mass = j.at("mass_kg").get<double>();
    a.wavelength = j.at("wavelength_m").get<double>();
    a.validate();
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("atom JSON: ") + e.what());
  }
}

CellSpec cell_from_json(const nlohmann::json& j) {
  try {
    CellSpec c;
    c.name = j.value("name", std::string("custom"));
    c.kind = cell_kind_from_string(j.at("kind").get<std::string>());
    c.gamma_opt_doppler = angular_from_hz(j.at("gamma_opt_doppler_hz").get<double>());
    c.gamma_opt_pressure = angular_from_hz(j.value("gamma_opt_pressure_hz", 0.0));
    c.intercept_b_hz = j.at("intercept_b_hz").get<double>();
    if (j.contains("gamma34_coll_hz"))
      c.gamma34_override = angular_from_hz(j.at("gamma34_coll_hz").get<double>());
    c.buffer_pressure_torr = j.value("buffer_pressure_torr", 0.0);
    c.diffusion = j.value("diffusion_m2_s", 0.0);
    c.beam_radius = j.at("beam_radius_m").get<double>();
    c.cell_radius = j.at("cell_radius_m").get<double>();
    c.cell_length = j.at("cell_length_m").get<double>();
    c.temperature = j.at("temperature_k").get<double>();
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("cell JSON: ") + e.what());
  }
}

FieldSpec field_from_json(const nlohmann::json& j) {
  try {
    FieldSpec f;
    const auto role = j.at("role").get<std::string>();
    if (role == "probe") {
      f.role = FieldRole::probe;
    } else if (role == "coupling") {
      f.role = FieldRole::coupling;
    } else {
      throw InputError("field role must be probe or coupling");
    }
    f.amplitude = j.at("amplitude_v_m").get<double>();
    f.detuning = angular_from_hz(j.value("detuning_hz", 0.0));
    f.angle = j.value("angle_rad", 0.0);
    f.validate();
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("field JSON: ") + e.what());
  }
}

}  // namespace eitmem
