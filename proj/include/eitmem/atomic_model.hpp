#pragma once

// Level structure, decay tables and field conventions for the 85Rb D1
// hyperfine Lambda system.
//
// Level numbering (index 0..3 in code, 1..4 in comments):
//   1 = |5S1/2, F=2>   lower ground level, probe transition
//   2 = |5S1/2, F=3>   upper ground level, coupling transition
//   3 = |5P1/2, F'=2>  lower excited level, 362 MHz below level 4
//   4 = |5P1/2, F'=3>  excited level both lasers are referenced to
//
// All rates and splittings are stored in angular units (rad/s). JSON
// documents carry ordinary Hz and are converted at load time.

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace eitmem {

inline constexpr int kLevels = 4;

/// 4×4 table of rates in rad/s, indexed [n][m] with 0-based levels.
using RateTable = std::array<std::array<double, kLevels>, kLevels>;

enum class ModelVariant { three_level, four_level };

std::string_view to_string(ModelVariant v);
ModelVariant model_variant_from_string(std::string_view s);

struct DipoleMoments {
  double mu13 = 0.0;  // C m
  double mu14 = 0.0;
  double mu23 = 0.0;
  double mu24 = 0.0;
};

struct AtomSpec {
  std::string name;
  double ground_splitting = 0.0;   // ω21
  double excited_splitting = 0.0;  // ω43
  std::array<double, kLevels> decay{};  // total decay Γ1..Γ4
  DipoleMoments dipole;
  double mass = 0.0;        // kg
  double wavelength = 0.0;  // D1 vacuum wavelength, m

  /// Throws DomainError if any invariant is broken.
  void validate() const;

  /// Same atom with μ13 = μ23 = 0: the excited level 3 no longer couples to
  /// either field.
  AtomSpec three_level() const;

  /// D1 wavevector magnitude 2π/λ (rad/m).
  double wavevector() const;
};

AtomSpec apply_variant(const AtomSpec& atom, ModelVariant variant);

enum class CellKind { coated_paraffin, coated_alkene, buffer_gas, reference };

std::string_view to_string(CellKind k);
CellKind cell_kind_from_string(std::string_view s);

struct CellSpec {
  std::string name;
  CellKind kind = CellKind::reference;
  /// Doppler part of the optical-coherence dephasing (rad/s).
  double gamma_opt_doppler = 0.0;
  /// Buffer-gas collisional part of the optical-coherence dephasing (rad/s).
  double gamma_opt_pressure = 0.0;
  /// Zero-intensity EIT linewidth intercept b (ordinary Hz).
  /// Ground-coherence dephasing is γ12coll = 2π·b/2.
  double intercept_b_hz = 0.0;
  /// Excited-coherence dephasing override (rad/s); defaults to γ12coll.
  std::optional<double> gamma34_override;
  double buffer_pressure_torr = 0.0;
  double diffusion = 0.0;     // m^2/s
  double beam_radius = 0.0;   // m
  double cell_radius = 0.0;   // m
  double cell_length = 0.0;   // m
  double temperature = 0.0;   // K

  double gamma_opt_coll() const { return gamma_opt_doppler + gamma_opt_pressure; }
  double gamma12_coll() const;
  double gamma34_coll() const;

  void validate() const;
};

enum class FieldRole { probe, coupling };

struct FieldSpec {
  FieldRole role = FieldRole::probe;
  /// Half-amplitude E in ℰ(t) = E·exp(-iωt) + c.c. (V/m).
  double amplitude = 0.0;
  /// Δp from the 1–4 transition or Δc from the 2–4 transition (rad/s).
  double detuning = 0.0;
  /// Propagation angle relative to the coupling beam (rad).
  double angle = 0.0;

  void validate() const;
};

FieldSpec make_probe(double amplitude, double detuning = 0.0);
FieldSpec make_coupling(double amplitude, double detuning = 0.0);

// --- conventions -----------------------------------------------------------

/// I = 2·c·n·ε0·E² for the half-amplitude E (W/m²).
double intensity_of_field(double amplitude, double refractive_index = 1.0);
/// Inverse of intensity_of_field.
double field_of_intensity(double intensity, double refractive_index = 1.0);

/// Rabi frequency Ω = 2μE/ħ (rad/s).
double rabi_frequency(double dipole, double amplitude);

/// Dipole moment that yields Rabi frequency `rabi_ref` at intensity
/// `intensity_ref`: μ = ħΩ / (2E(I)).
double calibrate_dipole(double intensity_ref, double rabi_ref);

// --- presets ---------------------------------------------------------------

/// Probe calibration point: 2.8 µW/cm² ↔ 2π·50.6 kHz.
inline constexpr double kProbeCalibrationIntensity = 0.028;   // W/m²
inline constexpr double kProbeCalibrationRabiHz = 50.6e3;

AtomSpec default_rb85_d1();

std::vector<std::string> cell_preset_names();
/// Throws InputError for an unknown name.
CellSpec cell_preset(std::string_view name);

/// Resolves a preset name or, failing that, a JSON file path.
CellSpec load_cell(const std::string& preset_or_path);
AtomSpec load_atom(const std::string& preset_or_path);

// --- derived rate tables ---------------------------------------------------

/// γnm = ½(Γn + Γm) + γnm_coll for n ≠ m; diagonal is zero.
RateTable coherence_dephasing(const AtomSpec& atom, const CellSpec& cell);

/// Γ[m][n] is the population decay rate from level n into level m.
/// Excited level n branches into the ground levels in proportion to
/// μ1n² : μ2n²; equal split if both moments vanish.
RateTable branching_rates(const AtomSpec& atom);

// --- JSON ------------------------------------------------------------------

nlohmann::json to_json(const AtomSpec& atom);
nlohmann::json to_json(const CellSpec& cell);
nlohmann::json to_json(const FieldSpec& field);
AtomSpec atom_from_json(const nlohmann::json& j);
CellSpec cell_from_json(const nlohmann::json& j);
FieldSpec field_from_json(const nlohmann::json& j);

}  // namespace eitmem
