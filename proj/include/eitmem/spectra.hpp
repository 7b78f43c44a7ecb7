#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "eitmem/atomic_model.hpp"

namespace eitmem {

/// Probe absorption sampled against probe detuning.
struct Spectrum {
  std::vector<double> detuning;    // Δp, rad/s, strictly increasing
  std::vector<double> absorption;  // α_p = −Im σ14, arbitrary units
  ModelVariant variant = ModelVariant::four_level;
  nlohmann::json fingerprint;      // full parameter set that produced it

  /// ≥ 11 samples, strictly increasing detuning, finite absorption.
  void validate() const;
  std::size_t size() const { return detuning.size(); }
};

/// Steady-state α_p at each probe detuning in `probe_detunings` (rad/s).
/// `probe.detuning` is ignored. Solver failures are rethrown with the
/// offending Δp in the message. Grid points run in parallel.
Spectrum eit_spectrum(const AtomSpec& atom, const CellSpec& cell, const FieldSpec& coupling,
                      const FieldSpec& probe, std::span<const double> probe_detunings,
                      ModelVariant variant = ModelVariant::four_level);

/// Absorption without the coupling field, for atoms held in |1> (the state the
/// coupling field pumps them into). Weak-probe linear response.
Spectrum no_coupling_reference(const AtomSpec& atom, const CellSpec& cell,
                               const FieldSpec& probe, std::span<const double> probe_detunings,
                               ModelVariant variant = ModelVariant::four_level);

/// One spectrum per coupling detuning; the probe grid is `offsets` (rad/s)
/// around the two-photon resonance, Δp = Δc + offset.
std::vector<Spectrum> detuning_series(const AtomSpec& atom, const CellSpec& cell,
                                      const FieldSpec& coupling, const FieldSpec& probe,
                                      std::span<const double> coupling_detunings,
                                      std::span<const double> offsets,
                                      ModelVariant variant = ModelVariant::four_level);

/// Transparency dip measured against the straight line through the two end
/// samples (the local absorption background).
struct DipFeature {
  std::size_t index = 0;   // sample of the dip minimum
  double center = 0.0;     // rad/s, parabolic refinement around the minimum
  double depth = 0.0;      // background − minimum, > 0
  double fwhm_hz = 0.0;
};

/// Throws NoTransparencyFeature for flat, monotone or purely absorptive input.
DipFeature locate_dip(const Spectrum& s);

/// Full width at half depth of the dip, in ordinary Hz.
double extract_fwhm(const Spectrum& s);

/// (reference − α)/reference at the point of largest reduction, clamped to
/// [0, 1]. Throws SolverError if the reference vanishes there.
double extract_contrast(const Spectrum& s, const Spectrum& reference);

/// Signed area of α − background on each side of the largest feature,
/// (A_right − A_left) / ∫|α − background|. Negative when the transparency
/// sits above the absorption in probe frequency.
double feature_asymmetry(const Spectrum& s);

/// ∫(α − background) dΔp in units of α·Hz. Negative for net transparency,
/// positive for net absorption.
double net_feature_area(const Spectrum& s);

/// Rough three-level FWHM estimate (Hz), used only to size probe grids:
/// 2(γ12 + Σn Ω2n²/(4γ2n)) / 2π.
double estimate_fwhm_hz(const AtomSpec& atom, const CellSpec& cell, const FieldSpec& coupling,
                        const FieldSpec& probe);

/// Symmetric probe grid of `points` samples spanning ±half_widths × the FWHM
/// estimate, in rad/s.
std::vector<double> auto_probe_grid(const AtomSpec& atom, const CellSpec& cell,
                                    const FieldSpec& coupling, const FieldSpec& probe,
                                    std::size_t points = 2001, double half_widths = 15.0);

struct LinewidthPoint {
  double intensity = 0.0;  // coupling intensity, W/m²
  double fwhm_hz = 0.0;
};

/// FWHM at each coupling intensity, coupling on resonance, with an
/// auto-sized grid per intensity.
std::vector<LinewidthPoint> linewidth_vs_intensity(
    const AtomSpec& atom, const CellSpec& cell, std::span<const double> intensities,
    const FieldSpec& probe, ModelVariant variant = ModelVariant::four_level,
    std::size_t points = 2001, double half_widths = 15.0);

/// CSV with columns delta_p_hz, alpha_p.
std::string spectrum_csv(const Spectrum& s);

}  // namespace eitmem
