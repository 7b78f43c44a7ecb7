#pragma once

// Closed-form linewidth contributions that are not power broadening. All
// results are ordinary Hz.

#include <string>
#include <string_view>
#include <vector>

#include "eitmem/atomic_model.hpp"

namespace eitmem {

struct BroadeningInput {
  double temperature = 0.0;   // K
  double mass = 0.0;          // kg
  double wavevector = 0.0;    // k = 2π/λ, rad/m
  double delta_k_parallel = 0.0;  // 2π·ν_hf/c, rad/m
  double angle = 0.0;         // rad, small-angle domain [0, 0.1]
  double diffusion = 0.0;     // m²/s
  double beam_radius = 0.0;   // m

  void validate() const;
};

/// Inputs taken from an atom and a cell, at beam angle `angle`.
BroadeningInput broadening_input(const AtomSpec& atom, const CellSpec& cell, double angle = 0.0);

enum class DopplerRegime { ballistic, diffusive };

std::string_view to_string(DopplerRegime r);
/// Ballistic for vacuum (coated or reference) cells, diffusive with buffer gas.
DopplerRegime regime_for(CellKind kind);

/// RMS one-dimensional thermal velocity √(k_B·T/m), m/s.
double thermal_velocity(double temperature, double mass);

/// |Δk(θ)| = √(Δk∥² + (kθ)²), rad/m.
double wavevector_mismatch(const BroadeningInput& in);

/// Ballistic: |Δk|·v_th/2π. Diffusive: |Δk|²·D/2π.
double residual_doppler(const BroadeningInput& in, DopplerRegime regime);

/// Lowest diffusion mode across a beam of radius R: D·(2.405/R)²/2π.
double transit_broadening_diffusion(double diffusion, double beam_radius);

/// FWHM of exp(−|Δp|·t_TT) with Δp in ordinary Hz: 2·ln2/t_TT.
double cusp_fwhm_from_transit(double transit_time);
double transit_from_cusp_fwhm(double fwhm_hz);

struct BudgetEntry {
  std::string mechanism;
  double value_hz = 0.0;
};

/// Broadening table for a cell: ballistic residual Doppler, the diffusive
/// value and diffusion-mode transit for buffer-gas cells, and the intercept b.
std::vector<BudgetEntry> broadening_budget(const AtomSpec& atom, const CellSpec& cell,
                                           double angle = 0.0);

}  // namespace eitmem
