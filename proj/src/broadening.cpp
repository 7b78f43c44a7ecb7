#include "eitmem/broadening.hpp"

#include <cmath>
#include <numbers>

#include "eitmem/errors.hpp"
#include "eitmem/units.hpp"

namespace eitmem {

namespace {

// First zero of the Bessel function J0.
constexpr double kBesselZero = 2.405;
constexpr double kMaxAngle = 0.1;

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw DomainError(std::string(what) + " must be positive and finite");
}

}  // namespace

void BroadeningInput::validate() const {
  if (!(angle >= 0.0 && angle <= kMaxAngle))
    throw DomainError("beam angle must lie in [0, 0.1] rad");
  if (!(delta_k_parallel >= 0.0)) throw DomainError("delta_k_parallel must be >= 0");
  if (!(wavevector >= 0.0)) throw DomainError("wavevector must be >= 0");
}

BroadeningInput broadening_input(const AtomSpec& atom, const CellSpec& cell, double angle) {
  BroadeningInput in;
  in.temperature = cell.temperature;
  in.mass = atom.mass;
  in.wavevector = atom.wavevector();
  in.delta_k_parallel = atom.ground_splitting / constants::speed_of_light;
  in.angle = angle;
  in.diffusion = cell.diffusion;
  in.beam_radius = cell.beam_radius;
  in.validate();
  return in;
}

std::string_view to_string(DopplerRegime r) {
  return r == DopplerRegime::ballistic ? "ballistic" : "diffusive";
}

DopplerRegime regime_for(CellKind kind) {
  return kind == CellKind::buffer_gas ? DopplerRegime::diffusive : DopplerRegime::ballistic;
}

double thermal_velocity(double temperature, double mass) {
  require_positive(temperature, "temperature");
  require_positive(mass, "mass");
  return std::sqrt(constants::boltzmann * temperature / mass);
}

double wavevector_mismatch(const BroadeningInput& in) {
  in.validate();
  return std::hypot(in.delta_k_parallel, in.wavevector * in.angle);
}

double residual_doppler(const BroadeningInput& in, DopplerRegime regime) {
  in.validate();
  const double dk = wavevector_mismatch(in);
  if (regime == DopplerRegime::ballistic)
    return dk * thermal_velocity(in.temperature, in.mass) / constants::two_pi;
  require_positive(in.diffusion, "diffusion coefficient");
  return dk * dk * in.diffusion / constants::two_pi;
}

double transit_broadening_diffusion(double diffusion, double beam_radius) {
  require_positive(diffusion, "diffusion coefficient");
  require_positive(beam_radius, "beam radius");
  const double q = kBesselZero / beam_radius;
  return diffusion * q * q / constants::two_pi;
}

double cusp_fwhm_from_transit(double transit_time) {
  require_positive(transit_time, "transit time");
  return 2.0 * std::numbers::ln2 / transit_time;
}

double transit_from_cusp_fwhm(double fwhm_hz) {
  require_positive(fwhm_hz, "cusp FWHM");
  return 2.0 * std::numbers::ln2 / fwhm_hz;
}

std::vector<BudgetEntry> broadening_budget(const AtomSpec& atom, const CellSpec& cell,
                                           double angle) {
  const BroadeningInput in = broadening_input(atom, cell, angle);
  std::vector<BudgetEntry> out;
  out.push_back({"residual_doppler_ballistic", residual_doppler(in, DopplerRegime::ballistic)});
  if (regime_for(cell.kind) == DopplerRegime::diffusive) {
    out.push_back({"residual_doppler_diffusive", residual_doppler(in, DopplerRegime::diffusive)});
    out.push_back({"transit_diffusion",
                   transit_broadening_diffusion(cell.diffusion, cell.beam_radius)});
  }
  out.push_back({"intercept_b", cell.intercept_b_hz});
  return out;
}

}  // namespace eitmem
