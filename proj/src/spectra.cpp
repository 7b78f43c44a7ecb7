#include "eitmem/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "eitmem/bloch.hpp"
#include "eitmem/csv_format.hpp"
#include "eitmem/errors.hpp"
#include "eitmem/parallel.hpp"
#include "eitmem/units.hpp"

namespace eitmem {

void Spectrum::validate() const {
  if (detuning.size() != absorption.size())
    throw DomainError("spectrum: detuning and absorption lengths differ");
  if (detuning.size() < 11) throw DomainError("spectrum: needs at least 11 samples");
  for (std::size_t i = 1; i < detuning.size(); ++i)
    if (!(detuning[i] > detuning[i - 1]))
      throw DomainError("spectrum: detuning grid must be strictly increasing");
  for (double a : absorption)
    if (!std::isfinite(a)) throw DomainError("spectrum: non-finite absorption");
}

namespace {

nlohmann::json fingerprint(const AtomSpec& atom, const CellSpec& cell,
                           const FieldSpec& coupling, const FieldSpec& probe,
                           ModelVariant variant) {
  return {{"atom", to_json(atom)},
          {"cell", to_json(cell)},
          {"coupling", to_json(coupling)},
          {"probe", to_json(probe)},
          {"variant", std::string(to_string(variant))}};
}

// α − (straight line through the end samples).
std::vector<double> feature(const Spectrum& s) {
  const auto& x = s.detuning;
  const auto& y = s.absorption;
  const double x0 = x.front();
  const double slope = (y.back() - y.front()) / (x.back() - x0);
  std::vector<double> f(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) f[i] = y[i] - (y.front() + slope * (x[i] - x0));
  return f;
}

double trapezoid(std::span<const double> x, std::span<const double> y) {
  double sum = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) sum += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
  return sum;
}

double crossing(double xa, double fa, double xb, double fb, double level) {
  return xa + (level - fa) * (xb - xa) / (fb - fa);
}

}  // namespace

Spectrum eit_spectrum(const AtomSpec& atom, const CellSpec& cell, const FieldSpec& coupling,
                      const FieldSpec& probe, std::span<const double> probe_detunings,
                      ModelVariant variant) {
  Spectrum s;
  s.detuning.assign(probe_detunings.begin(), probe_detunings.end());
  s.variant = variant;
  s.fingerprint = fingerprint(atom, cell, coupling, probe, variant);
  s.absorption = parallel_map(s.detuning.size(), [&](std::size_t i) {
    FieldSpec p = probe;
    p.detuning = s.detuning[i];
    try {
      return probe_absorption(steady_state(build_generator(atom, cell, coupling, p, variant)));
    } catch (const SolverError& e) {
      std::ostringstream os;
      os << e.what() << " [at delta_p = " << hz_from_angular(s.detuning[i]) << " Hz]";
      throw SolverError(os.str());
    }
  });
  s.validate();
  return s;
}

Spectrum no_coupling_reference(const AtomSpec& atom, const CellSpec& cell,
                               const FieldSpec& probe, std::span<const double> probe_detunings,
                               ModelVariant variant) {
  const FieldSpec off = make_coupling(0.0);
  Spectrum s;
  s.detuning.assign(probe_detunings.begin(), probe_detunings.end());
  s.variant = variant;
  s.fingerprint = fingerprint(atom, cell, off, probe, variant);
  s.fingerprint["reference"] = "frozen |1> populations, coupling off";
  s.absorption = parallel_map(s.detuning.size(), [&](std::size_t i) {
    FieldSpec p = probe;
    p.detuning = s.detuning[i];
    const Generator g = build_generator(atom, cell, off, p, variant);
    return probe_absorption(frozen_population_response(g, {1.0, 0.0, 0.0, 0.0}));
  });
  s.validate();
  return s;
}

std::vector<Spectrum> detuning_series(const AtomSpec& atom, const CellSpec& cell,
                                      const FieldSpec& coupling, const FieldSpec& probe,
                                      std::span<const double> coupling_detunings,
                                      std::span<const double> offsets, ModelVariant variant) {
  std::vector<Spectrum> out;
  out.reserve(coupling_detunings.size());
  for (double dc : coupling_detunings) {
    FieldSpec c = coupling;
    c.detuning = dc;
    std::vector<double> grid(offsets.begin(), offsets.end());
    for (double& g : grid) g += dc;
    out.push_back(eit_spectrum(atom, cell, c, probe, grid, variant));
  }
  return out;
}

DipFeature locate_dip(const Spectrum& s) {
  s.validate();
  const std::vector<double> f = feature(s);
  const auto& x = s.detuning;
  const auto& y = s.absorption;
  const std::size_t n = f.size();

  const auto k = static_cast<std::size_t>(std::min_element(f.begin(), f.end()) - f.begin());
  double scale = 0.0;
  for (double v : y) scale = std::max(scale, std::abs(v));
  const double depth = -f[k];
  if (k == 0 || k + 1 == n || !(depth > 1e-12 * scale))
    throw NoTransparencyFeature("no transparency feature: spectrum has no interior dip");
  if (!(y[k] <= y[k - 1] && y[k] <= y[k + 1]))
    throw NoTransparencyFeature(
        "no transparency feature: spectrum is monotone around its deepest point");

  const double half = 0.5 * f[k];
  std::size_t i = k;
  while (i > 0 && f[i] < half) --i;
  std::size_t j = k;
  while (j + 1 < n && f[j] < half) ++j;
  if (f[i] < half || f[j] < half)
    throw NoTransparencyFeature("no transparency feature: dip does not recover to half depth");
  const double left = crossing(x[i], f[i], x[i + 1], f[i + 1], half);
  const double right = crossing(x[j - 1], f[j - 1], x[j], f[j], half);

  // Vertex of the parabola through the three samples around the minimum.
  const double x0 = x[k - 1], x1 = x[k], x2 = x[k + 1];
  const double y0 = f[k - 1], y1 = f[k], y2 = f[k + 1];
  const double d0 = (y1 - y0) / (x1 - x0);
  const double d1 = (y2 - y1) / (x2 - x1);
  const double curv = (d1 - d0) / (x2 - x0);

  DipFeature d;
  d.index = k;
  d.center = curv > 0.0 ? 0.5 * (x0 + x1) - d0 / (2.0 * curv) : x1;
  d.depth = depth;
  d.fwhm_hz = hz_from_angular(right - left);
  return d;
}

double extract_fwhm(const Spectrum& s) { return locate_dip(s).fwhm_hz; }

double extract_contrast(const Spectrum& s, const Spectrum& reference) {
  s.validate();
  reference.validate();
  if (s.detuning != reference.detuning)
    throw DomainError("extract_contrast: spectra must share a grid");
  std::size_t best = 0;
  double best_drop = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double drop = reference.absorption[i] - s.absorption[i];
    if (drop > best_drop) {
      best_drop = drop;
      best = i;
    }
  }
  const double base = reference.absorption[best];
  if (!(std::abs(base) > 0.0))
    throw SolverError("extract_contrast: zero baseline absorption at the dip center");
  return std::clamp(best_drop / base, 0.0, 1.0);
}

double feature_asymmetry(const Spectrum& s) {
  s.validate();
  const std::vector<double> f = feature(s);
  std::vector<double> mag(f.size());
  std::transform(f.begin(), f.end(), mag.begin(), [](double v) { return std::abs(v); });
  const auto k = static_cast<std::size_t>(std::max_element(mag.begin(), mag.end()) - mag.begin());
  const double total = trapezoid(s.detuning, mag);
  if (!(total > 0.0)) return 0.0;
  const std::span<const double> x(s.detuning);
  const std::span<const double> fs(f);
  const double left = trapezoid(x.first(k + 1), fs.first(k + 1));
  const double right = trapezoid(x.subspan(k), fs.subspan(k));
  return (right - left) / total;
}

double net_feature_area(const Spectrum& s) {
  s.validate();
  const std::vector<double> f = feature(s);
  return hz_from_angular(trapezoid(s.detuning, f));
}

double estimate_fwhm_hz(const AtomSpec& atom, const CellSpec& cell, const FieldSpec& coupling,
                        const FieldSpec& probe) {
  const RateTable g = coherence_dephasing(atom, cell);
  const double oc4 = rabi_frequency(atom.dipole.mu24, coupling.amplitude);
  const double oc3 = rabi_frequency(atom.dipole.mu23, coupling.amplitude);
  const double op4 = rabi_frequency(atom.dipole.mu14, probe.amplitude);
  const double hwhm = g[0][1] + oc4 * oc4 / (4.0 * g[1][3]) + oc3 * oc3 / (4.0 * g[1][2]) +
                      op4 * op4 / (4.0 * g[0][3]);
  return 2.0 * hwhm / constants::two_pi;
}

std::vector<double> auto_probe_grid(const AtomSpec& atom, const CellSpec& cell,
                                    const FieldSpec& coupling, const FieldSpec& probe,
                                    std::size_t points, double half_widths) {
  const double span = half_widths * angular_from_hz(estimate_fwhm_hz(atom, cell, coupling, probe));
  return linspace(-span, span, points);
}

std::vector<LinewidthPoint> linewidth_vs_intensity(const AtomSpec& atom, const CellSpec& cell,
                                                   std::span<const double> intensities,
                                                   const FieldSpec& probe, ModelVariant variant,
                                                   std::size_t points, double half_widths) {
  const AtomSpec a = apply_variant(atom, variant);
  std::vector<LinewidthPoint> out;
  out.reserve(intensities.size());
  for (double intensity : intensities) {
    const FieldSpec coupling = make_coupling(field_of_intensity(intensity));
    const auto grid = auto_probe_grid(a, cell, coupling, probe, points, half_widths);
    const Spectrum s = eit_spectrum(a, cell, coupling, probe, grid, variant);
    out.push_back({intensity, extract_fwhm(s)});
  }
  return out;
}

std::string spectrum_csv(const Spectrum& s) {
  std::vector<double> hz(s.detuning.size());
  std::transform(s.detuning.begin(), s.detuning.end(), hz.begin(), hz_from_angular);
  return to_csv({"delta_p_hz", "alpha_p"}, {hz, s.absorption});
}

}  // namespace eitmem
