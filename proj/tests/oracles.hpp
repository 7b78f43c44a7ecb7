#pragma once
// Closed forms and random generators used as independent references.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

#include "eitmem/atomic_model.hpp"
#include "eitmem/bloch.hpp"
#include "eitmem/units.hpp"

namespace oracle {

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::abs(want);
}

// Two-level steady state with Rabi Ω, decay Γ, coherence damping γ and
// detuning Δ (all rad/s).
struct TwoLevel {
  double excited = 0.0;
  double absorption = 0.0;
};

inline TwoLevel two_level(double rabi, double decay, double gamma, double delta) {
  const double l = gamma / (gamma * gamma + delta * delta);
  TwoLevel r;
  r.excited = 0.5 * rabi * rabi * l / (decay + rabi * rabi * l);
  r.absorption = 0.5 * rabi * (1.0 - 2.0 * r.excited) * l;
  return r;
}

// Levels 1 and 4 driven by the probe alone; levels 2 and 3 relax back to 1 so
// the stationary state is unique.
inline eitmem::Generator two_level_generator(double rabi, double decay, double gamma,
                                             double delta) {
  using namespace eitmem;
  GeneratorInputs in;
  in.frame_energy = {0.0, 0.0, 0.0, -delta};
  in.probe_hamiltonian(0, 3) = in.probe_hamiltonian(3, 0) = -0.5 * rabi;
  for (auto& row : in.dephasing) row.fill(gamma);
  for (int n = 0; n < kLevels; ++n) in.dephasing[n][n] = 0.0;
  in.decay[0][3] = decay;
  in.decay[0][1] = decay;
  in.decay[0][2] = decay;
  const GeneratorParts parts = assemble_generator(in);
  Generator g = make_generator(parts.free + parts.probe + parts.coupling);
  g.probe_drive = parts.probe_drive;
  g.probe_detuning = delta;
  return g;
}

inline eitmem::Matrix4cd random_hermitian(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  eitmem::Matrix4cd m;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) m(i, j) = {n(rng), n(rng)};
  return 0.5 * (m + m.adjoint());
}

// A valid parameter set drawn over presets, variants, intensities and
// detunings.
struct Setting {
  eitmem::AtomSpec atom;
  eitmem::CellSpec cell;
  eitmem::FieldSpec coupling;
  eitmem::FieldSpec probe;
  eitmem::ModelVariant variant = eitmem::ModelVariant::four_level;
};

inline Setting random_setting(std::mt19937_64& rng) {
  using namespace eitmem;
  const auto names = cell_preset_names();
  std::uniform_int_distribution<std::size_t> pick(0, names.size() - 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Setting s;
  s.atom = default_rb85_d1();
  s.cell = cell_preset(names[pick(rng)]);
  s.variant = u(rng) < 0.5 ? ModelVariant::three_level : ModelVariant::four_level;
  const double ic = std::pow(10.0, -2.0 + 3.5 * u(rng));
  const double ip = std::pow(10.0, -4.0 + 3.0 * u(rng));
  const double dc = angular_from_hz((u(rng) - 0.5) * 2e9);
  const double dp = dc + angular_from_hz((u(rng) - 0.5) * 2e6);
  s.coupling = make_coupling(field_of_intensity(ic), dc);
  s.probe = make_probe(field_of_intensity(ip), dp);
  return s;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  const char* base = std::getenv("EITMEM_TMP");
  std::filesystem::path p = base ? base : std::filesystem::temp_directory_path() / "eitmem-tests";
  p /= name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace oracle
