#include <doctest.h>

#include <random>

#include "eitmem/atomic_model.hpp"
#include "eitmem/broadening.hpp"
#include "eitmem/spectra.hpp"
#include "eitmem/storage.hpp"
#include "eitmem/units.hpp"
#include "oracles.hpp"

using namespace eitmem;

TEST_SUITE("units") {

TEST_CASE("hz and angular conversions invert each other") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> expo(-3.0, 12.0);
  for (int i = 0; i < 1000; ++i) {
    const double hz = std::pow(10.0, expo(rng));
    CHECK(oracle::rel_err(hz_from_angular(angular_from_hz(hz)), hz) <= 4e-16);
    CHECK(to_hertz(to_angular(Hertz{hz})).value == doctest::Approx(hz).epsilon(1e-15));
  }
  CHECK(angular_from_hz(1.0) == doctest::Approx(6.283185307179586).epsilon(1e-15));
}

TEST_CASE("cell tables survive a JSON (Hz) round trip") {
  const AtomSpec atom = default_rb85_d1();
  for (const auto& name : cell_preset_names()) {
    const CellSpec c = cell_preset(name);
    const CellSpec back = cell_from_json(to_json(c));
    const RateTable a = coherence_dephasing(atom, c);
    const RateTable b = coherence_dephasing(atom, back);
    for (int n = 0; n < kLevels; ++n)
      for (int m = 0; m < kLevels; ++m) {
        if (n == m) continue;
        CHECK(oracle::rel_err(b[n][m], a[n][m]) <= 1e-15);
      }
    const auto ba = broadening_budget(atom, c);
    const auto bb = broadening_budget(atom, back);
    REQUIRE(ba.size() == bb.size());
    for (std::size_t i = 0; i < ba.size(); ++i)
      CHECK(oracle::rel_err(bb[i].value_hz, ba[i].value_hz) <= 1e-15);
  }
}

TEST_CASE("atom and field JSON carry ordinary Hz") {
  const AtomSpec a = default_rb85_d1();
  const auto j = to_json(a);
  CHECK(j.at("ground_splitting_hz").get<double>() == doctest::Approx(3.0357324e9));
  CHECK(j.at("decay_hz")[3].get<double>() == doctest::Approx(5.75e6));
  const AtomSpec back = atom_from_json(j);
  CHECK(oracle::rel_err(back.ground_splitting, a.ground_splitting) <= 1e-15);
  CHECK(oracle::rel_err(back.decay[2], a.decay[2]) <= 1e-15);

  const FieldSpec f = make_coupling(64.0, angular_from_hz(-300e6));
  CHECK(to_json(f).at("detuning_hz").get<double>() == doctest::Approx(-300e6));
  CHECK(oracle::rel_err(field_from_json(to_json(f)).detuning, f.detuning) <= 1e-15);
}

TEST_CASE("Hz-valued outputs match angular oracles") {
  const CellSpec ne = cell_preset("ne-5torr");
  // γ12 in rad/s is 2π·b/2; the lifetime is its reciprocal.
  CHECK(oracle::rel_err(predicted_lifetime(ne), 1.0 / ne.gamma12_coll()) <= 1e-15);
  // Diffusion mode rate in rad/s divided by 2π.
  const double rate = ne.diffusion * std::pow(2.405 / ne.beam_radius, 2);
  CHECK(oracle::rel_err(transit_broadening_diffusion(ne.diffusion, ne.beam_radius),
                        hz_from_angular(rate)) <= 1e-14);
  // FWHM estimate scales as 2·γ12/2π at zero fields.
  const AtomSpec atom = default_rb85_d1();
  const double est = estimate_fwhm_hz(atom, ne, make_coupling(0.0), make_probe(0.0));
  CHECK(oracle::rel_err(est, ne.intercept_b_hz) <= 1e-14);
}

}  // TEST_SUITE
