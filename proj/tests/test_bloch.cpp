#include <doctest.h>

#include <random>

#include <Eigen/Eigenvalues>

#include "eitmem/atomic_model.hpp"
#include "eitmem/bloch.hpp"
#include "eitmem/errors.hpp"
#include "eitmem/spectra.hpp"
#include "eitmem/units.hpp"
#include "oracles.hpp"

using namespace eitmem;

namespace {

using oracle::Setting;
using oracle::random_setting;

Generator build(const Setting& s) {
  return build_generator(s.atom, s.cell, s.coupling, s.probe, s.variant);
}

double max_abs_diff(const DensityMatrix& a, const DensityMatrix& b) {
  return (a.matrix() - b.matrix()).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_SUITE("bloch-solver") {

TEST_CASE("undriven ground state is stationary") {
  const Generator g = build_generator(default_rb85_d1(), cell_preset("ne-5torr"),
                                      make_coupling(0.0, angular_from_hz(2e8)),
                                      make_probe(0.0, angular_from_hz(-1e6)));
  CHECK(g.apply(DensityMatrix::pure_level(0).matrix()).norm() == 0.0);
}

TEST_CASE("derivative of a Hermitian matrix is Hermitian and traceless") {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 120; ++i) {
    const Generator g = build(random_setting(rng));
    const Matrix4cd rho = oracle::random_hermitian(rng);
    const Matrix4cd d = g.apply(rho);
    const double scale = g.matrix.cwiseAbs().maxCoeff() * rho.norm();
    CHECK((d - d.adjoint()).norm() <= 1e-10 * d.norm());
    CHECK(std::abs(d.trace()) <= 1e-12 * scale);
  }
}

TEST_CASE("trace row functional vanishes") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    const Generator g = build(random_setting(rng));
    Eigen::Matrix<Complex, 1, 16> row = Eigen::Matrix<Complex, 1, 16>::Zero();
    for (int n = 0; n < kLevels; ++n) row += g.matrix.row(vec_index(n, n));
    CHECK(row.cwiseAbs().maxCoeff() <= 1e-12 * g.matrix.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("three-level variant decouples level 3 from the fields") {
  const AtomSpec a = default_rb85_d1().three_level();
  const GeneratorInputs in =
      generator_inputs(a, cell_preset("alkene"), make_coupling(30.0), make_probe(2.0));
  for (int n = 0; n < kLevels; ++n) {
    CHECK(in.probe_hamiltonian(2, n) == 0.0);
    CHECK(in.probe_hamiltonian(n, 2) == 0.0);
    CHECK(in.coupling_hamiltonian(2, n) == 0.0);
    CHECK(in.coupling_hamiltonian(n, 2) == 0.0);
  }
  CHECK(in.probe_hamiltonian(0, 3) != 0.0);
  CHECK(in.coupling_hamiltonian(1, 3) != 0.0);
}

TEST_CASE("rotating-frame energies") {
  const AtomSpec a = default_rb85_d1();
  const double dp = angular_from_hz(3e6), dc = angular_from_hz(-2e6);
  const GeneratorInputs in =
      generator_inputs(a, cell_preset("alkene"), make_coupling(1.0, dc), make_probe(1.0, dp));
  CHECK(in.frame_energy[0] == 0.0);
  CHECK(in.frame_energy[1] == doctest::Approx(-(dp - dc)));
  CHECK(in.frame_energy[2] == doctest::Approx(-(dp + a.excited_splitting)));
  CHECK(in.frame_energy[3] == doctest::Approx(-dp));
  CHECK(in.probe_hamiltonian(0, 3) == doctest::Approx(-0.5 * rabi_frequency(a.dipole.mu14, 1.0)));
}

TEST_CASE("two-level steady state matches the closed form") {
  const double decay = angular_from_hz(5.75e6);
  const double gamma = 0.5 * decay + angular_from_hz(1e6);
  const double rabi = angular_from_hz(2e6);
  double peak = oracle::two_level(rabi, decay, gamma, 0.0).absorption;
  for (int i = 0; i < 50; ++i) {
    const double delta = angular_from_hz(-20e6 + 40e6 * i / 49.0);
    const DensityMatrix rho = steady_state(oracle::two_level_generator(rabi, decay, gamma, delta));
    const auto want = oracle::two_level(rabi, decay, gamma, delta);
    CHECK(std::abs(rho(3, 3).real() - want.excited) <= 1e-8 * want.excited + 1e-14);
    CHECK(std::abs(probe_absorption(rho) - want.absorption) <= 1e-8 * peak);
  }
}

TEST_CASE("weak-probe two-level absorption halves at one linewidth") {
  const double decay = angular_from_hz(5.75e6);
  const double gamma = 0.5 * decay;
  const double rabi = 1e-4 * gamma;
  const double on = probe_absorption(steady_state(oracle::two_level_generator(rabi, decay, gamma, 0.0)));
  const double off =
      probe_absorption(steady_state(oracle::two_level_generator(rabi, decay, gamma, gamma)));
  CHECK(on / off == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("probe absorption definition") {
  Matrix4cd m = DensityMatrix::pure_level(0).matrix();
  m(0, 3) = Complex(0.0, -0.01);
  m(3, 0) = std::conj(m(0, 3));
  CHECK(probe_absorption(DensityMatrix(m)) == doctest::Approx(0.01));
}

TEST_CASE("exact dark state") {
  CellSpec c = cell_preset("alkene");
  c.intercept_b_hz = 0.0;
  const Generator g = build_generator(default_rb85_d1(), c, make_coupling(40.0), make_probe(2.0),
                                      ModelVariant::three_level);
  const DensityMatrix rho = steady_state(g);
  CHECK(std::abs(probe_absorption(rho)) < 1e-10);
}

TEST_CASE("degenerate steady states") {
  const AtomSpec a = default_rb85_d1();
  const CellSpec c = cell_preset("paraffin");
  CHECK_THROWS_AS(steady_state(build_generator(a, c, make_coupling(0.0), make_probe(0.0))),
                  NonUniqueSteadyState);
  // Coupling alone pumps every atom into |1>, which is unique even at γ12 = 0.
  CellSpec clean = c;
  clean.intercept_b_hz = 0.0;
  const DensityMatrix rho = steady_state(build_generator(a, clean, make_coupling(20.0), make_probe(0.0)));
  CHECK(rho(0, 0).real() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("steady-state hygiene over random settings") {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 200; ++i) {
    const Generator g = build(random_setting(rng));
    const DensityMatrix rho = steady_state(g);
    CHECK(std::abs(rho.trace() - 1.0) <= 1e-9);
    CHECK(rho.hermiticity_error() <= 1e-10);
    CHECK(rho.min_eigenvalue() >= -1e-8);
    CHECK(relative_residual(g, rho) <= 1e-10);
  }
}

TEST_CASE("four-level atom without level-3 dipoles equals the three-level variant") {
  const AtomSpec a = default_rb85_d1();
  const CellSpec c = cell_preset("ne-5torr");
  const FieldSpec cp = make_coupling(30.0, angular_from_hz(100e6));
  const FieldSpec pr = make_probe(3.0);
  std::vector<double> grid;
  for (int i = 0; i < 41; ++i) grid.push_back(cp.detuning + angular_from_hz(-20e3 + 1e3 * i));
  const Spectrum four = eit_spectrum(a.three_level(), c, cp, pr, grid, ModelVariant::four_level);
  const Spectrum three = eit_spectrum(a, c, cp, pr, grid, ModelVariant::three_level);
  CHECK(four.absorption == three.absorption);
}

TEST_CASE("null generator leaves the state unchanged") {
  std::mt19937_64 rng(3);
  Matrix4cd h = oracle::random_hermitian(rng);
  h = h * h.adjoint();
  h /= h.trace().real();
  const DensityMatrix rho0(h);
  const DrivenGenerator g;
  const std::vector<double> grid = {0.0, 1e-6, 1.0};
  const Trajectory t = time_evolve(g, rho0, grid);
  for (const auto& s : t.states) CHECK(s.matrix() == rho0.matrix());
}

TEST_CASE("free ground coherence decays exponentially") {
  const AtomSpec a = default_rb85_d1();
  const CellSpec c = cell_preset("paraffin");
  const Generator g = build_generator(a, c, make_coupling(0.0), make_probe(0.0));
  Matrix4cd m = Matrix4cd::Zero();
  m(0, 0) = m(1, 1) = m(0, 1) = m(1, 0) = 0.5;
  const double g12 = c.gamma12_coll();
  std::vector<double> grid;
  for (int i = 0; i <= 10; ++i) grid.push_back(3.0 / g12 * i / 10.0);
  const Trajectory t = time_evolve(DrivenGenerator::constant(g), DensityMatrix(m), grid);
  for (std::size_t i = 0; i < grid.size(); ++i)
    CHECK(std::abs(t.states[i](0, 1)) ==
          doctest::Approx(0.5 * std::exp(-g12 * grid[i])).epsilon(1e-9));
}

TEST_CASE("constant generator relaxes to the steady state") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 6; ++i) {
    Setting s = random_setting(rng);
    if (s.cell.name == "ne-5torr") s.cell = cell_preset("alkene");
    s.coupling.amplitude = field_of_intensity(5.0 + 20.0 * i / 5.0);
    const Generator g = build(s);
    // Run for 40 of the slowest relaxation times.
    const Eigen::VectorXcd ev = Eigen::EigenSolver<RealSuperoperator>(g.real, false).eigenvalues();
    double slowest = INFINITY;
    for (const auto& l : ev)
      if (std::abs(l) > 1e-9 * ev.cwiseAbs().maxCoeff()) slowest = std::min(slowest, -l.real());
    REQUIRE(slowest > 0.0);
    const std::vector<double> grid = {0.0, 20.0 / slowest, 40.0 / slowest};
    TimeEvolveOptions o;
    o.max_steps = 1e15;
    const Trajectory t =
        time_evolve(DrivenGenerator::constant(g), DensityMatrix::ground_mixture(), grid, o);
    CHECK(max_abs_diff(t.states.back(), steady_state(g)) <= 1e-6);
    CHECK(std::abs(t.states.back().trace() - 1.0) <= 1e-9 * (t.steps / 1000.0 + 1.0));
  }
}

TEST_CASE("trace drift per thousand steps") {
  const Generator g = build_generator(default_rb85_d1(), cell_preset("alkene"),
                                      make_coupling(20.0), make_probe(1.0));
  DrivenGenerator d = DrivenGenerator::constant(g);
  std::vector<double> grid;
  const double h = 1.0 / (50.0 * max_rate(d));
  for (int i = 0; i <= 10; ++i) grid.push_back(1000.0 * h * i);
  const Trajectory t = time_evolve(d, DensityMatrix::ground_mixture(), grid);
  for (std::size_t i = 1; i < t.states.size(); ++i)
    CHECK(std::abs(t.states[i].trace() - t.states[i - 1].trace()) <= 1e-9);
}

TEST_CASE("enveloped evolution is converged at the default step bound") {
  const AtomSpec a = default_rb85_d1();
  const CellSpec c = cell_preset("alkene");
  const FieldSpec cp = make_coupling(field_of_intensity(25.0));
  const FieldSpec pr = make_probe(field_of_intensity(0.028));
  Envelope probe_env;
  probe_env.add_exponential_rise(0.0, 1e-6, 1.0, 0.25e-6);
  const DrivenGenerator d = DrivenGenerator::from_parts(
      assemble_generator(generator_inputs(a, c, cp, pr)), Envelope::constant(1.0), probe_env);
  const std::vector<double> grid = {0.0, 0.5e-6, 1e-6};
  TimeEvolveOptions fine;
  fine.rate_safety = 400.0;
  const Trajectory coarse_t = time_evolve(d, DensityMatrix::pure_level(0), grid);
  const Trajectory fine_t = time_evolve(d, DensityMatrix::pure_level(0), grid, fine);
  CHECK(fine_t.steps > coarse_t.steps);
  CHECK(max_abs_diff(coarse_t.states.back(), fine_t.states.back()) <= 1e-10);
  CHECK(std::abs(coarse_t.states.back()(0, 3)) > 1e-6);
}

TEST_CASE("stiffness is reported with a suggested step") {
  const Generator g = build_generator(default_rb85_d1(), cell_preset("alkene"),
                                      make_coupling(20.0), make_probe(1.0));
  TimeEvolveOptions o;
  o.max_steps = 1000;
  const std::vector<double> grid = {0.0, 1e-3};
  try {
    time_evolve(DrivenGenerator::constant(g), DensityMatrix::ground_mixture(), grid, o);
    FAIL("expected StiffnessError");
  } catch (const StiffnessError& e) {
    CHECK(e.suggested_step() > 0.0);
    CHECK(e.suggested_step() < 1e-9);
  }
  const std::vector<double> bad = {0.0, 0.0};
  CHECK_THROWS_AS(time_evolve(DrivenGenerator::constant(g), DensityMatrix::ground_mixture(), bad),
                  DomainError);
}

TEST_CASE("trajectory CSV columns") {
  CHECK(trajectory_columns().size() == 9);
  Trajectory t;
  t.times = {0.0};
  t.states = {DensityMatrix::pure_level(1)};
  CHECK(trajectory_csv(t) ==
        "t_s,rho11,rho22,rho33,rho44,re_sigma12,im_sigma12,re_sigma14,im_sigma14\n"
        "0,0,1,0,0,0,0,0,0\n");
}

}  // TEST_SUITE
