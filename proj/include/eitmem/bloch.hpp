#pragma once

// Rotating-frame density-matrix dynamics for the four-level system.
//
// ρ is vectorized row-major: component 4n + m holds ρnm. The same linear
// operator is also kept in a real 16-parameter Hermitian basis
//   [ρ11, ρ22, ρ33, ρ44, Re ρ12, Im ρ12, Re ρ13, Im ρ13, Re ρ14, Im ρ14,
//    Re ρ23, Im ρ23, Re ρ24, Im ρ24, Re ρ34, Im ρ34]
// which is what the steady-state solve and the integrator work in, so every
// state they produce is Hermitian by construction.

#include <array>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eitmem/atomic_model.hpp"
#include "eitmem/envelope.hpp"

namespace eitmem {

using Complex = std::complex<double>;
using Matrix4cd = Eigen::Matrix<Complex, 4, 4>;
using Matrix4d = Eigen::Matrix<double, 4, 4>;
using Superoperator = Eigen::Matrix<Complex, 16, 16>;
using RealSuperoperator = Eigen::Matrix<double, 16, 16>;
using HermitianVector = Eigen::Matrix<double, 16, 1>;

constexpr int vec_index(int n, int m) { return 4 * n + m; }

class DensityMatrix {
 public:
  DensityMatrix() : rho_(Matrix4cd::Zero()) {}
  explicit DensityMatrix(const Matrix4cd& rho) : rho_(rho) {}

  /// |n><n| for a 0-based level index.
  static DensityMatrix pure_level(int n);
  /// Equal incoherent mixture of the two ground levels.
  static DensityMatrix ground_mixture();
  static DensityMatrix from_real(const HermitianVector& x);

  HermitianVector to_real() const;
  const Matrix4cd& matrix() const { return rho_; }
  Complex operator()(int n, int m) const { return rho_(n, m); }

  double trace() const;
  double hermiticity_error() const;
  double min_eigenvalue() const;

 private:
  Matrix4cd rho_;
};

/// −Im(σ14): probe absorption in arbitrary units, positive means absorbing.
double probe_absorption(const DensityMatrix& rho);

/// Generator of dρ/dt for fixed fields.
struct Generator {
  Superoperator matrix = Superoperator::Zero();
  RealSuperoperator real = RealSuperoperator::Zero();
  double probe_detuning = 0.0;     // Δp, rad/s
  double coupling_detuning = 0.0;  // Δc, rad/s
  ModelVariant variant = ModelVariant::four_level;
  /// Largest |H/ħ| matrix element driven by each field (rad/s).
  double probe_drive = 0.0;
  double coupling_drive = 0.0;

  /// Complex derivative dρ/dt.
  Matrix4cd apply(const Matrix4cd& rho) const;
};

/// Raw rotating-frame description of the system, independent of presets.
struct GeneratorInputs {
  /// Diagonal of H/ħ in the rotating frame (rad/s).
  std::array<double, kLevels> frame_energy{};
  /// Off-diagonal H/ħ contributed by the probe and the coupling field; real
  /// symmetric, diagonal ignored.
  Matrix4d probe_hamiltonian = Matrix4d::Zero();
  Matrix4d coupling_hamiltonian = Matrix4d::Zero();
  /// γnm coherence damping (rad/s), n ≠ m.
  RateTable dephasing{};
  /// decay[m][n]: population transfer rate from n into m (rad/s).
  RateTable decay{};
};

/// The generator split into the field-independent part and one linear piece
/// per field, so time-dependent envelopes can rescale each field separately.
struct GeneratorParts {
  Superoperator free = Superoperator::Zero();
  Superoperator probe = Superoperator::Zero();
  Superoperator coupling = Superoperator::Zero();
  double probe_drive = 0.0;
  double coupling_drive = 0.0;
};

GeneratorParts assemble_generator(const GeneratorInputs& in);

/// Rotating-frame inputs for an atom in a cell driven by the two fields.
GeneratorInputs generator_inputs(const AtomSpec& atom, const CellSpec& cell,
                                 const FieldSpec& coupling, const FieldSpec& probe);

Generator make_generator(const Superoperator& l);
RealSuperoperator to_real_superoperator(const Superoperator& l);

Generator build_generator(const AtomSpec& atom, const CellSpec& cell,
                          const FieldSpec& coupling, const FieldSpec& probe,
                          ModelVariant variant = ModelVariant::four_level);

/// Solves G·ρ = 0 with Tr ρ = 1 by dense LU, the dρ11/dt row replaced by the
/// trace row. Throws NonUniqueSteadyState when the stationary set is
/// degenerate, SolverError if the residual check fails and
/// PositivityViolation if ρ has an eigenvalue below −1e-8.
DensityMatrix steady_state(const Generator& g);

/// ‖G·vec ρ‖ / (‖G‖·‖vec ρ‖), Frobenius norms.
double relative_residual(const Generator& g, const DensityMatrix& rho);

/// Coherences in stationary linear response with the populations held fixed.
/// Used for the weak-probe reference absorption without a coupling field,
/// where the full steady state would optically pump every atom out of |1>.
DensityMatrix frozen_population_response(const Generator& g,
                                         const std::array<double, kLevels>& populations);

// --- time evolution ----------------------------------------------------------

/// Generator with per-field time envelopes: G(t) = G_free + c(t)·G_c + p(t)·G_p.
struct DrivenGenerator {
  RealSuperoperator free = RealSuperoperator::Zero();
  RealSuperoperator coupling = RealSuperoperator::Zero();
  RealSuperoperator probe = RealSuperoperator::Zero();
  Envelope coupling_envelope = Envelope::constant(1.0);
  Envelope probe_envelope = Envelope::constant(1.0);

  static DrivenGenerator constant(const Generator& g);
  static DrivenGenerator from_parts(const GeneratorParts& parts, Envelope coupling_env,
                                    Envelope probe_env);

  RealSuperoperator at_levels(double coupling_level, double probe_level) const;
};

struct TimeEvolveOptions {
  /// Step bound is 1 / (rate_safety · max rate).
  double rate_safety = 50.0;
  /// Abort with StiffnessError if more RK4 steps than this would be needed.
  double max_steps = 4.0e9;
  bool check_positivity = true;
  double positivity_tolerance = 1e-8;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<DensityMatrix> states;
  std::size_t steps = 0;
  double step_bound = 0.0;
};

/// CSV columns t_s, rho11..rho44, re_sigma12, im_sigma12, re_sigma14,
/// im_sigma14.
std::vector<std::string> trajectory_columns();
std::vector<double> trajectory_row(double t, const DensityMatrix& rho);
std::string trajectory_csv(const Trajectory& traj);

/// Largest |eigenvalue| over the envelope extremes; sets the step bound.
double max_rate(const DrivenGenerator& g);

/// Classical fixed-step RK4 on the Hermitian parametrization. Steps never
/// cross an envelope breakpoint, and within each grid interval are
/// uniform with h ≤ min(interval, 1/(rate_safety·max rate)).
Trajectory time_evolve(const DrivenGenerator& g, const DensityMatrix& rho0,
                       std::span<const double> grid,
                       const TimeEvolveOptions& options = {});

}  // namespace eitmem
