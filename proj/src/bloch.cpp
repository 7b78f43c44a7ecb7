#include "eitmem/bloch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "eitmem/csv_format.hpp"
#include "eitmem/errors.hpp"
#include "eitmem/units.hpp"

namespace eitmem {

namespace {

constexpr Complex kI{0.0, 1.0};

// Upper-triangle pairs in the order used by the Hermitian parametrization.
constexpr std::array<std::array<int, 2>, 6> kPairs = {
    {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};

}  // namespace

// --- DensityMatrix -------------------------------------------------------------

DensityMatrix DensityMatrix::pure_level(int n) {
  Matrix4cd m = Matrix4cd::Zero();
  m(n, n) = 1.0;
  return DensityMatrix(m);
}

DensityMatrix DensityMatrix::ground_mixture() {
  Matrix4cd m = Matrix4cd::Zero();
  m(0, 0) = 0.5;
  m(1, 1) = 0.5;
  return DensityMatrix(m);
}

DensityMatrix DensityMatrix::from_real(const HermitianVector& x) {
  Matrix4cd m = Matrix4cd::Zero();
  for (int n = 0; n < kLevels; ++n) m(n, n) = x[n];
  for (std::size_t k = 0; k < kPairs.size(); ++k) {
    const auto [n, mm] = kPairs[k];
    const Complex v{x[4 + 2 * k], x[5 + 2 * k]};
    m(n, mm) = v;
    m(mm, n) = std::conj(v);
  }
  return DensityMatrix(m);
}

HermitianVector DensityMatrix::to_real() const {
  HermitianVector x;
  for (int n = 0; n < kLevels; ++n) x[n] = rho_(n, n).real();
  for (std::size_t k = 0; k < kPairs.size(); ++k) {
    const auto [n, m] = kPairs[k];
    x[4 + 2 * k] = rho_(n, m).real();
    x[5 + 2 * k] = rho_(n, m).imag();
  }
  return x;
}

double DensityMatrix::trace() const { return rho_.trace().real(); }

double DensityMatrix::hermiticity_error() const {
  return (rho_ - rho_.adjoint()).cwiseAbs().maxCoeff();
}

double DensityMatrix::min_eigenvalue() const {
  const Matrix4cd h = 0.5 * (rho_ + rho_.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix4cd> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double probe_absorption(const DensityMatrix& rho) { return -rho(0, 3).imag(); }

// --- generator assembly --------------------------------------------------------

Matrix4cd Generator::apply(const Matrix4cd& rho) const {
  Eigen::Matrix<Complex, 16, 1> v;
  for (int n = 0; n < kLevels; ++n)
    for (int m = 0; m < kLevels; ++m) v[vec_index(n, m)] = rho(n, m);
  const Eigen::Matrix<Complex, 16, 1> d = matrix * v;
  Matrix4cd out;
  for (int n = 0; n < kLevels; ++n)
    for (int m = 0; m < kLevels; ++m) out(n, m) = d[vec_index(n, m)];
  return out;
}

namespace {

// Coherent part −i[H, ρ] for a Hermitian H/ħ, written entry by entry:
//   dρnm/dt += −i Σk (Hnk ρkm − ρnk Hkm)
void add_commutator(Superoperator& l, const Matrix4cd& h) {
  for (int n = 0; n < kLevels; ++n) {
    for (int m = 0; m < kLevels; ++m) {
      const int row = vec_index(n, m);
      for (int k = 0; k < kLevels; ++k) {
        if (h(n, k) != Complex{}) l(row, vec_index(k, m)) += -kI * h(n, k);
        if (h(k, m) != Complex{}) l(row, vec_index(n, k)) += kI * h(k, m);
      }
    }
  }
}

double max_offdiag(const Matrix4d& h) {
  double out = 0.0;
  for (int n = 0; n < kLevels; ++n)
    for (int m = 0; m < kLevels; ++m)
      if (n != m) out = std::max(out, std::abs(h(n, m)));
  return out;
}

}  // namespace

GeneratorParts assemble_generator(const GeneratorInputs& in) {
  GeneratorParts parts;

  // Field-independent part.
  //
  // Free evolution in the rotating frame: H0/ħ = diag(frame_energy).
  Matrix4cd h0 = Matrix4cd::Zero();
  for (int n = 0; n < kLevels; ++n) h0(n, n) = in.frame_energy[n];
  add_commutator(parts.free, h0);

  // Coherence damping: dρnm/dt += −γnm ρnm for n ≠ m.
  for (int n = 0; n < kLevels; ++n)
    for (int m = 0; m < kLevels; ++m)
      if (n != m) parts.free(vec_index(n, m), vec_index(n, m)) -= in.dephasing[n][m];

  // Population transfer. Level n loses Σm Γmn ρnn, level m gains Γmn ρnn:
  //   dρnn/dt += −Σm Γmn ρnn,   dρmm/dt += Γmn ρnn.
  for (int n = 0; n < kLevels; ++n) {
    for (int m = 0; m < kLevels; ++m) {
      const double rate = in.decay[m][n];
      if (m == n || rate == 0.0) continue;
      parts.free(vec_index(n, n), vec_index(n, n)) -= rate;
      parts.free(vec_index(m, m), vec_index(n, n)) += rate;
    }
  }

  // Field parts: −i[H_field, ρ] with the off-diagonal field Hamiltonians.
  Matrix4cd hp = in.probe_hamiltonian.cast<Complex>();
  Matrix4cd hc = in.coupling_hamiltonian.cast<Complex>();
  hp.diagonal().setZero();
  hc.diagonal().setZero();
  add_commutator(parts.probe, hp);
  add_commutator(parts.coupling, hc);
  parts.probe_drive = max_offdiag(in.probe_hamiltonian);
  parts.coupling_drive = max_offdiag(in.coupling_hamiltonian);
  return parts;
}

GeneratorInputs generator_inputs(const AtomSpec& atom, const CellSpec& cell,
                                 const FieldSpec& coupling, const FieldSpec& probe) {
  atom.validate();
  cell.validate();
  coupling.validate();
  probe.validate();
  if (coupling.role != FieldRole::coupling || probe.role != FieldRole::probe)
    throw DomainError("build_generator: field roles must be (coupling, probe)");

  const double dp = probe.detuning;
  const double dc = coupling.detuning;
  GeneratorInputs in;

  // Rotating frame U = diag(1, e^{i(ωp−ωc)t}, e^{iωp t}, e^{iωp t}), which gives
  // σ1n = ρ1n e^{−iωp t} and σ2n = ρ2n e^{−iωc t} for n = 3, 4 with
  // ωp = ω14 + Δp and ωc = ω24 + Δc. Since ω14 − ω24 = ω21 the frame energies
  // (H/ħ diagonal) become
  //   level 1: 0
  //   level 2: ω21 − (ωp − ωc) = −(Δp − Δc)       two-photon detuning
  //   level 3: ω13 − ωp = −(Δp + ω43)              level 3 sits ω43 below 4
  //   level 4: ω14 − ωp = −Δp
  in.frame_energy = {0.0, -(dp - dc), -(dp + atom.excited_splitting), -dp};

  // Dipole coupling in the RWA, Hnm = −μnm E / ħ = −Ωnm / 2 with Ω = 2μE/ħ.
  // Probe drives 1–3 and 1–4, coupling drives 2–3 and 2–4.
  const double ep = probe.amplitude / constants::hbar;
  const double ec = coupling.amplitude / constants::hbar;
  in.probe_hamiltonian(2, 0) = in.probe_hamiltonian(0, 2) = -atom.dipole.mu13 * ep;
  in.probe_hamiltonian(3, 0) = in.probe_hamiltonian(0, 3) = -atom.dipole.mu14 * ep;
  in.coupling_hamiltonian(2, 1) = in.coupling_hamiltonian(1, 2) = -atom.dipole.mu23 * ec;
  in.coupling_hamiltonian(3, 1) = in.coupling_hamiltonian(1, 3) = -atom.dipole.mu24 * ec;

  in.dephasing = coherence_dephasing(atom, cell);
  in.decay = branching_rates(atom);
  return in;
}

RealSuperoperator to_real_superoperator(const Superoperator& l) {
  RealSuperoperator r;
  for (int j = 0; j < 16; ++j) {
    HermitianVector e = HermitianVector::Zero();
    e[j] = 1.0;
    const Matrix4cd basis = DensityMatrix::from_real(e).matrix();
    Generator tmp;
    tmp.matrix = l;
    r.col(j) = DensityMatrix(tmp.apply(basis)).to_real();
  }
  return r;
}

Generator make_generator(const Superoperator& l) {
  Generator g;
  g.matrix = l;
  g.real = to_real_superoperator(l);
  return g;
}

Generator build_generator(const AtomSpec& atom, const CellSpec& cell,
                          const FieldSpec& coupling, const FieldSpec& probe,
                          ModelVariant variant) {
  const AtomSpec a = apply_variant(atom, variant);
  const GeneratorParts parts = assemble_generator(generator_inputs(a, cell, coupling, probe));
  Generator g = make_generator(parts.free + parts.probe + parts.coupling);
  g.probe_detuning = probe.detuning;
  g.coupling_detuning = coupling.detuning;
  g.variant = variant;
  g.probe_drive = parts.probe_drive;
  g.coupling_drive = parts.coupling_drive;
  return g;
}

// --- steady state --------------------------------------------------------------

double relative_residual(const Generator& g, const DensityMatrix& rho) {
  Eigen::Matrix<Complex, 16, 1> v;
  for (int n = 0; n < kLevels; ++n)
    for (int m = 0; m < kLevels; ++m) v[vec_index(n, m)] = rho(n, m);
  const double scale = g.matrix.norm() * v.norm();
  if (scale == 0.0) return 0.0;
  return (g.matrix * v).norm() / scale;
}

DensityMatrix steady_state(const Generator& g) {
  if (g.probe_drive == 0.0 && g.coupling_drive == 0.0)
    throw NonUniqueSteadyState(
        "non-unique steady state: both fields are off, any ground-state "
        "population split is stationary");

  // Work on the real parametrization; rows rescaled so the largest rate is 1.
  const double scale = g.real.cwiseAbs().maxCoeff();
  RealSuperoperator a = g.real / scale;
  HermitianVector b = HermitianVector::Zero();
  // Replace the dρ11/dt row with Tr ρ = 1.
  a.row(0).setZero();
  a.row(0).head<kLevels>().setOnes();
  b[0] = 1.0;

  Eigen::FullPivLU<RealSuperoperator> lu(a);
  lu.setThreshold(1e-13);
  if (!lu.isInvertible()) {
    std::ostringstream os;
    os << "non-unique steady state: constrained system has rank " << lu.rank()
       << " of 16 (a population or coherence is conserved)";
    throw NonUniqueSteadyState(os.str());
  }
  const DensityMatrix rho = DensityMatrix::from_real(lu.solve(b));

  const double res = relative_residual(g, rho);
  if (!(res <= 1e-10)) {
    std::ostringstream os;
    os << "steady-state residual " << res << " exceeds 1e-10";
    throw SolverError(os.str());
  }
  if (!(std::abs(rho.trace() - 1.0) <= 1e-9))
    throw SolverError("steady-state trace deviates from 1");
  const double min_eig = rho.min_eigenvalue();
  if (min_eig < -1e-8) {
    std::ostringstream os;
    os << "steady state not positive: min eigenvalue " << min_eig;
    throw PositivityViolation(os.str());
  }
  return rho;
}

DensityMatrix frozen_population_response(const Generator& g,
                                         const std::array<double, kLevels>& populations) {
  // Split the real generator into population (P) and coherence (C) blocks,
  // hold x_P fixed and solve 0 = G_CC x_C + G_CP x_P.
  const Eigen::Matrix<double, 12, 12> gcc = g.real.bottomRightCorner<12, 12>();
  const Eigen::Matrix<double, 12, 4> gcp = g.real.bottomLeftCorner<12, 4>();
  Eigen::Vector4d xp;
  for (int n = 0; n < kLevels; ++n) xp[n] = populations[n];
  Eigen::FullPivLU<Eigen::Matrix<double, 12, 12>> lu(gcc);
  if (!lu.isInvertible())
    throw SolverError("coherence block is singular: an undamped coherence exists");
  HermitianVector x;
  x.head<4>() = xp;
  x.tail<12>() = lu.solve(-gcp * xp);
  return DensityMatrix::from_real(x);
}

// --- time evolution --------------------------------------------------------------

DrivenGenerator DrivenGenerator::constant(const Generator& g) {
  DrivenGenerator d;
  d.free = g.real;
  return d;
}

DrivenGenerator DrivenGenerator::from_parts(const GeneratorParts& parts,
                                            Envelope coupling_env, Envelope probe_env) {
  DrivenGenerator d;
  d.free = to_real_superoperator(parts.free);
  d.coupling = to_real_superoperator(parts.coupling);
  d.probe = to_real_superoperator(parts.probe);
  d.coupling_envelope = std::move(coupling_env);
  d.probe_envelope = std::move(probe_env);
  return d;
}

RealSuperoperator DrivenGenerator::at_levels(double coupling_level,
                                             double probe_level) const {
  return free + coupling_level * coupling + probe_level * probe;
}

namespace {

double spectral_radius(const RealSuperoperator& m) {
  if (m.isZero(0.0)) return 0.0;
  Eigen::EigenSolver<RealSuperoperator> es(m, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

// One classical RK4 step of x' = G x with constant G, written out, is
// x ← (I + hG + (hG)²/2 + (hG)³/6 + (hG)⁴/24) x. Precomputing that matrix
// gives the same integrator at a quarter of the cost per step.
RealSuperoperator rk4_propagator(const RealSuperoperator& g, double h) {
  const RealSuperoperator id = RealSuperoperator::Identity();
  const RealSuperoperator hg = h * g;
  return id + hg * (id + 0.5 * hg * (id + (1.0 / 3.0) * hg * (id + 0.25 * hg)));
}

struct PropagatorCache {
  struct Entry {
    double coupling, probe, h;
    RealSuperoperator p;
  };
  std::vector<Entry> entries;

  const RealSuperoperator& get(const DrivenGenerator& g, double c, double p, double h) {
    for (const auto& e : entries)
      if (e.coupling == c && e.probe == p && e.h == h) return e.p;
    if (entries.size() > 32) entries.erase(entries.begin());
    entries.push_back({c, p, h, rk4_propagator(g.at_levels(c, p), h)});
    return entries.back().p;
  }
};

// P^n by repeated squaring: n RK4 steps on a constant segment in O(log n)
// products.
RealSuperoperator matrix_power(const RealSuperoperator& p, std::size_t n) {
  RealSuperoperator result = RealSuperoperator::Identity();
  RealSuperoperator base = p;
  while (n > 0) {
    if (n & 1U) result = result * base;
    n >>= 1U;
    if (n > 0) base = base * base;
  }
  return result;
}

double envelope_value(const EnvelopePiece* piece, double t) {
  return piece ? piece->value(t) : 0.0;
}

}  // namespace

std::vector<std::string> trajectory_columns() {
  return {"t_s",        "rho11",      "rho22",      "rho33",     "rho44",
          "re_sigma12", "im_sigma12", "re_sigma14", "im_sigma14"};
}

std::vector<double> trajectory_row(double t, const DensityMatrix& rho) {
  return {t,
          rho(0, 0).real(),
          rho(1, 1).real(),
          rho(2, 2).real(),
          rho(3, 3).real(),
          rho(0, 1).real(),
          rho(0, 1).imag(),
          rho(0, 3).real(),
          rho(0, 3).imag()};
}

std::string trajectory_csv(const Trajectory& traj) {
  const auto names = trajectory_columns();
  std::vector<std::vector<double>> cols(names.size());
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    const auto row = trajectory_row(traj.times[i], traj.states[i]);
    for (std::size_t k = 0; k < row.size(); ++k) cols[k].push_back(row[k]);
  }
  return to_csv(names, cols);
}

double max_rate(const DrivenGenerator& g) {
  const double c = g.coupling_envelope.max_level();
  const double p = g.probe_envelope.max_level();
  return std::max({spectral_radius(g.free), spectral_radius(g.at_levels(c, 0.0)),
                   spectral_radius(g.at_levels(0.0, p)), spectral_radius(g.at_levels(c, p))});
}

Trajectory time_evolve(const DrivenGenerator& g, const DensityMatrix& rho0,
                       std::span<const double> grid, const TimeEvolveOptions& options) {
  if (grid.empty()) throw DomainError("time_evolve: empty time grid");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1]))
      throw DomainError("time_evolve: time grid must be strictly increasing");

  Trajectory out;
  const double rate = max_rate(g);
  const double h_bound = rate > 0.0 ? 1.0 / (options.rate_safety * rate)
                                    : std::numeric_limits<double>::infinity();
  out.step_bound = h_bound;

  // Integration nodes: grid points plus envelope breakpoints inside the span.
  std::vector<double> nodes(grid.begin(), grid.end());
  for (const auto& env : {&g.coupling_envelope, &g.probe_envelope})
    for (double t : env->breakpoints())
      if (t > grid.front() && t < grid.back()) nodes.push_back(t);
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());

  double total_steps = 0.0;
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    const double dt = nodes[i] - nodes[i - 1];
    total_steps += std::max(1.0, std::ceil(dt / h_bound));
    const double t_scale = std::max(std::abs(nodes[i]), std::abs(nodes[i - 1]));
    if (h_bound < 1e-14 * t_scale) {
      std::ostringstream os;
      os << "step size underflow: step bound " << h_bound << " s is below the time "
         << "resolution at t = " << t_scale << " s; shift the grid origin or use step "
         << h_bound;
      throw StiffnessError(os.str(), h_bound);
    }
  }
  if (total_steps > options.max_steps) {
    std::ostringstream os;
    os << "rates too stiff for requested grid: " << total_steps
       << " RK4 steps needed (limit " << options.max_steps << "), suggested step "
       << h_bound << " s";
    throw StiffnessError(os.str(), h_bound);
  }

  auto record = [&](double t, const HermitianVector& x) {
    DensityMatrix rho = DensityMatrix::from_real(x);
    if (options.check_positivity) {
      const double e = rho.min_eigenvalue();
      if (e < -options.positivity_tolerance) {
        std::ostringstream os;
        os << "density matrix lost positivity at t = " << t << " s (min eigenvalue "
           << e << "); reduce the step size";
        throw PositivityViolation(os.str());
      }
    }
    out.times.push_back(t);
    out.states.push_back(std::move(rho));
  };

  HermitianVector x = rho0.to_real();
  record(grid.front(), x);

  PropagatorCache cache;
  std::size_t next_grid = 1;
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    const double a = nodes[i - 1];
    const double b = nodes[i];
    const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil((b - a) / h_bound)));
    const double h = (b - a) / static_cast<double>(n);

    const auto c_level = g.coupling_envelope.constant_level_on(a, b);
    const auto p_level = g.probe_envelope.constant_level_on(a, b);
    if (c_level && p_level) {
      const RealSuperoperator& prop = cache.get(g, *c_level, *p_level, h);
      if (n < 64) {
        for (std::size_t s = 0; s < n; ++s) x = prop * x;
      } else {
        x = matrix_power(prop, n) * x;
      }
    } else {
      // Time-dependent interval: the envelope pieces are fixed on [a, b].
      const EnvelopePiece* cp = g.coupling_envelope.piece_at(0.5 * (a + b));
      const EnvelopePiece* pp = g.probe_envelope.piece_at(0.5 * (a + b));
      auto deriv = [&](double t, const HermitianVector& y) -> HermitianVector {
        HermitianVector d = g.free * y;
        const double c = envelope_value(cp, t);
        const double p = envelope_value(pp, t);
        if (c != 0.0) d.noalias() += c * (g.coupling * y);
        if (p != 0.0) d.noalias() += p * (g.probe * y);
        return d;
      };
      for (std::size_t s = 0; s < n; ++s) {
        const double t = a + static_cast<double>(s) * h;
        const HermitianVector k1 = deriv(t, x);
        const HermitianVector k2 = deriv(t + 0.5 * h, x + 0.5 * h * k1);
        const HermitianVector k3 = deriv(t + 0.5 * h, x + 0.5 * h * k2);
        const HermitianVector k4 = deriv(t + h, x + h * k3);
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      }
    }
    out.steps += n;
    if (next_grid < grid.size() && b == grid[next_grid]) {
      record(b, x);
      ++next_grid;
    }
  }
  return out;
}

}  // namespace eitmem
