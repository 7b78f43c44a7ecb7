#include "eitmem/storage.hpp"

#include <algorithm>
#include <cmath>

#include "eitmem/csv_format.hpp"
#include "eitmem/errors.hpp"
#include "eitmem/parallel.hpp"
#include "eitmem/units.hpp"

namespace eitmem {

void PulseSequence::validate() const {
  auto check = [](double v, const char* what, bool strict) {
    if (!std::isfinite(v) || v < 0.0 || (strict && v == 0.0))
      throw DomainError(std::string("pulse sequence: ") + what +
                        (strict ? " must be > 0" : " must be >= 0"));
  };
  check(write_duration, "write duration", false);
  check(probe_duration, "probe duration", true);
  check(probe_rise_time, "probe rise time", true);
  check(storage_time, "storage time", false);
  check(retrieval_window, "retrieval window", true);
  check(sample_step, "sample step", true);
  if (sample_step * 4.0 > retrieval_window)
    throw DomainError("pulse sequence: retrieval window needs at least 4 samples");
}

Envelope PulseSequence::coupling_envelope() const {
  Envelope e;
  e.add_constant(0.0, write_duration + probe_duration, 1.0);
  e.add_constant(retrieval_start(), std::numeric_limits<double>::infinity(), 1.0);
  return e;
}

Envelope PulseSequence::probe_envelope() const {
  Envelope e;
  e.add_exponential_rise(write_duration, write_duration + probe_duration, 1.0, probe_rise_time);
  return e;
}

namespace {

struct WrittenState {
  DrivenGenerator generator;
  DensityMatrix state;  // at the end of the probe pulse
  std::size_t steps = 0;
};

WrittenState write(const AtomSpec& atom, const CellSpec& cell, const FieldSpec& coupling,
                   const FieldSpec& probe, const PulseSequence& seq,
                   const TimeEvolveOptions& options) {
  seq.validate();
  FieldSpec p = probe;
  p.detuning = coupling.detuning;
  const GeneratorParts parts = assemble_generator(generator_inputs(atom, cell, coupling, p));
  WrittenState w;
  w.generator = DrivenGenerator::from_parts(parts, seq.coupling_envelope(), seq.probe_envelope());
  const double grid[] = {0.0, seq.write_duration + seq.probe_duration};
  const Trajectory traj = time_evolve(w.generator, DensityMatrix::ground_mixture(), grid, options);
  w.state = traj.states.back();
  w.steps = traj.steps;
  return w;
}

// Dark time and retrieval window, from the written state. Leaves the
// normalization fields unset.
RetrievalResult read(const WrittenState& w, const PulseSequence& seq,
                     const TimeEvolveOptions& options) {
  const double pulse_end = seq.write_duration + seq.probe_duration;
  const double start = seq.retrieval_start();
  const auto samples =
      static_cast<std::size_t>(std::llround(seq.retrieval_window / seq.sample_step));

  std::vector<double> grid{pulse_end};
  if (start > pulse_end) grid.push_back(start);
  for (std::size_t k = 1; k <= samples; ++k)
    grid.push_back(start + static_cast<double>(k) * seq.sample_step);

  // The envelopes are fixed in absolute time, so a sequence with a different
  // storage time needs its own coupling envelope.
  DrivenGenerator g = w.generator;
  g.coupling_envelope = seq.coupling_envelope();
  const Trajectory traj = time_evolve(g, w.state, grid, options);

  RetrievalResult r;
  r.steps = w.steps + traj.steps;
  const std::size_t first = start > pulse_end ? 1 : 0;
  r.stored_coherence = std::abs(traj.states[first](0, 1));
  for (std::size_t i = first + 1; i < traj.times.size(); ++i) {
    r.times.push_back(traj.times[i] - start);
    r.signal.push_back(std::abs(traj.states[i](0, 3).imag()));
  }
  for (std::size_t i = 1; i < r.times.size(); ++i)
    r.area += 0.5 * (r.signal[i] + r.signal[i - 1]) * (r.times[i] - r.times[i - 1]);
  r.trajectory = traj;
  return r;
}

void normalize(RetrievalResult& r, double reference_area) {
  if (!(reference_area > 0.0))
    throw SolverError("storage: nothing retrieved at zero storage time (reference area is 0)");
  r.reference_area = reference_area;
  r.efficiency = r.area / reference_area;
}

}  // namespace

RetrievalResult simulate_storage(const AtomSpec& atom, const CellSpec& cell,
                                 const FieldSpec& coupling, const FieldSpec& probe,
                                 const PulseSequence& seq, std::optional<double> reference_area,
                                 const TimeEvolveOptions& options) {
  const WrittenState w = write(atom, cell, coupling, probe, seq, options);
  RetrievalResult r = read(w, seq, options);
  if (!reference_area) {
    if (seq.storage_time == 0.0) {
      reference_area = r.area;
    } else {
      PulseSequence ref = seq;
      ref.storage_time = 0.0;
      reference_area = read(w, ref, options).area;
    }
  }
  normalize(r, *reference_area);
  return r;
}

double predicted_lifetime(const CellSpec& cell) {
  if (!(cell.intercept_b_hz > 0.0)) throw DomainError("predicted_lifetime: needs b > 0");
  return 1.0 / (constants::two_pi * 0.5 * cell.intercept_b_hz);
}

std::vector<double> default_storage_times(const CellSpec& cell, std::size_t n,
                                          double span_lifetimes) {
  return linspace(0.0, span_lifetimes * predicted_lifetime(cell), n);
}

LifetimeScan lifetime_scan(const AtomSpec& atom, const CellSpec& cell, const FieldSpec& coupling,
                           const FieldSpec& probe, const PulseSequence& base,
                           std::span<const double> storage_times) {
  if (storage_times.size() < 6) throw DomainError("lifetime_scan: needs at least 6 storage times");
  for (double t : storage_times)
    if (!(t >= 0.0) || !std::isfinite(t))
      throw DomainError("lifetime_scan: storage times must be finite and >= 0");

  const WrittenState w = write(atom, cell, coupling, probe, base, {});
  PulseSequence ref = base;
  ref.storage_time = 0.0;
  const double reference = read(w, ref, {}).area;

  const auto results = parallel_map(storage_times.size(), [&](std::size_t i) {
    PulseSequence s = base;
    s.storage_time = storage_times[i];
    RetrievalResult r = read(w, s, {});
    normalize(r, reference);
    return r;
  });

  LifetimeScan scan;
  scan.storage_times.assign(storage_times.begin(), storage_times.end());
  for (const auto& r : results) {
    scan.efficiencies.push_back(r.efficiency);
    scan.stored_coherence.push_back(r.stored_coherence);
  }
  scan.retrievals = results;
  scan.predicted = cell.intercept_b_hz > 0.0 ? predicted_lifetime(cell) : 0.0;
  std::optional<std::vector<double>> init;
  if (scan.predicted > 0.0) init = std::vector<double>{1.0, scan.predicted};
  scan.fit = fit_curve(ModelShape::exp_decay, scan.storage_times, scan.efficiencies, init);
  return scan;
}

std::string lifetime_csv(const LifetimeScan& scan) {
  return to_csv({"storage_time_s", "efficiency", "stored_coherence"},
                {scan.storage_times, scan.efficiencies, scan.stored_coherence});
}

std::string retrieval_csv(const RetrievalResult& r) {
  return to_csv({"t_s", "signal"}, {r.times, r.signal});
}

}  // namespace eitmem
