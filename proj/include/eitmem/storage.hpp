#pragma once

// Write, store and retrieve on the density-matrix model.
//
// Timeline (t = 0 at the start of the write phase):
//   [0, W)              coupling on, probe off: optical pumping
//   [W, W + P)          coupling on, probe exponential rise cut at its peak
//   [W + P, W + P + ts) both fields off
//   [W + P + ts, ...)   coupling on, probe off: retrieval window
// The probe runs on two-photon resonance, Δp = Δc.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eitmem/atomic_model.hpp"
#include "eitmem/bloch.hpp"
#include "eitmem/fits.hpp"

namespace eitmem {

struct PulseSequence {
  double write_duration = 50e-6;
  double probe_duration = 10e-6;
  double probe_rise_time = 2.5e-6;  // τ of exp((t − t_peak)/τ)
  double storage_time = 0.0;
  double retrieval_window = 20e-6;
  double sample_step = 0.1e-6;

  void validate() const;
  Envelope coupling_envelope() const;
  Envelope probe_envelope() const;
  double retrieval_start() const { return write_duration + probe_duration + storage_time; }
};

struct RetrievalResult {
  /// Sample times measured from the retrieval switch-on; the switch-on
  /// instant itself is excluded, since it still carries the write-phase
  /// polarization when ts = 0.
  std::vector<double> times;
  std::vector<double> signal;       // |Im σ14(t)|
  double stored_coherence = 0.0;    // |σ12| at the retrieval switch-on
  double area = 0.0;                // ∫ signal dt
  double reference_area = 0.0;      // area at ts = 0
  double efficiency = 0.0;          // area / reference_area
  std::size_t steps = 0;
  /// Dark time and retrieval, from the end of the probe pulse.
  Trajectory trajectory;
};

/// Runs the sequence. `reference_area` is the retrieved area of the same
/// settings at ts = 0; computed here when absent (ts = 0 reuses its own).
RetrievalResult simulate_storage(const AtomSpec& atom, const CellSpec& cell,
                                 const FieldSpec& coupling, const FieldSpec& probe,
                                 const PulseSequence& seq,
                                 std::optional<double> reference_area = std::nullopt,
                                 const TimeEvolveOptions& options = {});

/// τ = 1/(2π·b/2), b in ordinary Hz.
double predicted_lifetime(const CellSpec& cell);

/// ts = linspace(0, span_lifetimes·τ_pred, n).
std::vector<double> default_storage_times(const CellSpec& cell, std::size_t n = 8,
                                          double span_lifetimes = 2.5);

struct LifetimeScan {
  std::vector<double> storage_times;
  std::vector<double> efficiencies;
  std::vector<double> stored_coherence;
  std::vector<RetrievalResult> retrievals;
  FitResult fit;  // exp-decay, params (amplitude, τ)
  double predicted = 0.0;
  double tau() const { return fit.params.at(1); }
};

/// Needs at least 6 storage times. Points run in parallel.
LifetimeScan lifetime_scan(const AtomSpec& atom, const CellSpec& cell, const FieldSpec& coupling,
                           const FieldSpec& probe, const PulseSequence& base,
                           std::span<const double> storage_times);

/// Columns storage_time_s, efficiency, stored_coherence.
std::string lifetime_csv(const LifetimeScan& scan);
/// Columns t_s, signal.
std::string retrieval_csv(const RetrievalResult& r);

}  // namespace eitmem
