#pragma once

// Trace files, run averaging and Beer-Lambert optical depth.
//
// Trace CSV: one block per run. Each block starts with a comment line
//   # x_unit=Hz,role=I,run_id=3
// followed by `x,value` rows. Blank lines and other `#` lines are ignored.
// Accepted x units are Hz and s; roles are I, I0 and B.

#include <string>
#include <string_view>
#include <vector>

namespace eitmem {

enum class TraceRole { signal, reference, background };

std::string_view to_string(TraceRole r);  // "I", "I0", "B"
TraceRole trace_role_from_string(std::string_view s);

struct Trace {
  std::string run_id;
  std::vector<double> x;
  std::vector<double> value;
};

struct TraceSet {
  TraceRole role = TraceRole::signal;
  std::string x_unit = "Hz";
  std::vector<Trace> traces;

  std::size_t size() const { return traces.size(); }
  /// Non-empty, equal lengths, identical x grids. Throws GridMismatchError
  /// listing the offending trace indices.
  void validate() const;
};

/// Parses `text` keeping only blocks whose role matches. `source` names the
/// input in error messages.
TraceSet parse_traces(std::string_view text, TraceRole role, const std::string& source = "<text>");
/// Throws InputError if the file cannot be read, ParseError with the line
/// number on malformed rows.
TraceSet load_traces(const std::string& path, TraceRole role);

std::string traces_csv(const TraceSet& ts);

/// Pointwise arithmetic mean.
Trace average_traces(const TraceSet& ts);

/// OD = −ln[(I − B)/(I0 − B)] pointwise. Throws DomainError naming the
/// first sample where I − B ≤ 0 or I0 − B ≤ 0.
Trace beer_lambert_od(const Trace& signal, const Trace& reference, const Trace& background);

/// Columns delta_p_hz, od.
std::string od_csv(const Trace& od);

/// Rb saturated vapor pressure (Pa): log10 P[torr] = 2.881 + A − B/T with
/// (A, B) = (4.857, 4215) for the solid and (4.312, 4040) above the
/// 312.45 K melting point.
double rb_vapor_pressure(double temperature);
/// Number density P/(k_B·T), m⁻³.
double rb_number_density(double temperature);

struct OdCalibration {
  double temperature = 295.0;
  double length = 0.075;
  double od = 0.75;
};

/// OD scale at temperature T (K) for a cell of the given length (m):
/// proportional to n(T)·L, calibrated so OD(cal.temperature, cal.length)
/// = cal.od. T must lie in [273, 350] K.
double od_estimate(double temperature, double length, const OdCalibration& cal = {});

}  // namespace eitmem
