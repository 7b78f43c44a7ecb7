#include "eitmem/labio.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "eitmem/csv_format.hpp"
#include "eitmem/errors.hpp"
#include "eitmem/units.hpp"

namespace eitmem {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

constexpr double kTorr = 133.322368;  // Pa
constexpr double kRbMelting = 312.45;

}  // namespace

std::string_view to_string(TraceRole r) {
  switch (r) {
    case TraceRole::signal: return "I";
    case TraceRole::reference: return "I0";
    case TraceRole::background: return "B";
  }
  return "?";
}

TraceRole trace_role_from_string(std::string_view s) {
  if (s == "I") return TraceRole::signal;
  if (s == "I0") return TraceRole::reference;
  if (s == "B") return TraceRole::background;
  throw InputError("unknown trace role '" + std::string(s) + "' (expected I, I0 or B)");
}

void TraceSet::validate() const {
  if (traces.empty())
    throw InputError(std::string("no traces with role ") + std::string(to_string(role)));
  const auto& first = traces.front();
  if (first.x.empty()) throw InputError("trace 0 has no samples");
  std::vector<std::size_t> bad;
  for (std::size_t i = 1; i < traces.size(); ++i)
    if (traces[i].x != first.x) bad.push_back(i);
  if (!bad.empty()) {
    std::ostringstream os;
    os << "trace grids do not match trace 0; offending trace indices:";
    for (auto i : bad) os << ' ' << i << " (run " << traces[i].run_id << ')';
    throw GridMismatchError(os.str());
  }
}

TraceSet parse_traces(std::string_view text, TraceRole role, const std::string& source) {
  TraceSet out;
  out.role = role;
  bool have_unit = false;
  Trace* current = nullptr;
  bool in_block = false;
  std::size_t line_no = 0;

  auto fail = [&](const std::string& what) -> ParseError {
    return ParseError(source + ": " + what, line_no);
  };

  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string_view raw =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty()) continue;

    if (line.front() == '#') {
      const std::string_view body = trim(line.substr(1));
      if (body.find("x_unit=") == std::string_view::npos) continue;
      std::string unit, role_name, run;
      std::size_t p = 0;
      while (p <= body.size()) {
        const auto c = body.find(',', p);
        const std::string_view kv =
            trim(body.substr(p, c == std::string_view::npos ? std::string_view::npos : c - p));
        p = c == std::string_view::npos ? body.size() + 1 : c + 1;
        const auto eq = kv.find('=');
        if (eq == std::string_view::npos) throw fail("malformed header field '" + std::string(kv) + "'");
        const std::string key(trim(kv.substr(0, eq)));
        const std::string val(trim(kv.substr(eq + 1)));
        if (key == "x_unit") unit = val;
        else if (key == "role") role_name = val;
        else if (key == "run_id") run = val;
        else throw fail("unknown header field '" + key + "'");
      }
      if (unit != "Hz" && unit != "s") throw fail("x_unit must be Hz or s, got '" + unit + "'");
      if (role_name.empty() || run.empty()) throw fail("header needs role and run_id");
      TraceRole r;
      try {
        r = trace_role_from_string(role_name);
      } catch (const InputError& e) {
        throw fail(e.what());
      }
      in_block = true;
      if (r != role) {
        current = nullptr;
        continue;
      }
      if (have_unit && unit != out.x_unit) throw fail("mixed x units within one role");
      out.x_unit = unit;
      have_unit = true;
      out.traces.push_back({run, {}, {}});
      current = &out.traces.back();
      continue;
    }

    if (!in_block) throw fail("data row before any '# x_unit=...,role=...,run_id=...' header");
    const auto comma = line.find(',');
    if (comma == std::string_view::npos || line.find(',', comma + 1) != std::string_view::npos)
      throw fail("expected two comma-separated values 'x,value'");
    double x = 0.0, v = 0.0;
    try {
      x = parse_double(line.substr(0, comma));
      v = parse_double(line.substr(comma + 1));
    } catch (const InputError& e) {
      throw fail(e.what());
    }
    if (!std::isfinite(x) || !std::isfinite(v)) throw fail("non-finite value");
    if (current) {
      if (!current->x.empty() && !(x > current->x.back()))
        throw fail("x values must be strictly increasing within a trace");
      current->x.push_back(x);
      current->value.push_back(v);
    }
  }
  out.validate();
  return out;
}

TraceSet load_traces(const std::string& path, TraceRole role) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open trace file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_traces(ss.str(), role, path);
}

std::string traces_csv(const TraceSet& ts) {
  std::string out;
  for (const auto& t : ts.traces) {
    out += "# x_unit=" + ts.x_unit + ",role=" + std::string(to_string(ts.role)) +
           ",run_id=" + t.run_id + "\n";
    for (std::size_t i = 0; i < t.x.size(); ++i)
      out += format_double(t.x[i]) + "," + format_double(t.value[i]) + "\n";
  }
  return out;
}

Trace average_traces(const TraceSet& ts) {
  ts.validate();
  Trace out;
  out.run_id = "mean";
  out.x = ts.traces.front().x;
  out.value.assign(out.x.size(), 0.0);
  for (const auto& t : ts.traces)
    for (std::size_t i = 0; i < t.value.size(); ++i) out.value[i] += t.value[i];
  const double n = static_cast<double>(ts.size());
  for (double& v : out.value) v /= n;
  return out;
}

Trace beer_lambert_od(const Trace& signal, const Trace& reference, const Trace& background) {
  if (signal.x != reference.x || signal.x != background.x)
    throw GridMismatchError("beer_lambert_od: I, I0 and B must share one x grid");
  Trace out;
  out.run_id = "od";
  out.x = signal.x;
  out.value.resize(out.x.size());
  for (std::size_t i = 0; i < out.x.size(); ++i) {
    const double num = signal.value[i] - background.value[i];
    const double den = reference.value[i] - background.value[i];
    std::ostringstream os;
    if (!(den > 0.0)) {
      os << "I0 - B <= 0 at sample " << i << " (x = " << format_double(out.x[i]) << ")";
      throw DomainError(os.str());
    }
    if (!(num > 0.0)) {
      os << "I - B <= 0 at sample " << i << " (x = " << format_double(out.x[i])
         << "): background exceeds signal";
      throw DomainError(os.str());
    }
    out.value[i] = -std::log(num / den);
  }
  return out;
}

std::string od_csv(const Trace& od) { return to_csv({"delta_p_hz", "od"}, {od.x, od.value}); }

double rb_vapor_pressure(double temperature) {
  if (!(temperature > 0.0)) throw DomainError("temperature must be > 0");
  const bool solid = temperature < kRbMelting;
  const double a = solid ? 4.857 : 4.312;
  const double b = solid ? 4215.0 : 4040.0;
  return kTorr * std::pow(10.0, 2.881 + a - b / temperature);
}

double rb_number_density(double temperature) {
  return rb_vapor_pressure(temperature) / (constants::boltzmann * temperature);
}

double od_estimate(double temperature, double length, const OdCalibration& cal) {
  if (!(temperature >= 273.0 && temperature <= 350.0))
    throw DomainError("od_estimate: temperature must lie in [273, 350] K");
  if (!(length > 0.0)) throw DomainError("od_estimate: cell length must be > 0");
  const double c = cal.od / (rb_number_density(cal.temperature) * cal.length);
  return c * rb_number_density(temperature) * length;
}

}  // namespace eitmem
