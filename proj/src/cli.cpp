#include "eitmem/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "eitmem/atomic_model.hpp"
#include "eitmem/broadening.hpp"
#include "eitmem/csv_format.hpp"
#include "eitmem/errors.hpp"
#include "eitmem/fits.hpp"
#include "eitmem/labio.hpp"
#include "eitmem/manifest.hpp"
#include "eitmem/spectra.hpp"
#include "eitmem/storage.hpp"
#include "eitmem/units.hpp"

namespace eitmem {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// --- parsed flags --------------------------------------------------------------

struct Options {
  std::string model = "four-level";
  std::string cell = "ne-5torr";
  std::string atom = "rb85-d1";
  double coupling_intensity = 25.0;
  double probe_intensity = kProbeCalibrationIntensity;
  std::string delta_c = "0";
  std::string probe_grid = "auto";
  std::string out = "out";

  // series
  std::string series_delta_c = "-800e6:800e6:9";
  std::string series_grid = "-250e3:250e3:2001";
  // linewidth-scan
  std::string intensities = "1.5:25:10";
  std::size_t points = 2001;
  double half_widths = 15.0;
  // broadening
  double angle = 0.0;
  // storage
  std::string storage_times = "auto";
  double write_duration = 50e-6;
  double probe_duration = 10e-6;
  double probe_rise_time = 2.5e-6;
  double retrieval_window = 20e-6;
  double sample_step = 0.1e-6;
  // fit
  std::string shape;
  std::string data;
  std::string init;
  int bootstrap = 0;
  std::uint64_t seed = 1;
  // analyze
  std::string traces;
  std::string signal;
  std::string reference;
  std::string background;
  double temperature = 0.0;
  double length = 0.075;
  // run
  std::string manifest;
};

struct App {
  std::unique_ptr<CLI::App> app;
  std::map<std::string, CLI::App*> subs;
};

void add_model_flags(CLI::App* s, Options& o, bool fields) {
  s->add_option("--model", o.model, "Level scheme: three-level or four-level")
      ->capture_default_str();
  s->add_option("--cell", o.cell,
                "Cell preset (ne-5torr, alkene, paraffin, reference) or cell JSON file")
      ->capture_default_str();
  s->add_option("--atom", o.atom, "Atom preset (rb85-d1) or atom JSON file")
      ->capture_default_str();
  if (!fields) return;
  s->add_option("--coupling-intensity", o.coupling_intensity, "Coupling intensity, W/m^2")
      ->capture_default_str();
  s->add_option("--probe-intensity", o.probe_intensity, "Probe intensity, W/m^2")
      ->capture_default_str();
}

void add_out_flag(CLI::App* s, Options& o) {
  s->add_option("--out", o.out, "Output directory")->capture_default_str();
}

App build_app(Options& o) {
  App a;
  a.app = std::make_unique<CLI::App>("EIT optical-memory simulator for the 85Rb D1 line",
                                     "eitmem");
  a.app->require_subcommand(1);
  a.app->set_version_flag("--version", std::string(kToolVersion));

  auto* sp = a.app->add_subcommand("spectrum", "Steady-state probe absorption spectrum");
  add_model_flags(sp, o, true);
  sp->add_option("--delta-c", o.delta_c, "Coupling detuning, Hz")->capture_default_str();
  sp->add_option("--probe-grid", o.probe_grid,
                 "Probe offsets from two-photon resonance start:stop:n in Hz, or auto")
      ->capture_default_str();
  add_out_flag(sp, o);
  a.subs["spectrum"] = sp;

  auto* se = a.app->add_subcommand("series", "Spectra over a range of coupling detunings");
  add_model_flags(se, o, true);
  se->add_option("--delta-c", o.series_delta_c, "Coupling detunings start:stop:n in Hz")
      ->capture_default_str();
  se->add_option("--probe-grid", o.series_grid,
                 "Probe offsets from two-photon resonance start:stop:n in Hz, or auto")
      ->capture_default_str();
  add_out_flag(se, o);
  a.subs["series"] = se;

  auto* lw = a.app->add_subcommand("linewidth-scan", "EIT FWHM and contrast vs coupling intensity");
  add_model_flags(lw, o, false);
  lw->add_option("--probe-intensity", o.probe_intensity, "Probe intensity, W/m^2")
      ->capture_default_str();
  lw->add_option("--intensities", o.intensities, "Coupling intensities start:stop:n in W/m^2")
      ->capture_default_str();
  lw->add_option("--points", o.points, "Probe grid points per spectrum")->capture_default_str();
  lw->add_option("--half-widths", o.half_widths,
                 "Probe grid half-span in units of the estimated FWHM")
      ->capture_default_str();
  add_out_flag(lw, o);
  a.subs["linewidth-scan"] = lw;

  auto* br = a.app->add_subcommand("broadening", "Broadening budget for a cell");
  br->add_option("--cell", o.cell, "Cell preset or cell JSON file")->capture_default_str();
  br->add_option("--atom", o.atom, "Atom preset or atom JSON file")->capture_default_str();
  br->add_option("--angle", o.angle, "Probe-coupling angle, rad (0 to 0.1)")
      ->capture_default_str();
  add_out_flag(br, o);
  a.subs["broadening"] = br;

  auto* st = a.app->add_subcommand("storage", "Light storage: efficiency vs storage time");
  add_model_flags(st, o, true);
  st->add_option("--delta-c", o.delta_c, "Coupling detuning, Hz")->capture_default_str();
  st->add_option("--storage-times", o.storage_times,
                 "Storage times start:stop:n in s, or auto (0 to 2.5 predicted lifetimes)")
      ->capture_default_str();
  st->add_option("--write-duration", o.write_duration, "Coupling-only preparation, s")
      ->capture_default_str();
  st->add_option("--probe-duration", o.probe_duration, "Probe pulse length, s")
      ->capture_default_str();
  st->add_option("--probe-rise-time", o.probe_rise_time, "Probe exponential rise constant, s")
      ->capture_default_str();
  st->add_option("--retrieval-window", o.retrieval_window, "Retrieval window, s")
      ->capture_default_str();
  st->add_option("--sample-step", o.sample_step, "Retrieval sample spacing, s")
      ->capture_default_str();
  add_out_flag(st, o);
  a.subs["storage"] = st;

  auto* fi = a.app->add_subcommand("fit", "Least-squares fit of x,y data to a model shape");
  fi->add_option("--shape", o.shape,
                 "lorentzian-dip, cusp, linear, saturation or exp-decay")
      ->required();
  fi->add_option("--data", o.data, "CSV with x,y columns")->required();
  fi->add_option("--init", o.init, "Comma-separated initial parameters (default: auto)");
  fi->add_option("--bootstrap", o.bootstrap, "Residual-bootstrap resamples (0 = off)")
      ->capture_default_str();
  fi->add_option("--seed", o.seed, "Bootstrap seed")->capture_default_str();
  add_out_flag(fi, o);
  a.subs["fit"] = fi;

  auto* an = a.app->add_subcommand("analyze", "Average traces and convert to optical depth");
  an->add_option("--traces", o.traces, "Trace CSV holding I, I0 and B blocks");
  an->add_option("--signal", o.signal, "Trace CSV with the I blocks");
  an->add_option("--reference", o.reference, "Trace CSV with the I0 blocks");
  an->add_option("--background", o.background, "Trace CSV with the B blocks");
  an->add_option("--temperature", o.temperature, "Also report the OD estimate at this T, K");
  an->add_option("--length", o.length, "Cell length for the OD estimate, m")
      ->capture_default_str();
  add_out_flag(an, o);
  a.subs["analyze"] = an;

  auto* rn = a.app->add_subcommand("run", "Replay a previous run from its manifest");
  rn->add_option("--from-manifest", o.manifest, "manifest.json of the run to replay")
      ->required();
  add_out_flag(rn, o);
  a.subs["run"] = rn;
  return a;
}

// --- request resolution ----------------------------------------------------------

bool is_cell_preset(const std::string& s) {
  const auto names = cell_preset_names();
  return std::find(names.begin(), names.end(), s) != names.end();
}

void require_finite(double v, const std::string& flag, bool positive) {
  if (!std::isfinite(v) || v < 0.0 || (positive && v == 0.0))
    throw DomainError(flag + " must be " + (positive ? "> 0" : ">= 0") + ", got " +
                      format_double(v));
}

json range_json(const std::string& spec, const std::string& flag) {
  try {
    const auto parts = parse_range(spec);
    (void)parts;
  } catch (const InputError& e) {
    throw InputError(flag + ": " + e.what());
  }
  const auto c1 = spec.find(':');
  const auto c2 = spec.find(':', c1 + 1);
  const double start = parse_double(spec.substr(0, c1));
  const double stop = parse_double(spec.substr(c1 + 1, c2 - c1 - 1));
  const double n = parse_double(spec.substr(c2 + 1));
  return {{"start", start}, {"stop", stop}, {"points", static_cast<std::size_t>(n)}};
}

std::vector<double> expand_range(const json& r, double scale = 1.0) {
  return linspace(scale * r.at("start").get<double>(), scale * r.at("stop").get<double>(),
                  r.at("points").get<std::size_t>());
}

struct Resolution {
  json request;
  json presets = json::object();
  json inputs = json::array();
};

void resolve_input_file(Resolution& r, const std::string& key, const std::string& path) {
  const std::string digest = file_sha256(path);
  r.inputs.push_back({{"role", key}, {"path", path}, {"sha256", digest}});
  r.request[key] = {{"path", path}, {"sha256", digest}};
}

void resolve_model(Resolution& r, const Options& o, bool fields) {
  model_variant_from_string(o.model);
  r.request["model"] = o.model;
  const CellSpec cell = load_cell(o.cell);
  const AtomSpec atom = load_atom(o.atom);
  r.request["cell"] = to_json(cell);
  r.request["atom"] = to_json(atom);
  r.presets["cell"] = is_cell_preset(o.cell) ? json(o.cell) : json(nullptr);
  r.presets["atom"] = o.atom == "rb85-d1" ? json(o.atom) : json(nullptr);
  if (!is_cell_preset(o.cell))
    r.inputs.push_back({{"role", "cell"}, {"path", o.cell}, {"sha256", file_sha256(o.cell)}});
  if (o.atom != "rb85-d1")
    r.inputs.push_back({{"role", "atom"}, {"path", o.atom}, {"sha256", file_sha256(o.atom)}});
  if (fields) {
    require_finite(o.coupling_intensity, "--coupling-intensity", false);
    require_finite(o.probe_intensity, "--probe-intensity", true);
    r.request["coupling_intensity_w_m2"] = o.coupling_intensity;
    r.request["probe_intensity_w_m2"] = o.probe_intensity;
  }
}

json grid_json(const std::string& spec, const std::string& flag) {
  if (spec == "auto") return "auto";
  return range_json(spec, flag);
}

Resolution resolve(const std::string& sub, const Options& o) {
  Resolution r;
  r.request = {{"subcommand", sub}};
  if (sub == "spectrum") {
    resolve_model(r, o, true);
    r.request["delta_c_hz"] = parse_double(o.delta_c);
    r.request["probe_grid_hz"] = grid_json(o.probe_grid, "--probe-grid");
  } else if (sub == "series") {
    resolve_model(r, o, true);
    if (o.series_delta_c.find(':') == std::string::npos) {
      const double v = parse_double(o.series_delta_c);
      r.request["delta_c_hz"] = {{"start", v}, {"stop", v}, {"points", 1}};
    } else {
      r.request["delta_c_hz"] = range_json(o.series_delta_c, "--delta-c");
    }
    r.request["probe_grid_hz"] = grid_json(o.series_grid, "--probe-grid");
  } else if (sub == "linewidth-scan") {
    resolve_model(r, o, false);
    require_finite(o.probe_intensity, "--probe-intensity", true);
    r.request["probe_intensity_w_m2"] = o.probe_intensity;
    r.request["intensities_w_m2"] = range_json(o.intensities, "--intensities");
    if (o.points < 11) throw DomainError("--points must be at least 11");
    require_finite(o.half_widths, "--half-widths", true);
    r.request["points"] = o.points;
    r.request["half_widths"] = o.half_widths;
  } else if (sub == "broadening") {
    const CellSpec cell = load_cell(o.cell);
    const AtomSpec atom = load_atom(o.atom);
    r.request["cell"] = to_json(cell);
    r.request["atom"] = to_json(atom);
    r.presets["cell"] = is_cell_preset(o.cell) ? json(o.cell) : json(nullptr);
    r.presets["atom"] = o.atom == "rb85-d1" ? json(o.atom) : json(nullptr);
    r.request["angle_rad"] = o.angle;
  } else if (sub == "storage") {
    resolve_model(r, o, true);
    r.request["delta_c_hz"] = parse_double(o.delta_c);
    r.request["storage_times_s"] = grid_json(o.storage_times, "--storage-times");
    r.request["sequence"] = {{"write_duration_s", o.write_duration},
                             {"probe_duration_s", o.probe_duration},
                             {"probe_rise_time_s", o.probe_rise_time},
                             {"retrieval_window_s", o.retrieval_window},
                             {"sample_step_s", o.sample_step}};
  } else if (sub == "fit") {
    model_shape_from_string(o.shape);
    r.request["shape"] = o.shape;
    resolve_input_file(r, "data", o.data);
    if (!o.init.empty()) {
      json init = json::array();
      std::stringstream ss(o.init);
      std::string item;
      while (std::getline(ss, item, ',')) init.push_back(parse_double(item));
      r.request["init"] = init;
    }
    if (o.bootstrap < 0) throw DomainError("--bootstrap must be >= 0");
    r.request["bootstrap"] = o.bootstrap;
    r.request["seed"] = o.seed;
  } else if (sub == "analyze") {
    const bool single = !o.traces.empty();
    const bool split = !o.signal.empty() || !o.reference.empty() || !o.background.empty();
    if (single == split)
      throw InputError("analyze: give either --traces or all of --signal, --reference, --background");
    if (single) {
      resolve_input_file(r, "signal", o.traces);
      r.request["reference"] = r.request["signal"];
      r.request["background"] = r.request["signal"];
    } else {
      if (o.signal.empty() || o.reference.empty() || o.background.empty())
        throw InputError("analyze: --signal, --reference and --background are all required");
      resolve_input_file(r, "signal", o.signal);
      resolve_input_file(r, "reference", o.reference);
      resolve_input_file(r, "background", o.background);
    }
    if (o.temperature != 0.0) {
      r.request["temperature_k"] = o.temperature;
      r.request["length_m"] = o.length;
    }
  }
  return r;
}

// --- execution -------------------------------------------------------------------

struct Artifact {
  std::string file;
  std::string content;
};

struct Context {
  json request;
  std::string fingerprint;
  std::ostream& out;
};

json sidecar_base(const Context& c) {
  return {{"manifest", "manifest.json"},
          {"fingerprint", c.fingerprint},
          {"subcommand", c.request.at("subcommand")}};
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json num(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

struct Model {
  AtomSpec atom;
  CellSpec cell;
  ModelVariant variant = ModelVariant::four_level;
  FieldSpec coupling;
  FieldSpec probe;
};

Model model_from(const json& req) {
  Model m;
  m.atom = atom_from_json(req.at("atom"));
  m.cell = cell_from_json(req.at("cell"));
  if (req.contains("model")) m.variant = model_variant_from_string(req.at("model").get<std::string>());
  const double dc = req.contains("delta_c_hz") && req.at("delta_c_hz").is_number()
                        ? angular_from_hz(req.at("delta_c_hz").get<double>())
                        : 0.0;
  if (req.contains("coupling_intensity_w_m2"))
    m.coupling = make_coupling(field_of_intensity(req.at("coupling_intensity_w_m2").get<double>()), dc);
  if (req.contains("probe_intensity_w_m2"))
    m.probe = make_probe(field_of_intensity(req.at("probe_intensity_w_m2").get<double>()), dc);
  return m;
}

std::vector<double> offsets_for(const json& grid, const Model& m) {
  if (grid.is_string())
    return auto_probe_grid(apply_variant(m.atom, m.variant), m.cell,
                           make_coupling(m.coupling.amplitude), m.probe);
  return expand_range(grid, constants::two_pi);
}

json dip_json(const Spectrum& s, double delta_c) {
  try {
    const DipFeature d = locate_dip(s);
    return {{"center_hz", hz_from_angular(d.center)},
            {"center_offset_hz", hz_from_angular(d.center - delta_c)},
            {"fwhm_hz", d.fwhm_hz},
            {"depth", d.depth}};
  } catch (const NoTransparencyFeature&) {
    return nullptr;
  }
}

std::vector<Artifact> cmd_spectrum(const Context& c) {
  const Model m = model_from(c.request);
  std::vector<double> grid = offsets_for(c.request.at("probe_grid_hz"), m);
  for (double& g : grid) g += m.coupling.detuning;
  const Spectrum s = eit_spectrum(m.atom, m.cell, m.coupling, m.probe, grid, m.variant);
  const Spectrum ref = no_coupling_reference(m.atom, m.cell, m.probe, grid, m.variant);

  std::vector<double> hz(grid.size()), off(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    hz[i] = hz_from_angular(grid[i]);
    off[i] = hz_from_angular(grid[i] - m.coupling.detuning);
  }
  const std::string ref_csv =
      to_csv({"delta_p_hz", "offset_hz", "alpha_ref"}, {hz, off, ref.absorption});

  json side = sidecar_base(c);
  side["dip"] = dip_json(s, m.coupling.detuning);
  side["asymmetry"] = feature_asymmetry(s);
  side["net_area"] = net_feature_area(s);
  try {
    side["contrast"] = extract_contrast(s, ref);
  } catch (const SolverError&) {
    side["contrast"] = nullptr;
  }
  if (!side["dip"].is_null()) {
    const double baseline = 0.5 * (s.absorption.front() + s.absorption.back());
    const std::vector<double> init{baseline, side["dip"]["depth"].get<double>(),
                                   side["dip"]["center_hz"].get<double>(),
                                   side["dip"]["fwhm_hz"].get<double>()};
    try {
      side["lorentzian_fit"] = fit_report(fit_curve(ModelShape::lorentzian_dip, hz, s.absorption, init));
    } catch (const SolverError& e) {
      side["lorentzian_fit"] = {{"error", e.what()}};
    }
  }

  c.out << "spectrum: " << grid.size() << " points, model " << to_string(m.variant) << ", cell "
        << m.cell.name << "\n";
  if (!side["dip"].is_null())
    c.out << "  dip center offset " << format_double(side["dip"]["center_offset_hz"].get<double>())
          << " Hz, FWHM " << format_double(side["dip"]["fwhm_hz"].get<double>()) << " Hz\n";
  else
    c.out << "  no transparency dip\n";
  return {{"spectrum.csv", spectrum_csv(s)},
          {"reference.csv", ref_csv},
          {"spectrum.json", dump(side)}};
}

std::vector<Artifact> cmd_series(const Context& c) {
  const Model m = model_from(c.request);
  const std::vector<double> dcs = expand_range(c.request.at("delta_c_hz"), constants::two_pi);
  const std::vector<double> offsets = offsets_for(c.request.at("probe_grid_hz"), m);
  const auto series = detuning_series(m.atom, m.cell, m.coupling, m.probe, dcs, offsets, m.variant);

  std::vector<double> col_dc, col_off, col_a;
  std::vector<double> s_dc, s_area, s_asym, s_fwhm, s_center;
  json rows = json::array();
  for (std::size_t k = 0; k < series.size(); ++k) {
    const double dc_hz = hz_from_angular(dcs[k]);
    for (std::size_t i = 0; i < offsets.size(); ++i) {
      col_dc.push_back(dc_hz);
      col_off.push_back(hz_from_angular(offsets[i]));
      col_a.push_back(series[k].absorption[i]);
    }
    const json dip = dip_json(series[k], dcs[k]);
    s_dc.push_back(dc_hz);
    s_area.push_back(net_feature_area(series[k]));
    s_asym.push_back(feature_asymmetry(series[k]));
    const double nan = std::numeric_limits<double>::quiet_NaN();
    s_fwhm.push_back(dip.is_null() ? nan : dip["fwhm_hz"].get<double>());
    s_center.push_back(dip.is_null() ? nan : dip["center_offset_hz"].get<double>());
    rows.push_back({{"delta_c_hz", dc_hz},
                    {"net_area", s_area.back()},
                    {"asymmetry", s_asym.back()},
                    {"dip", dip}});
  }

  // Smallest |Δc| on each side at which the feature is net absorption.
  json conversion = {{"red_hz", nullptr}, {"blue_hz", nullptr}};
  for (std::size_t k = 0; k < s_dc.size(); ++k) {
    if (!(s_area[k] > 0.0) || s_dc[k] == 0.0) continue;
    const char* side = s_dc[k] < 0.0 ? "red_hz" : "blue_hz";
    if (conversion[side].is_null() || std::abs(s_dc[k]) < std::abs(conversion[side].get<double>()))
      conversion[side] = s_dc[k];
  }

  json side = sidecar_base(c);
  side["spectra"] = rows;
  side["net_absorption_onset"] = conversion;

  c.out << "series: " << series.size() << " spectra of " << offsets.size() << " points\n";
  for (std::size_t k = 0; k < s_dc.size(); ++k)
    c.out << "  delta_c " << format_double(s_dc[k]) << " Hz  net area " << format_double(s_area[k])
          << "  asymmetry " << format_double(s_asym[k]) << "\n";
  return {{"series.csv", to_csv({"delta_c_hz", "offset_hz", "alpha_p"}, {col_dc, col_off, col_a})},
          {"series_summary.csv",
           to_csv({"delta_c_hz", "net_area", "asymmetry", "fwhm_hz", "center_offset_hz"},
                  {s_dc, s_area, s_asym, s_fwhm, s_center})},
          {"series.json", dump(side)}};
}

std::vector<Artifact> cmd_linewidth(const Context& c) {
  const Model m = model_from(c.request);
  const std::vector<double> intensities = expand_range(c.request.at("intensities_w_m2"));
  const auto points = c.request.at("points").get<std::size_t>();
  const double half_widths = c.request.at("half_widths").get<double>();
  const AtomSpec a = apply_variant(m.atom, m.variant);

  std::vector<double> fwhm, contrast;
  for (double intensity : intensities) {
    require_finite(intensity, "coupling intensity", true);
    const FieldSpec coupling = make_coupling(field_of_intensity(intensity));
    const auto grid = auto_probe_grid(a, m.cell, coupling, m.probe, points, half_widths);
    const Spectrum s = eit_spectrum(a, m.cell, coupling, m.probe, grid, m.variant);
    const Spectrum ref = no_coupling_reference(a, m.cell, m.probe, grid, m.variant);
    fwhm.push_back(extract_fwhm(s));
    contrast.push_back(extract_contrast(s, ref));
  }

  json side = sidecar_base(c);
  side["linear_fit"] = fit_report(fit_curve(ModelShape::linear, intensities, fwhm));
  side["intercept_b_configured_hz"] = m.cell.intercept_b_hz;
  try {
    side["contrast_saturation_fit"] =
        fit_report(fit_curve(ModelShape::saturation, intensities, contrast));
  } catch (const SolverError& e) {
    side["contrast_saturation_fit"] = {{"error", e.what()}};
  }
  c.out << "linewidth-scan: intercept "
        << format_double(side["linear_fit"]["params"]["intercept"].get<double>()) << " Hz (b = "
        << format_double(m.cell.intercept_b_hz) << " Hz)\n";
  return {{"linewidth.csv",
           to_csv({"intensity_w_m2", "fwhm_hz", "contrast"}, {intensities, fwhm, contrast})},
          {"linewidth.json", dump(side)}};
}

std::vector<Artifact> cmd_broadening(const Context& c) {
  const AtomSpec atom = atom_from_json(c.request.at("atom"));
  const CellSpec cell = cell_from_json(c.request.at("cell"));
  const auto budget = broadening_budget(atom, cell, c.request.at("angle_rad").get<double>());
  const BroadeningInput in = broadening_input(atom, cell, c.request.at("angle_rad").get<double>());

  std::string csv = "mechanism,value_hz\n";
  json side = sidecar_base(c);
  json table = json::object();
  c.out << "broadening budget for " << cell.name << " (" << to_string(regime_for(cell.kind))
        << " regime)\n";
  for (const auto& e : budget) {
    csv += e.mechanism + "," + format_double(e.value_hz) + "\n";
    table[e.mechanism] = e.value_hz;
    std::ostringstream line;
    line << "  " << std::left << std::setw(30) << e.mechanism << format_double(e.value_hz)
         << " Hz\n";
    c.out << line.str();
  }
  side["budget_hz"] = table;
  side["thermal_velocity_m_s"] = thermal_velocity(in.temperature, in.mass);
  side["regime"] = std::string(to_string(regime_for(cell.kind)));
  return {{"broadening.csv", csv}, {"broadening.json", dump(side)}};
}

std::vector<Artifact> cmd_storage(const Context& c) {
  Model m = model_from(c.request);
  const AtomSpec atom = apply_variant(m.atom, m.variant);
  const json& q = c.request.at("sequence");
  PulseSequence seq;
  seq.write_duration = q.at("write_duration_s").get<double>();
  seq.probe_duration = q.at("probe_duration_s").get<double>();
  seq.probe_rise_time = q.at("probe_rise_time_s").get<double>();
  seq.retrieval_window = q.at("retrieval_window_s").get<double>();
  seq.sample_step = q.at("sample_step_s").get<double>();
  seq.validate();
  const json& t = c.request.at("storage_times_s");
  const std::vector<double> times = t.is_string() ? default_storage_times(m.cell) : expand_range(t);
  const LifetimeScan scan = lifetime_scan(atom, m.cell, m.coupling, m.probe, seq, times);

  std::vector<double> col_ts, col_t, col_sig;
  for (std::size_t k = 0; k < scan.retrievals.size(); ++k)
    for (std::size_t i = 0; i < scan.retrievals[k].times.size(); ++i) {
      col_ts.push_back(times[k]);
      col_t.push_back(scan.retrievals[k].times[i]);
      col_sig.push_back(scan.retrievals[k].signal[i]);
    }

  auto names = trajectory_columns();
  names.insert(names.begin(), "storage_time_s");
  std::vector<std::vector<double>> traj(names.size());
  for (std::size_t k = 0; k < scan.retrievals.size(); ++k) {
    const Trajectory& tr = scan.retrievals[k].trajectory;
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
      const auto row = trajectory_row(tr.times[i], tr.states[i]);
      traj[0].push_back(times[k]);
      for (std::size_t m = 0; m < row.size(); ++m) traj[m + 1].push_back(row[m]);
    }
  }

  json side = sidecar_base(c);
  side["fit"] = fit_report(scan.fit);
  side["tau_s"] = scan.tau();
  side["predicted_tau_s"] = num(scan.predicted);
  c.out << "storage: fitted tau " << format_double(scan.tau()) << " s, predicted "
        << format_double(scan.predicted) << " s\n";
  return {{"storage.csv", lifetime_csv(scan)},
          {"retrieval.csv", to_csv({"storage_time_s", "t_s", "signal"}, {col_ts, col_t, col_sig})},
          {"trajectory.csv", to_csv(names, traj)},
          {"storage.json", dump(side)}};
}

std::string verified_input(const json& ref) {
  const std::string path = ref.at("path").get<std::string>();
  const std::string bytes = read_file(path);
  if (sha256_hex(bytes) != ref.at("sha256").get<std::string>())
    throw InputError("input '" + path + "' changed since the manifest was written (sha256 mismatch)");
  return bytes;
}

// Two numeric columns; '#' comments and one optional header line allowed.
void parse_xy(const std::string& text, const std::string& source, std::vector<double>& x,
              std::vector<double>& y) {
  std::stringstream ss(text);
  std::string line;
  std::size_t n = 0;
  bool header_allowed = true;
  while (std::getline(ss, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError(source + ": expected 'x,y'", n);
    try {
      const double xv = parse_double(std::string_view(line).substr(0, comma));
      const double yv = parse_double(std::string_view(line).substr(comma + 1));
      x.push_back(xv);
      y.push_back(yv);
    } catch (const InputError&) {
      if (!header_allowed) throw ParseError(source + ": non-numeric row", n);
    }
    header_allowed = false;
  }
}

std::vector<Artifact> cmd_fit(const Context& c) {
  const ModelShape shape = model_shape_from_string(c.request.at("shape").get<std::string>());
  const json& data = c.request.at("data");
  std::vector<double> x, y;
  parse_xy(verified_input(data), data.at("path").get<std::string>(), x, y);
  std::optional<std::vector<double>> init;
  if (c.request.contains("init")) init = c.request.at("init").get<std::vector<double>>();
  FitOptions opt;
  opt.bootstrap = c.request.at("bootstrap").get<int>();
  opt.seed = c.request.at("seed").get<std::uint64_t>();
  const FitResult r = fit_curve(shape, x, y, init, opt);

  std::vector<double> model = eval_model(shape, r.params, x);
  std::vector<double> resid(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) resid[i] = y[i] - model[i];
  json side = sidecar_base(c);
  side["fit"] = fit_report(r);
  c.out << "fit " << to_string(shape) << (r.converged ? " converged" : " did NOT converge")
        << " in " << r.iterations << " iterations\n";
  const auto names = parameter_names(shape);
  for (std::size_t k = 0; k < names.size(); ++k)
    c.out << "  " << names[k] << " = " << format_double(r.params[k]) << " +/- "
          << format_double(r.sigmas[k]) << "\n";
  return {{"fit.csv", to_csv({"x", "y", "model", "residual"}, {x, y, model, resid})},
          {"fit.json", dump(side)}};
}

std::vector<Artifact> cmd_analyze(const Context& c) {
  auto load = [&](const char* key, TraceRole role) {
    const json& ref = c.request.at(key);
    return parse_traces(verified_input(ref), role, ref.at("path").get<std::string>());
  };
  const TraceSet sig = load("signal", TraceRole::signal);
  const TraceSet ref = load("reference", TraceRole::reference);
  const TraceSet bg = load("background", TraceRole::background);
  if (sig.x_unit != ref.x_unit || sig.x_unit != bg.x_unit)
    throw GridMismatchError("analyze: I, I0 and B traces use different x units");
  const Trace od = beer_lambert_od(average_traces(sig), average_traces(ref), average_traces(bg));

  json side = sidecar_base(c);
  side["traces"] = {{"I", sig.size()}, {"I0", ref.size()}, {"B", bg.size()}};
  side["x_unit"] = sig.x_unit;
  side["od_max"] = *std::max_element(od.value.begin(), od.value.end());
  if (c.request.contains("temperature_k"))
    side["od_estimate"] = od_estimate(c.request.at("temperature_k").get<double>(),
                                      c.request.at("length_m").get<double>());
  const std::string x_col = sig.x_unit == "Hz" ? "delta_p_hz" : "t_s";
  c.out << "analyze: averaged " << sig.size() << " I, " << ref.size() << " I0, " << bg.size()
        << " B traces; peak OD " << format_double(side["od_max"].get<double>()) << "\n";
  return {{"od.csv", to_csv({x_col, "od"}, {od.x, od.value})}, {"analyze.json", dump(side)}};
}

void execute(const json& request, const json& presets, const json& inputs, const fs::path& out_dir,
             std::ostream& out) {
  static const std::map<std::string, std::function<std::vector<Artifact>(const Context&)>> table{
      {"spectrum", cmd_spectrum},   {"series", cmd_series},     {"linewidth-scan", cmd_linewidth},
      {"broadening", cmd_broadening}, {"storage", cmd_storage}, {"fit", cmd_fit},
      {"analyze", cmd_analyze}};
  const std::string sub = request.at("subcommand").get<std::string>();
  const auto it = table.find(sub);
  if (it == table.end()) throw InputError("unknown subcommand '" + sub + "' in request");

  const Context ctx{request, request_fingerprint(request), out};
  const std::vector<Artifact> artifacts = it->second(ctx);

  std::vector<OutputRecord> records;
  for (const auto& a : artifacts) {
    write_file(out_dir / a.file, a.content);
    records.push_back({a.file, sha256_hex(a.content)});
  }
  write_file(out_dir / "manifest.json", dump(make_manifest(request, presets, inputs, records)));
  out << "wrote " << artifacts.size() << " artifacts and manifest.json to " << out_dir.string()
      << "\n";
}

std::string summarize(const Options& o, const std::string& sub) {
  std::ostringstream os;
  os << "subcommand " << sub;
  if (sub == "fit") {
    os << ", shape " << o.shape << ", data " << o.data;
  } else if (sub == "analyze") {
    os << ", traces " << (o.traces.empty() ? o.signal : o.traces);
  } else if (sub == "run") {
    os << ", manifest " << o.manifest;
  } else {
    os << ", cell " << o.cell << ", model " << o.model;
    if (sub != "broadening" && sub != "linewidth-scan")
      os << ", coupling intensity " << format_double(o.coupling_intensity) << " W/m^2";
    if (sub == "spectrum" || sub == "storage") os << ", delta-c " << o.delta_c << " Hz";
    if (sub == "series") os << ", delta-c " << o.series_delta_c << " Hz";
  }
  return os.str();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  App a = build_app(o);
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    a.app->parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return a.app->exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return a.app->exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return a.app->exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    CLI::App* target = a.app.get();
    for (auto* s : a.app->get_subcommands()) target = s;
    err << target->help();
    return kExitInput;
  }

  std::string sub;
  for (const auto& [name, s] : a.subs)
    if (s->parsed()) sub = name;

  try {
    if (sub == "run") {
      const json m = json::parse(read_file(o.manifest));
      if (m.value("tool", "") != "eitmem") throw InputError("'" + o.manifest + "' is not an eitmem manifest");
      execute(m.at("request"), m.value("presets", json::object()), m.value("inputs", json::array()),
              o.out, out);
    } else {
      const Resolution r = resolve(sub, o);
      execute(r.request, r.presets, r.inputs, o.out, out);
    }
    return kExitOk;
  } catch (const InputError& e) {
    err << "input error: " << e.what() << "\n  (" << summarize(o, sub) << ")\n";
    return kExitInput;
  } catch (const json::exception& e) {
    err << "input error: malformed JSON: " << e.what() << "\n  (" << summarize(o, sub) << ")\n";
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const SolverError& e) {
    err << "solver error: " << e.what() << "\n  (" << summarize(o, sub) << ")\n";
    return kExitSolver;
  }
}

std::vector<std::string> subcommand_names() {
  return {"spectrum", "series", "linewidth-scan", "broadening", "storage", "fit", "analyze", "run"};
}

std::vector<std::string> accepted_flags(const std::string& subcommand) {
  Options o;
  App a = build_app(o);
  const auto it = a.subs.find(subcommand);
  if (it == a.subs.end()) throw InputError("unknown subcommand '" + subcommand + "'");
  std::vector<std::string> flags;
  for (const CLI::Option* opt : it->second->get_options()) {
    for (const auto& l : opt->get_lnames()) flags.push_back("--" + l);
    for (const auto& s : opt->get_snames()) flags.push_back("-" + s);
  }
  return flags;
}

}  // namespace eitmem
