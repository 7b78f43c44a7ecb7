#pragma once

// Damped Gauss-Newton (Levenberg-Marquardt) least squares over five fixed
// model shapes.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace eitmem {

/// Parameter order per shape:
///   lorentzian_dip  baseline, depth, center, fwhm
///   cusp            amplitude, width, center       A·exp(−|x−x0|/w)
///   linear          slope, intercept
///   saturation      scale, a                       s·x/(a+x)
///   exp_decay       amplitude, tau                 A·exp(−x/τ)
enum class ModelShape { lorentzian_dip, cusp, linear, saturation, exp_decay };

std::string_view to_string(ModelShape s);
ModelShape model_shape_from_string(std::string_view s);
std::vector<std::string> parameter_names(ModelShape s);
std::size_t parameter_count(ModelShape s);

/// Throws DomainError on wrong arity, non-finite values or non-positive
/// widths, τ or a.
void check_params(ModelShape s, std::span<const double> params);

double eval_model(ModelShape s, std::span<const double> params, double x);
std::vector<double> eval_model(ModelShape s, std::span<const double> params,
                               std::span<const double> x);

struct FitOptions {
  int max_iterations = 200;
  double step_tolerance = 1e-8;   // ‖δ‖ / ‖p‖
  double cost_tolerance = 1e-10;  // |ΔS| / S
  /// Residual-bootstrap resamples for a cross-check of σ; 0 disables.
  int bootstrap = 0;
  std::uint64_t seed = 1;
};

struct FitResult {
  ModelShape shape = ModelShape::linear;
  std::vector<double> params;
  /// Curvature-based 1σ; +inf where the curvature is singular.
  std::vector<double> sigmas;
  std::vector<double> bootstrap_sigmas;  // empty unless requested
  double rms = 0.0;                      // residual RMS
  bool converged = false;
  int iterations = 0;
  /// Cost ½Σr² after the initial guess and after each accepted step.
  std::vector<double> cost_history;
};

/// Per-shape starting point: extremum location for centers, half the grid
/// span for widths, the 1/e crossing for τ, closed-form for the line.
std::vector<double> auto_init(ModelShape s, std::span<const double> x, std::span<const double> y);

/// Needs at least 2× as many samples as parameters. Non-convergence returns
/// a result with converged = false. A degenerate parameter throws
/// SingularFitError naming it.
FitResult fit_curve(ModelShape s, std::span<const double> x, std::span<const double> y,
                    std::optional<std::vector<double>> init = std::nullopt,
                    const FitOptions& options = {});

/// σ_i = √((JᵀJ)⁻¹_ii · RSS/(n − p)) at the result's parameters.
std::vector<double> fit_uncertainty(const FitResult& result, std::span<const double> x,
                                    std::span<const double> y);

/// Standard deviation of refitted parameters over residual resamples.
std::vector<double> bootstrap_uncertainty(const FitResult& result, std::span<const double> x,
                                          std::span<const double> y, int resamples,
                                          std::uint64_t seed);

/// {shape, params, sigmas, rms, iterations, converged, ...}.
nlohmann::json fit_report(const FitResult& result);

}  // namespace eitmem
