#include "eitmem/fits.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

#include <Eigen/Dense>

#include "eitmem/errors.hpp"

namespace eitmem {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

// Index of the strictly positive parameter, if the shape has one.
std::optional<std::size_t> positive_index(ModelShape s) {
  switch (s) {
    case ModelShape::lorentzian_dip: return 3;
    case ModelShape::cusp: return 1;
    case ModelShape::saturation: return 1;
    case ModelShape::exp_decay: return 1;
    case ModelShape::linear: return std::nullopt;
  }
  return std::nullopt;
}

bool params_valid(ModelShape s, std::span<const double> p) {
  if (p.size() != parameter_count(s)) return false;
  for (double v : p)
    if (!std::isfinite(v)) return false;
  if (auto k = positive_index(s); k && !(p[*k] > 0.0)) return false;
  return true;
}

double evaluate(ModelShape s, std::span<const double> p, double x) {
  switch (s) {
    case ModelShape::lorentzian_dip: {
      const double u = x - p[2];
      const double h = 0.5 * p[3];
      return p[0] - p[1] * h * h / (u * u + h * h);
    }
    case ModelShape::cusp: return p[0] * std::exp(-std::abs(x - p[2]) / p[1]);
    case ModelShape::linear: return p[0] * x + p[1];
    case ModelShape::saturation: return p[0] * x / (p[1] + x);
    case ModelShape::exp_decay: return p[0] * std::exp(-x / p[1]);
  }
  return 0.0;
}

// Row of ∂f/∂p at x.
void gradient(ModelShape s, std::span<const double> p, double x, double* g) {
  switch (s) {
    case ModelShape::lorentzian_dip: {
      const double u = x - p[2];
      const double h = 0.5 * p[3];
      const double den = u * u + h * h;
      const double l = h * h / den;
      g[0] = 1.0;
      g[1] = -l;
      g[2] = -p[1] * 2.0 * u * h * h / (den * den);
      g[3] = -p[1] * 0.5 * (2.0 * h * u * u / (den * den));
      return;
    }
    case ModelShape::cusp: {
      const double u = x - p[2];
      const double e = std::exp(-std::abs(u) / p[1]);
      const double sign = u > 0.0 ? 1.0 : (u < 0.0 ? -1.0 : 0.0);
      g[0] = e;
      g[1] = p[0] * e * std::abs(u) / (p[1] * p[1]);
      g[2] = p[0] * e * sign / p[1];
      return;
    }
    case ModelShape::linear:
      g[0] = x;
      g[1] = 1.0;
      return;
    case ModelShape::saturation: {
      const double d = p[1] + x;
      g[0] = x / d;
      g[1] = -p[0] * x / (d * d);
      return;
    }
    case ModelShape::exp_decay: {
      const double e = std::exp(-x / p[1]);
      g[0] = e;
      g[1] = p[0] * e * x / (p[1] * p[1]);
      return;
    }
  }
}

MatrixXd jacobian(ModelShape s, std::span<const double> p, std::span<const double> x) {
  MatrixXd j(static_cast<Eigen::Index>(x.size()), static_cast<Eigen::Index>(p.size()));
  std::vector<double> row(p.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    gradient(s, p, x[i], row.data());
    for (std::size_t k = 0; k < p.size(); ++k)
      j(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = row[k];
  }
  return j;
}

VectorXd residuals(ModelShape s, std::span<const double> p, std::span<const double> x,
                   std::span<const double> y) {
  VectorXd r(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i)
    r(static_cast<Eigen::Index>(i)) = y[i] - evaluate(s, p, x[i]);
  return r;
}

VectorXd to_eigen(std::span<const double> v) {
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Throws SingularFitError naming a parameter the data cannot determine.
void check_identifiable(ModelShape s, const MatrixXd& j) {
  const auto names = parameter_names(s);
  VectorXd norms = j.colwise().norm();
  for (Eigen::Index k = 0; k < j.cols(); ++k)
    if (!(norms(k) > 0.0) || !std::isfinite(norms(k)))
      throw SingularFitError("singular normal matrix: data do not constrain parameter '" +
                                 names[static_cast<std::size_t>(k)] + "'",
                             names[static_cast<std::size_t>(k)]);
  MatrixXd scaled = j * norms.cwiseInverse().asDiagonal();
  Eigen::ColPivHouseholderQR<MatrixXd> qr(scaled);
  qr.setThreshold(1e-12);
  if (qr.rank() < j.cols()) {
    const auto k = static_cast<std::size_t>(qr.colsPermutation().indices()(j.cols() - 1));
    throw SingularFitError("singular normal matrix: parameter '" + names[k] +
                               "' is degenerate with the others",
                           names[k]);
  }
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::string_view to_string(ModelShape s) {
  switch (s) {
    case ModelShape::lorentzian_dip: return "lorentzian-dip";
    case ModelShape::cusp: return "cusp";
    case ModelShape::linear: return "linear";
    case ModelShape::saturation: return "saturation";
    case ModelShape::exp_decay: return "exp-decay";
  }
  return "?";
}

ModelShape model_shape_from_string(std::string_view s) {
  for (auto m : {ModelShape::lorentzian_dip, ModelShape::cusp, ModelShape::linear,
                 ModelShape::saturation, ModelShape::exp_decay})
    if (to_string(m) == s) return m;
  throw DomainError("unknown model shape '" + std::string(s) +
                    "' (expected lorentzian-dip, cusp, linear, saturation or exp-decay)");
}

std::vector<std::string> parameter_names(ModelShape s) {
  switch (s) {
    case ModelShape::lorentzian_dip: return {"baseline", "depth", "center", "fwhm"};
    case ModelShape::cusp: return {"amplitude", "width", "center"};
    case ModelShape::linear: return {"slope", "intercept"};
    case ModelShape::saturation: return {"scale", "a"};
    case ModelShape::exp_decay: return {"amplitude", "tau"};
  }
  return {};
}

std::size_t parameter_count(ModelShape s) { return parameter_names(s).size(); }

void check_params(ModelShape s, std::span<const double> params) {
  if (params.size() != parameter_count(s))
    throw DomainError(std::string(to_string(s)) + " takes " +
                      std::to_string(parameter_count(s)) + " parameters");
  for (double v : params)
    if (!std::isfinite(v)) throw DomainError("non-finite model parameter");
  if (auto k = positive_index(s); k && !(params[*k] > 0.0))
    throw DomainError(std::string(to_string(s)) + ": parameter '" + parameter_names(s)[*k] +
                      "' must be > 0");
}

double eval_model(ModelShape s, std::span<const double> params, double x) {
  check_params(s, params);
  return evaluate(s, params, x);
}

std::vector<double> eval_model(ModelShape s, std::span<const double> params,
                               std::span<const double> x) {
  check_params(s, params);
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = evaluate(s, params, x[i]);
  return y;
}

std::vector<double> auto_init(ModelShape s, std::span<const double> x,
                              std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("auto_init: need matching x, y");
  const auto [xmin_it, xmax_it] = std::minmax_element(x.begin(), x.end());
  const double span = *xmax_it - *xmin_it;
  const auto imin = static_cast<std::size_t>(std::min_element(y.begin(), y.end()) - y.begin());
  const auto imax = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());

  switch (s) {
    case ModelShape::lorentzian_dip: {
      const double baseline = 0.5 * (y.front() + y.back());
      return {baseline, baseline - y[imin], x[imin], 0.5 * span};
    }
    case ModelShape::cusp: {
      const std::size_t k = std::abs(y[imax]) >= std::abs(y[imin]) ? imax : imin;
      return {y[k], 0.5 * span, x[k]};
    }
    case ModelShape::linear: {
      const double n = static_cast<double>(x.size());
      const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
      const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
      double sxy = 0.0, sxx = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
      }
      const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
      return {slope, my - slope * mx};
    }
    case ModelShape::saturation: {
      // a starts at the x where y first reaches half its maximum.
      const double half = 0.5 * y[imax];
      double a = median_of({x.begin(), x.end()});
      for (std::size_t i = 0; i < x.size(); ++i)
        if (y[i] >= half) {
          a = x[i];
          break;
        }
      a = std::max(a, 1e-3 * std::max(std::abs(*xmax_it), 1e-300));
      return {2.0 * half * (a + x[imax]) / std::max(x[imax], 1e-300), a};
    }
    case ModelShape::exp_decay: {
      const auto i0 = static_cast<std::size_t>(xmin_it - x.begin());
      const double amp = y[i0];
      const double target = amp / std::numbers::e;
      double tau = span;
      for (std::size_t i = 1; i < x.size(); ++i)
        if ((y[i] - target) * (y[i - 1] - target) <= 0.0 && y[i] != y[i - 1]) {
          const double t = x[i - 1] + (target - y[i - 1]) * (x[i] - x[i - 1]) / (y[i] - y[i - 1]);
          if (t - *xmin_it > 0.0) tau = t - *xmin_it;
          break;
        }
      return {amp * std::exp(*xmin_it / tau), tau};
    }
  }
  return {};
}

FitResult fit_curve(ModelShape s, std::span<const double> x, std::span<const double> y,
                    std::optional<std::vector<double>> init, const FitOptions& options) {
  const std::size_t np = parameter_count(s);
  if (x.size() != y.size()) throw DomainError("fit_curve: x and y lengths differ");
  if (x.size() < 2 * np)
    throw DomainError("fit_curve: " + std::string(to_string(s)) + " needs at least " +
                      std::to_string(2 * np) + " samples");
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!std::isfinite(x[i]) || !std::isfinite(y[i]))
      throw DomainError("fit_curve: non-finite sample at index " + std::to_string(i));

  std::vector<double> p = init ? *init : auto_init(s, x, y);
  check_params(s, p);

  FitResult out;
  out.shape = s;

  VectorXd r = residuals(s, p, x, y);
  double cost = 0.5 * r.squaredNorm();
  out.cost_history.push_back(cost);
  const double scale = 0.5 * to_eigen(y).squaredNorm();
  const double tiny = 1e-30 * std::max(scale, 1e-300);

  double lambda = 1e-3;
  bool converged = cost <= tiny;
  int it = 0;
  while (!converged && it < options.max_iterations) {
    ++it;
    const MatrixXd j = jacobian(s, p, x);
    check_identifiable(s, j);
    const MatrixXd a = j.transpose() * j;
    const VectorXd g = j.transpose() * r;
    const VectorXd d = a.diagonal();

    bool accepted = false;
    while (lambda < 1e20) {
      MatrixXd damped = a;
      damped.diagonal() += lambda * d;
      const VectorXd delta = damped.ldlt().solve(g);
      std::vector<double> trial = p;
      for (std::size_t k = 0; k < np; ++k) trial[k] += delta(static_cast<Eigen::Index>(k));
      if (!params_valid(s, trial) || !delta.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      const VectorXd rt = residuals(s, trial, x, y);
      const double ct = 0.5 * rt.squaredNorm();
      if (!(ct <= cost)) {
        lambda *= 10.0;
        continue;
      }
      const double step = delta.norm() / (to_eigen(p).norm() + 1e-300);
      const double change = (cost - ct) / std::max(cost, 1e-300);
      p = std::move(trial);
      r = rt;
      cost = ct;
      out.cost_history.push_back(cost);
      lambda = std::max(lambda / 10.0, 1e-12);
      accepted = true;
      converged = step < options.step_tolerance || change < options.cost_tolerance || cost <= tiny;
      break;
    }
    if (!accepted) {
      // No downhill step at any damping: already at the minimum to working
      // precision if the gradient is negligible.
      converged = g.norm() <= 1e-10 * (j.norm() * r.norm() + 1e-300);
      break;
    }
  }

  // Undamped polish, kept only while it lowers the cost.
  if (converged) {
    for (int k = 0; k < 3 && cost > tiny; ++k) {
      const MatrixXd j = jacobian(s, p, x);
      const VectorXd delta = (j.transpose() * j).ldlt().solve(j.transpose() * r);
      std::vector<double> trial = p;
      for (std::size_t m = 0; m < np; ++m) trial[m] += delta(static_cast<Eigen::Index>(m));
      if (!params_valid(s, trial)) break;
      const VectorXd rt = residuals(s, trial, x, y);
      const double ct = 0.5 * rt.squaredNorm();
      if (!(ct < cost)) break;
      p = std::move(trial);
      r = rt;
      cost = ct;
      out.cost_history.push_back(cost);
    }
  }

  out.params = p;
  out.iterations = it;
  out.converged = converged;
  out.rms = std::sqrt(2.0 * cost / static_cast<double>(x.size()));
  out.sigmas = fit_uncertainty(out, x, y);
  if (options.bootstrap > 0 && converged)
    out.bootstrap_sigmas = bootstrap_uncertainty(out, x, y, options.bootstrap, options.seed);
  return out;
}

std::vector<double> fit_uncertainty(const FitResult& result, std::span<const double> x,
                                    std::span<const double> y) {
  const std::size_t np = result.params.size();
  std::vector<double> sig(np, kInf);
  if (x.size() <= np) return sig;
  const MatrixXd j = jacobian(result.shape, result.params, x);
  // Unit-norm columns keep the rank test independent of parameter units.
  const VectorXd norms = j.colwise().norm();
  if (!(norms.minCoeff() > 0.0) || !norms.allFinite()) return sig;
  const VectorXd inv = norms.cwiseInverse();
  const MatrixXd js = j * inv.asDiagonal();
  Eigen::FullPivLU<MatrixXd> lu(js.transpose() * js);
  lu.setThreshold(1e-14);
  if (!lu.isInvertible()) return sig;
  const MatrixXd cov = inv.asDiagonal() * lu.inverse() * inv.asDiagonal();
  const double rss = residuals(result.shape, result.params, x, y).squaredNorm();
  const double var = rss / static_cast<double>(x.size() - np);
  for (std::size_t k = 0; k < np; ++k) {
    const double c = cov(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    sig[k] = c >= 0.0 ? std::sqrt(c * var) : kInf;
  }
  return sig;
}

std::vector<double> bootstrap_uncertainty(const FitResult& result, std::span<const double> x,
                                          std::span<const double> y, int resamples,
                                          std::uint64_t seed) {
  const std::size_t np = result.params.size();
  const std::vector<double> fitted = eval_model(result.shape, result.params, x);
  std::vector<double> res(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) res[i] = y[i] - fitted[i];

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
  std::vector<double> mean(np, 0.0), m2(np, 0.0);
  int n = 0;
  std::vector<double> yb(x.size());
  for (int b = 0; b < resamples; ++b) {
    for (std::size_t i = 0; i < x.size(); ++i) yb[i] = fitted[i] + res[pick(rng)];
    FitResult f;
    try {
      f = fit_curve(result.shape, x, yb, result.params);
    } catch (const SolverError&) {
      continue;
    }
    if (!f.converged) continue;
    ++n;
    for (std::size_t k = 0; k < np; ++k) {
      const double d = f.params[k] - mean[k];
      mean[k] += d / n;
      m2[k] += d * (f.params[k] - mean[k]);
    }
  }
  std::vector<double> sig(np, kInf);
  if (n > 1)
    for (std::size_t k = 0; k < np; ++k) sig[k] = std::sqrt(m2[k] / (n - 1));
  return sig;
}

nlohmann::json fit_report(const FitResult& result) {
  nlohmann::json params = nlohmann::json::object();
  nlohmann::json sigmas = nlohmann::json::object();
  const auto names = parameter_names(result.shape);
  auto num = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return "inf";
  };
  for (std::size_t k = 0; k < names.size() && k < result.params.size(); ++k) {
    params[names[k]] = result.params[k];
    sigmas[names[k]] = num(result.sigmas[k]);
  }
  nlohmann::json j = {{"shape", std::string(to_string(result.shape))},
                      {"params", params},
                      {"sigmas", sigmas},
                      {"sigma_estimator", "curvature"},
                      {"rms", result.rms},
                      {"iterations", result.iterations},
                      {"converged", result.converged}};
  if (!result.bootstrap_sigmas.empty()) {
    nlohmann::json b = nlohmann::json::object();
    for (std::size_t k = 0; k < names.size(); ++k) b[names[k]] = num(result.bootstrap_sigmas[k]);
    j["bootstrap_sigmas"] = b;
  }
  return j;
}

}  // namespace eitmem
