#include "magictrap/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "magictrap/constants.hpp"
#include "magictrap/errors.hpp"
#include "magictrap/lsq.hpp"
#include "magictrap/magic_solver.hpp"

namespace magictrap {

double FitResult::value(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return values[i];
  }
  throw std::out_of_range("FitResult: no parameter '" + std::string(name) + "'");
}

double FitResult::sigma(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return sigmas[i];
  }
  throw std::out_of_range("FitResult: no parameter '" + std::string(name) + "'");
}

namespace {

// All-zero errors mean unit weights. Zero entries among positive ones (for
// example the exact t = 0 point of a simulated curve) take the smallest
// positive error.
std::vector<double> sigmas_from_errors(std::span<const double> errors, std::string_view what) {
  double min_pos = std::numeric_limits<double>::infinity();
  for (double e : errors) {
    if (!(e >= 0.0) || !std::isfinite(e)) {
      throw std::invalid_argument(std::string(what) + ": errors must be finite and >= 0");
    }
    if (e > 0.0) min_pos = std::min(min_pos, e);
  }
  if (!std::isfinite(min_pos)) return std::vector<double>(errors.size(), 1.0);
  std::vector<double> out(errors.begin(), errors.end());
  for (double& e : out) {
    if (e == 0.0) e = min_pos;
  }
  return out;
}

FitResult to_fit_result(std::vector<std::string> names, const lsq::Solution& sol, std::size_t n_points) {
  FitResult fit;
  fit.names = std::move(names);
  const auto np = static_cast<std::size_t>(sol.x.size());
  fit.values.assign(sol.x.data(), sol.x.data() + np);
  fit.chi2 = sol.chi2;
  fit.dof = static_cast<int>(n_points) - static_cast<int>(np);
  const double scale = fit.dof > 0 ? fit.chi2 / fit.dof : 1.0;
  fit.covariance = sol.covariance * scale;
  fit.covariance = 0.5 * (fit.covariance + fit.covariance.transpose());
  for (std::size_t i = 0; i < np; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    fit.sigmas.push_back(std::sqrt(std::max(0.0, fit.covariance(k, k))));
  }
  fit.residual_norm = std::sqrt(fit.chi2 / static_cast<double>(n_points));
  fit.converged = sol.converged;
  fit.iterations = sol.iterations;
  return fit;
}

double wrap_phase(double phi) {
  phi = std::remainder(phi, constants::kTwoPi);
  if (phi <= -constants::kPi) phi += constants::kTwoPi;
  return phi;
}

}  // namespace

FitResult fit_betas(std::span<const DlsCurve> curves, double polarization) {
  if (!(polarization > 0.0 && polarization <= 1.0)) {
    throw std::invalid_argument("fit_betas: polarization must lie in (0, 1]");
  }
  std::set<double> fields;
  std::vector<double> u, b, y, err;
  for (const auto& curve : curves) {
    fields.insert(curve.b_field);
    for (const auto& pt : curve.points) {
      u.push_back(pt.intensity);
      b.push_back(curve.b_field);
      y.push_back(pt.shift);
      err.push_back(pt.shift_err);
    }
  }
  if (fields.size() < 2) {
    throw RankDeficiencyError("fit_betas: beta1 and beta2 are degenerate at a single bias field");
  }
  if (y.size() < 4) throw std::invalid_argument("fit_betas: need at least 4 points");
  const auto sigma = sigmas_from_errors(err, "fit_betas");
  const std::size_t n = y.size();
  const double a = polarization;

  const lsq::Model model = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd& j) {
    r.resize(static_cast<Eigen::Index>(n));
    j.resize(static_cast<Eigen::Index>(n), 3);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      const double d1 = u[i];
      const double d2 = a * b[i] * u[i];
      const double d4 = a * a * u[i] * u[i];
      r(row) = (x(0) * d1 + x(1) * d2 + x(2) * d4 - y[i]) / sigma[i];
      j(row, 0) = d1 / sigma[i];
      j(row, 1) = d2 / sigma[i];
      j(row, 2) = d4 / sigma[i];
    }
    return true;
  };
  const auto sol = lsq::levenberg_marquardt(model, Eigen::Vector3d::Zero(),
                                            Eigen::Vector3d(1e-4, 1e-4, 1e-11));
  if (sol.rank < 3) throw RankDeficiencyError("fit_betas: design matrix is rank deficient");
  if (!sol.converged) throw NonConvergenceError("fit_betas: did not converge");
  return to_fit_result({"beta1", "beta2", "beta4"}, sol, n);
}

FitResult fit_magic_point(const DlsCurve& curve) {
  const std::size_t n = curve.points.size();
  if (n < 3) throw std::invalid_argument("fit_magic_point: need at least 3 points");
  std::vector<double> err;
  double u_scale = 0.0;
  double u_min = std::numeric_limits<double>::infinity();
  double u_max = -u_min;
  for (const auto& pt : curve.points) {
    err.push_back(pt.shift_err);
    u_scale = std::max(u_scale, std::abs(pt.intensity));
    u_min = std::min(u_min, pt.intensity);
    u_max = std::max(u_max, pt.intensity);
  }
  if (!(u_max > u_min)) throw RankDeficiencyError("fit_magic_point: intensities are all equal");
  const auto sigma = sigmas_from_errors(err, "fit_magic_point");

  // Weighted linear least squares in the scaled intensity v = U / u_scale.
  Eigen::MatrixXd design(static_cast<Eigen::Index>(n), 3);
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const double v = curve.points[i].intensity / u_scale;
    design(row, 0) = v * v / sigma[i];
    design(row, 1) = v / sigma[i];
    design(row, 2) = 1.0 / sigma[i];
    rhs(row) = curve.points[i].shift / sigma[i];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < 3) throw RankDeficiencyError("fit_magic_point: need 3 distinct intensities");
  const Eigen::Vector3d coef = qr.solve(rhs);
  const double chi2 = (design * coef - rhs).squaredNorm();
  const int dof = static_cast<int>(n) - 3;
  const Eigen::Matrix3d normal = design.transpose() * design;
  Eigen::Matrix3d cov = normal.inverse();
  if (dof > 0) cov *= chi2 / dof;

  const double as = coef(0);
  const double bs = coef(1);
  const double cs = coef(2);
  if (!(as > 0.0)) throw DegenerateDataError("fit_magic_point: parabola opens downward, no minimum");

  const double um = -u_scale * bs / (2.0 * as);
  const double curvature = as / (u_scale * u_scale);
  const double vertex = cs - bs * bs / (4.0 * as);

  Eigen::Matrix3d grad;
  grad << u_scale * bs / (2.0 * as * as), -u_scale / (2.0 * as), 0.0,
      1.0 / (u_scale * u_scale), 0.0, 0.0,
      bs * bs / (4.0 * as * as), -bs / (2.0 * as), 1.0;

  FitResult fit;
  fit.names = {"magic_intensity_hz", "curvature_per_hz", "vertex_shift_hz"};
  fit.values = {um, curvature, vertex};
  fit.covariance = grad * cov * grad.transpose();
  for (int i = 0; i < 3; ++i) fit.sigmas.push_back(std::sqrt(std::max(0.0, fit.covariance(i, i))));
  fit.chi2 = chi2;
  fit.dof = dof;
  fit.residual_norm = std::sqrt(chi2 / static_cast<double>(n));
  fit.converged = true;
  fit.iterations = 1;
  if (um < u_min || um > u_max) {
    fit.warnings.push_back("extrapolated: vertex lies outside the sampled intensity range");
  } else {
    const bool below = std::any_of(curve.points.begin(), curve.points.end(),
                                   [&](const DlsPoint& p) { return p.intensity < um; });
    const bool above = std::any_of(curve.points.begin(), curve.points.end(),
                                   [&](const DlsPoint& p) { return p.intensity > um; });
    if (!below || !above) fit.warnings.push_back("vertex is not bracketed by data on both sides");
  }
  return fit;
}

FitResult calibrate_polarization(const DlsCurve& curve, const SpeciesParams& params) {
  const std::size_t n = curve.points.size();
  if (n < 2) throw std::invalid_argument("calibrate_polarization: need at least 2 points");
  std::vector<double> err;
  for (const auto& pt : curve.points) err.push_back(pt.shift_err);
  const auto sigma = sigmas_from_errors(err, "calibrate_polarization");
  const double bf = curve.b_field;

  auto chi2_at = [&](double a) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = (dls_shift(params, {bf, curve.points[i].intensity, a}) - curve.points[i].shift) / sigma[i];
      s += r * r;
    }
    return s;
  };

  // The model is quadratic in A, so a coarse scan locates the global basin.
  double best_a = 1.0;
  double best_chi2 = std::numeric_limits<double>::infinity();
  for (int k = -1200; k <= 1200; ++k) {
    const double a = k * 1e-3;
    const double c = chi2_at(a);
    if (c < best_chi2) {
      best_chi2 = c;
      best_a = a;
    }
  }

  const lsq::Model model = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd& j) {
    r.resize(static_cast<Eigen::Index>(n));
    j.resize(static_cast<Eigen::Index>(n), 1);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      const TrapPoint pt{bf, curve.points[i].intensity, x(0)};
      r(row) = (dls_shift(params, pt) - curve.points[i].shift) / sigma[i];
      j(row, 0) = polarization_sensitivity(params, pt) / sigma[i];
    }
    return true;
  };
  const auto sol = lsq::levenberg_marquardt(model, Eigen::VectorXd::Constant(1, best_a),
                                            Eigen::VectorXd::Constant(1, 0.1));
  if (!sol.converged) throw NonConvergenceError("calibrate_polarization: did not converge");
  if (sol.rank < 1) throw RankDeficiencyError("calibrate_polarization: polarization not resolvable");
  auto fit = to_fit_result({"polarization"}, sol, n);
  double& a = fit.values[0];
  constexpr double kSlack = 1e-9;
  if (a > 1.0 && a <= 1.0 + kSlack) a = 1.0;
  if (!(a > 0.0 && a <= 1.0)) {
    throw NumericalError("calibrate_polarization: best-fit polarization " + std::to_string(a) +
                         " lies outside (0, 1]");
  }
  return fit;
}

double ramsey_population(double t, double tau, double stretch, double detuning, double phase) {
  const double u = t / tau;
  const double envelope = u > 0.0 ? std::exp(-std::pow(u, stretch)) : 1.0;
  return 0.5 * (1.0 + envelope * std::cos(constants::kTwoPi * detuning * t + phase));
}

FitResult fit_ramsey_fringe(const RamseyTrace& trace, double detuning_guess) {
  const std::size_t n = trace.times.size();
  if (n < 5 || trace.population.size() != n || trace.population_err.size() != n) {
    throw std::invalid_argument("fit_ramsey_fringe: need >= 5 samples with matching columns");
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (!(trace.times[i] > trace.times[i - 1])) {
      throw std::invalid_argument("fit_ramsey_fringe: times must be strictly increasing");
    }
  }
  if (!(detuning_guess > 0.0)) throw std::invalid_argument("fit_ramsey_fringe: detuning guess must be > 0");
  const auto [lo, hi] = std::minmax_element(trace.population.begin(), trace.population.end());
  if (*hi - *lo < 1e-12) {
    throw DegenerateDataError("fit_ramsey_fringe: populations are constant, no fringe contrast");
  }
  const double dt0 = trace.times[1] - trace.times[0];
  const double nyquist = 0.5 / dt0;
  if (4.0 * detuning_guess * dt0 > 1.0) {
    throw AliasingError("fit_ramsey_fringe: fewer than 4 samples per fringe period near t=0");
  }
  const auto sigma = sigmas_from_errors(trace.population_err, "fit_ramsey_fringe");
  const double t0 = trace.times.front();
  const double span = trace.times.back() - t0;

  const lsq::Model model = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd& j) {
    const double tau = x(0);
    const double p = x(1);
    if (!(tau > 0.0) || !(p > 0.0) || !(p <= 4.0)) return false;
    r.resize(static_cast<Eigen::Index>(n));
    j.resize(static_cast<Eigen::Index>(n), 4);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      const double t = trace.times[i];
      const double u = t / tau;
      const double up = u > 0.0 ? std::pow(u, p) : 0.0;
      const double env = std::exp(-up);
      const double theta = constants::kTwoPi * x(2) * t + x(3);
      const double c = std::cos(theta);
      const double s = std::sin(theta);
      const double w = 1.0 / sigma[i];
      r(row) = (0.5 * (1.0 + env * c) - trace.population[i]) * w;
      j(row, 0) = 0.5 * c * env * p * up / tau * w;
      j(row, 1) = u > 0.0 ? -0.5 * c * env * up * std::log(u) * w : 0.0;
      j(row, 2) = -0.5 * env * s * constants::kTwoPi * t * w;
      j(row, 3) = -0.5 * env * s * w;
    }
    return true;
  };

  lsq::Solution best;
  best.chi2 = std::numeric_limits<double>::infinity();
  bool have = false;
  for (double df : {1.0, 0.98, 1.02, 0.95, 1.05}) {
    const double delta0 = detuning_guess * df;
    // Phase from the projection of 2P - 1 over the first fringe period.
    double pc = 0.0;
    double ps = 0.0;
    for (std::size_t i = 0; i < n && trace.times[i] <= t0 + 1.0 / delta0; ++i) {
      const double y = 2.0 * trace.population[i] - 1.0;
      pc += y * std::cos(constants::kTwoPi * delta0 * trace.times[i]);
      ps += y * std::sin(constants::kTwoPi * delta0 * trace.times[i]);
    }
    const double phi0 = std::atan2(-ps, pc);
    for (double tau0 : {0.5 * span, 2.0 * span, span / 6.0}) {
      for (double p0 : {2.0, 1.0}) {
        if (!(tau0 > 0.0)) continue;
        const Eigen::Vector4d x0(tau0, p0, delta0, phi0);
        const Eigen::Vector4d scale(tau0, 1.0, delta0, 1.0);
        lsq::Solution sol;
        try {
          sol = lsq::levenberg_marquardt(model, x0, scale);
        } catch (const std::invalid_argument&) {
          continue;
        }
        if (sol.converged && sol.chi2 < best.chi2) {
          best = std::move(sol);
          have = true;
        }
      }
    }
  }
  if (!have) throw NonConvergenceError("fit_ramsey_fringe: no start point converged");
  if (best.rank < 4) throw DegenerateDataError("fit_ramsey_fringe: fringe parameters not identifiable");

  if (best.x(2) < 0.0) {
    best.x(2) = -best.x(2);
    best.x(3) = -best.x(3);
    Eigen::Matrix4d flip = Eigen::Vector4d(1.0, 1.0, -1.0, -1.0).asDiagonal();
    best.covariance = flip * best.covariance * flip;
  }
  best.x(3) = wrap_phase(best.x(3));
  if (best.x(2) >= 0.999 * nyquist) {
    throw AliasingError("fit_ramsey_fringe: fitted detuning sits at the Nyquist frequency");
  }
  return to_fit_result({"tau_s", "stretch", "detuning_hz", "phase_rad"}, best, n);
}

DlsCurve synthesize_dls_curve(const SpeciesParams& params, double b_field, double polarization,
                              std::span<const double> intensities, double shift_err) {
  DlsCurve curve;
  curve.b_field = b_field;
  curve.points.reserve(intensities.size());
  for (double u : intensities) {
    curve.points.push_back({u, dls_shift(params, {b_field, u, polarization}), shift_err});
  }
  return curve;
}

RamseyTrace synthesize_fringes(const ContrastCurve& curve, double detuning) {
  RamseyTrace trace;
  trace.times = curve.times;
  for (std::size_t k = 0; k < curve.times.size(); ++k) {
    const double t = curve.times[k];
    trace.population.push_back(0.5 * (1.0 + curve.contrast[k] * std::cos(constants::kTwoPi * detuning * t)));
    trace.population_err.push_back(0.5 * curve.std_error[k]);
  }
  return trace;
}

}  // namespace magictrap
