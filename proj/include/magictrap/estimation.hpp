#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "magictrap/dephasing.hpp"
#include "magictrap/species.hpp"

namespace magictrap {

struct DlsPoint {
  double intensity = 0.0;  // Hz
  double shift = 0.0;      // Hz
  double shift_err = 0.0;  // Hz; all zero means unweighted
};

/// Shift-vs-intensity data taken at one bias field.
struct DlsCurve {
  double b_field = 0.0;  // G
  std::vector<DlsPoint> points;
};

struct RamseyTrace {
  std::vector<double> times;  // s
  std::vector<double> population;
  std::vector<double> population_err;  // all zero means unweighted
};

/// Parameters, 1-sigma errors and diagnostics from any fit. Uncertainties are
/// scaled by the reduced chi-square whenever there are residual degrees of
/// freedom.
struct FitResult {
  std::vector<std::string> names;
  std::vector<double> values;
  std::vector<double> sigmas;
  Eigen::MatrixXd covariance;
  double residual_norm = 0.0;  // sqrt(chi2 / N), weighted
  double chi2 = 0.0;
  int dof = 0;
  bool converged = false;
  int iterations = 0;
  std::vector<std::string> warnings;

  double reduced_chi2() const { return dof > 0 ? chi2 / dof : 0.0; }
  double value(std::string_view name) const;
  double sigma(std::string_view name) const;
};

/// Joint weighted fit of (beta1, beta2, beta4) over curves at two or more
/// distinct fields, at known polarization.
FitResult fit_betas(std::span<const DlsCurve> curves, double polarization);

/// Parabola a U^2 + b U + c through one curve. Reports magic_intensity_hz
/// (-b / 2a), curvature (a) and vertex_shift_hz, with errors propagated from
/// the (a, b, c) covariance.
FitResult fit_magic_point(const DlsCurve& curve);

/// One-parameter fit of the polarization A in (0, 1] with known coefficients.
FitResult calibrate_polarization(const DlsCurve& curve, const SpeciesParams& params);

/// Joint fit of P(t) = (1 + exp(-(t/tau)^p) cos(2 pi delta t + phi)) / 2.
/// Reports tau_s, stretch, detuning_hz (>= 0) and phase_rad in (-pi, pi].
FitResult fit_ramsey_fringe(const RamseyTrace& trace, double detuning_guess);

// Forward models used by the fits and by synthetic-data generation.

DlsCurve synthesize_dls_curve(const SpeciesParams& params, double b_field, double polarization,
                              std::span<const double> intensities, double shift_err = 0.0);

double ramsey_population(double t, double tau, double stretch, double detuning, double phase);

/// Two-pulse population fringes (1 + C(t) cos(2 pi delta t)) / 2 built on a
/// contrast curve; population_err is half the contrast error.
RamseyTrace synthesize_fringes(const ContrastCurve& curve, double detuning);

}  // namespace magictrap
