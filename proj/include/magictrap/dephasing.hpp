#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "magictrap/species.hpp"

namespace magictrap {

/// Dephasing channels for a Ramsey sequence.
///
/// Polarization and thermal noise are quasi-static: one draw per shot, held
/// for the whole free-evolution gap. The magnetic channel is a fixed Gaussian
/// envelope exp(-(t/tau_b)^2) and Raman scattering a population decay
/// exp(-raman_coeff |U| t).
struct NoiseModel {
  double sigma_pol = 0.0;                                     // std of A
  double tau_b = std::numeric_limits<double>::infinity();     // s
  double raman_coeff = 0.0;                                   // 1/(s Hz)
  double temperature = 0.0;                                   // uK
  std::optional<double> trap_depth_for_thermal;               // Hz; unset = operating intensity

  /// sigma_pol = 1.0e-4, tau_b = 1.52 s, raman_coeff = 1e-7 /(s Hz) (T1 = 10 s
  /// at 1 MHz, not a measured value), thermal channel off.
  static NoiseModel defaults();
};

void validate(const NoiseModel& noise);

struct ContrastCurve {
  std::vector<double> times;  // s
  std::vector<double> contrast;
  std::vector<double> std_error;
  std::uint64_t trials = 0;
  std::uint64_t seed = 0;
};

struct CoherenceResult {
  double tau = 0.0;      // 1/e time, s
  double stretch = 0.0;  // exponent p of exp(-(t/tau)^p)
  double tau_err = 0.0;  // s
  std::string method;    // "fit" or "analytic"
  bool extrapolated = false;  // curve never fell below 1/e
};

struct MonteCarloSettings {
  std::uint64_t trials = 100000;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  // Trials are split into this many batches for the batch-means error and
  // for work distribution; results do not depend on `threads`.
  unsigned batches = 64;
};

enum class TimeSpacing { kLinear, kLog };

std::vector<double> make_time_grid(double start, double stop, std::size_t count,
                                   TimeSpacing spacing = TimeSpacing::kLinear);

/// Gaussian envelope exp(-(2 pi sigma_f t)^2 / 2) with sigma_f = |S| sigma_pol,
/// S the polarization sensitivity at the point.
ContrastCurve envelope_polarization_analytic(const SpeciesParams& params, const TrapPoint& point,
                                             double sigma_pol, std::span<const double> times);

/// 1/e time of the analytic polarization envelope, 1 / (sqrt(2) pi sigma_f).
/// Infinite when sigma_f is zero.
double analytic_polarization_tau(const SpeciesParams& params, const TrapPoint& point, double sigma_pol);

/// Monte Carlo Ramsey contrast.
///
/// Trial i uses the generator seeded by trial_seed(seed, i) and draws, in
/// order, z ~ N(0, 1) and x ~ Gamma(3, 1). The shot sees polarization
/// A + sigma_pol z and, for an atom of energy E = x k_B T, the time-averaged
/// intensity U (1 - E / (2 |D|)) with D the thermal trap depth. Its detuning is
/// the shift at the perturbed point minus the shift at the nominal point.
/// Contrast is |<exp(2 pi i delta t)>| times the magnetic and Raman envelopes.
ContrastCurve simulate_ramsey_mc(const SpeciesParams& params, const TrapPoint& point,
                                 const NoiseModel& noise, std::span<const double> times,
                                 const MonteCarloSettings& mc);

/// Pointwise product; relative standard errors add in quadrature.
ContrastCurve combine_envelopes(std::span<const ContrastCurve> curves);

/// Weighted fit of exp(-(t/tau)^p), p in (0, 4].
CoherenceResult coherence_time(const ContrastCurve& curve);

struct ScanOptions {
  // Re-solve A at each depth so that the depth is the magic intensity at
  // b_field. Otherwise the given polarization is used throughout.
  bool solve_polarization = false;
};

struct ScanPoint {
  double depth = 0.0;         // Hz
  double polarization = 0.0;  // A used at this depth
  std::optional<CoherenceResult> result;
  std::string error;  // set when result is empty
};

/// Simulates and fits one coherence time per depth, in input order. A failure
/// at one depth is recorded in its ScanPoint and does not stop the scan.
std::vector<ScanPoint> scan_tau_vs_depth(const SpeciesParams& params, double b_field,
                                         double polarization, std::span<const double> depths,
                                         const NoiseModel& noise, std::span<const double> times,
                                         const MonteCarloSettings& mc, const ScanOptions& options = {});

}  // namespace magictrap
