#include "magictrap/dephasing.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <stdexcept>
#include <thread>

#include "magictrap/constants.hpp"
#include "magictrap/errors.hpp"
#include "magictrap/lsq.hpp"
#include "magictrap/magic_solver.hpp"
#include "magictrap/rng.hpp"

namespace magictrap {

NoiseModel NoiseModel::defaults() {
  NoiseModel noise;
  noise.sigma_pol = 1.0e-4;
  noise.tau_b = 1.52;
  noise.raman_coeff = 1.0e-7;
  noise.temperature = 0.0;
  return noise;
}

void validate(const NoiseModel& noise) {
  if (!(noise.sigma_pol >= 0.0) || !std::isfinite(noise.sigma_pol)) {
    throw std::invalid_argument("noise: sigma_pol must be finite and >= 0");
  }
  if (!(noise.tau_b > 0.0)) throw std::invalid_argument("noise: tau_b must be > 0 (or infinite)");
  if (!(noise.raman_coeff >= 0.0) || !std::isfinite(noise.raman_coeff)) {
    throw std::invalid_argument("noise: raman_coeff must be finite and >= 0");
  }
  if (!(noise.temperature >= 0.0) || !std::isfinite(noise.temperature)) {
    throw std::invalid_argument("noise: temperature must be finite and >= 0");
  }
  if (noise.trap_depth_for_thermal && !std::isfinite(*noise.trap_depth_for_thermal)) {
    throw std::invalid_argument("noise: trap_depth_for_thermal must be finite");
  }
}

std::vector<double> make_time_grid(double start, double stop, std::size_t count, TimeSpacing spacing) {
  if (count == 0) throw std::invalid_argument("time grid: count must be >= 1");
  if (!(start >= 0.0) || !(stop >= start)) {
    throw std::invalid_argument("time grid: require 0 <= start <= stop");
  }
  if (count > 1 && !(stop > start)) throw std::invalid_argument("time grid: stop must exceed start");
  std::vector<double> grid(count);
  if (count == 1) {
    grid[0] = start;
    return grid;
  }
  const double n = static_cast<double>(count - 1);
  if (spacing == TimeSpacing::kLinear) {
    for (std::size_t i = 0; i < count; ++i) grid[i] = start + (stop - start) * static_cast<double>(i) / n;
  } else {
    if (!(start > 0.0)) throw std::invalid_argument("time grid: log spacing needs start > 0");
    const double ratio = std::log(stop / start);
    for (std::size_t i = 0; i < count; ++i) grid[i] = start * std::exp(ratio * static_cast<double>(i) / n);
  }
  grid.back() = stop;
  return grid;
}

namespace {

void check_times(std::span<const double> times) {
  if (times.empty()) throw std::invalid_argument("time grid is empty");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(times[i] >= 0.0) || !std::isfinite(times[i])) {
      throw std::invalid_argument("times must be finite and >= 0");
    }
    if (i > 0 && !(times[i] > times[i - 1])) {
      throw std::invalid_argument("times must be strictly increasing");
    }
  }
}

double magnetic_envelope(double tau_b, double t) {
  if (std::isinf(tau_b)) return 1.0;
  const double x = t / tau_b;
  return std::exp(-x * x);
}

struct BatchSums {
  std::vector<double> re;
  std::vector<double> im;
  std::uint64_t count = 0;
};

}  // namespace

double analytic_polarization_tau(const SpeciesParams& params, const TrapPoint& point, double sigma_pol) {
  const double sigma_f = std::abs(polarization_sensitivity(params, point)) * sigma_pol;
  if (sigma_f == 0.0) return std::numeric_limits<double>::infinity();
  return 1.0 / (std::numbers::sqrt2 * constants::kPi * sigma_f);
}

ContrastCurve envelope_polarization_analytic(const SpeciesParams& params, const TrapPoint& point,
                                             double sigma_pol, std::span<const double> times) {
  check_times(times);
  if (!(sigma_pol >= 0.0)) throw std::invalid_argument("sigma_pol must be >= 0");
  const double sigma_f = std::abs(polarization_sensitivity(params, point)) * sigma_pol;
  ContrastCurve curve;
  curve.times.assign(times.begin(), times.end());
  curve.contrast.reserve(times.size());
  for (double t : times) {
    const double x = constants::kTwoPi * sigma_f * t;
    curve.contrast.push_back(std::exp(-0.5 * x * x));
  }
  curve.std_error.assign(times.size(), 0.0);
  return curve;
}

ContrastCurve simulate_ramsey_mc(const SpeciesParams& params, const TrapPoint& point,
                                 const NoiseModel& noise, std::span<const double> times,
                                 const MonteCarloSettings& mc) {
  if (mc.trials == 0) throw std::invalid_argument("simulate_ramsey_mc: trials must be >= 1");
  check_times(times);
  validate(point);
  validate(noise);

  const bool thermal = noise.temperature > 0.0;
  double thermal_depth = noise.trap_depth_for_thermal.value_or(point.intensity);
  if (thermal && thermal_depth == 0.0) {
    throw std::invalid_argument("simulate_ramsey_mc: thermal channel needs a nonzero trap depth");
  }
  thermal_depth = std::abs(thermal_depth);
  const double kt = temperature_to_frequency(noise.temperature);
  const double nominal = dls_shift(params, point);

  const std::size_t nt = times.size();
  const std::uint64_t n_batches = std::clamp<std::uint64_t>(mc.batches, 1, mc.trials);
  std::vector<BatchSums> batches(n_batches);

  auto run_batch = [&](std::uint64_t b) {
    const std::uint64_t begin = mc.trials * b / n_batches;
    const std::uint64_t end = mc.trials * (b + 1) / n_batches;
    BatchSums sums{std::vector<double>(nt, 0.0), std::vector<double>(nt, 0.0), end - begin};
    for (std::uint64_t i = begin; i < end; ++i) {
      SplitMix64 engine(trial_seed(mc.seed, i));
      std::normal_distribution<double> normal(0.0, 1.0);
      const double z = normal(engine);
      TrapPoint shot = point;
      shot.polarization = point.polarization + noise.sigma_pol * z;
      if (thermal) {
        std::gamma_distribution<double> gamma(3.0, 1.0);
        const double energy = gamma(engine) * kt;
        shot.intensity = point.intensity * (1.0 - energy / (2.0 * thermal_depth));
      }
      const double omega = constants::kTwoPi * (dls_shift(params, shot) - nominal);
      for (std::size_t k = 0; k < nt; ++k) {
        const double phase = omega * times[k];
        sums.re[k] += std::cos(phase);
        sums.im[k] += std::sin(phase);
      }
    }
    batches[b] = std::move(sums);
  };

  const unsigned n_threads =
      static_cast<unsigned>(std::clamp<std::uint64_t>(mc.threads, 1, n_batches));
  if (n_threads == 1) {
    for (std::uint64_t b = 0; b < n_batches; ++b) run_batch(b);
  } else {
    std::atomic<std::uint64_t> next{0};
    std::vector<std::jthread> workers;
    workers.reserve(n_threads);
    for (unsigned w = 0; w < n_threads; ++w) {
      workers.emplace_back([&] {
        for (std::uint64_t b = next++; b < n_batches; b = next++) run_batch(b);
      });
    }
  }

  ContrastCurve curve;
  curve.times.assign(times.begin(), times.end());
  curve.contrast.resize(nt);
  curve.std_error.resize(nt);
  curve.trials = mc.trials;
  curve.seed = mc.seed;

  const double n_total = static_cast<double>(mc.trials);
  for (std::size_t k = 0; k < nt; ++k) {
    double re = 0.0;
    double im = 0.0;
    for (const auto& batch : batches) {
      re += batch.re[k];
      im += batch.im[k];
    }
    re /= n_total;
    im /= n_total;
    const double modulus = std::hypot(re, im);

    // Batch means projected on the direction of the overall mean.
    double se = 0.0;
    if (n_batches > 1) {
      const double ux = modulus > 0.0 ? re / modulus : 1.0;
      const double uy = modulus > 0.0 ? im / modulus : 0.0;
      double ss = 0.0;
      for (const auto& batch : batches) {
        const double nb = static_cast<double>(batch.count);
        const double proj = (batch.re[k] * ux + batch.im[k] * uy) / nb;
        ss += nb * (proj - modulus) * (proj - modulus);
      }
      se = std::sqrt(ss / (static_cast<double>(n_batches - 1) * n_total));
    }

    const double t = times[k];
    const double envelope =
        magnetic_envelope(noise.tau_b, t) * std::exp(-noise.raman_coeff * std::abs(point.intensity) * t);
    curve.contrast[k] = modulus * envelope;
    curve.std_error[k] = se * envelope;
  }
  return curve;
}

ContrastCurve combine_envelopes(std::span<const ContrastCurve> curves) {
  if (curves.empty()) throw std::invalid_argument("combine_envelopes: no curves");
  const auto& grid = curves.front().times;
  for (const auto& c : curves) {
    if (c.times != grid || c.contrast.size() != grid.size() || c.std_error.size() != grid.size()) {
      throw std::invalid_argument("combine_envelopes: curves must share one time grid");
    }
  }
  ContrastCurve out;
  out.times = grid;
  out.contrast.assign(grid.size(), 1.0);
  out.std_error.assign(grid.size(), 0.0);
  out.seed = curves.front().seed;
  for (const auto& c : curves) out.trials = std::max(out.trials, c.trials);

  for (std::size_t k = 0; k < grid.size(); ++k) {
    double product = 1.0;
    for (const auto& c : curves) product *= c.contrast[k];
    // Equals product * sqrt(sum (se_i / C_i)^2) without dividing by C_i.
    double var = 0.0;
    for (std::size_t i = 0; i < curves.size(); ++i) {
      double others = 1.0;
      for (std::size_t j = 0; j < curves.size(); ++j) {
        if (j != i) others *= curves[j].contrast[k];
      }
      const double term = curves[i].std_error[k] * others;
      var += term * term;
    }
    out.contrast[k] = product;
    out.std_error[k] = std::sqrt(var);
  }
  return out;
}

CoherenceResult coherence_time(const ContrastCurve& curve) {
  const std::size_t n = curve.times.size();
  if (n < 3 || curve.contrast.size() != n || curve.std_error.size() != n) {
    throw std::invalid_argument("coherence_time: need >= 3 samples with matching columns");
  }
  const auto [lo, hi] = std::minmax_element(curve.contrast.begin(), curve.contrast.end());
  if (*lo == *hi) throw DegenerateDataError("coherence_time: contrast is constant, no decay to fit");

  double min_se = std::numeric_limits<double>::infinity();
  for (double se : curve.std_error) {
    if (se > 0.0) min_se = std::min(min_se, se);
  }
  std::vector<double> sigma(n, 1.0);
  if (std::isfinite(min_se)) {
    for (std::size_t i = 0; i < n; ++i) sigma[i] = curve.std_error[i] > 0.0 ? curve.std_error[i] : min_se;
  }

  // Start from the linearization ln(-ln C) = p ln t - p ln tau.
  double tau0 = curve.times.back();
  double p0 = 2.0;
  {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double c = curve.contrast[i];
      const double t = curve.times[i];
      if (t > 0.0 && c > 1e-3 && c < 1.0 - 1e-6) {
        const double x = std::log(t);
        const double y = std::log(-std::log(c));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++m;
      }
    }
    const double den = m * sxx - sx * sx;
    if (m >= 2 && den > 0.0) {
      const double slope = (m * sxy - sx * sy) / den;
      const double icpt = (sy - slope * sx) / m;
      if (slope > 0.05 && slope <= 4.0) {
        p0 = slope;
        tau0 = std::exp(-icpt / slope);
      }
    }
    if (!(tau0 > 0.0) || !std::isfinite(tau0)) tau0 = curve.times.back() > 0.0 ? curve.times.back() : 1.0;
  }

  const lsq::Model model = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd& j) {
    const double tau = x(0);
    const double p = x(1);
    if (!(tau > 0.0) || !(p > 0.0) || !(p <= 4.0)) return false;
    r.resize(static_cast<Eigen::Index>(n));
    j.resize(static_cast<Eigen::Index>(n), 2);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      const double u = curve.times[i] / tau;
      const double up = u > 0.0 ? std::pow(u, p) : 0.0;
      const double c = std::exp(-up);
      r(row) = (c - curve.contrast[i]) / sigma[i];
      j(row, 0) = c * p * up / tau / sigma[i];
      j(row, 1) = u > 0.0 ? -c * up * std::log(u) / sigma[i] : 0.0;
    }
    return true;
  };

  Eigen::Vector2d x0(tau0, std::clamp(p0, 0.1, 4.0));
  const auto sol = lsq::levenberg_marquardt(model, x0, Eigen::Vector2d(tau0, 1.0));
  if (!sol.converged) {
    throw NonConvergenceError("coherence_time: fit did not converge in " +
                              std::to_string(sol.iterations) + " iterations");
  }

  CoherenceResult result;
  result.tau = sol.x(0);
  result.stretch = sol.x(1);
  const double dof = static_cast<double>(n) - 2.0;
  const double scale = dof > 0.0 ? sol.chi2 / dof : 1.0;
  result.tau_err = std::sqrt(std::max(0.0, sol.covariance(0, 0) * scale));
  result.method = "fit";
  result.extrapolated = *lo > std::exp(-1.0);
  return result;
}

std::vector<ScanPoint> scan_tau_vs_depth(const SpeciesParams& params, double b_field,
                                         double polarization, std::span<const double> depths,
                                         const NoiseModel& noise, std::span<const double> times,
                                         const MonteCarloSettings& mc, const ScanOptions& options) {
  if (depths.empty()) throw std::invalid_argument("scan_tau_vs_depth: no depths");
  std::vector<ScanPoint> out;
  out.reserve(depths.size());
  for (double depth : depths) {
    ScanPoint sp;
    sp.depth = depth;
    sp.polarization = polarization;
    try {
      if (options.solve_polarization) {
        sp.polarization = solve_polarization_for_magic(params, b_field, depth).polarization;
      }
      const auto curve = simulate_ramsey_mc(params, {b_field, depth, sp.polarization}, noise, times, mc);
      sp.result = coherence_time(curve);
    } catch (const std::exception& e) {
      sp.error = e.what();
    }
    out.push_back(std::move(sp));
  }
  return out;
}

}  // namespace magictrap
