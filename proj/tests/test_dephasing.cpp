#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "magictrap/dephasing.hpp"
#include "magictrap/errors.hpp"
#include "magictrap/magic_solver.hpp"
#include "magictrap/rng.hpp"
#include "oracles.hpp"

using namespace magictrap;

namespace {

const SpeciesParams kRb85 = rb85_measured();
const TrapPoint kOptimum{3.180, -1.0e6, 0.225};

NoiseModel polarization_only(double sigma) {
  NoiseModel n;
  n.sigma_pol = sigma;
  return n;
}

MonteCarloSettings mc(std::uint64_t trials, std::uint64_t seed, unsigned threads = 1) {
  MonteCarloSettings s;
  s.trials = trials;
  s.seed = seed;
  s.threads = threads;
  return s;
}

// 1/e time of a Gaussian product, (1/t1^2 + 1/t2^2)^(-1/2).
double gaussian_combination(double t1, double t2) { return 1.0 / std::sqrt(1.0 / (t1 * t1) + 1.0 / (t2 * t2)); }

}  // namespace

TEST_CASE("analytic polarization envelope") {
  const auto times = make_time_grid(0.0, 6.0, 61);
  const auto curve = envelope_polarization_analytic(kRb85, kOptimum, 1.0e-4, times);
  const double sigma_f = 704.505 * 1.0e-4;
  const double tau = analytic_polarization_tau(kRb85, kOptimum, 1.0e-4);
  CHECK(tau == doctest::Approx(1.0 / (std::sqrt(2.0) * M_PI * sigma_f)).epsilon(1e-12));
  CHECK(tau == doctest::Approx(3.18).epsilon(0.01));
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double x = 2.0 * M_PI * sigma_f * times[i];
    CHECK(curve.contrast[i] == doctest::Approx(std::exp(-x * x / 2.0)).epsilon(1e-12));
    CHECK(curve.std_error[i] == 0.0);
  }
  CHECK(curve.trials == 0);
  const double at_tau = envelope_polarization_analytic(kRb85, kOptimum, 1.0e-4, std::vector<double>{tau}).contrast[0];
  CHECK(at_tau == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("analytic envelope without noise is flat") {
  const auto curve = envelope_polarization_analytic(kRb85, kOptimum, 0.0, make_time_grid(0.0, 10.0, 11));
  for (double c : curve.contrast) CHECK(c == 1.0);
  CHECK(std::isinf(analytic_polarization_tau(kRb85, kOptimum, 0.0)));
}

TEST_CASE("deeper traps dephase faster under polarization noise") {
  const double shallow = analytic_polarization_tau(kRb85, kOptimum, 1.0e-4);
  const double deep = analytic_polarization_tau(kRb85, {3.180, -2.2e6, 0.225}, 1.0e-4);
  CHECK(deep == doctest::Approx(1.45).epsilon(0.01));
  CHECK(deep < shallow);
  // Sensitivity at a magic point is -beta1 U_M / A, so tau_A scales as 1/|U_M| there.
  const double a1 = solve_polarization_for_magic(kRb85, 3.180, -1.0e6).polarization;
  const double a2 = solve_polarization_for_magic(kRb85, 3.180, -2.2e6).polarization;
  const double r = analytic_polarization_tau(kRb85, {3.180, -2.2e6, a2}, 1e-4) /
                   analytic_polarization_tau(kRb85, {3.180, -1.0e6, a1}, 1e-4);
  CHECK(r == doctest::Approx((1.0 / 2.2) * (a2 / a1)).epsilon(1e-12));
}

TEST_CASE("Monte Carlo without noise keeps full contrast") {
  const auto curve = simulate_ramsey_mc(kRb85, kOptimum, NoiseModel{}, make_time_grid(0.0, 5.0, 11), mc(1000, 3));
  for (double c : curve.contrast) CHECK(c == 1.0);
  for (double se : curve.std_error) CHECK(se == 0.0);
}

TEST_CASE("Monte Carlo polarization noise matches the analytic envelope") {
  const double tau = analytic_polarization_tau(kRb85, kOptimum, 1.0e-4);
  const auto times = make_time_grid(0.0, 2.0 * tau, 30);
  const auto sim = simulate_ramsey_mc(kRb85, kOptimum, polarization_only(1.0e-4), times, mc(100000, 11));
  const auto ref = envelope_polarization_analytic(kRb85, kOptimum, 1.0e-4, times);
  CHECK(sim.contrast[0] == 1.0);
  for (std::size_t i = 0; i < times.size(); ++i) {
    CHECK(std::abs(sim.contrast[i] - ref.contrast[i]) <= 3.0 * sim.std_error[i]);
  }
}

TEST_CASE("full default noise at the optimum") {
  const auto times = make_time_grid(0.0, 3.0, 61);
  const auto curve = simulate_ramsey_mc(kRb85, kOptimum, NoiseModel::defaults(), times, mc(100000, 5));
  const auto result = coherence_time(curve);
  CHECK(result.tau >= 1.0);
  CHECK(result.tau <= 1.5);
  const double oracle_tau = gaussian_combination(analytic_polarization_tau(kRb85, kOptimum, 1e-4), 1.52);
  CHECK(oracle_tau == doctest::Approx(1.37).epsilon(0.01));
}

TEST_CASE("combining Gaussian envelopes adds inverse squares") {
  const auto times = make_time_grid(0.0, 4.0, 81);
  ContrastCurve a, b, ones;
  a.times = b.times = ones.times = times;
  for (double t : times) {
    a.contrast.push_back(std::exp(-std::pow(t / 3.18, 2)));
    b.contrast.push_back(std::exp(-std::pow(t / 1.52, 2)));
    ones.contrast.push_back(1.0);
  }
  a.std_error.assign(times.size(), 0.0);
  b.std_error.assign(times.size(), 0.0);
  ones.std_error.assign(times.size(), 0.0);
  const std::vector<ContrastCurve> pair{a, b};
  const auto combined = combine_envelopes(pair);
  const auto fit = coherence_time(combined);
  CHECK(fit.tau == doctest::Approx(1.371).epsilon(1e-3));
  CHECK(fit.tau == doctest::Approx(gaussian_combination(3.18, 1.52)).epsilon(1e-9));
  CHECK(fit.stretch == doctest::Approx(2.0).epsilon(1e-9));

  const std::vector<ContrastCurve> with_identity{a, ones};
  const auto same = combine_envelopes(with_identity);
  CHECK(same.contrast == a.contrast);

  ContrastCurve shifted = b;
  shifted.times[3] += 1e-3;
  const std::vector<ContrastCurve> mismatched{a, shifted};
  CHECK_THROWS_AS(combine_envelopes(mismatched), std::invalid_argument);
}

TEST_CASE("independent channels combine multiplicatively") {
  const auto times = make_time_grid(0.0, 2.5, 26);

  NoiseModel pol = polarization_only(1.0e-4);
  NoiseModel magnetic;
  magnetic.tau_b = 1.52;
  NoiseModel raman;
  raman.raman_coeff = 1.0e-7;
  NoiseModel all = pol;
  all.tau_b = magnetic.tau_b;
  all.raman_coeff = raman.raman_coeff;

  const std::vector<ContrastCurve> singles{simulate_ramsey_mc(kRb85, kOptimum, pol, times, mc(100000, 101)),
                                           simulate_ramsey_mc(kRb85, kOptimum, magnetic, times, mc(10, 202)),
                                           simulate_ramsey_mc(kRb85, kOptimum, raman, times, mc(10, 303))};
  const auto product = combine_envelopes(singles);
  const auto joint = simulate_ramsey_mc(kRb85, kOptimum, all, times, mc(100000, 404));
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double se = std::hypot(product.std_error[i], joint.std_error[i]);
    CHECK(std::abs(product.contrast[i] - joint.contrast[i]) <= 3.0 * se + 1e-12);
  }
  CHECK(singles[0].contrast.back() < 0.8);
}

TEST_CASE("thermal and polarization channels are coupled") {
  // Thermal sampling lowers |U_eff| and with it the polarization sensitivity,
  // so the two do not factorize.
  const auto times = make_time_grid(0.0, 2.5, 26);
  NoiseModel pol = polarization_only(1.0e-4);
  NoiseModel thermal;
  thermal.temperature = 8.0;
  NoiseModel both = pol;
  both.temperature = thermal.temperature;
  const std::vector<ContrastCurve> singles{simulate_ramsey_mc(kRb85, kOptimum, pol, times, mc(50000, 1)),
                                           simulate_ramsey_mc(kRb85, kOptimum, thermal, times, mc(50000, 2))};
  const auto product = combine_envelopes(singles);
  const auto joint = simulate_ramsey_mc(kRb85, kOptimum, both, times, mc(50000, 3));
  CHECK(joint.contrast.back() > product.contrast.back());
}

TEST_CASE("coherence time of exact model curves") {
  const auto times = make_time_grid(0.0, 3.0, 61);
  ContrastCurve gauss, expo;
  gauss.times = expo.times = times;
  for (double t : times) {
    gauss.contrast.push_back(std::exp(-std::pow(t / 1.0, 2)));
    expo.contrast.push_back(std::exp(-t / 0.5));
  }
  gauss.std_error.assign(times.size(), 0.0);
  expo.std_error.assign(times.size(), 0.0);

  const auto g = coherence_time(gauss);
  CHECK(oracle::rel_err(g.tau, 1.0) < 1e-6);
  CHECK(oracle::rel_err(g.stretch, 2.0) < 1e-6);
  CHECK(g.method == "fit");
  CHECK_FALSE(g.extrapolated);

  const auto e = coherence_time(expo);
  CHECK(oracle::rel_err(e.tau, 0.5) < 1e-6);
  CHECK(oracle::rel_err(e.stretch, 1.0) < 1e-6);
}

TEST_CASE("coherence time of the simulated optimum agrees with the combination oracle") {
  NoiseModel noise = polarization_only(1.0e-4);
  noise.tau_b = 1.52;
  const auto curve = simulate_ramsey_mc(kRb85, kOptimum, noise, make_time_grid(0.0, 3.0, 61), mc(100000, 17));
  const auto r = coherence_time(curve);
  const double oracle_tau = gaussian_combination(analytic_polarization_tau(kRb85, kOptimum, 1e-4), 1.52);
  CHECK(std::abs(r.tau - oracle_tau) <= 3.0 * r.tau_err + 0.01 * oracle_tau);
}

TEST_CASE("coherence time flags and errors") {
  const auto times = make_time_grid(0.0, 0.5, 11);
  ContrastCurve flat;
  flat.times = times;
  flat.contrast.assign(times.size(), 1.0);
  flat.std_error.assign(times.size(), 0.0);
  CHECK_THROWS_AS(coherence_time(flat), DegenerateDataError);

  ContrastCurve partial = flat;
  for (std::size_t i = 0; i < times.size(); ++i) partial.contrast[i] = std::exp(-std::pow(times[i] / 2.0, 2));
  const auto r = coherence_time(partial);
  CHECK(r.extrapolated);
  CHECK(r.tau == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("scan over depths") {
  const std::vector<double> depths{-1.0e6, -1.4e6, -1.8e6, -2.2e6};
  const auto times = make_time_grid(0.0, 3.0, 61);
  const auto scan = scan_tau_vs_depth(kRb85, 3.180, 0.225, depths, NoiseModel::defaults(), times, mc(50000, 9));
  REQUIRE(scan.size() == 4);
  for (std::size_t i = 0; i < scan.size(); ++i) {
    REQUIRE(scan[i].result.has_value());
    CHECK(scan[i].depth == depths[i]);
    if (i > 0) CHECK(scan[i].result->tau < scan[i - 1].result->tau);
  }
}

TEST_CASE("scan with re-solved polarization stays magic") {
  const std::vector<double> depths{-1.0e6, -2.2e6};
  const auto scan = scan_tau_vs_depth(kRb85, 3.180, 0.225, depths, NoiseModel::defaults(),
                                      make_time_grid(0.0, 3.0, 31), mc(20000, 9), {.solve_polarization = true});
  for (const auto& sp : scan) {
    CHECK(magic_intensity(kRb85, 3.180, sp.polarization) == doctest::Approx(sp.depth).epsilon(1e-9));
  }
}

TEST_CASE("scan flags points without decay") {
  const std::vector<double> depths{-1.0e6};
  const auto scan = scan_tau_vs_depth(kRb85, 3.180, 0.225, depths, NoiseModel{}, make_time_grid(0.0, 3.0, 31),
                                      mc(100, 1));
  REQUIRE(scan.size() == 1);
  CHECK_FALSE(scan[0].result.has_value());
  CHECK_FALSE(scan[0].error.empty());
}

TEST_CASE("doubling sigma halves the polarization dephasing time") {
  const std::vector<double> depths{-1.0e6};
  const auto times = make_time_grid(0.0, 6.0, 61);
  const auto base = scan_tau_vs_depth(kRb85, 3.180, 0.225, depths, polarization_only(1.0e-4), times, mc(100000, 21));
  const auto twice = scan_tau_vs_depth(kRb85, 3.180, 0.225, depths, polarization_only(2.0e-4), times, mc(100000, 21));
  REQUIRE(base[0].result);
  REQUIRE(twice[0].result);
  CHECK(twice[0].result->tau / base[0].result->tau == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("results do not depend on thread count") {
  NoiseModel noise = NoiseModel::defaults();
  noise.temperature = 5.0;
  const auto times = make_time_grid(0.0, 2.0, 21);
  const auto one = simulate_ramsey_mc(kRb85, kOptimum, noise, times, mc(20000, 77, 1));
  const auto four = simulate_ramsey_mc(kRb85, kOptimum, noise, times, mc(20000, 77, 4));
  const auto again = simulate_ramsey_mc(kRb85, kOptimum, noise, times, mc(20000, 77, 1));
  CHECK(one.contrast == four.contrast);
  CHECK(one.std_error == four.std_error);
  CHECK(one.contrast == again.contrast);
  const auto other = simulate_ramsey_mc(kRb85, kOptimum, noise, times, mc(20000, 78, 1));
  CHECK(one.contrast != other.contrast);
}

TEST_CASE("more noise never raises contrast on matched seeds") {
  const double a = solve_polarization_for_magic(kRb85, 3.180, -1.0e6).polarization;
  const TrapPoint pt{3.180, -1.0e6, a};
  const auto times = make_time_grid(0.0, 3.0, 31);
  NoiseModel base;
  base.sigma_pol = 0.5e-4;
  base.tau_b = 3.0;
  base.raman_coeff = 0.5e-7;
  base.temperature = 3.0;

  auto check_not_above = [&](const NoiseModel& more) {
    const auto lo = simulate_ramsey_mc(kRb85, pt, base, times, mc(20000, 5));
    const auto hi = simulate_ramsey_mc(kRb85, pt, more, times, mc(20000, 5));
    for (std::size_t i = 0; i < times.size(); ++i) CHECK(hi.contrast[i] <= lo.contrast[i]);
  };
  NoiseModel n = base;
  n.sigma_pol = 1.0e-4;
  check_not_above(n);
  n = base;
  n.tau_b = 1.5;
  check_not_above(n);
  n = base;
  n.raman_coeff = 1.0e-7;
  check_not_above(n);
  n = base;
  n.temperature = 6.0;
  check_not_above(n);
}

TEST_CASE("contrast stays within bounds") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 10; ++i) {
    NoiseModel noise;
    noise.sigma_pol = 3e-4 * unit(rng);
    noise.tau_b = 0.5 + 3.0 * unit(rng);
    noise.raman_coeff = 2e-7 * unit(rng);
    noise.temperature = 10.0 * unit(rng);
    const TrapPoint pt{3.180, -(0.5 + 2.0 * unit(rng)) * 1e6, 0.22 + 0.01 * unit(rng)};
    const auto curve = simulate_ramsey_mc(kRb85, pt, noise, make_time_grid(0.0, 4.0, 41), mc(2000, i + 1));
    for (std::size_t k = 0; k < curve.times.size(); ++k) {
      CHECK(curve.contrast[k] >= 0.0);
      CHECK(curve.contrast[k] <= 1.0 + 3.0 * curve.std_error[k]);
    }
  }
}

TEST_CASE("thermal dephasing is second order at a magic point") {
  const double a = solve_polarization_for_magic(kRb85, 3.180, -1.0e6).polarization;
  NoiseModel thermal;
  thermal.temperature = 5.0;
  const auto times = make_time_grid(0.0, 3.0, 31);
  const auto at_magic = simulate_ramsey_mc(kRb85, {3.180, -1.0e6, a}, thermal, times, mc(50000, 8));
  const auto off_magic = simulate_ramsey_mc(kRb85, {3.180, -1.0e6, 0.225}, thermal, times, mc(50000, 8));
  CHECK(at_magic.contrast.back() > off_magic.contrast.back());
  CHECK(at_magic.contrast.back() > 0.9);
}

TEST_CASE("simulation preconditions") {
  const auto times = make_time_grid(0.0, 1.0, 5);
  CHECK_THROWS_AS(simulate_ramsey_mc(kRb85, kOptimum, NoiseModel{}, times, mc(0, 1)), std::invalid_argument);
  CHECK_THROWS_AS(simulate_ramsey_mc(kRb85, kOptimum, NoiseModel{}, std::vector<double>{}, mc(10, 1)),
                  std::invalid_argument);
  NoiseModel thermal;
  thermal.temperature = 10.0;
  thermal.trap_depth_for_thermal = 0.0;
  CHECK_THROWS_AS(simulate_ramsey_mc(kRb85, kOptimum, thermal, times, mc(10, 1)), std::invalid_argument);
  CHECK_THROWS_AS(simulate_ramsey_mc(kRb85, {3.18, 0.0, 0.225}, NoiseModel{.temperature = 10.0}, times, mc(10, 1)),
                  std::invalid_argument);
  CHECK_THROWS_AS(simulate_ramsey_mc(kRb85, kOptimum, NoiseModel{}, std::vector<double>{0.0, 0.5, 0.2}, mc(10, 1)),
                  std::invalid_argument);
}

TEST_CASE("trial seeds are a fixed function of master seed and index") {
  CHECK(trial_seed(1, 0) == trial_seed(1, 0));
  CHECK(trial_seed(1, 0) != trial_seed(1, 1));
  CHECK(trial_seed(1, 0) != trial_seed(2, 0));
  static_assert(mix64(0) == 0);
}

TEST_CASE("Monte Carlo matches the analytic envelope at random near-magic points") {
  // 20 x 29 correlated comparisons; a per-point 3 sigma rule would fail by
  // chance about a quarter of the time, so bound the family at Bonferroni
  // 4.1 sigma and separately require no bias in the mean z-score.
  std::mt19937_64 rng(2718);
  std::uniform_real_distribution<double> pol(0.2, 1.0), depth(-2.5e6, -0.5e6);
  double z_sum = 0.0;
  int z_count = 0;
  for (int i = 0; i < 20; ++i) {
    // Field that makes (U, A) magic.
    const double a = pol(rng), u = depth(rng);
    const double b = -(kRb85.beta1 + 2.0 * a * a * kRb85.beta4 * u) / (a * kRb85.beta2);
    const TrapPoint pt{b, u, a};
    REQUIRE(magic_intensity(kRb85, b, a) == doctest::Approx(u).epsilon(1e-12));
    const double tau = analytic_polarization_tau(kRb85, pt, 1.0e-4);
    const auto times = make_time_grid(0.0, 2.0 * tau, 30);
    const auto sim = simulate_ramsey_mc(kRb85, pt, polarization_only(1.0e-4), times, mc(20000, 1000 + i));
    const auto ref = envelope_polarization_analytic(kRb85, pt, 1.0e-4, times);
    CHECK(sim.contrast[0] == 1.0);
    for (std::size_t k = 1; k < times.size(); ++k) {
      const double z = (sim.contrast[k] - ref.contrast[k]) / sim.std_error[k];
      CHECK(std::abs(z) <= 4.1);
      z_sum += z;
      ++z_count;
    }
  }
  CHECK(std::abs(z_sum / z_count) < 0.5);
}

namespace {

// |<exp(2 pi i t delta(E))>| over the 3D harmonic Boltzmann density, by
// Simpson quadrature in x = E / kT. Shift for U < 0 uses U_eff = U + E/2.
double thermal_contrast_quadrature(const SpeciesParams& p, const TrapPoint& pt, double temperature_uk, double t) {
  const double kt = temperature_uk * 1e-6 * 1.380649e-23 / 6.62607015e-34;
  const int n = 40000;
  const double xmax = 60.0, h = xmax / n;
  double re = 0.0, im = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double x = i * h;
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    const double e = x * kt;
    const double delta = oracle::shift(p.beta1, p.beta2, p.beta4, pt.b_field, pt.intensity + e / 2.0, pt.polarization) -
                         oracle::shift(p.beta1, p.beta2, p.beta4, pt.b_field, pt.intensity, pt.polarization);
    const double density = 0.5 * x * x * std::exp(-x);
    re += w * density * std::cos(2.0 * M_PI * delta * t);
    im += w * density * std::sin(2.0 * M_PI * delta * t);
  }
  return std::hypot(re, im) * h / 3.0;
}

}  // namespace

TEST_CASE("thermal channel matches Boltzmann quadrature") {
  const auto times = make_time_grid(0.0, 3.0, 16);
  for (double a : {0.225, solve_polarization_for_magic(kRb85, 3.180, -1.0e6).polarization}) {
    const TrapPoint pt{3.180, -1.0e6, a};
    NoiseModel thermal;
    thermal.temperature = 14.0;
    const auto sim = simulate_ramsey_mc(kRb85, pt, thermal, times, mc(100000, 31));
    for (std::size_t k = 0; k < times.size(); ++k) {
      const double ref = thermal_contrast_quadrature(kRb85, pt, 14.0, times[k]);
      // 32 strongly correlated comparisons: family-wise bound at 4 sigma.
      CHECK(std::abs(sim.contrast[k] - ref) <= 4.0 * sim.std_error[k] + 1e-9);
    }
  }
}
