#include "magictrap/magic_solver.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "magictrap/errors.hpp"

namespace magictrap {

std::string_view to_string(RootBranch branch) {
  switch (branch) {
    case RootBranch::kUnique:
      return "unique";
    case RootBranch::kLarger:
      return "larger";
  }
  return "unknown";
}

double magic_intensity(const SpeciesParams& params, double b_field, double polarization) {
  if (!(polarization > 0.0)) {
    throw std::invalid_argument("magic_intensity: polarization must be > 0");
  }
  if (!(b_field >= 0.0)) {
    throw std::invalid_argument("magic_intensity: b_field must be >= 0");
  }
  return -(params.beta1 + polarization * params.beta2 * b_field) /
         (2.0 * polarization * polarization * params.beta4);
}

double b_max(const SpeciesParams& params, double polarization) {
  if (!(polarization > 0.0)) {
    throw std::invalid_argument("b_max: polarization must be > 0");
  }
  if (!(params.beta2 < 0.0)) {
    throw std::invalid_argument("b_max: beta2 must be negative for a positive intercept");
  }
  return -params.beta1 / (polarization * params.beta2);
}

BUmLine b_um_line(const SpeciesParams& params, double polarization, std::span<const double> b_grid) {
  if (b_grid.empty()) throw std::invalid_argument("b_um_line: empty field grid");
  BUmLine line;
  line.polarization = polarization;
  line.b_max = b_max(params, polarization);
  line.samples.reserve(b_grid.size());
  for (std::size_t i = 0; i < b_grid.size(); ++i) {
    const double b = b_grid[i];
    if (i > 0 && !(b > b_grid[i - 1])) {
      throw std::invalid_argument("b_um_line: field grid must be strictly increasing");
    }
    if (b > line.b_max) {
      throw std::invalid_argument("b_um_line: field " + std::to_string(b) + " G exceeds b_max " +
                                  std::to_string(line.b_max) + " G (anti-trapping magic point)");
    }
    // Evaluate the grid point equal to b_max exactly at zero rather than at
    // the rounding residue of beta1 + A beta2 B.
    const double um = (b == line.b_max) ? 0.0 : magic_intensity(params, b, polarization);
    line.samples.push_back({b, um});
  }
  return line;
}

double polarization_sensitivity(const SpeciesParams& params, const TrapPoint& point) {
  const double u = point.intensity;
  return params.beta2 * point.b_field * u + 2.0 * point.polarization * params.beta4 * u * u;
}

double intensity_slope(const SpeciesParams& params, const TrapPoint& point) {
  const double a = point.polarization;
  return params.beta1 + a * params.beta2 * point.b_field + 2.0 * a * a * params.beta4 * point.intensity;
}

MatchSolution solve_polarization_for_magic(const SpeciesParams& params, double working_b,
                                           double target_um) {
  if (!(working_b > 0.0)) {
    throw std::invalid_argument("solve_polarization_for_magic: working_b must be > 0");
  }
  if (!(target_um < 0.0)) {
    throw std::invalid_argument("solve_polarization_for_magic: target magic intensity must be < 0");
  }
  const double qa = 2.0 * params.beta4 * target_um;
  const double qb = params.beta2 * working_b;
  const double qc = params.beta1;
  const double disc = qb * qb - 4.0 * qa * qc;
  if (disc < 0.0) {
    throw NoRealRootError("no real polarization gives magic intensity " + std::to_string(target_um) +
                          " Hz at " + std::to_string(working_b) + " G");
  }
  // Cancellation-free pair of roots.
  const double q = -0.5 * (qb + std::copysign(std::sqrt(disc), qb));
  std::array<double, 2> roots{q / qa, q != 0.0 ? qc / q : q / qa};

  auto polish = [&](double a) {
    // One Newton step on the quadratic removes the last ulps of cancellation.
    const double f = (qa * a + qb) * a + qc;
    const double df = 2.0 * qa * a + qb;
    return df != 0.0 ? a - f / df : a;
  };

  // Roots a hair above full circular polarization come from rounded targets;
  // they are clamped to 1 and the residual is reported at the clamped value.
  constexpr double kUnitSlack = 1e-4;
  for (double& r : roots) {
    if (r > 1.0 && r <= 1.0 + kUnitSlack) r = 1.0;
  }

  int admissible = 0;
  double best = 0.0;
  for (double r : roots) {
    if (r > 0.0 && r <= 1.0) {
      ++admissible;
      best = admissible == 1 ? r : std::max(best, r);
    }
  }
  if (admissible == 0) {
    throw NoRootInRangeError("polarization roots " + std::to_string(roots[0]) + ", " +
                             std::to_string(roots[1]) + " lie outside (0, 1]");
  }

  MatchSolution solution;
  solution.polarization = best == 1.0 ? best : polish(best);
  if (!(solution.polarization > 0.0 && solution.polarization <= 1.0)) solution.polarization = best;
  solution.working_b = working_b;
  solution.magic_intensity = magic_intensity(params, working_b, solution.polarization);
  solution.residual = intensity_slope(params, {working_b, target_um, solution.polarization});
  solution.branch = admissible == 2 ? RootBranch::kLarger : RootBranch::kUnique;
  return solution;
}

WorkingFieldMatch match_working_field(const SpeciesParams& reference, double reference_polarization,
                                      const SpeciesParams& other, double working_b,
                                      double target_um_other) {
  const double ref_b_max = b_max(reference, reference_polarization);
  if (!(working_b < ref_b_max)) {
    throw std::invalid_argument("working field " + std::to_string(working_b) +
                                " G is not below the reference b_max " + std::to_string(ref_b_max) +
                                " G");
  }
  WorkingFieldMatch match;
  match.other = solve_polarization_for_magic(other, working_b, target_um_other);
  match.reference_polarization = reference_polarization;
  match.reference_magic_intensity = magic_intensity(reference, working_b, reference_polarization);
  match.reference_b_max = ref_b_max;
  match.margin = ref_b_max - working_b;
  return match;
}

}  // namespace magictrap
