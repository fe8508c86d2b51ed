#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "magictrap/species.hpp"

namespace magictrap {

struct BUmSample {
  double b_field = 0.0;          // G
  double magic_intensity = 0.0;  // Hz
};

/// Locus of magic intensities against bias field at fixed polarization.
struct BUmLine {
  double polarization = 0.0;
  std::vector<BUmSample> samples;
  double b_max = 0.0;  // G, where the magic intensity reaches zero
};

enum class RootBranch {
  kUnique,  // exactly one root of the quadratic lies in (0, 1]
  kLarger,  // both did; the larger polarization was taken
};

std::string_view to_string(RootBranch branch);

struct MatchSolution {
  double polarization = 0.0;
  double magic_intensity = 0.0;  // Hz
  double working_b = 0.0;        // G
  // d(shift)/dU at the returned point; zero for an exact magic point.
  double residual = 0.0;
  RootBranch branch = RootBranch::kUnique;
};

/// Operating points of two species sharing one bias field.
struct WorkingFieldMatch {
  MatchSolution other;
  double reference_polarization = 0.0;
  double reference_magic_intensity = 0.0;  // Hz
  double reference_b_max = 0.0;            // G
  double margin = 0.0;                     // reference b_max - working_b, G
};

/// Intensity where d(shift)/dU = 0: -(beta1 + A beta2 B) / (2 A^2 beta4).
double magic_intensity(const SpeciesParams& params, double b_field, double polarization);

/// B-intercept of the B-U_M line, -beta1 / (A beta2). Requires beta2 < 0.
double b_max(const SpeciesParams& params, double polarization);

/// Magic intensities on a strictly increasing grid of fields, all <= b_max.
BUmLine b_um_line(const SpeciesParams& params, double polarization, std::span<const double> b_grid);

/// d(shift)/dA = beta2 B U + 2 A beta4 U^2.
double polarization_sensitivity(const SpeciesParams& params, const TrapPoint& point);

/// d(shift)/dU = beta1 + A beta2 B + 2 A^2 beta4 U.
double intensity_slope(const SpeciesParams& params, const TrapPoint& point);

/// Polarization that makes `target_um` the magic intensity at `working_b`.
///
/// Solves 2 beta4 U_M A^2 + beta2 B A + beta1 = 0 and keeps roots in (0, 1].
/// Throws NoRealRootError for a negative discriminant and NoRootInRangeError
/// when neither root is admissible.
MatchSolution solve_polarization_for_magic(const SpeciesParams& params, double working_b,
                                           double target_um);

/// Tunes the polarization of `other` so that it is magic at the field where
/// `reference` (at `reference_polarization`) is operated.
WorkingFieldMatch match_working_field(const SpeciesParams& reference, double reference_polarization,
                                      const SpeciesParams& other, double working_b,
                                      double target_um_other);

}  // namespace magictrap
